#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "gsreloc/bench.hpp"
#include "gsreloc/image.hpp"
#include "gsreloc/renderer.hpp"

namespace {

using namespace gsreloc;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Flags > env (GSRELOC_OUT_DIR) > config file.
void apply_output_dir(ScenarioConfig& cfg, const std::string& flag_value) {
  if (!flag_value.empty()) {
    cfg.output_dir = flag_value;
    return;
  }
  if (const char* env = std::getenv("GSRELOC_OUT_DIR")) {
    if (env[0] != '\0') cfg.output_dir = env;
  }
}

struct RunFlags {
  std::string config_path;
  std::string out_dir;
  int seed = -1;
  int threads = -1;
  int queries = -1;
  std::string mcr;
  std::string upnp;
  std::string record_timing;
};

void add_run_flags(CLI::App* cmd, RunFlags& flags) {
  cmd->add_option("--config", flags.config_path, "Scenario config JSON")->required();
  cmd->add_option("--out-dir", flags.out_dir, "Output directory (overrides env/config)");
  cmd->add_option("--seed", flags.seed, "Master seed override");
  cmd->add_option("--threads", flags.threads, "Worker threads (0 = hardware)");
  cmd->add_option("--queries", flags.queries, "Query count override");
  cmd->add_option("--mcr", flags.mcr, "Monte Carlo refinement: on|off")
      ->check(CLI::IsMember({"on", "off"}));
  cmd->add_option("--upnp", flags.upnp, "Uncertainty-guided PnP: on|off")
      ->check(CLI::IsMember({"on", "off"}));
  cmd->add_option("--record-timing", flags.record_timing, "Record wall times: on|off")
      ->check(CLI::IsMember({"on", "off"}));
}

ScenarioConfig load_scenario(const RunFlags& flags) {
  ScenarioConfig cfg = scenario_from_json(read_file(flags.config_path));
  apply_output_dir(cfg, flags.out_dir);
  if (flags.seed >= 0) cfg.master_seed = static_cast<std::uint64_t>(flags.seed);
  if (flags.threads >= 0) cfg.threads = flags.threads;
  if (flags.queries > 0) cfg.query_count = flags.queries;
  if (!flags.mcr.empty()) cfg.mcr_on = flags.mcr == "on";
  if (!flags.upnp.empty()) cfg.uncertainty_pnp_on = flags.upnp == "on";
  if (!flags.record_timing.empty()) cfg.record_timing = flags.record_timing == "on";
  return cfg;
}

int cmd_scene_gen(const std::string& config_path, const std::string& out_path, long seed) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(config_path));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("scene config: ") + e.what());
  }
  // Reuse the scenario parser for the scene block.
  nlohmann::json wrapper;
  wrapper["scene"] = {{"generate", j}};
  const ScenarioConfig cfg = scenario_from_json(wrapper.dump());
  Rng rng(static_cast<std::uint64_t>(seed));
  const GaussianScene scene = generate_synthetic_scene(*cfg.scene_generate, rng);
  save_scene(scene, out_path);
  std::cout << "scene: " << scene.anchors.size() << " anchors, "
            << scene.gaussians.size() << " gaussians, " << scene.training_views.size()
            << " training views -> " << out_path << "\n";
  return 0;
}

int cmd_run(const RunFlags& flags) {
  const ScenarioConfig cfg = load_scenario(flags);
  const MetricsReport report = run_scenario(cfg);
  std::cout << metrics_summary(report);
  if (!cfg.output_dir.empty()) std::cout << "reports written to " << cfg.output_dir << "\n";
  return 0;
}

int cmd_sweep(const RunFlags& flags, const std::string& param_name,
              const std::string& values_csv) {
  ScenarioConfig cfg = load_scenario(flags);
  SweepParam param;
  if (param_name == "particles")
    param = SweepParam::kParticles;
  else if (param_name == "beta")
    param = SweepParam::kBeta;
  else if (param_name == "noise")
    param = SweepParam::kPixelNoise;
  else
    throw ConfigError("unknown sweep param: " + param_name);

  std::vector<double> values;
  std::stringstream ss(values_csv);
  std::string item;
  while (std::getline(ss, item, ',')) values.push_back(std::stod(item));
  if (values.empty()) throw ConfigError("no sweep values given");

  const std::string out_dir = cfg.output_dir;
  const std::vector<SweepRow> rows = sweep(cfg, param, values);

  std::ostringstream table;
  table << "value,median_trans_m,median_rot_deg,recall_2cm_2deg,recall_5cm_5deg,failures\r\n";
  for (const SweepRow& row : rows) {
    table << row.value << "," << row.report.median_trans_m << ","
          << row.report.median_rot_deg << "," << row.report.recall_2cm_2deg << ","
          << row.report.recall_5cm_5deg << "," << row.report.failure_count << "\r\n";
  }
  std::cout << table.str();
  bool monotone = true;
  for (std::size_t i = 1; i < rows.size(); ++i)
    if (rows[i].report.median_trans_m > rows[i - 1].report.median_trans_m) monotone = false;
  std::cout << "monotone_trend: " << (monotone ? "yes" : "no") << "\n";
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    std::ofstream out(std::filesystem::path(out_dir) / ("sweep_" + param_name + ".csv"),
                      std::ios::binary);
    out << table.str();
    for (const SweepRow& row : rows) {
      std::ostringstream name;
      name << "report_" << param_name << "_" << row.value << ".csv";
      std::ofstream csv(std::filesystem::path(out_dir) / name.str(), std::ios::binary);
      csv << metrics_to_csv(row.report);
    }
    std::cout << "sweep written to " << out_dir << "\n";
  }
  return 0;
}

int cmd_correlate(const RunFlags& flags) {
  const ScenarioConfig cfg = load_scenario(flags);
  const MetricsReport report = run_scenario(cfg);
  const CorrelationReport corr = correlation_report(report.queries);
  std::cout << metrics_summary(report);
  std::cout << "spearman(confidence_sum, trans_err): " << corr.spearman_confidence_error
            << (corr.degenerate_confidence ? " (degenerate)" : "") << "\n";
  std::cout << "spearman(uncertainty_sum, trans_err): " << corr.spearman_uncertainty_error
            << (corr.degenerate_uncertainty ? " (degenerate)" : "") << "\n";
  if (!cfg.output_dir.empty()) {
    std::filesystem::create_directories(cfg.output_dir);
    std::ofstream scatter(std::filesystem::path(cfg.output_dir) / "scatter.csv",
                          std::ios::binary);
    scatter << "query_id,confidence_sum,uncertainty_sum,tx_err_m\r\n";
    for (const QueryRecord& r : report.queries) {
      if (!r.ok) continue;
      scatter << r.query_id << "," << r.confidence_sum << "," << r.uncertainty_sum << ","
              << r.trans_err_m << "\r\n";
    }
    std::cout << "scatter written to " << cfg.output_dir << "\n";
  }
  return 0;
}

int cmd_render(const std::string& scene_path, const std::string& pose_csv,
               const std::string& out_prefix, int long_side, bool with_uncertainty,
               int fisher_stride) {
  GaussianScene scene;
  try {
    scene = load_scene(scene_path);
  } catch (const Error& e) {
    throw SceneIoError(e.what());
  }
  std::array<double, 7> a{};
  {
    std::stringstream ss(pose_csv);
    std::string item;
    int i = 0;
    while (std::getline(ss, item, ',') && i < 7) a[i++] = std::stod(item);
    if (i != 7) throw ConfigError("pose needs 7 comma-separated numbers (qw,qx,qy,qz,tx,ty,tz)");
  }
  const Pose pose = Pose::from_array(a);
  if (scene.training_views.empty()) throw SceneIoError("scene has no training views");
  CameraIntrinsics k = scene.training_views.front().intrinsics;
  if (long_side > 0) k = k.scaled_to_long_side(long_side);

  PerGaussianTrace traces;
  const std::vector<double>* traces_ptr = nullptr;
  if (with_uncertainty) {
    FisherOptions fopts;
    fopts.pixel_stride = fisher_stride;
    const GlobalFisher global = compute_global_fisher(scene, scene.training_views, fopts);
    traces = per_gaussian_trace(global, scene);
    traces_ptr = &traces;
  }
  const RenderBuffers buffers = render(scene, pose, k, traces_ptr);
  write_png(buffers.color, out_prefix + "_color.png");
  write_float_grid(buffers.depth, out_prefix + "_depth.fgrd");
  if (with_uncertainty) write_float_grid(buffers.uncertainty, out_prefix + "_uncertainty.fgrd");
  std::cout << "buffers written with prefix " << out_prefix << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Uncertainty-aware camera pose refinement over gaussian scenes"};
  app.require_subcommand(1);

  // scene gen
  CLI::App* scene_cmd = app.add_subcommand("scene", "Scene utilities");
  scene_cmd->require_subcommand(1);
  CLI::App* gen_cmd = scene_cmd->add_subcommand("gen", "Generate a synthetic scene");
  std::string gen_config, gen_out;
  long gen_seed = 1;
  gen_cmd->add_option("--config", gen_config, "Scene config JSON")->required();
  gen_cmd->add_option("--out", gen_out, "Output scene file")->required();
  gen_cmd->add_option("--seed", gen_seed, "Generation seed");

  RunFlags run_flags;
  CLI::App* run_cmd = app.add_subcommand("run", "Run a scenario end to end");
  add_run_flags(run_cmd, run_flags);

  RunFlags sweep_flags;
  std::string sweep_param, sweep_values;
  CLI::App* sweep_cmd = app.add_subcommand("sweep", "Sweep a parameter over a scenario");
  add_run_flags(sweep_cmd, sweep_flags);
  sweep_cmd->add_option("--param", sweep_param, "particles|beta|noise")->required();
  sweep_cmd->add_option("--values", sweep_values, "Comma-separated values")->required();

  RunFlags corr_flags;
  CLI::App* corr_cmd =
      app.add_subcommand("correlate", "Run a scenario and report error correlations");
  add_run_flags(corr_cmd, corr_flags);

  CLI::App* render_cmd = app.add_subcommand("render", "Debug buffer dumps");
  std::string render_scene, render_pose, render_prefix;
  int render_long_side = 0;
  int render_stride = 2;
  bool render_unc = false;
  render_cmd->add_option("--scene", render_scene, "Scene file")->required();
  render_cmd->add_option("--pose", render_pose, "qw,qx,qy,qz,tx,ty,tz")->required();
  render_cmd->add_option("--out-prefix", render_prefix, "Output path prefix")->required();
  render_cmd->add_option("--long-side", render_long_side, "Rescale long image side");
  render_cmd->add_flag("--with-uncertainty", render_unc, "Also render the uncertainty map");
  render_cmd->add_option("--fisher-stride", render_stride, "Fisher pixel stride");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen_cmd->parsed()) return cmd_scene_gen(gen_config, gen_out, gen_seed);
    if (run_cmd->parsed()) return cmd_run(run_flags);
    if (sweep_cmd->parsed()) return cmd_sweep(sweep_flags, sweep_param, sweep_values);
    if (corr_cmd->parsed()) return cmd_correlate(corr_flags);
    if (render_cmd->parsed())
      return cmd_render(render_scene, render_pose, render_prefix, render_long_side,
                        render_unc, render_stride);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const SceneIoError& e) {
    std::cerr << "scene io error: " << e.what() << "\n";
    return 3;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
