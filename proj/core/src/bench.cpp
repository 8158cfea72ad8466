#include "gsreloc/bench.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "gsreloc/matcher.hpp"
#include "gsreloc/renderer.hpp"

namespace gsreloc {

using json = nlohmann::ordered_json;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t h = 0xcbf29ce484222325ull) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < size; ++i) {
    h ^= bytes[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

double median_of(std::vector<double> values) {
  if (values.empty()) return kInf;
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  if (n % 2 == 1) return values[n / 2];
  return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

json pose_json(const Pose& p) {
  json a = json::array();
  for (double v : p.to_array()) a.push_back(v);
  return a;
}

// Mirror a camera across the y=0 plane (two-sided facade scenes).
Pose mirror_pose_y(const Pose& pose) {
  const Eigen::Vector3d pos(pose.translation.x(), -pose.translation.y(),
                            pose.translation.z());
  const Eigen::Vector3d f = pose.rotation_matrix().col(2);
  const Eigen::Vector3d f_m(f.x(), -f.y(), f.z());
  return make_look_at(pos, pos + f_m);
}

Pose gaussian_perturb(const Pose& pose, double trans_sigma, double rot_sigma_deg, Rng& rng) {
  const Eigen::Vector3d dt(rng.normal(0.0, trans_sigma), rng.normal(0.0, trans_sigma),
                           rng.normal(0.0, trans_sigma));
  const Eigen::Vector3d axis = rng.uniform_unit_vector();
  const double angle_deg = std::abs(rng.normal(0.0, rot_sigma_deg));
  const double half = 0.5 * angle_deg * 3.14159265358979323846 / 180.0;
  const Eigen::Quaterniond dq(std::cos(half), std::sin(half) * axis.x(),
                              std::sin(half) * axis.y(), std::sin(half) * axis.z());
  return Pose(dq * pose.rotation, pose.translation + dt);
}

// Shifts the highest-uncertainty fraction of lifted points away from the
// camera along their render rays and labels them as truth outliers.
void apply_structured_noise(CorrespondenceSet& set, const StructuredNoiseConfig& cfg,
                            Rng& rng) {
  const std::size_t n = set.matches.size();
  if (n == 0) return;
  const std::size_t n_corrupt = static_cast<std::size_t>(
      std::ceil(cfg.corrupt_fraction * static_cast<double>(n)));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return set.matches[a].uncertainty > set.matches[b].uncertainty;
  });
  std::vector<char> corrupt(n, 0);
  for (std::size_t i = 0; i < n_corrupt && i < n; ++i) corrupt[order[i]] = 1;
  for (std::size_t i = 0; i < n; ++i) {
    Match& m = set.matches[i];
    m.is_outlier_truth = corrupt[i] != 0;
    if (!corrupt[i] || !m.lifted_point) continue;
    const Eigen::Vector3d pc = set.render_pose.apply_inverse(*m.lifted_point);
    if (pc.z() <= 0.0) continue;
    const double shift = rng.uniform(cfg.depth_shift_min_m, cfg.depth_shift_max_m);
    const double factor = (pc.z() + shift) / pc.z();
    m.lifted_point = set.render_pose.apply(pc * factor);
  }
}

struct ScenarioRuntime {
  GaussianScene scene;
  PerGaussianTrace traces;
  CameraIntrinsics base_intrinsics;
  std::vector<Pose> file_candidates;
};

struct QueryOutput {
  QueryRecord record;
  std::vector<std::string> diagnostics;
};

PriorSource build_prior(const ScenarioConfig& cfg, const ScenarioRuntime& rt,
                        const Pose& truth, Rng& rng) {
  switch (cfg.prior.type) {
    case PriorModel::Type::kPerturbedTruth: {
      double sigma = cfg.prior.trans_sigma_m;
      if (cfg.prior.trans_sigma_max_m > sigma)
        sigma = rng.uniform(sigma, cfg.prior.trans_sigma_max_m);
      return PriorSource::single_pose(
          gaussian_perturb(truth, sigma, cfg.prior.rot_sigma_deg, rng));
    }
    case PriorModel::Type::kCandidateFile:
      return PriorSource::candidate_list(rt.file_candidates);
    case PriorModel::Type::kMirroredTop1:
      return PriorSource::single_pose(
          gaussian_perturb(mirror_pose_y(truth), 0.1, 1.0, rng));
    case PriorModel::Type::kMirroredTopK: {
      std::vector<Pose> candidates;
      const Pose wrong = mirror_pose_y(truth);
      for (int i = 0; i < cfg.prior.top_k; ++i) {
        const bool right_side = (i >= 2) && (i % 2 == 0);
        if (right_side)
          candidates.push_back(gaussian_perturb(truth, 0.35, 3.0, rng));
        else
          candidates.push_back(gaussian_perturb(wrong, 0.1, 1.0, rng));
      }
      return PriorSource::candidate_list(std::move(candidates));
    }
  }
  throw ConfigError("unknown prior type");
}

QueryOutput run_query(const ScenarioConfig& cfg, const ScenarioRuntime& rt, int query_id) {
  QueryOutput out;
  out.record.query_id = query_id;
  const std::uint64_t q = static_cast<std::uint64_t>(query_id);

  // Ground-truth placement on the query manifold: jitter around a training
  // view. Mirrored priors need the query pinned to the first-side views.
  const std::size_t n_views = rt.scene.training_views.size();
  std::size_t base_view = q % n_views;
  if (cfg.prior.type == PriorModel::Type::kMirroredTopK ||
      cfg.prior.type == PriorModel::Type::kMirroredTop1)
    base_view = q % std::max<std::size_t>(n_views / 2, 1);
  Rng setup_rng = Rng::derive(cfg.master_seed, {q, 11});
  const Pose truth = perturb(rt.scene.training_views[base_view].pose,
                             cfg.query_jitter_trans_m, cfg.query_jitter_rot_deg, setup_rng);

  Rng prior_rng = Rng::derive(cfg.master_seed, {q, 22});
  const PriorSource prior = build_prior(cfg, rt, truth, prior_rng);

  const auto t0 = std::chrono::steady_clock::now();
  bool ok = false;
  Pose estimate;
  double excluded_frac = 1.0;
  AggregateScores aggregates;
  std::vector<json> diag_records;

  if (cfg.mcr_on) {
    RefineInputs inputs;
    inputs.scene = &rt.scene;
    inputs.traces = &rt.traces;
    inputs.query_pose_truth = truth;
    inputs.base_intrinsics = rt.base_intrinsics;
    inputs.matcher = cfg.matcher;
    inputs.ransac = cfg.ransac;
    inputs.use_uncertainty_weights = cfg.uncertainty_pnp_on;
    try {
      const RefineOutcome outcome =
          refine(inputs, prior, cfg.refine, mix64(cfg.master_seed ^ mix64(q ^ 33)));
      ok = true;
      estimate = outcome.pose;
      aggregates = outcome.selected_aggregates;
      for (const ParticleDiagnostic& d : outcome.diagnostics) {
        json rec;
        rec["query_id"] = query_id;
        rec["iteration"] = d.iteration;
        rec["particle"] = d.particle;
        rec["phase"] = d.phase;
        rec["pose"] = pose_json(d.pose);
        rec["weight"] = d.weight;
        rec["score_sum"] = d.score_sum;
        rec["trans_err_m"] = d.trans_err_m;
        rec["rot_err_deg"] = d.rot_err_deg;
        rec["failed"] = d.failed;
        diag_records.push_back(std::move(rec));
      }
    } catch (const AllParticlesFailed&) {
      ok = false;
    }
  } else {
    // Single-pass refinement at the prior (deterministic baseline pipeline).
    const int res = cfg.refine.resolution_schedule.back();
    const CameraIntrinsics k = rt.base_intrinsics.scaled_to_long_side(res);
    const Pose pose_init = prior.candidates.front();
    Rng solve_rng = Rng::derive(cfg.master_seed, {q, 33});
    RenderChannels channels;
    channels.color = false;
    const RenderBuffers buffers =
        render_primitives(rt.scene.gaussians, pose_init, k, &rt.traces, channels);
    try {
      CorrespondenceSet matches =
          generate_matches(rt.scene, truth, pose_init, k, buffers.depth, cfg.matcher,
                           solve_rng);
      matches = lift_matches(std::move(matches), pose_init, k, buffers.depth,
                             buffers.uncertainty);
      if (cfg.structured.enabled) {
        Rng corrupt_rng = Rng::derive(cfg.master_seed, {q, 44});
        apply_structured_noise(matches, cfg.structured, corrupt_rng);
      }
      aggregates = aggregate_scores(matches);
      SamplingWeights weights;
      const SamplingWeights* weights_ptr = nullptr;
      if (cfg.uncertainty_pnp_on) {
        std::vector<double> us(matches.matches.size());
        for (std::size_t i = 0; i < matches.matches.size(); ++i)
          us[i] = matches.matches[i].uncertainty;
        weights = compute_sampling_weights(us, cfg.ransac.beta, cfg.ransac.epsilon);
        weights_ptr = &weights;
      }
      const std::vector<SolverPoint> pts = to_solver_points(matches);
      const PnPResult pnp = ransac_pnp(pts, k, weights_ptr, cfg.ransac, solve_rng);
      ok = true;
      estimate = pnp.pose;
      int truth_outliers = 0;
      int kept = 0;
      for (std::size_t i = 0; i < matches.matches.size(); ++i) {
        if (!matches.matches[i].is_outlier_truth) continue;
        ++truth_outliers;
        if (pnp.inlier_mask[i]) ++kept;
      }
      if (truth_outliers > 0)
        excluded_frac = 1.0 - static_cast<double>(kept) / truth_outliers;
      json rec;
      rec["query_id"] = query_id;
      rec["phase"] = "single";
      rec["pose"] = pose_json(estimate);
      rec["confidence_sum"] = aggregates.confidence_sum;
      rec["uncertainty_sum"] = aggregates.uncertainty_sum;
      rec["outlier_excluded_frac"] = excluded_frac;
      rec["iterations_used"] = pnp.iterations_used;
      diag_records.push_back(std::move(rec));
    } catch (const Error&) {
      ok = false;
    }
  }

  const auto t1 = std::chrono::steady_clock::now();
  out.record.ok = ok;
  out.record.wall_ms =
      cfg.record_timing
          ? std::chrono::duration_cast<std::chrono::duration<double, std::milli>>(t1 - t0)
                .count()
          : 0.0;
  if (ok) {
    const PoseError err = pose_error(estimate, truth);
    out.record.trans_err_m = err.translation_m;
    out.record.rot_err_deg = err.rotation_deg;
  } else {
    out.record.trans_err_m = kInf;
    out.record.rot_err_deg = kInf;
  }
  out.record.confidence_sum = aggregates.confidence_sum;
  out.record.uncertainty_sum = aggregates.uncertainty_sum;
  out.record.outlier_excluded_frac = excluded_frac;
  for (json& rec : diag_records) out.diagnostics.push_back(rec.dump());
  return out;
}

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return static_cast<int>(std::clamp<unsigned>(hw, 1, 8));
}

}  // namespace

MetricsReport run_scenario(const ScenarioConfig& cfg) {
  if (cfg.query_count < 1) throw ConfigError("query_count must be >= 1");
  if (cfg.structured.enabled && cfg.mcr_on)
    throw ConfigError("structured noise is defined for single-pass scenarios (mcr off)");
  if (!cfg.scene_generate.has_value() && cfg.scene_file.empty())
    throw ConfigError("scenario needs a scene file or generation config");

  ScenarioRuntime rt;
  if (cfg.scene_generate.has_value()) {
    Rng scene_rng = Rng::derive(cfg.master_seed, {77});
    rt.scene = generate_synthetic_scene(*cfg.scene_generate, scene_rng);
  } else {
    try {
      rt.scene = load_scene(cfg.scene_file);
    } catch (const Error& e) {
      throw SceneIoError(e.what());
    }
  }
  if (rt.scene.training_views.empty()) throw ConfigError("scene has no training views");
  rt.base_intrinsics = rt.scene.training_views.front().intrinsics;

  if (cfg.prior.type == PriorModel::Type::kCandidateFile) {
    try {
      rt.file_candidates = load_pose_list(cfg.prior.candidate_file);
    } catch (const Error& e) {
      throw ConfigError(std::string("candidate file: ") + e.what());
    }
    if (rt.file_candidates.empty()) throw ConfigError("candidate file has no poses");
  }

  // Fisher traces, optionally cached by scene/view/lambda/stride key.
  FisherOptions fopts = cfg.fisher;
  fopts.threads = resolve_threads(cfg.threads);
  bool have_traces = false;
  std::string cache_path;
  if (!cfg.trace_cache_dir.empty()) {
    const std::string scene_json = scene_to_json(rt.scene);
    std::uint64_t h = fnv1a(scene_json.data(), scene_json.size());
    h = fnv1a(&fopts.lambda, sizeof(fopts.lambda), h);
    h = fnv1a(&fopts.pixel_stride, sizeof(fopts.pixel_stride), h);
    char name[64];
    std::snprintf(name, sizeof(name), "fisher_%016llx.bin",
                  static_cast<unsigned long long>(h));
    std::filesystem::create_directories(cfg.trace_cache_dir);
    cache_path = (std::filesystem::path(cfg.trace_cache_dir) / name).string();
    GlobalFisher cached;
    if (load_fisher_cache(cache_path, &cached, &rt.traces) &&
        rt.traces.size() == rt.scene.gaussians.size())
      have_traces = true;
  }
  if (!have_traces) {
    const GlobalFisher global = compute_global_fisher(rt.scene, rt.scene.training_views, fopts);
    rt.traces = per_gaussian_trace(global, rt.scene);
    if (!cache_path.empty()) save_fisher_cache(global, rt.traces, cache_path);
  }

  const int threads = resolve_threads(cfg.threads);
  std::vector<QueryOutput> outputs(cfg.query_count);
  if (threads == 1) {
    for (int qid = 0; qid < cfg.query_count; ++qid) outputs[qid] = run_query(cfg, rt, qid);
  } else {
    std::atomic<int> next{0};
    auto worker = [&]() {
      for (;;) {
        const int qid = next.fetch_add(1);
        if (qid >= cfg.query_count) return;
        outputs[qid] = run_query(cfg, rt, qid);
      }
    };
    std::vector<std::thread> pool;
    for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  MetricsReport report;
  std::vector<double> trans_ok;
  std::vector<double> rot_ok;
  int recall22 = 0;
  int recall55 = 0;
  for (QueryOutput& out : outputs) {
    const QueryRecord& r = out.record;
    if (r.ok) {
      trans_ok.push_back(r.trans_err_m);
      rot_ok.push_back(r.rot_err_deg);
      if (r.trans_err_m <= 0.02 && r.rot_err_deg <= 2.0) ++recall22;
      if (r.trans_err_m <= 0.05 && r.rot_err_deg <= 5.0) ++recall55;
    } else {
      ++report.failure_count;
    }
    report.queries.push_back(r);
    for (std::string& line : out.diagnostics)
      report.diagnostics_jsonl.push_back(std::move(line));
  }
  report.valid = 2 * static_cast<int>(trans_ok.size()) >= cfg.query_count;
  report.median_trans_m = report.valid ? median_of(trans_ok) : kInf;
  report.median_rot_deg = report.valid ? median_of(rot_ok) : kInf;
  report.recall_2cm_2deg = static_cast<double>(recall22) / cfg.query_count;
  report.recall_5cm_5deg = static_cast<double>(recall55) / cfg.query_count;

  if (!cfg.output_dir.empty()) {
    std::filesystem::create_directories(cfg.output_dir);
    const std::filesystem::path dir(cfg.output_dir);
    {
      std::ofstream csv(dir / "report.csv", std::ios::binary);
      if (!csv) throw IoError("cannot write report.csv");
      csv << metrics_to_csv(report);
    }
    {
      std::ofstream jsonl(dir / "diagnostics.jsonl", std::ios::binary);
      for (const std::string& line : report.diagnostics_jsonl) jsonl << line << "\n";
    }
    {
      json summary;
      summary["median_trans_m"] = report.median_trans_m;
      summary["median_rot_deg"] = report.median_rot_deg;
      summary["recall_2cm_2deg"] = report.recall_2cm_2deg;
      summary["recall_5cm_5deg"] = report.recall_5cm_5deg;
      summary["failure_count"] = report.failure_count;
      summary["valid"] = report.valid;
      std::ofstream mj(dir / "metrics.json", std::ios::binary);
      mj << summary.dump(2) << "\n";
    }
  }
  return report;
}

double spearman(std::span<const double> x, std::span<const double> y, bool* degenerate) {
  if (degenerate) *degenerate = false;
  const std::size_t n = x.size();
  if (n != y.size() || n < 2) {
    if (degenerate) *degenerate = true;
    return 0.0;
  }
  const auto ranks = [](std::span<const double> v) {
    const std::size_t n = v.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(n, 0.0);
    std::size_t i = 0;
    while (i < n) {
      std::size_t j = i;
      while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
      const double avg = 0.5 * (static_cast<double>(i) + static_cast<double>(j)) + 1.0;
      for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg;
      i = j + 1;
    }
    return r;
  };
  const std::vector<double> rx = ranks(x);
  const std::vector<double> ry = ranks(y);
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += rx[i];
    my += ry[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx <= 0.0 || syy <= 0.0) {
    if (degenerate) *degenerate = true;
    return 0.0;
  }
  return sxy / std::sqrt(sxx * syy);
}

CorrelationReport correlation_report(std::span<const QueryRecord> records) {
  std::vector<double> conf, unc, err;
  for (const QueryRecord& r : records) {
    if (!r.ok) continue;
    conf.push_back(r.confidence_sum);
    unc.push_back(r.uncertainty_sum);
    err.push_back(r.trans_err_m);
  }
  if (conf.size() < 10) throw InsufficientData("need >= 10 successful queries");
  CorrelationReport rep;
  rep.spearman_confidence_error = spearman(conf, err, &rep.degenerate_confidence);
  rep.spearman_uncertainty_error = spearman(unc, err, &rep.degenerate_uncertainty);
  return rep;
}

std::vector<SweepRow> sweep(const ScenarioConfig& base, SweepParam param,
                            std::span<const double> values) {
  std::vector<SweepRow> rows;
  for (double v : values) {
    ScenarioConfig cfg = base;
    cfg.output_dir.clear();
    switch (param) {
      case SweepParam::kParticles:
        cfg.refine.particles = static_cast<int>(std::lround(v));
        break;
      case SweepParam::kBeta:
        cfg.ransac.beta = v;
        break;
      case SweepParam::kPixelNoise:
        cfg.matcher.pixel_noise_sigma = v;
        break;
    }
    rows.push_back({v, run_scenario(cfg)});
  }
  return rows;
}

std::string metrics_to_csv(const MetricsReport& report) {
  std::ostringstream out;
  out << "query_id,tx_err_m,rot_err_deg,wall_ms,status\r\n";
  for (const QueryRecord& r : report.queries) {
    char wall[32];
    std::snprintf(wall, sizeof(wall), "%.3f", r.wall_ms);
    out << r.query_id << "," << (r.ok ? fmt_double(r.trans_err_m) : "inf") << ","
        << (r.ok ? fmt_double(r.rot_err_deg) : "inf") << "," << wall << ","
        << (r.ok ? "ok" : "failed") << "\r\n";
  }
  return out.str();
}

std::string metrics_summary(const MetricsReport& report) {
  std::ostringstream out;
  out << "queries:          " << report.queries.size() << "\n"
      << "failures:         " << report.failure_count << "\n"
      << "median trans (m): " << fmt_double(report.median_trans_m) << "\n"
      << "median rot (deg): " << fmt_double(report.median_rot_deg) << "\n"
      << "recall@(2cm,2deg): " << fmt_double(report.recall_2cm_2deg) << "\n"
      << "recall@(5cm,5deg): " << fmt_double(report.recall_5cm_5deg) << "\n"
      << "valid:            " << (report.valid ? "yes" : "no") << "\n";
  return out.str();
}

namespace {

SceneConfig scene_config_from_json(const json& j) {
  SceneConfig c;
  if (j.contains("layout")) {
    const std::string layout = j.at("layout").get<std::string>();
    if (layout == "room")
      c.layout = SceneLayout::kRoom;
    else if (layout == "facade")
      c.layout = SceneLayout::kFacade;
    else
      throw ConfigError("unknown scene layout: " + layout);
  }
  const auto get_int = [&](const char* key, int& out) {
    if (j.contains(key)) out = j.at(key).get<int>();
  };
  const auto get_double = [&](const char* key, double& out) {
    if (j.contains(key)) out = j.at(key).get<double>();
  };
  get_int("anchor_count", c.anchor_count);
  get_int("feature_dim", c.feature_dim);
  get_int("offsets_per_anchor", c.offsets_per_anchor);
  if (j.contains("extent")) {
    const json& e = j.at("extent");
    c.extent = {e.at(0).get<double>(), e.at(1).get<double>(), e.at(2).get<double>()};
  }
  get_double("clutter_fraction", c.clutter_fraction);
  get_double("offset_scale", c.offset_scale);
  get_int("training_view_count", c.training_view_count);
  get_double("view_ring_radius", c.view_ring_radius);
  get_int("image_width", c.image_width);
  get_int("image_height", c.image_height);
  get_double("fov_deg", c.fov_deg);
  get_double("facade_separation", c.facade_separation);
  get_double("facade_view_distance", c.facade_view_distance);
  get_int("partition_count", c.partition_count);
  get_double("partition_depth", c.partition_depth);
  return c;
}

}  // namespace

ScenarioConfig scenario_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config parse: ") + e.what());
  }
  try {
    ScenarioConfig cfg;
    if (j.contains("profile")) cfg.profile = j.at("profile").get<std::string>();
    if (cfg.profile == "indoor") {
      cfg.ransac = RansacConfig::indoor_profile();
      cfg.refine.extraction = ExtractionMode::kWeightedMean;
    } else if (cfg.profile == "outdoor") {
      cfg.ransac = RansacConfig::outdoor_profile();
      cfg.refine.extraction = ExtractionMode::kBestParticle;
    } else {
      throw ConfigError("unknown profile: " + cfg.profile);
    }

    if (!j.contains("scene")) throw ConfigError("missing scene section");
    const json& js = j.at("scene");
    if (js.contains("file"))
      cfg.scene_file = js.at("file").get<std::string>();
    else if (js.contains("generate"))
      cfg.scene_generate = scene_config_from_json(js.at("generate"));
    else
      throw ConfigError("scene needs 'file' or 'generate'");

    if (j.contains("query_count")) cfg.query_count = j.at("query_count").get<int>();
    if (j.contains("seed")) cfg.master_seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("output_dir")) cfg.output_dir = j.at("output_dir").get<std::string>();
    if (j.contains("threads")) cfg.threads = j.at("threads").get<int>();
    if (j.contains("record_timing")) cfg.record_timing = j.at("record_timing").get<bool>();
    if (j.contains("trace_cache_dir"))
      cfg.trace_cache_dir = j.at("trace_cache_dir").get<std::string>();
    if (j.contains("query_jitter_trans_m"))
      cfg.query_jitter_trans_m = j.at("query_jitter_trans_m").get<double>();
    if (j.contains("query_jitter_rot_deg"))
      cfg.query_jitter_rot_deg = j.at("query_jitter_rot_deg").get<double>();

    if (j.contains("prior")) {
      const json& jp = j.at("prior");
      const std::string type = jp.value("type", "perturbed_truth");
      if (type == "perturbed_truth")
        cfg.prior.type = PriorModel::Type::kPerturbedTruth;
      else if (type == "candidate_file")
        cfg.prior.type = PriorModel::Type::kCandidateFile;
      else if (type == "mirrored_topk")
        cfg.prior.type = PriorModel::Type::kMirroredTopK;
      else if (type == "mirrored_top1")
        cfg.prior.type = PriorModel::Type::kMirroredTop1;
      else
        throw ConfigError("unknown prior type: " + type);
      cfg.prior.trans_sigma_m = jp.value("trans_sigma_m", cfg.prior.trans_sigma_m);
      cfg.prior.rot_sigma_deg = jp.value("rot_sigma_deg", cfg.prior.rot_sigma_deg);
      cfg.prior.trans_sigma_max_m = jp.value("trans_sigma_max_m", cfg.prior.trans_sigma_max_m);
      cfg.prior.candidate_file = jp.value("candidate_file", cfg.prior.candidate_file);
      cfg.prior.top_k = jp.value("top_k", cfg.prior.top_k);
    }

    if (j.contains("matcher")) {
      const json& jm = j.at("matcher");
      MatcherConfig& m = cfg.matcher;
      m.inlier_count = jm.value("inlier_count", m.inlier_count);
      m.outlier_fraction = jm.value("outlier_fraction", m.outlier_fraction);
      m.pixel_noise_sigma = jm.value("pixel_noise_sigma", m.pixel_noise_sigma);
      m.confidence_tau_px = jm.value("confidence_tau_px", m.confidence_tau_px);
      m.confidence_noise_sigma = jm.value("confidence_noise_sigma", m.confidence_noise_sigma);
      m.covisibility_depth_tol = jm.value("covisibility_depth_tol", m.covisibility_depth_tol);
      m.noise_gain_per_m = jm.value("noise_gain_per_m", m.noise_gain_per_m);
      m.noise_gain_per_deg = jm.value("noise_gain_per_deg", m.noise_gain_per_deg);
      m.bias_px_per_m = jm.value("bias_px_per_m", m.bias_px_per_m);
      m.bias_px_per_deg = jm.value("bias_px_per_deg", m.bias_px_per_deg);
    }

    if (j.contains("ransac")) {
      const json& jr = j.at("ransac");
      RansacConfig& r = cfg.ransac;
      r.reproj_threshold_px = jr.value("reproj_threshold_px", r.reproj_threshold_px);
      r.max_iterations = jr.value("max_iterations", r.max_iterations);
      r.confidence = jr.value("confidence", r.confidence);
      r.min_sample = jr.value("min_sample", r.min_sample);
      r.beta = jr.value("beta", r.beta);
      r.epsilon = jr.value("epsilon", r.epsilon);
    }

    if (j.contains("refine")) {
      const json& jr = j.at("refine");
      RefineConfig& r = cfg.refine;
      r.iterations = jr.value("iterations", r.iterations);
      r.particles = jr.value("particles", r.particles);
      r.iter1_trans_range_m = jr.value("iter1_trans_range_m", r.iter1_trans_range_m);
      r.iter1_rot_range_deg = jr.value("iter1_rot_range_deg", r.iter1_rot_range_deg);
      r.iter2_trans_range_m = jr.value("iter2_trans_range_m", r.iter2_trans_range_m);
      r.iter2_rot_range_deg = jr.value("iter2_rot_range_deg", r.iter2_rot_range_deg);
      if (jr.contains("resolution_schedule")) {
        r.resolution_schedule.clear();
        for (const json& v : jr.at("resolution_schedule"))
          r.resolution_schedule.push_back(v.get<int>());
      }
      if (jr.contains("extraction")) {
        const std::string mode = jr.at("extraction").get<std::string>();
        if (mode == "weighted_mean")
          r.extraction = ExtractionMode::kWeightedMean;
        else if (mode == "best_particle")
          r.extraction = ExtractionMode::kBestParticle;
        else
          throw ConfigError("unknown extraction mode: " + mode);
      }
      r.use_ssim_final = jr.value("use_ssim_final", r.use_ssim_final);
      r.resample_after_final = jr.value("resample_after_final", r.resample_after_final);
    }

    if (j.contains("ablation")) {
      const json& ja = j.at("ablation");
      cfg.uncertainty_pnp_on = ja.value("uncertainty_pnp", cfg.uncertainty_pnp_on);
      cfg.mcr_on = ja.value("mcr", cfg.mcr_on);
    }

    if (j.contains("structured_noise")) {
      const json& jn = j.at("structured_noise");
      cfg.structured.enabled = jn.value("enabled", cfg.structured.enabled);
      cfg.structured.corrupt_fraction = jn.value("corrupt_fraction", cfg.structured.corrupt_fraction);
      cfg.structured.depth_shift_min_m = jn.value("depth_shift_min_m", cfg.structured.depth_shift_min_m);
      cfg.structured.depth_shift_max_m = jn.value("depth_shift_max_m", cfg.structured.depth_shift_max_m);
    }

    if (j.contains("fisher")) {
      const json& jf = j.at("fisher");
      cfg.fisher.lambda = jf.value("lambda", cfg.fisher.lambda);
      cfg.fisher.pixel_stride = jf.value("pixel_stride", cfg.fisher.pixel_stride);
    }
    return cfg;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

std::vector<Pose> load_pose_list(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  json j;
  try {
    j = json::parse(ss.str());
  } catch (const json::exception& e) {
    throw ParseError(e.what());
  }
  std::vector<Pose> poses;
  try {
    for (const json& jp : j.at("poses")) {
      std::array<double, 7> a{};
      for (int i = 0; i < 7; ++i) a[i] = jp.at(i).get<double>();
      poses.push_back(Pose::from_array(a));
    }
  } catch (const json::exception& e) {
    throw ParseError(e.what());
  }
  return poses;
}

void save_pose_list(std::span<const Pose> poses, const std::string& path) {
  json j;
  json arr = json::array();
  for (const Pose& p : poses) arr.push_back(pose_json(p));
  j["poses"] = std::move(arr);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << j.dump(2) << "\n";
}

}  // namespace gsreloc
