#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gsreloc/fisher.hpp"
#include "gsreloc/refine.hpp"
#include "gsreloc/scene.hpp"

namespace gsreloc {

struct PriorModel {
  enum class Type {
    kPerturbedTruth,  // gaussian-perturbed ground truth
    kCandidateFile,   // fixed pose list from a trajectory file
    kMirroredTopK,    // top-K retrieval sim for two-sided scenes
    kMirroredTop1,    // deterministic wrong-side single prior (baseline)
  };
  Type type = Type::kPerturbedTruth;
  double trans_sigma_m = 0.1;
  double rot_sigma_deg = 1.0;
  // Per-query sigma drawn uniformly from [trans_sigma_m, trans_sigma_max_m]
  // when the max exceeds the base (spreads query difficulty).
  double trans_sigma_max_m = 0.0;
  std::string candidate_file;
  int top_k = 5;
};

// Structured corruption: the highest-uncertainty fraction of matches gets a
// one-sided depth shift along the render ray (wrong geometry exactly where
// the rendered uncertainty is elevated). Single-pass scenarios only.
struct StructuredNoiseConfig {
  bool enabled = false;
  double corrupt_fraction = 0.3;
  double depth_shift_min_m = 0.15;
  double depth_shift_max_m = 0.5;
};

struct ScenarioConfig {
  std::optional<SceneConfig> scene_generate;
  std::string scene_file;  // used when scene_generate is absent
  int query_count = 10;
  PriorModel prior;
  MatcherConfig matcher;
  RansacConfig ransac;
  RefineConfig refine;
  std::string profile = "indoor";  // indoor: 1.0 px + weighted mean; outdoor: 2.5 px + best particle
  bool uncertainty_pnp_on = true;
  bool mcr_on = true;
  StructuredNoiseConfig structured;
  std::uint64_t master_seed = 1;
  std::string output_dir;  // empty: no files written
  int threads = 1;         // 0 = hardware concurrency
  bool record_timing = true;
  FisherOptions fisher;
  std::string trace_cache_dir;
  double query_jitter_trans_m = 0.25;  // query manifold jitter around training views
  double query_jitter_rot_deg = 10.0;
};

struct QueryRecord {
  int query_id = 0;
  double trans_err_m = 0.0;
  double rot_err_deg = 0.0;
  double wall_ms = 0.0;
  bool ok = false;
  double confidence_sum = 0.0;
  double uncertainty_sum = 0.0;
  double outlier_excluded_frac = 1.0;  // structured scenarios: truth-outliers kept out
};

struct MetricsReport {
  std::vector<QueryRecord> queries;
  double median_trans_m = 0.0;
  double median_rot_deg = 0.0;
  double recall_2cm_2deg = 0.0;
  double recall_5cm_5deg = 0.0;
  int failure_count = 0;
  bool valid = true;  // false when more than half the queries failed
  std::vector<std::string> diagnostics_jsonl;
};

MetricsReport run_scenario(const ScenarioConfig& config);

// Spearman rank correlation with average ranks for ties; constant inputs are
// reported as 0 with the degenerate flag set.
double spearman(std::span<const double> x, std::span<const double> y, bool* degenerate);

struct CorrelationReport {
  double spearman_confidence_error = 0.0;
  double spearman_uncertainty_error = 0.0;
  bool degenerate_confidence = false;
  bool degenerate_uncertainty = false;
};

// Rank correlations of per-query aggregate confidence / uncertainty against
// translation error; needs at least 10 successful queries.
CorrelationReport correlation_report(std::span<const QueryRecord> records);

enum class SweepParam { kParticles, kBeta, kPixelNoise };

struct SweepRow {
  double value = 0.0;
  MetricsReport report;
};

// Runs the base scenario once per value under the same master seed (paired
// queries across rows).
std::vector<SweepRow> sweep(const ScenarioConfig& base, SweepParam param,
                            std::span<const double> values);

// Frozen CSV schema: query_id, tx_err_m, rot_err_deg, wall_ms, status.
std::string metrics_to_csv(const MetricsReport& report);
std::string metrics_summary(const MetricsReport& report);

ScenarioConfig scenario_from_json(const std::string& text);
std::vector<Pose> load_pose_list(const std::string& path);
void save_pose_list(std::span<const Pose> poses, const std::string& path);

}  // namespace gsreloc
