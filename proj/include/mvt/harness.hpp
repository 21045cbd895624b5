#pragma once

#include "mvt/cca.hpp"
#include "mvt/common.hpp"
#include "mvt/erm.hpp"
#include "mvt/losses.hpp"
#include "mvt/synth.hpp"
#include "mvt/transfer.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace mvt {

enum class Pipeline { Plain, Distill, LupiTcca, LupiExpectation, Coreg };

const char* pipeline_name(Pipeline p);
Pipeline pipeline_from_name(const std::string& name);

enum class SMode { Theory, Oracle, Explicit };
enum class LStarMode { Planted, Plugin };

struct ModelConfig {
  int d_x = 10;
  int d_z = 10;
  Vec lambdas;
  std::uint64_t seed = 7;
};

struct LabelConfig {
  LabelKind kind = LabelKind::RegressionGaussianNoise;
  double w_star_norm = 1.0;
  std::string w_star_mode = "phi1";  // or "random"
  double noise_std = 0.0;
};

struct BoundsConfig {
  double b_w = 1.0;
  double b_v = 1.0;
};

struct BandConfig {
  double lo = 0.0;
  double hi = 0.0;
};

struct StabilityConfig {
  double gamma = 1.0;
};

struct ExperimentConfig {
  Pipeline pipeline = Pipeline::Plain;
  LossKind loss = LossKind::SquaredError;
  ModelConfig model;
  LabelConfig labels;
  std::vector<long> n_grid;
  int seeds = 1;
  BoundsConfig bounds;
  SMode s_mode = SMode::Oracle;
  double s_explicit = 0.0;
  LStarMode l_star_mode = LStarMode::Planted;
  BoundednessMode boundedness = BoundednessMode::Quantile;
  SolverConfig solver;
  std::string output_dir = "out";
  std::uint64_t master_seed = 1;
  long teacher_n = 4096;
  long basis_pool = 0;  // 0 = population basis
  int workers = 1;
  bool timing = false;
  long gen_n = 0;  // 0 = n_grid.front()
  long eval_pool = 100000;
  std::optional<BandConfig> assert_band;
  StabilityConfig stability;
  // Canonical dump with pipeline/output_dir removed; equal keys mean two
  // configs are comparable.
  std::string comparison_key;
};

ExperimentConfig parse_experiment_config(const std::string& json_text);
ExperimentConfig load_experiment_config(const std::string& path);

struct SweepRow {
  std::string pipeline;
  long n = 0;
  int seed = 0;
  double excess_risk = 0.0;
  double teacher_excess_risk = 0.0;
  double agreement_sq = 0.0;
  double reg_weight = 0.0;
  double wall_ms = 0.0;
  bool failed = false;
  std::string error;
};

struct SweepSummary {
  long n = 0;
  double mean = 0.0;
  double median = 0.0;
  double std_error = 0.0;
  int cells = 0;
  int failures = 0;
};

struct SweepResult {
  std::string pipeline;
  std::vector<SweepRow> rows;      // sorted by (n, seed)
  std::vector<SweepSummary> summary;
  int failures = 0;
};

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  std::pair<long, long> n_range_used{0, 0};
  int excluded_points = 0;
};

SweepResult run_rate_sweep(const ExperimentConfig& cfg);

// OLS of log(median excess) on log(n); cells with median at or below the
// logging floor are excluded.
RateFit fit_rate(const SweepResult& result);

std::vector<SweepSummary> summarize_rows(const std::vector<SweepRow>& rows);

struct ComparisonRow {
  long n = 0;
  int wins_a = 0;
  int wins_b = 0;
  int ties = 0;
  int usable = 0;
  double win_rate_a = 0.0;
  double median_ratio = 0.0;  // median over seeds of excess_a / excess_b
};

// Runs both configs cell-paired (same derived seeds) and tabulates wins of
// A over B per n. Configs must agree on everything except the pipeline.
std::vector<ComparisonRow> run_comparison(const ExperimentConfig& cfg_a,
                                          const ExperimentConfig& cfg_b);

struct StabilityReport {
  double beta_effective = 0.0;   // beta * R^2
  double strong_convexity = 0.0; // per-sample, 0 for linear losses
  double gamma = 0.0;
  long n = 0;
  double precondition_lhs = 0.0;  // (lambda + gamma) n
  double precondition_rhs = 0.0;  // 8 beta_effective
  double factor = 0.0;            // 1 - 8 beta / ((lambda + gamma) n)
  double mean_expected_loss = 0.0;
  double mean_empirical_loss = 0.0;
  double paired_gap_mean = 0.0;  // mean of factor*G - Ghat across seeds
  double paired_gap_se = 0.0;
  bool expectation_ok = false;
  long displacement_trials = 0;
  long displacement_violations = 0;
  double max_displacement_ratio = 0.0;
  int seeds = 0;
};

StabilityReport stability_probe(const ExperimentConfig& cfg, int replacements);

void emit_csv(const SweepResult& result, const std::string& path);
std::vector<SweepRow> parse_sweep_csv(const std::string& path);

void emit_svg_plot(const SweepResult& result,
                   const std::optional<RateFit>& fit, const std::string& path);

void write_summary_json(const SweepResult& result, const RateFit* fit,
                        const ExperimentConfig& cfg, const std::string& path);

void emit_dataset_csv(const std::vector<PairedSample>& data,
                      const std::string& path);

// Self-check of the CCA coordinate-system properties; prints one line per
// property and returns the number of failures.
int run_cca_check(std::ostream& out);

}  // namespace mvt
