// Command-line harness: rate sweeps, paired pipeline comparisons, stability
// probes, data generation and a CCA self-check.
//
// Exit codes: 0 ok, 2 config error, 3 solver/convergence failure threshold,
// 4 acceptance-band violation under --assert.

#include "mvt/harness.hpp"
#include "mvt/jsonio.hpp"

#include "CLI11.hpp"

#include <cstdio>
#include <filesystem>
#include <iostream>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitSolver = 3;
constexpr int kExitBand = 4;

namespace fs = std::filesystem;

int cmd_rate_sweep(const std::string& config_path, bool assert_band) {
  const mvt::ExperimentConfig cfg = mvt::load_experiment_config(config_path);
  if (assert_band && !cfg.assert_band) {
    throw mvt::ConfigError("--assert requires an assert_band in the config");
  }
  const mvt::SweepResult result = mvt::run_rate_sweep(cfg);

  fs::create_directories(cfg.output_dir);
  const std::string csv_path = (fs::path(cfg.output_dir) / "sweep.csv").string();
  mvt::emit_csv(result, csv_path);

  std::optional<mvt::RateFit> fit;
  try {
    fit = mvt::fit_rate(result);
  } catch (const mvt::InvalidInput& e) {
    std::cerr << "rate fit unavailable: " << e.what() << "\n";
  }
  mvt::emit_svg_plot(result, fit,
                     (fs::path(cfg.output_dir) / "plot.svg").string());
  mvt::write_summary_json(result, fit ? &*fit : nullptr, cfg,
                          (fs::path(cfg.output_dir) / "summary.json").string());

  for (const auto& s : result.summary) {
    std::printf("n=%-7ld median=%-12.5g mean=%-12.5g se=%-10.4g cells=%d "
                "failures=%d\n",
                s.n, s.median, s.mean, s.std_error, s.cells, s.failures);
  }
  if (result.failures > 0) {
    std::printf("excluded %d failed cells\n", result.failures);
  }
  if (fit) {
    std::printf("slope=%.4f intercept=%.4f r2=%.4f over n in [%ld, %ld]\n",
                fit->slope, fit->intercept, fit->r_squared,
                fit->n_range_used.first, fit->n_range_used.second);
  }
  std::printf("wrote %s\n", csv_path.c_str());

  if (assert_band) {
    if (!fit) {
      std::fprintf(stderr, "assert: no rate fit available\n");
      return kExitBand;
    }
    if (fit->slope < cfg.assert_band->lo || fit->slope > cfg.assert_band->hi) {
      std::fprintf(stderr, "assert: slope %.4f outside band [%.4f, %.4f]\n",
                   fit->slope, cfg.assert_band->lo, cfg.assert_band->hi);
      return kExitBand;
    }
    std::printf("slope inside band [%.4f, %.4f]\n", cfg.assert_band->lo,
                cfg.assert_band->hi);
  }
  return kExitOk;
}

int cmd_compare(const std::string& path_a, const std::string& path_b) {
  const mvt::ExperimentConfig a = mvt::load_experiment_config(path_a);
  const mvt::ExperimentConfig b = mvt::load_experiment_config(path_b);
  const auto table = mvt::run_comparison(a, b);

  fs::create_directories(a.output_dir);
  std::string csv = "n,wins_a,wins_b,ties,usable,win_rate_a,median_ratio\n";
  char buf[128];
  for (const auto& row : table) {
    std::snprintf(buf, sizeof(buf), "%ld,%d,%d,%d,%d,%.17g,%.17g\n", row.n,
                  row.wins_a, row.wins_b, row.ties, row.usable, row.win_rate_a,
                  row.median_ratio);
    csv += buf;
  }
  const std::string out_path =
      (fs::path(a.output_dir) / "compare.csv").string();
  mvt::write_text_file(out_path, csv);

  std::printf("A=%s vs B=%s\n", mvt::pipeline_name(a.pipeline),
              mvt::pipeline_name(b.pipeline));
  for (const auto& row : table) {
    std::printf("n=%-7ld win_rate_a=%-8.3f median_ratio=%-10.4g usable=%d\n",
                row.n, row.win_rate_a, row.median_ratio, row.usable);
  }
  std::printf("wrote %s\n", out_path.c_str());
  return kExitOk;
}

int cmd_stability(const std::string& config_path, int replacements) {
  const mvt::ExperimentConfig cfg = mvt::load_experiment_config(config_path);
  const mvt::StabilityReport report = mvt::stability_probe(cfg, replacements);

  std::printf("n=%ld gamma=%.4g beta_eff=%.4g\n", report.n, report.gamma,
              report.beta_effective);
  std::printf("precondition (sigma+gamma)n=%.4g >= 8 beta=%.4g\n",
              report.precondition_lhs, report.precondition_rhs);
  std::printf("factor=%.6f  E[G]=%.6g  E[Ghat]=%.6g\n", report.factor,
              report.mean_expected_loss, report.mean_empirical_loss);
  std::printf("expectation inequality: %s (gap mean %.3g, 3se %.3g)\n",
              report.expectation_ok ? "holds" : "VIOLATED",
              report.paired_gap_mean, 3.0 * report.paired_gap_se);
  std::printf("displacement bound: %ld/%ld trials ok, max ratio %.4f\n",
              report.displacement_trials - report.displacement_violations,
              report.displacement_trials, report.max_displacement_ratio);

  fs::create_directories(cfg.output_dir);
  mvt::JsonObjectWriter w;
  w.field("n", static_cast<long long>(report.n));
  w.field("gamma", report.gamma);
  w.field("beta_effective", report.beta_effective);
  w.field("factor", report.factor);
  w.field("mean_expected_loss", report.mean_expected_loss);
  w.field("mean_empirical_loss", report.mean_empirical_loss);
  w.field("paired_gap_mean", report.paired_gap_mean);
  w.field("paired_gap_se", report.paired_gap_se);
  w.field("expectation_ok", std::string(report.expectation_ok ? "true" : "false"));
  w.field("displacement_trials", static_cast<long long>(report.displacement_trials));
  w.field("displacement_violations",
          static_cast<long long>(report.displacement_violations));
  w.field("max_displacement_ratio", report.max_displacement_ratio);
  mvt::write_text_file((fs::path(cfg.output_dir) / "stability.json").string(),
                       w.str() + "\n");

  return report.expectation_ok && report.displacement_violations == 0
             ? kExitOk
             : kExitBand;
}

int cmd_gen_data(const std::string& config_path, const std::string& out_path) {
  const mvt::ExperimentConfig cfg = mvt::load_experiment_config(config_path);
  const long n = cfg.gen_n > 0 ? cfg.gen_n : cfg.n_grid.front();
  const auto model = mvt::make_canonical_pair_model(
      cfg.model.d_x, cfg.model.d_z, cfg.model.lambdas, cfg.model.seed);
  mvt::LabelModel labels;
  labels.kind = cfg.labels.kind;
  labels.noise_std = cfg.labels.noise_std;
  labels.w_star = cfg.labels.w_star_norm * model.phi.col(0);
  const auto data = mvt::sample_paired(model, labels, n, cfg.master_seed,
                                       cfg.boundedness);
  mvt::emit_dataset_csv(data, out_path);
  std::printf("wrote %ld samples to %s\n", n, out_path.c_str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CCA-based knowledge transfer for linear predictors"};
  app.require_subcommand(1);

  auto* cca_check = app.add_subcommand("cca-check",
                                       "run the CCA coordinate-system "
                                       "property suite");

  std::string sweep_config;
  bool assert_band = false;
  auto* sweep = app.add_subcommand("rate-sweep",
                                   "run an excess-risk sweep over n");
  sweep->add_option("config", sweep_config, "experiment config JSON")
      ->required();
  sweep->add_flag("--assert", assert_band,
                  "exit 4 when the fitted slope leaves assert_band");

  std::string cmp_a, cmp_b;
  auto* compare = app.add_subcommand("compare",
                                     "paired comparison of two pipelines");
  compare->add_option("config_a", cmp_a, "first config JSON")->required();
  compare->add_option("config_b", cmp_b, "second config JSON")->required();

  std::string stab_config;
  int replacements = 5;
  auto* stability = app.add_subcommand("stability-probe",
                                       "replace-one stability probe");
  stability->add_option("config", stab_config, "experiment config JSON")
      ->required();
  stability->add_option("--replacements", replacements,
                        "replace-one probes per seed");

  std::string gen_config, gen_out;
  auto* gen = app.add_subcommand("gen-data", "generate a dataset CSV");
  gen->add_option("config", gen_config, "experiment config JSON")->required();
  gen->add_option("out", gen_out, "output CSV path")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (cca_check->parsed()) {
      return mvt::run_cca_check(std::cout) == 0 ? kExitOk : 1;
    }
    if (sweep->parsed()) return cmd_rate_sweep(sweep_config, assert_band);
    if (compare->parsed()) return cmd_compare(cmp_a, cmp_b);
    if (stability->parsed()) return cmd_stability(stab_config, replacements);
    if (gen->parsed()) return cmd_gen_data(gen_config, gen_out);
  } catch (const mvt::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const mvt::ConvergenceError& e) {
    std::fprintf(stderr, "solver failure: %s\n", e.what());
    return kExitSolver;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return kExitOk;
}
