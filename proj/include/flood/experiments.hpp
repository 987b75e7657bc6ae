#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "flood/datagen.hpp"
#include "flood/stats.hpp"
#include "flood/trainer.hpp"

namespace flood {

// One (flood level, trial) outcome. "final" rows are last-epoch models,
// "es" rows the best-validation snapshot.
struct SweepCell {
  double b = 0.0;
  int trial = 0;
  double final_test_accuracy = 0.0;
  double final_test_loss = 0.0;
  double es_test_accuracy = 0.0;
  double es_test_loss = 0.0;
  double final_val_accuracy = 0.0;
  double es_val_accuracy = 0.0;
  double final_train_error = 0.0;
  double es_train_error = 0.0;
  double final_train_loss = 0.0;
  int early_stop_epoch = 0;
};

struct SweepResult {
  std::vector<double> grid;
  int n_trials = 0;
  std::uint64_t master_seed = 0;
  std::vector<SweepCell> cells;  // trial-major: cells[trial * grid.size() + j]

  // Per-trial grid index with the best validation accuracy (ties -> smallest b).
  std::vector<int> selected_final;
  std::vector<int> selected_es;

  const SweepCell& cell(int trial, int b_index) const;
};

struct MethodStats {
  double mean = 0.0;
  double stddev = 0.0;
  std::vector<double> samples;  // one per trial
};

struct SweepReport {
  bool has_baseline = false;  // grid contains b == 0
  MethodStats baseline_final, flooding_final;
  MethodStats baseline_es, flooding_es;
  MethodStats chosen_b_final, chosen_b_es;
  WelchResult ttest_final{}, ttest_es{};  // baseline vs flooding, alpha 0.01
};

// Trains n_trials x |grid| runs on a bounded worker pool. Data is drawn per
// trial (shared across the grid); run seeds derive from (master, trial,
// b index) so results are independent of scheduling.
SweepResult run_sweep(const TrainConfig& base, const SyntheticSpec& data_spec,
                      const std::vector<double>& grid, int n_trials, int workers);

// Same protocol against a fixed corpus (IDX benchmarks): the provided split
// is reused across trials, only the training seed varies.
SweepResult run_sweep_fixed_data(const TrainConfig& base, const SplitDataset& data,
                                 const std::vector<double>& grid, int n_trials,
                                 int workers);

SweepReport summarize_sweep(const SweepResult& sweep);
std::string format_sweep_summary(const SweepResult& sweep, const SweepReport& report);
void write_sweep_csv(const SweepResult& sweep, const std::string& path);
void write_sweep_json(const SweepResult& sweep, const SweepReport& report,
                      const std::string& path);
SweepResult read_sweep_json(const std::string& path);

// ---------------------------------------------------------------------------
// Estimator MSE probe
// ---------------------------------------------------------------------------

// Monte Carlo study of the flooded risk estimator for a FIXED model g:
// draws size-n samples, compares MSE(r_hat) against MSE(|r_hat - b| + b).
struct TheoremProbe {
  SyntheticSpec dist;
  ModelParams g;
  LossKind loss = LossKind::Logistic;
  double b = 0.0;
  int n = 20;
  int n_draws = 10000;
  long oracle_samples = 1000000;  // separate sample for the true-risk estimate
  std::uint64_t seed = 0;
};

struct TheoremResult {
  double b = 0.0;
  double true_risk = 0.0;
  double mse_hat = 0.0;
  double mse_tilde = 0.0;
  double gap = 0.0;            // mse_hat - mse_tilde
  double ci_half_width = 0.0;  // 95% normal-approximation CI on the gap
  double prob_below = 0.0;     // empirical Pr[r_hat < b]
  double mean_B = 0.0;
  double max_identity_residual = 0.0;  // max |per-draw gap - B|
  bool precondition_ok = true;         // b <= true_risk
};

TheoremResult mse_gap_monte_carlo(const TheoremProbe& probe);

// Piecewise MSE-difference term: 0 when r_hat >= b, else -4(b - r_hat)(b - r).
double pointwise_B(double r_hat, double b, double r);

// Analytic zero-one floor for Two Gaussians: Phi(-m sqrt(d) / 2), raised to
// rho + (1 - 2 rho) * Phi(...) under symmetric label flips.
double bayes_error_two_gaussians(const SyntheticSpec& spec);

// Single linear layer fitted by full-batch descent on one small sample and
// then frozen; the probe model for the estimator study.
ModelParams fit_linear_probe(const SyntheticSpec& spec, int n_fit, int steps,
                             double lr, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Diagnostics
// ---------------------------------------------------------------------------

// Gradient rescaled per output unit by the norm of that unit's incoming
// weight row (bias included); returns the global Euclidean norm.
double filter_normalized_grad_norm(const ModelParams& params, const Gradients& grads);

// Gradient of the mean surrogate loss over a split, for the norm above.
Gradients loss_gradient(const ModelParams& params, const LabeledDataset& data,
                        LossKind loss);

struct FlatnessProfile {
  std::uint64_t direction_seed = 0;
  std::vector<double> radii;
  struct Curve {
    std::string name;
    std::vector<double> train_loss;
    std::vector<double> test_loss;
  };
  std::vector<Curve> curves;
};

// Losses along theta + r * direction for one shared random direction
// (drawn once from direction_seed, then filter-normalized against each
// probed model so perturbations are scale-comparable). radii must include 0.
FlatnessProfile flatness_profile(
    const std::vector<std::pair<std::string, ModelParams>>& models,
    const LabeledDataset& train, const LabeledDataset& test, LossKind loss,
    const std::vector<double>& radii, std::uint64_t direction_seed);

void write_flatness_csv(const FlatnessProfile& profile, const std::string& path);

struct MemorizationCurve {
  std::vector<double> grid;
  std::vector<double> mean_final_train_accuracy;  // per b
  std::vector<double> mean_es_train_accuracy;
  std::vector<int> selected_final;  // per-trial chosen grid index markers
  std::vector<int> selected_es;
};

MemorizationCurve memorization_curve(const SweepResult& sweep);
void write_memorization_csv(const SweepResult& sweep, const std::string& path);
void write_memorization_curve_csv(const MemorizationCurve& curve,
                                  const std::string& path);

}  // namespace flood
