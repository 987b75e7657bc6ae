#include "flood/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <functional>
#include <mutex>
#include <sstream>
#include <thread>

#include "flood/config_json.hpp"
#include "flood/errors.hpp"
#include "flood/io.hpp"

namespace flood {

namespace {

constexpr std::uint64_t kDataTag = 1000003;
constexpr std::uint64_t kOracleTag = 1;
constexpr std::uint64_t kDrawTag = 2;
constexpr std::uint64_t kProbeFitDataTag = 3;
constexpr std::uint64_t kProbeFitInitTag = 4;

void parallel_for(int n_tasks, int workers, const std::function<void(int)>& fn) {
  workers = std::max(1, std::min(workers, n_tasks));
  if (workers == 1) {
    for (int i = 0; i < n_tasks; ++i) fn(i);
    return;
  }

  std::atomic<int> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const int i = next.fetch_add(1);
        if (i >= n_tasks || failed.load()) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
          failed.store(true);
          return;
        }
      }
    });
  }
  for (auto& thread : pool) thread.join();
  if (error) std::rethrow_exception(error);
}

MethodStats make_stats(std::vector<double> samples) {
  MethodStats stats;
  stats.mean = mean(samples);
  stats.stddev = samples.size() >= 2 ? sample_stddev(samples) : 0.0;
  stats.samples = std::move(samples);
  return stats;
}

void check_sweep_args(const std::vector<double>& grid, int n_trials) {
  if (grid.empty()) {
    throw InvalidSpecError("flood-level grid is empty");
  }
  if (!std::is_sorted(grid.begin(), grid.end())) {
    throw InvalidSpecError("flood-level grid must be sorted");
  }
  for (double b : grid) {
    if (b < 0.0) throw InvalidSpecError("flood levels must be non-negative");
  }
  if (n_trials < 1) {
    throw InvalidSpecError("need at least one trial");
  }
}

SweepResult run_sweep_impl(const TrainConfig& base,
                           const std::vector<SplitDataset>& trial_data,
                           const std::vector<double>& grid, int n_trials,
                           int workers) {
  SweepResult result;
  result.grid = grid;
  result.n_trials = n_trials;
  result.master_seed = base.seed;
  result.cells.resize(static_cast<std::size_t>(n_trials) * grid.size());

  const int n_grid = static_cast<int>(grid.size());
  parallel_for(n_trials * n_grid, workers, [&](int task) {
    const int trial = task / n_grid;
    const int j = task % n_grid;

    TrainConfig cfg = base;
    cfg.flood_level = grid[j];
    cfg.seed = derive_seed(base.seed, static_cast<std::uint64_t>(trial),
                           static_cast<std::uint64_t>(j));
    // sweeps only need end-of-run test metrics; per-epoch test evaluation
    // is for dedicated learning-curve runs
    cfg.metrics = MetricFlags{};
    cfg.metrics.eval_test_every_epoch = false;

    const SplitDataset& data =
        trial_data.size() == 1 ? trial_data[0]
                               : trial_data[static_cast<std::size_t>(trial)];
    const auto context = [&](const char* what) {
      std::ostringstream msg;
      msg << "run failed at b=" << grid[j] << " trial " << trial + 1 << ": "
          << what;
      return msg.str();
    };
    TrainingLog log;
    try {
      log = train(cfg, data);
    } catch (const NumericError& err) {
      throw NumericError(context(err.what()));
    } catch (const IoError& err) {
      throw IoError(context(err.what()));
    } catch (const Error& err) {
      throw InvalidSpecError(context(err.what()));
    }

    SweepCell& cell = result.cells[static_cast<std::size_t>(task)];
    cell.b = grid[j];
    cell.trial = trial;
    cell.final_test_accuracy = log.final_test_accuracy;
    cell.final_test_loss = log.final_test_loss;
    cell.es_test_accuracy = log.best_test_accuracy;
    cell.es_test_loss = log.best_test_loss;
    cell.final_val_accuracy = log.epochs.back().val_accuracy;
    cell.es_val_accuracy =
        log.epochs[static_cast<std::size_t>(log.early_stop_epoch - 1)].val_accuracy;
    cell.final_train_error = log.epochs.back().train_error;
    cell.es_train_error =
        log.epochs[static_cast<std::size_t>(log.early_stop_epoch - 1)].train_error;
    cell.final_train_loss = log.epochs.back().train_loss;
    cell.early_stop_epoch = log.early_stop_epoch;
  });

  result.selected_final.resize(static_cast<std::size_t>(n_trials));
  result.selected_es.resize(static_cast<std::size_t>(n_trials));
  for (int t = 0; t < n_trials; ++t) {
    int best_final = 0;
    int best_es = 0;
    for (int j = 1; j < n_grid; ++j) {
      // strict improvement keeps ties at the smallest b
      if (result.cell(t, j).final_val_accuracy >
          result.cell(t, best_final).final_val_accuracy) {
        best_final = j;
      }
      if (result.cell(t, j).es_val_accuracy >
          result.cell(t, best_es).es_val_accuracy) {
        best_es = j;
      }
    }
    result.selected_final[static_cast<std::size_t>(t)] = best_final;
    result.selected_es[static_cast<std::size_t>(t)] = best_es;
  }
  return result;
}

}  // namespace

const SweepCell& SweepResult::cell(int trial, int b_index) const {
  return cells[static_cast<std::size_t>(trial) * grid.size() +
               static_cast<std::size_t>(b_index)];
}

SweepResult run_sweep(const TrainConfig& base, const SyntheticSpec& data_spec,
                      const std::vector<double>& grid, int n_trials, int workers) {
  check_sweep_args(grid, n_trials);

  // one dataset per trial, shared by every grid point of that trial
  std::vector<SplitDataset> trial_data(static_cast<std::size_t>(n_trials));
  for (int t = 0; t < n_trials; ++t) {
    SyntheticSpec spec = data_spec;
    spec.seed = derive_seed(base.seed, kDataTag, static_cast<std::uint64_t>(t));
    trial_data[static_cast<std::size_t>(t)] = generate(spec);
  }
  return run_sweep_impl(base, trial_data, grid, n_trials, workers);
}

SweepResult run_sweep_fixed_data(const TrainConfig& base, const SplitDataset& data,
                                 const std::vector<double>& grid, int n_trials,
                                 int workers) {
  check_sweep_args(grid, n_trials);
  std::vector<SplitDataset> trial_data(1, data);
  return run_sweep_impl(base, trial_data, grid, n_trials, workers);
}

SweepReport summarize_sweep(const SweepResult& sweep) {
  SweepReport report;
  const auto baseline_it =
      std::find(sweep.grid.begin(), sweep.grid.end(), 0.0);
  report.has_baseline = baseline_it != sweep.grid.end();
  const int j0 = report.has_baseline
                     ? static_cast<int>(baseline_it - sweep.grid.begin())
                     : -1;

  std::vector<double> baseline_final, flooding_final, baseline_es, flooding_es;
  std::vector<double> chosen_final, chosen_es;
  for (int t = 0; t < sweep.n_trials; ++t) {
    const int jf = sweep.selected_final[static_cast<std::size_t>(t)];
    const int je = sweep.selected_es[static_cast<std::size_t>(t)];
    flooding_final.push_back(sweep.cell(t, jf).final_test_accuracy);
    flooding_es.push_back(sweep.cell(t, je).es_test_accuracy);
    chosen_final.push_back(sweep.grid[static_cast<std::size_t>(jf)]);
    chosen_es.push_back(sweep.grid[static_cast<std::size_t>(je)]);
    if (report.has_baseline) {
      baseline_final.push_back(sweep.cell(t, j0).final_test_accuracy);
      baseline_es.push_back(sweep.cell(t, j0).es_test_accuracy);
    }
  }

  report.flooding_final = make_stats(std::move(flooding_final));
  report.flooding_es = make_stats(std::move(flooding_es));
  report.chosen_b_final = make_stats(std::move(chosen_final));
  report.chosen_b_es = make_stats(std::move(chosen_es));
  if (report.has_baseline) {
    report.baseline_final = make_stats(std::move(baseline_final));
    report.baseline_es = make_stats(std::move(baseline_es));
    if (sweep.n_trials >= 2) {
      report.ttest_final = welch_t_test(report.baseline_final.samples,
                                        report.flooding_final.samples, 0.01);
      report.ttest_es = welch_t_test(report.baseline_es.samples,
                                     report.flooding_es.samples, 0.01);
    }
  }
  return report;
}

std::string format_sweep_summary(const SweepResult& sweep,
                                 const SweepReport& report) {
  const auto pct = [](const MethodStats& stats) {
    std::ostringstream s;
    s.precision(2);
    s << std::fixed << stats.mean * 100.0 << "% (" << stats.stddev * 100.0 << ")";
    return s.str();
  };
  const auto raw = [](const MethodStats& stats) {
    std::ostringstream s;
    s.precision(2);
    s << std::fixed << stats.mean << " (" << stats.stddev << ")";
    return s.str();
  };
  const auto ttest_line = [&](const WelchResult& w) {
    std::ostringstream s;
    s.precision(4);
    s << (w.significant ? "significant" : "not significant") << " at 1% (t="
      << w.t_statistic << ", dof=" << w.dof << ", p=" << w.p_value << ")";
    return s.str();
  };

  std::ostringstream out;
  out << "flood-level sweep: " << sweep.n_trials << " trials, " << sweep.grid.size()
      << " levels in [" << sweep.grid.front() << ", " << sweep.grid.back()
      << "], master seed " << sweep.master_seed << "\n";
  out << "(A) without early stopping\n";
  if (report.has_baseline) {
    out << "  without flooding: " << pct(report.baseline_final) << "\n";
  }
  out << "  with flooding:    " << pct(report.flooding_final) << "\n";
  out << "  chosen b:         " << raw(report.chosen_b_final) << "\n";
  if (report.has_baseline && sweep.n_trials >= 2) {
    out << "  t-test:           " << ttest_line(report.ttest_final) << "\n";
  }
  out << "(B) with early stopping\n";
  if (report.has_baseline) {
    out << "  without flooding: " << pct(report.baseline_es) << "\n";
  }
  out << "  with flooding:    " << pct(report.flooding_es) << "\n";
  out << "  chosen b:         " << raw(report.chosen_b_es) << "\n";
  if (report.has_baseline && sweep.n_trials >= 2) {
    out << "  t-test:           " << ttest_line(report.ttest_es) << "\n";
  }
  return out.str();
}

void write_sweep_csv(const SweepResult& sweep, const std::string& path) {
  std::ostringstream out;
  out << "b,trial,final_test_accuracy,final_test_loss,es_test_accuracy,"
         "es_test_loss,final_val_accuracy,es_val_accuracy,final_train_error,"
         "es_train_error,final_train_loss,early_stop_epoch,selected_final,"
         "selected_es\n";
  for (int t = 0; t < sweep.n_trials; ++t) {
    for (std::size_t j = 0; j < sweep.grid.size(); ++j) {
      const SweepCell& cell = sweep.cell(t, static_cast<int>(j));
      out << format_real(cell.b) << ',' << cell.trial << ','
          << format_real(cell.final_test_accuracy) << ','
          << format_real(cell.final_test_loss) << ','
          << format_real(cell.es_test_accuracy) << ','
          << format_real(cell.es_test_loss) << ','
          << format_real(cell.final_val_accuracy) << ','
          << format_real(cell.es_val_accuracy) << ','
          << format_real(cell.final_train_error) << ','
          << format_real(cell.es_train_error) << ','
          << format_real(cell.final_train_loss) << ',' << cell.early_stop_epoch
          << ',' << (sweep.selected_final[static_cast<std::size_t>(t)] == static_cast<int>(j) ? 1 : 0)
          << ',' << (sweep.selected_es[static_cast<std::size_t>(t)] == static_cast<int>(j) ? 1 : 0)
          << '\n';
    }
  }
  write_text_file(path, out.str());
}

void write_sweep_json(const SweepResult& sweep, const SweepReport& report,
                      const std::string& path) {
  nlohmann::json j;
  j["grid"] = sweep.grid;
  j["n_trials"] = sweep.n_trials;
  j["master_seed"] = sweep.master_seed;

  nlohmann::json cells = nlohmann::json::array();
  for (const auto& cell : sweep.cells) {
    cells.push_back({{"b", cell.b},
                     {"trial", cell.trial},
                     {"final_test_accuracy", cell.final_test_accuracy},
                     {"final_test_loss", cell.final_test_loss},
                     {"es_test_accuracy", cell.es_test_accuracy},
                     {"es_test_loss", cell.es_test_loss},
                     {"final_val_accuracy", cell.final_val_accuracy},
                     {"es_val_accuracy", cell.es_val_accuracy},
                     {"final_train_error", cell.final_train_error},
                     {"es_train_error", cell.es_train_error},
                     {"final_train_loss", cell.final_train_loss},
                     {"early_stop_epoch", cell.early_stop_epoch}});
  }
  j["cells"] = std::move(cells);
  j["selected_final"] = sweep.selected_final;
  j["selected_es"] = sweep.selected_es;

  const auto stats_json = [](const MethodStats& stats) {
    return nlohmann::json{{"mean", stats.mean},
                          {"stddev", stats.stddev},
                          {"samples", stats.samples}};
  };
  const auto ttest_json = [](const WelchResult& w) {
    return nlohmann::json{{"t_statistic", w.t_statistic},
                          {"dof", w.dof},
                          {"p_value", w.p_value},
                          {"significant", w.significant}};
  };
  j["summary"] = {{"has_baseline", report.has_baseline},
                  {"baseline_final", stats_json(report.baseline_final)},
                  {"flooding_final", stats_json(report.flooding_final)},
                  {"baseline_es", stats_json(report.baseline_es)},
                  {"flooding_es", stats_json(report.flooding_es)},
                  {"chosen_b_final", stats_json(report.chosen_b_final)},
                  {"chosen_b_es", stats_json(report.chosen_b_es)},
                  {"ttest_final", ttest_json(report.ttest_final)},
                  {"ttest_es", ttest_json(report.ttest_es)}};
  write_text_file(path, j.dump(2) + "\n");
}

SweepResult read_sweep_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open sweep file: " + path);
  }
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& err) {
    throw IoError("malformed sweep file " + path + ": " + err.what());
  }

  SweepResult sweep;
  try {
    sweep.grid = j.at("grid").get<std::vector<double>>();
    sweep.n_trials = j.at("n_trials").get<int>();
    sweep.master_seed = j.at("master_seed").get<std::uint64_t>();
    sweep.selected_final = j.at("selected_final").get<std::vector<int>>();
    sweep.selected_es = j.at("selected_es").get<std::vector<int>>();
    for (const auto& c : j.at("cells")) {
      SweepCell cell;
      cell.b = c.at("b").get<double>();
      cell.trial = c.at("trial").get<int>();
      cell.final_test_accuracy = c.at("final_test_accuracy").get<double>();
      cell.final_test_loss = c.at("final_test_loss").get<double>();
      cell.es_test_accuracy = c.at("es_test_accuracy").get<double>();
      cell.es_test_loss = c.at("es_test_loss").get<double>();
      cell.final_val_accuracy = c.at("final_val_accuracy").get<double>();
      cell.es_val_accuracy = c.at("es_val_accuracy").get<double>();
      cell.final_train_error = c.at("final_train_error").get<double>();
      cell.es_train_error = c.at("es_train_error").get<double>();
      cell.final_train_loss = c.at("final_train_loss").get<double>();
      cell.early_stop_epoch = c.at("early_stop_epoch").get<int>();
      sweep.cells.push_back(cell);
    }
  } catch (const nlohmann::json::exception& err) {
    throw IoError("sweep file " + path + " is missing fields: " + err.what());
  }
  if (sweep.cells.size() !=
      static_cast<std::size_t>(sweep.n_trials) * sweep.grid.size()) {
    throw IoError("sweep file cell count does not match grid x trials");
  }
  return sweep;
}

// ---------------------------------------------------------------------------
// Estimator MSE probe
// ---------------------------------------------------------------------------

double pointwise_B(double r_hat, double b, double r) {
  if (r_hat >= b) return 0.0;
  return -4.0 * (b - r_hat) * (b - r);
}

double bayes_error_two_gaussians(const SyntheticSpec& spec) {
  if (spec.variant != SyntheticVariant::TwoGaussians) {
    throw InvalidSpecError("analytic Bayes error only covers Two Gaussians");
  }
  const double clean =
      normal_cdf(-spec.m * std::sqrt(static_cast<double>(spec.dim)) / 2.0);
  return spec.noise_rate + (1.0 - 2.0 * spec.noise_rate) * clean;
}

ModelParams fit_linear_probe(const SyntheticSpec& spec, int n_fit, int steps,
                             double lr, std::uint64_t seed) {
  if (n_fit < 1 || steps < 0 || !(lr > 0.0)) {
    throw InvalidSpecError("probe fit needs n_fit >= 1, steps >= 0, lr > 0");
  }
  Rng data_rng(derive_seed(seed, kProbeFitDataTag));
  const LabeledDataset data = sample_population(spec, n_fit, data_rng);

  ModelParams probe = init_mlp({static_cast<int>(data.dim()), 1},
                               derive_seed(seed, kProbeFitInitTag));
  for (int s = 0; s < steps; ++s) {
    const ForwardTrace trace = forward(probe, data.features);
    auto [losses, score_grads] =
        surrogate_loss_grad(trace.scores(), data.labels, LossKind::Logistic);
    score_grads /= static_cast<double>(data.size());
    const Gradients grads = backward(probe, trace, score_grads);
    for (std::size_t t = 0; t < probe.layers.size(); ++t) {
      probe.layers[t].weight -= lr * grads.layers[t].weight;
      probe.layers[t].bias -= lr * grads.layers[t].bias;
    }
  }
  return probe;
}

TheoremResult mse_gap_monte_carlo(const TheoremProbe& probe) {
  if (probe.n < 1) throw InvalidSpecError("per-draw sample size must be >= 1");
  if (probe.n_draws < 100) throw InvalidSpecError("need at least 100 draws");
  if (probe.b < 0.0) throw InvalidSpecError("flood level must be non-negative");
  if (probe.oracle_samples < 1) {
    throw InvalidSpecError("oracle sample count must be positive");
  }

  // true risk of the fixed g from a separate oracle sample
  Rng oracle_rng(derive_seed(probe.seed, kOracleTag));
  double oracle_total = 0.0;
  long remaining = probe.oracle_samples;
  while (remaining > 0) {
    const int chunk = static_cast<int>(std::min<long>(remaining, 65536));
    const LabeledDataset sample = sample_population(probe.dist, chunk, oracle_rng);
    oracle_total += empirical_risk(probe.g, sample, probe.loss) * chunk;
    remaining -= chunk;
  }
  const double true_risk = oracle_total / static_cast<double>(probe.oracle_samples);

  Rng draw_rng(derive_seed(probe.seed, kDrawTag));
  std::vector<double> gap_draws(static_cast<std::size_t>(probe.n_draws));
  double sum_sq_hat = 0.0;
  double sum_sq_tilde = 0.0;
  double sum_B = 0.0;
  double max_residual = 0.0;
  long below = 0;
  for (int d = 0; d < probe.n_draws; ++d) {
    const LabeledDataset sample = sample_population(probe.dist, probe.n, draw_rng);
    const double r_hat = empirical_risk(probe.g, sample, probe.loss);
    const double r_tilde = flooded(r_hat, probe.b).flooded_risk;
    const double err_hat = r_hat - true_risk;
    const double err_tilde = r_tilde - true_risk;
    const double gap_d = err_hat * err_hat - err_tilde * err_tilde;
    const double B = pointwise_B(r_hat, probe.b, true_risk);
    sum_sq_hat += err_hat * err_hat;
    sum_sq_tilde += err_tilde * err_tilde;
    sum_B += B;
    max_residual = std::max(max_residual, std::abs(gap_d - B));
    if (r_hat < probe.b) ++below;
    gap_draws[static_cast<std::size_t>(d)] = gap_d;
  }

  TheoremResult result;
  result.b = probe.b;
  result.true_risk = true_risk;
  result.mse_hat = sum_sq_hat / static_cast<double>(probe.n_draws);
  result.mse_tilde = sum_sq_tilde / static_cast<double>(probe.n_draws);
  result.gap = result.mse_hat - result.mse_tilde;
  result.ci_half_width =
      1.959963984540054 * sample_stddev(gap_draws) /
      std::sqrt(static_cast<double>(probe.n_draws));
  result.prob_below = static_cast<double>(below) / static_cast<double>(probe.n_draws);
  result.mean_B = sum_B / static_cast<double>(probe.n_draws);
  result.max_identity_residual = max_residual;
  result.precondition_ok = probe.b <= true_risk;
  return result;
}

// ---------------------------------------------------------------------------
// Diagnostics
// ---------------------------------------------------------------------------

Gradients loss_gradient(const ModelParams& params, const LabeledDataset& data,
                        LossKind loss) {
  if (data.size() == 0) {
    throw InvalidSpecError("empty dataset");
  }
  Gradients total = zeros_like(params);
  const Eigen::Index n = data.size();
  constexpr Eigen::Index kChunk = 4096;
  for (Eigen::Index start = 0; start < n; start += kChunk) {
    const Eigen::Index rows = std::min(kChunk, n - start);
    const ForwardTrace trace =
        forward(params, data.features.middleRows(start, rows));
    std::vector<int> labels(data.labels.begin() + start,
                            data.labels.begin() + start + rows);
    auto [losses, score_grads] =
        surrogate_loss_grad(trace.scores(), labels, loss);
    score_grads /= static_cast<double>(n);
    const Gradients part = backward(params, trace, score_grads);
    for (std::size_t t = 0; t < total.layers.size(); ++t) {
      total.layers[t].weight += part.layers[t].weight;
      total.layers[t].bias += part.layers[t].bias;
    }
  }
  return total;
}

double filter_normalized_grad_norm(const ModelParams& params,
                                   const Gradients& grads) {
  if (!shape_congruent(params, grads)) {
    throw ShapeError("gradients are not shape-congruent with the parameters");
  }
  double total = 0.0;
  for (std::size_t t = 0; t < params.layers.size(); ++t) {
    const Matrix& w = params.layers[t].weight;
    const Vector& bias = params.layers[t].bias;
    const Matrix& gw = grads.layers[t].weight;
    const Vector& gb = grads.layers[t].bias;
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
      // per output unit: scale its gradient row (weights and bias) by the
      // norm of the unit's incoming weights, bias included
      const double filter_sq = w.row(i).squaredNorm() + bias[i] * bias[i];
      const double grad_sq = gw.row(i).squaredNorm() + gb[i] * gb[i];
      total += filter_sq * grad_sq;
    }
  }
  return std::sqrt(total);
}

FlatnessProfile flatness_profile(
    const std::vector<std::pair<std::string, ModelParams>>& models,
    const LabeledDataset& train, const LabeledDataset& test, LossKind loss,
    const std::vector<double>& radii, std::uint64_t direction_seed) {
  if (models.empty()) {
    throw InvalidSpecError("flatness profile needs at least one model");
  }
  if (std::find(radii.begin(), radii.end(), 0.0) == radii.end()) {
    throw InvalidSpecError("radii must include 0");
  }

  // one shared raw Gaussian direction; filter-normalized per model below
  Rng rng(direction_seed);
  const ModelParams& reference = models.front().second;
  Gradients raw = zeros_like(reference);
  for (auto& layer : raw.layers) {
    for (Eigen::Index i = 0; i < layer.weight.size(); ++i) {
      layer.weight.data()[i] = rng.normal();
    }
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i) {
      layer.bias[i] = rng.normal();
    }
  }

  FlatnessProfile profile;
  profile.direction_seed = direction_seed;
  profile.radii = radii;

  for (const auto& [name, model] : models) {
    if (!shape_congruent(model, raw)) {
      throw ShapeError("probed models disagree on architecture");
    }
    // rescale each unit's direction row to the norm of the unit's weight
    // row (bias included) so perturbations are scale-comparable
    Gradients direction = raw;
    for (std::size_t t = 0; t < model.layers.size(); ++t) {
      const Matrix& w = model.layers[t].weight;
      const Vector& bias = model.layers[t].bias;
      Matrix& dw = direction.layers[t].weight;
      Vector& db = direction.layers[t].bias;
      for (Eigen::Index i = 0; i < w.rows(); ++i) {
        const double w_norm = std::sqrt(w.row(i).squaredNorm() + bias[i] * bias[i]);
        const double d_norm = std::sqrt(dw.row(i).squaredNorm() + db[i] * db[i]);
        const double scale = d_norm > 0.0 ? w_norm / d_norm : 0.0;
        dw.row(i) *= scale;
        db[i] *= scale;
      }
    }

    FlatnessProfile::Curve curve;
    curve.name = name;
    for (double radius : radii) {
      if (radius == 0.0) {
        curve.train_loss.push_back(empirical_risk(model, train, loss));
        curve.test_loss.push_back(empirical_risk(model, test, loss));
        continue;
      }
      ModelParams perturbed = model;
      for (std::size_t t = 0; t < perturbed.layers.size(); ++t) {
        perturbed.layers[t].weight += radius * direction.layers[t].weight;
        perturbed.layers[t].bias += radius * direction.layers[t].bias;
      }
      curve.train_loss.push_back(empirical_risk(perturbed, train, loss));
      curve.test_loss.push_back(empirical_risk(perturbed, test, loss));
    }
    profile.curves.push_back(std::move(curve));
  }
  return profile;
}

void write_flatness_csv(const FlatnessProfile& profile, const std::string& path) {
  std::ostringstream out;
  out << "model,radius,train_loss,test_loss\n";
  for (const auto& curve : profile.curves) {
    for (std::size_t r = 0; r < profile.radii.size(); ++r) {
      out << curve.name << ',' << format_real(profile.radii[r]) << ','
          << format_real(curve.train_loss[r]) << ','
          << format_real(curve.test_loss[r]) << '\n';
    }
  }
  write_text_file(path, out.str());
}

MemorizationCurve memorization_curve(const SweepResult& sweep) {
  MemorizationCurve curve;
  curve.grid = sweep.grid;
  curve.selected_final = sweep.selected_final;
  curve.selected_es = sweep.selected_es;
  for (std::size_t j = 0; j < sweep.grid.size(); ++j) {
    double final_total = 0.0;
    double es_total = 0.0;
    for (int t = 0; t < sweep.n_trials; ++t) {
      final_total += 1.0 - sweep.cell(t, static_cast<int>(j)).final_train_error;
      es_total += 1.0 - sweep.cell(t, static_cast<int>(j)).es_train_error;
    }
    curve.mean_final_train_accuracy.push_back(final_total / sweep.n_trials);
    curve.mean_es_train_accuracy.push_back(es_total / sweep.n_trials);
  }
  return curve;
}

void write_memorization_csv(const SweepResult& sweep, const std::string& path) {
  std::ostringstream out;
  out << "b,trial,final_train_accuracy,es_train_accuracy,selected_final,"
         "selected_es\n";
  for (int t = 0; t < sweep.n_trials; ++t) {
    for (std::size_t j = 0; j < sweep.grid.size(); ++j) {
      const SweepCell& cell = sweep.cell(t, static_cast<int>(j));
      out << format_real(cell.b) << ',' << t << ','
          << format_real(1.0 - cell.final_train_error) << ','
          << format_real(1.0 - cell.es_train_error) << ','
          << (sweep.selected_final[static_cast<std::size_t>(t)] == static_cast<int>(j) ? 1 : 0)
          << ','
          << (sweep.selected_es[static_cast<std::size_t>(t)] == static_cast<int>(j) ? 1 : 0)
          << '\n';
    }
  }
  write_text_file(path, out.str());
}

void write_memorization_curve_csv(const MemorizationCurve& curve,
                                  const std::string& path) {
  std::ostringstream out;
  out << "b,mean_final_train_accuracy,mean_es_train_accuracy\n";
  for (std::size_t j = 0; j < curve.grid.size(); ++j) {
    out << format_real(curve.grid[j]) << ','
        << format_real(curve.mean_final_train_accuracy[j]) << ','
        << format_real(curve.mean_es_train_accuracy[j]) << '\n';
  }
  write_text_file(path, out.str());
}

}  // namespace flood
