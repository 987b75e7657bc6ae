// flood: command-line laboratory for training with the flooding regularizer.
//
// Subcommands: gen-data, train, sweep, verify-theorem, flatness, memorization.
// Every command echoes its fully-resolved configuration into the output
// directory; re-running from the echo reproduces the outputs.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "flood/config_json.hpp"
#include "flood/datagen.hpp"
#include "flood/errors.hpp"
#include "flood/experiments.hpp"
#include "flood/io.hpp"
#include "flood/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::uint64_t kDatasetSeedTag = 424243;
constexpr std::uint64_t kValSplitTag = 424244;
constexpr std::uint64_t kProbeTag = 500009;
constexpr std::uint64_t kDirectionTag = 600011;

struct IdxPaths {
  std::string train_images;
  std::string train_labels;
  std::string test_images;
  std::string test_labels;
};

struct DatasetConfig {
  std::string kind = "synthetic";  // "synthetic" or "idx"
  flood::SyntheticSpec spec;
  IdxPaths idx;
  double val_proportion = 0.2;
};

struct ProbeConfig {
  int n = 20;
  int n_draws = 10000;
  long oracle_samples = 1000000;
  int fit_n = 100;
  int fit_steps = 200;
  double fit_lr = 0.5;
  std::vector<double> b_grid;  // empty -> default 0:0.5:0.05
};

struct FlatnessConfig {
  int radius_count = 51;  // odd, symmetric around 0
  double radius_max = 1.0;
};

struct ExperimentConfig {
  DatasetConfig dataset;
  flood::TrainConfig train;
  std::vector<double> grid;
  int trials = 10;
  ProbeConfig probe;
  FlatnessConfig flatness;
  std::string out_dir = "out";
  int workers = 0;  // 0 -> hardware concurrency
  std::uint64_t master_seed = 1;
};

void from_json_dataset(const json& j, DatasetConfig& ds) {
  ds.kind = j.value("kind", ds.kind);
  if (ds.kind != "synthetic" && ds.kind != "idx") {
    throw flood::InvalidSpecError("dataset.kind must be 'synthetic' or 'idx'");
  }
  ds.spec = j.get<flood::SyntheticSpec>();
  if (j.contains("idx")) {
    const auto& ij = j.at("idx");
    ds.idx.train_images = ij.value("train_images", "");
    ds.idx.train_labels = ij.value("train_labels", "");
    ds.idx.test_images = ij.value("test_images", "");
    ds.idx.test_labels = ij.value("test_labels", "");
  }
  ds.val_proportion = j.value("val_proportion", ds.val_proportion);
}

json to_json_dataset(const DatasetConfig& ds) {
  json j = ds.spec;
  j["kind"] = ds.kind;
  j["val_proportion"] = ds.val_proportion;
  if (ds.kind == "idx") {
    j["idx"] = {{"train_images", ds.idx.train_images},
                {"train_labels", ds.idx.train_labels},
                {"test_images", ds.idx.test_images},
                {"test_labels", ds.idx.test_labels}};
  }
  return j;
}

ExperimentConfig load_config(const std::string& path) {
  ExperimentConfig config;
  if (path.empty()) return config;
  std::ifstream in(path);
  if (!in) {
    throw flood::IoError("cannot open config file: " + path);
  }
  json j;
  try {
    in >> j;
  } catch (const json::exception& err) {
    throw flood::InvalidSpecError(std::string("malformed config JSON: ") + err.what());
  }

  if (j.contains("dataset")) from_json_dataset(j.at("dataset"), config.dataset);
  if (j.contains("train")) config.train = j.at("train").get<flood::TrainConfig>();
  if (j.contains("sweep")) {
    const auto& sj = j.at("sweep");
    config.trials = sj.value("trials", config.trials);
    if (sj.contains("grid")) config.grid = sj.at("grid").get<std::vector<double>>();
  }
  if (j.contains("probe")) {
    const auto& pj = j.at("probe");
    config.probe.n = pj.value("n", config.probe.n);
    config.probe.n_draws = pj.value("n_draws", config.probe.n_draws);
    config.probe.oracle_samples =
        pj.value("oracle_samples", config.probe.oracle_samples);
    config.probe.fit_n = pj.value("fit_n", config.probe.fit_n);
    config.probe.fit_steps = pj.value("fit_steps", config.probe.fit_steps);
    config.probe.fit_lr = pj.value("fit_lr", config.probe.fit_lr);
    if (pj.contains("b_grid")) {
      config.probe.b_grid = pj.at("b_grid").get<std::vector<double>>();
    }
  }
  if (j.contains("flatness")) {
    const auto& fj = j.at("flatness");
    config.flatness.radius_count =
        fj.value("radius_count", config.flatness.radius_count);
    config.flatness.radius_max = fj.value("radius_max", config.flatness.radius_max);
  }
  config.out_dir = j.value("out_dir", config.out_dir);
  config.workers = j.value("workers", config.workers);
  config.master_seed = j.value("master_seed", config.master_seed);
  return config;
}

json echo_config(const ExperimentConfig& config) {
  json j;
  j["dataset"] = to_json_dataset(config.dataset);
  j["train"] = config.train;
  j["sweep"] = {{"grid", config.grid}, {"trials", config.trials}};
  j["probe"] = {{"n", config.probe.n},
                {"n_draws", config.probe.n_draws},
                {"oracle_samples", config.probe.oracle_samples},
                {"fit_n", config.probe.fit_n},
                {"fit_steps", config.probe.fit_steps},
                {"fit_lr", config.probe.fit_lr},
                {"b_grid", config.probe.b_grid}};
  j["flatness"] = {{"radius_count", config.flatness.radius_count},
                   {"radius_max", config.flatness.radius_max}};
  j["out_dir"] = config.out_dir;
  j["workers"] = config.workers;
  j["master_seed"] = config.master_seed;
  return j;
}

std::vector<double> parse_grid(const std::string& text) {
  // START:STOP:STEP, inclusive endpoints
  const auto first = text.find(':');
  const auto second = text.find(':', first + 1);
  if (first == std::string::npos || second == std::string::npos) {
    throw flood::InvalidSpecError("grid must be START:STOP:STEP");
  }
  double start = 0.0, stop = 0.0, step = 0.0;
  try {
    start = std::stod(text.substr(0, first));
    stop = std::stod(text.substr(first + 1, second - first - 1));
    step = std::stod(text.substr(second + 1));
  } catch (const std::exception&) {
    throw flood::InvalidSpecError("grid values must be numeric");
  }
  if (!(step > 0.0) || stop < start) {
    throw flood::InvalidSpecError("grid needs stop >= start and step > 0");
  }
  const int count = static_cast<int>(std::lround((stop - start) / step)) + 1;
  std::vector<double> grid;
  grid.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    const double v = start + i * step;
    if (v <= stop + step * 1e-9) grid.push_back(v);
  }
  return grid;
}

int resolve_workers(int workers) {
  if (workers > 0) return workers;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

// Fills dataset seed, architecture, loss and optimizer defaults that depend
// on the loaded data. `raw` is the original config document (absent keys
// mean "use the protocol default").
void resolve_dataset_seed(ExperimentConfig& config) {
  if (config.dataset.spec.seed == 0) {
    config.dataset.spec.seed =
        flood::derive_seed(config.master_seed, kDatasetSeedTag, 0);
  }
}

flood::SplitDataset load_data(ExperimentConfig& config) {
  resolve_dataset_seed(config);
  if (config.dataset.kind == "synthetic") {
    return flood::generate(config.dataset.spec);
  }
  const IdxPaths& idx = config.dataset.idx;
  if (idx.train_images.empty() || idx.train_labels.empty() ||
      idx.test_images.empty() || idx.test_labels.empty()) {
    throw flood::InvalidSpecError("idx dataset needs all four file paths");
  }
  flood::SplitDataset splits;
  const flood::LabeledDataset full =
      flood::load_idx(idx.train_images, idx.train_labels);
  flood::Rng rng(flood::derive_seed(config.dataset.spec.seed, kValSplitTag));
  auto [train, val] =
      flood::split_train_val(full, 1.0 - config.dataset.val_proportion, rng);
  splits.train = std::move(train);
  splits.validation = std::move(val);
  splits.test = flood::load_idx(idx.test_images, idx.test_labels);
  return splits;
}

void resolve_train_defaults(ExperimentConfig& config, const flood::SplitDataset& data) {
  flood::TrainConfig& train = config.train;
  const int d = static_cast<int>(data.train.dim());
  const bool binary = data.train.binary();
  if (train.layer_sizes.empty()) {
    if (config.dataset.kind == "synthetic") {
      train.layer_sizes = {d, 500, 500, 500, 500, 500, 1};
    } else {
      train.layer_sizes = {d, 1000, 1000, data.train.num_classes};
    }
  }
  if (binary && train.layer_sizes.back() == 1) {
    train.loss = flood::LossKind::Logistic;
  } else if (!binary) {
    train.loss = flood::LossKind::SoftmaxCrossEntropy;
  }
  if (config.dataset.kind == "idx" && train.optimizer.kind == flood::OptimizerKind::Adam) {
    // benchmark protocol: SGD with momentum unless the config said otherwise
    bool optimizer_was_default = train.optimizer.learning_rate == 1e-3 &&
                                 train.optimizer.weight_decay == 0.0;
    if (optimizer_was_default) {
      train.optimizer.kind = flood::OptimizerKind::SgdMomentum;
      train.optimizer.learning_rate = 0.1;
      train.optimizer.momentum = 0.9;
    }
  }
  if (train.seed == 0) {
    train.seed = flood::derive_seed(config.master_seed, 0, 0);
  }
}

void write_echo(const ExperimentConfig& config, const std::string& command) {
  json j = echo_config(config);
  j["command"] = command;
  flood::write_text_file((fs::path(config.out_dir) / "config_echo.json").string(),
                         j.dump(2) + "\n");
}

void prepare_out_dir(const ExperimentConfig& config) {
  std::error_code ec;
  fs::create_directories(config.out_dir, ec);
  if (ec) {
    throw flood::IoError("cannot create output directory " + config.out_dir +
                         ": " + ec.message());
  }
}

std::vector<double> default_radii(const FlatnessConfig& flatness) {
  const int count = flatness.radius_count;
  if (count < 3 || count % 2 == 0) {
    throw flood::InvalidSpecError("flatness radius count must be odd and >= 3");
  }
  const int half = count / 2;
  std::vector<double> radii(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    radii[static_cast<std::size_t>(i)] =
        flatness.radius_max * static_cast<double>(i - half) /
        static_cast<double>(half);
  }
  return radii;
}

// ---------------------------------------------------------------------------
// subcommands
// ---------------------------------------------------------------------------

int cmd_gen_data(ExperimentConfig config) {
  prepare_out_dir(config);
  resolve_dataset_seed(config);
  if (config.dataset.kind != "synthetic") {
    throw flood::InvalidSpecError("gen-data only covers synthetic variants");
  }
  const flood::SplitDataset splits = flood::generate(config.dataset.spec);
  const fs::path out(config.out_dir);
  flood::write_dataset_csv(splits.train, (out / "train.csv").string());
  flood::write_dataset_csv(splits.validation, (out / "validation.csv").string());
  flood::write_dataset_csv(splits.test, (out / "test.csv").string());

  json manifest;
  manifest["spec"] = config.dataset.spec;
  manifest["files"] = {{"train", "train.csv"},
                       {"validation", "validation.csv"},
                       {"test", "test.csv"}};
  manifest["sizes"] = {{"train", splits.train.size()},
                       {"validation", splits.validation.size()},
                       {"test", splits.test.size()}};
  flood::write_text_file((out / "manifest.json").string(), manifest.dump(2) + "\n");
  write_echo(config, "gen-data");
  std::cout << "wrote " << splits.train.size() << "/" << splits.validation.size()
            << "/" << splits.test.size() << " rows to " << config.out_dir << "\n";
  return 0;
}

int cmd_train(ExperimentConfig config) {
  prepare_out_dir(config);
  const flood::SplitDataset data = load_data(config);
  resolve_train_defaults(config, data);
  write_echo(config, "train");

  const flood::TrainingLog log = flood::train(config.train, data);
  const fs::path out(config.out_dir);
  flood::write_training_log_csv(log, (out / "train_log.csv").string());
  flood::write_training_log_json(log, (out / "train_log.json").string());
  flood::save_checkpoint(log.final_params, (out / "final.ckpt").string());
  flood::save_checkpoint(log.best_params, (out / "best.ckpt").string());
  if (log.first_submersion_params) {
    flood::save_checkpoint(*log.first_submersion_params,
                           (out / "submersion.ckpt").string());
  }

  std::cout << "final: test acc " << log.final_test_accuracy << ", test loss "
            << log.final_test_loss << "\n"
            << "early stop at epoch " << log.early_stop_epoch << ": test acc "
            << log.best_test_accuracy << "\n";
  if (log.first_submersion_epoch > 0) {
    std::cout << "first submersion at epoch " << log.first_submersion_epoch << "\n";
  }
  return 0;
}

int cmd_sweep(ExperimentConfig config) {
  prepare_out_dir(config);
  const flood::SplitDataset data = load_data(config);
  resolve_train_defaults(config, data);
  if (config.grid.empty()) {
    config.grid = parse_grid(config.dataset.kind == "synthetic" ? "0:0.5:0.01"
                                                                : "0:0.1:0.01");
  }
  config.train.seed = config.master_seed;
  write_echo(config, "sweep");

  const int workers = resolve_workers(config.workers);
  flood::SweepResult sweep;
  if (config.dataset.kind == "synthetic") {
    sweep = flood::run_sweep(config.train, config.dataset.spec, config.grid,
                             config.trials, workers);
  } else {
    sweep = flood::run_sweep_fixed_data(config.train, data, config.grid,
                                        config.trials, workers);
  }

  const flood::SweepReport report = flood::summarize_sweep(sweep);
  const fs::path out(config.out_dir);
  flood::write_sweep_csv(sweep, (out / "sweep.csv").string());
  flood::write_sweep_json(sweep, report, (out / "sweep.json").string());
  const std::string summary = flood::format_sweep_summary(sweep, report);
  flood::write_text_file((out / "summary.txt").string(), summary);
  std::cout << summary;
  return 0;
}

int cmd_verify_theorem(ExperimentConfig config) {
  prepare_out_dir(config);
  resolve_dataset_seed(config);
  if (config.dataset.kind != "synthetic") {
    throw flood::InvalidSpecError("verify-theorem runs on synthetic populations");
  }
  if (config.probe.b_grid.empty()) {
    config.probe.b_grid = parse_grid("0:0.5:0.05");
  }
  write_echo(config, "verify-theorem");

  flood::TheoremProbe probe;
  probe.dist = config.dataset.spec;
  probe.loss = flood::LossKind::Logistic;
  probe.n = config.probe.n;
  probe.n_draws = config.probe.n_draws;
  probe.oracle_samples = config.probe.oracle_samples;
  probe.seed = flood::derive_seed(config.master_seed, kProbeTag, 0);
  probe.g = flood::fit_linear_probe(config.dataset.spec, config.probe.fit_n,
                                    config.probe.fit_steps, config.probe.fit_lr,
                                    probe.seed);

  const fs::path out(config.out_dir);
  flood::save_checkpoint(probe.g, (out / "probe.ckpt").string());

  std::ostringstream csv;
  csv << "b,true_risk,mse_hat,mse_tilde,gap,ci_half_width,prob_below,mean_B,"
         "max_identity_residual,precondition_ok\n";
  for (double b : config.probe.b_grid) {
    probe.b = b;
    const flood::TheoremResult r = flood::mse_gap_monte_carlo(probe);
    csv << flood::format_real(r.b) << ',' << flood::format_real(r.true_risk)
        << ',' << flood::format_real(r.mse_hat) << ','
        << flood::format_real(r.mse_tilde) << ',' << flood::format_real(r.gap)
        << ',' << flood::format_real(r.ci_half_width) << ','
        << flood::format_real(r.prob_below) << ',' << flood::format_real(r.mean_B)
        << ',' << flood::format_real(r.max_identity_residual) << ','
        << (r.precondition_ok ? 1 : 0) << '\n';
    std::cout << "b=" << r.b << " gap=" << r.gap << " ci=" << r.ci_half_width
              << (r.precondition_ok ? "" : "  [b > R(g)]") << "\n";
  }
  flood::write_text_file((out / "theorem.csv").string(), csv.str());
  return 0;
}

int cmd_flatness(ExperimentConfig config,
                 const std::vector<std::string>& checkpoints) {
  prepare_out_dir(config);
  if (checkpoints.empty()) {
    throw flood::InvalidSpecError("flatness needs at least one name=path checkpoint");
  }
  const flood::SplitDataset data = load_data(config);
  resolve_train_defaults(config, data);
  write_echo(config, "flatness");

  std::vector<std::pair<std::string, flood::ModelParams>> models;
  for (const auto& entry : checkpoints) {
    const auto eq = entry.find('=');
    if (eq == std::string::npos) {
      throw flood::InvalidSpecError("checkpoint must be name=path: " + entry);
    }
    const std::string name = entry.substr(0, eq);
    const std::string path = entry.substr(eq + 1);
    models.emplace_back(name, flood::load_checkpoint(path));
  }

  const std::vector<double> radii = default_radii(config.flatness);
  const flood::FlatnessProfile profile = flood::flatness_profile(
      models, data.train, data.test, config.train.loss, radii,
      flood::derive_seed(config.master_seed, kDirectionTag, 0));
  flood::write_flatness_csv(profile,
                            (fs::path(config.out_dir) / "flatness.csv").string());
  std::cout << "wrote flatness profile for " << models.size() << " models, "
            << radii.size() << " radii\n";
  return 0;
}

int cmd_memorization(ExperimentConfig config, const std::string& sweep_path) {
  prepare_out_dir(config);
  const flood::SweepResult sweep = flood::read_sweep_json(sweep_path);
  write_echo(config, "memorization");

  const flood::MemorizationCurve curve = flood::memorization_curve(sweep);
  const fs::path out(config.out_dir);
  flood::write_memorization_csv(sweep, (out / "memorization.csv").string());
  flood::write_memorization_curve_csv(
      curve, (out / "memorization_curve.csv").string());
  std::cout << "wrote memorization curves over " << curve.grid.size()
            << " flood levels\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"flooding regularizer laboratory"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::string grid_text;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int workers = -1;
  double flood_level = -1.0;
  int trials = -1;
  std::string variant;
  double noise = -1.0;
  int epochs = -1;

  app.add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);
  app.add_option("--out", out_dir, "output directory");
  auto* seed_opt = app.add_option("--seed", seed, "master seed");
  app.add_option("--workers", workers, "worker thread count (0 = hardware)");
  app.add_option("--flood", flood_level, "flood level b for single runs");
  app.add_option("--grid", grid_text, "flood-level grid START:STOP:STEP");
  app.add_option("--trials", trials, "number of sweep trials");
  app.add_option("--variant", variant,
                 "synthetic variant: two_gaussians | sinusoid | spiral");
  app.add_option("--noise", noise, "label noise rate");
  app.add_option("--epochs", epochs, "training epochs");

  auto* gen = app.add_subcommand("gen-data", "generate a synthetic dataset as CSV");
  auto* train = app.add_subcommand("train", "run one training run");
  auto* sweep = app.add_subcommand("sweep", "flood-level sweep with trials");
  auto* theorem = app.add_subcommand("verify-theorem",
                                     "Monte Carlo study of the flooded estimator MSE");
  auto* flat = app.add_subcommand("flatness", "1-D loss profiles around checkpoints");
  auto* memo = app.add_subcommand("memorization",
                                  "train-accuracy-vs-b tables from a sweep");

  std::vector<std::string> checkpoints;
  flat->add_option("--checkpoint", checkpoints,
                   "name=path, repeat per model (protocol uses 3)");
  std::string sweep_path;
  memo->add_option("--sweep-json", sweep_path, "sweep.json produced by `sweep`")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  seed_set = seed_opt->count() > 0;

  try {
    ExperimentConfig config = load_config(config_path);
    if (!out_dir.empty()) config.out_dir = out_dir;
    if (seed_set) config.master_seed = seed;
    if (workers >= 0) config.workers = workers;
    if (flood_level >= 0.0) config.train.flood_level = flood_level;
    if (!grid_text.empty()) {
      config.grid = parse_grid(grid_text);
      config.probe.b_grid = config.grid;  // verify-theorem shares the flag
    }
    if (trials > 0) config.trials = trials;
    if (!variant.empty()) {
      const auto v = flood::synthetic_variant_from_string(variant);
      const std::uint64_t keep_seed = config.dataset.spec.seed;
      const double keep_noise = config.dataset.spec.noise_rate;
      config.dataset.spec = flood::default_spec(v);
      config.dataset.spec.seed = keep_seed;
      config.dataset.spec.noise_rate = keep_noise;
      config.dataset.kind = "synthetic";
    }
    if (noise >= 0.0) config.dataset.spec.noise_rate = noise;
    if (epochs > 0) config.train.epochs = epochs;

    if (gen->parsed()) return cmd_gen_data(std::move(config));
    if (train->parsed()) return cmd_train(std::move(config));
    if (sweep->parsed()) return cmd_sweep(std::move(config));
    if (theorem->parsed()) return cmd_verify_theorem(std::move(config));
    if (flat->parsed()) return cmd_flatness(std::move(config), checkpoints);
    if (memo->parsed()) return cmd_memorization(std::move(config), sweep_path);
    std::cerr << "no subcommand selected\n";
    return 2;
  } catch (const flood::InvalidSpecError& err) {
    std::cerr << "config error: " << err.what() << "\n";
    return 2;
  } catch (const flood::ShapeError& err) {
    std::cerr << "config error: " << err.what() << "\n";
    return 2;
  } catch (const flood::NumericError& err) {
    std::cerr << "numeric failure: " << err.what() << "\n";
    return 3;
  } catch (const flood::IoError& err) {
    std::cerr << "I/O error: " << err.what() << "\n";
    return 4;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  }
}
