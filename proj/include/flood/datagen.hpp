#pragma once

#include <cstdint>
#include <string>
#include <utility>

#include "flood/dataset.hpp"
#include "flood/rng.hpp"

namespace flood {

enum class SyntheticVariant { TwoGaussians, Sinusoid, Spiral };

// Generation recipe for one synthetic SplitDataset. Splits are sampled
// independently (i.i.d. protocol), each from a sub-seed of `seed`.
struct SyntheticSpec {
  SyntheticVariant variant = SyntheticVariant::TwoGaussians;

  // Two Gaussians: positive class mean 0, negative class mean [m,...,m],
  // identity covariance, equal priors.
  int dim = 10;
  double m = 1.0;

  // Sinusoid: y = sign(x.w + sin(x.w')), w orthogonal to w'.
  Eigen::Vector2d w{1.0, 0.0};
  Eigen::Vector2d w_prime{0.0, 1.0};

  // Spiral: arm radius theta, Gaussian coordinate noise scaled by tau.
  double tau = 0.5;

  int n_train = 100;
  int n_val = 100;
  int n_test = 20000;

  double noise_rate = 0.0;  // label flip fraction, 0 or {0.01, 0.05, 0.10}
  bool clean_test = false;  // leave test labels unflipped

  std::uint64_t seed = 0;
};

// Per-variant sizes from the synthetic protocol (spiral arms double the
// per-class counts).
SyntheticSpec default_spec(SyntheticVariant variant);

SplitDataset gen_two_gaussians(const SyntheticSpec& spec);
SplitDataset gen_sinusoid(const SyntheticSpec& spec);
SplitDataset gen_spiral(const SyntheticSpec& spec);

// Dispatches on variant and applies label noise per `noise_rate` /
// `clean_test`. This is the entry point the trainer-facing code uses.
SplitDataset generate(const SyntheticSpec& spec);

// One i.i.d. population sample of n points, noise applied per-sample with
// probability noise_rate (used by the estimator probe, where draws model
// the data distribution rather than a fixed corpus).
LabeledDataset sample_population(const SyntheticSpec& spec, int n, Rng& rng);

// Flips exactly lround(rate * n) labels chosen uniformly without
// replacement; binary flip negates, multi-class flips uniformly over the
// other classes.
LabeledDataset flip_labels(const LabeledDataset& data, double rate, Rng& rng);

// Big-endian IDX ingestion; pixels scaled to [0,1], label bytes L mapped to
// classes L+1.
LabeledDataset load_idx(const std::string& images_path,
                        const std::string& labels_path);

std::pair<LabeledDataset, LabeledDataset> split_train_val(
    const LabeledDataset& data, double proportion, Rng& rng);

}  // namespace flood
