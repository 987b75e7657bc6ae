#include "flood/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <sstream>

#include "flood/errors.hpp"

namespace flood {

namespace {

// sub-seed tags: one stream per split, one per split's label noise
constexpr std::uint64_t kSplitTag = 1;
constexpr std::uint64_t kNoiseTag = 100;

void check_sizes(const SyntheticSpec& spec) {
  if (spec.n_train <= 0 || spec.n_val <= 0 || spec.n_test <= 0) {
    throw InvalidSpecError("split sizes must be positive");
  }
}

int sign_label(double v) { return v >= 0.0 ? +1 : -1; }

LabeledDataset two_gaussians_split(const SyntheticSpec& spec, int n, Rng& rng) {
  LabeledDataset data;
  data.num_classes = 2;
  data.features.resize(n, spec.dim);
  data.labels.resize(n);
  for (int i = 0; i < n; ++i) {
    // positive class mean 0, negative class mean [m,...,m], equal priors
    const int label = rng.uniform() < 0.5 ? +1 : -1;
    data.labels[i] = label;
    const double offset = label == +1 ? 0.0 : spec.m;
    for (int j = 0; j < spec.dim; ++j) {
      data.features(i, j) = offset + rng.normal();
    }
  }
  return data;
}

LabeledDataset sinusoid_split(const SyntheticSpec& spec, int n, Rng& rng) {
  LabeledDataset data;
  data.num_classes = 2;
  data.features.resize(n, 2);
  data.labels.resize(n);
  for (int i = 0; i < n; ++i) {
    const Eigen::Vector2d x{rng.normal(), rng.normal()};
    data.features.row(i) = x.transpose();
    data.labels[i] = sign_label(x.dot(spec.w) + std::sin(x.dot(spec.w_prime)));
  }
  return data;
}

LabeledDataset spiral_split(const SyntheticSpec& spec, int n, Rng& rng) {
  const int n_pos = (n + 1) / 2;
  const int n_neg = n - n_pos;
  if (n_pos < 2 || n_neg < 2) {
    throw InvalidSpecError("spiral needs at least 2 points per arm");
  }

  LabeledDataset data;
  data.num_classes = 2;
  data.features.resize(n, 2);
  data.labels.resize(n);

  const auto angle_at = [](int i, int arm_size) {
    return 4.0 * std::numbers::pi * static_cast<double>(i) /
           static_cast<double>(arm_size - 1);
  };
  for (int i = 0; i < n_pos; ++i) {
    const double theta = angle_at(i, n_pos);
    data.features(i, 0) = theta * std::cos(theta) + spec.tau * rng.normal();
    data.features(i, 1) = theta * std::sin(theta) + spec.tau * rng.normal();
    data.labels[i] = +1;
  }
  for (int i = 0; i < n_neg; ++i) {
    // mirror arm: radius and angle both offset by pi
    const double a = angle_at(i, n_neg) + std::numbers::pi;
    data.features(n_pos + i, 0) = a * std::cos(a) + spec.tau * rng.normal();
    data.features(n_pos + i, 1) = a * std::sin(a) + spec.tau * rng.normal();
    data.labels[n_pos + i] = -1;
  }
  return data;
}

void check_variant_params(const SyntheticSpec& spec) {
  switch (spec.variant) {
    case SyntheticVariant::TwoGaussians:
      if (spec.dim < 1) throw InvalidSpecError("two-gaussians dim must be >= 1");
      break;
    case SyntheticVariant::Sinusoid:
      if (std::abs(spec.w.dot(spec.w_prime)) > 1e-12) {
        throw InvalidSpecError("sinusoid direction vectors must be orthogonal");
      }
      break;
    case SyntheticVariant::Spiral:
      if (spec.tau < 0.0) throw InvalidSpecError("spiral tau must be >= 0");
      break;
  }
}

SplitDataset make_splits(const SyntheticSpec& spec,
                         LabeledDataset (*gen)(const SyntheticSpec&, int, Rng&)) {
  check_sizes(spec);
  check_variant_params(spec);
  SplitDataset splits;
  const int sizes[3] = {spec.n_train, spec.n_val, spec.n_test};
  LabeledDataset* out[3] = {&splits.train, &splits.validation, &splits.test};
  for (int k = 0; k < 3; ++k) {
    Rng rng(derive_seed(spec.seed, kSplitTag, static_cast<std::uint64_t>(k)));
    *out[k] = gen(spec, sizes[k], rng);
  }
  return splits;
}

std::uint32_t read_be_u32(std::istream& in, const std::string& path) {
  unsigned char bytes[4];
  in.read(reinterpret_cast<char*>(bytes), 4);
  if (!in) {
    throw IoError("truncated IDX header in " + path);
  }
  return (static_cast<std::uint32_t>(bytes[0]) << 24) |
         (static_cast<std::uint32_t>(bytes[1]) << 16) |
         (static_cast<std::uint32_t>(bytes[2]) << 8) |
         static_cast<std::uint32_t>(bytes[3]);
}

}  // namespace

SyntheticSpec default_spec(SyntheticVariant variant) {
  SyntheticSpec spec;
  spec.variant = variant;
  if (variant == SyntheticVariant::Spiral) {
    // 100 per class for train/val, 10000 per class for test
    spec.n_train = 200;
    spec.n_val = 200;
    spec.n_test = 20000;
  }
  return spec;
}

SplitDataset gen_two_gaussians(const SyntheticSpec& spec) {
  return make_splits(spec, &two_gaussians_split);
}

SplitDataset gen_sinusoid(const SyntheticSpec& spec) {
  return make_splits(spec, &sinusoid_split);
}

SplitDataset gen_spiral(const SyntheticSpec& spec) {
  return make_splits(spec, &spiral_split);
}

SplitDataset generate(const SyntheticSpec& spec) {
  SplitDataset splits;
  switch (spec.variant) {
    case SyntheticVariant::TwoGaussians: splits = gen_two_gaussians(spec); break;
    case SyntheticVariant::Sinusoid: splits = gen_sinusoid(spec); break;
    case SyntheticVariant::Spiral: splits = gen_spiral(spec); break;
  }
  if (spec.noise_rate > 0.0) {
    LabeledDataset* out[3] = {&splits.train, &splits.validation, &splits.test};
    for (int k = 0; k < 3; ++k) {
      if (k == 2 && spec.clean_test) continue;
      Rng rng(derive_seed(spec.seed, kNoiseTag, static_cast<std::uint64_t>(k)));
      *out[k] = flip_labels(*out[k], spec.noise_rate, rng);
    }
  }
  return splits;
}

LabeledDataset sample_population(const SyntheticSpec& spec, int n, Rng& rng) {
  if (n < 1) {
    throw InvalidSpecError("population sample size must be positive");
  }
  check_variant_params(spec);

  LabeledDataset data;
  switch (spec.variant) {
    case SyntheticVariant::TwoGaussians:
      data = two_gaussians_split(spec, n, rng);
      break;
    case SyntheticVariant::Sinusoid:
      data = sinusoid_split(spec, n, rng);
      break;
    case SyntheticVariant::Spiral: {
      // continuum model of the spiral: uniform angle over [0, 4pi]
      data.num_classes = 2;
      data.features.resize(n, 2);
      data.labels.resize(n);
      for (int i = 0; i < n; ++i) {
        const int label = rng.uniform() < 0.5 ? +1 : -1;
        const double theta = 4.0 * std::numbers::pi * rng.uniform();
        const double a = label == +1 ? theta : theta + std::numbers::pi;
        data.features(i, 0) = a * std::cos(a) + spec.tau * rng.normal();
        data.features(i, 1) = a * std::sin(a) + spec.tau * rng.normal();
        data.labels[i] = label;
      }
      break;
    }
  }
  if (spec.noise_rate > 0.0) {
    // i.i.d. per-sample flips: this is the population law, not the
    // fixed-count corpus transform in flip_labels
    for (int i = 0; i < n; ++i) {
      if (rng.uniform() < spec.noise_rate) {
        data.labels[i] = -data.labels[i];
      }
    }
  }
  return data;
}

LabeledDataset flip_labels(const LabeledDataset& data, double rate, Rng& rng) {
  if (rate < 0.0 || rate > 0.5) {
    throw InvalidSpecError("label noise rate must lie in [0, 0.5]");
  }
  const int n = static_cast<int>(data.size());
  const int count = static_cast<int>(std::lround(rate * n));

  LabeledDataset flipped = data;
  if (count == 0) return flipped;

  // partial Fisher-Yates: first `count` entries are a uniform sample
  // without replacement
  std::vector<int> indices(n);
  for (int i = 0; i < n; ++i) indices[i] = i;
  for (int i = 0; i < count; ++i) {
    const int j = i + static_cast<int>(rng.below(static_cast<std::uint64_t>(n - i)));
    std::swap(indices[i], indices[j]);
  }

  for (int i = 0; i < count; ++i) {
    int& label = flipped.labels[indices[i]];
    if (data.binary()) {
      label = -label;
    } else {
      const int r = 1 + static_cast<int>(rng.below(
                            static_cast<std::uint64_t>(data.num_classes - 1)));
      label = r < label ? r : r + 1;  // uniform over the other K-1 classes
    }
  }
  return flipped;
}

LabeledDataset load_idx(const std::string& images_path,
                        const std::string& labels_path) {
  std::ifstream images(images_path, std::ios::binary);
  if (!images) {
    throw IoError("cannot open IDX image file: " + images_path);
  }
  std::ifstream labels(labels_path, std::ios::binary);
  if (!labels) {
    throw IoError("cannot open IDX label file: " + labels_path);
  }

  if (read_be_u32(images, images_path) != 0x00000803u) {
    throw IoError("bad IDX image magic in " + images_path);
  }
  const std::uint32_t n_images = read_be_u32(images, images_path);
  const std::uint32_t rows = read_be_u32(images, images_path);
  const std::uint32_t cols = read_be_u32(images, images_path);

  if (read_be_u32(labels, labels_path) != 0x00000801u) {
    throw IoError("bad IDX label magic in " + labels_path);
  }
  const std::uint32_t n_labels = read_be_u32(labels, labels_path);

  if (n_images != n_labels) {
    std::ostringstream msg;
    msg << "IDX image/label count mismatch: " << n_images << " vs " << n_labels;
    throw IoError(msg.str());
  }
  if (n_images == 0 || rows == 0 || cols == 0) {
    throw IoError("empty IDX payload in " + images_path);
  }

  const std::size_t d = static_cast<std::size_t>(rows) * cols;
  std::vector<unsigned char> pixel_buf(d);
  LabeledDataset data;
  data.features.resize(n_images, static_cast<Eigen::Index>(d));
  data.labels.resize(n_images);

  int max_label = 0;
  for (std::uint32_t i = 0; i < n_images; ++i) {
    images.read(reinterpret_cast<char*>(pixel_buf.data()),
                static_cast<std::streamsize>(d));
    if (!images) {
      throw IoError("truncated IDX image payload in " + images_path);
    }
    for (std::size_t j = 0; j < d; ++j) {
      data.features(i, static_cast<Eigen::Index>(j)) = pixel_buf[j] / 255.0;
    }
    unsigned char label_byte = 0;
    labels.read(reinterpret_cast<char*>(&label_byte), 1);
    if (!labels) {
      throw IoError("truncated IDX label payload in " + labels_path);
    }
    data.labels[i] = static_cast<int>(label_byte) + 1;  // bytes 0..9 -> 1..10
    max_label = std::max(max_label, data.labels[i]);
  }
  if (max_label <= 2) {
    // two-class corpus: fold onto the +/-1 convention
    for (auto& label : data.labels) label = label == 2 ? +1 : -1;
    data.num_classes = 2;
  } else {
    data.num_classes = max_label;
  }
  return data;
}

std::pair<LabeledDataset, LabeledDataset> split_train_val(
    const LabeledDataset& data, double proportion, Rng& rng) {
  if (!(proportion > 0.0) || !(proportion < 1.0)) {
    throw InvalidSpecError("split proportion must lie in (0, 1)");
  }
  const int n = static_cast<int>(data.size());
  const int n_train = static_cast<int>(std::llround(proportion * n));
  if (n_train < 1 || n_train >= n) {
    throw InvalidSpecError("split proportion degenerates to an empty side");
  }

  std::vector<int> indices(n);
  for (int i = 0; i < n; ++i) indices[i] = i;
  rng.shuffle(indices);

  const auto take = [&](int start, int count) {
    LabeledDataset subset;
    subset.num_classes = data.num_classes;
    subset.features.resize(count, data.dim());
    subset.labels.resize(count);
    for (int i = 0; i < count; ++i) {
      subset.features.row(i) = data.features.row(indices[start + i]);
      subset.labels[i] = data.labels[indices[start + i]];
    }
    return subset;
  };
  return {take(0, n_train), take(n_train, n - n_train)};
}

}  // namespace flood
