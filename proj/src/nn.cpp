#include "flood/nn.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "flood/errors.hpp"
#include "flood/rng.hpp"

namespace flood {

namespace {

constexpr char kCheckpointMagic[8] = {'F', 'L', 'O', 'O', 'D', 'C', 'K', 'P'};
constexpr std::uint32_t kCheckpointVersion = 1;

void check_layer_chain(const ModelParams& params) {
  if (params.layers.empty()) {
    throw InvalidSpecError("model has no layers");
  }
  for (std::size_t t = 0; t + 1 < params.layers.size(); ++t) {
    if (params.layers[t + 1].weight.cols() != params.layers[t].weight.rows()) {
      std::ostringstream msg;
      msg << "layer " << t + 1 << " expects " << params.layers[t + 1].weight.cols()
          << " inputs but layer " << t << " emits " << params.layers[t].weight.rows();
      throw ShapeError(msg.str());
    }
  }
}

}  // namespace

int ModelParams::input_dim() const {
  return layers.empty() ? 0 : static_cast<int>(layers.front().weight.cols());
}

int ModelParams::output_dim() const {
  return layers.empty() ? 0 : static_cast<int>(layers.back().weight.rows());
}

std::vector<int> ModelParams::layer_sizes() const {
  std::vector<int> sizes;
  if (layers.empty()) return sizes;
  sizes.push_back(input_dim());
  for (const auto& layer : layers) {
    sizes.push_back(static_cast<int>(layer.weight.rows()));
  }
  return sizes;
}

std::size_t ModelParams::parameter_count() const {
  std::size_t count = 0;
  for (const auto& layer : layers) {
    count += static_cast<std::size_t>(layer.weight.size()) +
             static_cast<std::size_t>(layer.bias.size());
  }
  return count;
}

ModelParams init_mlp(const std::vector<int>& layer_sizes, std::uint64_t seed) {
  if (layer_sizes.size() < 2) {
    throw InvalidSpecError("architecture needs at least input and output sizes");
  }
  for (int size : layer_sizes) {
    if (size <= 0) {
      throw InvalidSpecError("layer sizes must be positive");
    }
  }

  Rng rng(seed);
  ModelParams params;
  params.layers.reserve(layer_sizes.size() - 1);
  for (std::size_t t = 0; t + 1 < layer_sizes.size(); ++t) {
    const int in_units = layer_sizes[t];
    const int out_units = layer_sizes[t + 1];
    DenseLayer layer;
    layer.weight.resize(out_units, in_units);
    const double stddev = std::sqrt(2.0 / static_cast<double>(in_units));
    double* data = layer.weight.data();
    for (Eigen::Index i = 0; i < layer.weight.size(); ++i) {
      data[i] = stddev * rng.normal();
    }
    layer.bias = Vector::Zero(out_units);
    params.layers.push_back(std::move(layer));
  }
  return params;
}

ForwardTrace forward(const ModelParams& params, const Matrix& inputs) {
  check_layer_chain(params);
  if (inputs.cols() != params.input_dim()) {
    std::ostringstream msg;
    msg << "input width " << inputs.cols() << " does not match model input dim "
        << params.input_dim();
    throw ShapeError(msg.str());
  }

  ForwardTrace trace;
  trace.input = inputs;
  trace.pre.reserve(params.layers.size());
  trace.post.reserve(params.layers.size());

  const Matrix* activation = &trace.input;
  for (std::size_t t = 0; t < params.layers.size(); ++t) {
    const DenseLayer& layer = params.layers[t];
    Matrix pre(inputs.rows(), layer.weight.rows());
    pre.noalias() = (*activation) * layer.weight.transpose();
    pre.rowwise() += layer.bias.transpose();
    trace.pre.push_back(std::move(pre));
    const bool hidden = t + 1 < params.layers.size();
    trace.post.push_back(hidden ? trace.pre.back().cwiseMax(0.0)
                                : trace.pre.back());
    activation = &trace.post.back();
  }
  return trace;
}

Matrix forward_scores(const ModelParams& params, const Matrix& inputs) {
  check_layer_chain(params);
  if (inputs.cols() != params.input_dim()) {
    throw ShapeError("input width does not match model input dim");
  }

  const Eigen::Index n = inputs.rows();
  constexpr Eigen::Index kChunk = 4096;
  Matrix scores(n, params.output_dim());
  Matrix cur, next;
  for (Eigen::Index start = 0; start < n; start += kChunk) {
    const Eigen::Index rows = std::min(kChunk, n - start);
    cur = inputs.middleRows(start, rows);
    for (std::size_t t = 0; t < params.layers.size(); ++t) {
      const DenseLayer& layer = params.layers[t];
      next.resize(rows, layer.weight.rows());
      next.noalias() = cur * layer.weight.transpose();
      next.rowwise() += layer.bias.transpose();
      if (t + 1 < params.layers.size()) {
        next = next.cwiseMax(0.0);
      }
      cur.swap(next);
    }
    scores.middleRows(start, rows) = cur;
  }
  return scores;
}

Gradients backward(const ModelParams& params, const ForwardTrace& trace,
                   const Matrix& score_grad) {
  const std::size_t depth = params.layers.size();
  if (trace.pre.size() != depth || trace.post.size() != depth) {
    throw ShapeError("trace depth does not match model depth");
  }
  if (score_grad.rows() != trace.input.rows() ||
      score_grad.cols() != params.output_dim()) {
    throw ShapeError("score gradient shape does not match trace scores");
  }

  Gradients grads = zeros_like(params);
  Matrix delta = score_grad;
  for (std::size_t t = depth; t-- > 0;) {
    const Matrix& below = (t == 0) ? trace.input : trace.post[t - 1];
    grads.layers[t].weight.noalias() = delta.transpose() * below;
    grads.layers[t].bias = delta.colwise().sum();
    if (t > 0) {
      // ReLU subgradient at exactly 0 is 0: mask on pre > 0.
      Matrix next_delta(delta.rows(), params.layers[t].weight.cols());
      next_delta.noalias() = delta * params.layers[t].weight;
      next_delta.array() *= (trace.pre[t - 1].array() > 0.0).cast<double>();
      delta.swap(next_delta);
    }
  }
  return grads;
}

Gradients finite_diff_grad(const ModelParams& params,
                           const std::function<double(const ModelParams&)>& objective,
                           double epsilon) {
  if (!(epsilon > 0.0)) {
    throw InvalidSpecError("finite-difference epsilon must be positive");
  }

  ModelParams probe = params;
  Gradients grads = zeros_like(params);
  const auto central = [&](double& slot, double& out) {
    const double saved = slot;
    slot = saved + epsilon;
    const double above = objective(probe);
    slot = saved - epsilon;
    const double below = objective(probe);
    slot = saved;
    if (!std::isfinite(above) || !std::isfinite(below)) {
      throw NumericError("objective returned a non-finite value");
    }
    out = (above - below) / (2.0 * epsilon);
  };

  for (std::size_t t = 0; t < probe.layers.size(); ++t) {
    double* w = probe.layers[t].weight.data();
    double* gw = grads.layers[t].weight.data();
    for (Eigen::Index i = 0; i < probe.layers[t].weight.size(); ++i) {
      central(w[i], gw[i]);
    }
    double* b = probe.layers[t].bias.data();
    double* gb = grads.layers[t].bias.data();
    for (Eigen::Index i = 0; i < probe.layers[t].bias.size(); ++i) {
      central(b[i], gb[i]);
    }
  }
  return grads;
}

Gradients zeros_like(const ModelParams& params) {
  Gradients grads;
  grads.layers.reserve(params.layers.size());
  for (const auto& layer : params.layers) {
    DenseLayer zero;
    zero.weight = Matrix::Zero(layer.weight.rows(), layer.weight.cols());
    zero.bias = Vector::Zero(layer.bias.size());
    grads.layers.push_back(std::move(zero));
  }
  return grads;
}

bool all_finite(const ModelParams& params) {
  for (const auto& layer : params.layers) {
    if (!layer.weight.allFinite() || !layer.bias.allFinite()) return false;
  }
  return true;
}

bool shape_congruent(const ModelParams& params, const Gradients& grads) {
  if (params.layers.size() != grads.layers.size()) return false;
  for (std::size_t t = 0; t < params.layers.size(); ++t) {
    if (params.layers[t].weight.rows() != grads.layers[t].weight.rows() ||
        params.layers[t].weight.cols() != grads.layers[t].weight.cols() ||
        params.layers[t].bias.size() != grads.layers[t].bias.size()) {
      return false;
    }
  }
  return true;
}

void save_checkpoint(const ModelParams& params, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw IoError("cannot open checkpoint for writing: " + path);
  }
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  const std::uint32_t version = kCheckpointVersion;
  out.write(reinterpret_cast<const char*>(&version), sizeof(version));

  const std::vector<int> sizes = params.layer_sizes();
  const std::uint32_t n_sizes = static_cast<std::uint32_t>(sizes.size());
  out.write(reinterpret_cast<const char*>(&n_sizes), sizeof(n_sizes));
  for (int size : sizes) {
    const std::uint32_t s = static_cast<std::uint32_t>(size);
    out.write(reinterpret_cast<const char*>(&s), sizeof(s));
  }
  for (const auto& layer : params.layers) {
    // row-major payload so the file layout is independent of Eigen's storage
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) {
        const double v = layer.weight(r, c);
        out.write(reinterpret_cast<const char*>(&v), sizeof(v));
      }
    }
    out.write(reinterpret_cast<const char*>(layer.bias.data()),
              static_cast<std::streamsize>(sizeof(double) * layer.bias.size()));
  }
  if (!out) {
    throw IoError("checkpoint write failed: " + path);
  }
}

ModelParams load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open checkpoint: " + path);
  }
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
    throw IoError("not a model checkpoint: " + path);
  }
  std::uint32_t version = 0;
  in.read(reinterpret_cast<char*>(&version), sizeof(version));
  if (!in || version != kCheckpointVersion) {
    throw IoError("unsupported checkpoint version in " + path);
  }
  std::uint32_t n_sizes = 0;
  in.read(reinterpret_cast<char*>(&n_sizes), sizeof(n_sizes));
  if (!in || n_sizes < 2) {
    throw IoError("corrupt checkpoint header in " + path);
  }
  std::vector<int> sizes(n_sizes);
  for (auto& size : sizes) {
    std::uint32_t s = 0;
    in.read(reinterpret_cast<char*>(&s), sizeof(s));
    if (!in || s == 0) {
      throw IoError("corrupt checkpoint header in " + path);
    }
    size = static_cast<int>(s);
  }

  ModelParams params;
  params.layers.resize(n_sizes - 1);
  for (std::uint32_t t = 0; t + 1 < n_sizes; ++t) {
    DenseLayer& layer = params.layers[t];
    layer.weight.resize(sizes[t + 1], sizes[t]);
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) {
        double v = 0.0;
        in.read(reinterpret_cast<char*>(&v), sizeof(v));
        layer.weight(r, c) = v;
      }
    }
    layer.bias.resize(sizes[t + 1]);
    in.read(reinterpret_cast<char*>(layer.bias.data()),
            static_cast<std::streamsize>(sizeof(double) * layer.bias.size()));
    if (!in) {
      throw IoError("truncated checkpoint: " + path);
    }
  }
  return params;
}

}  // namespace flood
