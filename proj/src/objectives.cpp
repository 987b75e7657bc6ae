#include "flood/objectives.hpp"

#include <cmath>
#include <sstream>

#include "flood/errors.hpp"

namespace flood {

namespace {

// overflow-safe sigmoid(-z)
double sigmoid_neg(double z) {
  if (z >= 0.0) {
    const double e = std::exp(-z);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(z));
}

void check_binary_head(const ModelParams& params, const LabeledDataset& data) {
  if (!data.binary()) {
    throw ShapeError("logistic loss requires a binary dataset");
  }
  if (params.output_dim() != 1) {
    throw ShapeError("binary tasks use a single-output head");
  }
}

void check_multiclass_head(const ModelParams& params, const LabeledDataset& data) {
  if (data.binary()) {
    throw ShapeError("softmax cross-entropy requires a multi-class dataset");
  }
  if (params.output_dim() != data.num_classes) {
    std::ostringstream msg;
    msg << "model emits " << params.output_dim() << " scores for "
        << data.num_classes << " classes";
    throw ShapeError(msg.str());
  }
}

// +1 iff score >= 0: the single-score specialization of the argmax tie rule.
int binary_prediction(double score) { return score >= 0.0 ? +1 : -1; }

void check_eval_head(const ModelParams& params, const LabeledDataset& data) {
  if (data.binary()) {
    if (params.output_dim() != 1) {
      throw ShapeError("binary tasks use a single-output head");
    }
  } else if (params.output_dim() != data.num_classes) {
    throw ShapeError("score width does not match the class count");
  }
}

double zero_one_mean(const Matrix& scores, const LabeledDataset& data) {
  const Eigen::Index n = scores.rows();
  double wrong = 0.0;
  if (data.binary()) {
    for (Eigen::Index i = 0; i < n; ++i) {
      wrong += binary_prediction(scores(i, 0)) != data.labels[i] ? 1.0 : 0.0;
    }
  } else {
    for (Eigen::Index i = 0; i < n; ++i) {
      int best = 0;
      for (int z = 1; z < scores.cols(); ++z) {
        if (scores(i, z) >= scores(i, best)) best = z;
      }
      wrong += best + 1 != data.labels[i] ? 1.0 : 0.0;
    }
  }
  return wrong / static_cast<double>(n);
}

}  // namespace

FloodedValue flooded(double raw_risk, double b) {
  if (b < 0.0) {
    throw InvalidSpecError("flood level must be non-negative");
  }
  FloodedValue value;
  value.raw_risk = raw_risk;
  value.flooded_risk = std::abs(raw_risk - b) + b;
  value.direction = raw_risk >= b ? +1 : -1;
  return value;
}

int argmax_label(const Vector& scores) {
  int best = 0;
  for (int z = 1; z < scores.size(); ++z) {
    if (scores[z] >= scores[best]) best = z;  // ties go to the largest index
  }
  return best + 1;
}

int zero_one_loss(const Vector& scores, int label) {
  if (scores.size() < 1) {
    throw ShapeError("zero-one loss needs at least one score");
  }
  if (label < 1 || label > scores.size()) {
    std::ostringstream msg;
    msg << "label " << label << " outside 1.." << scores.size();
    throw InvalidSpecError(msg.str());
  }
  return argmax_label(scores) == label ? 0 : 1;
}

std::pair<Vector, Matrix> softmax_cross_entropy(const Matrix& scores,
                                                const std::vector<int>& labels) {
  const Eigen::Index n = scores.rows();
  const Eigen::Index k = scores.cols();
  if (static_cast<Eigen::Index>(labels.size()) != n) {
    throw ShapeError("label count does not match score rows");
  }

  Vector losses(n);
  Matrix grads(n, k);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int label = labels[i];
    if (label < 1 || label > k) {
      throw InvalidSpecError("class label outside 1..K");
    }
    const double shift = scores.row(i).maxCoeff();
    Eigen::RowVectorXd exps = (scores.row(i).array() - shift).exp();
    const double z = exps.sum();
    losses[i] = std::log(z) - (scores(i, label - 1) - shift);
    grads.row(i) = exps / z;
    grads(i, label - 1) -= 1.0;
  }
  return {std::move(losses), std::move(grads)};
}

std::pair<double, double> logistic_loss(double score, int label) {
  if (label != 1 && label != -1) {
    throw InvalidSpecError("logistic label must be +1 or -1");
  }
  const double z = static_cast<double>(label) * score;
  const double loss = z >= 0.0 ? std::log1p(std::exp(-z))
                               : -z + std::log1p(std::exp(z));
  const double grad = -static_cast<double>(label) * sigmoid_neg(z);
  return {loss, grad};
}

std::pair<Vector, Vector> logistic_loss_batch(const Vector& scores,
                                              const std::vector<int>& labels) {
  const Eigen::Index n = scores.size();
  if (static_cast<Eigen::Index>(labels.size()) != n) {
    throw ShapeError("label count does not match score count");
  }
  Vector losses(n);
  Vector grads(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto [loss, grad] = logistic_loss(scores[i], labels[i]);
    losses[i] = loss;
    grads[i] = grad;
  }
  return {std::move(losses), std::move(grads)};
}

std::pair<Vector, Matrix> surrogate_loss_grad(const Matrix& scores,
                                              const std::vector<int>& labels,
                                              LossKind loss) {
  switch (loss) {
    case LossKind::Logistic: {
      if (scores.cols() != 1) {
        throw ShapeError("logistic loss expects a single score column");
      }
      auto [losses, grads] = logistic_loss_batch(scores.col(0), labels);
      return {std::move(losses), Matrix(std::move(grads))};
    }
    case LossKind::SoftmaxCrossEntropy:
      return softmax_cross_entropy(scores, labels);
    case LossKind::ZeroOne:
      throw InvalidSpecError("zero-one loss is evaluation-only");
  }
  throw InvalidSpecError("unknown loss kind");
}

EvalResult evaluate(const ModelParams& params, const LabeledDataset& data,
                    LossKind surrogate) {
  if (data.size() == 0) {
    throw InvalidSpecError("empty dataset");
  }
  if (surrogate == LossKind::Logistic) {
    check_binary_head(params, data);
  } else if (surrogate == LossKind::SoftmaxCrossEntropy) {
    check_multiclass_head(params, data);
  } else {
    check_eval_head(params, data);
  }

  const Matrix scores = forward_scores(params, data.features);
  EvalResult result{};
  result.error = zero_one_mean(scores, data);

  switch (surrogate) {
    case LossKind::ZeroOne:
      result.loss = result.error;
      break;
    case LossKind::Logistic: {
      double total = 0.0;
      for (Eigen::Index i = 0; i < scores.rows(); ++i) {
        total += logistic_loss(scores(i, 0), data.labels[i]).first;
      }
      result.loss = total / static_cast<double>(scores.rows());
      break;
    }
    case LossKind::SoftmaxCrossEntropy: {
      const auto [losses, grads] = softmax_cross_entropy(scores, data.labels);
      result.loss = losses.mean();
      break;
    }
  }
  return result;
}

double empirical_risk(const ModelParams& params, const LabeledDataset& data,
                      LossKind loss) {
  return evaluate(params, data, loss).loss;
}

double classification_error(const ModelParams& params, const LabeledDataset& data) {
  if (data.size() == 0) {
    throw InvalidSpecError("empty dataset");
  }
  check_eval_head(params, data);
  const Matrix scores = forward_scores(params, data.features);
  return zero_one_mean(scores, data);
}

}  // namespace flood
