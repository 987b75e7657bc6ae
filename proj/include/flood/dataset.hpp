#pragma once

#include <string>
#include <vector>

#include "flood/types.hpp"

namespace flood {

// Feature matrix plus integer labels. Binary tasks use labels in {-1, +1}
// with num_classes == 2 and a single-output model head; multi-class tasks
// use labels in 1..K with a K-output head.
struct LabeledDataset {
  Matrix features;          // n x d
  std::vector<int> labels;  // n
  int num_classes = 2;

  Eigen::Index size() const { return features.rows(); }
  Eigen::Index dim() const { return features.cols(); }
  bool binary() const { return num_classes == 2; }
};

// Validates n >= 1, finite features, labels within the declared range.
void validate_dataset(const LabeledDataset& data);

struct SplitDataset {
  LabeledDataset train;
  LabeledDataset validation;
  LabeledDataset test;
};

// CSV export, header row "x1,...,xd,label", 17 significant digits.
void write_dataset_csv(const LabeledDataset& data, const std::string& path);

}  // namespace flood
