#include "flood/dataset.hpp"

#include <fstream>
#include <sstream>

#include "flood/errors.hpp"
#include "flood/io.hpp"

namespace flood {

void validate_dataset(const LabeledDataset& data) {
  if (data.size() < 1) {
    throw InvalidSpecError("dataset is empty");
  }
  if (static_cast<Eigen::Index>(data.labels.size()) != data.size()) {
    throw ShapeError("label count does not match feature rows");
  }
  if (!data.features.allFinite()) {
    throw NumericError("dataset features contain non-finite values");
  }
  for (int label : data.labels) {
    if (data.binary()) {
      if (label != 1 && label != -1) {
        throw InvalidSpecError("binary labels must be +1 or -1");
      }
    } else if (label < 1 || label > data.num_classes) {
      throw InvalidSpecError("class label outside 1..K");
    }
  }
}

void write_dataset_csv(const LabeledDataset& data, const std::string& path) {
  std::ostringstream out;
  for (Eigen::Index j = 0; j < data.dim(); ++j) {
    out << 'x' << j + 1 << ',';
  }
  out << "label\n";
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    for (Eigen::Index j = 0; j < data.dim(); ++j) {
      out << format_real(data.features(i, j)) << ',';
    }
    out << data.labels[i] << '\n';
  }
  write_text_file(path, out.str());
}

}  // namespace flood
