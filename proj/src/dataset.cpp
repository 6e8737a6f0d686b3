#include "fedpoison/dataset.hpp"

#include <cmath>
#include <string>

#include "fedpoison/errors.hpp"

namespace fedpoison {

Dataset::Dataset(Matrix features, std::vector<Label> labels, std::uint32_t num_classes,
                 std::vector<std::string> feature_names)
    : features_(std::move(features)),
      labels_(std::move(labels)),
      num_classes_(num_classes),
      feature_names_(std::move(feature_names)) {
  if (features_.rows() != labels_.size()) {
    throw DataError("dataset: " + std::to_string(features_.rows()) + " feature rows but " +
                    std::to_string(labels_.size()) + " labels");
  }
  if (!feature_names_.empty() && feature_names_.size() != features_.cols()) {
    throw DataError("dataset: feature name count does not match column count");
  }
  for (double x : features_.values()) {
    if (!std::isfinite(x)) throw DataError("dataset: non-finite feature value");
  }
  for (Label y : labels_) {
    if (y >= num_classes_) {
      throw DataError("dataset: label " + std::to_string(y) + " outside [0, " +
                      std::to_string(num_classes_) + ")");
    }
  }
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
  Matrix x(rows.size(), features_.cols());
  std::vector<Label> y(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= size()) throw std::out_of_range("dataset subset: row index out of range");
    const auto src = features_.row(rows[i]);
    std::copy(src.begin(), src.end(), x.row(i).begin());
    y[i] = labels_[rows[i]];
  }
  return Dataset(std::move(x), std::move(y), num_classes_, feature_names_);
}

Dataset Dataset::with_labels(std::vector<Label> labels) const {
  return Dataset(features_, std::move(labels), num_classes_, feature_names_);
}

std::vector<std::size_t> Dataset::class_counts() const {
  std::vector<std::size_t> counts(num_classes_, 0);
  for (Label y : labels_) ++counts[y];
  return counts;
}

}  // namespace fedpoison
