#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fedpoison/matrix.hpp"

namespace fedpoison {

using Label = std::uint32_t;

/// Feature matrix plus integer class labels. The constructor rejects
/// non-finite features, out-of-range labels and row-count mismatches.
class Dataset {
 public:
  Dataset() = default;
  Dataset(Matrix features, std::vector<Label> labels, std::uint32_t num_classes,
          std::vector<std::string> feature_names = {});

  const Matrix& features() const { return features_; }
  const std::vector<Label>& labels() const { return labels_; }
  std::uint32_t num_classes() const { return num_classes_; }
  const std::vector<std::string>& feature_names() const { return feature_names_; }

  std::size_t size() const { return labels_.size(); }
  std::size_t num_features() const { return features_.cols(); }
  bool empty() const { return labels_.empty(); }

  /// Rows at the given positions, in that order.
  Dataset subset(std::span<const std::size_t> rows) const;

  /// Same features, new labels (checked against num_classes).
  Dataset with_labels(std::vector<Label> labels) const;

  /// Number of rows per class id.
  std::vector<std::size_t> class_counts() const;

  bool operator==(const Dataset&) const = default;

 private:
  Matrix features_;
  std::vector<Label> labels_;
  std::uint32_t num_classes_ = 0;
  std::vector<std::string> feature_names_;
};

}  // namespace fedpoison
