#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "fedpoison/dataset.hpp"

namespace fedpoison {

/// counts[true][predicted].
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::uint32_t num_classes)
      : c_(num_classes), counts_(static_cast<std::size_t>(num_classes) * num_classes, 0) {}

  std::uint64_t operator()(Label truth, Label predicted) const { return counts_[truth * c_ + predicted]; }
  std::uint64_t& at(Label truth, Label predicted) { return counts_[truth * c_ + predicted]; }

  std::uint32_t num_classes() const { return c_; }
  std::uint64_t total() const;
  std::uint64_t trace() const;
  std::uint64_t row_sum(Label truth) const;
  std::uint64_t col_sum(Label predicted) const;

 private:
  std::uint32_t c_;
  std::vector<std::uint64_t> counts_;
};

ConfusionMatrix confusion(std::span<const Label> predictions, std::span<const Label> labels, std::uint32_t c);

enum class F1Average { macro, weighted };

/// Per-class F1 = 2PR/(P+R), 0 when P+R == 0. Macro averages over the
/// classes that occur in the labels or the predictions; classes with neither
/// are skipped. Weighted averages by true support.
double f1_score(std::span<const Label> predictions, std::span<const Label> labels, std::uint32_t c,
                F1Average average = F1Average::macro);

inline double macro_f1(std::span<const Label> predictions, std::span<const Label> labels, std::uint32_t c) {
  return f1_score(predictions, labels, c, F1Average::macro);
}

double accuracy(std::span<const Label> predictions, std::span<const Label> labels);

}  // namespace fedpoison
