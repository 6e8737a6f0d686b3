#include "fedpoison/metrics.hpp"

#include <numeric>
#include <stdexcept>

namespace fedpoison {

std::uint64_t ConfusionMatrix::total() const {
  return std::accumulate(counts_.begin(), counts_.end(), std::uint64_t{0});
}

std::uint64_t ConfusionMatrix::trace() const {
  std::uint64_t t = 0;
  for (Label k = 0; k < c_; ++k) t += (*this)(k, k);
  return t;
}

std::uint64_t ConfusionMatrix::row_sum(Label truth) const {
  std::uint64_t s = 0;
  for (Label p = 0; p < c_; ++p) s += (*this)(truth, p);
  return s;
}

std::uint64_t ConfusionMatrix::col_sum(Label predicted) const {
  std::uint64_t s = 0;
  for (Label t = 0; t < c_; ++t) s += (*this)(t, predicted);
  return s;
}

ConfusionMatrix confusion(std::span<const Label> predictions, std::span<const Label> labels, std::uint32_t c) {
  if (predictions.size() != labels.size()) throw std::invalid_argument("confusion: length mismatch");
  ConfusionMatrix m(c);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= c || predictions[i] >= c) throw std::invalid_argument("confusion: class id out of range");
    ++m.at(labels[i], predictions[i]);
  }
  return m;
}

double f1_score(std::span<const Label> predictions, std::span<const Label> labels, std::uint32_t c,
                F1Average average) {
  if (labels.empty()) throw std::invalid_argument("f1: empty input");
  const ConfusionMatrix m = confusion(predictions, labels, c);
  double sum = 0.0;
  double weight_total = 0.0;
  for (Label k = 0; k < c; ++k) {
    const double tp = static_cast<double>(m(k, k));
    const double support = static_cast<double>(m.row_sum(k));
    const double predicted = static_cast<double>(m.col_sum(k));
    if (support == 0.0 && predicted == 0.0) continue;
    const double precision = predicted > 0.0 ? tp / predicted : 0.0;
    const double recall = support > 0.0 ? tp / support : 0.0;
    const double f1 = precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
    const double w = average == F1Average::macro ? 1.0 : support;
    sum += w * f1;
    weight_total += w;
  }
  return weight_total > 0.0 ? sum / weight_total : 0.0;
}

double accuracy(std::span<const Label> predictions, std::span<const Label> labels) {
  if (labels.empty()) throw std::invalid_argument("accuracy: empty input");
  if (predictions.size() != labels.size()) throw std::invalid_argument("accuracy: length mismatch");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hits += predictions[i] == labels[i];
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

}  // namespace fedpoison
