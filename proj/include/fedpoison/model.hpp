#pragma once

// One-hidden-layer perceptron: ReLU hidden units, inverted dropout during
// training, softmax output, mean cross-entropy loss, Adam updates.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "fedpoison/dataset.hpp"
#include "fedpoison/matrix.hpp"
#include "fedpoison/random.hpp"

namespace fedpoison {

struct ModelDims {
  std::size_t inputs = 76;
  std::size_t hidden = 50;
  std::size_t classes = 11;

  std::size_t param_count() const { return inputs * hidden + hidden + hidden * classes + classes; }
  bool operator==(const ModelDims&) const = default;
};

/// Weights and biases stored contiguously in canonical order:
/// w1 (inputs x hidden, row-major), b1, w2 (hidden x classes, row-major), b2.
class ParamSet {
 public:
  ParamSet() = default;
  /// All-zero parameters. Throws std::invalid_argument for a zero dimension.
  explicit ParamSet(ModelDims dims);

  static ParamSet unflatten(std::span<const double> flat, ModelDims dims);
  std::vector<double> flatten() const { return values_; }

  const ModelDims& dims() const { return dims_; }
  std::size_t size() const { return values_.size(); }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }

  std::span<double> w1() { return {values_.data(), w1_size()}; }
  std::span<const double> w1() const { return {values_.data(), w1_size()}; }
  std::span<double> b1() { return {values_.data() + b1_offset(), dims_.hidden}; }
  std::span<const double> b1() const { return {values_.data() + b1_offset(), dims_.hidden}; }
  std::span<double> w2() { return {values_.data() + w2_offset(), w2_size()}; }
  std::span<const double> w2() const { return {values_.data() + w2_offset(), w2_size()}; }
  std::span<double> b2() { return {values_.data() + b2_offset(), dims_.classes}; }
  std::span<const double> b2() const { return {values_.data() + b2_offset(), dims_.classes}; }

  /// Row `input` of w1 (one weight per hidden unit).
  std::span<const double> w1_row(std::size_t input) const {
    return {values_.data() + input * dims_.hidden, dims_.hidden};
  }
  /// Row `unit` of w2 (one weight per class).
  std::span<const double> w2_row(std::size_t unit) const {
    return {values_.data() + w2_offset() + unit * dims_.classes, dims_.classes};
  }

  bool all_finite() const;
  bool operator==(const ParamSet&) const = default;

 private:
  std::size_t w1_size() const { return dims_.inputs * dims_.hidden; }
  std::size_t b1_offset() const { return w1_size(); }
  std::size_t w2_offset() const { return b1_offset() + dims_.hidden; }
  std::size_t w2_size() const { return dims_.hidden * dims_.classes; }
  std::size_t b2_offset() const { return w2_offset() + w2_size(); }

  ModelDims dims_{0, 0, 0};
  std::vector<double> values_;
};

/// Glorot-uniform weights, zero biases.
ParamSet init_params(ModelDims dims, std::uint64_t seed);

/// Eval mode uses neither dropout nor scaling. Train mode keeps each hidden
/// unit with probability 1 - dropout_rate and scales survivors by
/// 1 / (1 - dropout_rate); masks are drawn from `rng`.
struct ForwardMode {
  double dropout_rate = 0.0;
  Random* rng = nullptr;

  static ForwardMode eval() { return {}; }
  static ForwardMode train(double dropout_rate, Random& rng) { return {dropout_rate, &rng}; }
  bool training() const { return rng != nullptr; }
};

/// Class probabilities, one row per input row.
Matrix forward(const ParamSet& params, const Matrix& inputs, ForwardMode mode);

struct LossAndGrads {
  double loss = 0.0;
  ParamSet grads;
};

/// Mean cross-entropy over the batch and its gradient by backpropagation.
/// The dropout mask drawn for the forward pass is reused backwards.
LossAndGrads loss_and_grads(const ParamSet& params, const Matrix& inputs,
                            std::span<const Label> labels, ForwardMode mode);

struct AdamHyper {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  bool operator==(const AdamHyper&) const = default;
};

struct AdamState {
  AdamState() = default;
  AdamState(std::size_t param_count, AdamHyper hyper)
      : m(param_count, 0.0), v(param_count, 0.0), hyper(hyper) {}

  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t t = 0;
  AdamHyper hyper;

  bool operator==(const AdamState&) const = default;
};

/// One bias-corrected Adam step, in place on both arguments.
void adam_step(AdamState& state, ParamSet& params, const ParamSet& grads);

struct TrainSchedule {
  std::size_t max_epochs = 20;
  std::size_t batch_size = 32;
  std::size_t patience = 10;
  double dropout_rate = 0.2;
};

struct TrainReport {
  std::size_t epochs_run = 0;
  std::vector<double> eval_loss;
  std::vector<double> eval_accuracy;
  bool stopped_early = false;
  /// 1-based epoch whose parameters were returned; 0 when no epoch ran.
  std::size_t best_epoch = 0;

  bool operator==(const TrainReport&) const = default;
};

struct TrainResult {
  ParamSet params;
  TrainReport report;
};

/// Mini-batch Adam over a reshuffled training set each epoch. After every
/// epoch the eval-set loss is measured; training stops once it has failed to
/// strictly improve for `patience` consecutive epochs, and the parameters of
/// the best epoch are returned. `adam` carries optimizer state across calls.
TrainResult train_local(const ParamSet& params, AdamState& adam, const Dataset& train,
                        const Dataset& eval, const TrainSchedule& schedule, std::uint64_t seed);

/// As above with a fresh optimizer state using default hyperparameters.
TrainResult train_local(const ParamSet& params, const Dataset& train, const Dataset& eval,
                        const TrainSchedule& schedule, std::uint64_t seed);

struct Evaluation {
  double loss = 0.0;
  double accuracy = 0.0;
  std::vector<Label> predictions;
};

/// Eval-mode loss, accuracy and argmax predictions (ties go to the lowest class).
Evaluation evaluate(const ParamSet& params, const Dataset& dataset);

}  // namespace fedpoison
