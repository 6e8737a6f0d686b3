#include "fedpoison/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "fedpoison/kernels.hpp"

namespace fedpoison {

ParamSet::ParamSet(ModelDims dims) : dims_(dims) {
  if (dims.inputs == 0 || dims.hidden == 0 || dims.classes == 0) {
    throw std::invalid_argument("model dims must all be >= 1");
  }
  values_.assign(dims.param_count(), 0.0);
}

ParamSet ParamSet::unflatten(std::span<const double> flat, ModelDims dims) {
  ParamSet out(dims);
  if (flat.size() != out.size()) {
    throw std::invalid_argument("unflatten: expected " + std::to_string(out.size()) +
                                " values, got " + std::to_string(flat.size()));
  }
  std::copy(flat.begin(), flat.end(), out.values_.begin());
  return out;
}

bool ParamSet::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double x) { return std::isfinite(x); });
}

ParamSet init_params(ModelDims dims, std::uint64_t seed) {
  ParamSet params(dims);
  Random rng(seed);
  auto fill = [&rng](std::span<double> weights, std::size_t fan_in, std::size_t fan_out) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (double& w : weights) w = (2.0 * rng.uniform() - 1.0) * limit;
  };
  fill(params.w1(), dims.inputs, dims.hidden);
  fill(params.w2(), dims.hidden, dims.classes);
  return params;
}

namespace {

// Activations kept for the backward pass.
struct ForwardCache {
  Matrix pre;       // X.w1 + b1
  Matrix hidden;    // relu(pre) * dropout scale
  Matrix scale;     // per-unit dropout factor (0 or 1/(1-rate)); empty in eval mode
  Matrix probs;     // softmax(hidden.w2 + b2)
  std::vector<double> log_norm;  // max + log(sum(exp(logit - max))) per row
  Matrix logits;
};

void check_inputs(const ParamSet& params, const Matrix& inputs, ForwardMode mode) {
  if (params.size() == 0) throw std::invalid_argument("forward: empty parameter set");
  if (inputs.cols() != params.dims().inputs) {
    throw std::invalid_argument("forward: input has " + std::to_string(inputs.cols()) +
                                " columns, model expects " +
                                std::to_string(params.dims().inputs));
  }
  if (mode.training() && !(mode.dropout_rate >= 0.0 && mode.dropout_rate < 1.0)) {
    throw std::invalid_argument("forward: dropout rate must lie in [0, 1)");
  }
  for (double x : inputs.values()) {
    if (!std::isfinite(x)) throw std::invalid_argument("forward: non-finite input");
  }
}

ForwardCache run_forward(const ParamSet& params, const Matrix& inputs, ForwardMode mode) {
  check_inputs(params, inputs, mode);
  const auto& dims = params.dims();
  const std::size_t n = inputs.rows();
  ForwardCache cache{Matrix(n, dims.hidden), Matrix(n, dims.hidden), Matrix(),
                     Matrix(n, dims.classes), std::vector<double>(n), Matrix(n, dims.classes)};
  const bool dropout = mode.training() && mode.dropout_rate > 0.0;
  if (dropout) cache.scale = Matrix(n, dims.hidden);
  const double keep = 1.0 - mode.dropout_rate;
  const double inv_keep = 1.0 / keep;

  for (std::size_t i = 0; i < n; ++i) {
    auto pre = cache.pre.row(i);
    std::copy(params.b1().begin(), params.b1().end(), pre.begin());
    const auto x = inputs.row(i);
    for (std::size_t k = 0; k < dims.inputs; ++k) {
      if (x[k] != 0.0) kernels::axpy(x[k], params.w1_row(k), pre);
    }
    auto hidden = cache.hidden.row(i);
    for (std::size_t j = 0; j < dims.hidden; ++j) {
      double h = pre[j] > 0.0 ? pre[j] : 0.0;
      if (dropout) {
        const double s = mode.rng->uniform() < keep ? inv_keep : 0.0;
        cache.scale(i, j) = s;
        h *= s;
      }
      hidden[j] = h;
    }

    auto logits = cache.logits.row(i);
    std::copy(params.b2().begin(), params.b2().end(), logits.begin());
    for (std::size_t j = 0; j < dims.hidden; ++j) {
      if (hidden[j] != 0.0) kernels::axpy(hidden[j], params.w2_row(j), logits);
    }
    const double max_logit = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    auto probs = cache.probs.row(i);
    for (std::size_t c = 0; c < dims.classes; ++c) {
      probs[c] = std::exp(logits[c] - max_logit);
      sum += probs[c];
    }
    for (double& p : probs) p /= sum;
    cache.log_norm[i] = max_logit + std::log(sum);
  }
  return cache;
}

}  // namespace

Matrix forward(const ParamSet& params, const Matrix& inputs, ForwardMode mode) {
  return run_forward(params, inputs, mode).probs;
}

LossAndGrads loss_and_grads(const ParamSet& params, const Matrix& inputs,
                            std::span<const Label> labels, ForwardMode mode) {
  const auto& dims = params.dims();
  const std::size_t n = inputs.rows();
  if (n == 0) throw std::invalid_argument("loss_and_grads: empty batch");
  if (labels.size() != n) throw std::invalid_argument("loss_and_grads: label count mismatch");
  for (Label y : labels) {
    if (y >= dims.classes) throw std::invalid_argument("loss_and_grads: label out of range");
  }

  const ForwardCache cache = run_forward(params, inputs, mode);
  LossAndGrads out{0.0, ParamSet(dims)};
  ParamSet& grads = out.grads;
  const double inv_n = 1.0 / static_cast<double>(n);
  const bool dropout = !cache.scale.empty();

  std::vector<double> dlogit(dims.classes);
  std::vector<double> dpre(dims.hidden);
  auto db1 = grads.b1();
  auto db2 = grads.b2();
  auto dw1 = grads.w1();
  auto dw2 = grads.w2();

  double loss_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    loss_sum += cache.log_norm[i] - cache.logits(i, labels[i]);

    const auto probs = cache.probs.row(i);
    for (std::size_t c = 0; c < dims.classes; ++c) {
      dlogit[c] = (probs[c] - (c == labels[i] ? 1.0 : 0.0)) * inv_n;
    }
    kernels::axpy(1.0, dlogit, db2);
    const auto hidden = cache.hidden.row(i);
    for (std::size_t j = 0; j < dims.hidden; ++j) {
      if (hidden[j] != 0.0) {
        kernels::axpy(hidden[j], dlogit, dw2.subspan(j * dims.classes, dims.classes));
      }
    }

    const auto pre = cache.pre.row(i);
    for (std::size_t j = 0; j < dims.hidden; ++j) {
      if (pre[j] > 0.0) {
        const double s = dropout ? cache.scale(i, j) : 1.0;
        dpre[j] = s == 0.0 ? 0.0 : kernels::dot(params.w2_row(j), dlogit) * s;
      } else {
        dpre[j] = 0.0;
      }
    }
    kernels::axpy(1.0, dpre, db1);
    const auto x = inputs.row(i);
    for (std::size_t k = 0; k < dims.inputs; ++k) {
      if (x[k] != 0.0) kernels::axpy(x[k], dpre, dw1.subspan(k * dims.hidden, dims.hidden));
    }
  }
  out.loss = loss_sum * inv_n;
  return out;
}

void adam_step(AdamState& state, ParamSet& params, const ParamSet& grads) {
  const std::size_t n = params.size();
  if (state.m.size() != n || state.v.size() != n || grads.size() != n) {
    throw std::invalid_argument("adam_step: state/parameter/gradient length mismatch");
  }
  state.t += 1;
  const auto& h = state.hyper;
  const double t = static_cast<double>(state.t);
  const kernels::AdamCoefficients k{h.lr,
                                    h.beta1,
                                    h.beta2,
                                    1.0 - h.beta1,
                                    1.0 - h.beta2,
                                    1.0 - std::pow(h.beta1, t),
                                    1.0 - std::pow(h.beta2, t),
                                    h.eps};
  kernels::active().adam_update(params.values().data(), grads.values().data(), state.m.data(),
                                state.v.data(), n, k);
}

namespace {

Matrix gather_rows(const Matrix& source, std::span<const std::size_t> rows) {
  Matrix out(rows.size(), source.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto src = source.row(rows[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

}  // namespace

TrainResult train_local(const ParamSet& params, AdamState& adam, const Dataset& train,
                        const Dataset& eval, const TrainSchedule& schedule, std::uint64_t seed) {
  if (train.empty()) throw std::invalid_argument("train_local: empty training set");
  if (eval.empty()) throw std::invalid_argument("train_local: empty evaluation set");
  if (schedule.batch_size == 0) throw std::invalid_argument("train_local: batch size must be > 0");
  if (schedule.patience == 0) throw std::invalid_argument("train_local: patience must be >= 1");
  if (adam.m.size() != params.size()) {
    throw std::invalid_argument("train_local: optimizer state does not match the model");
  }

  TrainResult result{params, {}};
  TrainReport& report = result.report;
  ParamSet current = params;
  Random rng(seed);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<Label> batch_labels;

  double best_loss = std::numeric_limits<double>::infinity();
  std::size_t epochs_without_improvement = 0;

  for (std::size_t epoch = 1; epoch <= schedule.max_epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += schedule.batch_size) {
      const std::size_t count = std::min(schedule.batch_size, order.size() - start);
      const std::span<const std::size_t> rows(order.data() + start, count);
      const Matrix batch = gather_rows(train.features(), rows);
      batch_labels.resize(count);
      for (std::size_t i = 0; i < count; ++i) batch_labels[i] = train.labels()[rows[i]];
      const auto lg =
          loss_and_grads(current, batch, batch_labels, ForwardMode::train(schedule.dropout_rate, rng));
      adam_step(adam, current, lg.grads);
    }

    const Evaluation ev = evaluate(current, eval);
    report.epochs_run = epoch;
    report.eval_loss.push_back(ev.loss);
    report.eval_accuracy.push_back(ev.accuracy);
    if (ev.loss < best_loss) {
      best_loss = ev.loss;
      result.params = current;
      report.best_epoch = epoch;
      epochs_without_improvement = 0;
    } else if (++epochs_without_improvement >= schedule.patience) {
      report.stopped_early = true;
      break;
    }
  }
  return result;
}

TrainResult train_local(const ParamSet& params, const Dataset& train, const Dataset& eval,
                        const TrainSchedule& schedule, std::uint64_t seed) {
  AdamState adam(params.size(), AdamHyper{});
  return train_local(params, adam, train, eval, schedule, seed);
}

Evaluation evaluate(const ParamSet& params, const Dataset& dataset) {
  if (dataset.empty()) throw std::invalid_argument("evaluate: empty dataset");
  const ForwardCache cache = run_forward(params, dataset.features(), ForwardMode::eval());
  Evaluation out;
  out.predictions.resize(dataset.size());
  double loss_sum = 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const Label y = dataset.labels()[i];
    if (y >= params.dims().classes) throw std::invalid_argument("evaluate: label out of range");
    loss_sum += cache.log_norm[i] - cache.logits(i, y);
    const auto probs = cache.probs.row(i);
    // max_element returns the first maximum, i.e. the lowest class index.
    const auto pred = static_cast<Label>(std::max_element(probs.begin(), probs.end()) - probs.begin());
    out.predictions[i] = pred;
    if (pred == y) ++correct;
  }
  const double n = static_cast<double>(dataset.size());
  out.loss = loss_sum / n;
  out.accuracy = static_cast<double>(correct) / n;
  return out;
}

}  // namespace fedpoison
