#pragma once

// Full-batch training: MSE loss, reverse-mode gradients through either spline
// backend, Adam, and a per-step log of train/test RMSE and wall time.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mkan/datasets.hpp"
#include "mkan/error.hpp"
#include "mkan/format.hpp"
#include "mkan/grid.hpp"
#include "mkan/kan.hpp"
#include "mkan/tensor.hpp"

namespace mkan {

inline double rmse(std::span<const double> pred, std::span<const double> target) {
  if (pred.empty()) throw std::invalid_argument("rmse: empty batch");
  if (pred.size() != target.size()) throw std::invalid_argument("rmse: length mismatch");
  double acc = 0.0;
  for (std::size_t n = 0; n < pred.size(); ++n) {
    const double d = pred[n] - target[n];
    acc += d * d;
  }
  return std::sqrt(acc / static_cast<double>(pred.size()));
}

struct Gradients {
  std::vector<LayerGradients> layers;
};

/// Reusable per-layer caches for repeated forward/backward passes.
struct Workspace {
  std::vector<LayerCache> caches;
  std::vector<Matrix> activations;
  Matrix grad;
  Matrix grad_next;
};

struct LossAndGradients {
  double mse = 0.0;
  Matrix predictions;
  Gradients grads;
};

/// Gradients of mean((pred - Y)^2) over all N * n_L outputs. Y is row-major
/// N x n_L.
inline LossAndGradients backward(const Model& model, const Matrix& X, std::span<const double> Y, Backend backend,
                                 Workspace* ws = nullptr) {
  if (X.cols != static_cast<std::size_t>(model.input_dim()))
    throw std::invalid_argument("backward: input width does not match the model");
  const std::size_t out_dim = model.output_dim();
  if (Y.size() != X.rows * out_dim) throw std::invalid_argument("backward: target shape does not match predictions");
  if (X.rows == 0) throw std::invalid_argument("backward: empty batch");

  Workspace local;
  Workspace& w = ws ? *ws : local;
  const std::size_t L = model.layers.size();
  w.caches.resize(L);
  w.activations.resize(L + 1);
  w.activations[0] = X;

  for (std::size_t l = 0; l < L; ++l) {
    auto& cache = w.caches[l];
    cache.want_input_grad = l > 0;
    w.activations[l + 1] = layer_forward(model.layers[l], w.activations[l], backend, model.spec.base_function, &cache);
    for (double v : w.activations[l + 1].data)
      if (!std::isfinite(v))
        throw NonFiniteError(static_cast<int>(l), "non-finite activation in the output of layer " + std::to_string(l));
  }

  LossAndGradients res;
  res.predictions = w.activations[L];
  const std::size_t count = Y.size();
  w.grad.resize(X.rows, out_dim);
  double acc = 0.0;
  for (std::size_t q = 0; q < count; ++q) {
    const double d = res.predictions.data[q] - Y[q];
    acc += d * d;
    w.grad.data[q] = 2.0 * d / static_cast<double>(count);
  }
  res.mse = acc / static_cast<double>(count);

  res.grads.layers.resize(L);
  for (std::size_t l = L; l-- > 0;) {
    res.grads.layers[l].reset(model.layers[l]);
    layer_backward(model.layers[l], w.caches[l], w.grad, res.grads.layers[l], l > 0 ? &w.grad_next : nullptr);
    if (l > 0) std::swap(w.grad, w.grad_next);
  }
  return res;
}

inline LossAndGradients backward(const Model& model, const Matrix& X, std::span<const double> Y) {
  return backward(model, X, Y, model.spec.backend);
}

/// Parameter tensors in a fixed order: per layer coeffs, base_weight, spline_weight.
inline std::vector<std::span<double>> parameter_views(Model& model) {
  std::vector<std::span<double>> out;
  for (auto& l : model.layers) {
    out.emplace_back(l.coeffs);
    out.emplace_back(l.base_weight);
    out.emplace_back(l.spline_weight);
  }
  return out;
}

inline std::vector<std::span<const double>> gradient_views(const Gradients& g) {
  std::vector<std::span<const double>> out;
  for (const auto& l : g.layers) {
    out.emplace_back(l.coeffs);
    out.emplace_back(l.base_weight);
    out.emplace_back(l.spline_weight);
  }
  return out;
}

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::int64_t step = 0;
  std::vector<double> m;
  std::vector<double> v;
};

/// One bias-corrected Adam update over the listed tensors. Moments are sized
/// on first use.
inline void adam_step(std::span<const std::span<double>> params, std::span<const std::span<const double>> grads,
                      AdamState& state, const AdamConfig& cfg) {
  if (params.size() != grads.size()) throw std::invalid_argument("adam_step: parameter/gradient count mismatch");
  std::size_t total = 0;
  for (std::size_t t = 0; t < params.size(); ++t) {
    if (params[t].size() != grads[t].size()) throw std::invalid_argument("adam_step: tensor size mismatch");
    total += params[t].size();
  }
  if (state.m.empty() && state.v.empty()) {
    state.m.assign(total, 0.0);
    state.v.assign(total, 0.0);
  }
  if (state.m.size() != total || state.v.size() != total)
    throw std::invalid_argument("adam_step: optimizer state does not match the parameters");

  ++state.step;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  std::size_t q = 0;
  for (std::size_t t = 0; t < params.size(); ++t) {
    auto p = params[t];
    auto g = grads[t];
    for (std::size_t n = 0; n < p.size(); ++n, ++q) {
      state.m[q] = cfg.beta1 * state.m[q] + (1.0 - cfg.beta1) * g[n];
      state.v[q] = cfg.beta2 * state.v[q] + (1.0 - cfg.beta2) * g[n] * g[n];
      const double mhat = state.m[q] / c1;
      const double vhat = state.v[q] / c2;
      p[n] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.eps);
    }
  }
}

inline void adam_step(Model& model, const Gradients& grads, AdamState& state, const AdamConfig& cfg) {
  const auto p = parameter_views(model);
  const auto g = gradient_views(grads);
  adam_step(std::span<const std::span<double>>(p), std::span<const std::span<const double>>(g), state, cfg);
}

struct TrainConfig {
  int steps = 100;
  double learning_rate = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 42;
  Backend backend = Backend::matrix;
  std::vector<int> grid_update_steps;  // grid updated before these steps
  double grid_eps = 1.0;

  AdamConfig adam() const { return {learning_rate, adam_beta1, adam_beta2, adam_eps}; }

  void validate() const {
    if (steps < 1) throw std::invalid_argument("steps must be >= 1");
    if (!(learning_rate > 0.0)) throw std::invalid_argument("learning rate must be > 0");
  }
};

struct StepLog {
  int step = 0;
  double train_rmse = 0.0;  // before this step's update
  double test_rmse = 0.0;   // same parameters as train_rmse
  double seconds = 0.0;     // whole step, including any grid update
  double grid_update_seconds = 0.0;
};

struct TrainResult {
  Model model;
  std::vector<StepLog> log;
  double final_train_rmse = 0.0;
  double final_test_rmse = 0.0;
};

/// Runs config.steps full-batch steps (forward, loss, backward, Adam) on the
/// single-output model. Deterministic given its inputs.
inline TrainResult train(Model model, const Dataset& ds, const TrainConfig& config) {
  config.validate();
  if (model.output_dim() != 1) throw std::invalid_argument("train: model must have a single output");
  if (ds.train.empty() || ds.test.empty()) throw std::invalid_argument("train: dataset needs train and test splits");
  if (ds.dim() != static_cast<std::size_t>(model.input_dim()))
    throw std::invalid_argument("train: dataset dimension does not match the model input width");
  using clock = std::chrono::steady_clock;

  const Matrix x_train = ds.train_inputs();
  const Matrix x_test = ds.test_inputs();
  const std::vector<double> y_train = ds.train_targets();
  const std::vector<double> y_test = ds.test_targets();
  const AdamConfig adam = config.adam();

  TrainResult res;
  res.log.reserve(config.steps);
  AdamState state;
  Workspace ws;
  for (int step = 0; step < config.steps; ++step) {
    const auto t0 = clock::now();
    StepLog entry;
    entry.step = step;
    if (std::find(config.grid_update_steps.begin(), config.grid_update_steps.end(), step) !=
        config.grid_update_steps.end()) {
      update_grid_from_samples(model, x_train, config.grid_eps);
      entry.grid_update_seconds = std::chrono::duration<double>(clock::now() - t0).count();
    }
    const LossAndGradients lg = backward(model, x_train, y_train, config.backend, &ws);
    entry.train_rmse = std::sqrt(lg.mse);
    if (!std::isfinite(entry.train_rmse))
      throw DivergenceError(step, "training diverged: train RMSE is not finite at step " + std::to_string(step));
    entry.test_rmse = rmse(forward(model, x_test, config.backend).data, y_test);
    adam_step(model, lg.grads, state, adam);
    entry.seconds = std::chrono::duration<double>(clock::now() - t0).count();
    res.log.push_back(entry);
  }
  res.final_train_rmse = rmse(forward(model, x_train, config.backend).data, y_train);
  res.final_test_rmse = rmse(forward(model, x_test, config.backend).data, y_test);
  if (!std::isfinite(res.final_train_rmse))
    throw DivergenceError(config.steps, "training diverged: final train RMSE is not finite");
  res.model = std::move(model);
  return res;
}

inline void write_step_log_csv(std::span<const StepLog> log, std::ostream& os) {
  os << "step,train_rmse,test_rmse,seconds\n";
  for (const auto& e : log)
    os << e.step << ',' << format_double(e.train_rmse) << ',' << format_double(e.test_rmse) << ','
       << format_double(e.seconds) << '\n';
}

}  // namespace mkan
