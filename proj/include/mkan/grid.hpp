#pragma once

// Grid adaptation: moving a layer's knot domain to cover the observed
// activations, and refining to more intervals. Both refit the control points
// so the new splines reproduce the old ones at the sample activations.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mkan/basis_matrix.hpp"
#include "mkan/kan.hpp"
#include "mkan/log.hpp"
#include "mkan/matrix_eval.hpp"
#include "mkan/splines.hpp"
#include "mkan/tensor.hpp"

namespace mkan {

inline constexpr double kRefitRidge = 1e-8;
inline constexpr double kDomainPadding = 0.01;

namespace detail {

// Least-squares fit of the out_dim splines leaving feature i onto `next`.
// Targets are the current spline values at the samples. Outside the current
// domain they are either the clamped values the forward pass produces, or the
// boundary segment's polynomial continued outward when `extend` is set.
// Returns the new coefficients as [out][G'+k].
inline std::vector<double> fit_feature(const LayerParams& layer, int i, const KnotGrid& next,
                                       std::span<const double> xs, bool extend) {
  const KnotGrid& cur = layer.grids[i];
  const BasisMatrix& psi = cached_basis_matrix(cur.degree + 1);
  const int O = layer.out_dim;
  const int nb = next.num_basis();
  const int k = next.degree;

  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(nb, nb);
  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(nb, O);
  std::vector<double> targets(O);
  for (double x : xs) {
    const double xt = extend ? x : cur.clamp(x);
    for (int j = 0; j < O; ++j) targets[j] = spline_value_extended(cur, psi, layer.edge_coeffs(j, i), xt);
    const auto row = basis_row(next, x);
    const int first = locate_interval(next, x).segment;
    for (int a = first; a <= first + k; ++a) {
      for (int b = first; b <= first + k; ++b) gram(a, b) += row[a] * row[b];
      for (int j = 0; j < O; ++j) rhs(a, j) += row[a] * targets[j];
    }
  }
  gram.diagonal().array() += kRefitRidge;
  const Eigen::MatrixXd sol = gram.ldlt().solve(rhs);
  if (!sol.allFinite()) throw std::runtime_error("grid refit produced non-finite coefficients");

  std::vector<double> out(static_cast<std::size_t>(O) * nb);
  for (int j = 0; j < O; ++j)
    for (int b = 0; b < nb; ++b) out[static_cast<std::size_t>(j) * nb + b] = sol(b, j);
  return out;
}

inline bool same_domain(const KnotGrid& g, double lo, double hi) {
  const double tol = 1e-9 * (g.hi - g.lo);
  return std::abs(g.lo - lo) <= tol && std::abs(g.hi - hi) <= tol;
}

inline void check_samples(const Model& model, const Matrix& X, const char* who) {
  if (X.rows == 0) throw std::invalid_argument(std::string(who) + ": empty sample batch");
  if (X.cols != static_cast<std::size_t>(model.input_dim()))
    throw std::invalid_argument(std::string(who) + ": sample width does not match the model");
  for (double v : X.data)
    if (!std::isfinite(v)) throw std::invalid_argument(std::string(who) + ": non-finite sample");
}

}  // namespace detail

/// Re-centres each (layer, input feature) grid on the activation range seen
/// for X, padded by 1% of the range, and refits the splines. Layers are
/// processed in order so each sees activations from the already-updated
/// layers before it. Grids whose domain would not move are left untouched.
///
/// Only uniform knots are produced, so grid_eps < 1 is accepted but behaves
/// like grid_eps = 1.
inline void update_grid_from_samples(Model& model, const Matrix& X, double grid_eps) {
  detail::check_samples(model, X, "update_grid_from_samples");
  if (!(grid_eps >= 0.0 && grid_eps <= 1.0)) throw std::invalid_argument("grid_eps must lie in [0, 1]");
  if (grid_eps < 1.0)
    log_warning("grid_eps " + std::to_string(grid_eps) +
                " requested; sample-adaptive knots are not supported, using uniform knots (grid_eps = 1)");

  Matrix act = X;
  for (auto& layer : model.layers) {
    for (int i = 0; i < layer.in_dim; ++i) {
      const std::vector<double> xs = act.column(i);
      const auto [mn, mx] = std::minmax_element(xs.begin(), xs.end());
      double range = *mx - *mn;
      // A constant activation still needs a non-empty domain.
      const double pad = range > 0.0 ? kDomainPadding * range : kDomainPadding * std::max(1.0, std::abs(*mn));
      const double lo = *mn - pad;
      const double hi = *mx + pad;
      const KnotGrid& cur = layer.grids[i];
      if (detail::same_domain(cur, lo, hi)) continue;
      const KnotGrid next = make_uniform_grid(cur.degree, cur.intervals, lo, hi);
      const auto fitted = detail::fit_feature(layer, i, next, xs, true);
      const std::size_t nb = next.num_basis();
      for (int j = 0; j < layer.out_dim; ++j)
        std::copy_n(fitted.data() + j * nb, nb, layer.edge_coeffs(j, i).begin());
      layer.grids[i] = next;
    }
    act = layer_forward(layer, act, model.spec.backend, model.spec.base_function);
  }
}

/// Rebuilds every grid with `new_intervals` on its current domain and refits
/// the splines against their old values at the activations of X.
inline void refine_grid(Model& model, int new_intervals, const Matrix& X) {
  detail::check_samples(model, X, "refine_grid");
  const int cur_g = model.layers.front().intervals();
  if (new_intervals < cur_g)
    throw std::invalid_argument("refine_grid: new interval count " + std::to_string(new_intervals) +
                                " is below the current " + std::to_string(cur_g));
  if (new_intervals == cur_g) return;

  Matrix act = X;
  for (auto& layer : model.layers) {
    const int nb = new_intervals + layer.degree();
    LayerParams next = layer;
    next.coeffs.assign(static_cast<std::size_t>(layer.out_dim) * layer.in_dim * nb, 0.0);
    for (int i = 0; i < layer.in_dim; ++i) {
      const KnotGrid& g = layer.grids[i];
      next.grids[i] = make_uniform_grid(g.degree, new_intervals, g.lo, g.hi);
      const auto fitted = detail::fit_feature(layer, i, next.grids[i], act.column(i), false);
      for (int j = 0; j < layer.out_dim; ++j)
        std::copy_n(fitted.data() + static_cast<std::size_t>(j) * nb, nb, next.edge_coeffs(j, i).begin());
    }
    layer = std::move(next);
    act = layer_forward(layer, act, model.spec.backend, model.spec.base_function);
  }
  model.spec.grid = new_intervals;
}

}  // namespace mkan
