#pragma once

// Self-checks behind `mkan verify`. Each suite compares one part of the
// engine against an independent computation and reports its worst error.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mkan/basis_matrix.hpp"
#include "mkan/kan.hpp"
#include "mkan/matrix_eval.hpp"
#include "mkan/splines.hpp"
#include "mkan/training.hpp"

namespace mkan {

struct VerifyConfig {
  int max_degree = 12;
  int max_grid = 64;
  int samples = 1000;
  std::uint64_t seed = 42;
  int configurations = 50;
  int gradient_models = 5;

  void validate() const {
    if (max_degree < 0 || max_degree > 32) throw std::invalid_argument("max-degree must lie in [0, 32]");
    if (max_grid < 1) throw std::invalid_argument("max-grid must be >= 1");
    if (samples < 1) throw std::invalid_argument("samples must be >= 1");
    if (configurations < 1 || gradient_models < 1) throw std::invalid_argument("suite sizes must be >= 1");
  }
};

struct SuiteResult {
  std::string name;
  bool passed = true;
  double worst = 0.0;  // worst error as a multiple of its tolerance
  std::string detail;
};

namespace detail {

inline double convolve_at(std::span<const double> a, std::span<const double> b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (n >= i && n - i < b.size()) acc += a[i] * b[n - i];
  return acc;
}

inline void note_failure(SuiteResult& r, const std::string& what) {
  if (r.passed) r.detail = what;
  r.passed = false;
}

}  // namespace detail

/// Matrix-path spline values against Cox-De Boor sums at random in-domain
/// inputs, over random degrees, grid sizes and coefficients.
inline SuiteResult verify_backend_equivalence(const VerifyConfig& cfg) {
  SuiteResult r{"backend_equivalence", true, 0.0, {}};
  std::mt19937_64 rng(cfg.seed);
  std::uniform_int_distribution<int> deg(0, cfg.max_degree);
  std::uniform_int_distribution<int> grid(1, cfg.max_grid);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  for (int c = 0; c < cfg.configurations; ++c) {
    const int k = deg(rng);
    const int G = grid(rng);
    const double lo = 3.0 * unit(rng);
    const double hi = lo + 0.1 + 2.0 * (unit(rng) + 1.0);
    const KnotGrid g = make_uniform_grid(k, G, lo, hi);
    std::vector<double> coeffs(g.num_basis());
    for (double& v : coeffs) v = unit(rng);
    std::uniform_real_distribution<double> xdist(lo, hi);
    std::vector<double> xs(cfg.samples);
    for (double& x : xs) x = xdist(rng);
    xs.front() = lo;
    xs.back() = hi;

    const BasisMatrix& psi = cached_basis_matrix(k + 1);
    const auto locs = locate_intervals(g, xs);
    const Matrix values = spline_outputs(basis_outputs(locs, power_bases(locs, k), psi, g), coeffs);
    constexpr double tol = 1e-10;
    for (std::size_t n = 0; n < xs.size(); ++n) {
      const auto row = basis_row(g, xs[n]);
      double oracle = 0.0;
      for (std::size_t b = 0; b < row.size(); ++b) oracle += row[b] * coeffs[b];
      const double err = std::abs(values(n, 0) - oracle) / (1.0 + std::abs(oracle));
      r.worst = std::max(r.worst, err / tol);
      if (err > tol)
        detail::note_failure(r, "k=" + std::to_string(k) + " G=" + std::to_string(G) + " x=" +
                                    std::to_string(xs[n]) + " err=" + std::to_string(err));
    }
  }
  return r;
}

/// Basis rows from both paths sum to 1, and their derivatives to 0.
inline SuiteResult verify_partition_of_unity(const VerifyConfig& cfg) {
  SuiteResult r{"partition_of_unity", true, 0.0, {}};
  std::mt19937_64 rng(cfg.seed + 1);
  std::uniform_int_distribution<int> grid(1, cfg.max_grid);
  for (int k = 0; k <= cfg.max_degree; ++k) {
    const int G = grid(rng);
    const KnotGrid g = make_uniform_grid(k, G, -1.0, 1.0);
    std::uniform_real_distribution<double> xdist(-1.0, 1.0);
    std::vector<double> xs(std::min(cfg.samples, 200));
    for (double& x : xs) x = xdist(rng);
    xs.back() = 1.0;
    const BasisMatrix& psi = cached_basis_matrix(k + 1);
    const auto locs = locate_intervals(g, xs);
    const auto pb = power_bases(locs, k);
    const Matrix rows = basis_outputs(locs, pb, psi, g);
    const Matrix slopes = basis_output_derivatives(locs, pb, psi, g);
    for (std::size_t n = 0; n < xs.size(); ++n) {
      const auto ref = basis_row(g, xs[n]);
      const auto dref = basis_row_derivative(g, xs[n]);
      double s_ref = 0.0, s_mat = 0.0, d_ref = 0.0, d_mat = 0.0;
      for (std::size_t b = 0; b < ref.size(); ++b) {
        s_ref += ref[b];
        s_mat += rows(n, b);
        d_ref += dref[b];
        d_mat += slopes(n, b);
        if (ref[b] < 0.0) detail::note_failure(r, "negative basis value at k=" + std::to_string(k));
      }
      const double e = std::max({std::abs(s_ref - 1.0) / 1e-12, std::abs(s_mat - 1.0) / 1e-10,
                                 std::abs(d_ref) * g.spacing() / 1e-10,
                                 std::abs(d_mat) * g.spacing() / 1e-8});
      r.worst = std::max(r.worst, e);
      if (e > 1.0) detail::note_failure(r, "k=" + std::to_string(k) + " x=" + std::to_string(xs[n]));
    }
  }
  return r;
}

/// Psi from the banded recursion against Psi from symbolic expansion of the
/// recursion on cardinal knots, and the local basis values against Cox-De
/// Boor on an interior segment.
inline SuiteResult verify_basis_matrix(const VerifyConfig& cfg) {
  SuiteResult r{"basis_matrix", true, 0.0, {}};
  std::mt19937_64 rng(cfg.seed + 2);
  std::uniform_real_distribution<double> udist(0.0, 1.0);
  for (int p = 1; p <= cfg.max_degree + 1; ++p) {
    const int k = p - 1;
    const BasisMatrix psi = compute_basis_matrix(p);
    const BasisMatrix alt = basis_matrix_by_expansion(p);
    for (int a = 0; a < p; ++a)
      for (int b = 0; b < p; ++b) {
        const double e = std::abs(psi(a, b) - alt(a, b)) / 1e-12;
        r.worst = std::max(r.worst, e);
        if (e > 1.0) detail::note_failure(r, "order " + std::to_string(p) + " differs from the expansion");
      }
    const KnotGrid g = make_uniform_grid(k, 3, 0.0, 3.0);
    std::vector<double> pw(p), local(p);
    for (int t = 0; t < 100; ++t) {
      const double u = udist(rng);
      fill_power_bases(u, pw);
      detail::local_basis(pw, psi, local);
      const auto ref = basis_row(g, 1.0 + u);
      double sum = 0.0;
      for (int c = 0; c < p; ++c) {
        sum += local[c];
        const double e = std::abs(local[c] - ref[1 + c]) / 1e-10;
        r.worst = std::max(r.worst, e);
        if (e > 1.0) detail::note_failure(r, "order " + std::to_string(p) + " disagrees with Cox-De Boor");
      }
      if (std::abs(sum - 1.0) > 1e-10)
        detail::note_failure(r, "order " + std::to_string(p) + " segment sum is not 1");
    }
  }
  return r;
}

/// Toeplitz-matrix products against direct convolution.
inline SuiteResult verify_toeplitz(const VerifyConfig& cfg) {
  SuiteResult r{"toeplitz", true, 0.0, {}};
  std::mt19937_64 rng(cfg.seed + 3);
  std::uniform_int_distribution<int> len(1, 16);
  std::uniform_real_distribution<double> val(-1.0, 1.0);
  for (int t = 0; t < 1000; ++t) {
    std::vector<double> a(len(rng)), b(len(rng));
    for (double& v : a) v = val(rng);
    for (double& v : b) v = val(rng);
    const auto prod = poly_mul_toeplitz(a, b);
    if (prod.size() != a.size() + b.size() - 1) {
      detail::note_failure(r, "wrong product length");
      continue;
    }
    for (std::size_t n = 0; n < prod.size(); ++n) {
      const double e = std::abs(prod[n] - detail::convolve_at(a, b, n)) / 1e-12;
      r.worst = std::max(r.worst, e);
      if (e > 1.0) detail::note_failure(r, "product differs from convolution");
    }
  }
  return r;
}

/// Analytic gradients of both backends against central differences of the
/// loss, on random [2, 3, 1] models.
inline SuiteResult verify_gradients(const VerifyConfig& cfg) {
  SuiteResult r{"gradient_check", true, 0.0, {}};
  constexpr double h = 1e-5;
  std::mt19937_64 rng(cfg.seed + 4);
  const int deg_lo = std::min(3, cfg.max_degree);
  std::uniform_int_distribution<int> deg(deg_lo, std::max(deg_lo, std::min(5, cfg.max_degree)));
  std::uniform_int_distribution<int> grid(1, std::min(8, cfg.max_grid));
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  for (int m = 0; m < cfg.gradient_models; ++m) {
    NetworkSpec spec;
    spec.shape = {2, 3, 1};
    spec.degree = deg(rng);
    spec.grid = grid(rng);
    spec.seed = rng();
    Model model = init_network(spec);
    for (auto& l : model.layers) {
      for (double& v : l.coeffs) v = unit(rng);
      for (double& v : l.base_weight) v = unit(rng);
      for (double& v : l.spline_weight) v = unit(rng);
    }
    Matrix X(16, 2);
    for (double& v : X.data) v = 0.95 * unit(rng);
    std::vector<double> Y(16);
    for (double& v : Y) v = unit(rng);

    for (Backend b : {Backend::recursive, Backend::matrix}) {
      const LossAndGradients lg = backward(model, X, Y, b);
      const auto analytic = gradient_views(lg.grads);
      auto params = parameter_views(model);
      auto loss = [&] {
        const Matrix pred = forward(model, X, b);
        double acc = 0.0;
        for (std::size_t q = 0; q < Y.size(); ++q) acc += (pred.data[q] - Y[q]) * (pred.data[q] - Y[q]);
        return acc / static_cast<double>(Y.size());
      };
      for (std::size_t t = 0; t < params.size(); ++t)
        for (std::size_t q = 0; q < params[t].size(); ++q) {
          const double saved = params[t][q];
          params[t][q] = saved + h;
          const double up = loss();
          params[t][q] = saved - h;
          const double down = loss();
          params[t][q] = saved;
          const double fd = (up - down) / (2.0 * h);
          const double a = analytic[t][q];
          const double diff = std::abs(a - fd);
          const double allowed = std::max(1e-4 * std::max(std::abs(a), std::abs(fd)), 1e-7);
          r.worst = std::max(r.worst, diff / allowed);
          if (diff > allowed)
            detail::note_failure(r, std::string(to_string(b)) + " backend, model " + std::to_string(m) +
                                        ", tensor " + std::to_string(t) + "[" + std::to_string(q) + "]");
        }
    }
  }
  return r;
}

inline std::vector<SuiteResult> run_verification(const VerifyConfig& cfg) {
  cfg.validate();
  return {verify_backend_equivalence(cfg), verify_partition_of_unity(cfg), verify_basis_matrix(cfg),
          verify_toeplitz(cfg), verify_gradients(cfg)};
}

}  // namespace mkan
