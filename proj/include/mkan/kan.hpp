#pragma once

// KAN layers and networks. Every edge (j, i) of a layer carries
//
//   phi_{j,i}(x) = w_b[j,i] * b(x) + w_s[j,i] * spline_{j,i}(x)
//
// and node j sums its incoming edges. The spline term is evaluated either by
// the Cox-De Boor recursion or through the basis matrix; parameter layout and
// every other computation are shared between the two.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "mkan/basis_matrix.hpp"
#include "mkan/matrix_eval.hpp"
#include "mkan/parallel.hpp"
#include "mkan/splines.hpp"
#include "mkan/tensor.hpp"

namespace mkan {

enum class Backend { recursive, matrix };
enum class BaseFunction { silu, none };

inline std::string_view to_string(Backend b) { return b == Backend::matrix ? "matrix" : "recursive"; }
inline std::string_view to_string(BaseFunction f) { return f == BaseFunction::silu ? "silu" : "none"; }

inline Backend parse_backend(std::string_view s) {
  if (s == "matrix") return Backend::matrix;
  if (s == "recursive") return Backend::recursive;
  throw std::invalid_argument("unknown backend '" + std::string(s) + "'");
}

inline BaseFunction parse_base_function(std::string_view s) {
  if (s == "silu") return BaseFunction::silu;
  if (s == "none") return BaseFunction::none;
  throw std::invalid_argument("unknown base function '" + std::string(s) + "'");
}

struct NetworkSpec {
  std::vector<int> shape{2, 5, 1};
  int degree = 3;
  int grid = 5;
  double grid_eps = 1.0;
  std::uint64_t seed = 42;
  Backend backend = Backend::matrix;
  BaseFunction base_function = BaseFunction::silu;

  void validate() const {
    if (shape.size() < 2) throw std::invalid_argument("network shape needs at least two widths");
    for (int w : shape)
      if (w < 1) throw std::invalid_argument("network widths must be >= 1");
    if (degree < 0) throw std::invalid_argument("degree must be >= 0");
    if (grid < 1) throw std::invalid_argument("grid intervals must be >= 1");
    if (!(grid_eps >= 0.0 && grid_eps <= 1.0)) throw std::invalid_argument("grid_eps must lie in [0, 1]");
  }

  friend bool operator==(const NetworkSpec&, const NetworkSpec&) = default;
};

struct LayerParams {
  int in_dim = 0;
  int out_dim = 0;
  std::vector<KnotGrid> grids;        // one per input feature
  std::vector<double> coeffs;         // [out][in][G+k]
  std::vector<double> base_weight;    // [out][in]
  std::vector<double> spline_weight;  // [out][in]

  int degree() const { return grids.front().degree; }
  int intervals() const { return grids.front().intervals; }
  int num_basis() const { return grids.front().num_basis(); }
  std::size_t edge(int j, int i) const { return static_cast<std::size_t>(j) * in_dim + i; }

  std::span<double> edge_coeffs(int j, int i) {
    const std::size_t nb = num_basis();
    return {coeffs.data() + edge(j, i) * nb, nb};
  }
  std::span<const double> edge_coeffs(int j, int i) const {
    const std::size_t nb = num_basis();
    return {coeffs.data() + edge(j, i) * nb, nb};
  }

  void validate() const {
    if (in_dim < 1 || out_dim < 1) throw std::invalid_argument("layer dims must be >= 1");
    if (grids.size() != static_cast<std::size_t>(in_dim))
      throw std::invalid_argument("layer needs one grid per input feature");
    for (const auto& g : grids)
      if (g.degree != grids.front().degree || g.intervals != grids.front().intervals)
        throw std::invalid_argument("all grids of a layer must share degree and interval count");
    const std::size_t edges = static_cast<std::size_t>(in_dim) * out_dim;
    if (coeffs.size() != edges * num_basis() || base_weight.size() != edges || spline_weight.size() != edges)
      throw std::invalid_argument("layer parameter tensors have the wrong size");
    for (const auto* v : {&coeffs, &base_weight, &spline_weight})
      for (double x : *v)
        if (!std::isfinite(x)) throw std::invalid_argument("layer parameters must be finite");
  }

  friend bool operator==(const LayerParams&, const LayerParams&) = default;
};

struct Model {
  NetworkSpec spec;
  std::vector<LayerParams> layers;

  int input_dim() const { return layers.front().in_dim; }
  int output_dim() const { return layers.back().out_dim; }

  friend bool operator==(const Model&, const Model&) = default;
};

/// Coefficients ~ N(0, (0.1/sqrt(G+k))^2), w_b = w_s = 1, grids uniform on
/// [-1, 1]. Deterministic in spec.seed.
inline Model init_network(const NetworkSpec& spec) {
  spec.validate();
  Model model;
  model.spec = spec;
  std::mt19937_64 rng(spec.seed);
  const int nb = spec.grid + spec.degree;
  std::normal_distribution<double> normal(0.0, 0.1 / std::sqrt(static_cast<double>(nb)));
  for (std::size_t l = 0; l + 1 < spec.shape.size(); ++l) {
    LayerParams layer;
    layer.in_dim = spec.shape[l];
    layer.out_dim = spec.shape[l + 1];
    layer.grids.assign(layer.in_dim, make_uniform_grid(spec.degree, spec.grid, -1.0, 1.0));
    const std::size_t edges = static_cast<std::size_t>(layer.in_dim) * layer.out_dim;
    layer.coeffs.resize(edges * nb);
    for (double& c : layer.coeffs) c = normal(rng);
    layer.base_weight.assign(edges, 1.0);
    layer.spline_weight.assign(edges, 1.0);
    model.layers.push_back(std::move(layer));
  }
  return model;
}

inline double silu(double x) { return x / (1.0 + std::exp(-x)); }

inline double silu_slope(double x) {
  const double s = 1.0 / (1.0 + std::exp(-x));
  return s * (1.0 + x * (1.0 - s));
}

/// Everything a backward pass needs from one layer's forward pass. Sized by
/// layer_forward; reusing one object across steps avoids reallocation.
struct LayerCache {
  bool want_input_grad = true;  // set before the forward pass
  Backend backend = Backend::matrix;
  BaseFunction base_function = BaseFunction::silu;
  Matrix input;                    // N x I
  std::vector<double> base;        // N x I
  std::vector<double> base_slope;  // N x I
  std::vector<double> spline;      // [n][j][i]
  std::vector<unsigned char> inside;
  // matrix backend
  std::vector<int> segment;         // N x I
  std::vector<double> u;            // N x I
  std::vector<double> polys;        // [i][s][j][r]
  std::vector<double> slope_polys;  // [i][s][j][r], r < k
  // recursive backend
  std::vector<double> rows;        // [n][i][b]
  std::vector<double> slope_rows;  // [n][i][b]
};

namespace detail {

inline double dot(const double* a, const double* b, int n) {
  double acc = 0.0;
#pragma omp simd reduction(+ : acc)
  for (int r = 0; r < n; ++r) acc += a[r] * b[r];
  return acc;
}

inline void check_layer_input(const LayerParams& layer, const Matrix& x) {
  if (x.cols != static_cast<std::size_t>(layer.in_dim))
    throw std::invalid_argument("layer input width " + std::to_string(x.cols) + " does not match in_dim " +
                                std::to_string(layer.in_dim));
  for (double v : x.data)
    if (!std::isfinite(v)) throw std::invalid_argument("layer input contains a non-finite value");
}

// Psi * c for every (feature, segment, edge) in the [i][s][j][r] layout, and
// optionally the d/dx coefficients (r+1) * poly[r+1] / h.
inline void build_segment_polys(const LayerParams& layer, std::vector<double>& polys,
                                std::vector<double>* slope_polys) {
  const int k = layer.degree();
  const int p = k + 1;
  const int G = layer.intervals();
  const int I = layer.in_dim;
  const int O = layer.out_dim;
  const BasisMatrix& psi = cached_basis_matrix(p);
  polys.resize(static_cast<std::size_t>(I) * G * O * p);
  std::vector<double> tmp(static_cast<std::size_t>(G) * p);
  for (int i = 0; i < I; ++i) {
    for (int j = 0; j < O; ++j) {
      segment_polynomials(psi, layer.edge_coeffs(j, i), G, tmp);
      for (int s = 0; s < G; ++s)
        std::copy_n(tmp.data() + static_cast<std::size_t>(s) * p, p,
                    polys.data() + ((static_cast<std::size_t>(i) * G + s) * O + j) * p);
    }
  }
  if (!slope_polys) return;
  slope_polys->assign(static_cast<std::size_t>(I) * G * O * std::max(k, 1), 0.0);
  for (int i = 0; i < I; ++i) {
    const double inv_h = 1.0 / layer.grids[i].spacing();
    for (int s = 0; s < G; ++s)
      for (int j = 0; j < O; ++j) {
        const std::size_t blk = (static_cast<std::size_t>(i) * G + s) * O + j;
        const double* src = polys.data() + blk * p;
        double* dst = slope_polys->data() + blk * std::max(k, 1);
        for (int r = 0; r < k; ++r) dst[r] = (r + 1) * src[r + 1] * inv_h;
      }
  }
}

// Recursive-backend slopes from the degree k-1 row.
inline void slope_from_prev(const KnotGrid& g, const double* prev, double* out) {
  const int k = g.degree;
  const auto& t = g.knots;
  for (int b = 0; b < g.num_basis(); ++b)
    out[b] = cdb_weight(k, t[b + k] - t[b]) * prev[b] - cdb_weight(k, t[b + k + 1] - t[b + 1]) * prev[b + 1];
}

}  // namespace detail

/// x_{l+1, j} = sum_i w_b[j,i] b(x_i) + w_s[j,i] spline_{j,i}(x_i).
/// When `cache` is given it is filled for layer_backward.
inline Matrix layer_forward(const LayerParams& layer, const Matrix& x, Backend backend,
                            BaseFunction base_function = BaseFunction::silu, LayerCache* cache = nullptr) {
  detail::check_layer_input(layer, x);
  const std::size_t N = x.rows;
  const int I = layer.in_dim;
  const int O = layer.out_dim;
  const int k = layer.degree();
  const int p = k + 1;
  const int G = layer.intervals();
  const int nb = layer.num_basis();
  const bool silu_on = base_function == BaseFunction::silu;
  const bool slopes = cache && cache->want_input_grad;

  Matrix out(N, O, 0.0);
  std::vector<double> local_polys;
  const std::vector<double>* polys = &local_polys;

  if (cache) {
    cache->backend = backend;
    cache->base_function = base_function;
    cache->input = x;
    cache->base.resize(N * I);
    cache->base_slope.resize(slopes ? N * I : 0);
    cache->spline.resize(N * O * I);
    cache->inside.resize(N * I);
    if (backend == Backend::matrix) {
      cache->segment.resize(N * I);
      cache->u.resize(N * I);
      cache->rows.clear();
      cache->slope_rows.clear();
    } else {
      cache->rows.resize(N * I * nb);
      cache->slope_rows.resize(slopes ? N * I * nb : 0);
      cache->segment.clear();
      cache->u.clear();
    }
  }
  if (backend == Backend::matrix) {
    if (cache) {
      detail::build_segment_polys(layer, cache->polys, slopes ? &cache->slope_polys : nullptr);
      polys = &cache->polys;
    } else {
      detail::build_segment_polys(layer, local_polys, nullptr);
    }
  }

  for_each_chunk(N, [&](std::size_t, std::size_t begin, std::size_t end) {
    std::vector<double> pw(p);
    std::vector<double> buf(static_cast<std::size_t>(G) + 2 * k);
    std::vector<double> prev(static_cast<std::size_t>(nb) + 1);
    for (std::size_t n = begin; n < end; ++n) {
      double* out_row = out.row(n).data();
      for (int i = 0; i < I; ++i) {
        const double xv = x(n, i);
        const KnotGrid& grid = layer.grids[i];
        const double b = silu_on ? silu(xv) : 0.0;
        const std::size_t ni = n * I + i;
        if (cache) {
          cache->base[ni] = b;
          if (slopes) cache->base_slope[ni] = silu_on ? silu_slope(xv) : 0.0;
          cache->inside[ni] = grid.contains(xv);
        }
        if (backend == Backend::matrix) {
          const IntervalLocation loc = locate_interval(grid, xv);
          const double* pwr = pw.data();
          fill_power_bases(loc.u, pw);
          if (cache) {
            cache->segment[ni] = loc.segment;
            cache->u[ni] = loc.u;
          }
          const double* blk = polys->data() + (static_cast<std::size_t>(i) * G + loc.segment) * O * p;
          for (int j = 0; j < O; ++j) {
            const double s = detail::dot(pwr, blk + static_cast<std::size_t>(j) * p, p);
            const std::size_t e = layer.edge(j, i);
            if (cache) cache->spline[(n * O + j) * I + i] = s;
            out_row[j] += layer.base_weight[e] * b + layer.spline_weight[e] * s;
          }
        } else {
          detail::cox_de_boor_rows(grid, grid.clamp(xv), buf, slopes && k > 0 ? std::span<double>(prev)
                                                                             : std::span<double>());
          const double* row = buf.data();
          if (cache) {
            std::copy_n(buf.data(), nb, cache->rows.data() + ni * nb);
            if (slopes) {
              double* sr = cache->slope_rows.data() + ni * nb;
              if (k > 0)
                detail::slope_from_prev(grid, prev.data(), sr);
              else
                std::fill_n(sr, nb, 0.0);
            }
          }
          for (int j = 0; j < O; ++j) {
            const double s = detail::dot(row, layer.edge_coeffs(j, i).data(), nb);
            const std::size_t e = layer.edge(j, i);
            if (cache) cache->spline[(n * O + j) * I + i] = s;
            out_row[j] += layer.base_weight[e] * b + layer.spline_weight[e] * s;
          }
        }
      }
    }
  });
  return out;
}

struct LayerGradients {
  std::vector<double> coeffs;
  std::vector<double> base_weight;
  std::vector<double> spline_weight;

  void reset(const LayerParams& layer) {
    coeffs.assign(layer.coeffs.size(), 0.0);
    base_weight.assign(layer.base_weight.size(), 0.0);
    spline_weight.assign(layer.spline_weight.size(), 0.0);
  }
};

/// Accumulates parameter gradients into `grads` (which must be reset/sized)
/// given dL/d(output). Writes dL/d(input) into `grad_in` when non-null; that
/// requires cache.want_input_grad. Inputs outside a grid's domain were
/// clamped, so the spline contributes no slope there.
inline void layer_backward(const LayerParams& layer, const LayerCache& cache, const Matrix& grad_out,
                           LayerGradients& grads, Matrix* grad_in) {
  const std::size_t N = cache.input.rows;
  const int I = layer.in_dim;
  const int O = layer.out_dim;
  const int k = layer.degree();
  const int p = k + 1;
  const int G = layer.intervals();
  const int nb = layer.num_basis();
  const int kslope = std::max(k, 1);
  if (grad_out.rows != N || grad_out.cols != static_cast<std::size_t>(O))
    throw std::invalid_argument("layer_backward: gradient shape does not match layer output");
  if (grad_in && !cache.want_input_grad)
    throw std::invalid_argument("layer_backward: input gradient requested but not cached");
  const bool matrix = cache.backend == Backend::matrix;
  const std::size_t edges = static_cast<std::size_t>(I) * O;
  const std::size_t coef_scratch = matrix ? static_cast<std::size_t>(I) * G * O * p : edges * nb;

  if (grad_in) grad_in->resize(N, I);

  struct Partial {
    std::vector<double> wb, ws, coef;
  };
  std::vector<Partial> partials(chunk_count(N));

  for_each_chunk(N, [&](std::size_t c, std::size_t begin, std::size_t end) {
    Partial& part = partials[c];
    std::vector<double> pw_buf(p);
    part.wb.assign(edges, 0.0);
    part.ws.assign(edges, 0.0);
    part.coef.assign(coef_scratch, 0.0);
    for (std::size_t n = begin; n < end; ++n) {
      const double* g = grad_out.row(n).data();
      for (int i = 0; i < I; ++i) {
        const std::size_t ni = n * I + i;
        const double b = cache.base[ni];
        const bool inside = cache.inside[ni] != 0;
        double din = 0.0;
        if (matrix) {
          fill_power_bases(cache.u[ni], pw_buf);
          const double* pw = pw_buf.data();
          const std::size_t blk = (static_cast<std::size_t>(i) * G + cache.segment[ni]) * O;
          for (int j = 0; j < O; ++j) {
            const double d = g[j];
            const std::size_t e = layer.edge(j, i);
            part.wb[e] += d * b;
            part.ws[e] += d * cache.spline[(n * O + j) * I + i];
            const double dws = d * layer.spline_weight[e];
            double* gp = part.coef.data() + (blk + j) * p;
#pragma omp simd
            for (int r = 0; r < p; ++r) gp[r] += dws * pw[r];
            if (grad_in) {
              const double slope =
                  (inside && k > 0) ? detail::dot(pw, cache.slope_polys.data() + (blk + j) * kslope, k) : 0.0;
              din += d * (layer.base_weight[e] * cache.base_slope[ni] + layer.spline_weight[e] * slope);
            }
          }
        } else {
          const double* row = cache.rows.data() + ni * nb;
          for (int j = 0; j < O; ++j) {
            const double d = g[j];
            const std::size_t e = layer.edge(j, i);
            part.wb[e] += d * b;
            part.ws[e] += d * cache.spline[(n * O + j) * I + i];
            const double dws = d * layer.spline_weight[e];
            double* gc = part.coef.data() + e * nb;
#pragma omp simd
            for (int r = 0; r < nb; ++r) gc[r] += dws * row[r];
            if (grad_in) {
              const double slope =
                  inside ? detail::dot(cache.slope_rows.data() + ni * nb, layer.edge_coeffs(j, i).data(), nb)
                         : 0.0;
              din += d * (layer.base_weight[e] * cache.base_slope[ni] + layer.spline_weight[e] * slope);
            }
          }
        }
        if (grad_in) (*grad_in)(n, i) = din;
      }
    }
  });

  std::vector<double> coef_total(coef_scratch, 0.0);
  for (const Partial& part : partials) {
    for (std::size_t e = 0; e < edges; ++e) {
      grads.base_weight[e] += part.wb[e];
      grads.spline_weight[e] += part.ws[e];
    }
    for (std::size_t q = 0; q < coef_scratch; ++q) coef_total[q] += part.coef[q];
  }
  if (!matrix) {
    for (std::size_t q = 0; q < coef_scratch; ++q) grads.coeffs[q] += coef_total[q];
    return;
  }
  const BasisMatrix& psi = cached_basis_matrix(p);
  std::vector<double> edge_polys(static_cast<std::size_t>(G) * p);
  for (int i = 0; i < I; ++i)
    for (int j = 0; j < O; ++j) {
      for (int s = 0; s < G; ++s)
        std::copy_n(coef_total.data() + ((static_cast<std::size_t>(i) * G + s) * O + j) * p, p,
                    edge_polys.data() + static_cast<std::size_t>(s) * p);
      accumulate_segment_gradients(psi, edge_polys, G,
                                   {grads.coeffs.data() + layer.edge(j, i) * nb, static_cast<std::size_t>(nb)});
    }
}

inline Matrix forward(const Model& model, const Matrix& X, Backend backend) {
  if (X.cols != static_cast<std::size_t>(model.input_dim()))
    throw std::invalid_argument("forward: input has " + std::to_string(X.cols) + " columns, model expects " +
                                std::to_string(model.input_dim()));
  Matrix act = X;
  for (const auto& layer : model.layers) act = layer_forward(layer, act, backend, model.spec.base_function);
  return act;
}

inline Matrix forward(const Model& model, const Matrix& X) { return forward(model, X, model.spec.backend); }

}  // namespace mkan
