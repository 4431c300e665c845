#pragma once

// Batched B-spline evaluation through the basis matrix:
//
//   1. Psi for the grid's order (cached_basis_matrix)
//   2. locate each input's knot interval and build [1 u ... u^k]
//   3. local basis values = powers * Psi, scattered into a row of length G+k
//   4. spline values = basis rows . control points
//
// Nothing here calls into the Cox-De Boor code.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mkan/basis_matrix.hpp"
#include "mkan/splines.hpp"
#include "mkan/tensor.hpp"

namespace mkan {

struct IntervalLocation {
  int segment = 0;    // in [0, G-1]
  double u = 0.0;     // in [0, 1]
  double t_lo = 0.0;  // knots[segment + k]
  double t_hi = 0.0;  // knots[segment + k + 1]
  double x = 0.0;     // the clamped input
};

/// Row-per-sample powers of u: row n is [1, u_n, ..., u_n^degree].
struct PowerBases {
  int degree = 0;
  std::vector<double> values;

  std::size_t size() const { return values.size() / (degree + 1); }
  std::span<const double> row(std::size_t n) const {
    return {values.data() + n * (degree + 1), static_cast<std::size_t>(degree + 1)};
  }
};

/// Interval of the clamped input by index arithmetic on the uniform grid. The
/// comparisons against the actual knots make the result agree with the
/// half-open convention even where the division rounds across a knot.
inline IntervalLocation locate_interval(const KnotGrid& grid, double x) {
  const int k = grid.degree;
  const int last = grid.intervals - 1;
  const double xc = grid.clamp(x);
  const double h = grid.spacing();
  int seg = static_cast<int>(std::floor((xc - grid.lo) / h));
  seg = std::clamp(seg, 0, last);
  const double* t = grid.knots.data() + k;
  seg -= static_cast<int>(seg > 0 && xc < t[seg]);
  seg += static_cast<int>(seg < last && xc >= t[seg + 1]);
  IntervalLocation loc;
  loc.segment = seg;
  loc.t_lo = t[seg];
  loc.t_hi = t[seg + 1];
  loc.u = std::clamp((xc - loc.t_lo) / (loc.t_hi - loc.t_lo), 0.0, 1.0);
  loc.x = xc;
  return loc;
}

inline std::vector<IntervalLocation> locate_intervals(const KnotGrid& grid, std::span<const double> xs) {
  std::vector<IntervalLocation> out(xs.size());
  for (std::size_t n = 0; n < xs.size(); ++n) {
    if (!std::isfinite(xs[n])) throw std::invalid_argument("locate_intervals: non-finite input");
    out[n] = locate_interval(grid, xs[n]);
  }
  return out;
}

/// [1, u, ..., u^k] by repeated multiplication. Each pass multiplies the known
/// prefix u^0..u^{m-1} by u^m, so the dependency chain is log2(k+1) deep
/// instead of k.
inline void fill_power_bases(double u, std::span<double> out) {
  const std::size_t p = out.size();
  if (p == 0) return;
  out[0] = 1.0;
  if (p == 1) return;
  out[1] = u;
  for (std::size_t m = 2; m < p; m *= 2) {
    const double um = out[m - 1] * u;
    const std::size_t count = std::min(m, p - m);
    for (std::size_t r = 0; r < count; ++r) out[m + r] = out[r] * um;
  }
}

inline PowerBases power_bases(std::span<const IntervalLocation> locs, int degree) {
  if (degree < 0) throw std::invalid_argument("power_bases: degree must be >= 0");
  PowerBases pb;
  pb.degree = degree;
  const std::size_t p = static_cast<std::size_t>(degree) + 1;
  pb.values.resize(locs.size() * p);
  for (std::size_t n = 0; n < locs.size(); ++n)
    fill_power_bases(locs[n].u, {pb.values.data() + n * p, p});
  return pb;
}

namespace detail {

inline void check_psi(const BasisMatrix& psi, const KnotGrid& grid, const char* who) {
  if (psi.order() != grid.degree + 1)
    throw std::invalid_argument(std::string(who) + ": basis matrix order must be grid degree + 1");
}

inline void check_batch(std::size_t locs, const PowerBases& pb, const KnotGrid& grid, const char* who) {
  if (pb.degree != grid.degree || pb.size() != locs)
    throw std::invalid_argument(std::string(who) + ": power bases do not match locations/grid");
}

// out[c] = sum_r pw[r] * psi(r, c)
inline void local_basis(std::span<const double> pw, const BasisMatrix& psi, std::span<double> out) {
  const int p = psi.order();
  std::fill(out.begin(), out.end(), 0.0);
  const double* m = psi.values().data();
  for (int r = 0; r < p; ++r) {
    const double w = pw[r];
    const double* row = m + static_cast<std::size_t>(r) * p;
    for (int c = 0; c < p; ++c) out[c] += w * row[c];
  }
}

// out[c] = (1/h) * sum_{r>=1} r * u^{r-1} * psi(r, c)
inline void local_basis_derivative(std::span<const double> pw, const BasisMatrix& psi, double h,
                                   std::span<double> out) {
  const int p = psi.order();
  std::fill(out.begin(), out.end(), 0.0);
  const double* m = psi.values().data();
  for (int r = 1; r < p; ++r) {
    const double w = r * pw[r - 1] / h;
    const double* row = m + static_cast<std::size_t>(r) * p;
    for (int c = 0; c < p; ++c) out[c] += w * row[c];
  }
}

}  // namespace detail

/// Basis rows (N x (G+k)) from interval locations and power bases.
inline Matrix basis_outputs(std::span<const IntervalLocation> locs, const PowerBases& pb,
                            const BasisMatrix& psi, const KnotGrid& grid) {
  detail::check_psi(psi, grid, "basis_outputs");
  detail::check_batch(locs.size(), pb, grid, "basis_outputs");
  const std::size_t p = psi.order();
  Matrix rows(locs.size(), grid.num_basis(), 0.0);
  for (std::size_t n = 0; n < locs.size(); ++n)
    detail::local_basis(pb.row(n), psi, rows.row(n).subspan(locs[n].segment, p));
  return rows;
}

/// d/dx of the basis rows. Same layout as basis_outputs.
inline Matrix basis_output_derivatives(std::span<const IntervalLocation> locs, const PowerBases& pb,
                                       const BasisMatrix& psi, const KnotGrid& grid) {
  detail::check_psi(psi, grid, "basis_output_derivatives");
  detail::check_batch(locs.size(), pb, grid, "basis_output_derivatives");
  const std::size_t p = psi.order();
  Matrix rows(locs.size(), grid.num_basis(), 0.0);
  for (std::size_t n = 0; n < locs.size(); ++n) {
    const auto& loc = locs[n];
    detail::local_basis_derivative(pb.row(n), psi, loc.t_hi - loc.t_lo,
                                   rows.row(n).subspan(loc.segment, p));
  }
  return rows;
}

/// Spline values (N x E): row n, column e is rows[n] . coeffs[e]. `coeffs`
/// holds E edges of G+k control points each.
inline Matrix spline_outputs(const Matrix& rows, std::span<const double> coeffs) {
  const std::size_t nb = rows.cols;
  if (nb == 0 || coeffs.size() % nb != 0)
    throw std::invalid_argument("spline_outputs: coefficient length must be a multiple of G+k");
  const std::size_t edges = coeffs.size() / nb;
  Matrix out(rows.rows, edges, 0.0);
  for (std::size_t n = 0; n < rows.rows; ++n) {
    auto r = rows.row(n);
    for (std::size_t e = 0; e < edges; ++e) {
      const double* c = coeffs.data() + e * nb;
      double acc = 0.0;
      for (std::size_t b = 0; b < nb; ++b) acc += r[b] * c[b];
      out(n, e) = acc;
    }
  }
  return out;
}

// Segment form. Because the product [1 u ... u^k] * Psi * c is associative,
// Psi * c can be formed once per segment of an edge; evaluating a sample is then
// a length-(k+1) dot product with its power bases. The network layers use this
// form on their hot path.

/// out[s*p + r] = sum_c psi(r, c) * coeffs[s + c] for s in [0, G).
inline void segment_polynomials(const BasisMatrix& psi, std::span<const double> coeffs, int intervals,
                                std::span<double> out) {
  const int p = psi.order();
  const double* m = psi.values().data();
  for (int s = 0; s < intervals; ++s) {
    const double* c = coeffs.data() + s;
    double* o = out.data() + static_cast<std::size_t>(s) * p;
    for (int r = 0; r < p; ++r) {
      const double* row = m + static_cast<std::size_t>(r) * p;
      double acc = 0.0;
      for (int j = 0; j < p; ++j) acc += row[j] * c[j];
      o[r] = acc;
    }
  }
}

/// Adjoint of segment_polynomials: grad_coeffs[s + c] += sum_r psi(r, c) * grad_polys[s*p + r].
inline void accumulate_segment_gradients(const BasisMatrix& psi, std::span<const double> grad_polys,
                                         int intervals, std::span<double> grad_coeffs) {
  const int p = psi.order();
  const double* m = psi.values().data();
  for (int s = 0; s < intervals; ++s) {
    const double* gp = grad_polys.data() + static_cast<std::size_t>(s) * p;
    double* gc = grad_coeffs.data() + s;
    for (int r = 0; r < p; ++r) {
      const double w = gp[r];
      const double* row = m + static_cast<std::size_t>(r) * p;
      for (int c = 0; c < p; ++c) gc[c] += w * row[c];
    }
  }
}

/// Spline value with each boundary segment's polynomial continued past the
/// domain (u outside [0, 1]). Inside the domain this equals the ordinary
/// value; grid refits use it as the target for out-of-domain samples.
inline double spline_value_extended(const KnotGrid& grid, const BasisMatrix& psi,
                                    std::span<const double> coeffs, double x) {
  detail::check_psi(psi, grid, "spline_value_extended");
  const IntervalLocation loc = locate_interval(grid, x);
  double u = loc.u;
  if (x < grid.lo || x > grid.hi) u = (x - loc.t_lo) / (loc.t_hi - loc.t_lo);
  const int p = psi.order();
  double acc = 0.0;
  double pw = 1.0;
  for (int r = 0; r < p; ++r) {
    double row = 0.0;
    for (int c = 0; c < p; ++c) row += psi(r, c) * coeffs[loc.segment + c];
    acc += pw * row;
    pw *= u;
  }
  return acc;
}

}  // namespace mkan
