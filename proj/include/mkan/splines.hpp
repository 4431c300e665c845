#pragma once

// Uniform knot grids and the recursive Cox-De Boor evaluation of B-spline
// bases. This is the reference path: it serves as the "recursive" backend of
// a network and as the oracle the matrix path is checked against.

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mkan {

/// Extended uniform knot vector over [lo, hi] with `intervals` segments and
/// `degree` extra knots past each end.
struct KnotGrid {
  int degree = 0;
  int intervals = 1;
  double lo = -1.0;
  double hi = 1.0;
  std::vector<double> knots;  // size intervals + 2*degree + 1

  double spacing() const { return (hi - lo) / intervals; }
  int num_basis() const { return intervals + degree; }
  bool contains(double x) const { return x >= lo && x <= hi; }
  double clamp(double x) const { return std::clamp(x, lo, hi); }

  friend bool operator==(const KnotGrid&, const KnotGrid&) = default;
};

inline KnotGrid make_uniform_grid(int degree, int intervals, double lo, double hi) {
  if (degree < 0) throw std::invalid_argument("make_uniform_grid: degree must be >= 0");
  if (intervals < 1) throw std::invalid_argument("make_uniform_grid: intervals must be >= 1");
  if (!std::isfinite(lo) || !std::isfinite(hi))
    throw std::invalid_argument("make_uniform_grid: bounds must be finite");
  if (!(lo < hi)) throw std::invalid_argument("make_uniform_grid: requires lo < hi");

  KnotGrid g;
  g.degree = degree;
  g.intervals = intervals;
  g.lo = lo;
  g.hi = hi;
  const double h = (hi - lo) / intervals;
  const int n = intervals + 2 * degree + 1;
  g.knots.resize(n);
  for (int i = 0; i < n; ++i) g.knots[i] = lo + static_cast<double>(i - degree) * h;
  // Pin the domain ends so knots[k] and knots[G+k] are exact.
  g.knots[degree] = lo;
  g.knots[intervals + degree] = hi;
  return g;
}

namespace detail {

// One term of the Cox-De Boor recursion; 0/0 is taken as 0.
inline double cdb_weight(double num, double den) { return den == 0.0 ? 0.0 : num / den; }

// Index of the knot interval [t_m, t_{m+1}) holding x, with x == hi assigned to
// the last domain interval. Returns -1 when x lies outside the knot span.
inline int knot_interval(const KnotGrid& g, double x) {
  const int last_domain = g.intervals + g.degree - 1;
  if (x == g.hi) return last_domain;
  const auto& t = g.knots;
  if (x < t.front() || x >= t.back()) return -1;
  auto it = std::upper_bound(t.begin(), t.end(), x);
  return static_cast<int>(it - t.begin()) - 1;
}

// Bottom-up evaluation over the whole knot vector. On return, buf[0..G+k)
// holds the degree-k row. If `prev` is non-empty it receives the degree-(k-1)
// row (length G+k+1). buf must have size >= knots.size()-1.
inline void cox_de_boor_rows(const KnotGrid& g, double x, std::span<double> buf,
                             std::span<double> prev = {}) {
  const auto& t = g.knots;
  const int k = g.degree;
  const int m_total = static_cast<int>(t.size()) - 1;
  const int hit = knot_interval(g, x);
  for (int m = 0; m < m_total; ++m) buf[m] = (m == hit) ? 1.0 : 0.0;
  for (int d = 1; d <= k; ++d) {
    if (d == k && !prev.empty()) std::copy_n(buf.begin(), m_total - d + 1, prev.begin());
    for (int m = 0; m < m_total - d; ++m) {
      buf[m] = cdb_weight(x - t[m], t[m + d] - t[m]) * buf[m] +
               cdb_weight(t[m + d + 1] - x, t[m + d + 1] - t[m + 1]) * buf[m + 1];
    }
  }
}

inline double checked_input(double x, const char* who) {
  if (!std::isfinite(x)) throw std::invalid_argument(std::string(who) + ": non-finite input");
  return x;
}

}  // namespace detail

/// B_{i,k}(x) by the Cox-De Boor recursion, memoised bottom-up over degrees.
/// `k` may differ from grid.degree; the knot vector is what matters. No
/// clamping: returns 0 outside [t_i, t_{i+k+1}).
inline double cox_de_boor(const KnotGrid& grid, int i, int k, double x) {
  const auto& t = grid.knots;
  if (k < 0 || i < 0 || i > static_cast<int>(t.size()) - k - 2)
    throw std::out_of_range("cox_de_boor: basis index out of range");
  detail::checked_input(x, "cox_de_boor");
  const int hit = detail::knot_interval(grid, x);
  std::vector<double> b(k + 1);
  for (int m = 0; m <= k; ++m) b[m] = (i + m == hit) ? 1.0 : 0.0;
  for (int d = 1; d <= k; ++d) {
    for (int m = 0; m <= k - d; ++m) {
      const int a = i + m;
      b[m] = detail::cdb_weight(x - t[a], t[a + d] - t[a]) * b[m] +
             detail::cdb_weight(t[a + d + 1] - x, t[a + d + 1] - t[a + 1]) * b[m + 1];
    }
  }
  return b[0];
}

/// All G+k basis values at x (clamped into the domain).
inline std::vector<double> basis_row(const KnotGrid& grid, double x) {
  const double xc = grid.clamp(detail::checked_input(x, "basis_row"));
  std::vector<double> buf(grid.knots.size() - 1);
  detail::cox_de_boor_rows(grid, xc, buf);
  buf.resize(grid.num_basis());
  return buf;
}

/// d/dx of every basis function at the clamped x, from the degree k-1 row:
/// B'_{i,k} = k/(t_{i+k}-t_i) B_{i,k-1} - k/(t_{i+k+1}-t_{i+1}) B_{i+1,k-1}.
inline std::vector<double> basis_row_derivative(const KnotGrid& grid, double x) {
  const double xc = grid.clamp(detail::checked_input(x, "basis_row_derivative"));
  const int k = grid.degree;
  const int nb = grid.num_basis();
  std::vector<double> out(nb, 0.0);
  if (k == 0) return out;
  std::vector<double> buf(grid.knots.size() - 1);
  std::vector<double> prev(nb + 1);
  detail::cox_de_boor_rows(grid, xc, buf, prev);
  const auto& t = grid.knots;
  for (int i = 0; i < nb; ++i) {
    out[i] = detail::cdb_weight(k, t[i + k] - t[i]) * prev[i] -
             detail::cdb_weight(k, t[i + k + 1] - t[i + 1]) * prev[i + 1];
  }
  return out;
}

}  // namespace mkan
