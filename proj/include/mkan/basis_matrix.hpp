#pragma once

// The uniform B-spline basis matrix. For order p = k+1, row r of the p x p
// matrix holds the u^r coefficients of the p basis functions active on one
// knot interval, so that
//
//   [B_s(u) ... B_{s+k}(u)] = [1 u ... u^k] * Psi
//
// with u the normalised offset inside the interval. The matrix depends only on
// the order, so it is built once per order and shared.

#include <atomic>
#include <cmath>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <span>
#include <stdexcept>
#include <vector>

namespace mkan {

class BasisMatrix {
 public:
  BasisMatrix() = default;
  BasisMatrix(int order, std::vector<double> values) : order_(order), values_(std::move(values)) {
    if (order_ < 1 || values_.size() != static_cast<std::size_t>(order_) * order_)
      throw std::invalid_argument("BasisMatrix: values must be order x order");
  }

  int order() const { return order_; }
  int degree() const { return order_ - 1; }
  /// Row r (power of u), column c (basis offset within the segment).
  double operator()(int r, int c) const { return values_[static_cast<std::size_t>(r) * order_ + c]; }
  std::span<const double> values() const { return values_; }

  friend bool operator==(const BasisMatrix&, const BasisMatrix&) = default;

 private:
  int order_ = 0;
  std::vector<double> values_;
};

namespace detail {
inline std::atomic<std::size_t>& basis_construction_counter() {
  static std::atomic<std::size_t> n{0};
  return n;
}
}  // namespace detail

/// Number of times compute_basis_matrix has run in this process.
inline std::size_t basis_matrix_constructions() {
  return detail::basis_construction_counter().load(std::memory_order_relaxed);
}

/// Builds Psi^p from Psi^1 = [1] by
///   Psi^p = ([Psi^{p-1}; 0] A + [0; Psi^{p-1}] B) / (p-1)
/// where A is (p-1) x p with A[r][r] = r+1, A[r][r+1] = p-2-r, and B is
/// (p-1) x p with B[r][r] = -1, B[r][r+1] = 1.
inline BasisMatrix compute_basis_matrix(int order) {
  if (order < 1) throw std::invalid_argument("compute_basis_matrix: order must be >= 1");
  detail::basis_construction_counter().fetch_add(1, std::memory_order_relaxed);

  std::vector<double> psi{1.0};
  for (int p = 2; p <= order; ++p) {
    const int q = p - 1;  // size of the previous matrix
    std::vector<double> next(static_cast<std::size_t>(p) * p, 0.0);
    auto prev = [&](int r, int c) { return psi[static_cast<std::size_t>(r) * q + c]; };
    // Both banded factors have two nonzeros per row (columns c and c+1), so a
    // row of [M; 0] * A only touches columns c, c+1 for each c < q.
    for (int r = 0; r < p; ++r) {
      double* out = next.data() + static_cast<std::size_t>(r) * p;
      for (int c = 0; c < q; ++c) {
        const double top = r < q ? prev(r, c) : 0.0;
        const double bottom = r > 0 ? prev(r - 1, c) : 0.0;
        out[c] += top * (c + 1) - bottom;
        out[c + 1] += top * (p - 2 - c) + bottom;
      }
    }
    const double scale = 1.0 / q;
    for (double& v : next) v *= scale;
    psi = std::move(next);
  }
  return BasisMatrix(order, std::move(psi));
}

/// Process-wide cache. The first request for an order constructs it; later
/// requests return the same immutable object.
inline const BasisMatrix& cached_basis_matrix(int order) {
  if (order < 1) throw std::invalid_argument("cached_basis_matrix: order must be >= 1");
  static std::shared_mutex mu;
  static std::map<int, std::unique_ptr<const BasisMatrix>> cache;
  {
    std::shared_lock lock(mu);
    if (auto it = cache.find(order); it != cache.end()) return *it->second;
  }
  std::unique_lock lock(mu);
  auto& slot = cache[order];
  if (!slot) slot = std::make_unique<const BasisMatrix>(compute_basis_matrix(order));
  return *slot;
}

/// Product of two polynomials (coefficients in ascending powers) computed as
/// T(g) * [q; 0], where T(g) is the lower-triangular Toeplitz matrix whose
/// first column is g padded to length m+n-1.
inline std::vector<double> poly_mul_toeplitz(std::span<const double> g, std::span<const double> q) {
  if (g.empty() || q.empty()) throw std::invalid_argument("poly_mul_toeplitz: empty coefficient vector");
  for (double v : g)
    if (!std::isfinite(v)) throw std::invalid_argument("poly_mul_toeplitz: non-finite coefficient");
  for (double v : q)
    if (!std::isfinite(v)) throw std::invalid_argument("poly_mul_toeplitz: non-finite coefficient");

  const std::size_t m = g.size();
  const std::size_t n = q.size();
  const std::size_t len = m + n - 1;
  std::vector<double> col(len, 0.0);  // first column of T; T[r][c] = col[r-c]
  std::copy(g.begin(), g.end(), col.begin());
  std::vector<double> padded(len, 0.0);
  std::copy(q.begin(), q.end(), padded.begin());

  std::vector<double> out(len, 0.0);
  for (std::size_t r = 0; r < len; ++r) {
    double acc = 0.0;
    for (std::size_t c = 0; c <= r; ++c) acc += col[r - c] * padded[c];
    out[r] = acc;
  }
  return out;
}

/// Second route to the basis matrix: expands the Cox-De Boor recursion
/// symbolically in u on the cardinal knots 0, 1, ..., 2k+1 (segment [k, k+1),
/// x = k + u), multiplying the linear weights into the lower-degree bases with
/// poly_mul_toeplitz. Column c holds the coefficients of B_c.
inline BasisMatrix basis_matrix_by_expansion(int order) {
  if (order < 1) throw std::invalid_argument("basis_matrix_by_expansion: order must be >= 1");
  const int k = order - 1;
  // bases[m] is B_{m,d}(u) as a coefficient vector of length d+1.
  std::vector<std::vector<double>> bases(static_cast<std::size_t>(2 * k + 1));
  for (int m = 0; m < 2 * k + 1; ++m) bases[m] = {m == k ? 1.0 : 0.0};
  for (int d = 1; d <= k; ++d) {
    const int count = 2 * k + 1 - d;
    std::vector<std::vector<double>> next(count);
    for (int m = 0; m < count; ++m) {
      // (x - t_m)/d with x = k+u  ->  ((k-m) + u)/d
      const std::vector<double> rise{static_cast<double>(k - m) / d, 1.0 / d};
      // (t_{m+d+1} - x)/d  ->  ((m+d+1-k) - u)/d
      const std::vector<double> fall{static_cast<double>(m + d + 1 - k) / d, -1.0 / d};
      auto a = poly_mul_toeplitz(rise, bases[m]);
      auto b = poly_mul_toeplitz(fall, bases[m + 1]);
      for (std::size_t r = 0; r < a.size(); ++r) a[r] += b[r];
      next[m] = std::move(a);
    }
    bases = std::move(next);
  }
  std::vector<double> values(static_cast<std::size_t>(order) * order);
  for (int c = 0; c < order; ++c)
    for (int r = 0; r < order; ++r) values[static_cast<std::size_t>(r) * order + c] = bases[c][r];
  return BasisMatrix(order, std::move(values));
}

}  // namespace mkan
