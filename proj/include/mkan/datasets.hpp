#pragma once

// Seeded synthetic regression datasets: the hellokan function
// f(x, y) = exp(sin(pi x) + y^2) and three Feynman equations.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <limits>
#include <numbers>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "mkan/format.hpp"
#include "mkan/tensor.hpp"

namespace mkan {

struct VariableRange {
  double lo = -1.0;
  double hi = 1.0;
  friend bool operator==(const VariableRange&, const VariableRange&) = default;
};

/// Per-variable affine map of [lo, hi] onto [-1, 1].
struct InputMap {
  std::vector<VariableRange> from;

  double apply(std::size_t var, double x) const {
    const auto& r = from[var];
    return (x - 0.5 * (r.lo + r.hi)) / (0.5 * (r.hi - r.lo));
  }
  double invert(std::size_t var, double z) const {
    const auto& r = from[var];
    return z * (0.5 * (r.hi - r.lo)) + 0.5 * (r.lo + r.hi);
  }
  Matrix apply(const Matrix& x) const { return map(x, false); }
  Matrix invert(const Matrix& z) const { return map(z, true); }

 private:
  Matrix map(const Matrix& m, bool inverse) const {
    if (m.cols != from.size()) throw std::invalid_argument("InputMap: column count mismatch");
    Matrix out(m.rows, m.cols);
    for (std::size_t n = 0; n < m.rows; ++n)
      for (std::size_t v = 0; v < m.cols; ++v) out(n, v) = inverse ? invert(v, m(n, v)) : apply(v, m(n, v));
    return out;
  }
};

struct Dataset {
  std::string name;
  Matrix X;                       // n x d
  std::vector<double> y;          // n
  std::vector<std::size_t> train; // row indices
  std::vector<std::size_t> test;
  std::vector<VariableRange> ranges;
  std::uint64_t seed = 0;
  std::optional<InputMap> input_map;  // set once inputs are normalised

  std::size_t dim() const { return X.cols; }
  Matrix train_inputs() const { return gather_rows(X, train); }
  Matrix test_inputs() const { return gather_rows(X, test); }
  std::vector<double> train_targets() const { return gather(train); }
  std::vector<double> test_targets() const { return gather(test); }

 private:
  std::vector<double> gather(const std::vector<std::size_t>& idx) const {
    std::vector<double> out(idx.size());
    for (std::size_t r = 0; r < idx.size(); ++r) out[r] = y.at(idx[r]);
    return out;
  }
};

inline double hellokan(double x, double y) { return std::exp(std::sin(std::numbers::pi * x) + y * y); }

enum class FeynmanEquation { I_6_20b, I_12_11, I_26_2 };

inline FeynmanEquation parse_feynman(std::string_view s) {
  if (s == "I.6.20b") return FeynmanEquation::I_6_20b;
  if (s == "I.12.11") return FeynmanEquation::I_12_11;
  if (s == "I.26.2") return FeynmanEquation::I_26_2;
  throw std::invalid_argument("unknown Feynman equation '" + std::string(s) + "'");
}

inline std::string_view to_string(FeynmanEquation eq) {
  switch (eq) {
    case FeynmanEquation::I_6_20b: return "I.6.20b";
    case FeynmanEquation::I_12_11: return "I.12.11";
    case FeynmanEquation::I_26_2: return "I.26.2";
  }
  return "?";
}

/// f(theta, sigma) = exp(-theta^2 / (2 sigma^2)) / sqrt(2 pi sigma^2)
inline double feynman_I_6_20b(double theta, double sigma) {
  return std::exp(-theta * theta / (2.0 * sigma * sigma)) / std::sqrt(2.0 * std::numbers::pi * sigma * sigma);
}
/// f(alpha, theta) = 1 + alpha sin(theta)
inline double feynman_I_12_11(double alpha, double theta) { return 1.0 + alpha * std::sin(theta); }
/// f(n, theta2) = arcsin(n sin(theta2))
inline double feynman_I_26_2(double n, double theta2) { return std::asin(n * std::sin(theta2)); }

inline double evaluate_feynman(FeynmanEquation eq, double a, double b) {
  switch (eq) {
    case FeynmanEquation::I_6_20b: return feynman_I_6_20b(a, b);
    case FeynmanEquation::I_12_11: return feynman_I_12_11(a, b);
    case FeynmanEquation::I_26_2: return feynman_I_26_2(a, b);
  }
  throw std::invalid_argument("unknown Feynman equation");
}

/// Default sampling ranges. sigma stays away from 0 for I.6.20b and
/// |n sin(theta2)| <= 0.99 for I.26.2.
inline std::vector<VariableRange> default_ranges(FeynmanEquation eq) {
  constexpr double pi = std::numbers::pi;
  switch (eq) {
    case FeynmanEquation::I_6_20b: return {{-1.0, 1.0}, {0.5, 2.0}};
    case FeynmanEquation::I_12_11: return {{0.0, 1.0}, {0.0, pi}};
    case FeynmanEquation::I_26_2: return {{0.0, 0.99}, {-pi / 2, pi / 2}};
  }
  throw std::invalid_argument("unknown Feynman equation");
}

namespace detail {

template <class F>
Dataset sample_dataset(std::string name, std::vector<VariableRange> ranges, std::size_t n_train,
                       std::size_t n_test, std::uint64_t seed, F&& f) {
  if (n_train < 1 || n_test < 1) throw std::invalid_argument("dataset sizes must be >= 1");
  for (const auto& r : ranges)
    if (!(r.lo < r.hi) || !std::isfinite(r.lo) || !std::isfinite(r.hi))
      throw std::invalid_argument("dataset ranges must be finite with lo < hi");
  Dataset ds;
  ds.name = std::move(name);
  ds.ranges = std::move(ranges);
  ds.seed = seed;
  const std::size_t n = n_train + n_test;
  const std::size_t d = ds.ranges.size();
  ds.X = Matrix(n, d);
  ds.y.resize(n);
  std::mt19937_64 rng(seed);
  std::vector<std::uniform_real_distribution<double>> dists;
  for (const auto& r : ds.ranges) dists.emplace_back(r.lo, r.hi);
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t v = 0; v < d; ++v) ds.X(s, v) = dists[v](rng);
    ds.y[s] = f(ds.X.row(s));
    if (!std::isfinite(ds.y[s])) throw std::domain_error(ds.name + ": target is not finite for a sampled input");
  }
  for (std::size_t s = 0; s < n_train; ++s) ds.train.push_back(s);
  for (std::size_t s = n_train; s < n; ++s) ds.test.push_back(s);
  return ds;
}

}  // namespace detail

inline Dataset gen_hellokan(std::size_t n_train, std::size_t n_test, std::uint64_t seed) {
  return detail::sample_dataset("hellokan", {{-1.0, 1.0}, {-1.0, 1.0}}, n_train, n_test, seed,
                                [](std::span<const double> x) { return hellokan(x[0], x[1]); });
}

inline Dataset gen_feynman(FeynmanEquation eq, std::size_t n_train, std::size_t n_test, std::uint64_t seed,
                           std::optional<std::vector<VariableRange>> ranges = std::nullopt) {
  auto r = ranges ? *ranges : default_ranges(eq);
  if (r.size() != 2) throw std::invalid_argument("Feynman equations take two variables");
  if (eq == FeynmanEquation::I_6_20b && r[1].lo <= 0.0 && r[1].hi >= 0.0)
    throw std::invalid_argument("I.6.20b: sigma range must exclude 0");
  if (eq == FeynmanEquation::I_26_2 && std::max(std::abs(r[0].lo), std::abs(r[0].hi)) > 0.99)
    throw std::invalid_argument("I.26.2: |n| must stay <= 0.99");
  return detail::sample_dataset(std::string(to_string(eq)), std::move(r), n_train, n_test, seed,
                                [eq](std::span<const double> x) { return evaluate_feynman(eq, x[0], x[1]); });
}

inline Dataset gen_feynman(std::string_view which, std::size_t n_train, std::size_t n_test, std::uint64_t seed) {
  return gen_feynman(parse_feynman(which), n_train, n_test, seed);
}

/// By name: "hellokan", "I.6.20b", "I.12.11" or "I.26.2".
inline Dataset generate_dataset(std::string_view name, std::size_t n_train, std::size_t n_test,
                                std::uint64_t seed) {
  if (name == "hellokan") return gen_hellokan(n_train, n_test, seed);
  return gen_feynman(name, n_train, n_test, seed);
}

/// Maps every input variable from its sampling range onto [-1, 1] and keeps
/// the map so results can be related back to the original units.
inline Dataset normalize_inputs(Dataset ds) {
  if (ds.input_map) throw std::invalid_argument("normalize_inputs: dataset is already normalised");
  if (ds.ranges.size() != ds.dim()) throw std::invalid_argument("normalize_inputs: one range per variable required");
  for (const auto& r : ds.ranges)
    if (!(r.hi > r.lo)) throw std::invalid_argument("normalize_inputs: degenerate range");
  InputMap map{ds.ranges};
  ds.X = map.apply(ds.X);
  ds.ranges.assign(ds.dim(), VariableRange{-1.0, 1.0});
  ds.input_map = std::move(map);
  return ds;
}

// CSV: an optional metadata comment, a header x1..xd,y, then train rows
// followed by test rows.
//
//   # mkan-dataset name=hellokan seed=42 n_train=1000 n_test=1000 ranges=-1:1;-1:1

inline void write_dataset_csv(const Dataset& ds, std::ostream& os) {
  os << "# mkan-dataset name=" << ds.name << " seed=" << ds.seed << " n_train=" << ds.train.size()
     << " n_test=" << ds.test.size() << " ranges=";
  for (std::size_t v = 0; v < ds.ranges.size(); ++v)
    os << (v ? ";" : "") << format_double(ds.ranges[v].lo) << ':' << format_double(ds.ranges[v].hi);
  os << '\n';
  for (std::size_t v = 0; v < ds.dim(); ++v) os << 'x' << v + 1 << ',';
  os << "y\n";
  auto emit = [&](std::size_t r) {
    for (std::size_t v = 0; v < ds.dim(); ++v) os << format_double(ds.X(r, v)) << ',';
    os << format_double(ds.y[r]) << '\n';
  };
  for (std::size_t r : ds.train) emit(r);
  for (std::size_t r : ds.test) emit(r);
}

/// Without metadata the first half of the rows (rounded up) is the training
/// split and ranges are the observed min/max.
inline Dataset read_dataset_csv(std::istream& is) {
  Dataset ds;
  ds.name = "csv";
  std::optional<std::size_t> n_train;
  std::vector<VariableRange> meta_ranges;
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  std::size_t d = 0;
  std::vector<double> values;
  std::size_t rows = 0;
  while (std::getline(is, line)) {
    ++line_no;
    std::string_view sv = trim(line);
    if (sv.empty()) continue;
    if (sv.front() == '#') {
      std::istringstream meta{std::string(sv.substr(1))};
      std::string tok;
      while (meta >> tok) {
        const auto eq = tok.find('=');
        if (eq == std::string::npos) continue;
        const std::string key = tok.substr(0, eq);
        const std::string val = tok.substr(eq + 1);
        if (key == "name") ds.name = val;
        else if (key == "seed") ds.seed = static_cast<std::uint64_t>(parse_int(val));
        else if (key == "n_train") n_train = static_cast<std::size_t>(parse_int(val));
        else if (key == "ranges") {
          for (auto part : split(val, ';')) {
            auto lohi = split(part, ':');
            if (lohi.size() != 2) throw std::invalid_argument("dataset csv: bad ranges metadata");
            meta_ranges.push_back({parse_double(lohi[0]), parse_double(lohi[1])});
          }
        }
      }
      continue;
    }
    auto fields = split(sv, ',');
    if (!header_seen) {
      header_seen = true;
      if (fields.size() < 2 || trim(fields.back()) != "y")
        throw std::invalid_argument("dataset csv: header must be x1,...,xd,y");
      d = fields.size() - 1;
      continue;
    }
    if (fields.size() != d + 1)
      throw std::invalid_argument("dataset csv: wrong field count on line " + std::to_string(line_no));
    for (auto f : fields) values.push_back(parse_double(f));
    ++rows;
  }
  if (!header_seen || rows < 2) throw std::invalid_argument("dataset csv: need a header and at least two rows");
  ds.X = Matrix(rows, d);
  ds.y.resize(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t v = 0; v < d; ++v) ds.X(r, v) = values[r * (d + 1) + v];
    ds.y[r] = values[r * (d + 1) + d];
  }
  const std::size_t split_at = n_train.value_or((rows + 1) / 2);
  if (split_at < 1 || split_at >= rows) throw std::invalid_argument("dataset csv: n_train must leave a test split");
  for (std::size_t r = 0; r < rows; ++r) (r < split_at ? ds.train : ds.test).push_back(r);
  if (meta_ranges.size() == d) {
    ds.ranges = meta_ranges;
  } else {
    ds.ranges.assign(d, {std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()});
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t v = 0; v < d; ++v) {
        ds.ranges[v].lo = std::min(ds.ranges[v].lo, ds.X(r, v));
        ds.ranges[v].hi = std::max(ds.ranges[v].hi, ds.X(r, v));
      }
  }
  return ds;
}

}  // namespace mkan
