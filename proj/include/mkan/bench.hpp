#pragma once

// Seconds-per-step sweeps over grid size, spline degree, or dataset size, run
// for both backends on identical seeded data, plus the derived speedup table.

#include <algorithm>
#include <chrono>
#include <cstddef>
#include <ctime>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "mkan/datasets.hpp"
#include "mkan/format.hpp"
#include "mkan/kan.hpp"
#include "mkan/parallel.hpp"
#include "mkan/training.hpp"

namespace mkan {

enum class SweepAxis { grid, degree, dataset_size };

inline std::string_view to_string(SweepAxis a) {
  switch (a) {
    case SweepAxis::grid: return "grid";
    case SweepAxis::degree: return "degree";
    case SweepAxis::dataset_size: return "dataset_size";
  }
  return "?";
}

inline SweepAxis parse_sweep_axis(std::string_view s) {
  if (s == "grid") return SweepAxis::grid;
  if (s == "degree") return SweepAxis::degree;
  if (s == "dataset_size") return SweepAxis::dataset_size;
  throw std::invalid_argument("unknown sweep axis '" + std::string(s) + "'");
}

struct BenchRecord {
  Backend backend = Backend::matrix;
  std::vector<int> shape;
  int degree = 0;
  int grid = 0;
  int dataset_size = 0;
  int steps = 0;                  // timed steps, warmup excluded
  double seconds_per_step = 0.0;  // mean over the timed steps
  int repeat = 0;
  std::string timestamp;  // UTC, ISO 8601
};

struct SweepConfig {
  NetworkSpec spec;     // shape, degree, grid, seed; backend is overridden
  int steps = 5;        // timed steps per run
  int warmup = 2;
  int repeats = 3;
  int dataset_size = 1000;  // training samples
  double learning_rate = 1e-3;
};

inline std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// Mean seconds per step of `steps` timed training steps after `warmup`
/// untimed ones.
inline double time_training(const NetworkSpec& spec, const Dataset& ds, Backend backend, int warmup, int steps,
                            double learning_rate) {
  TrainConfig tc;
  tc.steps = warmup + steps;
  tc.learning_rate = learning_rate;
  tc.seed = spec.seed;
  tc.backend = backend;
  NetworkSpec s = spec;
  s.backend = backend;
  const TrainResult res = train(init_network(s), ds, tc);
  double total = 0.0;
  for (std::size_t q = warmup; q < res.log.size(); ++q) total += res.log[q].seconds;
  return total / steps;
}

/// One record per (value, backend, repeat). Backends alternate within each
/// repeat so slow drift in the machine affects both alike.
inline std::vector<BenchRecord> run_sweep(SweepAxis axis, std::span<const int> values, const SweepConfig& cfg) {
  if (values.empty()) throw std::invalid_argument("run_sweep: no sweep values");
  if (!std::is_sorted(values.begin(), values.end()))
    throw std::invalid_argument("run_sweep: sweep values must be ascending");
  if (cfg.steps < 5) throw std::invalid_argument("run_sweep: at least 5 timed steps are required");
  if (cfg.warmup < 0 || cfg.repeats < 1) throw std::invalid_argument("run_sweep: bad warmup/repeat count");
  if (cfg.spec.shape.front() != 2 || cfg.spec.shape.back() != 1)
    throw std::invalid_argument("run_sweep: the hellokan data needs a [2, ..., 1] shape");

  std::vector<BenchRecord> out;
  for (int v : values) {
    NetworkSpec spec = cfg.spec;
    int n = cfg.dataset_size;
    switch (axis) {
      case SweepAxis::grid: spec.grid = v; break;
      case SweepAxis::degree: spec.degree = v; break;
      case SweepAxis::dataset_size: n = v; break;
    }
    try {
      spec.validate();
      if (n < 1) throw std::invalid_argument("dataset size must be >= 1");
      const Dataset ds = gen_hellokan(n, std::max(1, n / 10), spec.seed);
      for (int rep = 0; rep < cfg.repeats; ++rep)
        for (Backend b : {Backend::recursive, Backend::matrix}) {
          BenchRecord r;
          r.backend = b;
          r.shape = spec.shape;
          r.degree = spec.degree;
          r.grid = spec.grid;
          r.dataset_size = n;
          r.steps = cfg.steps;
          r.seconds_per_step = time_training(spec, ds, b, cfg.warmup, cfg.steps, cfg.learning_rate);
          r.repeat = rep;
          r.timestamp = utc_timestamp();
          out.push_back(std::move(r));
        }
    } catch (const std::exception& e) {
      throw std::runtime_error("sweep point " + std::string(to_string(axis)) + "=" + std::to_string(v) + ": " +
                               e.what());
    }
  }
  return out;
}

inline double speedup(double kan_spt, double matrix_spt) {
  if (!(kan_spt > 0.0) || !(matrix_spt > 0.0)) throw std::invalid_argument("speedup: timings must be > 0");
  return kan_spt / matrix_spt;
}

inline int axis_value(const BenchRecord& r, SweepAxis axis) {
  switch (axis) {
    case SweepAxis::grid: return r.grid;
    case SweepAxis::degree: return r.degree;
    case SweepAxis::dataset_size: return r.dataset_size;
  }
  return 0;
}

inline double median(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("median of an empty set");
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

/// Median seconds-per-step over repeats for one backend at one axis value.
inline double median_seconds(std::span<const BenchRecord> records, SweepAxis axis, int value, Backend backend) {
  std::vector<double> v;
  for (const auto& r : records)
    if (r.backend == backend && axis_value(r, axis) == value) v.push_back(r.seconds_per_step);
  return median(v);
}

struct SpeedupRow {
  int axis_value = 0;
  double kan_spt = 0.0;
  double matrix_spt = 0.0;
  double speedup = 0.0;
};

inline std::vector<SpeedupRow> speedup_table(std::span<const BenchRecord> records, SweepAxis axis) {
  std::vector<int> values;
  for (const auto& r : records) values.push_back(axis_value(r, axis));
  std::sort(values.begin(), values.end());
  values.erase(std::unique(values.begin(), values.end()), values.end());
  std::vector<SpeedupRow> rows;
  for (int v : values) {
    SpeedupRow row;
    row.axis_value = v;
    row.kan_spt = median_seconds(records, axis, v, Backend::recursive);
    row.matrix_spt = median_seconds(records, axis, v, Backend::matrix);
    row.speedup = speedup(row.kan_spt, row.matrix_spt);
    rows.push_back(row);
  }
  return rows;
}

inline std::string shape_string(std::span<const int> shape) {
  std::string s;
  for (std::size_t q = 0; q < shape.size(); ++q) {
    if (q) s += '-';
    s += std::to_string(shape[q]);
  }
  return s;
}

inline void write_bench_csv(std::span<const BenchRecord> records, std::ostream& os) {
  os << "# threads=" << worker_threads() << '\n';
  os << "backend,shape,degree,grid,dataset_size,steps,seconds_per_step,repeat,timestamp\n";
  for (const auto& r : records)
    os << to_string(r.backend) << ',' << shape_string(r.shape) << ',' << r.degree << ',' << r.grid << ','
       << r.dataset_size << ',' << r.steps << ',' << format_double(r.seconds_per_step) << ',' << r.repeat << ','
       << r.timestamp << '\n';
}

inline void write_speedup_csv(std::span<const SpeedupRow> rows, std::ostream& os) {
  os << "# threads=" << worker_threads() << '\n';
  os << "axis_value,kan_spt,matrix_spt,speedup\n";
  for (const auto& r : rows)
    os << r.axis_value << ',' << format_double(r.kan_spt) << ',' << format_double(r.matrix_spt) << ','
       << format_double(r.speedup) << '\n';
}

inline bool non_decreasing_speedup(std::span<const SpeedupRow> rows) {
  for (std::size_t q = 1; q < rows.size(); ++q)
    if (rows[q].speedup < rows[q - 1].speedup) return false;
  return true;
}

}  // namespace mkan
