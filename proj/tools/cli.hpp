#pragma once

// The `mkan` command line: verify, train, bench, basis, gen-data.
//
// Exit codes: 0 success, 1 a check failed or the run diverged, 2 bad usage.
// Every subcommand echoes its resolved configuration to stderr.

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "mkan/mkan.hpp"

namespace mkan::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailed = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kMaxOrder = 33;

// Thrown while resolving flags; reported as a usage error.
struct UsageError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

inline std::vector<int> parse_int_list(const std::string& s, const char* flag) {
  std::vector<int> out;
  if (trim(s).empty()) return out;
  try {
    for (auto part : split(s, ',')) out.push_back(static_cast<int>(parse_int(part)));
  } catch (const std::invalid_argument&) {
    throw UsageError(std::string(flag) + " expects a comma-separated list of integers, got '" + s + "'");
  }
  return out;
}

inline std::string join(const std::vector<int>& v) {
  std::string s;
  for (std::size_t q = 0; q < v.size(); ++q) s += (q ? "," : "") + std::to_string(v[q]);
  return s;
}

inline bool is_generated_dataset(const std::string& name) {
  return name == "hellokan" || name == "I.6.20b" || name == "I.12.11" || name == "I.26.2";
}

inline std::ofstream open_output(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write '" + path.string() + "'");
  return os;
}

// (p-1)! * Psi^p as exact integers. Dividing the recursion through by (p-1)!
// leaves only integer products, so no rounding is involved.
inline std::vector<__int128> basis_numerators(int order) {
  std::vector<__int128> cur{1};
  for (int p = 2; p <= order; ++p) {
    const int q = p - 1;  // previous order
    std::vector<__int128> next(static_cast<std::size_t>(p) * p, 0);
    for (int r = 0; r < p; ++r)
      for (int c = 0; c < q; ++c) {
        const __int128 upper = r < q ? cur[static_cast<std::size_t>(r) * q + c] : 0;
        const __int128 lower = r > 0 ? cur[static_cast<std::size_t>(r - 1) * q + c] : 0;
        next[static_cast<std::size_t>(r) * p + c] += upper * (c + 1) - lower;
        next[static_cast<std::size_t>(r) * p + c + 1] += upper * (p - 2 - c) + lower;
      }
    cur = std::move(next);
  }
  return cur;
}

inline std::string to_string_i128(__int128 v) {
  if (v == 0) return "0";
  const bool neg = v < 0;
  unsigned __int128 u = neg ? static_cast<unsigned __int128>(-(v + 1)) + 1 : static_cast<unsigned __int128>(v);
  std::string s;
  while (u) {
    s.insert(s.begin(), static_cast<char>('0' + static_cast<int>(u % 10)));
    u /= 10;
  }
  return neg ? "-" + s : s;
}

inline std::string factorial_string(int n) {
  __int128 f = 1;
  for (int i = 2; i <= n; ++i) f *= i;
  return to_string_i128(f);
}

inline void print_rows(std::ostream& out, int p, const auto& cell) {
  for (int r = 0; r < p; ++r) {
    out << '[';
    for (int c = 0; c < p; ++c) out << (c ? ", " : "") << cell(r, c);
    out << "]\n";
  }
}

struct Options {
  // verify
  VerifyConfig verify;
  // train / bench / gen-data
  std::string dataset = "hellokan";
  std::string shape = "2,5,1";
  int degree = 3;
  int grid = 5;
  int steps = 100;
  double lr = 1e-3;
  std::uint64_t seed = 42;
  std::string backend = "matrix";
  std::string base_function = "silu";
  std::string grid_update_steps;
  double grid_eps = 1.0;
  int n_train = 1000;
  int n_test = 1000;
  bool no_normalize = false;
  std::string out;
  // bench
  std::string axis;
  std::string values;
  int bench_steps = 5;
  int warmup = 2;
  int repeats = 3;
  int dataset_size = 1000;
  bool check_trend = false;
  // basis
  int order = 0;
};

inline Dataset load_dataset(const Options& o) {
  if (is_generated_dataset(o.dataset)) {
    if (o.n_train < 1 || o.n_test < 1) throw UsageError("--n-train and --n-test must be >= 1");
    Dataset ds = generate_dataset(o.dataset, o.n_train, o.n_test, o.seed);
    return o.no_normalize ? ds : normalize_inputs(std::move(ds));
  }
  std::ifstream is(o.dataset);
  if (!is) throw UsageError("--dataset: '" + o.dataset + "' is neither a known dataset nor a readable file");
  Dataset ds = read_dataset_csv(is);
  bool degenerate = false;
  for (const auto& r : ds.ranges) degenerate = degenerate || !(r.hi > r.lo);
  return (o.no_normalize || degenerate) ? ds : normalize_inputs(std::move(ds));
}

inline NetworkSpec resolve_spec(const Options& o) {
  NetworkSpec spec;
  spec.shape = parse_int_list(o.shape, "--shape");
  if (spec.shape.size() < 2) throw UsageError("--shape needs at least two widths, e.g. 2,5,1");
  spec.degree = o.degree;
  spec.grid = o.grid;
  spec.grid_eps = o.grid_eps;
  spec.seed = o.seed;
  try {
    spec.backend = parse_backend(o.backend);
    spec.base_function = parse_base_function(o.base_function);
    spec.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  return spec;
}

inline int cmd_verify(const Options& o, std::ostream& out, std::ostream& err) {
  try {
    o.verify.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  err << "mkan verify: max_degree=" << o.verify.max_degree << " max_grid=" << o.verify.max_grid
      << " samples=" << o.verify.samples << " seed=" << o.verify.seed << " threads=" << worker_threads() << '\n';
  bool all = true;
  for (const auto& r : run_verification(o.verify)) {
    all = all && r.passed;
    out << (r.passed ? "PASS " : "FAIL ") << r.name << " (worst error " << r.worst << "x tolerance)";
    if (!r.passed) out << ": " << r.detail;
    out << '\n';
  }
  return all ? kExitOk : kExitFailed;
}

inline int cmd_train(const Options& o, std::ostream& out, std::ostream& err) {
  const NetworkSpec spec = resolve_spec(o);
  Dataset ds = load_dataset(o);
  if (spec.shape.front() != static_cast<int>(ds.dim()))
    throw UsageError("--shape starts with " + std::to_string(spec.shape.front()) + " but the dataset has " +
                     std::to_string(ds.dim()) + " inputs");
  if (spec.shape.back() != 1) throw UsageError("--shape must end in 1 (single regression target)");
  TrainConfig tc;
  tc.steps = o.steps;
  tc.learning_rate = o.lr;
  tc.seed = o.seed;
  tc.backend = spec.backend;
  tc.grid_update_steps = parse_int_list(o.grid_update_steps, "--grid-update-steps");
  tc.grid_eps = o.grid_eps;
  try {
    tc.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  const std::filesystem::path dir = std::filesystem::path(o.out.empty() ? "train_out" : o.out);
  err << "mkan train: dataset=" << ds.name << " n_train=" << ds.train.size() << " n_test=" << ds.test.size()
      << " normalize=" << (ds.input_map ? "yes" : "no") << " shape=" << join(spec.shape)
      << " degree=" << spec.degree << " grid=" << spec.grid << " steps=" << tc.steps
      << " lr=" << format_double(tc.learning_rate) << " seed=" << spec.seed << " backend=" << to_string(spec.backend)
      << " base_function=" << to_string(spec.base_function) << " grid_update_steps=" << join(tc.grid_update_steps)
      << " grid_eps=" << format_double(tc.grid_eps) << " out=" << dir.string() << " threads=" << worker_threads()
      << '\n';

  TrainResult res;
  try {
    res = train(init_network(spec), ds, tc);
  } catch (const DivergenceError& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailed;
  } catch (const NonFiniteError& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailed;
  }
  {
    auto os = open_output(dir / "steps.csv");
    write_step_log_csv(res.log, os);
  }
  save_model(res.model, (dir / "model.mkan").string());
  out << "initial_test_rmse " << format_double(res.log.front().test_rmse) << '\n'
      << "final_train_rmse " << format_double(res.final_train_rmse) << '\n'
      << "final_test_rmse " << format_double(res.final_test_rmse) << '\n';
  return kExitOk;
}

inline int cmd_bench(const Options& o, std::ostream& out, std::ostream& err) {
  SweepConfig sc;
  sc.spec = resolve_spec(o);
  sc.steps = o.bench_steps;
  sc.warmup = o.warmup;
  sc.repeats = o.repeats;
  sc.dataset_size = o.dataset_size;
  sc.learning_rate = o.lr;
  SweepAxis axis{};
  try {
    axis = parse_sweep_axis(o.axis);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  const std::vector<int> values = parse_int_list(o.values, "--values");
  if (values.empty()) throw UsageError("--values needs at least one value");
  if (!std::is_sorted(values.begin(), values.end())) throw UsageError("--values must be ascending");
  if (sc.steps < 5) throw UsageError("--steps must be >= 5 for benchmarking");
  if (sc.warmup < 0 || sc.repeats < 1) throw UsageError("--warmup must be >= 0 and --repeats >= 1");
  if (sc.spec.shape.front() != 2 || sc.spec.shape.back() != 1)
    throw UsageError("--shape must be [2, ..., 1] for the benchmark dataset");
  const std::filesystem::path dir = std::filesystem::path(o.out.empty() ? "bench_out" : o.out);
  err << "mkan bench: axis=" << to_string(axis) << " values=" << join(values) << " shape=" << join(sc.spec.shape)
      << " degree=" << sc.spec.degree << " grid=" << sc.spec.grid << " dataset_size=" << sc.dataset_size
      << " steps=" << sc.steps << " warmup=" << sc.warmup << " repeats=" << sc.repeats << " seed=" << sc.spec.seed
      << " out=" << dir.string() << " threads=" << worker_threads() << '\n';

  const auto records = run_sweep(axis, values, sc);
  const auto table = speedup_table(records, axis);
  {
    auto os = open_output(dir / "bench.csv");
    write_bench_csv(records, os);
  }
  {
    auto os = open_output(dir / "speedup.csv");
    write_speedup_csv(table, os);
  }
  write_speedup_csv(table, out);
  if (o.check_trend && !non_decreasing_speedup(table)) {
    err << "trend check failed: speedup decreases along " << to_string(axis) << '\n';
    return kExitFailed;
  }
  return kExitOk;
}

inline int cmd_basis(const Options& o, std::ostream& out, std::ostream& err) {
  if (o.order < 1 || o.order > kMaxOrder)
    throw UsageError("--order must lie in [1, " + std::to_string(kMaxOrder) + "]");
  err << "mkan basis: order=" << o.order << '\n';
  const int p = o.order;
  const BasisMatrix& psi = cached_basis_matrix(p);
  out << "order " << p << " (degree " << p - 1 << ")\n";
  print_rows(out, p, [&](int r, int c) { return format_double(psi(r, c) == 0.0 ? 0.0 : psi(r, c)); });
  const auto num = basis_numerators(p);
  out << "numerators over " << p - 1 << "! = " << factorial_string(p - 1) << ":\n";
  print_rows(out, p, [&](int r, int c) { return to_string_i128(num[static_cast<std::size_t>(r) * p + c]); });
  return kExitOk;
}

inline int cmd_gen_data(const Options& o, std::ostream& out, std::ostream& err) {
  if (!is_generated_dataset(o.dataset)) throw UsageError("--dataset must be hellokan, I.6.20b, I.12.11 or I.26.2");
  if (o.n_train < 1 || o.n_test < 1) throw UsageError("--n-train and --n-test must be >= 1");
  err << "mkan gen-data: dataset=" << o.dataset << " n_train=" << o.n_train << " n_test=" << o.n_test
      << " seed=" << o.seed << " out=" << (o.out.empty() ? "-" : o.out) << '\n';
  const Dataset ds = generate_dataset(o.dataset, o.n_train, o.n_test, o.seed);
  if (o.out.empty() || o.out == "-") {
    write_dataset_csv(ds, out);
  } else {
    auto os = open_output(o.out);
    write_dataset_csv(ds, os);
  }
  return kExitOk;
}

inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Kolmogorov-Arnold networks with recursive and basis-matrix B-spline backends", "mkan"};
  app.require_subcommand(1);
  Options o;

  auto* verify = app.add_subcommand("verify", "Check both backends against the reference computations");
  verify->add_option("--max-degree", o.verify.max_degree, "Largest spline degree checked (<= 32)");
  verify->add_option("--max-grid", o.verify.max_grid, "Largest grid size checked");
  verify->add_option("--samples", o.verify.samples, "Inputs per configuration");
  verify->add_option("--seed", o.verify.seed, "Random seed");

  auto* trainc = app.add_subcommand("train", "Train a network and write its step log and model");
  trainc->add_option("--dataset", o.dataset, "hellokan, I.6.20b, I.12.11, I.26.2 or a CSV path");
  trainc->add_option("--shape", o.shape, "Layer widths, e.g. 2,5,1");
  trainc->add_option("--degree", o.degree, "Spline degree k");
  trainc->add_option("--grid", o.grid, "Grid intervals G");
  trainc->add_option("--steps", o.steps, "Training steps");
  trainc->add_option("--lr", o.lr, "Adam learning rate");
  trainc->add_option("--seed", o.seed, "Seed for data and initialisation");
  trainc->add_option("--backend", o.backend, "recursive or matrix");
  trainc->add_option("--base-function", o.base_function, "silu or none");
  trainc->add_option("--grid-update-steps", o.grid_update_steps, "Steps before which the grid is updated, e.g. 0,50");
  trainc->add_option("--grid-eps", o.grid_eps, "Grid update blend in [0, 1]");
  trainc->add_option("--n-train", o.n_train, "Training samples for generated datasets");
  trainc->add_option("--n-test", o.n_test, "Test samples for generated datasets");
  trainc->add_flag("--no-normalize", o.no_normalize, "Keep inputs in their sampling units");
  trainc->add_option("--out", o.out, "Output directory for steps.csv and model.mkan");

  auto* bench = app.add_subcommand("bench", "Time both backends over a sweep");
  bench->add_option("--axis", o.axis, "grid, degree or dataset_size")->required();
  bench->add_option("--values", o.values, "Ascending sweep values, e.g. 2,4,8")->required();
  bench->add_option("--shape", o.shape, "Layer widths");
  bench->add_option("--degree", o.degree, "Spline degree when not swept");
  bench->add_option("--grid", o.grid, "Grid intervals when not swept");
  bench->add_option("--dataset-size", o.dataset_size, "Training samples when not swept");
  bench->add_option("--steps", o.bench_steps, "Timed steps per run (>= 5)");
  bench->add_option("--warmup", o.warmup, "Untimed steps before each run");
  bench->add_option("--repeats", o.repeats, "Repeats per point (median reported)");
  bench->add_option("--seed", o.seed, "Random seed");
  bench->add_option("--out", o.out, "Output directory for bench.csv and speedup.csv");
  bench->add_flag("--check-trend", o.check_trend, "Exit 1 unless the speedup is non-decreasing");

  auto* basis = app.add_subcommand("basis", "Print the basis matrix of one order");
  basis->add_option("--order", o.order, "Spline order k + 1")->required();

  auto* gen = app.add_subcommand("gen-data", "Write a generated dataset as CSV");
  gen->add_option("--dataset", o.dataset, "hellokan, I.6.20b, I.12.11 or I.26.2");
  gen->add_option("--n-train", o.n_train, "Training samples");
  gen->add_option("--n-test", o.n_test, "Test samples");
  gen->add_option("--seed", o.seed, "Random seed");
  gen->add_option("--out", o.out, "Output file (stdout when omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
  }

  try {
    configure_threads_from_env();
    if (verify->parsed()) return cmd_verify(o, out, err);
    if (trainc->parsed()) return cmd_train(o, out, err);
    if (bench->parsed()) return cmd_bench(o, out, err);
    if (basis->parsed()) return cmd_basis(o, out, err);
    return cmd_gen_data(o, out, err);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailed;
  }
}

}  // namespace mkan::cli
