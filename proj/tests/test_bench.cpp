#include <gtest/gtest.h>

#include <sstream>
#include <string>
#include <vector>

#include "mkan/bench.hpp"

using mkan::Backend;
using mkan::BenchRecord;
using mkan::SweepAxis;

namespace {

BenchRecord record(Backend b, int degree, double spt, int repeat) {
  BenchRecord r;
  r.backend = b;
  r.shape = {2, 5, 1};
  r.degree = degree;
  r.grid = 3;
  r.dataset_size = 100;
  r.steps = 5;
  r.seconds_per_step = spt;
  r.repeat = repeat;
  r.timestamp = "2026-01-01T00:00:00Z";
  return r;
}

std::vector<std::string> lines(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream is(s);
  for (std::string l; std::getline(is, l);) out.push_back(l);
  return out;
}

}  // namespace

TEST(Speedup, Examples) {
  EXPECT_EQ(mkan::speedup(2.0, 1.0), 2.0);
  EXPECT_EQ(mkan::speedup(1.0, 4.0), 0.25);
  EXPECT_EQ(mkan::speedup(3.0, 3.0), 1.0);
}

TEST(Speedup, RejectsNonPositive) {
  EXPECT_THROW(mkan::speedup(0.0, 1.0), std::invalid_argument);
  EXPECT_THROW(mkan::speedup(1.0, 0.0), std::invalid_argument);
  EXPECT_THROW(mkan::speedup(-1.0, 1.0), std::invalid_argument);
}

TEST(Median, OddEvenAndEmpty) {
  EXPECT_EQ(mkan::median({3.0, 1.0, 2.0}), 2.0);
  EXPECT_EQ(mkan::median({4.0, 1.0}), 2.5);
  EXPECT_THROW(mkan::median({}), std::invalid_argument);
}

TEST(SweepAxisNames, RoundTrip) {
  for (SweepAxis a : {SweepAxis::grid, SweepAxis::degree, SweepAxis::dataset_size})
    EXPECT_EQ(mkan::parse_sweep_axis(mkan::to_string(a)), a);
  EXPECT_THROW(mkan::parse_sweep_axis("width"), std::invalid_argument);
}

TEST(SpeedupTable, UsesMedianOfRepeats) {
  std::vector<BenchRecord> rs;
  const double kan2[] = {3.0, 9.0, 4.0}, mat2[] = {1.0, 2.0, 8.0};
  for (int rep = 0; rep < 3; ++rep) {
    rs.push_back(record(Backend::recursive, 2, kan2[rep], rep));
    rs.push_back(record(Backend::matrix, 2, mat2[rep], rep));
    rs.push_back(record(Backend::recursive, 8, 10.0, rep));
    rs.push_back(record(Backend::matrix, 8, 2.0, rep));
  }
  const auto table = mkan::speedup_table(rs, SweepAxis::degree);
  ASSERT_EQ(table.size(), 2u);
  EXPECT_EQ(table[0].axis_value, 2);
  EXPECT_EQ(table[0].kan_spt, 4.0);
  EXPECT_EQ(table[0].matrix_spt, 2.0);
  EXPECT_EQ(table[0].speedup, 2.0);
  EXPECT_EQ(table[1].speedup, 5.0);
  EXPECT_TRUE(mkan::non_decreasing_speedup(table));
}

TEST(SpeedupTable, TrendCheck) {
  std::vector<mkan::SpeedupRow> rows{{1, 0, 0, 1.0}, {2, 0, 0, 1.0}, {3, 0, 0, 2.0}};
  EXPECT_TRUE(mkan::non_decreasing_speedup(rows));
  rows[2].speedup = 0.9;
  EXPECT_FALSE(mkan::non_decreasing_speedup(rows));
  EXPECT_TRUE(mkan::non_decreasing_speedup(std::vector<mkan::SpeedupRow>{}));
}

TEST(BenchCsv, Headers) {
  std::vector<BenchRecord> rs{record(Backend::matrix, 4, 0.5, 0)};
  std::ostringstream os;
  mkan::write_bench_csv(rs, os);
  const auto l = lines(os.str());
  ASSERT_EQ(l.size(), 3u);
  EXPECT_EQ(l[0].rfind("# threads=", 0), 0u);
  EXPECT_EQ(l[1], "backend,shape,degree,grid,dataset_size,steps,seconds_per_step,repeat,timestamp");
  EXPECT_EQ(l[2], "matrix,2-5-1,4,3,100,5,0.5,0,2026-01-01T00:00:00Z");

  std::ostringstream ss;
  std::vector<mkan::SpeedupRow> rows{{4, 1.5, 0.5, 3.0}};
  mkan::write_speedup_csv(rows, ss);
  const auto s = lines(ss.str());
  ASSERT_EQ(s.size(), 3u);
  EXPECT_EQ(s[1], "axis_value,kan_spt,matrix_spt,speedup");
  EXPECT_EQ(s[2], "4,1.5,0.5,3");
}

TEST(RunSweep, OneRecordPerBackendRepeatAndValue) {
  mkan::SweepConfig cfg;
  cfg.spec.shape = {2, 2, 1};
  cfg.spec.grid = 3;
  cfg.dataset_size = 40;
  cfg.repeats = 1;
  cfg.warmup = 0;
  const std::vector<int> one{2};
  const auto rs = mkan::run_sweep(SweepAxis::degree, one, cfg);
  ASSERT_EQ(rs.size(), 2u);
  EXPECT_EQ(rs[0].backend, Backend::recursive);
  EXPECT_EQ(rs[1].backend, Backend::matrix);
  for (const auto& r : rs) {
    EXPECT_EQ(r.degree, 2);
    EXPECT_EQ(r.steps, 5);
    EXPECT_GT(r.seconds_per_step, 0.0);
    EXPECT_EQ(r.timestamp.size(), 20u);
  }
  cfg.repeats = 2;
  const std::vector<int> sizes{20, 30};
  const auto more = mkan::run_sweep(SweepAxis::dataset_size, sizes, cfg);
  ASSERT_EQ(more.size(), 8u);
  EXPECT_EQ(more.back().dataset_size, 30);
  EXPECT_EQ(mkan::speedup_table(more, SweepAxis::dataset_size).size(), 2u);
}

TEST(RunSweep, RejectsBadConfigurations) {
  mkan::SweepConfig cfg;
  const std::vector<int> empty, unsorted{4, 2}, ok{2};
  EXPECT_THROW(mkan::run_sweep(SweepAxis::grid, empty, cfg), std::invalid_argument);
  EXPECT_THROW(mkan::run_sweep(SweepAxis::grid, unsorted, cfg), std::invalid_argument);
  cfg.steps = 4;
  EXPECT_THROW(mkan::run_sweep(SweepAxis::grid, ok, cfg), std::invalid_argument);
  cfg.steps = 5;
  cfg.spec.shape = {3, 1};
  EXPECT_THROW(mkan::run_sweep(SweepAxis::grid, ok, cfg), std::invalid_argument);
  cfg.spec.shape = {2, 1};
  const std::vector<int> zero{0};
  try {
    mkan::run_sweep(SweepAxis::grid, zero, cfg);
    FAIL() << "expected the sweep point to be rejected";
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("grid=0"), std::string::npos);
  }
}
