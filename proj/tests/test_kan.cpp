#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "mkan/grid.hpp"
#include "mkan/kan.hpp"
#include "mkan/log.hpp"
#include "mkan/splines.hpp"

using mkan::Backend;
using mkan::Matrix;
using mkan::Model;
using mkan::NetworkSpec;

namespace {

Matrix random_inputs(std::size_t n, std::size_t d, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(lo, hi);
  Matrix X(n, d);
  for (double& v : X.data) v = dist(rng);
  return X;
}

double rms_diff(const Matrix& a, const Matrix& b) {
  double acc = 0.0;
  for (std::size_t q = 0; q < a.data.size(); ++q) acc += (a.data[q] - b.data[q]) * (a.data[q] - b.data[q]);
  return std::sqrt(acc / static_cast<double>(a.data.size()));
}

// One [1, 1] layer on [lo, hi] with every coefficient equal to c.
Model constant_spline_model(int k, int G, double c, double lo = -1.0, double hi = 1.0) {
  NetworkSpec spec;
  spec.shape = {1, 1};
  spec.degree = k;
  spec.grid = G;
  spec.base_function = mkan::BaseFunction::none;
  Model m = mkan::init_network(spec);
  m.layers[0].grids[0] = mkan::make_uniform_grid(k, G, lo, hi);
  for (double& v : m.layers[0].coeffs) v = c;
  return m;
}

}  // namespace

TEST(InitNetwork, ShapesFollowSpec) {
  NetworkSpec spec;
  spec.shape = {3, 4, 2};
  spec.degree = 2;
  spec.grid = 6;
  const Model m = mkan::init_network(spec);
  ASSERT_EQ(m.layers.size(), 2u);
  EXPECT_EQ(m.layers[0].in_dim, 3);
  EXPECT_EQ(m.layers[0].out_dim, 4);
  EXPECT_EQ(m.layers[1].in_dim, 4);
  EXPECT_EQ(m.layers[1].out_dim, 2);
  EXPECT_EQ(m.layers[0].coeffs.size(), 3u * 4u * 8u);
  EXPECT_EQ(m.layers[1].spline_weight.size(), 8u);
  for (const auto& l : m.layers) {
    EXPECT_NO_THROW(l.validate());
    for (const auto& g : l.grids) {
      EXPECT_EQ(g.lo, -1.0);
      EXPECT_EQ(g.hi, 1.0);
    }
    for (double w : l.base_weight) EXPECT_EQ(w, 1.0);
  }
}

TEST(InitNetwork, DeterministicInSeed) {
  NetworkSpec spec;
  EXPECT_EQ(mkan::init_network(spec), mkan::init_network(spec));
  NetworkSpec other = spec;
  other.seed = spec.seed + 1;
  EXPECT_NE(mkan::init_network(spec).layers[0].coeffs, mkan::init_network(other).layers[0].coeffs);
}

TEST(InitNetwork, IndependentOfBackend) {
  NetworkSpec a, b;
  a.backend = Backend::matrix;
  b.backend = Backend::recursive;
  EXPECT_EQ(mkan::init_network(a).layers, mkan::init_network(b).layers);
}

TEST(InitNetwork, RejectsBadSpecs) {
  NetworkSpec spec;
  spec.shape = {2};
  EXPECT_THROW(mkan::init_network(spec), std::invalid_argument);
  spec.shape = {2, 0, 1};
  EXPECT_THROW(mkan::init_network(spec), std::invalid_argument);
  spec.shape = {2, 1};
  spec.degree = -1;
  EXPECT_THROW(mkan::init_network(spec), std::invalid_argument);
  spec.degree = 3;
  spec.grid = 0;
  EXPECT_THROW(mkan::init_network(spec), std::invalid_argument);
  spec.grid = 5;
  spec.grid_eps = 1.5;
  EXPECT_THROW(mkan::init_network(spec), std::invalid_argument);
}

TEST(ParseEnums, RoundTripAndReject) {
  EXPECT_EQ(mkan::parse_backend("matrix"), Backend::matrix);
  EXPECT_EQ(mkan::parse_backend(mkan::to_string(Backend::recursive)), Backend::recursive);
  EXPECT_THROW(mkan::parse_backend("gpu"), std::invalid_argument);
  EXPECT_EQ(mkan::parse_base_function("none"), mkan::BaseFunction::none);
  EXPECT_THROW(mkan::parse_base_function("relu"), std::invalid_argument);
}

TEST(LayerForward, ZeroParametersGiveZeroOutput) {
  NetworkSpec spec;
  spec.shape = {2, 3};
  Model m = mkan::init_network(spec);
  auto& l = m.layers[0];
  std::fill(l.coeffs.begin(), l.coeffs.end(), 0.0);
  std::fill(l.base_weight.begin(), l.base_weight.end(), 0.0);
  const Matrix X = random_inputs(10, 2, 1);
  for (Backend b : {Backend::recursive, Backend::matrix}) {
    const Matrix y = mkan::layer_forward(l, X, b);
    for (double v : y.data) EXPECT_EQ(v, 0.0);
  }
}

TEST(LayerForward, ConstantSplinesSumOverInputs) {
  // Two inputs, constant spline c on each edge, no base term: every output is 2c.
  NetworkSpec spec;
  spec.shape = {2, 2};
  Model m = mkan::init_network(spec);
  auto& l = m.layers[0];
  std::fill(l.coeffs.begin(), l.coeffs.end(), 0.75);
  const Matrix X = random_inputs(17, 2, 2);
  for (Backend b : {Backend::recursive, Backend::matrix}) {
    const Matrix y = mkan::layer_forward(l, X, b, mkan::BaseFunction::none);
    for (double v : y.data) EXPECT_NEAR(v, 1.5, 1e-12);
  }
}

TEST(LayerForward, BaseTermIsWeightedSilu) {
  NetworkSpec spec;
  spec.shape = {1, 1};
  Model m = mkan::init_network(spec);
  auto& l = m.layers[0];
  std::fill(l.coeffs.begin(), l.coeffs.end(), 0.0);
  l.base_weight[0] = 2.0;
  Matrix X(1, 1);
  X(0, 0) = 0.5;
  const double want = 2.0 * 0.5 / (1.0 + std::exp(-0.5));
  EXPECT_NEAR(mkan::layer_forward(l, X, Backend::matrix)(0, 0), want, 1e-15);
  EXPECT_NEAR(mkan::layer_forward(l, X, Backend::recursive)(0, 0), want, 1e-15);
}

TEST(LayerForward, RejectsWrongWidthAndNonFinite) {
  const Model m = mkan::init_network(NetworkSpec{});
  EXPECT_THROW(mkan::layer_forward(m.layers[0], Matrix(3, 5), Backend::matrix), std::invalid_argument);
  Matrix X(2, 2, 0.0);
  X(1, 1) = std::nan("");
  EXPECT_THROW(mkan::layer_forward(m.layers[0], X, Backend::matrix), std::invalid_argument);
  EXPECT_THROW(mkan::layer_forward(m.layers[0], X, Backend::recursive), std::invalid_argument);
}

TEST(ForwardProperty, BackendsAgreeOnRandomNetworks) {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> depth(1, 3), width(1, 8), deg(0, 10), grid(1, 20);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  for (int t = 0; t < 40; ++t) {
    NetworkSpec spec;
    spec.shape.assign(1, width(rng));
    const int L = depth(rng);
    for (int l = 0; l < L; ++l) spec.shape.push_back(width(rng));
    spec.degree = deg(rng);
    spec.grid = grid(rng);
    spec.seed = rng();
    Model m = mkan::init_network(spec);
    for (auto& l : m.layers)
      for (double& v : l.coeffs) v = unit(rng);
    const Matrix X = random_inputs(64, spec.shape.front(), rng(), -1.2, 1.2);
    const Matrix a = mkan::forward(m, X, Backend::recursive);
    const Matrix b = mkan::forward(m, X, Backend::matrix);
    for (std::size_t q = 0; q < a.data.size(); ++q)
      ASSERT_NEAR(a.data[q], b.data[q], 1e-10 * (1.0 + std::abs(a.data[q])))
          << "k=" << spec.degree << " G=" << spec.grid << " layers=" << L;
  }
}

TEST(ForwardProperty, RowsAreIndependentOfBatch) {
  NetworkSpec spec;
  spec.shape = {2, 4, 3, 1};
  spec.degree = 4;
  const Model m = mkan::init_network(spec);
  const Matrix X = random_inputs(600, 2, 5);
  for (Backend b : {Backend::recursive, Backend::matrix}) {
    const Matrix full = mkan::forward(m, X, b);
    for (std::size_t n : {0ul, 255ul, 256ul, 599ul}) {
      Matrix one(1, 2);
      one(0, 0) = X(n, 0);
      one(0, 1) = X(n, 1);
      EXPECT_EQ(mkan::forward(m, one, b)(0, 0), full(n, 0));
    }
  }
}

TEST(ForwardProperty, DefaultBackendIsSpecBackend) {
  NetworkSpec spec;
  spec.backend = Backend::recursive;
  const Model m = mkan::init_network(spec);
  const Matrix X = random_inputs(20, 2, 8);
  EXPECT_EQ(mkan::forward(m, X).data, mkan::forward(m, X, Backend::recursive).data);
}

TEST(GridUpdate, CoveringDomainIsAFixedPoint) {
  NetworkSpec spec;
  spec.shape = {2, 3, 1};
  Model m = mkan::init_network(spec);
  const Matrix X = random_inputs(500, 2, 21);
  mkan::update_grid_from_samples(m, X, 1.0);
  const Model once = m;
  const Matrix before = mkan::forward(once, X);
  mkan::update_grid_from_samples(m, X, 1.0);
  const Matrix after = mkan::forward(m, X);
  for (std::size_t q = 0; q < before.data.size(); ++q) EXPECT_NEAR(before.data[q], after.data[q], 1e-10);
  for (std::size_t l = 0; l < m.layers.size(); ++l)
    for (std::size_t i = 0; i < m.layers[l].grids.size(); ++i) {
      EXPECT_NEAR(m.layers[l].grids[i].lo, once.layers[l].grids[i].lo, 1e-12);
      EXPECT_NEAR(m.layers[l].grids[i].hi, once.layers[l].grids[i].hi, 1e-12);
    }
}

TEST(GridUpdate, DomainCoversSamplesWithPadding) {
  Model m = constant_spline_model(3, 5, 0.0);
  const Matrix X = random_inputs(200, 1, 3, -3.0, 0.5);
  mkan::update_grid_from_samples(m, X, 1.0);
  const auto col = X.column(0);
  const double mn = *std::min_element(col.begin(), col.end());
  const double mx = *std::max_element(col.begin(), col.end());
  const auto& g = m.layers[0].grids[0];
  EXPECT_NEAR(g.lo, mn - 0.01 * (mx - mn), 1e-12);
  EXPECT_NEAR(g.hi, mx + 0.01 * (mx - mn), 1e-12);
  EXPECT_EQ(g.intervals, 5);
}

TEST(GridUpdate, ConstantFunctionPreserved) {
  Model m = constant_spline_model(3, 5, 0.42);
  const Matrix X = random_inputs(300, 1, 4, -2.0, 2.0);
  mkan::update_grid_from_samples(m, X, 1.0);
  for (double c : m.layers[0].coeffs) EXPECT_NEAR(c, 0.42, 1e-6);
  for (double y : mkan::forward(m, X).data) EXPECT_NEAR(y, 0.42, 1e-6);
}

TEST(GridUpdate, WiderDomainFollowsPolynomialContinuation) {
  // With one interval the cubic spline is a single polynomial, which a cubic
  // spline on any wider domain reproduces.
  Model m = constant_spline_model(3, 1, 0.0);
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  for (double& c : m.layers[0].coeffs) c = unit(rng);
  const Model old = m;
  const auto& g0 = old.layers[0].grids[0];
  const auto& psi = mkan::cached_basis_matrix(4);
  Matrix X(400, 1);
  for (std::size_t n = 0; n < X.rows; ++n) X(n, 0) = -2.0 + 4.0 * static_cast<double>(n) / (X.rows - 1);
  mkan::update_grid_from_samples(m, X, 1.0);
  const Matrix y = mkan::forward(m, X);
  for (std::size_t n = 0; n < X.rows; n += 7) {
    const double want = mkan::spline_value_extended(g0, psi, old.layers[0].coeffs, X(n, 0));
    EXPECT_NEAR(y(n, 0), want, 1e-4) << "x=" << X(n, 0);
  }
}

TEST(GridUpdate, WarnsWhenEpsBelowOne) {
  std::vector<std::string> seen;
  auto prev = mkan::set_log_sink([&](std::string_view msg) { seen.emplace_back(msg); });
  Model m = constant_spline_model(2, 4, 0.1);
  mkan::update_grid_from_samples(m, random_inputs(50, 1, 9), 0.5);
  mkan::set_log_sink(prev);
  ASSERT_EQ(seen.size(), 1u);
  EXPECT_NE(seen[0].find("grid_eps"), std::string::npos);
}

TEST(GridUpdate, RejectsBadArguments) {
  Model m = mkan::init_network(NetworkSpec{});
  EXPECT_THROW(mkan::update_grid_from_samples(m, Matrix(0, 2), 1.0), std::invalid_argument);
  EXPECT_THROW(mkan::update_grid_from_samples(m, Matrix(4, 3), 1.0), std::invalid_argument);
  EXPECT_THROW(mkan::update_grid_from_samples(m, Matrix(4, 2), -0.1), std::invalid_argument);
}

TEST(GridUpdate, ConstantActivationGetsNonEmptyDomain) {
  Model m = constant_spline_model(2, 3, 0.3);
  mkan::update_grid_from_samples(m, Matrix(10, 1, 0.25), 1.0);
  const auto& g = m.layers[0].grids[0];
  EXPECT_LT(g.lo, 0.25);
  EXPECT_GT(g.hi, 0.25);
  EXPECT_NEAR(mkan::forward(m, Matrix(1, 1, 0.25))(0, 0), 0.3, 1e-6);
}

TEST(GridRefine, SameSizeIsUnchanged) {
  Model m = mkan::init_network(NetworkSpec{});
  const Model before = m;
  mkan::refine_grid(m, 5, random_inputs(100, 2, 1));
  EXPECT_EQ(m, before);
}

TEST(GridRefine, RejectsSmallerGrid) {
  Model m = mkan::init_network(NetworkSpec{});
  EXPECT_THROW(mkan::refine_grid(m, 4, random_inputs(10, 2, 1)), std::invalid_argument);
}

TEST(GridRefine, ConstantPreserved) {
  Model m = constant_spline_model(3, 5, -0.6);
  const Matrix X = random_inputs(200, 1, 2);
  mkan::refine_grid(m, 20, X);
  EXPECT_EQ(m.layers[0].intervals(), 20);
  EXPECT_EQ(m.spec.grid, 20);
  for (double y : mkan::forward(m, X).data) EXPECT_NEAR(y, -0.6, 1e-6);
}

TEST(GridRefine, SineFitSurvivesRefinement) {
  // Least-squares fit of sin(pi x) on G = 5, then refine to G = 20.
  Model m = constant_spline_model(3, 5, 0.0);
  Matrix X(400, 1);
  for (std::size_t n = 0; n < X.rows; ++n) X(n, 0) = -1.0 + 2.0 * static_cast<double>(n) / (X.rows - 1);
  auto& l = m.layers[0];
  const int nb = l.num_basis();
  std::vector<double> gram(nb * nb, 0.0), rhs(nb, 0.0);
  for (std::size_t n = 0; n < X.rows; ++n) {
    const auto row = mkan::basis_row(l.grids[0], X(n, 0));
    for (int a = 0; a < nb; ++a) {
      rhs[a] += row[a] * std::sin(M_PI * X(n, 0));
      for (int b = 0; b < nb; ++b) gram[a * nb + b] += row[a] * row[b];
    }
  }
  // Gaussian elimination on the small normal equations.
  for (int c = 0; c < nb; ++c)
    for (int r = c + 1; r < nb; ++r) {
      const double f = gram[r * nb + c] / gram[c * nb + c];
      for (int q = c; q < nb; ++q) gram[r * nb + q] -= f * gram[c * nb + q];
      rhs[r] -= f * rhs[c];
    }
  for (int r = nb - 1; r >= 0; --r) {
    double acc = rhs[r];
    for (int q = r + 1; q < nb; ++q) acc -= gram[r * nb + q] * l.coeffs[q];
    l.coeffs[r] = acc / gram[r * nb + r];
  }
  const Matrix before = mkan::forward(m, X);
  mkan::refine_grid(m, 20, X);
  EXPECT_LE(rms_diff(before, mkan::forward(m, X)), 1e-4);
}

TEST(GridRefine, NetworkPredictionsPreserved) {
  NetworkSpec spec;
  spec.shape = {2, 5, 1};
  Model m = mkan::init_network(spec);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  for (auto& l : m.layers)
    for (double& c : l.coeffs) c = unit(rng);
  const Matrix X = random_inputs(1000, 2, 13);
  const Matrix before = mkan::forward(m, X);
  mkan::refine_grid(m, 20, X);
  EXPECT_LE(rms_diff(before, mkan::forward(m, X)), 1e-4);
}
