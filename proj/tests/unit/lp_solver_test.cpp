#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "pere/errors.hpp"
#include "pere/lp_solver.hpp"

using pere::lp::LinearProgram;
using pere::lp::Status;

namespace {

LinearProgram make(int n, int m) {
  LinearProgram lp;
  lp.objective = Eigen::VectorXd::Zero(n);
  lp.constraints = Eigen::MatrixXd::Zero(m, n);
  lp.rhs = Eigen::VectorXd::Zero(m);
  lp.lower = Eigen::VectorXd::Zero(n);
  lp.upper = Eigen::VectorXd::Constant(n, pere::lp::kInfinity);
  return lp;
}

// Best objective over all vertices of a 2-variable LP: intersections of every
// pair of lines drawn from the rows and the bounds.
double vertex_enumeration_2d(const LinearProgram& lp) {
  std::vector<Eigen::Vector3d> lines;  // a x + b y = c
  for (Eigen::Index i = 0; i < lp.constraints.rows(); ++i)
    lines.emplace_back(lp.constraints(i, 0), lp.constraints(i, 1), lp.rhs[i]);
  for (int j = 0; j < 2; ++j) {
    Eigen::Vector3d lo = Eigen::Vector3d::Zero(), hi = Eigen::Vector3d::Zero();
    lo[j] = 1;
    lo[2] = lp.lower[j];
    hi[j] = 1;
    hi[2] = lp.upper[j];
    lines.push_back(lo);
    lines.push_back(hi);
  }
  double best = -pere::lp::kInfinity;
  for (std::size_t a = 0; a < lines.size(); ++a) {
    for (std::size_t b = a + 1; b < lines.size(); ++b) {
      Eigen::Matrix2d M;
      M << lines[a][0], lines[a][1], lines[b][0], lines[b][1];
      if (std::abs(M.determinant()) < 1e-12) continue;
      const Eigen::Vector2d x = M.inverse() * Eigen::Vector2d(lines[a][2], lines[b][2]);
      bool ok = (x.array() >= lp.lower.array() - 1e-9).all() && (x.array() <= lp.upper.array() + 1e-9).all();
      ok = ok && ((lp.constraints * x - lp.rhs).array() <= 1e-9).all();
      if (ok) best = std::max(best, lp.objective.dot(x));
    }
  }
  return best;
}

}  // namespace

TEST_CASE("solve_lp: single bounded variable") {
  auto lp = make(1, 1);
  lp.objective << 1;
  lp.constraints << 1;
  lp.rhs << 3;
  lp.upper << 10;
  const auto sol = pere::lp::solve_lp(lp);
  REQUIRE(sol.status == Status::kOptimal);
  CHECK(sol.x[0] == doctest::Approx(3.0));
  CHECK(sol.objective_value == doctest::Approx(3.0));
}

TEST_CASE("solve_lp: contradictory rows are infeasible") {
  auto lp = make(1, 2);
  lp.objective << 1;
  lp.constraints << 1, -1;
  lp.rhs << 1, -2;
  CHECK(pere::lp::solve_lp(lp).status == Status::kInfeasible);
}

TEST_CASE("solve_lp: unbounded ray") {
  auto lp = make(2, 1);
  lp.objective << 1, 1;
  lp.constraints << 1, -1;
  lp.rhs << 1;
  CHECK(pere::lp::solve_lp(lp).status == Status::kUnbounded);
}

TEST_CASE("solve_lp: free variables and negative lower bounds") {
  auto lp = make(2, 2);
  lp.objective << 1, 2;
  lp.constraints << 1, 1, -1, 1;
  lp.rhs << 4, 2;
  lp.lower << -pere::lp::kInfinity, -5;
  const auto sol = pere::lp::solve_lp(lp);
  REQUIRE(sol.status == Status::kOptimal);
  // optimum at intersection x + y = 4, y - x = 2 -> (1, 3)
  CHECK(sol.x[0] == doctest::Approx(1.0));
  CHECK(sol.x[1] == doctest::Approx(3.0));
}

TEST_CASE("solve_lp: malformed dimensions") {
  auto lp = make(2, 1);
  lp.rhs = Eigen::VectorXd::Zero(3);
  CHECK_THROWS_AS(pere::lp::solve_lp(lp), pere::InvalidInput);
  auto lp2 = make(1, 0);
  lp2.lower << 2;
  lp2.upper << 1;
  CHECK_THROWS_AS(pere::lp::solve_lp(lp2), pere::InvalidInput);
}

TEST_CASE("solve_lp: matches vertex enumeration on random 2-variable programs") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> coef(-1.0, 1.0);
  int optimal = 0;
  for (int trial = 0; trial < 300; ++trial) {
    auto lp = make(2, 5);
    for (Eigen::Index i = 0; i < 5; ++i) {
      lp.constraints(i, 0) = coef(rng);
      lp.constraints(i, 1) = coef(rng);
      lp.rhs[i] = coef(rng);
    }
    lp.objective << coef(rng), coef(rng);
    lp.lower << -1, -1;
    lp.upper << 1, 1;
    const auto sol = pere::lp::solve_lp(lp);
    const double ref = vertex_enumeration_2d(lp);
    if (ref == -pere::lp::kInfinity) {
      CHECK(sol.status == Status::kInfeasible);
      continue;
    }
    REQUIRE(sol.status == Status::kOptimal);
    ++optimal;
    CHECK(sol.objective_value == doctest::Approx(ref).epsilon(1e-7));
    CHECK(((lp.constraints * sol.x - lp.rhs).array() <= 1e-7).all());
  }
  CHECK(optimal > 50);
}

TEST_CASE("solve_lp: weak duality spot check and determinism") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> coef(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 6, m = 10;
    auto lp = make(n, m);
    for (Eigen::Index i = 0; i < m; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) lp.constraints(i, j) = coef(rng);
      lp.rhs[i] = 1.0 + coef(rng);
    }
    for (Eigen::Index j = 0; j < n; ++j) lp.objective[j] = coef(rng) - 0.2;
    const auto sol = pere::lp::solve_lp(lp);
    REQUIRE(sol.status == Status::kOptimal);
    for (int s = 0; s < 200; ++s) {
      Eigen::VectorXd x(n);
      for (Eigen::Index j = 0; j < n; ++j) x[j] = coef(rng) * 0.5;
      if (((lp.constraints * x - lp.rhs).array() <= 0).all()) CHECK(lp.objective.dot(x) <= sol.objective_value + 1e-9);
    }
    const auto again = pere::lp::solve_lp(lp);
    CHECK(again.x == sol.x);
    CHECK(again.objective_value == sol.objective_value);
  }
}

TEST_CASE("solve_mip_binary: no binaries equals solve_lp") {
  auto lp = make(2, 2);
  lp.objective << 1, 1;
  lp.constraints << 1, 2, 3, 1;
  lp.rhs << 4, 6;
  const auto a = pere::lp::solve_lp(lp);
  const auto b = pere::lp::solve_mip_binary(lp, {}, {0});
  CHECK(a.x == b.solution.x);
  CHECK(b.binary_values.empty());
}

TEST_CASE("solve_mip_binary: budget zero forces binaries to zero") {
  // maximize x + y + z, x <= 0.3 + 0.5 y, x <= 0.3 + 0.5 z, binaries y, z
  auto lp = make(3, 2);
  lp.objective << 1, 1, 1;
  lp.constraints << 1, -0.5, 0, 1, 0, -0.5;
  lp.rhs << 0.3, 0.3;
  lp.upper << 1, 1, 1;
  std::vector<std::size_t> bins{1, 2};
  const auto mip = pere::lp::solve_mip_binary(lp, bins, {0});
  REQUIRE(mip.solution.status == Status::kOptimal);
  CHECK(mip.binary_values == std::vector<int>{0, 0});
  CHECK(mip.solution.x[0] == doctest::Approx(0.3));
}

TEST_CASE("solve_mip_binary: equals exhaustive enumeration on random instances") {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> coef(-1.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t k = 1 + trial % 8;
    const auto n = static_cast<int>(2 + k);
    const auto m = static_cast<int>(k + 2);
    auto lp = make(n, m);
    for (int i = 0; i < m; ++i) {
      lp.constraints(i, 0) = coef(rng);
      lp.constraints(i, 1) = coef(rng);
      lp.rhs[i] = 0.2 * coef(rng);
      if (static_cast<std::size_t>(i) < k) lp.constraints(i, 2 + i) = -3.0;
    }
    lp.objective << coef(rng), coef(rng);
    for (std::size_t b = 0; b < k; ++b) lp.objective[static_cast<Eigen::Index>(2 + b)] = 0.05 * coef(rng);
    lp.lower.head(2) << -1, -1;
    lp.upper = Eigen::VectorXd::Ones(n);
    std::vector<std::size_t> bins;
    for (std::size_t b = 0; b < k; ++b) bins.push_back(2 + b);
    const std::size_t budget = trial % 3;
    const double ref = oracle::exhaustive_mip(lp, bins, budget);
    const auto mip = pere::lp::solve_mip_binary(lp, bins, {budget});
    if (ref == -pere::lp::kInfinity) {
      CHECK(mip.solution.status == Status::kInfeasible);
      continue;
    }
    REQUIRE(mip.solution.status == Status::kOptimal);
    CHECK(mip.solution.objective_value == doctest::Approx(ref).epsilon(1e-7));
    std::size_t ones = 0;
    for (int v : mip.binary_values) ones += static_cast<std::size_t>(v);
    CHECK(ones <= budget);
  }
}
