#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "pere/data.hpp"
#include "pere/dpp.hpp"
#include "pere/errors.hpp"

namespace {

Eigen::MatrixXd random_psd(std::mt19937_64& rng, std::size_t n, std::size_t rank) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Eigen::MatrixXd v(static_cast<Eigen::Index>(rank), static_cast<Eigen::Index>(n));
  for (auto& x : v.reshaped()) x = g(rng);
  Eigen::MatrixXd L = v.transpose() * v;
  for (Eigen::Index i = 0; i < L.rows(); ++i) L(i, i) += unit(rng);
  return L;
}

double det_after_swap(const Eigen::MatrixXd& L, std::vector<std::size_t> s, std::size_t slot, std::size_t q) {
  s[slot] = q;
  return oracle::det_of(L, s);
}

}  // namespace

TEST_CASE("build_ensemble: Gram matrix plus popularity diagonal") {
  Eigen::MatrixXd emb(2, 2);
  emb << 1, 0, 0, 1;
  const pere::Catalog cat({"a", "b"}, emb, Eigen::Vector2d(1.0, 1.0));
  const auto e = pere::build_ensemble(cat, 2);
  CHECK(e.kernel.isApprox(Eigen::Matrix2d::Identity() * 2.0));

  Eigen::MatrixXd one(2, 1);
  one << 1, 0;
  const pere::Catalog single({"x"}, one, Eigen::VectorXd::Constant(1, 0.5));
  CHECK(pere::build_ensemble(single, 1).kernel(0, 0) == doctest::Approx(1.5));
  CHECK_THROWS_AS(pere::build_ensemble(single, 2), pere::InvalidInput);
}

TEST_CASE("make_ensemble rejects asymmetric kernels") {
  Eigen::MatrixXd k(2, 2);
  k << 1, 0.5, 0.4, 1;
  CHECK_THROWS_AS(pere::make_ensemble(k), pere::InvalidInput);
  CHECK_THROWS_AS(pere::make_ensemble(Eigen::MatrixXd(2, 3)), pere::InvalidInput);
}

TEST_CASE("greedy_map fixtures") {
  const auto diag = pere::make_ensemble(Eigen::Vector2d(2, 3).asDiagonal().toDenseMatrix());
  CHECK(pere::greedy_map(diag, 1) == std::vector<std::size_t>{1});
  const std::vector<std::size_t> excl{1};
  CHECK(pere::greedy_map(diag, 1, excl) == std::vector<std::size_t>{0});

  Eigen::MatrixXd k(2, 2);
  k << 2, 1.9, 1.9, 2;
  const auto e = pere::make_ensemble(k);
  auto s = pere::greedy_map(e, 2);
  std::sort(s.begin(), s.end());
  CHECK(s == std::vector<std::size_t>{0, 1});
  CHECK(pere::subset_det(e, s) == doctest::Approx(0.39));
  CHECK(pere::subset_det(e, {}) == 1.0);

  CHECK_THROWS_AS(pere::greedy_map(e, 3), pere::InvalidInput);
  const std::vector<std::size_t> bad{5};
  CHECK_THROWS_AS(pere::greedy_map(e, 1, bad), pere::InvalidInput);
}

TEST_CASE("greedy_map fills by popularity once the gain collapses") {
  // Rank-one kernel with no diagonal boost: only one item adds volume.
  Eigen::MatrixXd k = Eigen::MatrixXd::Ones(4, 4);
  const auto s = pere::greedy_map(pere::make_ensemble(k), 3);
  CHECK(s == std::vector<std::size_t>{0, 1, 2});
}

TEST_CASE("local search: improves a poor seed to the exhaustive optimum") {
  Eigen::MatrixXd k(4, 4);
  k << 3.0, 2.9, 0.1, 0.0,
       2.9, 3.0, 0.0, 0.1,
       0.1, 0.0, 2.0, 0.0,
       0.0, 0.1, 0.0, 2.5;
  const auto e = pere::make_ensemble(k);
  std::vector<std::size_t> best;
  const double opt = oracle::exhaustive_best_det(k, 2, &best);
  auto s = pere::local_search_2swap(e, {0, 1});
  CHECK(pere::subset_det(e, s) == doctest::Approx(opt));
  std::sort(s.begin(), s.end());
  CHECK(s == best);
}

TEST_CASE("local search: a global optimum is returned unchanged") {
  const Eigen::MatrixXd k = Eigen::Vector3d(1, 2, 3).asDiagonal().toDenseMatrix();
  const auto e = pere::make_ensemble(k);
  CHECK(pere::local_search_2swap(e, {2, 1}) == std::vector<std::size_t>{2, 1});
}

TEST_CASE("local search: input validation") {
  const auto e = pere::make_ensemble(Eigen::Matrix3d::Identity());
  CHECK_THROWS_AS(pere::local_search_2swap(e, {0, 0}), pere::InvalidInput);
  const std::vector<std::size_t> excl{1};
  CHECK_THROWS_AS(pere::local_search_2swap(e, {1}, excl), pere::InvalidInput);
}

TEST_CASE("greedy plus local search against the exhaustive oracle") {
  std::mt19937_64 rng(11);
  double worst_ratio = 1.0;
  for (int run = 0; run < 100; ++run) {
    const std::size_t n = 4 + static_cast<std::size_t>(run % 7);
    const std::size_t k = 1 + static_cast<std::size_t>(run % 3);
    const Eigen::MatrixXd L = random_psd(rng, n, 3);
    const auto e = pere::make_ensemble(L);
    const auto greedy = pere::greedy_map(e, k);
    const auto refined = pere::local_search_2swap(e, greedy);
    const double g = oracle::det_of(L, greedy);
    const double r = oracle::det_of(L, refined);
    CHECK(g >= -1e-12);
    CHECK(r >= g * (1.0 - 1e-12));
    // No single exchange improves the result.
    std::vector<char> in(n, 0);
    for (auto i : refined) in[i] = 1;
    for (std::size_t slot = 0; slot < refined.size(); ++slot)
      for (std::size_t q = 0; q < n; ++q)
        if (!in[q]) CHECK(det_after_swap(L, refined, slot, q) <= r * (1.0 + 1e-9) + 1e-12);
    worst_ratio = std::min(worst_ratio, r / oracle::exhaustive_best_det(L, k));
  }
  CHECK(worst_ratio >= 0.5);
}

TEST_CASE("conditional greedy never returns excluded items and is deterministic") {
  std::mt19937_64 rng(5);
  const Eigen::MatrixXd L = random_psd(rng, 30, 6);
  const auto e = pere::make_ensemble(L);
  const std::vector<std::size_t> excl{0, 3, 7, 8, 20};
  const auto a = pere::greedy_map(e, 10, excl);
  CHECK(a == pere::greedy_map(e, 10, excl));
  for (auto i : a) CHECK(std::find(excl.begin(), excl.end(), i) == excl.end());
  const auto b = pere::local_search_2swap(e, a, excl);
  for (auto i : b) CHECK(std::find(excl.begin(), excl.end(), i) == excl.end());
}
