// Independent reference implementations used to check the library.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <random>
#include <set>
#include <vector>

#include <Eigen/Core>
#include <Eigen/LU>

#include "pere/errors.hpp"
#include "pere/geometry.hpp"
#include "pere/lp_solver.hpp"

namespace oracle {

// Largest inscribed ball found by scanning a grid of candidate centers.
// Returns -1 when no grid point satisfies every cut.
inline double grid_chebyshev_radius(std::size_t dim, const std::vector<pere::Cut>& cuts, double step,
                                    Eigen::VectorXd* best_center = nullptr) {
  const int per_axis = static_cast<int>(std::lround(1.0 / step)) + 1;
  std::vector<int> idx(dim, 0);
  double best = -1.0;
  Eigen::VectorXd u(static_cast<Eigen::Index>(dim));
  while (true) {
    for (std::size_t k = 0; k < dim; ++k) u[static_cast<Eigen::Index>(k)] = std::min(1.0, idx[k] * step);
    double r = std::min(u.minCoeff(), 1.0 - u.maxCoeff());
    for (const auto& c : cuts) {
      const double slack = c.offset - c.normal.dot(u);
      if (slack < 0.0) {
        r = -1.0;
        break;
      }
      r = std::min(r, slack / c.norm);
    }
    if (r > best) {
      best = r;
      if (best_center) *best_center = u;
    }
    std::size_t k = 0;
    while (k < dim && ++idx[k] == per_axis) idx[k++] = 0;
    if (k == dim) break;
  }
  return best;
}

// Every binary assignment with at most `budget` ones, each solved as an LP
// with the binaries pinned; returns the best objective (-inf if none feasible).
inline double exhaustive_mip(const pere::lp::LinearProgram& lp, const std::vector<std::size_t>& binaries,
                             std::size_t budget, std::vector<int>* best_assignment = nullptr) {
  double best = -std::numeric_limits<double>::infinity();
  const std::size_t k = binaries.size();
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << k); ++mask) {
    if (static_cast<std::size_t>(__builtin_popcountll(mask)) > budget) continue;
    auto fixed = lp;
    for (std::size_t b = 0; b < k; ++b) {
      const double v = (mask >> b) & 1 ? 1.0 : 0.0;
      fixed.lower[static_cast<Eigen::Index>(binaries[b])] = v;
      fixed.upper[static_cast<Eigen::Index>(binaries[b])] = v;
    }
    const auto sol = pere::lp::solve_lp(fixed);
    if (sol.status == pere::lp::Status::kOptimal && sol.objective_value > best + 1e-12) {
      best = sol.objective_value;
      if (best_assignment) {
        best_assignment->assign(k, 0);
        for (std::size_t b = 0; b < k; ++b) (*best_assignment)[b] = (mask >> b) & 1;
      }
    }
  }
  return best;
}

// Chebyshev radius with every subset of at most `budget` cuts removed.
// Returns the best radius and the removed set achieving it (smallest first).
inline double exhaustive_tolerant_radius(std::size_t dim, const std::vector<pere::Cut>& cuts, std::size_t budget,
                                         std::vector<std::size_t>* removed = nullptr) {
  double best = -1.0;
  const std::size_t k = cuts.size();
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << k); ++mask) {
    if (static_cast<std::size_t>(__builtin_popcountll(mask)) > budget) continue;
    std::vector<pere::Cut> kept;
    std::vector<std::size_t> gone;
    for (std::size_t i = 0; i < k; ++i) {
      if ((mask >> i) & 1)
        gone.push_back(i);
      else
        kept.push_back(cuts[i]);
    }
    double r = -1.0;
    try {
      r = pere::chebyshev_center(dim, kept).radius;
    } catch (const pere::InfeasibleRegion&) {
      continue;
    }
    if (r > best + 1e-12) {
      best = r;
      if (removed) *removed = gone;
    }
  }
  return best;
}

inline double det_of(const Eigen::MatrixXd& L, const std::vector<std::size_t>& subset) {
  const auto n = static_cast<Eigen::Index>(subset.size());
  if (n == 0) return 1.0;
  Eigen::MatrixXd sub(n, n);
  for (Eigen::Index a = 0; a < n; ++a)
    for (Eigen::Index b = 0; b < n; ++b)
      sub(a, b) = L(static_cast<Eigen::Index>(subset[static_cast<std::size_t>(a)]),
                    static_cast<Eigen::Index>(subset[static_cast<std::size_t>(b)]));
  return sub.determinant();
}

// Maximum det(L_S) over all subsets of size k.
inline double exhaustive_best_det(const Eigen::MatrixXd& L, std::size_t k, std::vector<std::size_t>* arg = nullptr) {
  const auto n = static_cast<std::size_t>(L.rows());
  double best = -std::numeric_limits<double>::infinity();
  std::vector<char> pick(n, 0);
  std::fill(pick.begin(), pick.begin() + static_cast<std::ptrdiff_t>(k), 1);
  std::sort(pick.begin(), pick.end());
  do {
    std::vector<std::size_t> s;
    for (std::size_t i = 0; i < n; ++i)
      if (pick[i]) s.push_back(i);
    const double d = det_of(L, s);
    if (d > best) {
      best = d;
      if (arg) *arg = s;
    }
  } while (std::next_permutation(pick.begin(), pick.end()));
  return best;
}

// Metrics straight from their definitions (quadratic scans, no shortcuts).
inline double ndcg(const std::vector<std::size_t>& ranked, const std::set<std::size_t>& rel, std::size_t k) {
  double dcg = 0.0;
  for (std::size_t pos = 0; pos < ranked.size() && pos < k; ++pos)
    if (rel.count(ranked[pos])) dcg += 1.0 / std::log2(static_cast<double>(pos) + 2.0);
  double idcg = 0.0;
  for (std::size_t pos = 0; pos < rel.size() && pos < k; ++pos) idcg += 1.0 / std::log2(static_cast<double>(pos) + 2.0);
  return idcg > 0.0 ? dcg / idcg : 0.0;
}

inline double average_precision(const std::vector<std::size_t>& ranked, const std::set<std::size_t>& rel) {
  const std::size_t denom = std::min(rel.size(), ranked.size());
  if (denom == 0) return 0.0;
  double total = 0.0;
  for (std::size_t pos = 0; pos < ranked.size(); ++pos) {
    if (!rel.count(ranked[pos])) continue;
    std::size_t hits = 0;
    for (std::size_t q = 0; q <= pos; ++q) hits += rel.count(ranked[q]);
    total += static_cast<double>(hits) / static_cast<double>(pos + 1);
  }
  return total / static_cast<double>(denom);
}

}  // namespace oracle
