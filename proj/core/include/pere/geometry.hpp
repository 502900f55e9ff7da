#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "pere/types.hpp"

namespace pere {

class Catalog;

/// Liked item i preferred to disliked item j.
struct Preference {
  ItemIndex liked;
  ItemIndex disliked;
};

/// Halfspace normal'u <= offset. For v_i preferred to v_j:
/// normal = 2(v_j - v_i), offset = |v_j|^2 - |v_i|^2.
struct Cut {
  Eigen::VectorXd normal;
  double offset = 0.0;
  double norm = 0.0;

  bool satisfied_by(const Eigen::VectorXd& u, double tolerance = 1e-9) const {
    return normal.dot(u) <= offset + tolerance;
  }
};

Cut make_cut(const Eigen::Ref<const Eigen::VectorXd>& liked, const Eigen::Ref<const Eigen::VectorXd>& disliked);

struct CutSet {
  std::vector<Cut> cuts;
  /// Preference that produced each cut (first occurrence when deduplicated).
  std::vector<Preference> sources;
  std::size_t duplicates_dropped = 0;
  /// Pairs of items with identical embeddings.
  std::size_t degenerate_dropped = 0;
};

/// One cut per preference; identical cuts are kept once, zero-normal cuts dropped.
CutSet cuts_from_preferences(std::span<const Preference> prefs, const Catalog& catalog);

/// Point-to-hyperplane distance |normal'u - offset| / norm.
double cut_distance(const Eigen::Ref<const Eigen::VectorXd>& u, const Cut& cut);

struct ChebyshevBall {
  Embedding center;
  double radius = 0.0;
};

/// Largest ball inside the unit hypercube satisfying every cut. Throws
/// InfeasibleRegion naming the most violated cut when no point qualifies.
ChebyshevBall chebyshev_center(std::size_t dim, std::span<const Cut> cuts);

struct TolerantBall {
  Embedding center;
  double radius = 0.0;
  /// Indices of relaxed cuts that the returned ball actually violates.
  std::vector<std::size_t> violated;
  /// True when the budget search fell back to greedy dropping.
  bool heuristic = false;
};

/// Cuts beyond which the tolerant solve switches from exact branch and bound
/// to greedy dropping of the most violated cut.
inline constexpr std::size_t kExactBranchLimit = 24;

/// Chebyshev center allowing up to `budget` cuts to be relaxed with big-M
/// slack 4d. budget 0 reproduces chebyshev_center exactly.
TolerantBall chebyshev_center_with_budget(std::size_t dim, std::span<const Cut> cuts, std::size_t budget);

/// Budget floor(tau * |cuts|).
TolerantBall chebyshev_center_tolerant(std::size_t dim, std::span<const Cut> cuts, double tau);

/// Solved plausible-embedding region.
struct Region {
  std::size_t dim = 0;
  std::vector<Cut> cuts;
  Embedding center;
  double radius = 0.0;
  /// Cuts the center is allowed to violate (tolerant solves only).
  std::vector<std::size_t> relaxed;
  bool heuristic = false;

  /// The whole hypercube: center 0.5, radius 0.5.
  static Region unit(std::size_t dim);
  static Region solve(std::size_t dim, std::vector<Cut> cuts);
  static Region solve_tolerant(std::size_t dim, std::vector<Cut> cuts, std::size_t budget);
};

/// u in the hypercube and every non-relaxed cut satisfied within 1e-9.
bool contains(const Region& region, const Eigen::Ref<const Eigen::VectorXd>& u);

}  // namespace pere
