#include "pere/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <string>

#include "pere/data.hpp"
#include "pere/errors.hpp"
#include "pere/lp_solver.hpp"

namespace pere {

Cut make_cut(const Eigen::Ref<const Eigen::VectorXd>& liked, const Eigen::Ref<const Eigen::VectorXd>& disliked) {
  if (liked.size() != disliked.size()) throw InvalidInput("make_cut: dimension mismatch");
  Cut cut;
  cut.normal = 2.0 * (disliked - liked);
  cut.offset = disliked.squaredNorm() - liked.squaredNorm();
  cut.norm = cut.normal.norm();
  return cut;
}

CutSet cuts_from_preferences(std::span<const Preference> prefs, const Catalog& catalog) {
  CutSet out;
  std::set<std::vector<double>> seen;
  for (const auto& p : prefs) {
    if (p.liked >= catalog.size() || p.disliked >= catalog.size()) {
      throw InvalidInput("cuts_from_preferences: item index out of range");
    }
    if (p.liked == p.disliked) throw InvalidInput("cuts_from_preferences: item preferred to itself");
    Cut cut = make_cut(catalog.embedding(p.liked), catalog.embedding(p.disliked));
    if (cut.norm == 0.0) {
      ++out.degenerate_dropped;
      continue;
    }
    std::vector<double> key(cut.normal.data(), cut.normal.data() + cut.normal.size());
    key.push_back(cut.offset);
    if (!seen.insert(std::move(key)).second) {
      ++out.duplicates_dropped;
      continue;
    }
    out.cuts.push_back(std::move(cut));
    out.sources.push_back(p);
  }
  return out;
}

double cut_distance(const Eigen::Ref<const Eigen::VectorXd>& u, const Cut& cut) {
  if (!(cut.norm > 0.0)) throw InvalidInput("cut_distance: zero-norm cut");
  if (u.size() != cut.normal.size()) throw InvalidInput("cut_distance: dimension mismatch");
  return std::abs(cut.normal.dot(u) - cut.offset) / cut.norm;
}

namespace {

void check_cuts(std::size_t dim, std::span<const Cut> cuts) {
  if (dim == 0) throw InvalidInput("chebyshev_center: dimension must be >= 1");
  for (const auto& c : cuts) {
    if (static_cast<std::size_t>(c.normal.size()) != dim) {
      throw InvalidInput("chebyshev_center: cut dimension mismatch");
    }
  }
}

// Variables (w_1..w_d, r, gamma_1..gamma_k) with u = origin + w; maximize r.
// Rows: one per cut, then r - w_j <= origin_j and w_j + r <= 1 - origin_j.
// The margin rows already keep u inside the cube, so w is left free and the
// simplex starts at the origin; a good origin (the previous optimum) leaves
// few rows to repair.
lp::LinearProgram ball_program(std::size_t dim, std::span<const Cut> cuts, bool with_binaries,
                               const Eigen::VectorXd& origin) {
  const auto d = static_cast<Eigen::Index>(dim);
  const auto k = static_cast<Eigen::Index>(cuts.size());
  const Eigen::Index n = d + 1 + (with_binaries ? k : 0);
  const Eigen::Index m = k + 2 * d;
  const double big_m = 4.0 * static_cast<double>(dim);

  lp::LinearProgram prog;
  prog.objective = Eigen::VectorXd::Zero(n);
  prog.objective[d] = 1.0;
  prog.constraints = Eigen::MatrixXd::Zero(m, n);
  prog.rhs.resize(m);
  for (Eigen::Index i = 0; i < k; ++i) {
    const Cut& c = cuts[static_cast<std::size_t>(i)];
    prog.constraints.row(i).head(d) = c.normal.transpose();
    prog.constraints(i, d) = c.norm;
    if (with_binaries) prog.constraints(i, d + 1 + i) = -big_m;
    prog.rhs[i] = c.offset - c.normal.dot(origin);
  }
  for (Eigen::Index j = 0; j < d; ++j) {
    prog.constraints(k + 2 * j, j) = -1.0;
    prog.constraints(k + 2 * j, d) = 1.0;
    prog.rhs[k + 2 * j] = origin[j];
    prog.constraints(k + 2 * j + 1, j) = 1.0;
    prog.constraints(k + 2 * j + 1, d) = 1.0;
    prog.rhs[k + 2 * j + 1] = 1.0 - origin[j];
  }
  prog.lower = Eigen::VectorXd::Zero(n);
  prog.upper = Eigen::VectorXd::Ones(n);
  prog.lower.head(d).setConstant(-lp::kInfinity);
  prog.upper.head(d).setConstant(lp::kInfinity);
  prog.upper[d] = 0.5;
  return prog;
}

Eigen::VectorXd cube_middle(std::size_t dim) { return Eigen::VectorXd::Constant(static_cast<Eigen::Index>(dim), 0.5); }

Eigen::VectorXd center_of(const Eigen::VectorXd& x, const Eigen::VectorXd& origin) {
  return x.head(origin.size()) + origin;
}

// Most violated cut at the phase-one point (u, r), as (index, violation).
std::pair<std::size_t, double> most_violated(std::span<const Cut> cuts, const Eigen::VectorXd& x,
                                             const Eigen::VectorXd& origin, std::span<const std::size_t> active) {
  const Eigen::VectorXd u = center_of(x, origin);
  std::size_t best = active.empty() ? 0 : active.front();
  double worst = -std::numeric_limits<double>::infinity();
  for (std::size_t i : active) {
    const double v = cuts[i].normal.dot(u) - cuts[i].offset;
    if (v > worst) {
      worst = v;
      best = i;
    }
  }
  return {best, worst};
}

ChebyshevBall ball_from(const lp::Solution& sol, const Eigen::VectorXd& origin) {
  ChebyshevBall ball;
  ball.center = center_of(sol.x, origin).cwiseMax(0.0).cwiseMin(1.0);
  ball.radius = std::max(0.0, sol.x[origin.size()]);
  return ball;
}

// Second stage: radius pinned to r_star, minimize sum t_j with
// t_j >= |origin_j + w_j - 0.5|.
lp::LinearProgram center_program(std::size_t dim, std::span<const Cut> cuts, double r_star,
                                 const Eigen::VectorXd& origin) {
  const auto d = static_cast<Eigen::Index>(dim);
  lp::LinearProgram prog = ball_program(dim, cuts, false, origin);
  const Eigen::Index m0 = prog.constraints.rows();
  const Eigen::Index n0 = prog.constraints.cols();
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(m0 + 2 * d, n0 + d);
  a.topLeftCorner(m0, n0) = prog.constraints;
  Eigen::VectorXd b(m0 + 2 * d);
  b.head(m0) = prog.rhs;
  for (Eigen::Index j = 0; j < d; ++j) {
    a(m0 + 2 * j, j) = 1.0;
    a(m0 + 2 * j, n0 + j) = -1.0;
    b[m0 + 2 * j] = 0.5 - origin[j];
    a(m0 + 2 * j + 1, j) = -1.0;
    a(m0 + 2 * j + 1, n0 + j) = -1.0;
    b[m0 + 2 * j + 1] = origin[j] - 0.5;
  }
  prog.constraints = std::move(a);
  prog.rhs = std::move(b);
  prog.objective = Eigen::VectorXd::Zero(n0 + d);
  prog.objective.tail(d).setConstant(-1.0);
  prog.lower.conservativeResize(n0 + d);
  prog.upper.conservativeResize(n0 + d);
  prog.lower.tail(d).setZero();
  prog.upper.tail(d).setConstant(0.5);
  prog.lower[d] = std::max(0.0, r_star - 1e-10);
  prog.upper[d] = std::max(prog.lower[d], r_star);
  return prog;
}

std::vector<Cut> subset_of(std::span<const Cut> cuts, std::span<const std::size_t> indices) {
  std::vector<Cut> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) out.push_back(cuts[i]);
  return out;
}

[[noreturn]] void throw_infeasible(std::span<const Cut> cuts, const lp::Solution& sol,
                                   const Eigen::VectorXd& origin, std::span<const std::size_t> active,
                                   const std::string& context) {
  const auto [idx, viol] = most_violated(cuts, sol.x, origin, active);
  throw InfeasibleRegion(context + ": no point of the unit hypercube satisfies every cut (most violated cut " +
                             std::to_string(idx) + ")",
                         idx, std::max(viol, 0.0));
}

std::vector<std::size_t> iota_indices(std::size_t n) {
  std::vector<std::size_t> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = i;
  return v;
}

// Cuts in `relaxed` that the ball pokes through.
std::vector<std::size_t> violated_by_ball(std::span<const Cut> cuts, const ChebyshevBall& ball,
                                          std::span<const std::size_t> relaxed) {
  std::vector<std::size_t> out;
  for (std::size_t i : relaxed) {
    const Cut& c = cuts[i];
    if (c.normal.dot(ball.center) + c.norm * ball.radius - c.offset > 1e-7) out.push_back(i);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<Cut> subset(std::span<const Cut> cuts, const std::vector<char>& keep) {
  std::vector<Cut> out;
  for (std::size_t i = 0; i < cuts.size(); ++i)
    if (keep[i]) out.push_back(cuts[i]);
  return out;
}

// Smallest total violation (in distance units) of the active cuts over the
// hypercube: minimize sum s_i s.t. normal_i'u - norm_i s_i <= offset_i.
// The L1 objective concentrates the excess on a few outlying cuts.
std::vector<double> elastic_excess(std::size_t dim, std::span<const Cut> cuts, std::span<const std::size_t> active) {
  const auto d = static_cast<Eigen::Index>(dim);
  const auto k = static_cast<Eigen::Index>(active.size());
  lp::LinearProgram prog;
  prog.objective = Eigen::VectorXd::Zero(d + k);
  prog.objective.tail(k).setConstant(-1.0);
  prog.constraints = Eigen::MatrixXd::Zero(k, d + k);
  prog.rhs.resize(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    const Cut& c = cuts[active[static_cast<std::size_t>(i)]];
    prog.constraints.row(i).head(d) = c.normal.transpose();
    prog.constraints(i, d + i) = -c.norm;
    prog.rhs[i] = c.offset;
  }
  prog.lower = Eigen::VectorXd::Zero(d + k);
  prog.upper = Eigen::VectorXd::Constant(d + k, lp::kInfinity);
  prog.upper.head(d).setOnes();
  const auto sol = lp::solve_lp(prog);
  std::vector<double> out(active.size(), 0.0);
  if (sol.status != lp::Status::kOptimal) throw Error("chebyshev_center_tolerant: elastic program failed");
  for (Eigen::Index i = 0; i < k; ++i) out[static_cast<std::size_t>(i)] = sol.x[d + i];
  return out;
}

}  // namespace

ChebyshevBall chebyshev_center(std::size_t dim, std::span<const Cut> cuts) {
  check_cuts(dim, cuts);
  const auto d = static_cast<Eigen::Index>(dim);

  // Only about d+1 cuts bind at the optimum, so both stages run over a
  // working set that grows with the cuts the current ball violates.
  std::vector<std::size_t> working;
  std::vector<char> in_working(cuts.size(), 0);
  const std::size_t batch = std::max<std::size_t>(2 * dim, 16);
  auto add_violated = [&](const Eigen::VectorXd& u, double r) {
    std::vector<std::pair<double, std::size_t>> viol;
    for (std::size_t i = 0; i < cuts.size(); ++i) {
      if (in_working[i]) continue;
      const double v = cuts[i].normal.dot(u) + cuts[i].norm * r - cuts[i].offset;
      if (v > 1e-9) viol.emplace_back(-v, i);
    }
    std::sort(viol.begin(), viol.end());
    if (viol.size() > batch) viol.resize(batch);
    for (const auto& [neg, i] : viol) {
      in_working[i] = 1;
      working.push_back(i);
    }
    return !viol.empty();
  };

  Eigen::VectorXd origin = cube_middle(dim);
  add_violated(origin, 0.5);
  lp::Solution sol;
  while (true) {
    sol = lp::solve_lp(ball_program(dim, subset_of(cuts, working), false, origin));
    if (sol.status != lp::Status::kOptimal) throw_infeasible(cuts, sol, origin, working, "chebyshev_center");
    // Re-anchor at the new optimum so the next program starts feasible for
    // every cut already in the working set.
    origin = center_of(sol.x, origin);
    if (!add_violated(origin, std::max(0.0, sol.x[d]))) break;
  }

  // The optimal center is often not unique (a slab leaves a segment of equally
  // good centers). Among balls of radius r*, take the center with the smallest
  // L1 distance to the middle of the cube.
  const double r_star = std::max(0.0, sol.x[d]);
  const ChebyshevBall stage_one = ball_from(sol, origin - sol.x.head(d));
  while (true) {
    const auto refined = lp::solve_lp(center_program(dim, subset_of(cuts, working), r_star, origin));
    if (refined.status != lp::Status::kOptimal) return stage_one;
    const Eigen::VectorXd u = center_of(refined.x, origin);
    if (!add_violated(u, std::max(0.0, refined.x[d]))) return ball_from(refined, origin);
    origin = u;
  }
}

TolerantBall chebyshev_center_with_budget(std::size_t dim, std::span<const Cut> cuts, std::size_t budget) {
  check_cuts(dim, cuts);
  TolerantBall out;
  if (budget == 0) {
    auto ball = chebyshev_center(dim, cuts);
    out.center = std::move(ball.center);
    out.radius = ball.radius;
    return out;
  }
  if (budget >= cuts.size()) {
    out.center = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(dim), 0.5);
    out.radius = 0.5;
    out.violated = violated_by_ball(cuts, {out.center, out.radius}, iota_indices(cuts.size()));
    return out;
  }

  std::vector<char> keep(cuts.size(), 1);
  if (cuts.size() <= kExactBranchLimit) {
    const auto prog = ball_program(dim, cuts, true, cube_middle(dim));
    std::vector<std::size_t> binaries(cuts.size());
    for (std::size_t i = 0; i < cuts.size(); ++i) binaries[i] = dim + 1 + i;
    const auto mip = lp::solve_mip_binary(prog, binaries, lp::CardinalityBudget{budget});
    if (mip.solution.status != lp::Status::kOptimal) {
      const auto all = iota_indices(cuts.size());
      throw_infeasible(cuts, mip.solution, cube_middle(dim), all, "chebyshev_center_tolerant");
    }
    for (std::size_t i = 0; i < cuts.size(); ++i) keep[i] = mip.binary_values[i] == 0;
  } else {
    out.heuristic = true;
    std::size_t dropped = 0;
    while (true) {
      std::vector<std::size_t> active;
      for (std::size_t i = 0; i < cuts.size(); ++i)
        if (keep[i]) active.push_back(i);
      const auto excess = elastic_excess(dim, cuts, active);
      std::vector<std::size_t> order;
      for (std::size_t a = 0; a < active.size(); ++a)
        if (excess[a] > 1e-9) order.push_back(a);
      if (order.empty()) break;
      if (dropped == budget) {
        const auto sol = lp::solve_lp(ball_program(dim, subset(cuts, keep), false, cube_middle(dim)));
        throw_infeasible(cuts, sol, cube_middle(dim), active, "chebyshev_center_tolerant");
      }
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return excess[a] > excess[b]; });
      for (std::size_t a : order) {
        if (dropped == budget) break;
        keep[active[a]] = 0;
        ++dropped;
      }
    }
  }

  std::vector<std::size_t> relaxed;
  for (std::size_t i = 0; i < cuts.size(); ++i)
    if (!keep[i]) relaxed.push_back(i);
  const auto kept = subset(cuts, keep);
  ChebyshevBall ball;
  try {
    ball = chebyshev_center(dim, kept);
  } catch (const InfeasibleRegion& e) {
    throw InfeasibleRegion("chebyshev_center_tolerant: kept cuts are infeasible on re-solve", 0, e.violation());
  }
  out.violated = violated_by_ball(cuts, ball, relaxed);
  out.center = std::move(ball.center);
  out.radius = ball.radius;
  return out;
}

TolerantBall chebyshev_center_tolerant(std::size_t dim, std::span<const Cut> cuts, double tau) {
  if (!(tau >= 0.0 && tau <= 1.0)) throw InvalidInput("chebyshev_center_tolerant: tau must lie in [0,1]");
  if (cuts.empty()) throw InvalidInput("chebyshev_center_tolerant: needs at least one cut");
  const auto budget = static_cast<std::size_t>(std::floor(tau * static_cast<double>(cuts.size()) + 1e-9));
  return chebyshev_center_with_budget(dim, cuts, budget);
}

Region Region::unit(std::size_t dim) {
  if (dim == 0) throw InvalidInput("Region: dimension must be >= 1");
  Region r;
  r.dim = dim;
  r.center = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(dim), 0.5);
  r.radius = 0.5;
  return r;
}

Region Region::solve(std::size_t dim, std::vector<Cut> cuts) {
  if (cuts.empty()) return unit(dim);
  auto ball = chebyshev_center(dim, cuts);
  Region r;
  r.dim = dim;
  r.cuts = std::move(cuts);
  r.center = std::move(ball.center);
  r.radius = ball.radius;
  return r;
}

Region Region::solve_tolerant(std::size_t dim, std::vector<Cut> cuts, std::size_t budget) {
  if (cuts.empty()) return unit(dim);
  auto ball = chebyshev_center_with_budget(dim, cuts, budget);
  Region r;
  r.dim = dim;
  r.cuts = std::move(cuts);
  r.center = std::move(ball.center);
  r.radius = ball.radius;
  r.relaxed = std::move(ball.violated);
  r.heuristic = ball.heuristic;
  return r;
}

bool contains(const Region& region, const Eigen::Ref<const Eigen::VectorXd>& u) {
  if (static_cast<std::size_t>(u.size()) != region.dim) throw InvalidInput("contains: dimension mismatch");
  constexpr double kTol = 1e-9;
  if (u.minCoeff() < -kTol || u.maxCoeff() > 1.0 + kTol) return false;
  std::vector<char> relaxed(region.cuts.size(), 0);
  for (std::size_t i : region.relaxed) relaxed[i] = 1;
  for (std::size_t i = 0; i < region.cuts.size(); ++i) {
    if (relaxed[i]) continue;
    if (region.cuts[i].normal.dot(u) > region.cuts[i].offset + kTol) return false;
  }
  return true;
}

}  // namespace pere
