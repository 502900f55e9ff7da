#include "pere/lp_solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <queue>
#include <string>
#include <utility>

#include "pere/errors.hpp"

namespace pere::lp {

const char* to_string(Status status) {
  switch (status) {
    case Status::kOptimal:
      return "optimal";
    case Status::kInfeasible:
      return "infeasible";
    case Status::kUnbounded:
      return "unbounded";
  }
  return "unknown";
}

void LinearProgram::validate() const {
  const auto n = objective.size();
  if (constraints.cols() != n && constraints.rows() > 0) {
    throw InvalidInput("LinearProgram: constraint matrix has " + std::to_string(constraints.cols()) +
                       " columns, objective has " + std::to_string(n));
  }
  if (rhs.size() != constraints.rows()) {
    throw InvalidInput("LinearProgram: rhs length does not match constraint rows");
  }
  if (lower.size() != n || upper.size() != n) {
    throw InvalidInput("LinearProgram: bound vectors must match the number of variables");
  }
  if (!objective.allFinite() || !constraints.allFinite() || !rhs.allFinite()) {
    throw InvalidInput("LinearProgram: objective, constraints and rhs must be finite");
  }
  for (Eigen::Index j = 0; j < n; ++j) {
    if (std::isnan(lower[j]) || std::isnan(upper[j]) || lower[j] > upper[j] ||
        lower[j] == kInfinity || upper[j] == -kInfinity) {
      throw InvalidInput("LinearProgram: invalid bounds for variable " + std::to_string(j));
    }
  }
}

namespace {

enum class VarState : std::uint8_t { kBasic, kAtLower, kAtUpper, kFreeZero };

// Elementary transformation of the product-form inverse: the basis column at
// `pos` was replaced by a column whose FTRAN image is alpha.
struct Eta {
  std::size_t pos;
  double pivot;
  std::vector<std::pair<std::size_t, double>> entries;
};

// Layout of the working variables: [0, n) structural, [n, n + m) slacks of
// A x + s = b, then one artificial per row that was infeasible at the start.
class BoundedSimplex {
 public:
  BoundedSimplex(const LinearProgram& lp, const SolverOptions& options)
      : lp_(lp), opt_(options), n_(lp.num_variables()), m_(lp.num_constraints()) {
    max_iterations_ = opt_.max_iterations != 0 ? opt_.max_iterations : 50 * (n_ + m_) + 1000;
    lo_.reserve(n_ + 2 * m_);
    up_.reserve(n_ + 2 * m_);
    for (std::size_t j = 0; j < n_; ++j) {
      lo_.push_back(lp.lower[static_cast<Eigen::Index>(j)]);
      up_.push_back(lp.upper[static_cast<Eigen::Index>(j)]);
    }
    for (std::size_t i = 0; i < m_; ++i) {
      lo_.push_back(0.0);
      up_.push_back(kInfinity);
    }
    x_.assign(n_ + m_, 0.0);
    state_.assign(n_ + m_, VarState::kAtLower);
    for (std::size_t j = 0; j < n_; ++j) {
      if (std::isfinite(lo_[j])) {
        x_[j] = lo_[j];
        state_[j] = VarState::kAtLower;
      } else if (std::isfinite(up_[j])) {
        x_[j] = up_[j];
        state_[j] = VarState::kAtUpper;
      } else {
        x_[j] = 0.0;
        state_[j] = VarState::kFreeZero;
      }
    }

    Eigen::VectorXd xs = Eigen::Map<const Eigen::VectorXd>(x_.data(), static_cast<Eigen::Index>(n_));
    Eigen::VectorXd residual = lp.rhs;
    if (n_ > 0 && m_ > 0) residual.noalias() -= lp.constraints * xs;

    head_.resize(m_);
    sign_.assign(m_, 1.0);
    for (std::size_t i = 0; i < m_; ++i) {
      const double r = residual[static_cast<Eigen::Index>(i)];
      if (r >= 0.0) {
        head_[i] = n_ + i;
        x_[n_ + i] = r;
        state_[n_ + i] = VarState::kBasic;
      } else {
        const std::size_t art = lo_.size();
        lo_.push_back(0.0);
        up_.push_back(kInfinity);
        x_.push_back(-r);
        state_.push_back(VarState::kBasic);
        art_row_.push_back(i);
        head_[i] = art;
        sign_[i] = -1.0;
      }
    }
  }

  Solution run() {
    Solution result;
    if (!art_row_.empty()) {
      cost_.assign(lo_.size(), 0.0);
      for (std::size_t k = 0; k < art_row_.size(); ++k) cost_[n_ + m_ + k] = 1.0;
      const Status phase1 = iterate(/*phase_one=*/true);
      double infeasibility = 0.0;
      for (std::size_t k = 0; k < art_row_.size(); ++k) infeasibility += std::max(0.0, x_[n_ + m_ + k]);
      if (phase1 != Status::kOptimal || infeasibility > opt_.feasibility_tolerance) {
        result.status = Status::kInfeasible;
        result.x = structural();
        result.objective_value = lp_.objective.dot(result.x);
        result.iterations = iterations_;
        return result;
      }
      for (std::size_t k = 0; k < art_row_.size(); ++k) {
        const std::size_t v = n_ + m_ + k;
        up_[v] = 0.0;
        if (state_[v] != VarState::kBasic) {
          x_[v] = 0.0;
          state_[v] = VarState::kAtLower;
        }
      }
    }

    cost_.assign(lo_.size(), 0.0);
    for (std::size_t j = 0; j < n_; ++j) cost_[j] = -lp_.objective[static_cast<Eigen::Index>(j)];
    const Status phase2 = iterate(/*phase_one=*/false);
    result.status = phase2;
    result.x = structural();
    result.objective_value = lp_.objective.dot(result.x);
    result.iterations = iterations_;
    return result;
  }

 private:
  Eigen::VectorXd structural() const {
    Eigen::VectorXd out(static_cast<Eigen::Index>(n_));
    for (std::size_t j = 0; j < n_; ++j) out[static_cast<Eigen::Index>(j)] = x_[j];
    return out;
  }

  bool is_slack(std::size_t v) const { return v >= n_ && v < n_ + m_; }
  bool is_artificial(std::size_t v) const { return v >= n_ + m_; }

  void load_column(std::size_t v, Eigen::VectorXd& out) const {
    if (v < n_) {
      out = lp_.constraints.col(static_cast<Eigen::Index>(v));
      return;
    }
    out.setZero(static_cast<Eigen::Index>(m_));
    if (is_slack(v)) {
      out[static_cast<Eigen::Index>(v - n_)] = 1.0;
    } else {
      out[static_cast<Eigen::Index>(art_row_[v - n_ - m_])] = -1.0;
    }
  }

  // v <- B^{-1} v  (rows in, basis positions out)
  void ftran(Eigen::VectorXd& v) const {
    for (std::size_t r = 0; r < m_; ++r) v[static_cast<Eigen::Index>(r)] *= sign_[r];
    for (const Eta& eta : etas_) {
      const double vr = v[static_cast<Eigen::Index>(eta.pos)] / eta.pivot;
      v[static_cast<Eigen::Index>(eta.pos)] = vr;
      if (vr == 0.0) continue;
      for (const auto& [i, a] : eta.entries) v[static_cast<Eigen::Index>(i)] -= a * vr;
    }
  }

  // y' <- y' B^{-1}  (basis positions in, rows out)
  void btran(Eigen::VectorXd& y) const {
    for (auto it = etas_.rbegin(); it != etas_.rend(); ++it) {
      double s = y[static_cast<Eigen::Index>(it->pos)];
      for (const auto& [i, a] : it->entries) s -= a * y[static_cast<Eigen::Index>(i)];
      y[static_cast<Eigen::Index>(it->pos)] = s / it->pivot;
    }
    for (std::size_t r = 0; r < m_; ++r) y[static_cast<Eigen::Index>(r)] *= sign_[r];
  }

  void push_eta(std::size_t pos, const Eigen::VectorXd& alpha) {
    Eta eta;
    eta.pos = pos;
    eta.pivot = alpha[static_cast<Eigen::Index>(pos)];
    for (std::size_t i = 0; i < m_; ++i) {
      const double a = alpha[static_cast<Eigen::Index>(i)];
      if (i != pos && a != 0.0) eta.entries.emplace_back(i, a);
    }
    etas_.push_back(std::move(eta));
  }

  // Rebuild the product form from scratch: unit columns go back to their own
  // rows, structural columns are pivoted in with partial pivoting.
  void refactor() {
    std::vector<std::size_t> structural_basics;
    std::vector<bool> covered(m_, false);
    std::vector<std::size_t> new_head(m_, 0);
    std::vector<double> new_sign(m_, 1.0);
    for (std::size_t p = 0; p < m_; ++p) {
      const std::size_t v = head_[p];
      if (v < n_) {
        structural_basics.push_back(v);
      } else if (is_slack(v)) {
        const std::size_t row = v - n_;
        covered[row] = true;
        new_head[row] = v;
      } else {
        const std::size_t row = art_row_[v - n_ - m_];
        covered[row] = true;
        new_head[row] = v;
        new_sign[row] = -1.0;
      }
    }
    etas_.clear();
    updates_since_refactor_ = 0;
    sign_ = std::move(new_sign);
    Eigen::VectorXd alpha;
    for (const std::size_t v : structural_basics) {
      load_column(v, alpha);
      ftran(alpha);
      std::size_t best = m_;
      double best_abs = 0.0;
      for (std::size_t r = 0; r < m_; ++r) {
        if (covered[r]) continue;
        const double a = std::abs(alpha[static_cast<Eigen::Index>(r)]);
        if (a > best_abs) {
          best_abs = a;
          best = r;
        }
      }
      if (best == m_ || best_abs < 1e-12) {
        throw Error("simplex: singular basis during refactorization");
      }
      push_eta(best, alpha);
      covered[best] = true;
      new_head[best] = v;
    }
    head_ = std::move(new_head);
    recompute_basics();
  }

  void recompute_basics() {
    Eigen::VectorXd rhs = lp_.rhs;
    for (std::size_t j = 0; j < n_; ++j) {
      if (state_[j] != VarState::kBasic && x_[j] != 0.0) {
        rhs.noalias() -= x_[j] * lp_.constraints.col(static_cast<Eigen::Index>(j));
      }
    }
    for (std::size_t v = n_; v < lo_.size(); ++v) {
      if (state_[v] == VarState::kBasic || x_[v] == 0.0) continue;
      if (is_slack(v)) {
        rhs[static_cast<Eigen::Index>(v - n_)] -= x_[v];
      } else {
        rhs[static_cast<Eigen::Index>(art_row_[v - n_ - m_])] += x_[v];
      }
    }
    ftran(rhs);
    for (std::size_t p = 0; p < m_; ++p) x_[head_[p]] = rhs[static_cast<Eigen::Index>(p)];
  }

  Status iterate(bool phase_one) {
    const double tol = opt_.optimality_tolerance;
    Eigen::VectorXd y(static_cast<Eigen::Index>(m_));
    Eigen::VectorXd alpha(static_cast<Eigen::Index>(m_));
    Eigen::VectorXd ay;
    std::size_t degenerate_run = 0;
    bool bland = false;

    while (true) {
      if (iterations_ >= max_iterations_) {
        throw Error("simplex: iteration limit reached (" + std::to_string(max_iterations_) + ")");
      }
      for (std::size_t p = 0; p < m_; ++p) y[static_cast<Eigen::Index>(p)] = cost_[head_[p]];
      btran(y);
      if (n_ > 0) ay.noalias() = lp_.constraints.transpose() * y;

      // Pricing.
      std::size_t entering = lo_.size();
      double direction = 0.0;
      double best_score = 0.0;
      for (std::size_t v = 0; v < lo_.size(); ++v) {
        const VarState st = state_[v];
        if (st == VarState::kBasic || lo_[v] == up_[v]) continue;
        double dj = cost_[v];
        if (v < n_) {
          dj -= ay[static_cast<Eigen::Index>(v)];
        } else if (is_slack(v)) {
          dj -= y[static_cast<Eigen::Index>(v - n_)];
        } else {
          dj += y[static_cast<Eigen::Index>(art_row_[v - n_ - m_])];
        }
        double dir = 0.0;
        if (st == VarState::kAtLower && dj < -tol) {
          dir = 1.0;
        } else if (st == VarState::kAtUpper && dj > tol) {
          dir = -1.0;
        } else if (st == VarState::kFreeZero && std::abs(dj) > tol) {
          dir = dj < 0.0 ? 1.0 : -1.0;
        }
        if (dir == 0.0) continue;
        if (bland) {
          entering = v;
          direction = dir;
          break;
        }
        if (std::abs(dj) > best_score) {
          best_score = std::abs(dj);
          entering = v;
          direction = dir;
        }
      }
      if (entering == lo_.size()) return Status::kOptimal;

      load_column(entering, alpha);
      ftran(alpha);

      // Ratio test; ties go to the larger pivot (Bland: the smaller variable index).
      double theta = kInfinity;
      std::size_t leave = m_;
      bool leave_to_upper = false;
      double leave_pivot = 0.0;
      for (std::size_t p = 0; p < m_; ++p) {
        const double delta = direction * alpha[static_cast<Eigen::Index>(p)];
        if (std::abs(delta) <= opt_.pivot_tolerance) continue;
        const std::size_t v = head_[p];
        double t;
        bool to_upper;
        if (delta > 0.0) {
          if (!std::isfinite(lo_[v])) continue;
          t = std::max(0.0, x_[v] - lo_[v]) / delta;
          to_upper = false;
        } else {
          if (!std::isfinite(up_[v])) continue;
          t = std::max(0.0, up_[v] - x_[v]) / -delta;
          to_upper = true;
        }
        bool take = false;
        if (t < theta - 1e-12) {
          take = true;
        } else if (t <= theta + 1e-12 && leave < m_) {
          take = bland ? v < head_[leave] : std::abs(delta) > leave_pivot;
        }
        if (take) {
          theta = t;
          leave = p;
          leave_to_upper = to_upper;
          leave_pivot = std::abs(delta);
        }
      }
      const double flip = (std::isfinite(lo_[entering]) && std::isfinite(up_[entering]))
                              ? up_[entering] - lo_[entering]
                              : kInfinity;
      if (!std::isfinite(theta) && !std::isfinite(flip)) return Status::kUnbounded;

      ++iterations_;
      const double step = std::min(theta, flip);
      if (step > 1e-12) {
        degenerate_run = 0;
      } else if (++degenerate_run >= opt_.bland_after) {
        bland = true;
      }

      if (step != 0.0) {
        for (std::size_t p = 0; p < m_; ++p) {
          x_[head_[p]] -= step * direction * alpha[static_cast<Eigen::Index>(p)];
        }
      }

      if (flip <= theta) {
        if (direction > 0.0) {
          x_[entering] = up_[entering];
          state_[entering] = VarState::kAtUpper;
        } else {
          x_[entering] = lo_[entering];
          state_[entering] = VarState::kAtLower;
        }
        continue;
      }

      x_[entering] += direction * step;
      const std::size_t leaving = head_[leave];
      if (leave_to_upper) {
        x_[leaving] = up_[leaving];
        state_[leaving] = VarState::kAtUpper;
      } else {
        x_[leaving] = lo_[leaving];
        state_[leaving] = VarState::kAtLower;
      }
      if (phase_one && is_artificial(leaving)) {
        // An artificial that left the basis is never needed again.
        up_[leaving] = 0.0;
        x_[leaving] = 0.0;
      }
      head_[leave] = entering;
      state_[entering] = VarState::kBasic;
      push_eta(leave, alpha);
      if (++updates_since_refactor_ >= opt_.refactor_interval) refactor();
    }
  }

  const LinearProgram& lp_;
  SolverOptions opt_;
  std::size_t n_;
  std::size_t m_;
  std::size_t max_iterations_ = 0;
  std::size_t updates_since_refactor_ = 0;
  std::size_t iterations_ = 0;

  std::vector<double> lo_;
  std::vector<double> up_;
  std::vector<double> x_;
  std::vector<double> cost_;
  std::vector<VarState> state_;
  std::vector<std::size_t> art_row_;

  std::vector<std::size_t> head_;
  std::vector<double> sign_;
  std::vector<Eta> etas_;
};

}  // namespace

Solution solve_lp(const LinearProgram& lp, const SolverOptions& options) {
  lp.validate();
  BoundedSimplex simplex(lp, options);
  return simplex.run();
}

namespace {

struct Node {
  double bound;
  std::size_t id;
  std::size_t branch;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
};

struct NodeOrder {
  bool operator()(const Node& a, const Node& b) const {
    if (a.bound != b.bound) return a.bound < b.bound;
    return a.id > b.id;
  }
};

constexpr double kIntegralityTolerance = 1e-6;
constexpr double kPruneTolerance = 1e-9;

}  // namespace

MipSolution solve_mip_binary(const LinearProgram& lp, std::span<const std::size_t> binary_indices,
                             CardinalityBudget budget, const SolverOptions& options) {
  if (binary_indices.empty()) {
    MipSolution out;
    out.solution = solve_lp(lp, options);
    out.nodes = 1;
    return out;
  }
  lp.validate();
  const auto n = static_cast<Eigen::Index>(lp.num_variables());
  std::vector<bool> seen(static_cast<std::size_t>(n), false);
  for (const std::size_t j : binary_indices) {
    if (j >= static_cast<std::size_t>(n) || seen[j]) {
      throw InvalidInput("solve_mip_binary: binary index out of range or repeated");
    }
    seen[j] = true;
  }

  LinearProgram base = lp;
  const auto m = base.constraints.rows();
  base.constraints.conservativeResize(m + 1, n);
  base.constraints.row(m).setZero();
  base.rhs.conservativeResize(m + 1);
  base.rhs[m] = static_cast<double>(budget.max_ones);
  for (const std::size_t j : binary_indices) {
    const auto jj = static_cast<Eigen::Index>(j);
    base.constraints(m, jj) = 1.0;
    base.lower[jj] = std::max(base.lower[jj], 0.0);
    base.upper[jj] = std::min(base.upper[jj], 1.0);
  }
  base.validate();

  MipSolution best;
  best.solution.status = Status::kInfeasible;
  double best_objective = -kInfinity;
  std::size_t next_id = 0;
  std::priority_queue<Node, std::vector<Node>, NodeOrder> frontier;

  auto solve_with = [&](const Eigen::VectorXd& lower, const Eigen::VectorXd& upper) {
    LinearProgram node_lp = base;
    node_lp.lower = lower;
    node_lp.upper = upper;
    ++best.nodes;
    return solve_lp(node_lp, options);
  };

  bool unbounded = false;
  auto consider = [&](const Eigen::VectorXd& lower, const Eigen::VectorXd& upper) {
    const Solution sol = solve_with(lower, upper);
    if (sol.status == Status::kUnbounded) {
      unbounded = true;
      return;
    }
    if (sol.status != Status::kOptimal) {
      if (best.solution.x.size() == 0) best.solution.x = sol.x;
      return;
    }
    if (sol.objective_value <= best_objective + kPruneTolerance) return;

    // Most fractional binary, lowest index on ties.
    double worst = 0.0;
    std::size_t branch = binary_indices.front();
    for (const std::size_t j : binary_indices) {
      const double v = sol.x[static_cast<Eigen::Index>(j)];
      const double frac = std::min(v, 1.0 - v);
      if (frac > worst) {
        worst = frac;
        branch = j;
      }
    }
    if (worst > kIntegralityTolerance) {
      frontier.push(Node{sol.objective_value, next_id++, branch, lower, upper});
      return;
    }
    // Integral relaxation: pin the binaries and re-solve for a clean point.
    Eigen::VectorXd fixed_lower = lower;
    Eigen::VectorXd fixed_upper = upper;
    std::vector<int> values;
    values.reserve(binary_indices.size());
    for (const std::size_t j : binary_indices) {
      const auto jj = static_cast<Eigen::Index>(j);
      const int v = sol.x[jj] >= 0.5 ? 1 : 0;
      values.push_back(v);
      fixed_lower[jj] = v;
      fixed_upper[jj] = v;
    }
    const Solution pinned = solve_with(fixed_lower, fixed_upper);
    if (pinned.status == Status::kOptimal && pinned.objective_value > best_objective) {
      best_objective = pinned.objective_value;
      best.solution = pinned;
      best.binary_values = std::move(values);
    }
  };

  consider(base.lower, base.upper);
  while (!frontier.empty() && !unbounded) {
    Node node = frontier.top();
    frontier.pop();
    if (node.bound <= best_objective + kPruneTolerance) continue;

    const auto bj = static_cast<Eigen::Index>(node.branch);
    for (int value = 0; value <= 1; ++value) {
      Eigen::VectorXd lower = node.lower;
      Eigen::VectorXd upper = node.upper;
      lower[bj] = value;
      upper[bj] = value;
      consider(lower, upper);
    }
  }

  if (unbounded) {
    best.solution.status = Status::kUnbounded;
    best.binary_values.clear();
  }
  return best;
}

}  // namespace pere::lp
