#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace pere::lp {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// maximize objective'x  s.t.  constraints * x <= rhs,  lower <= x <= upper.
/// Bounds may be infinite.
struct LinearProgram {
  Eigen::VectorXd objective;
  Eigen::MatrixXd constraints;
  Eigen::VectorXd rhs;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  std::size_t num_variables() const { return static_cast<std::size_t>(objective.size()); }
  std::size_t num_constraints() const { return static_cast<std::size_t>(constraints.rows()); }

  /// Throws InvalidInput on inconsistent dimensions, NaNs, or lower > upper.
  void validate() const;
};

enum class Status { kOptimal, kInfeasible, kUnbounded };

const char* to_string(Status status);

struct Solution {
  Status status = Status::kInfeasible;
  /// Optimal point when status is kOptimal. When kInfeasible, the end point of
  /// phase one (a minimizer of the total constraint violation), which callers
  /// use to report the most violated row.
  Eigen::VectorXd x;
  double objective_value = 0.0;
  std::size_t iterations = 0;
};

struct SolverOptions {
  double pivot_tolerance = 1e-9;
  double feasibility_tolerance = 1e-7;
  double optimality_tolerance = 1e-9;
  /// Consecutive degenerate pivots after which pricing switches to Bland's rule.
  std::size_t bland_after = 1000;
  std::size_t refactor_interval = 64;
  /// 0 selects a size-dependent default.
  std::size_t max_iterations = 0;
};

/// Bounded-variable revised simplex (two phases, product-form basis inverse).
/// Deterministic for identical input.
Solution solve_lp(const LinearProgram& lp, const SolverOptions& options = {});

/// Cap on the number of binaries set to one.
struct CardinalityBudget {
  std::size_t max_ones = 0;
};

struct MipSolution {
  Solution solution;
  /// 0/1 value per entry of binary_indices, in the same order.
  std::vector<int> binary_values;
  std::size_t nodes = 0;
};

/// Best-first branch and bound over the listed variables, each restricted to
/// {0, 1}, with sum(binaries) <= budget.max_ones. Branches on the most
/// fractional binary. With no binaries this is exactly solve_lp.
MipSolution solve_mip_binary(const LinearProgram& lp, std::span<const std::size_t> binary_indices,
                             CardinalityBudget budget, const SolverOptions& options = {});

}  // namespace pere::lp
