#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "pere/data.hpp"
#include "pere/engine.hpp"
#include "pere/metrics.hpp"

namespace pere {

struct SimulationSpec {
  Config config;
  std::vector<Method> methods = all_methods();
  std::size_t users = 100;
  /// Worker threads; 0 uses the hardware concurrency.
  std::size_t threads = 0;
};

/// One simulated user under one method.
struct UserRow {
  Method method = Method::kPere;
  std::size_t user_index = 0;
  std::uint64_t user_seed = 0;
  RankingMetrics metrics;
  std::size_t rounds = 0;
  double final_radius = 0.0;
  std::vector<double> radius_trace;
  std::vector<char> contained;
  std::vector<double> round_seconds;
};

struct MethodSummary {
  Method method = Method::kPere;
  std::size_t users = 0;
  RankingMetrics mean;
  /// Standard error of each mean (sample standard deviation over sqrt(n)).
  RankingMetrics std_error;
  /// Mean radius after each solve, over users that reached it.
  std::vector<double> mean_radius_trace;
};

struct SimulationReport {
  Config config;
  std::size_t users = 0;
  /// Grouped by method in request order, then by user index.
  std::vector<UserRow> rows;
  std::vector<MethodSummary> summary;
};

/// User u is generate_user(catalog, {kappa, k_rel, tau, squash}, mix_seed(seed, u)),
/// shared by every method, so the comparison is paired.
std::uint64_t user_seed(const Config& config, std::size_t user_index);
SimulatedUser simulated_user(const Catalog& catalog, const Config& config, std::size_t user_index);

/// Runs every (method, user) pair across a worker pool. The result does not
/// depend on the thread count.
SimulationReport run_simulation(std::shared_ptr<const Catalog> catalog, const SimulationSpec& spec);

MethodSummary summarize(Method method, const std::vector<UserRow>& rows);

/// Columns: strategy, user_seed, hr1, auc10, ndcg10, ndcg30, map, mrr, rounds, final_radius.
void write_report_csv(std::ostream& out, const SimulationReport& report);

/// Config echo, per-user rows, per-method means with standard errors and
/// radius traces. Wall-clock timings are left out so equal seeds give equal bytes.
std::string report_to_json(const SimulationReport& report);

/// Per-round wall-clock seconds for every row.
std::string timing_to_json(const SimulationReport& report);

}  // namespace pere
