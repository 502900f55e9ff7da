#include "pere/report.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <ostream>
#include <thread>

#include <json.hpp>

#include "pere/behavior.hpp"
#include "pere/errors.hpp"

namespace pere {

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr double RankingMetrics::*kMetricFields[] = {&RankingMetrics::hr1,    &RankingMetrics::auc10,
                                                     &RankingMetrics::ndcg10, &RankingMetrics::ndcg30,
                                                     &RankingMetrics::map,    &RankingMetrics::mrr};
constexpr const char* kMetricNames[] = {"hr1", "auc10", "ndcg10", "ndcg30", "map", "mrr"};

ordered_json metrics_json(const RankingMetrics& m) {
  ordered_json j;
  for (std::size_t f = 0; f < std::size(kMetricFields); ++f) j[kMetricNames[f]] = m.*kMetricFields[f];
  return j;
}

}  // namespace

std::uint64_t user_seed(const Config& config, std::size_t user_index) { return mix_seed(config.seed, user_index); }

SimulatedUser simulated_user(const Catalog& catalog, const Config& config, std::size_t user_index) {
  UserSpec spec;
  spec.kappa = config.kappa;
  spec.relevant_count = config.relevant_count;
  spec.flip_prob = config.tau;
  spec.squash = config.squash;
  return generate_user(catalog, spec, user_seed(config, user_index));
}

MethodSummary summarize(Method method, const std::vector<UserRow>& rows) {
  MethodSummary s;
  s.method = method;
  std::vector<const UserRow*> mine;
  for (const auto& r : rows)
    if (r.method == method) mine.push_back(&r);
  s.users = mine.size();
  if (mine.empty()) return s;
  const double n = static_cast<double>(mine.size());
  for (auto field : kMetricFields) {
    double sum = 0.0;
    for (const auto* r : mine) sum += r->metrics.*field;
    const double mean = sum / n;
    double ss = 0.0;
    for (const auto* r : mine) ss += (r->metrics.*field - mean) * (r->metrics.*field - mean);
    s.mean.*field = mean;
    s.std_error.*field = mine.size() > 1 ? std::sqrt(ss / (n - 1.0)) / std::sqrt(n) : 0.0;
  }
  std::size_t longest = 0;
  for (const auto* r : mine) longest = std::max(longest, r->radius_trace.size());
  for (std::size_t t = 0; t < longest; ++t) {
    double sum = 0.0;
    std::size_t count = 0;
    for (const auto* r : mine) {
      if (t < r->radius_trace.size()) {
        sum += r->radius_trace[t];
        ++count;
      }
    }
    s.mean_radius_trace.push_back(sum / static_cast<double>(count));
  }
  return s;
}

SimulationReport run_simulation(std::shared_ptr<const Catalog> catalog, const SimulationSpec& spec) {
  if (!catalog) throw InvalidInput("run_simulation: catalog is required");
  if (spec.methods.empty()) throw InvalidInput("run_simulation: no strategies requested");
  spec.config.validate(catalog->size());
  if (spec.config.relevant_count > catalog->size()) {
    throw InvalidInput("run_simulation: k_rel exceeds the catalog size");
  }

  std::vector<Elicitor> elicitors;
  elicitors.reserve(spec.methods.size());
  for (Method m : spec.methods) elicitors.push_back(make_elicitor(catalog, spec.config, m));

  SimulationReport report;
  report.config = spec.config;
  report.users = spec.users;
  report.rows.resize(spec.methods.size() * spec.users);
  const std::size_t total = spec.users * spec.methods.size();

  // Work item k covers user k; every method is run for that user in turn.
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  const auto worker = [&] {
    while (true) {
      const std::size_t u = next.fetch_add(1);
      if (u >= spec.users) return;
      try {
        const SimulatedUser user = simulated_user(*catalog, spec.config, u);
        const std::uint64_t seed = user_seed(spec.config, u);
        for (std::size_t m = 0; m < spec.methods.size(); ++m) {
          const ExperimentResult r = run_experiment(elicitors[m], user, mix_seed(seed, 1));
          UserRow& row = report.rows[m * spec.users + u];
          row.method = spec.methods[m];
          row.user_index = u;
          row.user_seed = seed;
          row.metrics = r.metrics;
          row.rounds = r.adaptive_rounds;
          row.final_radius = r.radius_trace.empty() ? 0.5 : r.radius_trace.back();
          row.radius_trace = r.radius_trace;
          row.contained = r.contained;
          row.round_seconds = r.round_seconds;
        }
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(spec.users);
        return;
      }
    }
  };

  std::size_t threads = spec.threads ? spec.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, std::max<std::size_t>(spec.users, 1));
  if (threads <= 1 || total <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  for (Method m : spec.methods) report.summary.push_back(summarize(m, report.rows));
  return report;
}

void write_report_csv(std::ostream& out, const SimulationReport& report) {
  out << "strategy,user_seed,hr1,auc10,ndcg10,ndcg30,map,mrr,rounds,final_radius\n";
  for (const auto& r : report.rows) {
    out << to_string(r.method) << ',' << r.user_seed;
    for (auto field : kMetricFields) out << ',' << format_double(r.metrics.*field);
    out << ',' << r.rounds << ',' << format_double(r.final_radius) << '\n';
  }
}

std::string report_to_json(const SimulationReport& report) {
  ordered_json doc;
  doc["config"] = ordered_json::parse(config_to_json(report.config));
  doc["users"] = report.users;
  ordered_json summary = ordered_json::array();
  for (const auto& s : report.summary) {
    ordered_json j;
    j["strategy"] = to_string(s.method);
    j["users"] = s.users;
    j["mean"] = metrics_json(s.mean);
    j["stderr"] = metrics_json(s.std_error);
    j["mean_radius_trace"] = s.mean_radius_trace;
    summary.push_back(std::move(j));
  }
  doc["summary"] = std::move(summary);
  ordered_json rows = ordered_json::array();
  for (const auto& r : report.rows) {
    ordered_json j;
    j["strategy"] = to_string(r.method);
    j["user_index"] = r.user_index;
    j["user_seed"] = r.user_seed;
    j["metrics"] = metrics_json(r.metrics);
    j["rounds"] = r.rounds;
    j["final_radius"] = r.final_radius;
    j["radius_trace"] = r.radius_trace;
    rows.push_back(std::move(j));
  }
  doc["rows"] = std::move(rows);
  return doc.dump(2) + "\n";
}

std::string timing_to_json(const SimulationReport& report) {
  ordered_json rows = ordered_json::array();
  for (const auto& r : report.rows) {
    ordered_json j;
    j["strategy"] = to_string(r.method);
    j["user_index"] = r.user_index;
    j["round_seconds"] = r.round_seconds;
    rows.push_back(std::move(j));
  }
  ordered_json doc;
  doc["rows"] = std::move(rows);
  return doc.dump(2) + "\n";
}

}  // namespace pere
