#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include "pere/data.hpp"
#include "pere/engine.hpp"
#include "pere/errors.hpp"
#include "pere/estimation.hpp"
#include "pere/report.hpp"
#include "pere/service.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kRuntime = 1;
constexpr int kUsage = 2;

void setup_logging() {
  auto logger = spdlog::stderr_logger_mt("pere");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%Y-%m-%d %H:%M:%S.%e] [%l] %v");
  spdlog::set_level(spdlog::level::info);
  if (const char* level = std::getenv("PERE_LOG")) {
    const auto parsed = spdlog::level::from_str(level);
    // from_str maps unknown names to off; only "off" itself should silence output.
    if (parsed != spdlog::level::off || std::string(level) == "off") spdlog::set_level(parsed);
  }
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw pere::Error("cannot write " + path);
  out << text;
  if (!out) throw pere::Error("write failed for " + path);
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> parts;
  std::stringstream in(text);
  std::string part;
  while (std::getline(in, part, ',')) {
    if (!part.empty()) parts.push_back(part);
  }
  return parts;
}

std::shared_ptr<const pere::Catalog> read_catalog_file(const std::string& path) {
  auto catalog = std::make_shared<const pere::Catalog>(pere::load_catalog(path));
  const auto& norm = catalog->normalization();
  if (norm.weights_defaulted) spdlog::warn("{}: no weight column; using uniform popularity 1.0", path);
  if (norm.rescaled) spdlog::warn("{}: embeddings outside [0,1]; rescaled per dimension", path);
  return catalog;
}

struct CommonOptions {
  std::string config_path;
  std::string catalog_path;
  std::optional<std::uint64_t> seed;
  std::optional<double> tau;
  std::optional<std::string> squash;

  pere::Config load() const {
    pere::Config c = config_path.empty() ? pere::Config{} : pere::load_config(config_path);
    if (seed) c.seed = *seed;
    if (tau) c.tau = *tau;
    if (squash) c.squash = pere::parse_squash(*squash);
    return c;
  }
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--config", o.config_path, "JSON run configuration")->check(CLI::ExistingFile);
  cmd->add_option("--seed", o.seed, "Seed (overrides the config)");
  cmd->add_option("--tau", o.tau, "Answer flip probability (overrides the config)");
  cmd->add_option("--squash", o.squash, "sigmoid or tanh (overrides the config)");
}

int cmd_simulate(const CommonOptions& common, std::size_t users, const std::string& strategies, std::size_t threads,
                 const std::string& out) {
  pere::SimulationSpec spec;
  spec.config = common.load();
  spec.users = users;
  spec.threads = threads;
  if (!strategies.empty()) {
    spec.methods.clear();
    for (const auto& name : split_list(strategies)) spec.methods.push_back(pere::parse_method(name));
  }
  const auto catalog = read_catalog_file(common.catalog_path);
  spdlog::info("simulate: {} items, d={}, {} users, {} strategies", catalog->size(), catalog->dim(), users,
               spec.methods.size());
  const auto report = pere::run_simulation(catalog, spec);
  for (const auto& s : report.summary) {
    spdlog::info("{:<10} ndcg10={:.4f} (se {:.4f}) hr1={:.4f} map={:.4f}", pere::to_string(s.method), s.mean.ndcg10,
                 s.std_error.ndcg10, s.mean.hr1, s.mean.map);
  }
  std::ostringstream csv;
  pere::write_report_csv(csv, report);
  write_file(out + ".csv", csv.str());
  write_file(out + ".json", pere::report_to_json(report));
  write_file(out + ".timing.json", pere::timing_to_json(report));
  spdlog::info("wrote {0}.csv, {0}.json, {0}.timing.json", out);
  return kOk;
}

int cmd_fit_kappa(const std::string& path, bool grid, double kappa_max) {
  const auto data = pere::load_experience(path);
  data.validate();
  if (grid) {
    std::cout << "kappa,nll\n";
    constexpr int kPoints = 50;
    for (int g = 0; g < kPoints; ++g) {
      const double kappa = kappa_max * g / (kPoints - 1);
      std::string nll;
      try {
        nll = pere::format_double(pere::negative_log_likelihood(data, kappa));
      } catch (const pere::NumericDomainError&) {
        nll = "inf";
      }
      std::cout << pere::format_double(kappa) << ',' << nll << '\n';
    }
  }
  const double kappa = pere::fit_kappa(data, kappa_max);
  spdlog::info("fit-kappa: {} users x {} items, nll={}", data.users(), data.items(),
               pere::negative_log_likelihood(data, kappa));
  std::cout << (grid ? "kappa_hat," : "") << pere::format_double(kappa) << '\n';
  return kOk;
}

int cmd_serve(const CommonOptions& common, const std::string& strategy, const std::string& host, int port,
              long ttl_seconds) {
  pere::Config config = common.load();
  if (!strategy.empty()) config.strategy = pere::parse_burn_in_strategy(strategy);
  std::shared_ptr<const pere::Catalog> catalog;
  if (!common.catalog_path.empty()) {
    catalog = read_catalog_file(common.catalog_path);
    config.validate(catalog->size());
    spdlog::info("serve: catalog with {} items, d={}", catalog->size(), catalog->dim());
  } else {
    spdlog::warn("serve: no catalog; session creation answers 503");
  }
  pere::SessionService service(catalog, config, {std::chrono::seconds(ttl_seconds), config.seed});
  pere::HttpServer server(service, [](const std::string& method, const std::string& path, int status) {
    spdlog::info("{} {} {}", method, path, status);
  });

  // Signals are taken synchronously by this thread; the server thread never sees them.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  const int bound = server.bind(host, port);
  std::cout << "listening on " << host << ':' << bound << std::endl;
  spdlog::info("listening on {}:{}", host, bound);
  std::thread worker([&server] { server.run(); });
  int received = 0;
  sigwait(&signals, &received);
  spdlog::info("signal {}; shutting down ({} sessions discarded)", received, service.session_count());
  server.stop();
  worker.join();
  return kOk;
}

int cmd_synth_catalog(std::size_t items, std::size_t dim, std::size_t clusters, std::uint64_t seed, double spread,
                      const std::string& out) {
  const auto catalog = pere::synth_catalog(items, dim, clusters, seed, spread);
  if (out.empty()) {
    pere::write_catalog(std::cout, catalog);
  } else {
    pere::save_catalog(out, catalog);
  }
  return kOk;
}

int cmd_synth_experience(const std::string& catalog_path, std::size_t users, double kappa, std::uint64_t seed,
                         const std::string& out) {
  const auto catalog = read_catalog_file(catalog_path);
  const auto data = pere::synth_experience(*catalog, users, kappa, seed);
  if (out.empty()) {
    std::cout << pere::experience_to_json(data);
  } else {
    write_file(out, pere::experience_to_json(data));
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"Cold-start preference elicitation and recommendation"};
  app.require_subcommand(1);

  CommonOptions sim_common;
  std::size_t sim_users = 100;
  std::string sim_strategies;
  std::size_t sim_threads = 0;
  std::string sim_out = "report";
  auto* simulate = app.add_subcommand("simulate", "Run simulated users through every strategy and write a report");
  add_common(simulate, sim_common);
  simulate->add_option("--catalog", sim_common.catalog_path, "Catalog CSV")->required()->check(CLI::ExistingFile);
  simulate->add_option("--users", sim_users, "Number of simulated users")->check(CLI::PositiveNumber);
  simulate->add_option("--strategy", sim_strategies,
                       "Comma-separated subset of pere,dpp-only,cdpp,random,popularity,kmedoids (default: all)");
  simulate->add_option("--threads", sim_threads, "Worker threads (0: hardware concurrency)");
  simulate->add_option("--out", sim_out, "Output stem; writes <out>.csv, <out>.json and <out>.timing.json");

  std::string fit_path;
  bool fit_grid = false;
  double fit_max = pere::kKappaMax;
  auto* fit = app.add_subcommand("fit-kappa", "Maximum-likelihood estimate of kappa from an experience file");
  fit->add_option("experience", fit_path, "Experience JSON file")->required()->check(CLI::ExistingFile);
  fit->add_flag("--grid", fit_grid, "Also print the NLL on 50 evenly spaced kappa values");
  fit->add_option("--kappa-max", fit_max, "Upper end of the search interval")->check(CLI::PositiveNumber);

  CommonOptions serve_common;
  std::string serve_strategy;
  std::string serve_host = "127.0.0.1";
  int serve_port = 8080;
  long serve_ttl = 3600;
  auto* serve = app.add_subcommand("serve", "Serve the /v1 session API over HTTP");
  add_common(serve, serve_common);
  serve->add_option("--catalog", serve_common.catalog_path, "Catalog CSV")->check(CLI::ExistingFile);
  serve->add_option("--strategy", serve_strategy, "Burn-in strategy: dpp, kmedoids, random or popularity");
  serve->add_option("--host", serve_host, "Bind address");
  serve->add_option("--port", serve_port, "Port (0 picks a free one)")->check(CLI::Range(0, 65535));
  serve->add_option("--ttl", serve_ttl, "Idle session lifetime in seconds")->check(CLI::PositiveNumber);

  std::size_t cat_items = 2000;
  std::size_t cat_dim = 16;
  std::size_t cat_clusters = 10;
  std::uint64_t cat_seed = 0;
  double cat_spread = 0.08;
  std::string cat_out;
  auto* synth_cat = app.add_subcommand("synth-catalog", "Write a synthetic clustered catalog CSV");
  synth_cat->add_option("--items", cat_items, "Number of items")->check(CLI::PositiveNumber);
  synth_cat->add_option("--dim", cat_dim, "Embedding dimension")->check(CLI::PositiveNumber);
  synth_cat->add_option("--clusters", cat_clusters, "Number of clusters")->check(CLI::PositiveNumber);
  synth_cat->add_option("--seed", cat_seed, "Seed");
  synth_cat->add_option("--spread", cat_spread, "Cluster standard deviation")->check(CLI::NonNegativeNumber);
  synth_cat->add_option("--out", cat_out, "Output path (default: stdout)");

  std::string exp_catalog;
  std::size_t exp_users = 200;
  double exp_kappa = 1.0;
  std::uint64_t exp_seed = 0;
  std::string exp_out;
  auto* synth_exp = app.add_subcommand("synth-experience", "Write a synthetic experience file for fit-kappa");
  synth_exp->add_option("--catalog", exp_catalog, "Catalog CSV")->required()->check(CLI::ExistingFile);
  synth_exp->add_option("--users", exp_users, "Number of users")->check(CLI::PositiveNumber);
  synth_exp->add_option("--kappa", exp_kappa, "True kappa")->check(CLI::PositiveNumber);
  synth_exp->add_option("--seed", exp_seed, "Seed");
  synth_exp->add_option("--out", exp_out, "Output path (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*simulate) return cmd_simulate(sim_common, sim_users, sim_strategies, sim_threads, sim_out);
    if (*fit) return cmd_fit_kappa(fit_path, fit_grid, fit_max);
    if (*serve) return cmd_serve(serve_common, serve_strategy, serve_host, serve_port, serve_ttl);
    if (*synth_cat) return cmd_synth_catalog(cat_items, cat_dim, cat_clusters, cat_seed, cat_spread, cat_out);
    if (*synth_exp) return cmd_synth_experience(exp_catalog, exp_users, exp_kappa, exp_seed, exp_out);
  } catch (const pere::ParseError& e) {
    spdlog::error("{}", e.what());
    return kUsage;
  } catch (const pere::SchemaError& e) {
    spdlog::error("{}", e.what());
    return kUsage;
  } catch (const pere::InvalidInput& e) {
    spdlog::error("{}", e.what());
    return kUsage;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kRuntime;
  }
  return kUsage;
}
