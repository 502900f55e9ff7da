#include "pere/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "pere/errors.hpp"

namespace pere {

Catalog::Catalog(std::vector<std::string> ids, Eigen::MatrixXd embeddings, Eigen::VectorXd weights,
                 Normalization normalization)
    : ids_(std::move(ids)),
      embeddings_(std::move(embeddings)),
      weights_(std::move(weights)),
      normalization_(std::move(normalization)) {
  if (ids_.empty()) throw SchemaError("catalog has no items");
  if (embeddings_.rows() < 1) throw SchemaError("catalog embeddings must have d >= 1");
  if (static_cast<std::size_t>(embeddings_.cols()) != ids_.size() ||
      static_cast<std::size_t>(weights_.size()) != ids_.size()) {
    throw SchemaError("catalog: ids, embeddings and weights disagree on the number of items");
  }
  if (!embeddings_.allFinite() || embeddings_.minCoeff() < 0.0 || embeddings_.maxCoeff() > 1.0) {
    throw InvalidInput("catalog: embeddings must lie in the unit hypercube");
  }
  for (Eigen::Index i = 0; i < weights_.size(); ++i) {
    if (!(weights_[i] >= 0.0 && weights_[i] <= 1.0)) {
      throw InvalidInput("catalog: weights must lie in [0,1]");
    }
    if (i > 0 && weights_[i] > weights_[i - 1]) {
      throw InvalidInput("catalog: items must be sorted by descending weight");
    }
  }
  index_.reserve(ids_.size());
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    if (!index_.emplace(ids_[i], i).second) throw SchemaError("catalog: duplicate id '" + ids_[i] + "'");
  }
}

std::optional<ItemIndex> Catalog::find(std::string_view id) const {
  auto it = index_.find(std::string(id));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

Catalog normalize_catalog(std::vector<std::string> ids, Eigen::MatrixXd embeddings,
                          std::optional<Eigen::VectorXd> weights) {
  const auto n = static_cast<Eigen::Index>(ids.size());
  if (n == 0) throw SchemaError("catalog has no items");
  Normalization norm;
  if (!weights) {
    weights = Eigen::VectorXd::Ones(n);
    norm.weights_defaulted = true;
  }
  if (weights->size() != n || embeddings.cols() != n) {
    throw SchemaError("catalog: ids, embeddings and weights disagree on the number of items");
  }
  if (!embeddings.allFinite() || !weights->allFinite()) throw SchemaError("catalog: non-finite value");
  if (weights->minCoeff() < 0.0) throw SchemaError("catalog: negative popularity weight");

  if (embeddings.minCoeff() < 0.0 || embeddings.maxCoeff() > 1.0) {
    norm.rescaled = true;
    norm.column_min = embeddings.rowwise().minCoeff();
    norm.column_max = embeddings.rowwise().maxCoeff();
    for (Eigen::Index k = 0; k < embeddings.rows(); ++k) {
      const double lo = norm.column_min[k];
      const double span = norm.column_max[k] - lo;
      for (Eigen::Index i = 0; i < n; ++i) {
        embeddings(k, i) = span > 0.0 ? (embeddings(k, i) - lo) / span : std::clamp(embeddings(k, i), 0.0, 1.0);
      }
    }
  }
  const double wmax = weights->maxCoeff();
  if (wmax > 0.0) *weights /= wmax;

  std::vector<std::size_t> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return (*weights)[static_cast<Eigen::Index>(a)] > (*weights)[static_cast<Eigen::Index>(b)]; });

  std::vector<std::string> sorted_ids;
  sorted_ids.reserve(order.size());
  Eigen::MatrixXd sorted_emb(embeddings.rows(), n);
  Eigen::VectorXd sorted_w(n);
  for (std::size_t k = 0; k < order.size(); ++k) {
    const auto src = static_cast<Eigen::Index>(order[k]);
    sorted_ids.push_back(std::move(ids[order[k]]));
    sorted_emb.col(static_cast<Eigen::Index>(k)) = embeddings.col(src);
    sorted_w[static_cast<Eigen::Index>(k)] = (*weights)[src];
  }
  return Catalog(std::move(sorted_ids), std::move(sorted_emb), std::move(sorted_w), std::move(norm));
}

namespace {

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

double parse_number(std::string_view field, std::size_t line_no) {
  double value = 0.0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  if (!field.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || field.empty()) {
    throw ParseError("line " + std::to_string(line_no) + ": cannot parse number '" + std::string(field) + "'",
                     line_no);
  }
  return value;
}

}  // namespace

Catalog read_catalog(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  auto next_line = [&]() -> bool {
    if (!std::getline(in, line)) return false;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
  };
  if (!next_line() || line.empty()) throw SchemaError("catalog file is empty");

  const auto header = split_commas(line);
  if (header.empty() || header[0] != "id") throw SchemaError("catalog header must start with 'id'");
  const bool has_weight = header.size() > 1 && header[1] == "weight";
  const std::size_t first_dim = has_weight ? 2 : 1;
  if (header.size() <= first_dim) throw SchemaError("catalog header declares no embedding columns");
  const std::size_t dim = header.size() - first_dim;
  for (std::size_t k = 0; k < dim; ++k) {
    if (header[first_dim + k] != "e" + std::to_string(k)) {
      throw SchemaError("catalog header column " + std::to_string(first_dim + k) + " should be e" +
                        std::to_string(k));
    }
  }

  std::vector<std::string> ids;
  std::vector<double> coords;
  std::vector<double> weights;
  while (next_line()) {
    if (line.empty()) continue;
    const auto fields = split_commas(line);
    if (fields.size() != header.size()) {
      throw SchemaError("line " + std::to_string(line_no) + ": expected " + std::to_string(dim) +
                        " embedding columns, found " +
                        std::to_string(fields.size() < first_dim ? 0 : fields.size() - first_dim));
    }
    if (fields[0].empty()) throw ParseError("line " + std::to_string(line_no) + ": empty id", line_no);
    ids.emplace_back(fields[0]);
    if (has_weight) weights.push_back(parse_number(fields[1], line_no));
    for (std::size_t k = 0; k < dim; ++k) coords.push_back(parse_number(fields[first_dim + k], line_no));
  }
  if (ids.empty()) throw SchemaError("catalog file has a header but no items");

  const auto n = static_cast<Eigen::Index>(ids.size());
  Eigen::MatrixXd emb = Eigen::Map<Eigen::MatrixXd>(coords.data(), static_cast<Eigen::Index>(dim), n);
  std::optional<Eigen::VectorXd> w;
  if (has_weight) w = Eigen::Map<Eigen::VectorXd>(weights.data(), n);
  return normalize_catalog(std::move(ids), std::move(emb), std::move(w));
}

Catalog load_catalog(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open catalog file " + path.string());
  return read_catalog(in);
}

std::string format_double(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc()) throw Error("format_double: conversion failed");
  return std::string(buf, ptr);
}

void write_catalog(std::ostream& out, const Catalog& catalog) {
  out << "id,weight";
  for (std::size_t k = 0; k < catalog.dim(); ++k) out << ",e" << k;
  out << '\n';
  for (ItemIndex i = 0; i < catalog.size(); ++i) {
    out << catalog.id(i) << ',' << format_double(catalog.weight(i));
    const auto e = catalog.embedding(i);
    for (Eigen::Index k = 0; k < e.size(); ++k) out << ',' << format_double(e[k]);
    out << '\n';
  }
}

void save_catalog(const std::filesystem::path& path, const Catalog& catalog) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write catalog file " + path.string());
  write_catalog(out, catalog);
}

Catalog synth_catalog(std::size_t n_items, std::size_t dim, std::size_t clusters, std::uint64_t seed,
                      double cluster_spread) {
  if (n_items == 0 || dim == 0 || clusters == 0 || clusters > n_items) {
    throw InvalidInput("synth_catalog: need N >= clusters >= 1 and d >= 1");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> mean_dist(0.15, 0.85);
  std::normal_distribution<double> noise(0.0, cluster_spread);
  std::uniform_int_distribution<std::size_t> pick(0, clusters - 1);

  const auto d = static_cast<Eigen::Index>(dim);
  const auto n = static_cast<Eigen::Index>(n_items);
  Eigen::MatrixXd means(d, static_cast<Eigen::Index>(clusters));
  for (Eigen::Index c = 0; c < means.cols(); ++c)
    for (Eigen::Index k = 0; k < d; ++k) means(k, c) = mean_dist(rng);

  Eigen::MatrixXd emb(d, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto c = static_cast<Eigen::Index>(clusters == 1 ? 0 : pick(rng));
    for (Eigen::Index k = 0; k < d; ++k) emb(k, i) = std::clamp(means(k, c) + noise(rng), 0.0, 1.0);
  }

  std::vector<std::size_t> rank(n_items);
  std::iota(rank.begin(), rank.end(), std::size_t{1});
  std::shuffle(rank.begin(), rank.end(), rng);
  Eigen::VectorXd w(n);
  std::vector<std::string> ids;
  ids.reserve(n_items);
  for (std::size_t i = 0; i < n_items; ++i) {
    w[static_cast<Eigen::Index>(i)] = 1.0 / static_cast<double>(rank[i]);
    ids.push_back("item" + std::to_string(i));
  }
  return normalize_catalog(std::move(ids), std::move(emb), std::move(w));
}

const char* to_string(BurnInStrategy s) {
  switch (s) {
    case BurnInStrategy::kDpp:
      return "dpp";
    case BurnInStrategy::kKMedoids:
      return "kmedoids";
    case BurnInStrategy::kRandom:
      return "random";
    case BurnInStrategy::kPopularity:
      return "popularity";
  }
  return "dpp";
}

BurnInStrategy parse_burn_in_strategy(std::string_view name) {
  if (name == "dpp") return BurnInStrategy::kDpp;
  if (name == "kmedoids") return BurnInStrategy::kKMedoids;
  if (name == "random") return BurnInStrategy::kRandom;
  if (name == "popularity") return BurnInStrategy::kPopularity;
  throw InvalidInput("unknown burn-in strategy '" + std::string(name) + "'");
}

Squash parse_squash(std::string_view name) {
  if (name == "sigmoid") return Squash::kSigmoid;
  if (name == "tanh") return Squash::kTanh;
  throw InvalidInput("unknown squash function '" + std::string(name) + "'");
}

void Config::validate(std::size_t catalog_size) const {
  if (batch_size < 1) throw InvalidInput("config: m must be >= 1");
  if (burn_in_size > popular_count) throw InvalidInput("config: K must not exceed P");
  if (popular_count > catalog_size) {
    throw InvalidInput("config: P (" + std::to_string(popular_count) + ") exceeds catalog size (" +
                       std::to_string(catalog_size) + ")");
  }
  if (!(tau >= 0.0 && tau <= 1.0)) throw InvalidInput("config: tau must lie in [0,1]");
  if (!(kappa > 0.0) || !std::isfinite(kappa)) throw InvalidInput("config: kappa must be positive");
}

Config parse_config(std::string_view json_text) {
  using nlohmann::json;
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("config: ") + e.what(), 0);
  }
  if (!doc.is_object()) throw SchemaError("config: top level must be an object");

  Config cfg;
  auto count = [](const json& v, const std::string& key) -> std::size_t {
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
      throw SchemaError("config: '" + key + "' must be a non-negative integer");
    }
    return v.get<std::size_t>();
  };
  auto real = [](const json& v, const std::string& key) -> double {
    if (!v.is_number()) throw SchemaError("config: '" + key + "' must be a number");
    return v.get<double>();
  };
  auto text = [](const json& v, const std::string& key) -> std::string {
    if (!v.is_string()) throw SchemaError("config: '" + key + "' must be a string");
    return v.get<std::string>();
  };
  try {
    for (const auto& [key, value] : doc.items()) {
      if (key == "K") {
        cfg.burn_in_size = count(value, key);
      } else if (key == "m") {
        cfg.batch_size = count(value, key);
      } else if (key == "T") {
        cfg.rounds = count(value, key);
      } else if (key == "P") {
        cfg.popular_count = count(value, key);
      } else if (key == "k_rec") {
        cfg.recommend_count = count(value, key);
      } else if (key == "k_rel") {
        cfg.relevant_count = count(value, key);
      } else if (key == "kappa") {
        cfg.kappa = real(value, key);
      } else if (key == "tau") {
        cfg.tau = real(value, key);
      } else if (key == "squash") {
        cfg.squash = parse_squash(text(value, key));
      } else if (key == "seed") {
        cfg.seed = count(value, key);
      } else if (key == "strategy") {
        cfg.strategy = parse_burn_in_strategy(text(value, key));
      } else if (key == "tolerant_mode") {
        if (!value.is_boolean()) throw SchemaError("config: 'tolerant_mode' must be a boolean");
        cfg.tolerant_mode = value.get<bool>();
      } else {
        throw SchemaError("config: unknown key '" + key + "'");
      }
    }
  } catch (const InvalidInput& e) {
    throw SchemaError(e.what());
  }
  return cfg;
}

Config load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open config file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str());
}

std::string config_to_json(const Config& c) {
  nlohmann::ordered_json j;
  j["K"] = c.burn_in_size;
  j["m"] = c.batch_size;
  j["T"] = c.rounds;
  j["P"] = c.popular_count;
  j["k_rec"] = c.recommend_count;
  j["k_rel"] = c.relevant_count;
  j["kappa"] = c.kappa;
  j["tau"] = c.tau;
  j["squash"] = to_string(c.squash);
  j["seed"] = c.seed;
  j["strategy"] = to_string(c.strategy);
  j["tolerant_mode"] = c.tolerant_mode;
  return j.dump(2);
}

}  // namespace pere
