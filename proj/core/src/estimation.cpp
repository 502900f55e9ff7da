#include "pere/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include <json.hpp>

#include "pere/behavior.hpp"
#include "pere/data.hpp"
#include "pere/errors.hpp"

namespace pere {

namespace {

// Neumaier summation; terms are always added in row-major order.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

double softplus(double a) {
  if (a == -std::numeric_limits<double>::infinity()) return 0.0;
  return a > 0.0 ? a + std::log1p(std::exp(-a)) : std::log1p(std::exp(a));
}

double logistic(double a) {
  if (a >= 0.0) return 1.0 / (1.0 + std::exp(-a));
  const double e = std::exp(a);
  return e / (1.0 + e);
}

struct Term {
  double a;      // kappa/(sqrt(d) - c) - 1/c
  double slope;  // da/dkappa
};

Term term(double c, double diag, double kappa) {
  const double slope = 1.0 / (diag - c);
  if (c == 0.0) return {-std::numeric_limits<double>::infinity(), slope};
  return {kappa * slope - 1.0 / c, slope};
}

// log(1 + e^a - w) for 0 <= w <= 1.
double log_complement(double a, double w, std::size_t m, std::size_t i) {
  if (a > 0.0) return a + std::log1p((1.0 - w) * std::exp(-a));
  const double arg = 1.0 - w + std::exp(a);
  if (!(arg > 0.0)) {
    throw NumericDomainError("negative_log_likelihood: log argument not positive at user " + std::to_string(m) +
                                 ", item " + std::to_string(i),
                             m, i);
  }
  return std::log(std::max(arg, 1e-12));
}

void check_kappa(double kappa) {
  if (!(kappa >= 0.0) || !std::isfinite(kappa)) throw InvalidInput("kappa must be finite and >= 0");
}

}  // namespace

void ExperienceData::validate() const {
  if (dim == 0) throw InvalidInput("experience data: dim must be >= 1");
  if (experience.rows() == 0 || experience.cols() == 0) throw InvalidInput("experience data: empty matrix");
  if (distances.rows() != experience.rows() || distances.cols() != experience.cols() ||
      weights.size() != experience.cols()) {
    throw InvalidInput("experience data: matrix shapes disagree");
  }
  const double diag = std::sqrt(static_cast<double>(dim));
  for (Eigen::Index m = 0; m < experience.rows(); ++m) {
    for (Eigen::Index i = 0; i < experience.cols(); ++i) {
      const double e = experience(m, i);
      if (e != 0.0 && e != 1.0) throw InvalidInput("experience data: entries of E must be 0 or 1");
      const double c = distances(m, i);
      if (!(c >= 0.0) || c >= diag) throw InvalidInput("experience data: distances must lie in [0, sqrt(d))");
    }
  }
  for (Eigen::Index i = 0; i < weights.size(); ++i) {
    if (!(weights[i] >= 0.0 && weights[i] <= 1.0)) throw InvalidInput("experience data: weights must lie in [0,1]");
  }
}

double negative_log_likelihood(const ExperienceData& data, double kappa) {
  check_kappa(kappa);
  const double diag = std::sqrt(static_cast<double>(data.dim));
  CompensatedSum total;
  for (Eigen::Index m = 0; m < data.experience.rows(); ++m) {
    for (Eigen::Index i = 0; i < data.experience.cols(); ++i) {
      const Term t = term(data.distances(m, i), diag, kappa);
      total.add(softplus(t.a));
      if (data.experience(m, i) == 0.0) {
        total.add(-log_complement(t.a, data.weights[i], static_cast<std::size_t>(m), static_cast<std::size_t>(i)));
      }
    }
  }
  return total.value();
}

double nll_gradient(const ExperienceData& data, double kappa) {
  check_kappa(kappa);
  const double diag = std::sqrt(static_cast<double>(data.dim));
  CompensatedSum total;
  for (Eigen::Index m = 0; m < data.experience.rows(); ++m) {
    for (Eigen::Index i = 0; i < data.experience.cols(); ++i) {
      const Term t = term(data.distances(m, i), diag, kappa);
      if (t.a == -std::numeric_limits<double>::infinity()) continue;
      total.add(logistic(t.a) * t.slope);
      if (data.experience(m, i) == 0.0) {
        // e^a / (1 + e^a - w), written to avoid overflow for large a
        const double w = data.weights[i];
        const double frac = t.a > 0.0 ? 1.0 / (1.0 + (1.0 - w) * std::exp(-t.a))
                                       : std::exp(t.a) / std::max(1.0 - w + std::exp(t.a), 1e-12);
        total.add(-frac * t.slope);
      }
    }
  }
  return total.value();
}

double fit_kappa(const ExperienceData& data, double kappa_max) {
  data.validate();
  if (!(kappa_max > 0.0)) throw InvalidInput("fit_kappa: kappa_max must be positive");
  constexpr int kGrid = 40;
  const double h = kappa_max / kGrid;
  int best = 0;
  double best_value = std::numeric_limits<double>::infinity();
  for (int g = 0; g <= kGrid; ++g) {
    const double v = negative_log_likelihood(data, g * h);
    if (v < best_value) {
      best_value = v;
      best = g;
    }
  }
  double lo = std::max(0.0, (best - 1) * h);
  double hi = std::min(kappa_max, (best + 1) * h);
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = hi - inv_phi * (hi - lo);
  double x2 = lo + inv_phi * (hi - lo);
  double f1 = negative_log_likelihood(data, x1);
  double f2 = negative_log_likelihood(data, x2);
  while (hi - lo > 1e-6) {
    if (f1 <= f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - inv_phi * (hi - lo);
      f1 = negative_log_likelihood(data, x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + inv_phi * (hi - lo);
      f2 = negative_log_likelihood(data, x2);
    }
  }
  const double mid = 0.5 * (lo + hi);
  // The grid endpoints can beat the interior when the minimum sits on a bound.
  double arg = mid;
  double value = negative_log_likelihood(data, mid);
  for (double edge : {0.0, kappa_max}) {
    if (std::abs(edge - mid) <= h && negative_log_likelihood(data, edge) < value) {
      value = negative_log_likelihood(data, edge);
      arg = edge;
    }
  }
  return arg;
}

double fit_kappa_gradient(const ExperienceData& data, double start, double kappa_max) {
  data.validate();
  const double scale = 1.0 / static_cast<double>(data.users() * data.items());
  double kappa = std::clamp(start, 0.0, kappa_max);
  double f = negative_log_likelihood(data, kappa) * scale;
  double step = 1.0;
  for (int iter = 0; iter < 10000; ++iter) {
    const double g = nll_gradient(data, kappa) * scale;
    const bool pinned = (kappa == 0.0 && g > 0.0) || (kappa == kappa_max && g < 0.0);
    if (std::abs(g) < 1e-9 || pinned) break;
    step = std::min(step * 2.0, 1e6);
    while (true) {
      const double next = std::clamp(kappa - step * g, 0.0, kappa_max);
      const double fn = negative_log_likelihood(data, next) * scale;
      if (fn <= f - 1e-4 * std::abs(g * (kappa - next))) {
        kappa = next;
        f = fn;
        break;
      }
      step *= 0.5;
      if (step < 1e-14) return kappa;
    }
  }
  return kappa;
}

ExperienceData synth_experience(const Catalog& catalog, std::size_t users, double kappa, std::uint64_t seed) {
  if (users == 0) throw InvalidInput("synth_experience: need at least one user");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto d = static_cast<Eigen::Index>(catalog.dim());
  const auto n = static_cast<Eigen::Index>(catalog.size());
  ExperienceData data;
  data.dim = catalog.dim();
  data.weights = catalog.weights();
  data.distances.resize(static_cast<Eigen::Index>(users), n);
  data.experience.resize(static_cast<Eigen::Index>(users), n);
  Eigen::VectorXd u(d);
  for (Eigen::Index m = 0; m < static_cast<Eigen::Index>(users); ++m) {
    for (Eigen::Index k = 0; k < d; ++k) u[k] = unit(rng);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double c = (catalog.embedding(static_cast<ItemIndex>(i)) - u).norm();
      data.distances(m, i) = c;
      const double p = experience_probability(c, data.weights[i], kappa, data.dim);
      data.experience(m, i) = unit(rng) < p ? 1.0 : 0.0;
    }
  }
  return data;
}

ExperienceData parse_experience(std::string_view json_text) {
  using nlohmann::json;
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("experience file: ") + e.what(), 0);
  }
  auto require = [&](const char* key) -> const json& {
    if (!doc.is_object() || !doc.contains(key)) throw SchemaError(std::string("experience file: missing '") + key + "'");
    return doc.at(key);
  };
  auto matrix = [](const json& rows, const char* key) {
    if (!rows.is_array() || rows.empty()) throw SchemaError(std::string("experience file: '") + key + "' must be a non-empty array of rows");
    const auto m = static_cast<Eigen::Index>(rows.size());
    const auto n = static_cast<Eigen::Index>(rows.front().is_array() ? rows.front().size() : 0);
    Eigen::MatrixXd out(m, n);
    for (Eigen::Index r = 0; r < m; ++r) {
      const auto& row = rows[static_cast<std::size_t>(r)];
      if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != n) {
        throw SchemaError(std::string("experience file: ragged rows in '") + key + "'");
      }
      for (Eigen::Index c = 0; c < n; ++c) {
        const auto& v = row[static_cast<std::size_t>(c)];
        if (!v.is_number()) throw SchemaError(std::string("experience file: non-numeric entry in '") + key + "'");
        out(r, c) = v.get<double>();
      }
    }
    return out;
  };
  ExperienceData data;
  const auto& dim = require("dim");
  if (!dim.is_number_unsigned()) throw SchemaError("experience file: 'dim' must be a positive integer");
  data.dim = dim.get<std::size_t>();
  const auto& w = require("weights");
  if (!w.is_array()) throw SchemaError("experience file: 'weights' must be an array");
  data.weights.resize(static_cast<Eigen::Index>(w.size()));
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (!w[i].is_number()) throw SchemaError("experience file: non-numeric weight");
    data.weights[static_cast<Eigen::Index>(i)] = w[i].get<double>();
  }
  data.distances = matrix(require("distances"), "distances");
  data.experience = matrix(require("experience"), "experience");
  for (const auto& [key, value] : doc.items()) {
    (void)value;
    if (key != "dim" && key != "weights" && key != "distances" && key != "experience") {
      throw SchemaError("experience file: unknown key '" + key + "'");
    }
  }
  try {
    data.validate();
  } catch (const InvalidInput& e) {
    throw SchemaError(e.what());
  }
  return data;
}

ExperienceData load_experience(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open experience file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_experience(buffer.str());
}

std::string experience_to_json(const ExperienceData& data) {
  nlohmann::ordered_json j;
  j["dim"] = data.dim;
  j["weights"] = std::vector<double>(data.weights.data(), data.weights.data() + data.weights.size());
  auto rows = [](const Eigen::MatrixXd& m) {
    nlohmann::json out = nlohmann::json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      std::vector<double> row(static_cast<std::size_t>(m.cols()));
      for (Eigen::Index c = 0; c < m.cols(); ++c) row[static_cast<std::size_t>(c)] = m(r, c);
      out.push_back(row);
    }
    return out;
  };
  j["distances"] = rows(data.distances);
  j["experience"] = rows(data.experience);
  return j.dump();
}

}  // namespace pere
