#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

#include "pere/types.hpp"

namespace pere {

/// Per-dimension affine map applied at load time (identity when not rescaled).
struct Normalization {
  bool rescaled = false;
  Eigen::VectorXd column_min;
  Eigen::VectorXd column_max;
  bool weights_defaulted = false;
};

/// Items sorted by descending popularity. Embeddings live in [0,1]^d and
/// weights in [0,1]; the constructor enforces both.
class Catalog {
 public:
  /// `embeddings` is d x N (one column per item).
  Catalog(std::vector<std::string> ids, Eigen::MatrixXd embeddings, Eigen::VectorXd weights,
          Normalization normalization = {});

  std::size_t size() const { return ids_.size(); }
  std::size_t dim() const { return static_cast<std::size_t>(embeddings_.rows()); }

  const std::string& id(ItemIndex i) const { return ids_[i]; }
  auto embedding(ItemIndex i) const { return embeddings_.col(static_cast<Eigen::Index>(i)); }
  double weight(ItemIndex i) const { return weights_[static_cast<Eigen::Index>(i)]; }

  const Eigen::MatrixXd& embeddings() const { return embeddings_; }
  const Eigen::VectorXd& weights() const { return weights_; }
  const Normalization& normalization() const { return normalization_; }

  std::optional<ItemIndex> find(std::string_view id) const;

 private:
  std::vector<std::string> ids_;
  Eigen::MatrixXd embeddings_;
  Eigen::VectorXd weights_;
  Normalization normalization_;
  std::unordered_map<std::string, ItemIndex> index_;
};

/// Builds a catalog from raw rows: rescales embeddings per dimension when any
/// coordinate leaves [0,1], divides weights by their maximum and stable-sorts
/// by descending weight. A missing weight vector means uniform weight 1.
Catalog normalize_catalog(std::vector<std::string> ids, Eigen::MatrixXd embeddings,
                          std::optional<Eigen::VectorXd> weights);

/// Canonical CSV: header `id,weight,e0,...,e{d-1}` (the weight column may be
/// absent), LF line endings, shortest round-trip number formatting.
Catalog read_catalog(std::istream& in);
Catalog load_catalog(const std::filesystem::path& path);
void write_catalog(std::ostream& out, const Catalog& catalog);
void save_catalog(const std::filesystem::path& path, const Catalog& catalog);

/// Gaussian-mixture embeddings clipped to the unit cube, Zipf(1) weights
/// assigned in random order. Deterministic per seed.
Catalog synth_catalog(std::size_t n_items, std::size_t dim, std::size_t clusters, std::uint64_t seed,
                      double cluster_spread = 0.08);

enum class BurnInStrategy { kDpp, kKMedoids, kRandom, kPopularity };

const char* to_string(BurnInStrategy s);
BurnInStrategy parse_burn_in_strategy(std::string_view name);
Squash parse_squash(std::string_view name);

/// Run configuration. JSON keys are K, m, T, P, k_rec, k_rel, kappa, tau,
/// squash, seed, strategy and tolerant_mode.
struct Config {
  std::size_t burn_in_size = 50;       // K
  std::size_t batch_size = 10;         // m
  std::size_t rounds = 5;              // T
  std::size_t popular_count = 1000;    // P
  std::size_t recommend_count = 50;    // k_rec
  std::size_t relevant_count = 50;     // k_rel
  double kappa = 1.0;
  double tau = 0.0;
  Squash squash = Squash::kSigmoid;
  std::uint64_t seed = 0;
  BurnInStrategy strategy = BurnInStrategy::kDpp;
  bool tolerant_mode = false;

  /// Throws InvalidInput unless K <= P <= catalog_size, m >= 1, tau in [0,1], kappa > 0.
  void validate(std::size_t catalog_size) const;
};

/// Unknown keys and wrongly typed values raise SchemaError.
Config parse_config(std::string_view json_text);
Config load_config(const std::filesystem::path& path);
std::string config_to_json(const Config& config);

/// Shortest decimal representation that parses back to the same double.
std::string format_double(double value);

}  // namespace pere
