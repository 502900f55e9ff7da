#include "pere/behavior.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "pere/data.hpp"
#include "pere/errors.hpp"

namespace pere {

namespace {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

double experience_probability(double c, double w, double kappa, std::size_t dim, Squash squash) {
  if (dim == 0) throw InvalidInput("experience_probability: dimension must be >= 1");
  if (!(kappa > 0.0)) throw InvalidInput("experience_probability: kappa must be positive");
  if (!(w >= 0.0 && w <= 1.0)) throw InvalidInput("experience_probability: weight must lie in [0,1]");
  const double diag = std::sqrt(static_cast<double>(dim));
  if (!(c >= 0.0) || c > diag + 1e-12) {
    throw InvalidInput("experience_probability: distance must lie in [0, sqrt(d))");
  }
  if (c == 0.0) return w;
  if (c >= diag - 1e-12) return 0.0;
  const double arg = 1.0 / c - kappa / (diag - c);
  const double s = squash == Squash::kTanh ? std::max(std::tanh(arg), 0.0) : sigmoid(arg);
  return std::clamp(w * s, 0.0, 1.0);
}

std::uint64_t mix_seed(std::uint64_t base, std::uint64_t stream) {
  std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

SimulatedUser generate_user(const Catalog& catalog, const UserSpec& spec, std::uint64_t seed) {
  const std::size_t n = catalog.size();
  const auto d = static_cast<Eigen::Index>(catalog.dim());
  if (spec.relevant_count > n) throw InvalidInput("generate_user: k_rel exceeds the catalog size");
  if (!(spec.flip_prob >= 0.0 && spec.flip_prob <= 1.0)) throw InvalidInput("generate_user: tau must lie in [0,1]");

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  SimulatedUser user;
  user.kappa = spec.kappa;
  user.flip_prob = spec.flip_prob;
  if (spec.true_embedding) {
    if (spec.true_embedding->size() != d) throw InvalidInput("generate_user: embedding dimension mismatch");
    user.true_embedding = *spec.true_embedding;
  } else {
    user.true_embedding.resize(d);
    for (Eigen::Index k = 0; k < d; ++k) user.true_embedding[k] = unit(rng);
  }

  std::vector<double> dist(n);
  user.experienced.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    dist[i] = (catalog.embedding(i) - user.true_embedding).norm();
    const double p = experience_probability(dist[i], catalog.weight(i), spec.kappa, catalog.dim(), spec.squash);
    user.experienced[i] = unit(rng) < p ? 1 : 0;
  }

  std::vector<ItemIndex> order(n);
  std::iota(order.begin(), order.end(), ItemIndex{0});
  const auto mid = order.begin() + static_cast<std::ptrdiff_t>(spec.relevant_count);
  std::partial_sort(order.begin(), mid, order.end(), [&](ItemIndex a, ItemIndex b) {
    return dist[a] != dist[b] ? dist[a] < dist[b] : a < b;
  });
  user.liked.assign(order.begin(), mid);
  user.liked_mask.assign(n, 0);
  user.disliked_mask.assign(n, 0);
  for (ItemIndex i : user.liked) {
    user.liked_mask[i] = 1;
    user.experienced[i] = 1;
  }
  for (std::size_t i = 0; i < n; ++i) user.disliked_mask[i] = user.experienced[i] && !user.liked_mask[i];
  return user;
}

Rating rate_item(const SimulatedUser& user, ItemIndex item, std::mt19937_64& rng) {
  if (item >= user.liked_mask.size()) throw InvalidInput("rate_item: item index out of range");
  Rating r = Rating::kNA;
  if (user.likes(item)) {
    r = Rating::kLike;
  } else if (user.dislikes(item)) {
    r = Rating::kDislike;
  } else {
    return r;
  }
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  if (unit(rng) < user.flip_prob) r = r == Rating::kLike ? Rating::kDislike : Rating::kLike;
  return r;
}

}  // namespace pere
