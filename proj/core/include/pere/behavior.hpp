#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "pere/types.hpp"

namespace pere {

class Catalog;

/// w * squash(1/c - kappa/(sqrt(d) - c)), clamped to [0,1]. c = 0 gives w,
/// c = sqrt(d) gives 0. The tanh variant is floored at 0.
double experience_probability(double c, double w, double kappa, std::size_t dim, Squash squash = Squash::kSigmoid);

/// Ground truth of one simulated user.
struct SimulatedUser {
  Embedding true_embedding;
  double kappa = 1.0;
  double flip_prob = 0.0;
  std::vector<char> experienced;
  /// The k_rel items nearest the true embedding, nearest first.
  std::vector<ItemIndex> liked;
  std::vector<char> liked_mask;
  std::vector<char> disliked_mask;

  bool likes(ItemIndex i) const { return liked_mask[i] != 0; }
  bool dislikes(ItemIndex i) const { return disliked_mask[i] != 0; }
};

struct UserSpec {
  double kappa = 1.0;
  std::size_t relevant_count = 50;
  double flip_prob = 0.0;
  Squash squash = Squash::kSigmoid;
  /// Drawn uniformly from the hypercube when absent.
  std::optional<Embedding> true_embedding;
};

/// Liked items are forced to experienced; every other experienced item is disliked.
SimulatedUser generate_user(const Catalog& catalog, const UserSpec& spec, std::uint64_t seed);

/// +1 liked, -1 disliked, NA otherwise; an experienced item's answer is
/// flipped with probability flip_prob (the draw is made only for those items).
Rating rate_item(const SimulatedUser& user, ItemIndex item, std::mt19937_64& rng);

/// Decorrelated child seed (splitmix64 of the pair).
std::uint64_t mix_seed(std::uint64_t base, std::uint64_t stream);

}  // namespace pere
