#pragma once

#include <cstddef>
#include <cstdint>

#include <Eigen/Core>

namespace pere {

/// A point of the unit hypercube [0,1]^d; used for users and items alike.
using Embedding = Eigen::VectorXd;

/// Position of an item in a popularity-sorted catalog.
using ItemIndex = std::size_t;

/// Squashing function of the experience-probability model.
enum class Squash { kSigmoid, kTanh };

/// Three-option feedback on a single item.
enum class Rating : std::int8_t { kDislike = -1, kNA = 0, kLike = 1 };

inline const char* to_string(Squash s) { return s == Squash::kTanh ? "tanh" : "sigmoid"; }

}  // namespace pere
