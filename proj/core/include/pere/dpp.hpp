#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "pere/types.hpp"

namespace pere {

class Catalog;

/// L-ensemble kernel L = S + diag(w) over the popular prefix of a catalog.
/// Row/column p of L is catalog item p.
struct Ensemble {
  Eigen::MatrixXd kernel;

  std::size_t size() const { return static_cast<std::size_t>(kernel.rows()); }
};

/// S = V'V over the top-P embeddings plus the popularity diagonal.
Ensemble build_ensemble(const Catalog& catalog, std::size_t popular_count);

/// Wraps an explicit kernel; throws InvalidInput unless square and symmetric within 1e-12.
Ensemble make_ensemble(Eigen::MatrixXd kernel);

/// det(L_S); 1 for the empty set.
double subset_det(const Ensemble& ensemble, std::span<const std::size_t> subset);

/// Greedy MAP: repeatedly adds the item with the largest log-det gain
/// (incremental Cholesky, ties to the lower index). Excluded items are never
/// chosen, which also gives the conditional variant. When the best gain
/// collapses the remaining slots are filled in popularity order.
std::vector<std::size_t> greedy_map(const Ensemble& ensemble, std::size_t k,
                                    std::span<const std::size_t> exclude = {});

/// Best single exchange per round while det(L_S) strictly increases, at most
/// 10 * |S| rounds. Swapped-in items take the slot of the item they replace.
std::vector<std::size_t> local_search_2swap(const Ensemble& ensemble, std::vector<std::size_t> selection,
                                            std::span<const std::size_t> exclude = {});

}  // namespace pere
