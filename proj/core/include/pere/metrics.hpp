#pragma once

#include <cstddef>
#include <span>
#include <unordered_set>

#include "pere/types.hpp"

namespace pere {

using RelevantSet = std::unordered_set<ItemIndex>;

/// Binary-gain DCG@k over IDCG@k, discount 1/log2(rank + 1). 0 without relevant items.
double ndcg_at_k(std::span<const ItemIndex> ranked, const RelevantSet& relevant, std::size_t k);

/// Average precision with denominator min(|relevant|, |ranked|).
double average_precision(std::span<const ItemIndex> ranked, const RelevantSet& relevant);

/// 1 / rank of the first relevant item, 0 if none.
double reciprocal_rank(std::span<const ItemIndex> ranked, const RelevantSet& relevant);

/// 1 if a relevant item appears in the top k.
double hit_rate_at_k(std::span<const ItemIndex> ranked, const RelevantSet& relevant, std::size_t k);

/// Fraction of (relevant, non-relevant) pairs of listed items, at least one
/// of them in the top k, in which the relevant item is ranked higher.
/// 1 when no such pair exists.
double auc_at_k(std::span<const ItemIndex> ranked, const RelevantSet& relevant, std::size_t k);

struct RankingMetrics {
  double hr1 = 0.0;
  double auc10 = 0.0;
  double ndcg10 = 0.0;
  double ndcg30 = 0.0;
  double map = 0.0;
  double mrr = 0.0;
};

RankingMetrics evaluate_ranking(std::span<const ItemIndex> ranked, const RelevantSet& relevant);

}  // namespace pere
