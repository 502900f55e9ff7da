#include "pere/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace pere {

namespace {

double discount(std::size_t pos) { return 1.0 / std::log2(static_cast<double>(pos) + 2.0); }

}  // namespace

double ndcg_at_k(std::span<const ItemIndex> ranked, const RelevantSet& relevant, std::size_t k) {
  if (relevant.empty() || k == 0) return 0.0;
  double dcg = 0.0;
  const std::size_t depth = std::min(k, ranked.size());
  for (std::size_t pos = 0; pos < depth; ++pos)
    if (relevant.count(ranked[pos])) dcg += discount(pos);
  double idcg = 0.0;
  const std::size_t ideal = std::min(k, relevant.size());
  for (std::size_t pos = 0; pos < ideal; ++pos) idcg += discount(pos);
  return dcg / idcg;
}

double average_precision(std::span<const ItemIndex> ranked, const RelevantSet& relevant) {
  const std::size_t denom = std::min(relevant.size(), ranked.size());
  if (denom == 0) return 0.0;
  double total = 0.0;
  std::size_t hits = 0;
  for (std::size_t pos = 0; pos < ranked.size(); ++pos) {
    if (!relevant.count(ranked[pos])) continue;
    ++hits;
    total += static_cast<double>(hits) / static_cast<double>(pos + 1);
  }
  return total / static_cast<double>(denom);
}

double reciprocal_rank(std::span<const ItemIndex> ranked, const RelevantSet& relevant) {
  for (std::size_t pos = 0; pos < ranked.size(); ++pos)
    if (relevant.count(ranked[pos])) return 1.0 / static_cast<double>(pos + 1);
  return 0.0;
}

double hit_rate_at_k(std::span<const ItemIndex> ranked, const RelevantSet& relevant, std::size_t k) {
  const std::size_t depth = std::min(k, ranked.size());
  for (std::size_t pos = 0; pos < depth; ++pos)
    if (relevant.count(ranked[pos])) return 1.0;
  return 0.0;
}

double auc_at_k(std::span<const ItemIndex> ranked, const RelevantSet& relevant, std::size_t k) {
  // Scan once; for each position count the opposite-class items above it.
  std::size_t pairs = 0;
  std::size_t correct = 0;
  std::size_t rel_above = 0;
  std::size_t rel_above_in_window = 0;
  std::size_t non_above_in_window = 0;
  for (std::size_t pos = 0; pos < ranked.size(); ++pos) {
    const bool is_rel = relevant.count(ranked[pos]) != 0;
    const bool in_window = pos < k;
    if (is_rel) {
      // pairs with non-relevant items above: all wrong; counted if either is in the window
      const std::size_t wrong = in_window ? pos - rel_above : non_above_in_window;
      pairs += wrong;
      ++rel_above;
      if (in_window) ++rel_above_in_window;
    } else {
      const std::size_t right = in_window ? rel_above : rel_above_in_window;
      pairs += right;
      correct += right;
      if (in_window) ++non_above_in_window;
    }
  }
  return pairs == 0 ? 1.0 : static_cast<double>(correct) / static_cast<double>(pairs);
}

RankingMetrics evaluate_ranking(std::span<const ItemIndex> ranked, const RelevantSet& relevant) {
  RankingMetrics m;
  m.hr1 = hit_rate_at_k(ranked, relevant, 1);
  m.auc10 = auc_at_k(ranked, relevant, 10);
  m.ndcg10 = ndcg_at_k(ranked, relevant, 10);
  m.ndcg30 = ndcg_at_k(ranked, relevant, 30);
  m.map = average_precision(ranked, relevant);
  m.mrr = reciprocal_rank(ranked, relevant);
  return m;
}

}  // namespace pere
