#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "pere/behavior.hpp"
#include "pere/data.hpp"
#include "pere/dpp.hpp"
#include "pere/geometry.hpp"
#include "pere/metrics.hpp"
#include "pere/types.hpp"

namespace pere {

/// Weighted K-medoids over the popular prefix: minimizes the w-weighted sum of
/// squared distances to the nearest medoid (greedy build, then best swaps).
std::vector<ItemIndex> kmedoids(const Catalog& catalog, std::size_t k, std::size_t popular_count);

/// The static questionnaire. `ensemble` is reused for the dpp strategy when given.
std::vector<ItemIndex> burn_in(const Catalog& catalog, std::size_t k, std::size_t popular_count,
                               BurnInStrategy strategy, std::uint64_t seed, const Ensemble* ensemble = nullptr);

/// Experience probability at the incumbent center with kappa fixed to 1.
double surrogate_probability(const Eigen::Ref<const Eigen::VectorXd>& item,
                             const Eigen::Ref<const Eigen::VectorXd>& center, double weight, Squash squash);

/// One candidate's next-question score; smaller is better.
struct Scored {
  ItemIndex item = 0;
  double p_hat = 0.0;
  double q_plus = 0.0;
  double q_minus = 0.0;
  double q_na = 0.0;
  bool indicator_plus = false;
  bool indicator_minus = false;
  double score = 0.0;
};

/// q+ sums the distances from the center to the cuts the candidate would add
/// if liked (one per disliked item), q- those it would add if disliked. A sum
/// without any cut is +inf, and so is a score whose bracket is infinite.
std::vector<Scored> score_candidates(const Catalog& catalog, const Eigen::VectorXd& center,
                                     std::span<const ItemIndex> liked, std::span<const ItemIndex> disliked,
                                     std::span<const ItemIndex> candidates, Squash squash);

/// The m smallest scores; ties by higher p_hat, higher weight, lower index.
std::vector<ItemIndex> lowest_scores(const Catalog& catalog, std::span<const Scored> scored, std::size_t m);

struct CenterRecord {
  std::size_t round = 0;
  Embedding center;
  double radius = 0.0;
};

/// Weights (K + t m) / (K (T'+1) + T'(T'+1) m / 2) for t = 0..T'.
std::vector<double> aggregation_weights(std::size_t k, std::size_t m, std::size_t last_round);

/// Reweighted average of the per-round centers. Throws InvalidState when empty.
Embedding aggregate_center(std::span<const CenterRecord> history, std::size_t k, std::size_t m);

/// The k items outside `asked` nearest the center; ties by higher weight, then lower index.
std::vector<ItemIndex> recommend(const Catalog& catalog, const Eigen::VectorXd& center,
                                 const std::vector<char>& asked, std::size_t k);

enum class Phase { kBurnIn, kAdaptive, kDone };
const char* to_string(Phase phase);

/// How adaptive rounds pick their questions.
enum class AdaptivePolicy {
  kRegion,           // score against the Chebyshev center
  kConditionalDpp,   // greedy DPP conditioned on everything asked so far
};

class Session;

/// Per-catalog, per-configuration state shared by many sessions: the static
/// burn-in questionnaire and the DPP kernel. Immutable after construction.
class Elicitor {
 public:
  Elicitor(std::shared_ptr<const Catalog> catalog, Config config, AdaptivePolicy policy = AdaptivePolicy::kRegion);

  const Catalog& catalog() const { return *shared_->catalog; }
  const Config& config() const { return shared_->config; }
  AdaptivePolicy policy() const { return shared_->policy; }
  /// Empty for the random strategy, which draws per session.
  const std::vector<ItemIndex>& burn_in_items() const { return shared_->burn_in; }

  Session start(std::uint64_t session_seed) const;

  struct Shared {
    std::shared_ptr<const Catalog> catalog;
    Config config;
    AdaptivePolicy policy = AdaptivePolicy::kRegion;
    std::vector<ItemIndex> burn_in;
    std::shared_ptr<const Ensemble> ensemble;
  };

 private:
  std::shared_ptr<const Shared> shared_;
};

/// One user's elicitation: burn-in batch, then up to T adaptive batches.
/// Not thread-safe; callers serialize access per session.
class Session {
 public:
  Phase phase() const { return phase_; }
  /// Adaptive rounds completed so far.
  std::size_t round() const { return round_; }
  /// Increments every time a new batch is issued.
  std::uint64_t batch_token() const { return token_; }
  const std::vector<ItemIndex>& outstanding() const { return outstanding_; }

  /// Applies ratings for the outstanding batch (unrated items count as NA),
  /// re-solves the region and issues the next batch. Throws InvalidInput for
  /// items outside the batch, InvalidState once done, and InfeasibleRegion in
  /// strict mode when the answers contradict each other; on error nothing changes.
  void submit(std::span<const std::pair<ItemIndex, Rating>> ratings);

  const Region& region() const { return region_; }
  const std::vector<CenterRecord>& history() const { return history_; }
  const std::vector<ItemIndex>& liked() const { return liked_; }
  const std::vector<ItemIndex>& disliked() const { return disliked_; }
  const std::vector<ItemIndex>& skipped() const { return skipped_; }
  const std::vector<char>& asked() const { return asked_; }

  /// Aggregated center over the history, or the single center of a
  /// burn-in-only run.
  Embedding aggregate_center() const;
  std::vector<ItemIndex> recommend(std::size_t k) const;

  /// Scores of the current candidate pool against the current center.
  std::vector<Scored> score() const;

  /// The last batch was shorter than m because the pool ran low.
  bool short_batch() const { return short_batch_; }
  /// The last batch came from the conditional DPP because no candidate had a finite score.
  bool fallback_batch() const { return fallback_batch_; }
  /// The session ended early because the candidate pool was empty.
  bool exhausted() const { return exhausted_; }
  /// Pairs of identical embeddings dropped from the preference set.
  std::size_t degenerate_cuts() const { return degenerate_cuts_; }
  /// Tolerant solves performed after a strict solve failed.
  std::size_t escalations() const { return escalations_; }

 private:
  friend class Elicitor;
  Session(std::shared_ptr<const Elicitor::Shared> shared, std::uint64_t seed);

  std::vector<ItemIndex> candidates() const;
  void issue_next_batch();
  Region solve_region(std::vector<Cut> cuts);

  std::shared_ptr<const Elicitor::Shared> shared_;
  std::uint64_t seed_ = 0;
  Phase phase_ = Phase::kBurnIn;
  std::size_t round_ = 0;
  std::uint64_t token_ = 0;
  std::vector<ItemIndex> outstanding_;
  std::vector<ItemIndex> liked_;
  std::vector<ItemIndex> disliked_;
  std::vector<ItemIndex> skipped_;
  std::vector<char> asked_;
  Region region_;
  std::vector<CenterRecord> history_;
  bool short_batch_ = false;
  bool fallback_batch_ = false;
  bool exhausted_ = false;
  std::size_t degenerate_cuts_ = 0;
  std::size_t escalations_ = 0;
};

/// Strategies compared by the simulation harness.
enum class Method { kPere, kDppOnly, kConditionalDpp, kRandom, kPopularity, kKMedoids };

const char* to_string(Method method);
Method parse_method(std::string_view name);
std::vector<Method> all_methods();

/// Elicitor for a method: sequential methods keep K, m and T; static ones ask
/// K + T m items in a single burn-in batch.
Elicitor make_elicitor(std::shared_ptr<const Catalog> catalog, const Config& config, Method method);

struct ExperimentResult {
  RankingMetrics metrics;
  std::vector<ItemIndex> ranking;
  /// Solves performed (burn-in plus adaptive rounds).
  std::size_t solves = 0;
  std::size_t adaptive_rounds = 0;
  std::vector<double> radius_trace;
  /// Whether the true embedding lay inside the region after each solve.
  std::vector<char> contained;
  std::vector<double> round_seconds;
  std::size_t questions = 0;
  std::size_t likes = 0;
  std::size_t dislikes = 0;
};

/// Runs one simulated user through the elicitor and scores the ranking of
/// max(k_rec, 30) recommendations against the user's liked items.
ExperimentResult run_experiment(const Elicitor& elicitor, const SimulatedUser& user, std::uint64_t session_seed);

}  // namespace pere
