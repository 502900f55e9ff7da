#include "pere/engine.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>

#include "pere/errors.hpp"

namespace pere {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_prefix(const Catalog& catalog, std::size_t k, std::size_t popular_count, const char* what) {
  if (popular_count == 0 || popular_count > catalog.size()) {
    throw InvalidInput(std::string(what) + ": need 1 <= P <= catalog size");
  }
  if (k > popular_count) {
    throw InvalidInput(std::string(what) + ": K = " + std::to_string(k) + " exceeds P = " +
                       std::to_string(popular_count));
  }
}

// Nearest and second-nearest medoid distances for every point.
struct Assignment {
  std::vector<std::size_t> nearest;
  std::vector<double> d1;
  std::vector<double> d2;
};

Assignment assign(const Eigen::MatrixXd& dist, const std::vector<std::size_t>& medoids) {
  const auto n = static_cast<std::size_t>(dist.rows());
  Assignment a{std::vector<std::size_t>(n, 0), std::vector<double>(n, kInf), std::vector<double>(n, kInf)};
  for (std::size_t o = 0; o < n; ++o) {
    for (std::size_t s = 0; s < medoids.size(); ++s) {
      const double d = dist(static_cast<Eigen::Index>(o), static_cast<Eigen::Index>(medoids[s]));
      if (d < a.d1[o]) {
        a.d2[o] = a.d1[o];
        a.d1[o] = d;
        a.nearest[o] = s;
      } else if (d < a.d2[o]) {
        a.d2[o] = d;
      }
    }
  }
  return a;
}

}  // namespace

std::vector<ItemIndex> kmedoids(const Catalog& catalog, std::size_t k, std::size_t popular_count) {
  check_prefix(catalog, k, popular_count, "kmedoids");
  if (k == 0) return {};
  const auto p = static_cast<Eigen::Index>(popular_count);
  const auto v = catalog.embeddings().leftCols(p);
  const Eigen::VectorXd w = catalog.weights().head(p);
  const Eigen::VectorXd sq = v.colwise().squaredNorm().transpose();
  Eigen::MatrixXd dist = -2.0 * v.transpose() * v;
  dist.colwise() += sq;
  dist.rowwise() += sq.transpose();
  dist = dist.cwiseMax(0.0);
  dist.diagonal().setZero();
  const std::size_t n = popular_count;

  // Greedy build: each step adds the point that lowers the weighted cost most.
  std::vector<std::size_t> medoids;
  std::vector<char> is_medoid(n, 0);
  std::vector<double> current(n, kInf);
  for (std::size_t step = 0; step < k; ++step) {
    double best_gain = -kInf;
    std::size_t best = n;
    for (std::size_t x = 0; x < n; ++x) {
      if (is_medoid[x]) continue;
      double gain = 0.0;
      for (std::size_t o = 0; o < n; ++o) {
        const double d = dist(static_cast<Eigen::Index>(o), static_cast<Eigen::Index>(x));
        if (std::isinf(current[o])) {
          gain -= w[static_cast<Eigen::Index>(o)] * d;
        } else if (d < current[o]) {
          gain += w[static_cast<Eigen::Index>(o)] * (current[o] - d);
        }
      }
      if (gain > best_gain) {
        best_gain = gain;
        best = x;
      }
    }
    medoids.push_back(best);
    is_medoid[best] = 1;
    for (std::size_t o = 0; o < n; ++o)
      current[o] = std::min(current[o], dist(static_cast<Eigen::Index>(o), static_cast<Eigen::Index>(best)));
  }

  // Swap phase: apply the best (medoid, non-medoid) exchange while it lowers the cost.
  std::vector<double> delta(k);
  for (std::size_t iter = 0; iter < 100 * k; ++iter) {
    const Assignment a = assign(dist, medoids);
    double best_delta = -1e-12;
    std::size_t best_slot = k;
    std::size_t best_x = n;
    for (std::size_t x = 0; x < n; ++x) {
      if (is_medoid[x]) continue;
      std::fill(delta.begin(), delta.end(), 0.0);
      double shared = 0.0;
      for (std::size_t o = 0; o < n; ++o) {
        const double wo = w[static_cast<Eigen::Index>(o)];
        const double dxo = dist(static_cast<Eigen::Index>(o), static_cast<Eigen::Index>(x));
        // Removing any other medoid: o moves to x only if x is closer.
        const double common = std::min(dxo, a.d1[o]) - a.d1[o];
        shared += wo * common;
        // Removing o's own medoid: o falls back to x or its second nearest.
        delta[a.nearest[o]] += wo * (std::min(dxo, a.d2[o]) - a.d1[o] - common);
      }
      for (std::size_t s = 0; s < k; ++s) {
        const double total = shared + delta[s];
        if (total < best_delta) {
          best_delta = total;
          best_slot = s;
          best_x = x;
        }
      }
    }
    if (best_slot == k) break;
    is_medoid[medoids[best_slot]] = 0;
    medoids[best_slot] = best_x;
    is_medoid[best_x] = 1;
  }
  return medoids;
}

std::vector<ItemIndex> burn_in(const Catalog& catalog, std::size_t k, std::size_t popular_count,
                               BurnInStrategy strategy, std::uint64_t seed, const Ensemble* ensemble) {
  check_prefix(catalog, k, popular_count, "burn_in");
  switch (strategy) {
    case BurnInStrategy::kPopularity: {
      std::vector<ItemIndex> items(k);
      std::iota(items.begin(), items.end(), ItemIndex{0});
      return items;
    }
    case BurnInStrategy::kRandom: {
      std::vector<ItemIndex> pool(popular_count);
      std::iota(pool.begin(), pool.end(), ItemIndex{0});
      std::mt19937_64 rng(seed);
      // Partial Fisher-Yates keeps the draw independent of P beyond the first K picks.
      for (std::size_t i = 0; i < k; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, popular_count - 1);
        std::swap(pool[i], pool[pick(rng)]);
      }
      pool.resize(k);
      return pool;
    }
    case BurnInStrategy::kKMedoids:
      return kmedoids(catalog, k, popular_count);
    case BurnInStrategy::kDpp: {
      if (ensemble && ensemble->size() == popular_count) {
        return local_search_2swap(*ensemble, greedy_map(*ensemble, k));
      }
      const Ensemble built = build_ensemble(catalog, popular_count);
      return local_search_2swap(built, greedy_map(built, k));
    }
  }
  throw InvalidInput("burn_in: unknown strategy");
}

double surrogate_probability(const Eigen::Ref<const Eigen::VectorXd>& item,
                             const Eigen::Ref<const Eigen::VectorXd>& center, double weight, Squash squash) {
  return experience_probability((item - center).norm(), weight, 1.0, static_cast<std::size_t>(item.size()),
                                squash);
}

std::vector<Scored> score_candidates(const Catalog& catalog, const Eigen::VectorXd& center,
                                     std::span<const ItemIndex> liked, std::span<const ItemIndex> disliked,
                                     std::span<const ItemIndex> candidates, Squash squash) {
  if (static_cast<std::size_t>(center.size()) != catalog.dim()) {
    throw InvalidInput("score_candidates: center dimension mismatch");
  }
  const auto dist_to = [&](ItemIndex i) { return (catalog.embedding(i) - center).norm(); };
  double max_liked = -kInf;
  for (ItemIndex j : liked) max_liked = std::max(max_liked, dist_to(j));
  double min_disliked = kInf;
  for (ItemIndex j : disliked) min_disliked = std::min(min_disliked, dist_to(j));

  // |c_i^2 - c_j^2| / (2 |v_i - v_j|) is the distance from the center to the
  // bisector of v_i and v_j, i.e. the distance to the cut either order induces.
  const auto sq_dist = [&](ItemIndex i) { return (catalog.embedding(i) - center).squaredNorm(); };
  std::vector<double> liked_sq, disliked_sq;
  for (ItemIndex j : liked) liked_sq.push_back(sq_dist(j));
  for (ItemIndex j : disliked) disliked_sq.push_back(sq_dist(j));

  const auto pair_sum = [&](ItemIndex i, double ci_sq, std::span<const ItemIndex> others,
                            const std::vector<double>& others_sq) {
    double sum = 0.0;
    std::size_t terms = 0;
    for (std::size_t s = 0; s < others.size(); ++s) {
      const double gap = (catalog.embedding(i) - catalog.embedding(others[s])).norm();
      if (gap == 0.0) continue;
      sum += std::abs(ci_sq - others_sq[s]) / (2.0 * gap);
      ++terms;
    }
    return terms == 0 ? kInf : sum;
  };

  std::vector<Scored> out;
  out.reserve(candidates.size());
  for (ItemIndex i : candidates) {
    if (i >= catalog.size()) throw InvalidInput("score_candidates: item index out of range");
    Scored s;
    s.item = i;
    const double ci_sq = sq_dist(i);
    const double ci = std::sqrt(ci_sq);
    s.p_hat = surrogate_probability(catalog.embedding(i), center, catalog.weight(i), squash);
    s.indicator_plus = ci <= max_liked;
    s.indicator_minus = ci >= min_disliked;
    s.q_plus = pair_sum(i, ci_sq, disliked, disliked_sq);
    s.q_minus = pair_sum(i, ci_sq, liked, liked_sq);
    s.q_na = std::min(s.q_plus, s.q_minus);
    double bracket = 0.0;
    if (s.indicator_plus) bracket += s.q_plus;
    if (s.indicator_minus) bracket += s.q_minus;
    if (!s.indicator_plus && !s.indicator_minus) bracket += s.q_na;
    s.score = std::isinf(bracket) ? kInf : (1.0 - s.p_hat) * bracket;
    out.push_back(s);
  }
  return out;
}

std::vector<ItemIndex> lowest_scores(const Catalog& catalog, std::span<const Scored> scored, std::size_t m) {
  std::vector<std::size_t> order(scored.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto better = [&](std::size_t a, std::size_t b) {
    const Scored& x = scored[a];
    const Scored& y = scored[b];
    if (x.score != y.score) return x.score < y.score;
    if (x.p_hat != y.p_hat) return x.p_hat > y.p_hat;
    const double wx = catalog.weight(x.item);
    const double wy = catalog.weight(y.item);
    if (wx != wy) return wx > wy;
    return x.item < y.item;
  };
  const std::size_t take = std::min(m, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end(), better);
  std::vector<ItemIndex> items;
  items.reserve(take);
  for (std::size_t r = 0; r < take; ++r) items.push_back(scored[order[r]].item);
  return items;
}

std::vector<double> aggregation_weights(std::size_t k, std::size_t m, std::size_t last_round) {
  const double t1 = static_cast<double>(last_round);
  const double denom = static_cast<double>(k) * (t1 + 1.0) + t1 * (t1 + 1.0) * static_cast<double>(m) / 2.0;
  if (denom <= 0.0) throw InvalidInput("aggregation_weights: K and m must not both be zero");
  std::vector<double> w(last_round + 1);
  for (std::size_t t = 0; t <= last_round; ++t) w[t] = static_cast<double>(k + t * m) / denom;
  return w;
}

Embedding aggregate_center(std::span<const CenterRecord> history, std::size_t k, std::size_t m) {
  if (history.empty()) throw InvalidState("aggregate_center: no centers recorded");
  for (std::size_t t = 0; t < history.size(); ++t) {
    if (history[t].round != t) throw InvalidInput("aggregate_center: history rounds must be 0..T'");
  }
  if (history.size() == 1) return history.front().center;
  const auto w = aggregation_weights(k, m, history.size() - 1);
  Embedding c = Embedding::Zero(history.front().center.size());
  for (std::size_t t = 0; t < history.size(); ++t) c += w[t] * history[t].center;
  return c;
}

std::vector<ItemIndex> recommend(const Catalog& catalog, const Eigen::VectorXd& center,
                                 const std::vector<char>& asked, std::size_t k) {
  if (static_cast<std::size_t>(center.size()) != catalog.dim()) {
    throw InvalidInput("recommend: center dimension mismatch");
  }
  if (!asked.empty() && asked.size() != catalog.size()) {
    throw InvalidInput("recommend: asked mask size mismatch");
  }
  std::vector<std::pair<double, ItemIndex>> pool;
  pool.reserve(catalog.size());
  const Eigen::VectorXd dist = (catalog.embeddings().colwise() - center).colwise().squaredNorm().transpose();
  for (ItemIndex i = 0; i < catalog.size(); ++i) {
    if (asked.empty() || !asked[i]) pool.emplace_back(dist[static_cast<Eigen::Index>(i)], i);
  }
  const std::size_t take = std::min(k, pool.size());
  std::partial_sort(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(take), pool.end(),
                    [&](const auto& a, const auto& b) {
                      if (a.first != b.first) return a.first < b.first;
                      const double wa = catalog.weight(a.second);
                      const double wb = catalog.weight(b.second);
                      if (wa != wb) return wa > wb;
                      return a.second < b.second;
                    });
  std::vector<ItemIndex> out;
  out.reserve(take);
  for (std::size_t r = 0; r < take; ++r) out.push_back(pool[r].second);
  return out;
}

const char* to_string(Phase phase) {
  switch (phase) {
    case Phase::kBurnIn: return "burn_in";
    case Phase::kAdaptive: return "adaptive";
    case Phase::kDone: return "done";
  }
  return "unknown";
}

Elicitor::Elicitor(std::shared_ptr<const Catalog> catalog, Config config, AdaptivePolicy policy) {
  if (!catalog) throw InvalidInput("Elicitor: catalog is required");
  config.validate(catalog->size());
  auto shared = std::make_shared<Shared>();
  shared->catalog = std::move(catalog);
  shared->config = config;
  shared->policy = policy;
  const bool needs_kernel = config.rounds > 0 || config.strategy == BurnInStrategy::kDpp;
  if (needs_kernel) {
    shared->ensemble = std::make_shared<const Ensemble>(build_ensemble(*shared->catalog, config.popular_count));
  }
  if (config.strategy != BurnInStrategy::kRandom) {
    shared->burn_in = burn_in(*shared->catalog, config.burn_in_size, config.popular_count, config.strategy,
                              config.seed, shared->ensemble.get());
  }
  shared_ = std::move(shared);
}

Session Elicitor::start(std::uint64_t session_seed) const { return Session(shared_, session_seed); }

Session::Session(std::shared_ptr<const Elicitor::Shared> shared, std::uint64_t seed)
    : shared_(std::move(shared)), seed_(seed) {
  const Catalog& catalog = *shared_->catalog;
  const Config& config = shared_->config;
  asked_.assign(catalog.size(), 0);
  region_ = Region::unit(catalog.dim());
  if (config.strategy == BurnInStrategy::kRandom) {
    outstanding_ = burn_in(catalog, config.burn_in_size, config.popular_count, BurnInStrategy::kRandom,
                           mix_seed(config.seed, seed));
  } else {
    outstanding_ = shared_->burn_in;
  }
  token_ = 1;
}

std::vector<ItemIndex> Session::candidates() const {
  std::vector<ItemIndex> pool;
  for (ItemIndex i = 0; i < shared_->config.popular_count; ++i)
    if (!asked_[i]) pool.push_back(i);
  return pool;
}

std::vector<Scored> Session::score() const {
  const auto pool = candidates();
  return score_candidates(*shared_->catalog, region_.center, liked_, disliked_, pool, shared_->config.squash);
}

Region Session::solve_region(std::vector<Cut> cuts) {
  const std::size_t dim = shared_->catalog->dim();
  if (cuts.empty()) return Region::unit(dim);
  try {
    return Region::solve(dim, cuts);
  } catch (const InfeasibleRegion& e) {
    const Config& config = shared_->config;
    if (!config.tolerant_mode && config.tau <= 0.0) {
      throw InfeasibleRegion(std::string(e.what()) +
                                 "; the answers contradict each other, enable tolerant_mode to relax them",
                             e.cut_index(), e.violation());
    }
  }
  const std::size_t n = cuts.size();
  auto budget = static_cast<std::size_t>(std::ceil(0.1 * static_cast<double>(n)));
  budget = std::max<std::size_t>(budget, 1);
  while (true) {
    ++escalations_;
    if (budget >= n) return Region::solve_tolerant(dim, std::move(cuts), n);
    try {
      return Region::solve_tolerant(dim, cuts, budget);
    } catch (const InfeasibleRegion&) {
      budget *= 2;
    }
  }
}

void Session::issue_next_batch() {
  const auto pool = candidates();
  if (pool.empty()) {
    phase_ = Phase::kDone;
    exhausted_ = true;
    outstanding_.clear();
    return;
  }
  const std::size_t m = shared_->config.batch_size;
  const std::size_t take = std::min(m, pool.size());
  short_batch_ = pool.size() < m;
  fallback_batch_ = false;

  const auto conditional_dpp = [&] {
    std::vector<std::size_t> exclude;
    for (ItemIndex i = 0; i < shared_->config.popular_count; ++i)
      if (asked_[i]) exclude.push_back(i);
    return greedy_map(*shared_->ensemble, take, exclude);
  };

  if (shared_->policy == AdaptivePolicy::kConditionalDpp) {
    outstanding_ = conditional_dpp();
    return;
  }
  const auto scored = score();
  const bool all_sentinel =
      std::all_of(scored.begin(), scored.end(), [](const Scored& s) { return std::isinf(s.score); });
  if (all_sentinel) {
    fallback_batch_ = true;
    outstanding_ = conditional_dpp();
  } else {
    outstanding_ = lowest_scores(*shared_->catalog, scored, take);
  }
}

void Session::submit(std::span<const std::pair<ItemIndex, Rating>> ratings) {
  if (phase_ == Phase::kDone) throw InvalidState("submit: the session is finished");
  std::vector<Rating> answers(outstanding_.size(), Rating::kNA);
  std::vector<char> seen(outstanding_.size(), 0);
  for (const auto& [item, rating] : ratings) {
    const auto it = std::find(outstanding_.begin(), outstanding_.end(), item);
    if (it == outstanding_.end()) {
      throw InvalidInput("submit: item " + std::to_string(item) + " is not in the outstanding batch");
    }
    const auto pos = static_cast<std::size_t>(it - outstanding_.begin());
    if (seen[pos]) throw InvalidInput("submit: item " + std::to_string(item) + " rated twice");
    if (rating != Rating::kLike && rating != Rating::kDislike && rating != Rating::kNA) {
      throw InvalidInput("submit: unknown rating value");
    }
    seen[pos] = 1;
    answers[pos] = rating;
  }

  Session next = *this;
  bool new_opinion = false;
  for (std::size_t pos = 0; pos < next.outstanding_.size(); ++pos) {
    const ItemIndex item = next.outstanding_[pos];
    next.asked_[item] = 1;
    switch (answers[pos]) {
      case Rating::kLike: next.liked_.push_back(item); new_opinion = true; break;
      case Rating::kDislike: next.disliked_.push_back(item); new_opinion = true; break;
      case Rating::kNA: next.skipped_.push_back(item); break;
    }
  }
  if (new_opinion && !next.liked_.empty() && !next.disliked_.empty()) {
    std::vector<Preference> prefs;
    prefs.reserve(next.liked_.size() * next.disliked_.size());
    for (ItemIndex i : next.liked_)
      for (ItemIndex j : next.disliked_) prefs.push_back({i, j});
    CutSet set = cuts_from_preferences(prefs, *shared_->catalog);
    next.degenerate_cuts_ = set.degenerate_dropped;
    next.region_ = next.solve_region(std::move(set.cuts));
  }

  const std::size_t t = next.phase_ == Phase::kBurnIn ? 0 : next.round_ + 1;
  next.history_.push_back({t, next.region_.center, next.region_.radius});
  if (next.phase_ == Phase::kBurnIn) {
    next.phase_ = Phase::kAdaptive;
  } else {
    ++next.round_;
  }
  next.short_batch_ = false;
  next.fallback_batch_ = false;
  if (next.round_ >= shared_->config.rounds) {
    next.phase_ = Phase::kDone;
    next.outstanding_.clear();
  } else {
    next.issue_next_batch();
  }
  ++next.token_;
  *this = std::move(next);
}

Embedding Session::aggregate_center() const {
  return pere::aggregate_center(history_, shared_->config.burn_in_size, shared_->config.batch_size);
}

std::vector<ItemIndex> Session::recommend(std::size_t k) const {
  return pere::recommend(*shared_->catalog, aggregate_center(), asked_, k);
}

const char* to_string(Method method) {
  switch (method) {
    case Method::kPere: return "pere";
    case Method::kDppOnly: return "dpp-only";
    case Method::kConditionalDpp: return "cdpp";
    case Method::kRandom: return "random";
    case Method::kPopularity: return "popularity";
    case Method::kKMedoids: return "kmedoids";
  }
  return "unknown";
}

std::vector<Method> all_methods() {
  return {Method::kPere, Method::kDppOnly, Method::kConditionalDpp, Method::kRandom, Method::kPopularity,
          Method::kKMedoids};
}

Method parse_method(std::string_view name) {
  for (Method m : all_methods())
    if (name == to_string(m)) return m;
  throw InvalidInput("unknown strategy '" + std::string(name) +
                     "' (expected pere, dpp-only, cdpp, random, popularity or kmedoids)");
}

Elicitor make_elicitor(std::shared_ptr<const Catalog> catalog, const Config& config, Method method) {
  Config c = config;
  const auto make_static = [&](BurnInStrategy strategy) {
    c.burn_in_size = config.burn_in_size + config.rounds * config.batch_size;
    c.rounds = 0;
    c.strategy = strategy;
  };
  switch (method) {
    case Method::kPere:
      return Elicitor(std::move(catalog), c, AdaptivePolicy::kRegion);
    case Method::kConditionalDpp:
      return Elicitor(std::move(catalog), c, AdaptivePolicy::kConditionalDpp);
    case Method::kDppOnly: make_static(BurnInStrategy::kDpp); break;
    case Method::kRandom: make_static(BurnInStrategy::kRandom); break;
    case Method::kPopularity: make_static(BurnInStrategy::kPopularity); break;
    case Method::kKMedoids: make_static(BurnInStrategy::kKMedoids); break;
  }
  return Elicitor(std::move(catalog), c, AdaptivePolicy::kRegion);
}

ExperimentResult run_experiment(const Elicitor& elicitor, const SimulatedUser& user, std::uint64_t session_seed) {
  const Catalog& catalog = elicitor.catalog();
  if (static_cast<std::size_t>(user.true_embedding.size()) != catalog.dim() ||
      user.experienced.size() != catalog.size()) {
    throw InvalidInput("run_experiment: user does not match the catalog");
  }
  ExperimentResult result;
  Session session = elicitor.start(session_seed);
  std::mt19937_64 rng(mix_seed(session_seed, 0x72617465));
  std::vector<std::pair<ItemIndex, Rating>> answers;
  while (session.phase() != Phase::kDone) {
    answers.clear();
    for (ItemIndex item : session.outstanding()) {
      const Rating r = rate_item(user, item, rng);
      answers.emplace_back(item, r);
      result.likes += r == Rating::kLike;
      result.dislikes += r == Rating::kDislike;
    }
    result.questions += answers.size();
    const auto start = std::chrono::steady_clock::now();
    session.submit(answers);
    const std::chrono::duration<double> took = std::chrono::steady_clock::now() - start;
    result.round_seconds.push_back(took.count());
    result.radius_trace.push_back(session.region().radius);
    result.contained.push_back(contains(session.region(), user.true_embedding) ? 1 : 0);
  }
  result.solves = session.history().size();
  result.adaptive_rounds = session.round();
  result.ranking = session.recommend(std::max<std::size_t>(elicitor.config().recommend_count, 30));
  const RelevantSet relevant(user.liked.begin(), user.liked.end());
  result.metrics = evaluate_ranking(result.ranking, relevant);
  return result;
}

}  // namespace pere
