#include "pere/dpp.hpp"

#include <Eigen/Cholesky>
#include <Eigen/LU>
#include <cmath>
#include <string>

#include "pere/data.hpp"
#include "pere/errors.hpp"

namespace pere {

namespace {

constexpr double kJitter = 1e-10;
constexpr double kGainFloor = 1e-12;
constexpr double kSwapGain = 1e-12;

std::vector<char> mask_of(std::size_t n, std::span<const std::size_t> items, const char* what) {
  std::vector<char> mask(n, 0);
  for (std::size_t i : items) {
    if (i >= n) throw InvalidInput(std::string(what) + ": item index out of range");
    mask[i] = 1;
  }
  return mask;
}

Eigen::MatrixXd principal(const Eigen::MatrixXd& L, std::span<const std::size_t> s) {
  const auto k = static_cast<Eigen::Index>(s.size());
  Eigen::MatrixXd sub(k, k);
  for (Eigen::Index a = 0; a < k; ++a)
    for (Eigen::Index b = 0; b < k; ++b)
      sub(a, b) = L(static_cast<Eigen::Index>(s[static_cast<std::size_t>(a)]),
                    static_cast<Eigen::Index>(s[static_cast<std::size_t>(b)]));
  return sub;
}

}  // namespace

Ensemble make_ensemble(Eigen::MatrixXd kernel) {
  if (kernel.rows() != kernel.cols() || kernel.rows() == 0) {
    throw InvalidInput("make_ensemble: kernel must be square and non-empty");
  }
  if (!kernel.allFinite() || (kernel - kernel.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
    throw InvalidInput("make_ensemble: kernel must be finite and symmetric");
  }
  return Ensemble{std::move(kernel)};
}

Ensemble build_ensemble(const Catalog& catalog, std::size_t popular_count) {
  if (popular_count == 0 || popular_count > catalog.size()) {
    throw InvalidInput("build_ensemble: need 1 <= P <= catalog size");
  }
  const auto p = static_cast<Eigen::Index>(popular_count);
  const auto v = catalog.embeddings().leftCols(p);
  Ensemble e;
  e.kernel.noalias() = v.transpose() * v;
  e.kernel.diagonal() += catalog.weights().head(p);
  return e;
}

double subset_det(const Ensemble& ensemble, std::span<const std::size_t> subset) {
  if (subset.empty()) return 1.0;
  mask_of(ensemble.size(), subset, "subset_det");
  return principal(ensemble.kernel, subset).determinant();
}

std::vector<std::size_t> greedy_map(const Ensemble& ensemble, std::size_t k, std::span<const std::size_t> exclude) {
  const std::size_t n = ensemble.size();
  const auto excluded = mask_of(n, exclude, "greedy_map");
  std::size_t available = 0;
  for (char x : excluded) available += x == 0;
  if (k > available) {
    throw InvalidInput("greedy_map: K = " + std::to_string(k) + " exceeds the " + std::to_string(available) +
                       " selectable items");
  }

  const Eigen::MatrixXd& L = ensemble.kernel;
  // Row i of c holds the partial Cholesky factor of item i against the
  // selection; d2[i] is its remaining conditional variance.
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k));
  Eigen::VectorXd d2 = L.diagonal().array() + kJitter;
  std::vector<char> taken(excluded);
  std::vector<std::size_t> out;
  out.reserve(k);

  while (out.size() < k) {
    std::size_t best = n;
    double best_gain = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (taken[i]) continue;
      if (d2[static_cast<Eigen::Index>(i)] > best_gain) {
        best_gain = d2[static_cast<Eigen::Index>(i)];
        best = i;
      }
    }
    if (best_gain <= kGainFloor) break;
    const auto j = static_cast<Eigen::Index>(best);
    const auto col = static_cast<Eigen::Index>(out.size());
    const double dj = std::sqrt(best_gain);
    taken[best] = 1;
    out.push_back(best);
    for (std::size_t i = 0; i < n; ++i) {
      if (taken[i]) continue;
      const auto ii = static_cast<Eigen::Index>(i);
      const double e = (L(j, ii) - c.row(j).head(col).dot(c.row(ii).head(col))) / dj;
      c(ii, col) = e;
      d2[ii] -= e * e;
    }
  }
  // Gain collapsed (K above the numerical rank): popularity order.
  for (std::size_t i = 0; i < n && out.size() < k; ++i) {
    if (!taken[i]) {
      taken[i] = 1;
      out.push_back(i);
    }
  }
  return out;
}

std::vector<std::size_t> local_search_2swap(const Ensemble& ensemble, std::vector<std::size_t> selection,
                                            std::span<const std::size_t> exclude) {
  const std::size_t n = ensemble.size();
  auto blocked = mask_of(n, exclude, "local_search_2swap");
  for (std::size_t i : selection) {
    if (i >= n) throw InvalidInput("local_search_2swap: item index out of range");
    if (blocked[i] == 2) throw InvalidInput("local_search_2swap: duplicate item in selection");
    if (blocked[i] == 1) throw InvalidInput("local_search_2swap: selection contains an excluded item");
    blocked[i] = 2;
  }
  if (selection.empty()) return selection;

  const Eigen::MatrixXd& L = ensemble.kernel;
  const auto k = static_cast<Eigen::Index>(selection.size());
  const std::size_t max_rounds = 10 * selection.size();

  for (std::size_t round = 0; round < max_rounds; ++round) {
    Eigen::MatrixXd ls = principal(L, selection);
    ls.diagonal().array() += kJitter;
    Eigen::LLT<Eigen::MatrixXd> llt(ls);
    if (llt.info() != Eigen::Success) break;
    const Eigen::MatrixXd m = llt.solve(Eigen::MatrixXd::Identity(k, k));

    // Swapping position p for item q multiplies det(L_S) by
    // M_pp * s_q + z_p^2 with z = M l_{S,q} and s_q = L_qq - l_{S,q}' z.
    double best_ratio = 1.0 + kSwapGain;
    Eigen::Index best_p = -1;
    std::size_t best_q = n;
    Eigen::VectorXd lq(k);
    for (std::size_t q = 0; q < n; ++q) {
      if (blocked[q]) continue;
      const auto qq = static_cast<Eigen::Index>(q);
      for (Eigen::Index a = 0; a < k; ++a) lq[a] = L(static_cast<Eigen::Index>(selection[static_cast<std::size_t>(a)]), qq);
      const Eigen::VectorXd z = m * lq;
      const double s = L(qq, qq) + kJitter - lq.dot(z);
      for (Eigen::Index p = 0; p < k; ++p) {
        const double ratio = m(p, p) * s + z[p] * z[p];
        if (ratio > best_ratio) {
          best_ratio = ratio;
          best_p = p;
          best_q = q;
        }
      }
    }
    if (best_p < 0) break;
    blocked[selection[static_cast<std::size_t>(best_p)]] = 0;
    blocked[best_q] = 2;
    selection[static_cast<std::size_t>(best_p)] = best_q;
  }
  return selection;
}

}  // namespace pere
