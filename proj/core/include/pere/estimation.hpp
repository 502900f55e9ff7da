#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include <Eigen/Core>

namespace pere {

class Catalog;

/// Binary experience matrix E (users x items) with the user-item distances
/// and item popularity weights it was observed under.
struct ExperienceData {
  std::size_t dim = 0;
  Eigen::VectorXd weights;
  Eigen::MatrixXd distances;
  Eigen::MatrixXd experience;

  std::size_t users() const { return static_cast<std::size_t>(experience.rows()); }
  std::size_t items() const { return static_cast<std::size_t>(experience.cols()); }

  /// Shapes agree, E in {0,1}, 0 <= c <= sqrt(d), 0 <= w <= 1; throws InvalidInput.
  void validate() const;
};

/// sum softplus(a) - sum (1 - E) log(1 + e^a - w), a = kappa/(sqrt(d) - c) - 1/c.
/// Throws NumericDomainError(m, i) when a log argument is not positive.
double negative_log_likelihood(const ExperienceData& data, double kappa);

/// Analytic derivative of negative_log_likelihood with respect to kappa.
double nll_gradient(const ExperienceData& data, double kappa);

inline constexpr double kKappaMax = 20.0;

/// Golden-section minimization over [0, kappa_max] after a coarse grid scan.
double fit_kappa(const ExperienceData& data, double kappa_max = kKappaMax);

/// Projected gradient descent with backtracking, used as a cross-check.
double fit_kappa_gradient(const ExperienceData& data, double start = 1.0, double kappa_max = kKappaMax);

/// Users drawn uniformly from the hypercube, experience drawn from the
/// sigmoid model with the given kappa.
ExperienceData synth_experience(const Catalog& catalog, std::size_t users, double kappa, std::uint64_t seed);

/// JSON document {"dim", "weights", "distances", "experience"}; matrices as arrays of rows.
ExperienceData parse_experience(std::string_view json_text);
ExperienceData load_experience(const std::filesystem::path& path);
std::string experience_to_json(const ExperienceData& data);

}  // namespace pere
