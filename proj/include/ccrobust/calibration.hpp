#pragma once

#include "ccrobust/common.hpp"
#include "ccrobust/geometry.hpp"

#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace ccrobust {

/**
 * Parameters of the quantile estimator and its guarantee.
 *
 * alpha      target probability mass, in (0, 1)
 * epsilon    tolerance, in (0, 1 - alpha)
 * delta      confidence parameter, in (0, 1)
 * lambda     mixing weight, in (0, 1)
 *
 * The estimator calibrates at level alpha_n = alpha + lambda * epsilon and the
 * guarantee alpha <= mass <= alpha + epsilon holds with probability at least
 * 1 - delta once the training sample has n_min points. alpha_n is stored
 * rather than recomputed so it can be overridden anywhere in
 * (alpha, alpha + epsilon).
 */
class CalibrationSpec {
  public:
    CalibrationSpec(double alpha, double epsilon, double delta, double lambda);

    /// Uses the lambda that minimizes the sample-size requirement.
    static CalibrationSpec with_optimal_lambda(double alpha, double epsilon, double delta);

    /// Copy with a different calibration level; n_min is unchanged.
    CalibrationSpec with_alpha_n(double alpha_n) const;

    double alpha() const noexcept { return alpha_; }
    double epsilon() const noexcept { return epsilon_; }
    double delta() const noexcept { return delta_; }
    double lambda() const noexcept { return lambda_; }
    double alpha_n() const noexcept { return alpha_n_; }
    std::uint64_t n_min() const noexcept { return n_min_; }

  private:
    double alpha_;
    double epsilon_;
    double delta_;
    double lambda_;
    double alpha_n_;
    std::uint64_t n_min_;
};

/// {"alpha", "epsilon", "delta", "lambda"} with the resolved numeric lambda,
/// plus the derived "alpha_n" and "n_min".
void to_json(nlohmann::json& j, const CalibrationSpec& spec);

/// Accepts "lambda": "optimal" or a number. An explicit "alpha_n" overrides the
/// derived level.
CalibrationSpec calibration_spec_from_json(const nlohmann::json& j);

/// Transformed training sample zeta_i = phi(u_i). NaN values are rejected.
class TrainingScores {
  public:
    explicit TrainingScores(std::vector<double> values);

    std::span<const double> values() const noexcept { return values_; }
    std::size_t size() const noexcept { return values_.size(); }

  private:
    std::vector<double> values_;
};

/// Scores phi(u_i) of every training row against the given centers.
TrainingScores score_sample(const PointSet& centers, NormSpec norm, const PointSet& training);

/// Smallest k in [1, n] with k / n >= gamma, evaluated in floating point so it
/// matches a direct evaluation of the empirical CDF.
std::size_t order_statistic_rank(std::size_t n, double gamma);

/// inf{z : F_n(z) >= gamma}, i.e. the ceil(n * gamma)-th smallest score.
double empirical_quantile(const TrainingScores& scores, double gamma);

enum class SampleSizePolicy {
    Strict,   ///< fewer than n_min training points is an error
    Advisory, ///< proceed and attach a warning
};

struct CalibrationResult {
    UncertaintySet set;
    std::optional<std::string> warning;
};

/// Radius = empirical alpha_n-quantile of the training scores.
///
/// The training sample must be independent of the centers; that is the
/// caller's responsibility.
CalibrationResult calibrate_radius(const PointSet& centers, NormSpec norm, const PointSet& training,
                                   const CalibrationSpec& spec,
                                   SampleSizePolicy policy = SampleSizePolicy::Strict);

/// Calibrates at an explicit level with no sample-size check.
UncertaintySet calibrate_radius_at_level(const PointSet& centers, NormSpec norm,
                                         const PointSet& training, double level);

/// max{(1 - alpha) / lambda^2, (alpha + epsilon) / (1 - lambda)^2}
double sample_size_constant(double lambda, double alpha, double epsilon);

/// Minimizer of sample_size_constant over lambda in (0, 1); needs alpha > 1/2.
double optimal_lambda(double alpha, double epsilon);

/// ceil(c(lambda, alpha, epsilon) * (2 / epsilon^2) * ln(2 / delta))
std::uint64_t sample_size(double alpha, double epsilon, double delta, double lambda);

/// Probabilities that the calibrated mass falls below alpha (first) or above
/// alpha + epsilon (second).
struct ViolationPair {
    double below = 0.0;
    double above = 0.0;
};

/// Exponential upper bounds on both violation probabilities.
ViolationPair chernoff_violation_bounds(std::uint64_t n, double alpha, double epsilon,
                                        double alpha_n);

/// Exact violation probabilities as lower binomial tails (continuous scores).
ViolationPair exact_violation_probs(std::uint64_t n, double alpha, double epsilon, double alpha_n);

/// P{Bin(n, p) <= k}, summed in log space. Returns 0 for k < 0 and 1 for k >= n.
double binomial_lower_tail(std::uint64_t n, double p, std::int64_t k);

/// exp(-(np - k)^2 / (2np)), valid upper bound on P{Bin(n, p) <= k} for k <= np.
double binomial_lower_tail_bound(std::uint64_t n, double p, double k);

} // namespace ccrobust
