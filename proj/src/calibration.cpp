#include "ccrobust/calibration.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ccrobust {

namespace {

bool in_open_unit(double v) { return v > 0.0 && v < 1.0; }

void check_alpha_epsilon(double alpha, double epsilon) {
    if (!in_open_unit(alpha))
        throw DomainError("alpha must lie in (0, 1)");
    if (!(epsilon > 0.0 && epsilon < 1.0 - alpha))
        throw DomainError("epsilon must lie in (0, 1 - alpha)");
}

void check_level(double alpha, double epsilon, double alpha_n) {
    check_alpha_epsilon(alpha, epsilon);
    if (!(alpha_n > alpha && alpha_n < alpha + epsilon))
        throw DomainError("alpha_n must lie in the open interval (alpha, alpha + epsilon)");
}

} // namespace

CalibrationSpec::CalibrationSpec(double alpha, double epsilon, double delta, double lambda)
    : alpha_(alpha), epsilon_(epsilon), delta_(delta), lambda_(lambda),
      alpha_n_(alpha + lambda * epsilon), n_min_(0) {
    check_alpha_epsilon(alpha, epsilon);
    if (!in_open_unit(delta))
        throw DomainError("delta must lie in (0, 1)");
    if (!in_open_unit(lambda))
        throw DomainError("lambda must lie in (0, 1)");
    check_level(alpha_, epsilon_, alpha_n_);
    n_min_ = sample_size(alpha, epsilon, delta, lambda);
}

CalibrationSpec CalibrationSpec::with_optimal_lambda(double alpha, double epsilon, double delta) {
    return CalibrationSpec(alpha, epsilon, delta, optimal_lambda(alpha, epsilon));
}

CalibrationSpec CalibrationSpec::with_alpha_n(double alpha_n) const {
    check_level(alpha_, epsilon_, alpha_n);
    CalibrationSpec copy = *this;
    copy.alpha_n_ = alpha_n;
    return copy;
}

void to_json(nlohmann::json& j, const CalibrationSpec& spec) {
    j = nlohmann::json{{"alpha", spec.alpha()},     {"epsilon", spec.epsilon()},
                       {"delta", spec.delta()},     {"lambda", spec.lambda()},
                       {"alpha_n", spec.alpha_n()}, {"n_min", spec.n_min()}};
}

CalibrationSpec calibration_spec_from_json(const nlohmann::json& j) {
    try {
        const double alpha = j.at("alpha").get<double>();
        const double epsilon = j.at("epsilon").get<double>();
        const double delta = j.at("delta").get<double>();
        const auto& lambda = j.contains("lambda") ? j.at("lambda") : nlohmann::json("optimal");
        double lambda_value = 0.0;
        if (lambda.is_string()) {
            if (lambda.get<std::string>() != "optimal")
                throw ModelError("calibration spec: 'lambda' must be a number or \"optimal\"");
            lambda_value = optimal_lambda(alpha, epsilon);
        } else {
            lambda_value = lambda.get<double>();
        }
        CalibrationSpec spec(alpha, epsilon, delta, lambda_value);
        if (j.contains("alpha_n") && !j.at("alpha_n").is_null())
            spec = spec.with_alpha_n(j.at("alpha_n").get<double>());
        return spec;
    } catch (const nlohmann::json::exception& e) {
        throw ModelError(std::string("calibration spec: ") + e.what());
    }
}

TrainingScores::TrainingScores(std::vector<double> values) : values_(std::move(values)) {
    if (values_.empty())
        throw EmptySampleError("training scores must be nonempty");
    if (std::any_of(values_.begin(), values_.end(), [](double v) { return std::isnan(v); }))
        throw DomainError("training scores must not contain NaN");
}

TrainingScores score_sample(const PointSet& centers, NormSpec norm, const PointSet& training) {
    if (training.rows() == 0)
        throw EmptySampleError("training sample is empty");
    if (centers.rows() == 0)
        throw DimensionError("at least one center is required");
    if (training.cols() != centers.cols())
        throw DimensionError("training points have dimension " + std::to_string(training.cols()) +
                             ", centers have dimension " + std::to_string(centers.cols()));
    const Eigen::Index dim = centers.cols();
    std::vector<double> scores(static_cast<std::size_t>(training.rows()));
    for (Eigen::Index t = 0; t < training.rows(); ++t) {
        const double* u = training.data() + t * dim;
        double best = std::numeric_limits<double>::infinity();
        const double* row = centers.data();
        for (Eigen::Index i = 0; i < centers.rows(); ++i, row += dim)
            best = std::min(best, detail::distance(u, row, dim, norm.order()));
        scores[static_cast<std::size_t>(t)] = best;
    }
    return TrainingScores(std::move(scores));
}

std::size_t order_statistic_rank(std::size_t n, double gamma) {
    if (n == 0)
        throw EmptySampleError("rank of an empty sample");
    if (!in_open_unit(gamma))
        throw DomainError("quantile level must lie in (0, 1)");
    const double nd = static_cast<double>(n);
    auto k = static_cast<std::size_t>(std::ceil(nd * gamma));
    k = std::clamp<std::size_t>(k, 1, n);
    // ceil(n * gamma) can be off by one when the product rounds across an
    // integer; settle on the rank the empirical CDF itself reports.
    while (k > 1 && static_cast<double>(k - 1) / nd >= gamma)
        --k;
    while (k < n && static_cast<double>(k) / nd < gamma)
        ++k;
    return k;
}

double empirical_quantile(const TrainingScores& scores, double gamma) {
    const std::size_t k = order_statistic_rank(scores.size(), gamma);
    std::vector<double> work(scores.values().begin(), scores.values().end());
    const auto nth = work.begin() + static_cast<std::ptrdiff_t>(k - 1);
    std::nth_element(work.begin(), nth, work.end());
    return *nth;
}

CalibrationResult calibrate_radius(const PointSet& centers, NormSpec norm, const PointSet& training,
                                   const CalibrationSpec& spec, SampleSizePolicy policy) {
    if (training.rows() == 0)
        throw EmptySampleError("training sample is empty");
    const auto have = static_cast<std::size_t>(training.rows());
    std::optional<std::string> warning;
    if (have < spec.n_min()) {
        if (policy == SampleSizePolicy::Strict)
            throw UndersampledError(have, spec.n_min());
        warning = UndersampledError(have, spec.n_min()).what();
    }
    return {calibrate_radius_at_level(centers, norm, training, spec.alpha_n()), std::move(warning)};
}

UncertaintySet calibrate_radius_at_level(const PointSet& centers, NormSpec norm,
                                         const PointSet& training, double level) {
    const TrainingScores scores = score_sample(centers, norm, training);
    return UncertaintySet(centers, empirical_quantile(scores, level), norm);
}

double sample_size_constant(double lambda, double alpha, double epsilon) {
    check_alpha_epsilon(alpha, epsilon);
    if (!in_open_unit(lambda))
        throw DomainError("lambda must lie in (0, 1)");
    const double below = (1.0 - alpha) / (lambda * lambda);
    const double above = (alpha + epsilon) / ((1.0 - lambda) * (1.0 - lambda));
    return std::max(below, above);
}

double optimal_lambda(double alpha, double epsilon) {
    check_alpha_epsilon(alpha, epsilon);
    if (!(alpha > 0.5))
        throw DomainError("the closed-form optimal lambda requires alpha > 1/2");
    const double miss = 1.0 - alpha;
    return (miss - std::sqrt(miss * (alpha + epsilon))) / (1.0 - 2.0 * alpha - epsilon);
}

std::uint64_t sample_size(double alpha, double epsilon, double delta, double lambda) {
    if (!in_open_unit(delta))
        throw DomainError("delta must lie in (0, 1)");
    const double c = sample_size_constant(lambda, alpha, epsilon);
    const double n = c * (2.0 / (epsilon * epsilon)) * std::log(2.0 / delta);
    if (!(n < 1e18))
        throw DomainError("sample size requirement overflows");
    return std::max<std::uint64_t>(1, static_cast<std::uint64_t>(std::ceil(n)));
}

ViolationPair chernoff_violation_bounds(std::uint64_t n, double alpha, double epsilon,
                                        double alpha_n) {
    if (n == 0)
        throw DomainError("sample size must be positive");
    check_level(alpha, epsilon, alpha_n);
    const double nd = static_cast<double>(n);
    const double low_gap = alpha_n - alpha;
    const double high_gap = alpha + epsilon - alpha_n;
    return {std::exp(-nd * low_gap * low_gap / (2.0 * (1.0 - alpha))),
            std::exp(-nd * high_gap * high_gap / (2.0 * (alpha + epsilon)))};
}

ViolationPair exact_violation_probs(std::uint64_t n, double alpha, double epsilon, double alpha_n) {
    if (n == 0)
        throw DomainError("sample size must be positive");
    check_level(alpha, epsilon, alpha_n);
    const auto k = static_cast<std::int64_t>(order_statistic_rank(n, alpha_n));
    const auto nn = static_cast<std::int64_t>(n);
    return {binomial_lower_tail(n, 1.0 - alpha, nn - k),
            binomial_lower_tail(n, alpha + epsilon, k - 1)};
}

double binomial_lower_tail(std::uint64_t n, double p, std::int64_t k) {
    if (!(p >= 0.0 && p <= 1.0))
        throw DomainError("binomial success probability must lie in [0, 1]");
    if (k < 0)
        return 0.0;
    if (static_cast<std::uint64_t>(k) >= n)
        return 1.0;
    if (p == 0.0)
        return 1.0;
    if (p == 1.0)
        return 0.0;

    const double nd = static_cast<double>(n);
    const double log_p = std::log(p);
    const double log_q = std::log1p(-p);
    const double log_n_fact = std::lgamma(nd + 1.0);
    std::vector<double> log_terms(static_cast<std::size_t>(k) + 1);
    for (std::int64_t i = 0; i <= k; ++i) {
        const double id = static_cast<double>(i);
        log_terms[static_cast<std::size_t>(i)] = log_n_fact - std::lgamma(id + 1.0) -
                                                 std::lgamma(nd - id + 1.0) + id * log_p +
                                                 (nd - id) * log_q;
    }
    std::sort(log_terms.begin(), log_terms.end());
    const double top = log_terms.back();
    double acc = 0.0;
    for (double lt : log_terms)
        acc += std::exp(lt - top);
    return std::clamp(std::exp(top + std::log(acc)), 0.0, 1.0);
}

double binomial_lower_tail_bound(std::uint64_t n, double p, double k) {
    if (n == 0)
        throw DomainError("sample size must be positive");
    if (!(p >= 0.0 && p <= 1.0))
        throw DomainError("binomial success probability must lie in [0, 1]");
    const double mean = static_cast<double>(n) * p;
    if (!(k <= mean))
        throw DomainError("the lower-tail bound requires k <= n p");
    if (mean == 0.0)
        return k < 0.0 ? 0.0 : 1.0;
    const double gap = mean - k;
    return std::exp(-gap * gap / (2.0 * mean));
}

} // namespace ccrobust
