#include "ccrobust/distmodel.hpp"

#include <nlohmann/json.hpp>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace ccrobust {

namespace {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double normal_pdf(double x, double mean, double sd) {
    const double z = (x - mean) / sd;
    return std::exp(-0.5 * z * z) / (sd * std::sqrt(2.0 * std::numbers::pi));
}

// Half-width of the slice {u : u_0 = x0} through a ball of radius r whose
// center is at horizontal offset dx from the slice. Negative when the slice
// misses the ball.
double slice_radius(double dx, double r, NormOrder order) {
    const double a = std::abs(dx);
    switch (order) {
    case NormOrder::L1:
        return r - a;
    case NormOrder::L2:
        return a > r ? -1.0 : std::sqrt((r - a) * (r + a));
    case NormOrder::LInf:
        return a > r ? -1.0 : r;
    }
    return -1.0;
}

// Mass of N(mean, cov) on the union of balls centers_i + radii_i * B.
double union_mass(const Vector& mean, const Eigen::MatrixXd& cov, const PointSet& centers,
                  const std::vector<double>& radii, NormOrder order) {
    const Eigen::Index d = mean.size();
    const Eigen::Index m = centers.rows();
    const double sd = std::sqrt(cov(0, 0));

    if (d == 1) {
        std::vector<std::pair<double, double>> spans;
        spans.reserve(static_cast<std::size_t>(m));
        for (Eigen::Index i = 0; i < m; ++i) {
            const double r = radii[static_cast<std::size_t>(i)];
            if (r > 0.0)
                spans.emplace_back(centers(i, 0) - r, centers(i, 0) + r);
        }
        std::sort(spans.begin(), spans.end());
        double mass = 0.0;
        std::size_t k = 0;
        while (k < spans.size()) {
            double lo = spans[k].first;
            double hi = spans[k].second;
            for (++k; k < spans.size() && spans[k].first <= hi; ++k)
                hi = std::max(hi, spans[k].second);
            const double zl = (lo - mean(0)) / sd;
            const double zh = (hi - mean(0)) / sd;
            // difference of upper tails keeps precision far out on the right
            mass += zl > 0.0 ? normal_cdf(-zl) - normal_cdf(-zh) : normal_cdf(zh) - normal_cdf(zl);
        }
        return mass;
    }

    // Condition the trailing coordinates on the first one.
    const Eigen::Index rest = d - 1;
    const Vector gain = cov.block(1, 0, rest, 1) / cov(0, 0);
    const Eigen::MatrixXd cond_cov =
        cov.bottomRightCorner(rest, rest) - gain * cov.block(0, 1, 1, rest);
    const Vector mean_rest = mean.tail(rest);

    const double lo_limit = mean(0) - 12.0 * sd;
    const double hi_limit = mean(0) + 12.0 * sd;
    std::vector<double> breaks{lo_limit, hi_limit};
    for (Eigen::Index i = 0; i < m; ++i) {
        const double r = radii[static_cast<std::size_t>(i)];
        for (double b : {centers(i, 0) - r, centers(i, 0), centers(i, 0) + r}) {
            if (b > lo_limit && b < hi_limit)
                breaks.push_back(b);
        }
    }
    std::sort(breaks.begin(), breaks.end());
    breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());

    auto active = [&](double x0) {
        for (Eigen::Index i = 0; i < m; ++i) {
            if (std::abs(x0 - centers(i, 0)) < radii[static_cast<std::size_t>(i)])
                return true;
        }
        return false;
    };

    auto integrand = [&](double x0) {
        PointSet sliced(m, rest);
        std::vector<double> sliced_radii;
        sliced_radii.reserve(static_cast<std::size_t>(m));
        Eigen::Index count = 0;
        for (Eigen::Index i = 0; i < m; ++i) {
            const double rho = slice_radius(x0 - centers(i, 0), radii[static_cast<std::size_t>(i)], order);
            if (rho <= 0.0)
                continue;
            sliced.row(count++) = centers.row(i).tail(rest);
            sliced_radii.push_back(rho);
        }
        if (count == 0)
            return 0.0;
        const Vector cond_mean = mean_rest + gain * (x0 - mean(0));
        return normal_pdf(x0, mean(0), sd) *
               union_mass(cond_mean, cond_cov, sliced.topRows(count), sliced_radii, order);
    };

    using Quadrature = boost::math::quadrature::gauss_kronrod<double, 15>;
    double mass = 0.0;
    for (std::size_t k = 0; k + 1 < breaks.size(); ++k) {
        const double a = breaks[k];
        const double b = breaks[k + 1];
        if (!(b > a) || !active(0.5 * (a + b)))
            continue;
        mass += Quadrature::integrate(integrand, a, b, 12, 1e-10);
    }
    return mass;
}

void check_dimension(const GaussianMixture& mix, const Vector& u) {
    if (u.size() != mix.dimension())
        throw DimensionError("point has dimension " + std::to_string(u.size()) +
                             ", mixture has dimension " + std::to_string(mix.dimension()));
}

Vector vector_from_json(const nlohmann::json& j) {
    const auto values = j.get<std::vector<double>>();
    return Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

} // namespace

RandomStream::Engine RandomStream::engine() const {
    std::seed_seq seq{static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32),
                      static_cast<std::uint32_t>(stream_id_),
                      static_cast<std::uint32_t>(stream_id_ >> 32)};
    return Engine(seq);
}

GaussianMixture::GaussianMixture(std::vector<double> weights, std::vector<Vector> means,
                                 std::vector<Eigen::MatrixXd> covariances)
    : weights_(std::move(weights)), dim_(0) {
    if (weights_.empty())
        throw ModelError("mixture: at least one component is required");
    if (means.size() != weights_.size() || covariances.size() != weights_.size())
        throw ModelError("mixture: weights, means and covariances must have equal counts");
    double total = 0.0;
    for (double w : weights_) {
        if (!(w > 0.0) || !std::isfinite(w))
            throw ModelError("mixture: weights must be positive");
        total += w;
    }
    if (std::abs(total - 1.0) > 1e-12)
        throw ModelError("mixture: weights must sum to one");
    cumulative_.resize(weights_.size());
    std::partial_sum(weights_.begin(), weights_.end(), cumulative_.begin());

    dim_ = means.front().size();
    if (dim_ < 1)
        throw DimensionError("mixture: dimension must be at least one");
    for (std::size_t k = 0; k < weights_.size(); ++k) {
        Vector& mean = means[k];
        Eigen::MatrixXd& cov = covariances[k];
        if (mean.size() != dim_ || cov.rows() != dim_ || cov.cols() != dim_)
            throw DimensionError("mixture: component dimensions disagree");
        if (!mean.allFinite() || !cov.allFinite())
            throw ModelError("mixture: parameters must be finite");
        if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + cov.cwiseAbs().maxCoeff()))
            throw ModelError("mixture: covariance must be symmetric");
        Eigen::LLT<Eigen::MatrixXd> llt(cov);
        if (llt.info() != Eigen::Success)
            throw ModelError("mixture: covariance of component " + std::to_string(k) +
                             " is not positive definite");
        GaussianComponent comp;
        comp.factor = llt.matrixL();
        comp.log_normalizer = -0.5 * static_cast<double>(dim_) * std::log(2.0 * std::numbers::pi) -
                              comp.factor.diagonal().array().log().sum();
        comp.mean = std::move(mean);
        comp.covariance = std::move(cov);
        components_.push_back(std::move(comp));
    }
}

double GaussianMixture::log_density(const Vector& u) const {
    check_dimension(*this, u);
    std::vector<double> terms(components_.size());
    for (std::size_t k = 0; k < components_.size(); ++k) {
        const auto& c = components_[k];
        const Vector z = c.factor.triangularView<Eigen::Lower>().solve(u - c.mean);
        terms[k] = std::log(weights_[k]) + c.log_normalizer - 0.5 * z.squaredNorm();
    }
    const double top = *std::max_element(terms.begin(), terms.end());
    if (!std::isfinite(top))
        return top;
    double acc = 0.0;
    for (double t : terms)
        acc += std::exp(t - top);
    return top + std::log(acc);
}

double GaussianMixture::density(const Vector& u) const { return std::exp(log_density(u)); }

MixtureSampler::MixtureSampler(const GaussianMixture& mix, const RandomStream& stream)
    : mix_(mix), engine_(stream.engine()), z_(mix.dimension()) {}

void MixtureSampler::draw(double* out) {
    std::size_t k = 0;
    if (mix_.size() > 1) {
        const double pick = uniform_(engine_);
        while (k + 1 < mix_.size() && pick >= mix_.cumulative_[k])
            ++k;
    }
    for (Eigen::Index i = 0; i < z_.size(); ++i)
        z_(i) = normal_(engine_);
    const GaussianComponent& c = mix_.components_[k];
    Eigen::Map<Vector> x(out, z_.size());
    x.noalias() = c.mean + c.factor.triangularView<Eigen::Lower>() * z_;
}

PointSet sample(const GaussianMixture& mix, const RandomStream& stream, std::size_t n) {
    PointSet out(static_cast<Eigen::Index>(n), mix.dimension());
    MixtureSampler sampler(mix, stream);
    for (Eigen::Index i = 0; i < out.rows(); ++i)
        sampler.draw(out.data() + i * out.cols());
    return out;
}

double density(const GaussianMixture& mix, const Vector& u) { return mix.density(u); }

double true_ball_mass(const GaussianMixture& mix, const UncertaintySet& set) {
    if (set.dimension() != mix.dimension())
        throw DimensionError("uncertainty set and mixture dimensions disagree");
    if (set.dimension() > 3)
        throw UnsupportedError("ball-mass quadrature supports dimension <= 3; use Monte Carlo");
    if (set.radius() == 0.0)
        return 0.0;
    const std::vector<double> radii(static_cast<std::size_t>(set.size()), set.radius());
    double mass = 0.0;
    for (std::size_t k = 0; k < mix.size(); ++k) {
        const auto& c = mix.component(k);
        mass += mix.weights()[k] *
                union_mass(c.mean, c.covariance, set.centers(), radii, set.norm().order());
    }
    return std::clamp(mass, 0.0, 1.0);
}

GaussianMixture bundled_mixture(BundledMixture which) {
    using Eigen::MatrixXd;
    auto vec2 = [](double a, double b) { return Vector((Vector(2) << a, b).finished()); };
    auto cov2 = [](double a, double b, double c) {
        return MatrixXd((MatrixXd(2, 2) << a, b, b, c).finished());
    };
    switch (which) {
    case BundledMixture::DominantIsotropic:
        return GaussianMixture({0.9, 0.1}, {vec2(0.0, 0.0), vec2(0.4, -0.3)},
                               {cov2(1.0, 0.0, 1.0), cov2(1.6, 0.0, 1.6)});
    case BundledMixture::ConcentratedDiffuse:
        return GaussianMixture({0.6, 0.4}, {vec2(0.0, 0.0), vec2(1.5, 1.0)},
                               {cov2(0.25, 0.0, 0.25), cov2(4.0, 1.2, 3.0)});
    case BundledMixture::FourModes:
        return GaussianMixture({0.25, 0.25, 0.25, 0.25},
                               {vec2(-4.0, -4.0), vec2(-4.0, 4.0), vec2(4.0, -4.0), vec2(4.0, 4.0)},
                               {cov2(0.5, 0.0, 0.5), cov2(0.5, 0.1, 0.5), cov2(0.5, -0.1, 0.5),
                                cov2(0.5, 0.0, 0.5)});
    }
    throw DomainError("unknown bundled mixture");
}

BundledMixture parse_bundled_mixture(std::string_view name) {
    if (name == "a" || name == "isotropic")
        return BundledMixture::DominantIsotropic;
    if (name == "b" || name == "concentrated")
        return BundledMixture::ConcentratedDiffuse;
    if (name == "c" || name == "four-mode")
        return BundledMixture::FourModes;
    throw DomainError("unknown bundled mixture '" + std::string(name) +
                      "' (expected a, b, c, isotropic, concentrated or four-mode)");
}

void to_json(nlohmann::json& j, const GaussianMixture& mix) {
    j = nlohmann::json::object();
    j["weights"] = mix.weights();
    j["components"] = nlohmann::json::array();
    for (std::size_t k = 0; k < mix.size(); ++k) {
        const auto& c = mix.component(k);
        nlohmann::json cov = nlohmann::json::array();
        for (Eigen::Index r = 0; r < c.covariance.rows(); ++r) {
            nlohmann::json row = nlohmann::json::array();
            for (Eigen::Index s = 0; s < c.covariance.cols(); ++s)
                row.push_back(c.covariance(r, s));
            cov.push_back(std::move(row));
        }
        j["components"].push_back(
            {{"mean", std::vector<double>(c.mean.data(), c.mean.data() + c.mean.size())},
             {"cov", std::move(cov)}});
    }
}

GaussianMixture gaussian_mixture_from_json(const nlohmann::json& j) {
    try {
        auto weights = j.at("weights").get<std::vector<double>>();
        std::vector<Vector> means;
        std::vector<Eigen::MatrixXd> covs;
        for (const auto& c : j.at("components")) {
            means.push_back(vector_from_json(c.at("mean")));
            const auto& rows = c.at("cov");
            Eigen::MatrixXd cov(static_cast<Eigen::Index>(rows.size()),
                                rows.empty() ? 0 : static_cast<Eigen::Index>(rows.at(0).size()));
            for (std::size_t r = 0; r < rows.size(); ++r) {
                if (static_cast<Eigen::Index>(rows[r].size()) != cov.cols())
                    throw ModelError("mixture: covariance rows have mixed lengths");
                for (std::size_t s = 0; s < rows[r].size(); ++s)
                    cov(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(s)) =
                        rows[r][s].get<double>();
            }
            covs.push_back(std::move(cov));
        }
        return GaussianMixture(std::move(weights), std::move(means), std::move(covs));
    } catch (const nlohmann::json::exception& e) {
        throw ModelError(std::string("mixture: ") + e.what());
    }
}

} // namespace ccrobust
