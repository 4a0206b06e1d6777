#include "ccrobust/geometry.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <limits>

namespace ccrobust {

namespace {

void require_nonempty(const Vector& x) {
    if (x.size() == 0)
        throw DimensionError("vector must have at least one entry");
}

void require_dimension(const PointSet& centers, const Vector& u) {
    if (centers.rows() == 0)
        throw DimensionError("at least one center is required");
    if (centers.cols() != u.size())
        throw DimensionError("point has dimension " + std::to_string(u.size()) +
                             ", centers have dimension " + std::to_string(centers.cols()));
}

} // namespace

std::string_view NormSpec::name() const noexcept {
    switch (order_) {
    case NormOrder::L1:
        return "l1";
    case NormOrder::L2:
        return "l2";
    case NormOrder::LInf:
        return "linf";
    }
    return "l2";
}

NormSpec NormSpec::parse(std::string_view name) {
    if (name == "l1")
        return NormSpec(NormOrder::L1);
    if (name == "l2")
        return NormSpec(NormOrder::L2);
    if (name == "linf")
        return NormSpec(NormOrder::LInf);
    throw DomainError("unknown norm '" + std::string(name) + "' (expected l1, l2 or linf)");
}

double norm_eval(const Vector& x, NormSpec norm) {
    require_nonempty(x);
    switch (norm.order()) {
    case NormOrder::L1:
        return x.lpNorm<1>();
    case NormOrder::L2:
        return x.norm();
    case NormOrder::LInf:
        return x.lpNorm<Eigen::Infinity>();
    }
    return x.norm();
}

double dual_norm_eval(const Vector& x, NormSpec norm) {
    return norm_eval(x, norm.dual());
}

Vector dual_norm_maximizer(const Vector& x, NormSpec norm) {
    require_nonempty(x);
    Vector g = Vector::Zero(x.size());
    switch (norm.order()) {
    case NormOrder::L2: {
        const double len = x.norm();
        if (len == 0.0)
            g(0) = 1.0;
        else
            g = x / len;
        break;
    }
    case NormOrder::L1: {
        // dual is LInf: put all weight on the largest entry
        Eigen::Index arg = 0;
        x.cwiseAbs().maxCoeff(&arg);
        g(arg) = x(arg) < 0.0 ? -1.0 : 1.0;
        break;
    }
    case NormOrder::LInf:
        // dual is L1: a vertex of the unit cube aligned with sign(x)
        for (Eigen::Index k = 0; k < x.size(); ++k)
            g(k) = x(k) < 0.0 ? -1.0 : 1.0;
        break;
    }
    return g;
}

double shape_value(const PointSet& centers, NormSpec norm, const Vector& u) {
    require_dimension(centers, u);
    return detail::distance(u.data(), centers.row(nearest_center(centers, norm, u)).data(),
                            u.size(), norm.order());
}

Eigen::Index nearest_center(const PointSet& centers, NormSpec norm, const Vector& u) {
    require_dimension(centers, u);
    const Eigen::Index dim = centers.cols();
    double best = std::numeric_limits<double>::infinity();
    Eigen::Index best_index = 0;
    const double* row = centers.data();
    for (Eigen::Index i = 0; i < centers.rows(); ++i, row += dim) {
        const double dist = detail::distance(u.data(), row, dim, norm.order());
        if (dist < best) {
            best = dist;
            best_index = i;
        }
    }
    return best_index;
}

UncertaintySet::UncertaintySet(PointSet centers, double radius, NormSpec norm)
    : centers_(std::move(centers)), radius_(radius), norm_(norm) {
    if (centers_.rows() < 1)
        throw DimensionError("an uncertainty set needs at least one center");
    if (centers_.cols() < 1)
        throw DimensionError("centers must have dimension >= 1");
    if (!centers_.allFinite())
        throw DomainError("centers must be finite");
    if (!(radius_ >= 0.0) || !std::isfinite(radius_))
        throw DomainError("radius must be finite and nonnegative");
}

UncertaintySet UncertaintySet::with_radius(double radius) const {
    return UncertaintySet(centers_, radius, norm_);
}

bool UncertaintySet::contains(const Vector& u) const {
    require_dimension(centers_, u);
    return detail::within_union(centers_, norm_.order(), radius_, u.data());
}

bool member(const UncertaintySet& set, const Vector& u) {
    return set.contains(u);
}

double worst_case_linear(const UncertaintySet& set, const Vector& x) {
    require_dimension(set.centers(), x);
    const double best_center = (set.centers() * x).maxCoeff();
    if (set.radius() == 0.0)
        return best_center;
    return best_center + set.radius() * dual_norm_eval(x, set.norm());
}

void to_json(nlohmann::json& j, const UncertaintySet& set) {
    nlohmann::json centers = nlohmann::json::array();
    for (Eigen::Index i = 0; i < set.size(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index k = 0; k < set.dimension(); ++k)
            row.push_back(set.centers()(i, k));
        centers.push_back(std::move(row));
    }
    j = nlohmann::json{{"norm", std::string(set.norm().name())},
                       {"radius", set.radius()},
                       {"centers", std::move(centers)}};
}

UncertaintySet uncertainty_set_from_json(const nlohmann::json& j) {
    try {
        const auto& rows = j.at("centers");
        if (!rows.is_array() || rows.empty())
            throw ModelError("uncertainty set: 'centers' must be a nonempty array");
        const auto dim = static_cast<Eigen::Index>(rows.at(0).size());
        PointSet centers(static_cast<Eigen::Index>(rows.size()), dim);
        for (std::size_t i = 0; i < rows.size(); ++i) {
            if (static_cast<Eigen::Index>(rows[i].size()) != dim)
                throw DimensionError("uncertainty set: centers have mixed dimensions");
            for (Eigen::Index k = 0; k < dim; ++k)
                centers(static_cast<Eigen::Index>(i), k) = rows[i][k].get<double>();
        }
        return UncertaintySet(std::move(centers), j.at("radius").get<double>(),
                              NormSpec::parse(j.at("norm").get<std::string>()));
    } catch (const nlohmann::json::exception& e) {
        throw ModelError(std::string("uncertainty set: ") + e.what());
    }
}

} // namespace ccrobust
