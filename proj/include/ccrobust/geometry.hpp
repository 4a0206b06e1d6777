#pragma once

#include "ccrobust/common.hpp"

#include <nlohmann/json_fwd.hpp>

#include <cmath>
#include <string>
#include <string_view>

namespace ccrobust {

enum class NormOrder { L1, L2, LInf };

/// A p-norm with p in {1, 2, inf}. The dual of L1 is LInf and L2 is self-dual.
class NormSpec {
  public:
    constexpr NormSpec() = default;
    constexpr explicit NormSpec(NormOrder order) : order_(order) {}

    constexpr NormOrder order() const noexcept { return order_; }

    constexpr NormSpec dual() const noexcept {
        switch (order_) {
        case NormOrder::L1:
            return NormSpec(NormOrder::LInf);
        case NormOrder::LInf:
            return NormSpec(NormOrder::L1);
        case NormOrder::L2:
            break;
        }
        return NormSpec(NormOrder::L2);
    }

    /// "l1", "l2" or "linf"
    std::string_view name() const noexcept;
    static NormSpec parse(std::string_view name);

    constexpr bool operator==(const NormSpec&) const = default;

  private:
    NormOrder order_ = NormOrder::L2;
};

/// ||x||_p. Throws DimensionError on an empty vector.
double norm_eval(const Vector& x, NormSpec norm);

/// ||x||_* for the dual order of `norm`.
double dual_norm_eval(const Vector& x, NormSpec norm);

/// A vector g with ||g||_p <= 1 and x^T g = ||x||_*.
///
/// At x = 0 any unit vector qualifies; the first standard basis vector is returned.
Vector dual_norm_maximizer(const Vector& x, NormSpec norm);

/// Distance-to-nearest-center shape function: min_i ||u - centers_i||.
double shape_value(const PointSet& centers, NormSpec norm, const Vector& u);

/// Index of a nearest center (the lowest index among ties).
Eigen::Index nearest_center(const PointSet& centers, NormSpec norm, const Vector& u);

/**
 * Union of closed p-norm balls with a common radius centered at the rows of
 * `centers`:
 *
 *     U(r) = { u : min_i ||u - c_i|| <= r }
 *
 * Immutable once constructed.
 */
class UncertaintySet {
  public:
    UncertaintySet(PointSet centers, double radius, NormSpec norm);

    const PointSet& centers() const noexcept { return centers_; }
    double radius() const noexcept { return radius_; }
    NormSpec norm() const noexcept { return norm_; }
    Eigen::Index size() const noexcept { return centers_.rows(); }
    Eigen::Index dimension() const noexcept { return centers_.cols(); }

    /// Same centers and norm, different radius.
    UncertaintySet with_radius(double radius) const;

    bool contains(const Vector& u) const;

  private:
    PointSet centers_;
    double radius_;
    NormSpec norm_;
};

/// shape_value(set.centers, set.norm, u) <= set.radius, with no tolerance.
bool member(const UncertaintySet& set, const Vector& u);

/// max_{u in set} x^T u = max_i x^T c_i + r ||x||_*.
double worst_case_linear(const UncertaintySet& set, const Vector& x);

void to_json(nlohmann::json& j, const UncertaintySet& set);
UncertaintySet uncertainty_set_from_json(const nlohmann::json& j);

namespace detail {

/// ||a - b||_p over `dim` contiguous entries.
inline double distance(const double* a, const double* b, Eigen::Index dim, NormOrder order) {
    double acc = 0.0;
    switch (order) {
    case NormOrder::L1:
        for (Eigen::Index k = 0; k < dim; ++k) {
            const double diff = a[k] - b[k];
            acc += diff < 0.0 ? -diff : diff;
        }
        return acc;
    case NormOrder::L2:
        for (Eigen::Index k = 0; k < dim; ++k) {
            const double diff = a[k] - b[k];
            acc += diff * diff;
        }
        return std::sqrt(acc);
    case NormOrder::LInf:
        for (Eigen::Index k = 0; k < dim; ++k) {
            const double diff = a[k] - b[k];
            const double mag = diff < 0.0 ? -diff : diff;
            if (mag > acc)
                acc = mag;
        }
        return acc;
    }
    return acc;
}

/// True when some row of `centers` lies within `radius` of `u`.
inline bool within_union(const PointSet& centers, NormOrder order, double radius, const double* u) {
    const Eigen::Index dim = centers.cols();
    const double* row = centers.data();
    for (Eigen::Index i = 0; i < centers.rows(); ++i, row += dim) {
        if (distance(u, row, dim, order) <= radius)
            return true;
    }
    return false;
}

} // namespace detail

} // namespace ccrobust
