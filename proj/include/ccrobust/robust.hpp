#pragma once

#include "ccrobust/common.hpp"
#include "ccrobust/geometry.hpp"
#include "ccrobust/lp.hpp"

#include <nlohmann/json_fwd.hpp>

#include <optional>
#include <vector>

namespace ccrobust {

/// a^T x <= b
struct DeterministicRow {
    Vector a;
    double b = 0.0;
};

/// x^T u <= b for every u in `set`
struct RobustRow {
    UncertaintySet set;
    double b = 0.0;
};

/**
 * maximize c^T x subject to deterministic rows, robust bi-affine rows and
 * optional per-variable bounds (free when absent).
 */
class RobustLinearProgram {
  public:
    RobustLinearProgram(Vector objective, std::vector<DeterministicRow> rows,
                        std::vector<RobustRow> robust_rows, std::optional<Vector> lower = {},
                        std::optional<Vector> upper = {});

    const Vector& objective() const noexcept { return objective_; }
    const std::vector<DeterministicRow>& rows() const noexcept { return rows_; }
    const std::vector<RobustRow>& robust_rows() const noexcept { return robust_rows_; }
    const Vector& lower() const noexcept { return lower_; }
    const Vector& upper() const noexcept { return upper_; }
    Eigen::Index num_variables() const noexcept { return objective_.size(); }

    /// Same model with every robust row's radius replaced.
    RobustLinearProgram with_radius(double radius) const;

  private:
    Vector objective_;
    std::vector<DeterministicRow> rows_;
    std::vector<RobustRow> robust_rows_;
    Vector lower_;
    Vector upper_;
};

enum class ConstraintKind {
    Linear,         ///< r = 0: x^T c <= b
    LInfEpigraph,   ///< primal L1 ball, dual norm ||x||_inf via t >= +-x_j
    L1Epigraph,     ///< primal LInf ball, dual norm ||x||_1 via s_j >= +-x_j, t = sum s_j
    SecondOrder,    ///< primal L2 ball, handled by cutting planes
};

/// x^T center + radius * ||x||_* <= rhs, one per ball of a robust row.
struct ConvexConstraint {
    Vector center;
    double radius = 0.0;
    NormSpec norm;
    double rhs = 0.0;
    ConstraintKind kind = ConstraintKind::Linear;

    double lhs(const Vector& x) const;
    double violation(const Vector& x) const { return lhs(x) - rhs; }
};

/// One deterministic convex constraint per center of the row's set.
std::vector<ConvexConstraint> reformulate(const RobustRow& row);

struct RobustSolveOptions {
    double feasibility_tolerance = 1e-7;
    double cut_tolerance = 1e-7;
    std::size_t max_cut_rounds = 500;
    /// 0 lets the simplex pick 50 * (rows + columns).
    std::size_t simplex_iteration_cap = 0;
    /// Temporary box |x_j| <= box used when a cutting-plane relaxation is
    /// unbounded; an optimum on the box is reported as Unbounded.
    double unbounded_box = 1e6;
};

/// Exact LP for L1/LInf geometry, Kelley cutting planes for L2.
SolveReport solve(const RobustLinearProgram& model, const RobustSolveOptions& options = {});

struct PessimizeResult {
    /// max over robust rows of worst_case_linear(set, x) - b; -inf without robust rows.
    double max_violation = 0.0;
    std::optional<std::size_t> row;
    Eigen::Index center = 0;
    /// A point of the row's set attaining the worst case.
    Vector witness;
};

PessimizeResult pessimize(const RobustLinearProgram& model, const Vector& x);

/// Largest violation of deterministic rows, bounds and robust rows at x.
double max_violation(const RobustLinearProgram& model, const Vector& x);

void to_json(nlohmann::json& j, const RobustLinearProgram& model);
RobustLinearProgram robust_program_from_json(const nlohmann::json& j);

/// maximize x1 + x2, x >= 0, one robust row over a single L2 ball centered at
/// (0.5, 0.5) with radius 0.1 and b = 1.
RobustLinearProgram bundled_example_program(double radius = 0.1);

} // namespace ccrobust
