#pragma once

#include "ccrobust/common.hpp"

#include <nlohmann/json_fwd.hpp>

#include <cstddef>
#include <optional>
#include <string_view>
#include <vector>

namespace ccrobust {

enum class RowSense { LessEqual, GreaterEqual, Equal };

struct LinearRow {
    Vector coeffs;
    RowSense sense = RowSense::LessEqual;
    double rhs = 0.0;
};

/**
 * maximize    objective^T x
 * subject to  rows, lower <= x <= upper
 *
 * Infinite bounds are allowed on either side.
 */
struct LinearProgram {
    Vector objective;
    std::vector<LinearRow> rows;
    Vector lower;
    Vector upper;

    /// All variables free.
    static LinearProgram free(Vector objective);
    /// All variables in [0, inf).
    static LinearProgram nonnegative(Vector objective);

    Eigen::Index num_variables() const noexcept { return objective.size(); }

    void add_row(Vector coeffs, RowSense sense, double rhs);
};

enum class SolveStatus { Optimal, Infeasible, Unbounded, IterationLimit };

std::string_view to_string(SolveStatus status) noexcept;

/// One round of the cutting-plane loop.
struct CutRound {
    double objective = 0.0;
    /// Smallest violation among the cuts added at this iterate.
    double min_cut_violation = 0.0;
    std::size_t cuts = 0;
};

struct SolveReport {
    SolveStatus status = SolveStatus::IterationLimit;
    std::optional<Vector> x_star;
    std::optional<double> objective_value;
    std::size_t cuts_added = 0;
    /// Largest constraint violation of x_star (rows, bounds, robust rows).
    double max_violation = 0.0;
    std::size_t simplex_iterations = 0;

    double feasibility_tolerance = 1e-7;
    double cut_tolerance = 1e-7;
    std::size_t simplex_iteration_cap = 0;
    std::size_t cut_round_cap = 0;

    std::vector<CutRound> cut_trace;
};

void to_json(nlohmann::json& j, const SolveReport& report);

struct SimplexOptions {
    double pivot_tolerance = 1e-9;
    /// Phase-one residual above which the problem is declared infeasible
    /// (scaled by 1 + max |rhs|).
    double feasibility_tolerance = 1e-9;
    /// 0 selects 50 * (rows + columns) of the standard-form tableau.
    std::size_t iteration_cap = 0;
};

/// Dense two-phase tableau simplex. Dantzig pricing, switching to Bland's
/// rule after any degenerate pivot until progress resumes.
SolveReport simplex_solve(const LinearProgram& lp, const SimplexOptions& options = {});

/// Largest violation of rows and bounds at x.
double max_row_violation(const LinearProgram& lp, const Vector& x);

} // namespace ccrobust
