#include "ccrobust/lp.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>

namespace ccrobust {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kRatioTie = 1e-12;

enum class VarKind { Shifted, Reflected, Split };

// x_j = offset + y_column (Shifted), offset - y_column (Reflected),
// y_column - y_{column+1} (Split)
struct VarMap {
    VarKind kind;
    Eigen::Index column;
    double offset;
};

class Tableau {
  public:
    Tableau(Eigen::Index rows, Eigen::Index cols)
        : rows_(rows), cols_(cols), cells_((rows + 1) * (cols + 1), 0.0),
          basis_(static_cast<std::size_t>(rows), -1) {}

    double& at(Eigen::Index i, Eigen::Index j) { return cells_[i * (cols_ + 1) + j]; }
    double& rhs(Eigen::Index i) { return at(i, cols_); }
    double& cost(Eigen::Index j) { return at(rows_, j); }
    double& value() { return at(rows_, cols_); }

    Eigen::Index rows() const { return rows_; }
    Eigen::Index cols() const { return cols_; }
    Eigen::Index basic(Eigen::Index i) const { return basis_[static_cast<std::size_t>(i)]; }
    void set_basic(Eigen::Index i, Eigen::Index j) { basis_[static_cast<std::size_t>(i)] = j; }

    void pivot(Eigen::Index r, Eigen::Index c) {
        const double inv = 1.0 / at(r, c);
        for (Eigen::Index j = 0; j <= cols_; ++j)
            at(r, j) *= inv;
        at(r, c) = 1.0;
        for (Eigen::Index i = 0; i <= rows_; ++i) {
            if (i == r)
                continue;
            const double f = at(i, c);
            if (f == 0.0)
                continue;
            for (Eigen::Index j = 0; j <= cols_; ++j)
                at(i, j) -= f * at(r, j);
            at(i, c) = 0.0;
        }
        set_basic(r, c);
    }

    void subtract_row_from_cost(Eigen::Index r, double factor) {
        for (Eigen::Index j = 0; j <= cols_; ++j)
            at(rows_, j) -= factor * at(r, j);
    }

  private:
    Eigen::Index rows_;
    Eigen::Index cols_;
    std::vector<double> cells_;
    std::vector<Eigen::Index> basis_;
};

enum class PhaseResult { Optimal, Unbounded, IterationLimit };

PhaseResult run_phase(Tableau& t, const std::vector<bool>& may_enter, const SimplexOptions& opt,
                      std::size_t cap, std::size_t& iterations) {
    const double cost_tol = opt.pivot_tolerance;
    bool bland = false;
    for (;;) {
        Eigen::Index enter = -1;
        double most_negative = -cost_tol;
        for (Eigen::Index j = 0; j < t.cols(); ++j) {
            if (!may_enter[static_cast<std::size_t>(j)])
                continue;
            const double d = t.cost(j);
            if (bland) {
                if (d < -cost_tol) {
                    enter = j;
                    break;
                }
            } else if (d < most_negative) {
                most_negative = d;
                enter = j;
            }
        }
        if (enter < 0)
            return PhaseResult::Optimal;
        if (iterations >= cap)
            return PhaseResult::IterationLimit;

        Eigen::Index leave = -1;
        double best_ratio = kInf;
        for (Eigen::Index i = 0; i < t.rows(); ++i) {
            const double a = t.at(i, enter);
            if (a <= opt.pivot_tolerance)
                continue;
            const double ratio = std::max(0.0, t.rhs(i)) / a;
            if (leave < 0 || ratio < best_ratio - kRatioTie ||
                (ratio <= best_ratio + kRatioTie && t.basic(i) < t.basic(leave))) {
                if (leave < 0 || ratio < best_ratio - kRatioTie)
                    best_ratio = ratio;
                leave = i;
            }
        }
        if (leave < 0)
            return PhaseResult::Unbounded;

        // Degenerate pivots are where cycling can happen; use Bland's rule
        // until the objective moves again.
        bland = best_ratio <= kRatioTie;
        t.pivot(leave, enter);
        ++iterations;
    }
}

SolveReport finish(SolveStatus status, std::size_t iterations, std::size_t cap) {
    SolveReport report;
    report.status = status;
    report.simplex_iterations = iterations;
    report.simplex_iteration_cap = cap;
    return report;
}

void validate(const LinearProgram& lp) {
    const Eigen::Index n = lp.num_variables();
    if (lp.lower.size() != n || lp.upper.size() != n)
        throw ModelError("linear program: bounds must match the number of variables");
    if (!lp.objective.allFinite())
        throw ModelError("linear program: objective must be finite");
    for (const auto& row : lp.rows) {
        if (row.coeffs.size() != n)
            throw DimensionError("linear program: row length does not match the number of variables");
        if (!row.coeffs.allFinite() || !std::isfinite(row.rhs))
            throw ModelError("linear program: rows must be finite");
    }
    for (Eigen::Index j = 0; j < n; ++j) {
        if (std::isnan(lp.lower(j)) || std::isnan(lp.upper(j)) || lp.lower(j) == kInf ||
            lp.upper(j) == -kInf)
            throw ModelError("linear program: invalid variable bounds");
    }
}

} // namespace

LinearProgram LinearProgram::free(Vector objective) {
    const auto n = objective.size();
    return {std::move(objective), {}, Vector::Constant(n, -kInf), Vector::Constant(n, kInf)};
}

LinearProgram LinearProgram::nonnegative(Vector objective) {
    const auto n = objective.size();
    return {std::move(objective), {}, Vector::Zero(n), Vector::Constant(n, kInf)};
}

void LinearProgram::add_row(Vector coeffs, RowSense sense, double rhs) {
    rows.push_back({std::move(coeffs), sense, rhs});
}

std::string_view to_string(SolveStatus status) noexcept {
    switch (status) {
    case SolveStatus::Optimal:
        return "optimal";
    case SolveStatus::Infeasible:
        return "infeasible";
    case SolveStatus::Unbounded:
        return "unbounded";
    case SolveStatus::IterationLimit:
        return "iteration_limit";
    }
    return "iteration_limit";
}

void to_json(nlohmann::json& j, const SolveReport& report) {
    j = nlohmann::json::object();
    j["status"] = std::string(to_string(report.status));
    if (report.x_star) {
        j["x"] = std::vector<double>(report.x_star->data(),
                                     report.x_star->data() + report.x_star->size());
    } else {
        j["x"] = nullptr;
    }
    if (report.objective_value)
        j["objective"] = *report.objective_value;
    else
        j["objective"] = nullptr;
    j["cuts_added"] = report.cuts_added;
    j["max_violation"] = report.max_violation;
    j["simplex_iterations"] = report.simplex_iterations;
    j["tolerances"] = {{"feasibility", report.feasibility_tolerance},
                       {"cut_violation", report.cut_tolerance},
                       {"simplex_iteration_cap", report.simplex_iteration_cap},
                       {"cut_round_cap", report.cut_round_cap}};
}

double max_row_violation(const LinearProgram& lp, const Vector& x) {
    double worst = 0.0;
    for (const auto& row : lp.rows) {
        const double lhs = row.coeffs.dot(x);
        double v = 0.0;
        switch (row.sense) {
        case RowSense::LessEqual:
            v = lhs - row.rhs;
            break;
        case RowSense::GreaterEqual:
            v = row.rhs - lhs;
            break;
        case RowSense::Equal:
            v = std::abs(lhs - row.rhs);
            break;
        }
        worst = std::max(worst, v);
    }
    for (Eigen::Index j = 0; j < x.size(); ++j) {
        worst = std::max(worst, lp.lower(j) - x(j));
        worst = std::max(worst, x(j) - lp.upper(j));
    }
    return worst;
}

SolveReport simplex_solve(const LinearProgram& lp, const SimplexOptions& options) {
    validate(lp);
    const Eigen::Index n = lp.num_variables();

    // Map every variable onto nonnegative standard-form columns.
    std::vector<VarMap> vars;
    vars.reserve(static_cast<std::size_t>(n));
    std::vector<LinearRow> rows;
    Eigen::Index ny = 0;
    for (Eigen::Index j = 0; j < n; ++j) {
        const double lo = lp.lower(j);
        const double hi = lp.upper(j);
        if (lo > hi)
            return finish(SolveStatus::Infeasible, 0, 0);
        if (std::isfinite(lo)) {
            vars.push_back({VarKind::Shifted, ny++, lo});
        } else if (std::isfinite(hi)) {
            vars.push_back({VarKind::Reflected, ny++, hi});
        } else {
            vars.push_back({VarKind::Split, ny, 0.0});
            ny += 2;
        }
    }

    auto translate = [&](const Vector& coeffs, double rhs) {
        Vector out = Vector::Zero(ny);
        for (Eigen::Index j = 0; j < n; ++j) {
            const VarMap& v = vars[static_cast<std::size_t>(j)];
            const double a = coeffs(j);
            switch (v.kind) {
            case VarKind::Shifted:
                out(v.column) += a;
                rhs -= a * v.offset;
                break;
            case VarKind::Reflected:
                out(v.column) -= a;
                rhs -= a * v.offset;
                break;
            case VarKind::Split:
                out(v.column) += a;
                out(v.column + 1) -= a;
                break;
            }
        }
        return LinearRow{std::move(out), RowSense::LessEqual, rhs};
    };

    for (const auto& row : lp.rows) {
        LinearRow t = translate(row.coeffs, row.rhs);
        t.sense = row.sense;
        rows.push_back(std::move(t));
    }
    for (Eigen::Index j = 0; j < n; ++j) {
        const VarMap& v = vars[static_cast<std::size_t>(j)];
        if (v.kind == VarKind::Shifted && std::isfinite(lp.upper(j))) {
            Vector e = Vector::Zero(ny);
            e(v.column) = 1.0;
            rows.push_back({std::move(e), RowSense::LessEqual, lp.upper(j) - lp.lower(j)});
        }
    }

    // Normalize to rhs >= 0 and count auxiliary columns.
    Eigen::Index n_slack = 0;
    Eigen::Index n_art = 0;
    double rhs_scale = 1.0;
    for (auto& row : rows) {
        if (row.rhs < 0.0) {
            row.coeffs = -row.coeffs;
            row.rhs = -row.rhs;
            if (row.sense == RowSense::LessEqual)
                row.sense = RowSense::GreaterEqual;
            else if (row.sense == RowSense::GreaterEqual)
                row.sense = RowSense::LessEqual;
        }
        rhs_scale = std::max(rhs_scale, 1.0 + row.rhs);
        if (row.sense != RowSense::Equal)
            ++n_slack;
        if (row.sense != RowSense::LessEqual)
            ++n_art;
    }

    const auto m = static_cast<Eigen::Index>(rows.size());
    const Eigen::Index cols = ny + n_slack + n_art;
    const Eigen::Index first_art = ny + n_slack;
    Tableau t(m, cols);
    {
        Eigen::Index slack = ny;
        Eigen::Index art = first_art;
        for (Eigen::Index i = 0; i < m; ++i) {
            const LinearRow& row = rows[static_cast<std::size_t>(i)];
            for (Eigen::Index j = 0; j < ny; ++j)
                t.at(i, j) = row.coeffs(j);
            t.rhs(i) = row.rhs;
            switch (row.sense) {
            case RowSense::LessEqual:
                t.at(i, slack) = 1.0;
                t.set_basic(i, slack++);
                break;
            case RowSense::GreaterEqual:
                t.at(i, slack++) = -1.0;
                t.at(i, art) = 1.0;
                t.set_basic(i, art++);
                break;
            case RowSense::Equal:
                t.at(i, art) = 1.0;
                t.set_basic(i, art++);
                break;
            }
        }
    }

    const std::size_t cap = options.iteration_cap > 0
                                ? options.iteration_cap
                                : static_cast<std::size_t>(50 * (m + cols));
    std::size_t iterations = 0;

    // Phase one: maximize -sum(artificials).
    if (n_art > 0) {
        for (Eigen::Index j = first_art; j < cols; ++j)
            t.cost(j) = 1.0;
        for (Eigen::Index i = 0; i < m; ++i) {
            if (t.basic(i) >= first_art)
                t.subtract_row_from_cost(i, 1.0);
        }
        const std::vector<bool> all(static_cast<std::size_t>(cols), true);
        const PhaseResult r = run_phase(t, all, options, cap, iterations);
        if (r == PhaseResult::IterationLimit)
            return finish(SolveStatus::IterationLimit, iterations, cap);
        if (t.value() < -options.feasibility_tolerance * rhs_scale)
            return finish(SolveStatus::Infeasible, iterations, cap);

        // Drive zero-level artificials out of the basis where possible; the
        // rows that keep one are redundant.
        for (Eigen::Index i = 0; i < m; ++i) {
            if (t.basic(i) < first_art)
                continue;
            for (Eigen::Index j = 0; j < first_art; ++j) {
                if (std::abs(t.at(i, j)) > options.pivot_tolerance) {
                    t.pivot(i, j);
                    break;
                }
            }
        }
    }

    // Phase two: the real objective over the structural columns.
    for (Eigen::Index j = 0; j <= cols; ++j)
        t.cost(j) = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
        const VarMap& v = vars[static_cast<std::size_t>(j)];
        const double c = lp.objective(j);
        switch (v.kind) {
        case VarKind::Shifted:
            t.cost(v.column) -= c;
            break;
        case VarKind::Reflected:
            t.cost(v.column) += c;
            break;
        case VarKind::Split:
            t.cost(v.column) -= c;
            t.cost(v.column + 1) += c;
            break;
        }
    }
    for (Eigen::Index i = 0; i < m; ++i) {
        const double f = t.cost(t.basic(i));
        if (f != 0.0)
            t.subtract_row_from_cost(i, f);
    }
    std::vector<bool> may_enter(static_cast<std::size_t>(cols), true);
    for (Eigen::Index j = first_art; j < cols; ++j)
        may_enter[static_cast<std::size_t>(j)] = false;
    const PhaseResult r = run_phase(t, may_enter, options, cap, iterations);
    if (r == PhaseResult::IterationLimit)
        return finish(SolveStatus::IterationLimit, iterations, cap);
    if (r == PhaseResult::Unbounded)
        return finish(SolveStatus::Unbounded, iterations, cap);

    Vector y = Vector::Zero(ny);
    for (Eigen::Index i = 0; i < m; ++i) {
        if (t.basic(i) < ny)
            y(t.basic(i)) = t.rhs(i);
    }
    Vector x(n);
    for (Eigen::Index j = 0; j < n; ++j) {
        const VarMap& v = vars[static_cast<std::size_t>(j)];
        switch (v.kind) {
        case VarKind::Shifted:
            x(j) = v.offset + y(v.column);
            break;
        case VarKind::Reflected:
            x(j) = v.offset - y(v.column);
            break;
        case VarKind::Split:
            x(j) = y(v.column) - y(v.column + 1);
            break;
        }
    }

    SolveReport report = finish(SolveStatus::Optimal, iterations, cap);
    report.objective_value = lp.objective.dot(x);
    report.max_violation = max_row_violation(lp, x);
    report.x_star = std::move(x);
    return report;
}

} // namespace ccrobust
