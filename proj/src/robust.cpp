#include "ccrobust/robust.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>

namespace ccrobust {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Vector pad(const Vector& v, Eigen::Index total) {
    Vector out = Vector::Zero(total);
    out.head(v.size()) = v;
    return out;
}

nlohmann::json vector_json(const Vector& v) {
    return std::vector<double>(v.data(), v.data() + v.size());
}

Vector vector_from_json(const nlohmann::json& j) {
    const auto values = j.get<std::vector<double>>();
    return Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

double bound_from_json(const nlohmann::json& j, double missing) {
    return j.is_null() ? missing : j.get<double>();
}

nlohmann::json bound_json(double v) {
    return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

} // namespace

RobustLinearProgram::RobustLinearProgram(Vector objective, std::vector<DeterministicRow> rows,
                                         std::vector<RobustRow> robust_rows,
                                         std::optional<Vector> lower, std::optional<Vector> upper)
    : objective_(std::move(objective)), rows_(std::move(rows)),
      robust_rows_(std::move(robust_rows)) {
    const Eigen::Index n = objective_.size();
    if (n < 1)
        throw ModelError("robust program: at least one decision variable is required");
    if (!objective_.allFinite())
        throw ModelError("robust program: objective must be finite");
    lower_ = lower ? std::move(*lower) : Vector::Constant(n, -kInf);
    upper_ = upper ? std::move(*upper) : Vector::Constant(n, kInf);
    if (lower_.size() != n || upper_.size() != n)
        throw DimensionError("robust program: bounds must have one entry per variable");
    for (Eigen::Index j = 0; j < n; ++j) {
        if (std::isnan(lower_(j)) || std::isnan(upper_(j)) || lower_(j) == kInf ||
            upper_(j) == -kInf)
            throw ModelError("robust program: invalid variable bounds");
    }
    for (const auto& row : rows_) {
        if (row.a.size() != n)
            throw DimensionError("robust program: deterministic row has the wrong length");
        if (!row.a.allFinite() || !std::isfinite(row.b))
            throw ModelError("robust program: deterministic rows must be finite");
    }
    for (const auto& row : robust_rows_) {
        if (row.set.dimension() != n)
            throw DimensionError("robust program: uncertainty set dimension must equal the number "
                                 "of variables");
        if (!std::isfinite(row.b))
            throw ModelError("robust program: robust row right-hand side must be finite");
    }
}

RobustLinearProgram RobustLinearProgram::with_radius(double radius) const {
    std::vector<RobustRow> robust;
    robust.reserve(robust_rows_.size());
    for (const auto& row : robust_rows_)
        robust.push_back({row.set.with_radius(radius), row.b});
    return RobustLinearProgram(objective_, rows_, std::move(robust), lower_, upper_);
}

double ConvexConstraint::lhs(const Vector& x) const {
    const double linear = center.dot(x);
    if (radius == 0.0)
        return linear;
    return linear + radius * dual_norm_eval(x, norm);
}

std::vector<ConvexConstraint> reformulate(const RobustRow& row) {
    const UncertaintySet& set = row.set;
    ConstraintKind kind = ConstraintKind::Linear;
    if (set.radius() > 0.0) {
        switch (set.norm().order()) {
        case NormOrder::L1:
            kind = ConstraintKind::LInfEpigraph;
            break;
        case NormOrder::LInf:
            kind = ConstraintKind::L1Epigraph;
            break;
        case NormOrder::L2:
            kind = ConstraintKind::SecondOrder;
            break;
        }
    }
    std::vector<ConvexConstraint> out;
    out.reserve(static_cast<std::size_t>(set.size()));
    for (Eigen::Index i = 0; i < set.size(); ++i)
        out.push_back({set.centers().row(i).transpose(), set.radius(), set.norm(), row.b, kind});
    return out;
}

SolveReport solve(const RobustLinearProgram& model, const RobustSolveOptions& options) {
    const Eigen::Index n = model.num_variables();

    std::vector<ConvexConstraint> constraints;
    for (const auto& row : model.robust_rows()) {
        auto part = reformulate(row);
        constraints.insert(constraints.end(), std::make_move_iterator(part.begin()),
                           std::make_move_iterator(part.end()));
    }
    auto uses = [&](ConstraintKind kind) {
        return std::any_of(constraints.begin(), constraints.end(),
                           [kind](const ConvexConstraint& c) { return c.kind == kind; });
    };
    const bool need_linf = uses(ConstraintKind::LInfEpigraph);
    const bool need_l1 = uses(ConstraintKind::L1Epigraph);
    const bool has_cones = uses(ConstraintKind::SecondOrder);

    // Column layout: x | t_inf | s_1..s_n, t_1
    Eigen::Index total = n;
    const Eigen::Index t_inf = need_linf ? total++ : -1;
    const Eigen::Index s_first = need_l1 ? total : -1;
    if (need_l1)
        total += n;
    const Eigen::Index t_one = need_l1 ? total++ : -1;

    LinearProgram lp = LinearProgram::nonnegative(pad(model.objective(), total));
    lp.lower.head(n) = model.lower();
    lp.upper.head(n) = model.upper();

    for (const auto& row : model.rows())
        lp.add_row(pad(row.a, total), RowSense::LessEqual, row.b);
    for (Eigen::Index j = 0; j < n && need_linf; ++j) {
        Vector up = Vector::Zero(total);
        up(j) = 1.0;
        up(t_inf) = -1.0;
        Vector down = Vector::Zero(total);
        down(j) = -1.0;
        down(t_inf) = -1.0;
        lp.add_row(std::move(up), RowSense::LessEqual, 0.0);
        lp.add_row(std::move(down), RowSense::LessEqual, 0.0);
    }
    if (need_l1) {
        Vector sum = Vector::Zero(total);
        sum(t_one) = 1.0;
        for (Eigen::Index j = 0; j < n; ++j) {
            Vector up = Vector::Zero(total);
            up(j) = 1.0;
            up(s_first + j) = -1.0;
            Vector down = Vector::Zero(total);
            down(j) = -1.0;
            down(s_first + j) = -1.0;
            lp.add_row(std::move(up), RowSense::LessEqual, 0.0);
            lp.add_row(std::move(down), RowSense::LessEqual, 0.0);
            sum(s_first + j) = -1.0;
        }
        lp.add_row(std::move(sum), RowSense::Equal, 0.0);
    }
    for (const auto& c : constraints) {
        Vector coeffs = pad(c.center, total);
        if (c.kind == ConstraintKind::LInfEpigraph)
            coeffs(t_inf) = c.radius;
        else if (c.kind == ConstraintKind::L1Epigraph)
            coeffs(t_one) = c.radius;
        // Second-order rows start from their relaxation x^T c <= b.
        lp.add_row(std::move(coeffs), RowSense::LessEqual, c.rhs);
    }

    SimplexOptions simplex;
    simplex.iteration_cap = options.simplex_iteration_cap;

    SolveReport report;
    report.feasibility_tolerance = options.feasibility_tolerance;
    report.cut_tolerance = options.cut_tolerance;
    report.cut_round_cap = options.max_cut_rounds;

    bool boxed = false;
    Vector x;
    std::size_t rounds = 0;
    for (;;) {
        SolveReport lp_report = simplex_solve(lp, simplex);
        report.simplex_iterations += lp_report.simplex_iterations;
        report.simplex_iteration_cap = lp_report.simplex_iteration_cap;
        if (lp_report.status == SolveStatus::Unbounded && has_cones && !boxed) {
            for (Eigen::Index j = 0; j < n; ++j) {
                lp.lower(j) = std::max(lp.lower(j), -options.unbounded_box);
                lp.upper(j) = std::min(lp.upper(j), options.unbounded_box);
            }
            boxed = true;
            continue;
        }
        if (lp_report.status != SolveStatus::Optimal) {
            report.status = lp_report.status;
            return report;
        }
        x = lp_report.x_star->head(n);
        if (!has_cones)
            break;

        CutRound round;
        round.objective = *lp_report.objective_value;
        round.min_cut_violation = kInf;
        for (const auto& c : constraints) {
            if (c.kind != ConstraintKind::SecondOrder)
                continue;
            const double v = c.violation(x);
            if (v <= options.cut_tolerance)
                continue;
            // ||y||_2 >= g^T y for the unit vector g = x / ||x||_2.
            const Vector g = dual_norm_maximizer(x, c.norm);
            lp.add_row(pad(c.center + c.radius * g, total), RowSense::LessEqual, c.rhs);
            round.min_cut_violation = std::min(round.min_cut_violation, v);
            ++round.cuts;
        }
        if (round.cuts == 0)
            break;
        report.cuts_added += round.cuts;
        report.cut_trace.push_back(round);
        if (++rounds >= options.max_cut_rounds) {
            report.status = SolveStatus::IterationLimit;
            report.x_star = x;
            report.objective_value = model.objective().dot(x);
            report.max_violation = max_violation(model, x);
            return report;
        }
    }

    if (boxed && (x.cwiseAbs().array() >= options.unbounded_box * (1.0 - 1e-9)).any()) {
        report.status = SolveStatus::Unbounded;
        return report;
    }

    report.max_violation = max_violation(model, x);
    report.objective_value = model.objective().dot(x);
    report.x_star = std::move(x);
    // The certificate is part of the contract: an iterate that misses it is
    // not reported as optimal.
    report.status = report.max_violation <= options.feasibility_tolerance
                        ? SolveStatus::Optimal
                        : SolveStatus::IterationLimit;
    return report;
}

PessimizeResult pessimize(const RobustLinearProgram& model, const Vector& x) {
    if (x.size() != model.num_variables())
        throw DimensionError("pessimize: point has the wrong dimension");
    PessimizeResult result;
    result.max_violation = -kInf;
    for (std::size_t k = 0; k < model.robust_rows().size(); ++k) {
        const RobustRow& row = model.robust_rows()[k];
        const UncertaintySet& set = row.set;
        Eigen::Index best = 0;
        (set.centers() * x).maxCoeff(&best);
        const double v = worst_case_linear(set, x) - row.b;
        if (v > result.max_violation || !result.row) {
            result.max_violation = v;
            result.row = k;
            result.center = best;
        }
    }
    if (!result.row)
        return result;

    const UncertaintySet& set = model.robust_rows()[*result.row].set;
    const Vector center = set.centers().row(result.center).transpose();
    if (set.radius() == 0.0) {
        result.witness = center;
        return result;
    }
    const Vector step = set.radius() * dual_norm_maximizer(x, set.norm());
    // Rounding in center + step can land a hair outside the closed ball.
    result.witness = center + step;
    for (int k = 1; !set.contains(result.witness) && k < 60; ++k)
        result.witness = center + (1.0 - std::ldexp(1.0, k - 53)) * step;
    return result;
}

double max_violation(const RobustLinearProgram& model, const Vector& x) {
    if (x.size() != model.num_variables())
        throw DimensionError("max_violation: point has the wrong dimension");
    double worst = 0.0;
    for (const auto& row : model.rows())
        worst = std::max(worst, row.a.dot(x) - row.b);
    for (Eigen::Index j = 0; j < x.size(); ++j) {
        worst = std::max(worst, model.lower()(j) - x(j));
        worst = std::max(worst, x(j) - model.upper()(j));
    }
    if (!model.robust_rows().empty())
        worst = std::max(worst, pessimize(model, x).max_violation);
    return worst;
}

void to_json(nlohmann::json& j, const RobustLinearProgram& model) {
    j = nlohmann::json::object();
    j["objective"] = vector_json(model.objective());
    j["rows"] = nlohmann::json::array();
    for (const auto& row : model.rows())
        j["rows"].push_back({{"a", vector_json(row.a)}, {"b", row.b}});
    j["robust_rows"] = nlohmann::json::array();
    for (const auto& row : model.robust_rows())
        j["robust_rows"].push_back({{"set", row.set}, {"b", row.b}});
    j["bounds"] = nlohmann::json::array();
    for (Eigen::Index k = 0; k < model.num_variables(); ++k)
        j["bounds"].push_back({bound_json(model.lower()(k)), bound_json(model.upper()(k))});
}

RobustLinearProgram robust_program_from_json(const nlohmann::json& j) {
    try {
        Vector objective = vector_from_json(j.at("objective"));
        std::vector<DeterministicRow> rows;
        if (j.contains("rows")) {
            for (const auto& r : j.at("rows"))
                rows.push_back({vector_from_json(r.at("a")), r.at("b").get<double>()});
        }
        std::vector<RobustRow> robust;
        if (j.contains("robust_rows")) {
            for (const auto& r : j.at("robust_rows"))
                robust.push_back({uncertainty_set_from_json(r.at("set")), r.at("b").get<double>()});
        }
        std::optional<Vector> lower;
        std::optional<Vector> upper;
        if (j.contains("bounds") && !j.at("bounds").is_null()) {
            const auto& b = j.at("bounds");
            if (!b.is_array() || b.size() != static_cast<std::size_t>(objective.size()))
                throw ModelError("robust program: 'bounds' needs one [lower, upper] pair per variable");
            lower = Vector(objective.size());
            upper = Vector(objective.size());
            for (std::size_t k = 0; k < b.size(); ++k) {
                const auto idx = static_cast<Eigen::Index>(k);
                (*lower)(idx) = bound_from_json(b[k].at(0), -kInf);
                (*upper)(idx) = bound_from_json(b[k].at(1), kInf);
            }
        }
        return RobustLinearProgram(std::move(objective), std::move(rows), std::move(robust),
                                   std::move(lower), std::move(upper));
    } catch (const nlohmann::json::exception& e) {
        throw ModelError(std::string("robust program: ") + e.what());
    }
}

RobustLinearProgram bundled_example_program(double radius) {
    PointSet center(1, 2);
    center << 0.5, 0.5;
    std::vector<RobustRow> robust{{UncertaintySet(center, radius, NormSpec(NormOrder::L2)), 1.0}};
    return RobustLinearProgram(Vector::Ones(2), {}, std::move(robust), Vector::Zero(2),
                               Vector::Constant(2, kInf));
}

} // namespace ccrobust
