#include "minsg/resolvent.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "minsg/error.hpp"
#include "minsg/linear_solver.hpp"

namespace minsg {

namespace {

SparseMatrix shifted_operator(const OperatorMatrix& op, double lambda) {
    SparseMatrix id(op.matrix.rows(), op.matrix.cols());
    id.setIdentity();
    SparseMatrix a = lambda * id - op.matrix;
    a.makeCompressed();
    return a;
}

std::vector<std::size_t> window_nodes(const BallDomain& domain, double w) {
    std::vector<std::size_t> nodes;
    for (std::size_t n = 0; n < domain.node_count(); ++n) {
        bool inside = true;
        for (double c : domain.coordinates(n)) {
            if (std::abs(c) > w + 1e-12) inside = false;
        }
        if (inside) nodes.push_back(n);
    }
    return nodes;
}

double resolve_window(const Discretization& disc, const ResolventOptions& options) {
    if (disc.max_index < 2) throw ValidationError("exhaustion needs max_index >= 2");
    const double inner = disc.radius_scale * (disc.max_index - 1);
    const double root = std::sqrt(static_cast<double>(disc.dim));
    const double w = options.window > 0.0 ? options.window : inner / (2.0 * root);
    if (!(w * root < inner)) {
        throw ValidationError(fmt::format("observation window half-width {} must lie strictly inside the ball of "
                                          "index {} (radius {})",
                                          w, disc.max_index - 1, inner));
    }
    return w;
}

double window_sup(const Eigen::VectorXd& v, const std::vector<std::size_t>& nodes) {
    double s = 0.0;
    for (std::size_t n : nodes) s = std::max(s, std::abs(v[static_cast<Eigen::Index>(n)]));
    return s;
}

GridFunction positive_part(const GridFunction& f, double sign) {
    GridFunction out = f;
    out.values = (sign * f.values).cwiseMax(0.0);
    return out;
}

}  // namespace

LocalResolvent solve_local_resolvent(const OperatorMatrix& op, double lambda, const GridFunction& f,
                                     const CutoffFunction& g) {
    if (!(lambda > 0.0)) throw ValidationError("resolvent parameter lambda must be positive");
    if (op.orientation != Orientation::backward) throw ValidationError("local resolvent uses the backward operator");
    const Eigen::VectorXd fv = op.gather(f);
    const Eigen::VectorXd gv = op.gather(g.values);
    const Eigen::VectorXd rhs = fv.cwiseProduct(gv);
    if (!rhs.allFinite()) throw ValidationError("resolvent right-hand side is not finite");

    LocalResolvent out{lambda, op.domain.index(), GridFunction(op.domain), 0.0};
    const double scale = rhs.cwiseAbs().maxCoeff();
    if (scale == 0.0) return out;
    const SparseMatrix a = shifted_operator(op, lambda);
    LinearSolver solver(a, op.domain.dim());
    const Eigen::VectorXd u = solver.solve(rhs);
    out.residual = (a * u - rhs).cwiseAbs().maxCoeff() / scale;
    out.solution = op.scatter(u);
    return out;
}

std::string GlobalResolvent::trace_csv() const {
    std::string s = "index,radius,sup_change,interior_value_at_origin\n";
    for (const auto& r : trace) {
        s += fmt::format("{},{:.17g},{:.17g},{:.17g}\n", r.index, r.radius, r.sup_change, r.value_at_origin);
    }
    return s;
}

GlobalResolvent resolvent(const DiffusionModel& model, const Discretization& disc, double lambda,
                          const GridFunction& f, const ResolventOptions& options) {
    if (!(lambda > 0.0)) throw ValidationError("resolvent parameter lambda must be positive");
    if (!(options.tol > 0.0)) throw ValidationError("resolvent tolerance must be positive");
    const double w = resolve_window(disc, options);
    const BallDomain largest = disc.largest();
    const auto window = window_nodes(largest, w);
    const auto origin = static_cast<Eigen::Index>(largest.origin());

    GlobalResolvent out{lambda, GridFunction(largest), 0, 0.0, w, {}, {}, {}};
    Eigen::VectorXd previous = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(largest.node_count()));
    for (int n = 1; n <= disc.max_index; ++n) {
        const BallDomain dom = disc.domain(n);
        const OperatorMatrix op = assemble_generator(model, dom, Orientation::backward, disc.scheme);
        const LocalResolvent local = solve_local_resolvent(op, lambda, f, cutoff_eval(n, dom));
        GridFunction embedded = local.solution.transfer(largest);
        const double change = window_sup(embedded.values - previous, window);
        out.trace.push_back({n, dom.radius(), change, embedded.values[origin]});
        out.snapshot_norms.push_back(embedded.sup_norm());
        previous = embedded.values;
        out.limit = embedded;
        out.last_sup_change = change;
        if (options.keep_snapshots) out.snapshots.push_back(std::move(embedded));
        if (change < options.tol) {
            out.converged_index = n;
            return out;
        }
    }
    std::string profile;
    for (const auto& r : out.trace) profile += fmt::format(" {}:{:.3e}", r.index, r.sup_change);
    throw NumericalError(fmt::format("resolvent exhaustion did not converge to tol {:.3e} by index {} (sup-change "
                                     "profile:{})",
                                     options.tol, disc.max_index, profile),
                         out.trace_csv());
}

double verify_resolvent_identity(const DiffusionModel& model, const BallDomain& ball, DriftScheme scheme,
                                 double lambda1, double lambda2, const GridFunction& f) {
    if (!(lambda1 > 0.0) || !(lambda2 > 0.0)) throw ValidationError("lambda values must be positive");
    if (lambda1 == lambda2) return 0.0;
    const OperatorMatrix op = assemble_generator(model, ball, Orientation::backward, scheme);
    const CutoffFunction g = cutoff_eval(ball.index(), ball);
    const Eigen::VectorXd rhs = op.gather(f).cwiseProduct(op.gather(g.values));
    const SparseMatrix a1 = shifted_operator(op, lambda1);
    const SparseMatrix a2 = shifted_operator(op, lambda2);
    const LinearSolver s1(a1, ball.dim());
    const LinearSolver s2(a2, ball.dim());
    const Eigen::VectorXd u1 = s1.solve(rhs);
    const Eigen::VectorXd u2 = s2.solve(rhs);
    const Eigen::VectorXd u12 = s1.solve(u2);
    return (u1 - u2 - (lambda2 - lambda1) * u12).cwiseAbs().maxCoeff();
}

double verify_resolvent_identity_limit(const DiffusionModel& model, const Discretization& disc, double lambda1,
                                       double lambda2, const GridFunction& f, const ResolventOptions& options) {
    if (lambda1 == lambda2) return 0.0;
    ResolventOptions opts = options;
    opts.keep_snapshots = false;
    const auto r1 = resolvent(model, disc, lambda1, f, opts);
    const auto r2 = resolvent(model, disc, lambda2, f, opts);
    const auto r12 = resolvent(model, disc, lambda1, r2.limit, opts);
    const auto window = window_nodes(disc.largest(), r1.window);
    return window_sup(r1.limit.values - r2.limit.values - (lambda2 - lambda1) * r12.limit.values, window);
}

std::string ContractionReport::to_text() const {
    std::string s = fmt::format("lambda {:.6g}: {}\n", lambda, passed ? "pass" : "FAIL");
    s += fmt::format("{:<24} {:>16} {:>16} {:>16}\n", "input", "contraction", "min R f", "f+/f- residual");
    for (const auto& e : entries) {
        s += fmt::format("{:<24} {:>16.6e} {:>16.6e} {:>16.6e}\n", e.label, e.contraction_excess, e.min_value,
                         e.decomposition_residual);
    }
    return s;
}

ContractionReport verify_contraction_positivity(const DiffusionModel& model, const Discretization& disc,
                                                double lambda, const std::vector<NamedFunction>& suite,
                                                const ResolventOptions& options) {
    ContractionReport rep;
    rep.lambda = lambda;
    rep.worst_contraction_excess = -std::numeric_limits<double>::infinity();
    rep.worst_min_value = std::numeric_limits<double>::infinity();
    ResolventOptions opts = options;
    opts.keep_snapshots = false;

    const BallDomain ball = disc.largest();
    const OperatorMatrix op = assemble_generator(model, ball, Orientation::backward, disc.scheme);
    const CutoffFunction g = cutoff_eval(ball.index(), ball);

    for (const auto& item : suite) {
        ContractionEntry e;
        e.label = item.label;
        const auto r = resolvent(model, disc, lambda, item.f, opts);
        e.contraction_excess = lambda * r.limit.sup_norm() - item.f.sup_norm();
        e.nonnegative_input = item.f.values.minCoeff() >= 0.0;
        e.min_value = r.limit.values.minCoeff();

        const auto whole = solve_local_resolvent(op, lambda, item.f, g);
        const auto plus = solve_local_resolvent(op, lambda, positive_part(item.f, 1.0), g);
        const auto minus = solve_local_resolvent(op, lambda, positive_part(item.f, -1.0), g);
        e.decomposition_residual =
            (whole.solution.values - (plus.solution.values - minus.solution.values)).cwiseAbs().maxCoeff();

        rep.worst_contraction_excess = std::max(rep.worst_contraction_excess, e.contraction_excess);
        if (e.nonnegative_input) rep.worst_min_value = std::min(rep.worst_min_value, e.min_value);
        rep.worst_decomposition_residual = std::max(rep.worst_decomposition_residual, e.decomposition_residual);
        if (e.contraction_excess > 1e-10) rep.passed = false;
        if (e.nonnegative_input && e.min_value < -1e-12) rep.passed = false;
        if (e.decomposition_residual > 1e-10 * std::max(1.0, item.f.sup_norm() / lambda)) rep.passed = false;
        rep.entries.push_back(std::move(e));
    }
    if (!std::isfinite(rep.worst_min_value)) rep.worst_min_value = 0.0;
    return rep;
}

MonotoneReport verify_monotone_in_index(const DiffusionModel& model, const Discretization& disc, double lambda,
                                        const GridFunction& f, const std::vector<int>& indices) {
    if (f.values.size() && f.values.minCoeff() < 0.0) throw ValidationError("monotonicity check needs f >= 0");
    std::vector<int> idx = indices;
    std::sort(idx.begin(), idx.end());
    idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
    if (idx.empty()) return {};
    const BallDomain host = disc.domain(idx.back());

    MonotoneReport rep;
    Eigen::VectorXd previous;
    for (std::size_t i = 0; i < idx.size(); ++i) {
        const BallDomain dom = disc.domain(idx[i]);
        const OperatorMatrix op = assemble_generator(model, dom, Orientation::backward, disc.scheme);
        const auto local = solve_local_resolvent(op, lambda, f, cutoff_eval(idx[i], dom));
        const Eigen::VectorXd current = local.solution.transfer(host).values;
        if (i > 0) {
            const double violation = std::max(0.0, (previous - current).maxCoeff());
            rep.pairs.emplace_back(idx[i - 1], idx[i]);
            rep.violations.push_back(violation);
            rep.worst_violation = std::max(rep.worst_violation, violation);
            if (violation > 1e-12) rep.passed = false;
        }
        previous = current;
    }
    return rep;
}

}  // namespace minsg
