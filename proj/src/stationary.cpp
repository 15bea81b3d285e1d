#include "minsg/stationary.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <Eigen/Eigenvalues>
#include <fmt/format.h>

#include "minsg/error.hpp"
#include "minsg/linear_solver.hpp"

namespace minsg {

std::string to_string(StationaryMethod m) { return m == StationaryMethod::nullspace ? "nullspace" : "time-average"; }

StationaryMethod parse_stationary_method(const std::string& name) {
    if (name == "nullspace") return StationaryMethod::nullspace;
    if (name == "time-average") return StationaryMethod::time_average;
    throw ValidationError("unknown stationary method '" + name + "' (expected nullspace or time-average)");
}

namespace {

SparseMatrix shifted(const SparseMatrix& m, double s) {
    SparseMatrix id(m.rows(), m.cols());
    id.setIdentity();
    SparseMatrix a = s * id - m;
    a.makeCompressed();
    return a;
}

std::vector<std::complex<double>> ritz_values(const SparseMatrix& l, const Eigen::MatrixXd& v) {
    const Eigen::MatrixXd h = v.transpose() * (l * v);
    Eigen::EigenSolver<Eigen::MatrixXd> es(h, false);
    std::vector<std::complex<double>> mu(es.eigenvalues().data(), es.eigenvalues().data() + es.eigenvalues().size());
    std::sort(mu.begin(), mu.end(), [](auto a, auto b) { return std::abs(a) < std::abs(b); });
    return mu;
}

}  // namespace

SpectrumReport smallest_eigenvalues(const OperatorMatrix& op, int count, double shift, int max_iterations,
                                    double tol) {
    const Eigen::Index n = op.matrix.rows();
    if (count < 1) throw ValidationError("eigenvalue count must be at least 1");
    SpectrumReport rep;
    const Eigen::Index p = std::min<Eigen::Index>(n, count + 3);
    if (n <= 64) {
        Eigen::EigenSolver<Eigen::MatrixXd> es(Eigen::MatrixXd(op.matrix), false);
        std::vector<std::complex<double>> mu(es.eigenvalues().data(), es.eigenvalues().data() + n);
        std::sort(mu.begin(), mu.end(), [](auto a, auto b) { return std::abs(a) < std::abs(b); });
        mu.resize(static_cast<std::size_t>(std::min<Eigen::Index>(n, count)));
        rep.eigenvalues = mu;
    } else {
        const LinearSolver solver(shifted(op.matrix, shift), op.domain.dim(), 1e-8);
        std::mt19937_64 rng(7);
        std::normal_distribution<double> gauss;
        Eigen::MatrixXd v(n, p);
        for (Eigen::Index j = 0; j < p; ++j) {
            for (Eigen::Index i = 0; i < n; ++i) v(i, j) = gauss(rng);
        }
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(v);
        v = qr.householderQ() * Eigen::MatrixXd::Identity(n, p);
        std::vector<std::complex<double>> previous;
        for (int it = 1; it <= max_iterations; ++it) {
            v = solver.solve(v);
            qr.compute(v);
            v = qr.householderQ() * Eigen::MatrixXd::Identity(n, p);
            auto mu = ritz_values(op.matrix, v);
            mu.resize(static_cast<std::size_t>(count));
            rep.iterations = it;
            bool converged = previous.size() == mu.size();
            for (std::size_t k = 0; converged && k < mu.size(); ++k) {
                if (std::abs(mu[k] - previous[k]) > tol * std::max(1.0, std::abs(mu[k]))) converged = false;
            }
            previous = mu;
            if (converged) break;
        }
        rep.eigenvalues = previous;
    }
    if (rep.eigenvalues.size() >= 2) {
        const double a = std::abs(rep.eigenvalues[0]);
        const double b = std::abs(rep.eigenvalues[1]);
        rep.separation_ratio = a > 0.0 ? b / a : std::numeric_limits<double>::infinity();
    }
    return rep;
}

std::string StationaryDensity::to_csv() const {
    std::string s;
    const std::size_t dim = theta.domain.dim();
    for (std::size_t k = 0; k < dim; ++k) s += fmt::format("x{},", k + 1);
    s += "density\n";
    for (std::size_t n = 0; n < theta.domain.node_count(); ++n) {
        if (!theta.domain.in_ball(n)) continue;
        for (double c : theta.domain.coordinates(n)) s += fmt::format("{:.17g},", c);
        s += fmt::format("{:.17g}\n", theta.values[static_cast<Eigen::Index>(n)]);
    }
    return s;
}

namespace {

double min_interior(const GridFunction& g) {
    double m = std::numeric_limits<double>::infinity();
    for (std::size_t n : g.domain.interior_nodes()) m = std::min(m, g.values[static_cast<Eigen::Index>(n)]);
    return m;
}

StationaryDensity nullspace_density(const DiffusionModel& model, const BallDomain& domain, DriftScheme scheme,
                                    const StationaryOptions& options) {
    StationaryDensity out{GridFunction(domain, Semantics::density), StationaryMethod::nullspace, 0.0, 0.0, {}, {}, ""};

    const OperatorMatrix absorbing = assemble_generator(model, domain, Orientation::backward, scheme);
    out.spectrum = smallest_eigenvalues(absorbing, 2);
    if (out.spectrum.separation_ratio < options.ambiguity_ratio) {
        std::string diag = "k,real,imag,magnitude\n";
        for (std::size_t k = 0; k < out.spectrum.eigenvalues.size(); ++k) {
            const auto mu = out.spectrum.eigenvalues[k];
            diag += fmt::format("{},{:.17g},{:.17g},{:.17g}\n", k + 1, mu.real(), mu.imag(), std::abs(mu));
        }
        throw NumericalError(fmt::format("ambiguous null space: the two smallest generator eigenvalues have "
                                         "magnitudes {:.6g} and {:.6g} (ratio {:.3g} < {:.3g}); no normalizable "
                                         "invariant density on this domain",
                                         std::abs(out.spectrum.eigenvalues[0]),
                                         std::abs(out.spectrum.eigenvalues[1]), out.spectrum.separation_ratio,
                                         options.ambiguity_ratio),
                             diag);
    }

    const OperatorMatrix q = assemble_generator(model, domain, Orientation::forward, scheme, Boundary::reflecting);
    double diag_scale = 0.0;
    for (Eigen::Index i = 0; i < q.matrix.outerSize(); ++i) diag_scale = std::max(diag_scale, std::abs(q.matrix.coeff(i, i)));
    const double mu = 1e-6 * diag_scale;
    const LinearSolver solver(shifted(q.matrix, mu), domain.dim(), 1e-8);
    Eigen::VectorXd theta = Eigen::VectorXd::Ones(q.matrix.rows());
    theta /= theta.sum();
    for (int it = 0; it < 200; ++it) {
        Eigen::VectorXd next = solver.solve(theta);
        next /= next.sum();
        const double change = (next - theta).cwiseAbs().maxCoeff() / next.cwiseAbs().maxCoeff();
        theta = next;
        if (change < 1e-14) break;
    }
    theta /= theta.sum() * domain.cell_volume();
    out.residual = (q.matrix * theta).cwiseAbs().maxCoeff();
    out.theta = q.scatter(theta, Semantics::density);
    out.min_interior = min_interior(out.theta);
    out.branch = "invariant density found";
    return out;
}

StationaryDensity time_average_density(const DiffusionModel& model, const BallDomain& domain, DriftScheme scheme,
                                       const StationaryOptions& options) {
    StationaryDensity out{GridFunction(domain, Semantics::density), StationaryMethod::time_average, 0.0, 0.0, {}, {}, ""};
    const Semigroup sg(model, domain, scheme);
    const double width = domain.radius() / 3.0;
    GridFunction p = build_grid_function(
        [width](std::span<const double> x) {
            double r2 = 0.0;
            for (double v : x) r2 += v * v;
            return std::exp(-0.5 * r2 / (width * width));
        },
        domain, Semantics::density);
    p = sg.forward().scatter(sg.forward().gather(p), Semantics::density);
    p.values /= p.mass();

    const double initial_mass = p.mass();
    double t = 0.0;
    while (t < options.horizon) {
        GridFunction next = sg.evolve_forward(options.chunk, p).result;
        t += options.chunk;
        const double rate = (next.values - p.values).cwiseAbs().sum() * domain.cell_volume() / options.chunk;
        p = std::move(next);
        out.trace.push_back({t, rate, p.mass()});
        if (rate < options.tol) {
            if (p.mass() < 0.5 * initial_mass) {
                throw NumericalError(fmt::format("time average converged to a vanishing density (mass {:.3e} at t = "
                                                 "{}): T(t)f -> 0 branch, no invariant density",
                                                 p.mass(), t),
                                     out.to_csv());
            }
            p.values /= p.mass();
            out.theta = p;
            out.residual = (sg.forward().matrix * sg.forward().gather(p)).cwiseAbs().maxCoeff();
            out.min_interior = min_interior(p);
            out.branch = "invariant density found";
            return out;
        }
    }
    std::string trace = "t,l1_change_rate,mass\n";
    for (const auto& r : out.trace) trace += fmt::format("{:.17g},{:.17g},{:.17g}\n", r.t, r.l1_change_rate, r.mass);
    throw NumericalError(fmt::format("time average did not settle within horizon {} (last L1 change rate {:.3e}, "
                                     "mass {:.3e})",
                                     options.horizon, out.trace.back().l1_change_rate, out.trace.back().mass),
                         trace);
}

}  // namespace

StationaryDensity stationary_density(const DiffusionModel& model, const BallDomain& domain, DriftScheme scheme,
                                     StationaryMethod method, const StationaryOptions& options) {
    if (method == StationaryMethod::nullspace) return nullspace_density(model, domain, scheme, options);
    return time_average_density(model, domain, scheme, options);
}

double InvariantFunctional::operator()(const GridFunction& f) const { return row.dot(op->gather(f)); }

double InvariantFunctional::drift(const GridFunction& f) const {
    const Eigen::VectorXd v = op->gather(f);
    return std::abs(row.dot(v) - row_early.dot(v));
}

InvariantFunctional invariant_functional(const Semigroup& sg, std::size_t x0_node, double horizon, int samples) {
    if (!(horizon > 0.0)) throw ValidationError("invariant functional horizon must be positive");
    samples = std::max(10, 10 * ((samples + 9) / 10));
    const OperatorMatrix& op = sg.backward();
    const std::ptrdiff_t pos = op.position.at(x0_node);
    if (pos < 0) throw ValidationError("invariant functional base point must be an interior node");

    const double ds = horizon / samples;
    const int steps = sg.default_steps(ds);
    const int early = samples * 9 / 10;
    Eigen::VectorXd v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(op.size()));
    v[pos] = 1.0;
    Eigen::VectorXd sum = 0.5 * v;
    Eigen::VectorXd early_row;
    for (int j = 1; j <= samples; ++j) {
        v = sg.apply(v, ds, steps, Orientation::forward);
        if (j == early) early_row = (sum + 0.5 * v) * ds / (early * ds);
        sum += j == samples ? 0.5 * v : v;
    }
    InvariantFunctional out;
    out.base_node = x0_node;
    out.horizon = horizon;
    out.samples = samples;
    out.row = sum * ds / horizon;
    out.row_early = early_row;
    out.op = &op;
    return out;
}

EscapeFunction escape_function(const Semigroup& sg, const std::vector<double>& t_grid, double tol,
                               double harmonic_t) {
    if (t_grid.size() < 2) throw ValidationError("escape function needs at least two times");
    const OperatorMatrix& op = sg.backward();
    Eigen::VectorXd u = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(op.size()));
    EscapeFunction out{GridFunction(op.domain), {}, {}, 0.0};
    double previous = 0.0;
    for (double t : t_grid) {
        if (t < previous) throw ValidationError("escape function times must be increasing");
        const double dt = t - previous;
        Eigen::VectorXd next = dt > 0.0 ? sg.apply(u, dt, sg.default_steps(dt), Orientation::backward) : u;
        out.times.push_back(t);
        out.sup_changes.push_back((next - u).cwiseAbs().maxCoeff());
        u = std::move(next);
        previous = t;
    }
    if (!(out.sup_changes.back() < tol)) {
        std::string trace = "t,sup_change\n";
        for (std::size_t i = 0; i < out.times.size(); ++i) {
            trace += fmt::format("{:.17g},{:.17g}\n", out.times[i], out.sup_changes[i]);
        }
        throw NumericalError(fmt::format("escape function not stabilized: last sup change {:.3e} >= {:.3e}",
                                         out.sup_changes.back(), tol),
                             trace);
    }
    out.e = op.scatter(u);
    const Eigen::VectorXd pe = sg.apply(u, harmonic_t, sg.default_steps(harmonic_t), Orientation::backward);
    out.harmonicity_residual = (pe - u).cwiseAbs().maxCoeff();
    return out;
}

InvarianceCheck check_invariance(const Semigroup& sg, const GridFunction& theta, double t, int steps) {
    const OperatorMatrix& op = sg.forward();
    const Eigen::VectorXd p0 = op.gather(theta);
    if (steps <= 0) steps = sg.default_steps(t);
    const Eigen::VectorXd p1 = sg.apply(p0, t, steps, Orientation::forward);
    const double vol = sg.domain().cell_volume();
    InvarianceCheck out;
    out.mass_before = p0.sum() * vol;
    out.mass_after = p1.sum() * vol;
    out.l1_residual = (p1 - p0).cwiseAbs().sum() * vol;
    out.leak_budget = out.mass_before > 0.0 ? 1.0 - out.mass_after / out.mass_before : 0.0;
    return out;
}

double sub_invariance_excess(const Semigroup& sg, const GridFunction& theta, double t, int steps) {
    const OperatorMatrix& op = sg.forward();
    const Eigen::VectorXd p0 = op.gather(theta);
    if (steps <= 0) steps = sg.default_steps(t);
    const Eigen::VectorXd p1 = sg.apply(p0, t, steps, Orientation::forward);
    return (p1 - p0).maxCoeff() * sg.domain().cell_volume();
}

}  // namespace minsg
