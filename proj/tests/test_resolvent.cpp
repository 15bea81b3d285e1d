#include <doctest.h>

#include <cmath>
#include <vector>

#include "minsg/error.hpp"
#include "minsg/resolvent.hpp"

using namespace minsg;

namespace {

Matrix eye(std::size_t d) { return Matrix::Identity(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d)); }

GridFunction constant(const BallDomain& d, double c) {
    return build_grid_function([c](std::span<const double>) { return c; }, d);
}

GridFunction bump(const BallDomain& d, double center, double width) {
    return build_grid_function(
        [=](std::span<const double> x) {
            const double r = (x[0] - center) / width;
            return std::abs(r) < 1.0 ? std::pow(1.0 - r * r, 3) : 0.0;
        },
        d);
}

double local_origin_value(double h) {
    const DiffusionModel m(1, zero_drift(1), 2.0 * eye(1));
    const BallDomain d(1, 1, 1.0, h);
    const OperatorMatrix op = assemble_generator(m, d, Orientation::backward, DriftScheme::exponential);
    const LocalResolvent r = solve_local_resolvent(op, 1.0, constant(d, 1.0), CutoffFunction::ones(d));
    return r.solution.values[static_cast<Eigen::Index>(d.origin())];
}

const DiffusionModel& ou() {
    static const DiffusionModel m(1, linear_drift(eye(1)), eye(1));
    return m;
}

}  // namespace

TEST_CASE("local resolvent of a zero right-hand side is zero") {
    const BallDomain d(1, 2, 1.0, 0.1);
    const OperatorMatrix op = assemble_generator(ou(), d, Orientation::backward, DriftScheme::exponential);
    const LocalResolvent r = solve_local_resolvent(op, 1.0, constant(d, 0.0), cutoff_eval(2, d));
    CHECK(r.solution.sup_norm() == 0.0);
}

TEST_CASE("closed-form Dirichlet problem converges at second order") {
    // u'' = u - 1 on (-1, 1), u(+-1) = 0  =>  u(0) = 1 - 1 / cosh(1)
    const double exact = 1.0 - 1.0 / std::cosh(1.0);
    const double e1 = std::abs(local_origin_value(0.1) - exact);
    const double e2 = std::abs(local_origin_value(0.05) - exact);
    const double e3 = std::abs(local_origin_value(0.025) - exact);
    CHECK(e1 < 1e-3);
    CHECK(std::log2(e1 / e2) == doctest::Approx(2.0).epsilon(0.1));
    CHECK(std::log2(e2 / e3) == doctest::Approx(2.0).epsilon(0.1));
}

TEST_CASE("local resolvent is positive and contractive") {
    const BallDomain d(1, 3, 1.0, 0.05);
    const OperatorMatrix op = assemble_generator(ou(), d, Orientation::backward, DriftScheme::exponential);
    const GridFunction f = bump(d, 0.7, 0.8);
    for (double lambda : {0.1, 1.0, 10.0}) {
        const LocalResolvent r = solve_local_resolvent(op, lambda, f, cutoff_eval(3, d));
        CHECK(r.solution.values.minCoeff() >= 0.0);
        CHECK(lambda * r.solution.sup_norm() <= f.sup_norm() + 1e-12);
        CHECK(r.residual < 1e-10);
    }
}

TEST_CASE("Brownian exhaustion limit of R(2)1 is 1/2") {
    const DiffusionModel bm(1, zero_drift(1), eye(1));
    const Discretization disc{1, 1.0, 12, 0.05, DriftScheme::exponential};
    const GridFunction one = constant(disc.largest(), 1.0);
    ResolventOptions opts;
    opts.tol = 1e-7;
    opts.window = 1.0;
    const GlobalResolvent r = resolvent(bm, disc, 2.0, one, opts);
    CHECK(r.limit.values[static_cast<Eigen::Index>(r.limit.domain.origin())] == doctest::Approx(0.5).epsilon(1e-5));
    CHECK(r.last_sup_change < opts.tol);
    for (std::size_t i = 1; i < r.trace.size(); ++i) {
        CHECK(r.trace[i].value_at_origin >= r.trace[i - 1].value_at_origin - 1e-14);
    }
}

TEST_CASE("zero input converges at the first index") {
    const Discretization disc{1, 1.0, 4, 0.1, DriftScheme::exponential};
    const GlobalResolvent r = resolvent(ou(), disc, 1.0, constant(disc.largest(), 0.0));
    CHECK(r.converged_index <= 2);
    CHECK(r.limit.sup_norm() == 0.0);
}

TEST_CASE("exhaustion that cannot settle reports its profile") {
    const DiffusionModel bm(1, zero_drift(1), eye(1));
    const Discretization disc{1, 1.0, 3, 0.1, DriftScheme::exponential};
    try {
        resolvent(bm, disc, 0.01, constant(disc.largest(), 1.0));
        FAIL("expected non-convergence");
    } catch (const NumericalError& e) {
        CHECK(e.diagnostics().find("sup_change") != std::string::npos);
    }
}

TEST_CASE("resolvent laws on OU") {
    const Discretization disc{1, 1.0, 6, 0.05, DriftScheme::exponential};
    const BallDomain big = disc.largest();
    std::vector<NamedFunction> suite{
        {"one", constant(big, 1.0)},
        {"bump", bump(big, 0.5, 1.0)},
        {"signed", build_grid_function([](std::span<const double> x) { return std::sin(2.0 * x[0]); }, big)},
    };
    for (double lambda : {0.5, 1.0, 3.0}) {
        const ContractionReport r = verify_contraction_positivity(ou(), disc, lambda, suite);
        CHECK(r.passed);
        CHECK(r.worst_contraction_excess <= 1e-10);
        CHECK(r.worst_min_value >= -1e-12);
        CHECK(r.worst_decomposition_residual <= 1e-10);
    }

    const BallDomain ball = disc.domain(4);
    const GridFunction f = bump(big, -0.3, 1.5);
    CHECK(verify_resolvent_identity(ou(), ball, disc.scheme, 1.0, 1.0, f) == 0.0);
    CHECK(verify_resolvent_identity(ou(), ball, disc.scheme, 1.0, 3.0, f) <= 1e-9);

    ResolventOptions opts;
    opts.tol = 1e-8;
    CHECK(verify_resolvent_identity_limit(ou(), disc, 1.0, 3.0, f, opts) <= 5 * opts.tol);

    const MonotoneReport mono = verify_monotone_in_index(ou(), disc, 1.0, bump(big, 2.0, 1.0), {1, 2, 3, 4, 5, 6});
    CHECK(mono.passed);
    CHECK(mono.pairs.size() == 5);
}
