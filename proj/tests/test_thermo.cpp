#include <doctest.h>

#include <cmath>
#include <vector>

#include "minsg/error.hpp"
#include "minsg/stationary.hpp"
#include "minsg/thermo.hpp"

using namespace minsg;

namespace {

Matrix eye(std::size_t d) { return Matrix::Identity(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d)); }

const DiffusionModel& ou() {
    static const DiffusionModel m(1, linear_drift(eye(1)), eye(1));
    return m;
}

DiffusionModel rot(double omega) { return DiffusionModel(2, rotational_drift(2, omega), eye(2)); }

GridFunction density(const BallDomain& d, const ScalarField& f) {
    GridFunction g = build_grid_function(f, d, Semantics::density);
    g.values /= g.values.sum() * d.cell_volume();
    return g;
}

GridFunction gaussian(const BallDomain& d, double var) {
    return density(d, [var](std::span<const double> x) {
        double r2 = 0.0;
        for (double v : x) r2 += v * v;
        return std::exp(-r2 / (2.0 * var));
    });
}

// b = grad(|x|^4 / 4 + |x|^2 / 2) = (|x|^2 + 1) x
PolynomialField quartic_gradient_drift() {
    return {Polynomial(2, {{1.0, {3, 0}}, {1.0, {1, 2}}, {1.0, {1, 0}}}),
            Polynomial(2, {{1.0, {0, 3}}, {1.0, {2, 1}}, {1.0, {0, 1}}})};
}

double free_energy_of(const DiffusionModel& m, const GridFunction& p) { return free_energy(m, p).value.value(); }

}  // namespace

TEST_CASE("entropy closed forms") {
    const BallDomain d(1, 6, 1.0, 0.01);
    const GridFunction uniform = density(d, [](std::span<const double> x) { return std::abs(x[0]) <= 1.0 ? 1.0 : 0.0; });
    // 201 cells of width 0.01 carry the mass: log of the covered length
    CHECK(entropy(uniform) == doctest::Approx(std::log(201 * 0.01)).epsilon(1e-12));
    CHECK(entropy(gaussian(d, 1.0)) == doctest::Approx(0.5 * std::log(2.0 * M_PI * M_E)).epsilon(1e-3));

    GridFunction delta(d, Semantics::density);
    delta.values[static_cast<Eigen::Index>(d.origin())] = 1.0 / d.cell_volume();
    CHECK(entropy(delta) == doctest::Approx(std::log(d.cell_volume())).epsilon(1e-12));
}

TEST_CASE("OU rates at a unit-variance Gaussian") {
    // gamma = -x + 2x = x: epr = E[x^2] / 2 = 1/2; J = -x P / 2: hdr = -E[x^2] = -1
    const BallDomain d(1, 6, 1.0, 0.05);
    const GridFunction p = gaussian(d, 1.0);
    const EprResult epr = entropy_production_rate(ou(), p);
    CHECK(epr.value == doctest::Approx(0.5).epsilon(0.02));
    CHECK(heat_dissipation_rate(ou(), p) == doctest::Approx(-1.0).epsilon(0.02));

    const StationaryDensity s = stationary_density(ou(), d, DriftScheme::exponential, StationaryMethod::nullspace);
    CHECK(entropy_production_rate(ou(), s.theta).value < 1e-4);
    CHECK(std::abs(heat_dissipation_rate(ou(), s.theta)) < 1e-4);
}

TEST_CASE("entropy balance is first order in dt") {
    const BallDomain d(1, 6, 1.0, 0.05);
    const Semigroup sg(ou(), d, DriftScheme::exponential);
    const GridFunction p = gaussian(d, 1.0);
    const EntropyBalance b1 = entropy_balance_check(ou(), sg, p, 0.02);
    const EntropyBalance b2 = entropy_balance_check(ou(), sg, p, 0.01);
    CHECK(b1.predicted == doctest::Approx(-0.5).epsilon(0.02));
    CHECK(b2.residual < b1.residual);
    CHECK(b1.residual / b2.residual == doctest::Approx(2.0).epsilon(0.25));
}

TEST_CASE("probability flux") {
    SUBCASE("vanishes at the OU stationary density") {
        const BallDomain d(1, 6, 1.0, 0.05);
        const StationaryDensity s = stationary_density(ou(), d, DriftScheme::exponential, StationaryMethod::nullspace);
        const FluxField j = probability_flux(ou(), s.theta);
        CHECK(j.sup_norm() < 1e-3 * s.theta.sup_norm());
    }
    SUBCASE("circulates for the rotational drift") {
        // J = -grad theta / 2 - b theta = -omega (-x2, x1) theta at theta = exp(-|x|^2) / pi
        const double omega = 1.0;
        const DiffusionModel m = rot(omega);
        const BallDomain d(2, 4, 1.0, 0.1);
        const GridFunction theta = gaussian(d, 0.5);
        const FluxField j = probability_flux(m, theta);
        for (const std::vector<int>& o : {std::vector<int>{5, 0}, std::vector<int>{-3, 7}, std::vector<int>{10, 10}}) {
            const std::size_t n = d.node_at(o);
            const double x1 = d.coordinate(n, 0), x2 = d.coordinate(n, 1);
            const double th = theta.values[static_cast<Eigen::Index>(n)];
            const double scale = omega * std::hypot(x1, x2) * th;
            CHECK(std::abs(j.components(static_cast<Eigen::Index>(n), 0) - omega * x2 * th) < 0.02 * scale);
            CHECK(std::abs(j.components(static_cast<Eigen::Index>(n), 1) + omega * x1 * th) < 0.02 * scale);
        }
    }
}

TEST_CASE("rotational rates balance and grow as omega squared") {
    // gamma = 2 omega J x: epr = 2 omega^2 E|x|^2 = 2 omega^2, hdr = -2 omega^2
    const BallDomain d(2, 4, 1.0, 0.1);
    const GridFunction theta = gaussian(d, 0.5);
    for (double omega : {0.5, 1.0}) {
        const DiffusionModel m = rot(omega);
        CHECK(entropy_production_rate(m, theta).value == doctest::Approx(2 * omega * omega).epsilon(0.01));
        CHECK(heat_dissipation_rate(m, theta) == doctest::Approx(-2 * omega * omega).epsilon(0.01));
    }
    const double e1 = entropy_production_rate(rot(1.0), theta).value;
    const double e2 = entropy_production_rate(rot(2.0), theta).value;
    CHECK(e2 > e1);
    CHECK(e2 / e1 == doctest::Approx(4.0).epsilon(1e-6));

    const FreeEnergy f = free_energy(rot(1.0), theta);
    CHECK_FALSE(f.value.has_value());
    CHECK(f.curl_residual == doctest::Approx(2.0).epsilon(1e-6));
}

TEST_CASE("free energy") {
    const BallDomain d(1, 6, 1.0, 0.05);
    std::vector<double> x{1.5};
    CHECK(potential(ou(), x) == doctest::Approx(2.25).epsilon(1e-8));
    const DiffusionModel dw(1, double_well_drift(1), eye(1));
    CHECK(potential(dw, x) == doctest::Approx(std::pow(1.5, 4) / 2 - 1.5 * 1.5).epsilon(1e-8));

    // h(v) = v - log(2 pi e v) / 2 for N(0, v) under U = x^2
    auto h = [](double v) { return v - 0.5 * std::log(2 * M_PI * M_E * v); };
    const GridFunction p1 = gaussian(d, 1.0);
    const GridFunction theta = gaussian(d, 0.5);
    CHECK(free_energy_of(ou(), p1) == doctest::Approx(h(1.0)).epsilon(1e-3));
    CHECK(free_energy_of(ou(), theta) == doctest::Approx(h(0.5)).epsilon(1e-3));
    CHECK(free_energy_of(ou(), theta) < free_energy_of(ou(), p1));
    CHECK(free_energy_of(ou(), theta) < free_energy_of(ou(), gaussian(d, 0.4)));

    const Semigroup sg(ou(), d, DriftScheme::exponential);
    const double dt = 0.01;
    const GridFunction p2 = sg.evolve_forward(dt, p1, 20).result;
    const double dh = free_energy_of(ou(), p2) - free_energy_of(ou(), p1);
    CHECK(dh < 0.0);
    CHECK(dh / dt == doctest::Approx(-entropy_production_rate(ou(), p1).value).epsilon(0.03));
}

TEST_CASE("Helmholtz decomposition") {
    SUBCASE("gradient drift at its invariant density") {
        const BallDomain d(1, 6, 1.0, 0.05);
        const StationaryDensity s = stationary_density(ou(), d, DriftScheme::exponential, StationaryMethod::nullspace);
        const Helmholtz hz = helmholtz_decompose(ou(), s.theta);
        CHECK(hz.gamma_sup < 1e-3);
        GridFunction scaled = s.theta;
        scaled.values *= 3.0;
        const Helmholtz h3 = helmholtz_decompose(ou(), scaled);
        CHECK((h3.gamma - hz.gamma).cwiseAbs().maxCoeff() < 1e-12);
    }
    SUBCASE("rotation leaves gamma = 2 omega J x") {
        const BallDomain d(2, 4, 1.0, 0.1);
        const Helmholtz hz = helmholtz_decompose(rot(1.0), gaussian(d, 0.5));
        const std::vector<int> o{6, -4};
        const std::size_t n = d.node_at(o);
        const double x1 = d.coordinate(n, 0), x2 = d.coordinate(n, 1);
        CHECK(hz.gamma(static_cast<Eigen::Index>(n), 0) == doctest::Approx(-2 * x2).epsilon(0.01));
        CHECK(hz.gamma(static_cast<Eigen::Index>(n), 1) == doctest::Approx(2 * x1).epsilon(0.01));
    }
}

TEST_CASE("symmetry and kernel reversibility contrast") {
    const BallDomain d1(1, 4, 1.0, 0.05);
    const StationaryDensity s1 = stationary_density(ou(), d1, DriftScheme::exponential, StationaryMethod::nullspace);
    const OperatorMatrix f1 = assemble_generator(ou(), d1, Orientation::forward, DriftScheme::exponential);

    const DiffusionModel r = rot(1.0);
    const BallDomain d2(2, 4, 1.0, 0.1);
    const StationaryDensity s2 = stationary_density(r, d2, DriftScheme::exponential, StationaryMethod::nullspace);
    const OperatorMatrix f2 = assemble_generator(r, d2, Orientation::forward, DriftScheme::exponential);

    const double sym_ou = check_weighted_symmetry(f1, s1.theta, make_symmetry_probes(f1, s1.theta, 10, 1));
    const double sym_rot = check_weighted_symmetry(f2, s2.theta, make_symmetry_probes(f2, s2.theta, 10, 1));
    CHECK(sym_ou < 1e-6);
    CHECK(sym_rot >= 100.0 * std::max(sym_ou, 1e-12));

    std::vector<ProbePair> same = make_symmetry_probes(f2, s2.theta, 3, 5);
    for (ProbePair& p : same) p.g = p.f;
    CHECK(check_weighted_symmetry(f2, s2.theta, same) == 0.0);

    const Semigroup sg1(ou(), d1, DriftScheme::exponential);
    const Semigroup sg2(r, d2, DriftScheme::exponential);
    const double k_ou = check_kernel_reversibility(sg1, s1.theta, 1.0, make_box_pairs(s1.theta, 10, 2));
    const double k_rot = check_kernel_reversibility(sg2, s2.theta, 1.0, make_box_pairs(s2.theta, 10, 2));
    CHECK(k_ou < 1e-3);
    CHECK(k_rot >= 50.0 * std::max(k_ou, 1e-12));

    std::vector<BoxPair> equal = make_box_pairs(s2.theta, 3, 9);
    for (BoxPair& p : equal) p.b = p.a;
    CHECK(check_kernel_reversibility(sg2, s2.theta, 1.0, equal) == 0.0);
}

TEST_CASE("reversibility classification") {
    SUBCASE("OU") {
        const ReversibilityVerdict v = classify_reversibility(ou(), {1, 1.0, 4, 0.05, DriftScheme::exponential}, 1.0);
        CHECK(v.consistent());
        CHECK(v.reversible());
    }
    SUBCASE("double well") {
        const DiffusionModel m(1, double_well_drift(1), eye(1));
        const ReversibilityVerdict v = classify_reversibility(m, {1, 1.0, 4, 0.05, DriftScheme::exponential}, 1.0);
        CHECK(v.reversible());
    }
    SUBCASE("quartic gradient drift in 2D") {
        const DiffusionModel m(2, quartic_gradient_drift(), eye(2));
        const ReversibilityVerdict v = classify_reversibility(m, {2, 1.0, 3, 0.1, DriftScheme::exponential}, 1.0);
        CHECK(v.reversible());
        CHECK(v.epr < 1e-4);
    }
    SUBCASE("rotation") {
        const ReversibilityVerdict v = classify_reversibility(rot(1.0), {2, 1.0, 4, 0.1, DriftScheme::exponential}, 1.0);
        CHECK(v.consistent());
        CHECK_FALSE(v.reversible());
        CHECK(v.to_text().find("irreversible") != std::string::npos);
    }
}
