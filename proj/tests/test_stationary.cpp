#include <doctest.h>

#include <cmath>
#include <vector>

#include "minsg/error.hpp"
#include "minsg/stationary.hpp"

using namespace minsg;

namespace {

Matrix eye(std::size_t d) { return Matrix::Identity(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d)); }

const DiffusionModel& ou() {
    static const DiffusionModel m(1, linear_drift(eye(1)), eye(1));
    return m;
}

double l1_distance(const GridFunction& p, const ScalarField& q) {
    const BallDomain& d = p.domain;
    std::vector<double> x(d.dim());
    double s = 0.0;
    for (std::size_t n = 0; n < d.node_count(); ++n) {
        for (std::size_t k = 0; k < d.dim(); ++k) x[k] = d.coordinate(n, k);
        s += std::abs(p.values[static_cast<Eigen::Index>(n)] - q(x)) * d.cell_volume();
    }
    return s;
}

double second_moment(const GridFunction& p) {
    double s = 0.0;
    for (std::size_t n = 0; n < p.domain.node_count(); ++n) {
        const double x = p.domain.coordinate(n, 0);
        s += x * x * p.values[static_cast<Eigen::Index>(n)] * p.domain.cell_volume();
    }
    return s;
}

}  // namespace

TEST_CASE("OU stationary density is N(0, 1/2)") {
    const BallDomain d(1, 6, 1.0, 0.05);
    const StationaryDensity s = stationary_density(ou(), d, DriftScheme::exponential, StationaryMethod::nullspace);
    CHECK(s.theta.values.sum() * d.cell_volume() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(second_moment(s.theta) == doctest::Approx(0.5).epsilon(0.01));
    CHECK(s.min_interior > 0.0);
    CHECK(l1_distance(s.theta, [](std::span<const double> x) { return std::exp(-x[0] * x[0]) / std::sqrt(M_PI); }) <
          1e-3);
    CHECK(s.spectrum.separation_ratio >= 10.0);
}

TEST_CASE("Brownian motion has no separated ground state") {
    const DiffusionModel bm(1, zero_drift(1), eye(1));
    const BallDomain d(1, 3, 1.0, 0.05);
    // absorbing interval modes scale as k^2, so |mu_2| / |mu_1| is close to 4
    CHECK_THROWS_WITH_AS(stationary_density(bm, d, DriftScheme::exponential, StationaryMethod::nullspace),
                         doctest::Contains("ambiguous"), NumericalError);
    const SpectrumReport sp =
        smallest_eigenvalues(assemble_generator(bm, d, Orientation::backward, DriftScheme::exponential));
    CHECK(sp.separation_ratio == doctest::Approx(4.0).epsilon(0.01));
}

TEST_CASE("rotational drift keeps the Gibbs density exp(-|x|^2)") {
    const DiffusionModel rot(2, rotational_drift(2, 1.0), eye(2));
    const BallDomain d(2, 4, 1.0, 0.1);
    const StationaryDensity s = stationary_density(rot, d, DriftScheme::exponential, StationaryMethod::nullspace);
    const double l1 = l1_distance(s.theta, [](std::span<const double> x) {
        return std::exp(-(x[0] * x[0] + x[1] * x[1])) / M_PI;
    });
    CHECK(l1 < 0.01);
}

TEST_CASE("time average agrees with the null vector") {
    const BallDomain d(1, 4, 1.0, 0.05);
    const StationaryDensity a = stationary_density(ou(), d, DriftScheme::exponential, StationaryMethod::nullspace);
    const StationaryDensity b = stationary_density(ou(), d, DriftScheme::exponential, StationaryMethod::time_average);
    CHECK(!b.trace.empty());
    CHECK((a.theta.values - b.theta.values).cwiseAbs().sum() * d.cell_volume() < 1e-3);
}

TEST_CASE("invariance under the absorbing semigroup and a tilted control") {
    const BallDomain d(1, 6, 1.0, 0.05);
    const StationaryDensity s = stationary_density(ou(), d, DriftScheme::exponential, StationaryMethod::nullspace);
    const Semigroup sg(ou(), d, DriftScheme::exponential);
    const InvarianceCheck inv = check_invariance(sg, s.theta, 1.0);
    CHECK(inv.l1_residual < 1e-3);
    CHECK(inv.leak_budget >= -1e-12);
    CHECK(sub_invariance_excess(sg, s.theta, 1.0) <= 1e-12);

    GridFunction tilted = s.theta;
    for (std::size_t n = 0; n < d.node_count(); ++n) {
        tilted.values[static_cast<Eigen::Index>(n)] *= 1.0 + 0.1 * std::tanh(d.coordinate(n, 0));
    }
    const InvarianceCheck bad = check_invariance(sg, tilted, 1.0);
    CHECK(bad.l1_residual >= 5.0 * std::max(inv.l1_residual, 1e-6));
}

TEST_CASE("time-averaged functional") {
    const BallDomain d(1, 4, 1.0, 0.05);
    const Semigroup sg(ou(), d, DriftScheme::exponential);
    const double horizon = 50.0;
    const InvariantFunctional lam = invariant_functional(sg, d.origin(), horizon);
    const GridFunction one = build_grid_function([](std::span<const double>) { return 1.0; }, d);
    CHECK(lam(one) == doctest::Approx(1.0).epsilon(1e-4));
    CHECK(lam(GridFunction(d)) == 0.0);

    const GridFunction f = build_grid_function([](std::span<const double> x) { return std::cos(3.0 * x[0]); }, d);
    const double t = 0.5;
    const GridFunction tf = sg.evolve(t, f).result;
    CHECK(std::abs(lam(tf) - lam(f)) <= 2.0 * t * f.sup_norm() / horizon);
    CHECK(lam.drift(f) < 0.1);
}

TEST_CASE("escape function") {
    SUBCASE("confining drift keeps e at 1") {
        const BallDomain d(1, 6, 1.0, 0.05);
        const Semigroup sg(ou(), d, DriftScheme::exponential);
        const EscapeFunction e = escape_function(sg, {1.0, 2.0, 4.0, 8.0});
        CHECK(e.e.values[static_cast<Eigen::Index>(d.origin())] == doctest::Approx(1.0).epsilon(1e-6));
        CHECK(e.harmonicity_residual < 1e-6);
    }
    SUBCASE("expelling drift drains every point") {
        const DiffusionModel out(1, linear_drift(-1.0 * eye(1)), eye(1));
        const BallDomain d(1, 2, 1.0, 0.05);
        const Semigroup sg(out, d, DriftScheme::exponential);
        const EscapeFunction e = escape_function(sg, {5.0, 10.0, 20.0, 40.0});
        CHECK(e.e.sup_norm() < 1e-6);
        double prev = 2.0;
        for (std::size_t n = d.origin(); n + 1 < d.node_count(); ++n) {
            CHECK(e.e.values[static_cast<Eigen::Index>(n)] <= prev);
            prev = e.e.values[static_cast<Eigen::Index>(n)];
        }
    }
    SUBCASE("unstable trace is reported") {
        const DiffusionModel bm(1, zero_drift(1), eye(1));
        const BallDomain d(1, 3, 1.0, 0.05);
        const Semigroup sg(bm, d, DriftScheme::exponential);
        CHECK_THROWS_AS(escape_function(sg, {0.1, 0.2}), NumericalError);
    }
}
