#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "minsg/error.hpp"
#include "minsg/mc.hpp"

using namespace minsg;

namespace {

Matrix eye(std::size_t d) { return Matrix::Identity(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d)); }

const DiffusionModel& ou() {
    static const DiffusionModel m(1, linear_drift(eye(1)), eye(1));
    return m;
}

const DiffusionModel& brownian() {
    static const DiffusionModel m(1, zero_drift(1), eye(1));
    return m;
}

double interval_survival(double x, double radius, double t) {
    double s = 0.0;
    for (int k = 1; k < 2000; k += 2) {
        const double q = k * M_PI / (2.0 * radius);
        s += 4.0 / (k * M_PI) * std::sin(q * (x + radius)) * std::exp(-0.5 * q * q * t);
    }
    return s;
}

}  // namespace

TEST_CASE("zero noise reduces to the ODE x' = -x") {
    SimulationOptions o;
    o.paths = 4;
    o.noise_scale = 0.0;
    o.record_times = {0.5, 1.0};
    const std::vector<double> x0{2.0};
    const TrajectoryEnsemble e = simulate(ou(), x0, o);
    for (std::size_t i = 0; i < e.record_times.size(); ++i) {
        for (Eigen::Index p = 0; p < 4; ++p) {
            CHECK(e.states[i](p, 0) == doctest::Approx(2.0 * std::exp(-e.record_times[i])).epsilon(1e-3));
        }
    }
}

TEST_CASE("OU variance from the origin") {
    SimulationOptions o;
    o.paths = 20000;
    o.record_times = {2.0};
    const std::vector<double> x0{0.0};
    const TrajectoryEnsemble e = simulate(ou(), x0, o);
    const SampleMoments m = sample_moments(e, 0);
    const double var = (1.0 - std::exp(-4.0)) / 2.0;
    const double se = var * std::sqrt(2.0 / static_cast<double>(o.paths));
    CHECK(std::abs(m.covariance(0, 0) - var) < 3.0 * se);
    CHECK(std::abs(m.mean[0]) < 3.0 * std::sqrt(var / static_cast<double>(o.paths)));
    CHECK(m.count == o.paths);
}

TEST_CASE("OU heat rate from stationarity is zero") {
    SimulationOptions o;
    o.paths = 4000;
    o.dt = 2e-3;
    o.record_times = {1.0, 5.0};
    const InitialSampler theta = [](std::mt19937_64& rng, std::span<double> x) {
        x[0] = std::normal_distribution<double>(0.0, std::sqrt(0.5))(rng);
    };
    const TrajectoryEnsemble e = simulate(ou(), theta, o);
    const RateEstimate r = heat_rate(e, 0, 1);
    CHECK(std::isfinite(r.mean));
    CHECK(std::abs(r.mean) < 3.0 * r.se);
    CHECK(r.ci_lo <= r.mean);
    CHECK(r.mean <= r.ci_hi);
}

TEST_CASE("Brownian histogram matches N(0, t)") {
    SimulationOptions o;
    o.paths = 20000;
    o.dt = 1e-2;
    o.record_times = {0.0, 0.5};
    const std::vector<double> x0{0.0};
    const TrajectoryEnsemble e = simulate(brownian(), x0, o);
    const HistogramSpec spec{{-3.05}, {0.1}, {61}};

    const Eigen::VectorXd k0 = empirical_kernel(e, 0, spec);
    CHECK(k0[30] * spec.cell_volume() == doctest::Approx(1.0));
    CHECK(k0.sum() * spec.cell_volume() == doctest::Approx(1.0));

    const Eigen::VectorXd k = empirical_kernel(e, 1, spec);
    double l1 = 0.0;
    for (std::size_t c = 0; c < spec.cell_count(); ++c) {
        const double x = spec.cell_center(c)[0];
        const double lo = x - 0.05, hi = x + 0.05;
        const double mass = 0.5 * (std::erf(hi) - std::erf(lo));  // N(0, 1/2)
        l1 += std::abs(k[static_cast<Eigen::Index>(c)] * spec.cell_volume() - mass);
    }
    CHECK(l1 < 0.05);
}

TEST_CASE("survival in an interval follows the sine series") {
    SimulationOptions o;
    o.paths = 20000;
    o.dt = 1e-3;
    o.absorb_radius = 1.0;
    o.record_times = {0.5};
    const std::vector<double> x0{0.0};
    const TrajectoryEnsemble e = simulate(brownian(), x0, o);
    const Proportion s = survival_probability(e, 0);
    CHECK(std::abs(s.p - interval_survival(0.0, 1.0, 0.5)) < 3.0 * s.se);
    CHECK(s.lo < s.p);
    CHECK(s.p < s.hi);
    std::size_t dead = 0;
    for (double t : e.absorption_time) dead += std::isfinite(t) ? 1 : 0;
    CHECK(dead == o.paths - static_cast<std::size_t>(std::lround(s.p * static_cast<double>(o.paths))));
}

TEST_CASE("generating function at lambda = 0 vanishes") {
    SimulationOptions o;
    o.paths = 2000;
    o.dt = 1e-2;
    o.record_times = {1.0, 3.0};
    const std::vector<double> x0{0.5};
    const TrajectoryEnsemble e = simulate(ou(), x0, o);
    const std::vector<GfEstimate> g = log_generating_function(e, {0.0, 0.2}, 0, 1);
    CHECK(g[0].value == 0.0);
    CHECK(g[0].ess == doctest::Approx(2000.0));
    CHECK(std::isfinite(g[1].value));
}

TEST_CASE("shape checks on synthetic curves") {
    auto curve = [](double (*f)(double)) {
        std::vector<GfEstimate> g;
        for (double l : {0.0, 0.2, 0.4, 0.5, 0.6, 0.8, 1.0}) g.push_back({l, f(l), f(l) - 1e-3, f(l) + 1e-3, 1e4});
        return g;
    };
    const auto convex = curve([](double l) { return l * (l - 1.0); });
    const auto concave = curve([](double l) { return l * (1.0 - l); });
    CHECK(check_convexity(convex).passed);
    CHECK_FALSE(check_convexity(concave).passed);
    CHECK(check_gf_symmetry(concave).passed);
    CHECK_FALSE(check_gf_symmetry(curve([](double l) { return l; })).passed);
}

TEST_CASE("same seed reproduces, different seed does not") {
    SimulationOptions o;
    o.paths = 100;
    o.dt = 1e-2;
    o.record_times = {1.0};
    const std::vector<double> x0{0.0};
    const TrajectoryEnsemble a = simulate(ou(), x0, o);
    const TrajectoryEnsemble b = simulate(ou(), x0, o);
    CHECK((a.states[0] - b.states[0]).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.heat[0] - b.heat[0]).cwiseAbs().maxCoeff() == 0.0);
    o.seed = 2;
    const TrajectoryEnsemble c = simulate(ou(), x0, o);
    CHECK((a.states[0] - c.states[0]).cwiseAbs().maxCoeff() > 0.0);
    CHECK(path_seed(1, 0) != path_seed(1, 1));
}
