#include <doctest.h>

#include <cmath>
#include <vector>

#include "minsg/error.hpp"
#include "minsg/grid.hpp"

using namespace minsg;

namespace {

// Composite Simpson on the unnormalized profile exp(1/((t - n^2)(t - (n-1/2)^2))).
double simpson_profile(int n, double lo, double hi, int panels) {
    const double a = (n - 0.5) * (n - 0.5);
    const double b = static_cast<double>(n * n);
    auto f = [&](double t) {
        if (t <= a || t >= b) return 0.0;
        return std::exp(1.0 / ((t - b) * (t - a)));
    };
    const double h = (hi - lo) / panels;
    double s = f(lo) + f(hi);
    for (int i = 1; i < panels; ++i) s += f(lo + i * h) * (i % 2 ? 4.0 : 2.0);
    return s * h / 3.0;
}

}  // namespace

TEST_CASE("box layout and interior count") {
    const BallDomain d(1, 2, 1.0, 0.1);
    CHECK(d.radius() == doctest::Approx(2.0));
    CHECK(d.axis_nodes() == 41);
    CHECK(d.node_count() == 41);
    CHECK(d.interior_nodes().size() == 39);
    CHECK(d.coordinate(d.origin(), 0) == 0.0);

    const BallDomain d2(2, 1, 1.0, 0.25);
    CHECK(d2.node_count() == 81);
    std::size_t interior = 0;
    for (std::size_t n = 0; n < d2.node_count(); ++n) {
        const auto o = d2.offsets(n);
        if (o[0] * o[0] + o[1] * o[1] < 16) ++interior;
    }
    CHECK(d2.interior_nodes().size() == interior);
}

TEST_CASE("radius must be a whole number of cells") {
    CHECK_THROWS_AS(BallDomain(1, 1, 1.0, 0.3), ValidationError);
}

TEST_CASE("grid functions") {
    const BallDomain d(1, 6, 1.0, 0.05);
    SUBCASE("zero expression") {
        const GridFunction g = build_grid_function([](std::span<const double>) { return 0.0; }, d);
        CHECK(g.sup_norm() == 0.0);
    }
    SUBCASE("gaussian peak at the origin node") {
        const GridFunction g = build_grid_function([](std::span<const double> x) { return std::exp(-x[0] * x[0]); }, d);
        CHECK(g.values.size() == 241);
        CHECK(g.sup_norm() == 1.0);
        CHECK(g.values[static_cast<Eigen::Index>(d.origin())] == 1.0);
    }
    SUBCASE("x1 x2 is antisymmetric") {
        const BallDomain d2(2, 1, 1.0, 0.1);
        const GridFunction g = build_grid_function([](std::span<const double> x) { return x[0] * x[1]; }, d2);
        CHECK(std::abs(g.values.sum()) < 1e-12);
        const std::vector<int> a{3, 4}, b{-3, 4};
        CHECK(g.values[static_cast<Eigen::Index>(d2.node_at(a))] == -g.values[static_cast<Eigen::Index>(d2.node_at(b))]);
    }
    SUBCASE("non-finite values are reported with their location") {
        CHECK_THROWS_WITH_AS(build_grid_function([](std::span<const double> x) { return 1.0 / x[0]; }, d),
                             doctest::Contains("node"), ValidationError);
    }
}

TEST_CASE("transfer between nested boxes keeps shared nodes") {
    const BallDomain small(1, 2, 1.0, 0.1);
    const BallDomain big(1, 4, 1.0, 0.1);
    const GridFunction g = build_grid_function([](std::span<const double> x) { return std::cos(x[0]); }, small);
    const GridFunction up = g.transfer(big);
    const GridFunction back = up.transfer(small);
    CHECK((back.values - g.values).cwiseAbs().maxCoeff() == 0.0);
    const std::vector<double> far{3.5};
    CHECK(up.values[static_cast<Eigen::Index>(big.nearest_node(far))] == 0.0);
}

TEST_CASE("cutoff profile") {
    CHECK(cutoff_value(3, 1.0, 2.4) == 1.0);
    CHECK(cutoff_value(3, 1.0, 2.5) == 1.0);
    CHECK(cutoff_value(3, 1.0, 3.1) == 0.0);
    CHECK(cutoff_value(3, 1.0, 3.0) == 0.0);

    for (double r : {2.55, 2.75, 2.95}) {
        const double s = r * r;
        const double expected = simpson_profile(3, s, 9.0, 200000) / simpson_profile(3, 6.25, 9.0, 200000);
        CHECK(cutoff_value(3, 1.0, r) == doctest::Approx(expected).epsilon(1e-8));
    }
    // scale enters through |x| / scale
    CHECK(cutoff_value(2, 0.5, 0.8) == doctest::Approx(cutoff_value(2, 1.0, 1.6)).epsilon(1e-14));

    const BallDomain d(1, 3, 1.0, 0.05);
    const CutoffFunction g = cutoff_eval(3, d);
    double prev = 2.0;
    for (std::size_t n = d.origin(); n < d.node_count(); ++n) {
        const double v = g.values.values[static_cast<Eigen::Index>(n)];
        CHECK(v <= prev);
        CHECK(v >= 0.0);
        prev = v;
    }
}
