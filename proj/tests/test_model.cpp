#include <doctest.h>

#include <cmath>
#include <vector>

#include "minsg/config.hpp"
#include "minsg/error.hpp"
#include "minsg/model.hpp"
#include "minsg/polynomial.hpp"

using namespace minsg;

namespace {

Matrix eye(std::size_t d) { return Matrix::Identity(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d)); }

// b(x) = c x^2 in one variable.
PolynomialField quadratic_drift(double c) {
    return {Polynomial(1, {Polynomial::Term{c, {2}}})};
}

nlohmann::ordered_json ou_doc() {
    return nlohmann::ordered_json::parse(R"({
        "dim": 1,
        "drift": {"kind": "linear", "params": {"k": 1.0}},
        "diffusion": {"kind": "isotropic", "params": {"a": 1.0}},
        "domain": {"radius_scale": 1.0, "max_index": 6, "spacing": 0.05},
        "mu0": 1.0
    })");
}

}  // namespace

TEST_CASE("polynomial evaluation and derivatives agree with hand expansion") {
    // p(x, y) = 3 x^2 y - y + 2
    const Polynomial p(2, {{3.0, {2, 1}}, {-1.0, {0, 1}}, {2.0, {0, 0}}});
    const std::vector<double> pt{1.5, -0.5};
    CHECK(p(pt) == doctest::Approx(3 * 2.25 * -0.5 + 0.5 + 2));
    CHECK(p.derivative(0)(pt) == doctest::Approx(6 * 1.5 * -0.5));
    CHECK(p.derivative(1)(pt) == doctest::Approx(3 * 2.25 - 1));
    const Polynomial q = p * Polynomial::variable(2, 0) - p.scaled(2.0);
    CHECK(q(pt) == doctest::Approx(p(pt) * (1.5 - 2.0)));
}

TEST_CASE("identity diffusion with linear drift passes every assumption") {
    const DiffusionModel m(1, linear_drift(eye(1)), eye(1));
    const ValidationReport r = validate_model(m, 3.0, 500);
    CHECK(r.passed());
    CHECK(r.min_divergence == doctest::Approx(1.0));
    CHECK(r.min_rayleigh_quotient == doctest::Approx(1.0));
}

TEST_CASE("drift -x^2 fails the divergence assumption") {
    const DiffusionModel m(1, quadratic_drift(-1.0), eye(1));
    const ValidationReport r = validate_model(m, 2.0, 500);
    CHECK_FALSE(r.divergence_ok);
    CHECK_FALSE(r.divergence_bounded_below);
    CHECK(r.min_divergence < -3.5);
}

TEST_CASE("rotational model has divergence 2 and curl 2 omega") {
    const double omega = 0.7;
    const DiffusionModel m(2, rotational_drift(2, omega), eye(2));
    const ValidationReport r = validate_model(m, 3.0, 500);
    CHECK(r.passed());
    CHECK(r.min_divergence == doctest::Approx(2.0));
    CHECK(r.max_divergence_fd_error < 1e-6);
    const std::vector<double> x{0.3, -1.2};
    const Vector b = m.drift(x);
    CHECK(b[0] == doctest::Approx(0.3 - omega * -1.2));
    CHECK(b[1] == doctest::Approx(-1.2 + omega * 0.3));
    CHECK(std::abs(m.curl_weighted(x)(0, 1)) == doctest::Approx(2 * omega));
}

TEST_CASE("double well drift and divergence") {
    const DiffusionModel m(1, double_well_drift(1), eye(1));
    const std::vector<double> x{2.0};
    CHECK(m.drift(0, x) == doctest::Approx(8.0 - 2.0));
    CHECK(m.divergence(x) == doctest::Approx(3 * 4.0 - 1.0));
}

TEST_CASE("non-symmetric diffusion is rejected") {
    Matrix a(2, 2);
    a << 1.0, 0.2, 0.0, 1.0;
    const DiffusionModel m(2, zero_drift(2), a);
    CHECK_THROWS_AS(validate_model(m, 1.0, 10), ValidationError);
}

TEST_CASE("config parsing") {
    SUBCASE("bundled OU fields") {
        const ModelConfig c = parse_config(ou_doc(), "ou");
        CHECK(c.disc.max_index == 6);
        CHECK(c.disc.spacing == 0.05);
        CHECK(c.model.mu0.value() == 1.0);
        CHECK(c.oracle.drift_sign == -1.0);
    }
    SUBCASE("missing diffusion names the key") {
        auto doc = ou_doc();
        doc.erase("diffusion");
        try {
            parse_config(doc);
            FAIL("expected a validation error");
        } catch (const ValidationError& e) {
            CHECK(std::string(e.what()).find("'diffusion'") != std::string::npos);
        }
    }
    SUBCASE("missing nested key names the key") {
        auto doc = ou_doc();
        doc["domain"].erase("spacing");
        CHECK_THROWS_WITH_AS(parse_config(doc), doctest::Contains("'spacing'"), ValidationError);
    }
    SUBCASE("radius not a multiple of the spacing") {
        auto doc = ou_doc();
        doc["domain"]["spacing"] = 0.3;
        CHECK_THROWS_AS(parse_config(doc), ValidationError);
    }
    SUBCASE("hash ignores key order") {
        auto doc = ou_doc();
        nlohmann::ordered_json re;
        for (auto it = doc.rbegin(); it != doc.rend(); ++it) re[it.key()] = it.value();
        CHECK(parse_config(doc).hash() == parse_config(re).hash());
        doc["mu0"] = 0.5;
        CHECK(parse_config(doc).hash() != parse_config(re).hash());
    }
}

TEST_CASE("FNV-1a reference vectors") {
    CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
    CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
    CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);
}
