#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace minsg {

/// Multivariate polynomial  sum_k c_k prod_j x_j^{p_kj}  in a fixed number of variables.
///
/// All drift fields are carried as polynomials so that Jacobians, divergence and
/// curl are exact. Terms with equal exponent vectors are merged on construction.
class Polynomial {
public:
    struct Term {
        double coef = 0.0;
        std::vector<int> powers;
    };

    Polynomial() = default;
    explicit Polynomial(std::size_t vars);
    Polynomial(std::size_t vars, std::vector<Term> terms);

    static Polynomial constant(std::size_t vars, double c);
    static Polynomial variable(std::size_t vars, std::size_t index, double coef = 1.0);

    std::size_t vars() const { return vars_; }
    const std::vector<Term>& terms() const { return terms_; }
    bool is_zero() const { return terms_.empty(); }
    int degree() const;

    double operator()(std::span<const double> x) const;

    Polynomial derivative(std::size_t var) const;

    Polynomial operator+(const Polynomial& other) const;
    Polynomial operator-(const Polynomial& other) const;
    Polynomial operator*(const Polynomial& other) const;
    Polynomial scaled(double s) const;

    std::string to_string() const;

private:
    void normalize();

    std::size_t vars_ = 0;
    std::vector<Term> terms_;
};

/// Vector field with polynomial components (one per coordinate).
using PolynomialField = std::vector<Polynomial>;

}  // namespace minsg
