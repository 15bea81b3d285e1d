#include "minsg/polynomial.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace minsg {

namespace {

double ipow(double x, int p) {
    double r = 1.0;
    while (p > 0) {
        if (p & 1) r *= x;
        x *= x;
        p >>= 1;
    }
    return r;
}

}  // namespace

Polynomial::Polynomial(std::size_t vars) : vars_(vars) {}

Polynomial::Polynomial(std::size_t vars, std::vector<Term> terms)
    : vars_(vars), terms_(std::move(terms)) {
    for (const auto& t : terms_) {
        if (t.powers.size() != vars_) {
            throw std::invalid_argument("polynomial term has " + std::to_string(t.powers.size()) +
                                        " exponents, expected " + std::to_string(vars_));
        }
        for (int p : t.powers) {
            if (p < 0) throw std::invalid_argument("polynomial exponents must be non-negative");
        }
    }
    normalize();
}

Polynomial Polynomial::constant(std::size_t vars, double c) {
    return Polynomial(vars, {Term{c, std::vector<int>(vars, 0)}});
}

Polynomial Polynomial::variable(std::size_t vars, std::size_t index, double coef) {
    std::vector<int> p(vars, 0);
    p.at(index) = 1;
    return Polynomial(vars, {Term{coef, std::move(p)}});
}

int Polynomial::degree() const {
    int d = 0;
    for (const auto& t : terms_) {
        int s = 0;
        for (int p : t.powers) s += p;
        d = std::max(d, s);
    }
    return d;
}

double Polynomial::operator()(std::span<const double> x) const {
    double sum = 0.0;
    for (const auto& t : terms_) {
        double v = t.coef;
        for (std::size_t j = 0; j < vars_; ++j) {
            if (t.powers[j] != 0) v *= ipow(x[j], t.powers[j]);
        }
        sum += v;
    }
    return sum;
}

Polynomial Polynomial::derivative(std::size_t var) const {
    std::vector<Term> out;
    for (const auto& t : terms_) {
        if (t.powers[var] == 0) continue;
        Term d = t;
        d.coef *= t.powers[var];
        d.powers[var] -= 1;
        out.push_back(std::move(d));
    }
    return Polynomial(vars_, std::move(out));
}

Polynomial Polynomial::operator+(const Polynomial& other) const {
    std::vector<Term> out = terms_;
    out.insert(out.end(), other.terms_.begin(), other.terms_.end());
    return Polynomial(std::max(vars_, other.vars_), std::move(out));
}

Polynomial Polynomial::operator-(const Polynomial& other) const {
    return *this + other.scaled(-1.0);
}

Polynomial Polynomial::operator*(const Polynomial& other) const {
    std::vector<Term> out;
    out.reserve(terms_.size() * other.terms_.size());
    for (const auto& a : terms_) {
        for (const auto& b : other.terms_) {
            Term t{a.coef * b.coef, a.powers};
            for (std::size_t j = 0; j < vars_; ++j) t.powers[j] += b.powers[j];
            out.push_back(std::move(t));
        }
    }
    return Polynomial(vars_, std::move(out));
}

Polynomial Polynomial::scaled(double s) const {
    std::vector<Term> out = terms_;
    for (auto& t : out) t.coef *= s;
    return Polynomial(vars_, std::move(out));
}

void Polynomial::normalize() {
    std::sort(terms_.begin(), terms_.end(),
              [](const Term& a, const Term& b) { return a.powers < b.powers; });
    std::vector<Term> merged;
    for (auto& t : terms_) {
        if (!merged.empty() && merged.back().powers == t.powers) {
            merged.back().coef += t.coef;
        } else {
            merged.push_back(std::move(t));
        }
    }
    std::erase_if(merged, [](const Term& t) { return t.coef == 0.0; });
    terms_ = std::move(merged);
}

std::string Polynomial::to_string() const {
    if (terms_.empty()) return "0";
    std::ostringstream os;
    os.precision(17);
    bool first = true;
    for (const auto& t : terms_) {
        if (!first) os << " + ";
        first = false;
        os << t.coef;
        for (std::size_t j = 0; j < vars_; ++j) {
            if (t.powers[j] == 1) os << "*x" << j + 1;
            if (t.powers[j] > 1) os << "*x" << j + 1 << "^" << t.powers[j];
        }
    }
    return os.str();
}

}  // namespace minsg
