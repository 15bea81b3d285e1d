#include "minsg/generator.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <ostream>

#include <boost/math/quadrature/gauss.hpp>
#include <fmt/format.h>

#include "minsg/error.hpp"

namespace minsg {

std::string to_string(DriftScheme s) {
    switch (s) {
        case DriftScheme::exponential: return "exponential";
        case DriftScheme::upwind: return "upwind";
        case DriftScheme::central: return "central";
    }
    return "?";
}

DriftScheme parse_scheme(const std::string& name) {
    if (name == "exponential") return DriftScheme::exponential;
    if (name == "upwind") return DriftScheme::upwind;
    if (name == "central") return DriftScheme::central;
    throw ValidationError("unknown drift scheme '" + name + "' (expected exponential, upwind or central)");
}

std::string to_string(Orientation o) { return o == Orientation::backward ? "backward" : "forward"; }

Eigen::VectorXd OperatorMatrix::gather(const GridFunction& f) const {
    const GridFunction& g = f.domain.node_count() == domain.node_count() && f.domain.same_lattice(domain)
                                ? f
                                : f.transfer(domain);
    Eigen::VectorXd v(static_cast<Eigen::Index>(unknowns.size()));
    for (std::size_t i = 0; i < unknowns.size(); ++i) v[static_cast<Eigen::Index>(i)] = g.values[static_cast<Eigen::Index>(unknowns[i])];
    return v;
}

GridFunction OperatorMatrix::scatter(const Eigen::VectorXd& v, Semantics s) const {
    GridFunction out(domain, s);
    for (std::size_t i = 0; i < unknowns.size(); ++i) out.values[static_cast<Eigen::Index>(unknowns[i])] = v[static_cast<Eigen::Index>(i)];
    return out;
}

namespace {

struct Move {
    std::array<int, 3> step{};
    std::array<int, 3> back{};
    int axis = -1;  // -1 for a diagonal (mixed-derivative) move
    int dir = 0;
    double corner_rate = 0.0;
};

// z / (e^z - 1), stable for all z.
double bernoulli(double z) {
    if (std::abs(z) < 1e-10) return 1.0 - 0.5 * z;
    return z / std::expm1(z);
}

class RateModel {
public:
    RateModel(const DiffusionModel& model, const BallDomain& domain, DriftScheme scheme)
        : model_(model), domain_(domain), scheme_(scheme), h_(domain.spacing()) {
        const std::size_t dim = domain.dim();
        if (dim > 3) throw ValidationError("PDE operations support dim <= 3");
        if (model.dim() != dim) throw ValidationError("model and domain dimensions differ");
        const Matrix& a = model.diffusion();
        weight_.assign(dim, 0.0);
        for (std::size_t k = 0; k < dim; ++k) {
            double off = 0.0;
            for (std::size_t l = 0; l < dim; ++l) {
                if (l != k) off += std::abs(a(k, l));
            }
            weight_[k] = 0.5 * (a(k, k) - off);
        }
        for (std::size_t k = 0; k < dim; ++k) {
            for (int dir : {1, -1}) {
                Move m;
                m.step[k] = dir;
                m.back[k] = -dir;
                m.axis = static_cast<int>(k);
                m.dir = dir;
                moves_.push_back(m);
            }
        }
        for (std::size_t k = 0; k < dim; ++k) {
            for (std::size_t l = k + 1; l < dim; ++l) {
                const double akl = a(k, l);
                if (akl == 0.0) continue;
                const int s = akl > 0 ? 1 : -1;
                for (int dir : {1, -1}) {
                    Move m;
                    m.step[k] = dir;
                    m.step[l] = dir * s;
                    m.back[k] = -dir;
                    m.back[l] = -dir * s;
                    m.corner_rate = std::abs(akl) / (2.0 * h_ * h_);
                    moves_.push_back(m);
                }
            }
        }
    }

    const std::vector<Move>& moves() const { return moves_; }
    const std::vector<double>& weights() const { return weight_; }

    // First axis whose diffusion weight is negative, or -1.
    int negative_axis() const {
        for (std::size_t k = 0; k < weight_.size(); ++k) {
            if (weight_[k] < 0.0) return static_cast<int>(k);
        }
        return -1;
    }

    double rate(std::size_t node, const Move& m) const {
        if (m.axis < 0) return m.corner_rate;
        const auto k = static_cast<std::size_t>(m.axis);
        const double d = weight_[k];
        switch (scheme_) {
            case DriftScheme::central: {
                const double v = velocity(node, k);
                return d / (h_ * h_) + m.dir * v / (2.0 * h_);
            }
            case DriftScheme::upwind: {
                const double v = velocity(node, k);
                return d / (h_ * h_) + std::max(m.dir * v, 0.0) / h_;
            }
            case DriftScheme::exponential: {
                const std::size_t lower = m.dir > 0 ? node : domain_.neighbor(node, k, -1);
                const double integral = edge_integral(lower, k);
                if (d <= 0.0) return std::max(m.dir * integral / h_, 0.0) / h_;
                const double pe = integral / d;
                return d / (h_ * h_) * bernoulli(-m.dir * pe);
            }
        }
        return 0.0;
    }

    double peclet(std::size_t node, std::size_t k) const {
        const double d = weight_[k];
        const double v = std::abs(velocity(node, k));
        if (v == 0.0) return 0.0;
        return d > 0.0 ? v * h_ / d : std::numeric_limits<double>::infinity();
    }

private:
    // Velocity of the generator: L contains  v . grad  with v = -b.
    double velocity(std::size_t node, std::size_t k) const {
        const auto x = domain_.coordinates(node);
        return -model_.drift(k, x);
    }

    // Integral of v_k along the lattice edge [lower, lower + h e_k].
    double edge_integral(std::size_t lower, std::size_t k) const {
        auto x = domain_.coordinates(lower);
        const double x0 = x[k];
        auto f = [&](double s) {
            x[k] = s;
            return -model_.drift(k, x);
        };
        return boost::math::quadrature::gauss<double, 10>::integrate(f, x0, x0 + h_);
    }

    const DiffusionModel& model_;
    const BallDomain& domain_;
    DriftScheme scheme_;
    double h_;
    std::vector<double> weight_;
    std::vector<Move> moves_;
};

std::string point_text(const std::vector<double>& x) {
    std::string s = "(";
    for (std::size_t i = 0; i < x.size(); ++i) s += fmt::format("{}{:.6g}", i ? ", " : "", x[i]);
    return s + ")";
}

}  // namespace

OperatorMatrix assemble_generator(const DiffusionModel& model, const BallDomain& domain, Orientation orientation,
                                  DriftScheme scheme, Boundary boundary) {
    RateModel rates(model, domain, scheme);

    OperatorMatrix op{domain, orientation, scheme, boundary, {}, {}, {}};
    op.position.assign(domain.node_count(), -1);
    for (std::size_t n = 0; n < domain.node_count(); ++n) {
        const bool active = boundary == Boundary::absorbing ? domain.is_interior(n) : domain.in_ball(n);
        if (!active) continue;
        op.position[n] = static_cast<std::ptrdiff_t>(op.unknowns.size());
        op.unknowns.push_back(n);
    }
    if (op.unknowns.empty()) throw ValidationError("domain has no unknown nodes");

    if (scheme != DriftScheme::central) {
        if (const int axis = rates.negative_axis(); axis >= 0) {
            const std::size_t node = op.unknowns.front();
            throw NumericalError(fmt::format(
                "M-matrix violation at row 0 (node {} at {}): mixed derivatives dominate axis {} "
                "(diffusion weight {:.6g} < 0)",
                node, point_text(domain.coordinates(node)), axis + 1, rates.weights()[static_cast<std::size_t>(axis)]));
        }
    }

    auto target_ok = [&](std::size_t y) {
        if (y == BallDomain::npos) return false;
        return boundary == Boundary::absorbing || domain.in_ball(y);
    };

    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(op.unknowns.size() * (rates.moves().size() + 1));
    for (std::size_t i = 0; i < op.unknowns.size(); ++i) {
        const std::size_t x = op.unknowns[i];
        double out = 0.0;
        for (const auto& m : rates.moves()) {
            const std::size_t y = domain.shifted(x, m.step);
            if (!target_ok(y)) continue;
            const double r = rates.rate(x, m);
            out += r;
            if (orientation == Orientation::backward && op.position[y] >= 0) {
                triplets.emplace_back(static_cast<int>(i), static_cast<int>(op.position[y]), r);
            }
        }
        triplets.emplace_back(static_cast<int>(i), static_cast<int>(i), -out);
        if (orientation == Orientation::forward) {
            // Inflow into x from every unknown source z with z + step = x.
            for (const auto& m : rates.moves()) {
                const std::size_t z = domain.shifted(x, m.back);
                if (z == BallDomain::npos || op.position[z] < 0) continue;
                triplets.emplace_back(static_cast<int>(i), static_cast<int>(op.position[z]), rates.rate(z, m));
            }
        }
    }
    const auto n = static_cast<Eigen::Index>(op.unknowns.size());
    op.matrix.resize(n, n);
    op.matrix.setFromTriplets(triplets.begin(), triplets.end());
    op.matrix.makeCompressed();
    return op;
}

std::string MaximumPrincipleReport::to_text() const {
    std::string s = fmt::format("maximum principle   {}\nworst margin        {:.6g}\nmax cell Peclet     {:.6g}\n",
                                passed ? "pass" : "FAIL", worst_margin, max_cell_peclet);
    if (first_offending_node) {
        s += fmt::format("first offending     node {} at {}: {}\n", *first_offending_node,
                         point_text(first_offending_coordinates), reason);
    }
    return s;
}

MaximumPrincipleReport check_maximum_principle(const OperatorMatrix& op, double lambda, const DiffusionModel* model) {
    if (!(lambda > 0.0)) throw ValidationError("lambda must be positive");
    // Rows of lambda I - L for the backward operator, columns for the forward one.
    Eigen::SparseMatrix<double, Eigen::RowMajor> m;
    if (op.orientation == Orientation::backward) {
        m = op.matrix;
    } else {
        m = op.matrix.transpose();
    }
    MaximumPrincipleReport rep;
    rep.worst_margin = std::numeric_limits<double>::infinity();
    for (Eigen::Index r = 0; r < m.outerSize(); ++r) {
        double diag = lambda;
        double off_abs = 0.0;
        bool sign_ok = true;
        for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(m, r); it; ++it) {
            if (it.col() == r) {
                diag -= it.value();
            } else {
                off_abs += std::abs(it.value());
                if (it.value() < 0.0) sign_ok = false;
            }
        }
        const double margin = diag - off_abs;
        rep.worst_margin = std::min(rep.worst_margin, margin);
        const bool ok = sign_ok && diag > 0.0 && margin > 0.0;
        if (!ok && !rep.first_offending_node) {
            const std::size_t node = op.unknowns[static_cast<std::size_t>(r)];
            rep.passed = false;
            rep.first_offending_node = node;
            rep.first_offending_coordinates = op.domain.coordinates(node);
            rep.reason = !sign_ok ? "positive off-diagonal entry in lambda I - L"
                         : diag <= 0.0 ? "non-positive diagonal"
                                       : "not strictly diagonally dominant";
        }
    }
    if (model) {
        RateModel rates(*model, op.domain, op.scheme);
        for (std::size_t node : op.unknowns) {
            for (std::size_t k = 0; k < op.domain.dim(); ++k) {
                rep.max_cell_peclet = std::max(rep.max_cell_peclet, rates.peclet(node, k));
            }
        }
    }
    return rep;
}

void write_triplets(const OperatorMatrix& op, std::ostream& os) {
    os << "row_node,col_node,value\n";
    Eigen::SparseMatrix<double, Eigen::RowMajor> m = op.matrix;
    for (Eigen::Index r = 0; r < m.outerSize(); ++r) {
        for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(m, r); it; ++it) {
            os << fmt::format("{},{},{:.17g}\n", op.unknowns[static_cast<std::size_t>(r)],
                              op.unknowns[static_cast<std::size_t>(it.col())], it.value());
        }
    }
}

}  // namespace minsg
