#include "minsg/grid.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <fmt/format.h>

#include "minsg/error.hpp"

namespace minsg {

BallDomain::BallDomain(std::size_t dim, int index, double scale, double spacing)
    : dim_(dim), index_(index), scale_(scale), h_(spacing) {
    if (dim_ < 1) throw ValidationError("domain dim must be at least 1");
    if (index_ < 1) throw ValidationError("ball index must be at least 1");
    if (!(scale_ > 0.0) || !(h_ > 0.0)) throw ValidationError("radius scale and spacing must be positive");
    radius_ = scale_ * index_;
    const double ratio = radius_ / h_;
    half_ = static_cast<int>(std::llround(ratio));
    if (half_ < 1 || std::abs(ratio - half_) > 1e-9 * std::max(1.0, ratio)) {
        throw ValidationError(fmt::format(
            "radius {} is not an integer multiple of spacing {} (index {})", radius_, h_, index_));
    }
    axis_ = static_cast<std::size_t>(2 * half_ + 1);
    count_ = 1;
    volume_ = 1.0;
    for (std::size_t k = 0; k < dim_; ++k) {
        count_ *= axis_;
        volume_ *= h_;
    }

    const double inner = static_cast<double>(half_) * half_;
    interior_flag_.assign(count_, 0);
    ball_flag_.assign(count_, 0);
    for (std::size_t n = 0; n < count_; ++n) {
        std::size_t rest = n;
        long long r2 = 0;
        for (std::size_t k = 0; k < dim_; ++k) {
            const long long o = static_cast<long long>(rest % axis_) - half_;
            rest /= axis_;
            r2 += o * o;
        }
        // Integer lattice test: |x|^2 = h^2 * r2 against R^2 = h^2 * half^2.
        interior_flag_[n] = static_cast<double>(r2) < inner;
        ball_flag_[n] = static_cast<double>(r2) <= inner;
        if (interior_flag_[n]) interior_.push_back(n);
    }
}

std::vector<int> BallDomain::offsets(std::size_t node) const {
    std::vector<int> o(dim_);
    for (std::size_t k = 0; k < dim_; ++k) {
        o[k] = static_cast<int>(node % axis_) - half_;
        node /= axis_;
    }
    return o;
}

std::size_t BallDomain::node_at(std::span<const int> offsets) const {
    std::size_t node = 0;
    std::size_t stride = 1;
    for (std::size_t k = 0; k < dim_; ++k) {
        const int i = offsets[k] + half_;
        if (i < 0 || i >= static_cast<int>(axis_)) return npos;
        node += static_cast<std::size_t>(i) * stride;
        stride *= axis_;
    }
    return node;
}

std::vector<double> BallDomain::coordinates(std::size_t node) const {
    std::vector<double> x(dim_);
    for (std::size_t k = 0; k < dim_; ++k) {
        x[k] = (static_cast<int>(node % axis_) - half_) * h_;
        node /= axis_;
    }
    return x;
}

double BallDomain::coordinate(std::size_t node, std::size_t axis) const {
    for (std::size_t k = 0; k < axis; ++k) node /= axis_;
    return (static_cast<int>(node % axis_) - half_) * h_;
}

double BallDomain::norm(std::size_t node) const {
    double s = 0.0;
    for (double v : coordinates(node)) s += v * v;
    return std::sqrt(s);
}

std::size_t BallDomain::shifted(std::size_t node, std::span<const int> step) const {
    auto o = offsets(node);
    for (std::size_t k = 0; k < dim_; ++k) o[k] += step[k];
    return node_at(o);
}

std::size_t BallDomain::neighbor(std::size_t node, std::size_t axis, int dir) const {
    std::size_t stride = 1;
    std::size_t rest = node;
    for (std::size_t k = 0; k < axis; ++k) {
        stride *= axis_;
        rest /= axis_;
    }
    const int i = static_cast<int>(rest % axis_) + dir;
    if (i < 0 || i >= static_cast<int>(axis_)) return npos;
    return dir > 0 ? node + stride * static_cast<std::size_t>(dir) : node - stride * static_cast<std::size_t>(-dir);
}

std::size_t BallDomain::origin() const {
    const std::vector<int> zero(dim_, 0);
    return node_at(zero);
}

std::size_t BallDomain::nearest_node(std::span<const double> x) const {
    std::vector<int> o(dim_);
    for (std::size_t k = 0; k < dim_; ++k) {
        o[k] = static_cast<int>(std::lround(x[k] / h_));
        o[k] = std::clamp(o[k], -half_, half_);
    }
    return node_at(o);
}

bool BallDomain::same_lattice(const BallDomain& other) const {
    return dim_ == other.dim_ && h_ == other.h_;
}

std::size_t BallDomain::map_node(std::size_t node, const BallDomain& other) const {
    return other.node_at(offsets(node));
}

GridFunction::GridFunction(BallDomain d, Semantics s)
    : domain(std::move(d)), values(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(domain.node_count()))),
      semantics(s) {}

GridFunction::GridFunction(BallDomain d, Eigen::VectorXd v, Semantics s)
    : domain(std::move(d)), values(std::move(v)), semantics(s) {
    if (values.size() != static_cast<Eigen::Index>(domain.node_count())) {
        throw ValidationError(fmt::format("grid function has {} values for {} nodes", values.size(),
                                          domain.node_count()));
    }
}

double GridFunction::sup_norm() const { return values.size() ? values.cwiseAbs().maxCoeff() : 0.0; }

double GridFunction::l1_norm() const { return values.cwiseAbs().sum() * domain.cell_volume(); }

double GridFunction::mass() const { return values.sum() * domain.cell_volume(); }

GridFunction GridFunction::transfer(const BallDomain& target) const {
    if (!domain.same_lattice(target)) throw ValidationError("grid transfer needs a common lattice");
    GridFunction out(target, semantics);
    for (std::size_t n = 0; n < target.node_count(); ++n) {
        const std::size_t src = target.map_node(n, domain);
        if (src != BallDomain::npos) out.values[static_cast<Eigen::Index>(n)] = values[static_cast<Eigen::Index>(src)];
    }
    return out;
}

GridFunction build_grid_function(const ScalarField& expr, const BallDomain& domain, Semantics semantics) {
    GridFunction out(domain, semantics);
    for (std::size_t n = 0; n < domain.node_count(); ++n) {
        const auto x = domain.coordinates(n);
        const double v = expr(x);
        if (!std::isfinite(v)) {
            std::string where;
            for (std::size_t k = 0; k < x.size(); ++k) where += fmt::format("{}{:.6g}", k ? ", " : "", x[k]);
            throw ValidationError(fmt::format("non-finite value at node {} = ({})", n, where));
        }
        out.values[static_cast<Eigen::Index>(n)] = v;
    }
    return out;
}

CutoffFunction CutoffFunction::ones(const BallDomain& domain) {
    GridFunction g(domain);
    g.values.setOnes();
    return CutoffFunction{domain.index(), std::move(g)};
}

namespace {

constexpr double kQuadratureTol = 1e-13;

double bump(double t, double lo, double hi) {
    if (t <= lo || t >= hi) return 0.0;
    return std::exp(1.0 / ((t - hi) * (t - lo)));
}

double integrate_bump(double a, double b, double lo, double hi) {
    if (b <= a) return 0.0;
    double error = 0.0;
    const double value = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
        [lo, hi](double t) { return bump(t, lo, hi); }, a, b, 20, kQuadratureTol, &error);
    const double achieved = error / std::max(std::abs(value), 1e-300);
    if (!(achieved <= 1e-10) && error > 1e-15) {
        throw NumericalError(fmt::format("cutoff profile quadrature did not converge on [{}, {}]: achieved "
                                         "relative tolerance {:.3e}",
                                         a, b, achieved));
    }
    return value;
}

double profile_normalizer(int n) {
    static std::mutex mutex;
    static std::map<int, double> cache;
    std::lock_guard lock(mutex);
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;
    const double lo = (n - 0.5) * (n - 0.5);
    const double hi = static_cast<double>(n) * n;
    const double z = integrate_bump(lo, hi, lo, hi);
    cache.emplace(n, z);
    return z;
}

}  // namespace

double cutoff_value(int index, double scale, double r) {
    if (index < 1) throw ValidationError("cutoff index must be at least 1");
    const double lo_r = (index - 0.5) * scale;
    const double hi_r = index * scale;
    if (r <= lo_r) return 1.0;
    if (r >= hi_r) return 0.0;
    const double s = (r / scale) * (r / scale);
    const double lo = (index - 0.5) * (index - 0.5);
    const double hi = static_cast<double>(index) * index;
    const double v = integrate_bump(s, hi, lo, hi) / profile_normalizer(index);
    return std::clamp(v, 0.0, 1.0);
}

CutoffFunction cutoff_eval(int index, const BallDomain& domain) {
    if (index < 1) throw ValidationError("cutoff index must be at least 1");
    if (domain.radius() < index * domain.scale() - 1e-12) {
        throw ValidationError(fmt::format("cutoff index {} exceeds domain radius {}", index, domain.radius()));
    }
    GridFunction g(domain);
    for (std::size_t n = 0; n < domain.node_count(); ++n) {
        g.values[static_cast<Eigen::Index>(n)] = cutoff_value(index, domain.scale(), domain.norm(n));
    }
    return CutoffFunction{index, std::move(g)};
}

}  // namespace minsg
