#include "minsg/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include <fmt/format.h>

#include "minsg/error.hpp"

namespace minsg {

namespace {

std::string format_point(std::span<const double> x) {
    std::string s = "(";
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (i) s += ", ";
        s += fmt::format("{:.6g}", x[i]);
    }
    return s + ")";
}

}  // namespace

DiffusionModel::DiffusionModel(std::size_t dim, PolynomialField drift, Matrix diffusion,
                               std::string label)
    : dim_(dim), drift_(std::move(drift)), diffusion_(std::move(diffusion)), label_(std::move(label)) {
    if (dim_ == 0) throw ValidationError("dim must be at least 1");
    if (drift_.size() != dim_) {
        throw ValidationError(fmt::format("drift has {} components, expected {}", drift_.size(), dim_));
    }
    for (const auto& p : drift_) {
        if (p.vars() != dim_) throw ValidationError("drift polynomial variable count does not match dim");
    }
    if (diffusion_.rows() != static_cast<Eigen::Index>(dim_) ||
        diffusion_.cols() != static_cast<Eigen::Index>(dim_)) {
        throw ValidationError(fmt::format("diffusion matrix must be {0}x{0}", dim_));
    }

    jacobian_.resize(dim_);
    divergence_ = Polynomial(dim_);
    for (std::size_t i = 0; i < dim_; ++i) {
        for (std::size_t j = 0; j < dim_; ++j) jacobian_[i].push_back(drift_[i].derivative(j));
        divergence_ = divergence_ + jacobian_[i][i];
    }

    const Matrix sym = 0.5 * (diffusion_ + diffusion_.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> eig(sym);
    min_eigenvalue_ = eig.eigenvalues().minCoeff();
    const Vector clipped = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    diffusion_sqrt_ = eig.eigenvectors() * clipped.asDiagonal() * eig.eigenvectors().transpose();
    if (min_eigenvalue_ > 0.0) {
        diffusion_inverse_ = sym.ldlt().solve(Matrix::Identity(dim_, dim_));
    } else {
        diffusion_inverse_ = Matrix::Constant(dim_, dim_, std::numeric_limits<double>::quiet_NaN());
    }
}

double DiffusionModel::drift(std::size_t component, std::span<const double> x) const {
    return drift_[component](x);
}

Vector DiffusionModel::drift(std::span<const double> x) const {
    Vector b(dim_);
    for (std::size_t i = 0; i < dim_; ++i) b[i] = drift_[i](x);
    return b;
}

Matrix DiffusionModel::drift_jacobian(std::span<const double> x) const {
    Matrix j(dim_, dim_);
    for (std::size_t r = 0; r < dim_; ++r) {
        for (std::size_t c = 0; c < dim_; ++c) j(r, c) = jacobian_[r][c](x);
    }
    return j;
}

double DiffusionModel::divergence(std::span<const double> x) const { return divergence_(x); }

Matrix DiffusionModel::curl_weighted(std::span<const double> x) const {
    // d_j (A^{-1} b)_i = (A^{-1} Jb)_{ij} for constant A.
    const Matrix g = diffusion_inverse_ * drift_jacobian(x);
    return g.transpose() - g;
}

PolynomialField zero_drift(std::size_t dim) { return PolynomialField(dim, Polynomial(dim)); }

PolynomialField linear_drift(const Matrix& b_matrix) {
    const auto dim = static_cast<std::size_t>(b_matrix.rows());
    if (b_matrix.cols() != b_matrix.rows()) throw ValidationError("linear drift matrix must be square");
    PolynomialField f(dim, Polynomial(dim));
    for (std::size_t i = 0; i < dim; ++i) {
        for (std::size_t j = 0; j < dim; ++j) {
            if (b_matrix(i, j) != 0.0) f[i] = f[i] + Polynomial::variable(dim, j, b_matrix(i, j));
        }
    }
    return f;
}

PolynomialField rotational_drift(std::size_t dim, double omega, double k) {
    if (dim < 2) throw ValidationError("rotational drift needs dim >= 2");
    Matrix b = k * Matrix::Identity(dim, dim);
    b(0, 1) = -omega;
    b(1, 0) = omega;
    return linear_drift(b);
}

namespace {

Polynomial squared_norm(std::size_t dim) {
    Polynomial r2(dim);
    for (std::size_t j = 0; j < dim; ++j) {
        const auto xj = Polynomial::variable(dim, j);
        r2 = r2 + xj * xj;
    }
    return r2;
}

PolynomialField gradient(const Polynomial& v) {
    PolynomialField g;
    for (std::size_t j = 0; j < v.vars(); ++j) g.push_back(v.derivative(j));
    return g;
}

}  // namespace

PolynomialField double_well_drift(std::size_t dim, double alpha, double beta) {
    const Polynomial r2 = squared_norm(dim);
    const Polynomial v = (r2 * r2).scaled(alpha / 4.0) - r2.scaled(beta / 2.0);
    return gradient(v);
}

PolynomialField gradient_polynomial_drift(std::size_t dim, const std::vector<double>& coeffs) {
    const Polynomial r2 = squared_norm(dim);
    Polynomial power = Polynomial::constant(dim, 1.0);
    Polynomial v(dim);
    for (double c : coeffs) {
        power = power * r2;
        v = v + power.scaled(c);
    }
    return gradient(v);
}

Matrix isotropic_diffusion(std::size_t dim, double a) { return a * Matrix::Identity(dim, dim); }

std::string ValidationReport::to_text() const {
    std::ostringstream os;
    os << fmt::format("samples                 {}\n", samples);
    os << fmt::format("seed                    {}\n", seed);
    os << fmt::format("min Rayleigh quotient   {:.6f}\n", min_rayleigh_quotient);
    os << fmt::format("min div b (analytic)    {:.6f}\n", min_divergence);
    os << fmt::format("min div b (fin. diff.)  {:.6f}\n", min_divergence_fd);
    os << fmt::format("div b bounded below     {}\n", divergence_bounded_below ? "yes" : "no");
    os << fmt::format("assumption 1 (smooth)   {}\n", smooth_ok ? "pass" : "FAIL");
    os << fmt::format("assumption 2 (div b)    {}\n", divergence_ok ? "pass" : "FAIL");
    os << fmt::format("assumption 3 (elliptic) {}\n", elliptic_ok ? "pass" : "FAIL");
    if (!detail.empty()) os << detail << "\n";
    return os.str();
}

ValidationReport validate_model(const DiffusionModel& model, double radius, std::size_t samples,
                                std::uint64_t seed) {
    if (samples < 1) throw ValidationError("validate_model needs at least one sample");
    if (!(radius > 0.0)) throw ValidationError("validation radius must be positive");

    const std::size_t dim = model.dim();
    ValidationReport rep;
    rep.samples = samples;
    rep.seed = seed;
    rep.min_rayleigh_quotient = std::numeric_limits<double>::infinity();
    rep.min_divergence = std::numeric_limits<double>::infinity();
    rep.min_divergence_fd = std::numeric_limits<double>::infinity();

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> coord(-radius, radius);
    std::normal_distribution<double> gauss;
    std::vector<double> x(dim), xp(dim), xm(dim);
    std::vector<std::vector<double>> directions;

    const Matrix& a = model.diffusion();
    const double a_scale = std::max(1.0, a.cwiseAbs().maxCoeff());

    for (std::size_t s = 0; s < samples; ++s) {
        for (auto& v : x) v = coord(rng);
        std::vector<double> dir(dim);
        double nrm = 0.0;
        for (auto& v : dir) {
            v = gauss(rng);
            nrm += v * v;
        }
        nrm = std::sqrt(nrm);
        for (auto& v : dir) v /= nrm > 0 ? nrm : 1.0;
        directions.push_back(dir);

        if (!a.allFinite()) {
            throw ValidationError("non-finite diffusion value at " + format_point(x));
        }
        if ((a - a.transpose()).cwiseAbs().maxCoeff() > 1e-12 * a_scale) {
            throw ValidationError("diffusion matrix is not symmetric at " + format_point(x));
        }
        const Vector b = model.drift(x);
        if (!b.allFinite()) throw ValidationError("non-finite drift value at " + format_point(x));

        // Rayleigh quotient over random xi plus the exact minimum over the unit sphere.
        Vector xi = Eigen::Map<const Vector>(dir.data(), static_cast<Eigen::Index>(dim));
        const double rq = xi.dot(a * xi);
        rep.min_rayleigh_quotient = std::min({rep.min_rayleigh_quotient, rq, model.min_diffusion_eigenvalue()});

        const double div = model.divergence(x);
        if (!std::isfinite(div)) throw ValidationError("non-finite divergence at " + format_point(x));
        rep.min_divergence = std::min(rep.min_divergence, div);

        double div_fd = 0.0;
        for (std::size_t k = 0; k < dim; ++k) {
            const double step = 1e-5 * std::max(1.0, std::abs(x[k]));
            xp = x;
            xm = x;
            xp[k] += step;
            xm[k] -= step;
            div_fd += (model.drift(k, xp) - model.drift(k, xm)) / (2.0 * step);
        }
        rep.min_divergence_fd = std::min(rep.min_divergence_fd, div_fd);
        rep.max_divergence_fd_error =
            std::max(rep.max_divergence_fd_error, std::abs(div_fd - div) / std::max(1.0, std::abs(div)));
    }

    // Far-field probe: minimum divergence over shells of doubling radius.
    std::vector<double> shell_min;
    for (int k = 0; k <= 6; ++k) {
        const double r = radius * std::ldexp(1.0, k);
        double m = std::numeric_limits<double>::infinity();
        for (const auto& d : directions) {
            for (std::size_t j = 0; j < dim; ++j) x[j] = r * d[j];
            m = std::min(m, model.divergence(x));
            for (std::size_t j = 0; j < dim; ++j) x[j] = -r * d[j];
            m = std::min(m, model.divergence(x));
        }
        shell_min.push_back(m);
    }
    const std::size_t last = shell_min.size() - 1;
    const bool decreasing_tail = shell_min[last] < shell_min[last - 1] && shell_min[last - 1] < shell_min[last - 2];
    rep.divergence_bounded_below = !(decreasing_tail && shell_min[last] < shell_min[0] - 1.0);

    rep.smooth_ok = true;
    rep.divergence_ok = rep.divergence_bounded_below &&
                        (!model.mu0 || rep.min_divergence >= *model.mu0 - 1e-12);
    rep.elliptic_ok = rep.min_rayleigh_quotient > 0.0 &&
                      (!model.ellipticity_r || rep.min_rayleigh_quotient >= *model.ellipticity_r - 1e-12);

    std::ostringstream detail;
    if (!rep.divergence_bounded_below) {
        detail << fmt::format("div b keeps decreasing on far shells (min {:.6g} at radius {:.6g})\n",
                              shell_min[last], radius * std::ldexp(1.0, static_cast<int>(last)));
    }
    if (model.mu0 && rep.min_divergence < *model.mu0) {
        detail << fmt::format("sampled div b = {:.6g} below declared mu0 = {:.6g}\n", rep.min_divergence,
                              *model.mu0);
    }
    if (!rep.elliptic_ok) {
        detail << fmt::format("sampled ellipticity {:.6g} is not a positive lower bound\n",
                              rep.min_rayleigh_quotient);
    }
    rep.detail = detail.str();
    return rep;
}

}  // namespace minsg
