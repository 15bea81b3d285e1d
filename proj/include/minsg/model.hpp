#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "minsg/polynomial.hpp"

namespace minsg {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Diffusion problem with backward generator
///
///     L f = 1/2 sum_ij a_ij d_i d_j f  -  b . grad f
///
/// and forward operator L* P = div(1/2 A grad P + b P). The drift b is a
/// polynomial field; the diffusion matrix A is constant. Sample paths follow
/// dx = -b(x) dt + Gamma dW with Gamma Gamma^T = A.
class DiffusionModel {
public:
    DiffusionModel(std::size_t dim, PolynomialField drift, Matrix diffusion, std::string label = {});

    std::size_t dim() const { return dim_; }
    const std::string& label() const { return label_; }

    const PolynomialField& drift_field() const { return drift_; }
    double drift(std::size_t component, std::span<const double> x) const;
    Vector drift(std::span<const double> x) const;
    Matrix drift_jacobian(std::span<const double> x) const;
    double divergence(std::span<const double> x) const;

    /// Curl of A^{-1} b, as the antisymmetric part  d_i (A^{-1}b)_j - d_j (A^{-1}b)_i.
    /// Zero iff 2A^{-1}b is (locally) a gradient.
    Matrix curl_weighted(std::span<const double> x) const;

    const Matrix& diffusion() const { return diffusion_; }
    const Matrix& diffusion_inverse() const { return diffusion_inverse_; }
    /// Symmetric square root Gamma of A.
    const Matrix& diffusion_sqrt() const { return diffusion_sqrt_; }

    /// Smallest eigenvalue of the symmetric part of A.
    double min_diffusion_eigenvalue() const { return min_eigenvalue_; }

    /// Optional declared bounds (assumptions 2 and 3 of the model class).
    std::optional<double> mu0;
    std::optional<double> ellipticity_r;

private:
    std::size_t dim_;
    PolynomialField drift_;
    std::vector<PolynomialField> jacobian_;  // jacobian_[i][j] = d b_i / d x_j
    Polynomial divergence_;
    Matrix diffusion_;
    Matrix diffusion_inverse_;
    Matrix diffusion_sqrt_;
    double min_eigenvalue_ = 0.0;
    std::string label_;
};

// Builtin drift fields. All return polynomial fields in `dim` variables.
PolynomialField zero_drift(std::size_t dim);
/// b(x) = B x.
PolynomialField linear_drift(const Matrix& b_matrix);
/// b(x) = k x + omega J x with J the rotation generator in the (x1, x2) plane.
PolynomialField rotational_drift(std::size_t dim, double omega, double k = 1.0);
/// b = grad V with V(x) = alpha |x|^4 / 4 - beta |x|^2 / 2.
PolynomialField double_well_drift(std::size_t dim, double alpha = 1.0, double beta = 1.0);
/// b = grad V with V(x) = sum_{k>=1} c_k |x|^{2k}; coeffs[0] is c_1.
PolynomialField gradient_polynomial_drift(std::size_t dim, const std::vector<double>& coeffs);

Matrix isotropic_diffusion(std::size_t dim, double a);

/// Outcome of sampling the model assumptions over a domain.
struct ValidationReport {
    std::size_t samples = 0;
    std::uint64_t seed = 0;
    double min_rayleigh_quotient = 0.0;
    double min_divergence = 0.0;       // analytic, over samples
    double min_divergence_fd = 0.0;    // central finite differences, same samples
    double max_divergence_fd_error = 0.0;
    bool divergence_bounded_below = true;  // far-field shell probe
    bool smooth_ok = true;                 // assumption 1: finite values everywhere sampled
    bool divergence_ok = true;             // assumption 2
    bool elliptic_ok = true;               // assumption 3
    std::string detail;

    bool passed() const { return smooth_ok && divergence_ok && elliptic_ok; }
    std::string to_text() const;
};

/// Sample the model at `samples` seeded points in [-radius, radius]^dim and check
/// the standing assumptions. Throws ValidationError on a non-symmetric A or a
/// non-finite field value (naming the location).
ValidationReport validate_model(const DiffusionModel& model, double radius, std::size_t samples,
                                std::uint64_t seed = 20240611);

}  // namespace minsg
