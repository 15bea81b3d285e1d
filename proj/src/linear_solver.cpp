#include "minsg/linear_solver.hpp"

#include <fmt/format.h>

#include "minsg/error.hpp"

namespace minsg {

struct LinearSolver::Impl {
    std::unique_ptr<Eigen::SparseLU<Eigen::SparseMatrix<double>>> lu;
    std::unique_ptr<Eigen::BiCGSTAB<Eigen::SparseMatrix<double>, Eigen::IncompleteLUT<double>>> krylov;
};

LinearSolver::LinearSolver(const Eigen::SparseMatrix<double>& a, std::size_t dim, double residual_tol)
    : a_(a), tol_(residual_tol), impl_(std::make_unique<Impl>()) {
    a_.makeCompressed();
    if (dim <= 2) {
        impl_->lu = std::make_unique<Eigen::SparseLU<Eigen::SparseMatrix<double>>>();
        impl_->lu->analyzePattern(a_);
        impl_->lu->factorize(a_);
        if (impl_->lu->info() != Eigen::Success) {
            throw NumericalError(fmt::format("sparse LU factorization failed ({} unknowns): {}", a_.rows(),
                                             impl_->lu->lastErrorMessage()));
        }
    } else {
        impl_->krylov =
            std::make_unique<Eigen::BiCGSTAB<Eigen::SparseMatrix<double>, Eigen::IncompleteLUT<double>>>();
        impl_->krylov->preconditioner().setDroptol(1e-6);
        impl_->krylov->preconditioner().setFillfactor(20);
        impl_->krylov->setTolerance(std::min(1e-13, tol_ * 1e-3));
        impl_->krylov->setMaxIterations(2000);
        impl_->krylov->compute(a_);
        if (impl_->krylov->info() != Eigen::Success) {
            throw NumericalError(fmt::format("ILUT preconditioner setup failed ({} unknowns)", a_.rows()));
        }
    }
}

LinearSolver::~LinearSolver() = default;
LinearSolver::LinearSolver(LinearSolver&&) noexcept = default;
LinearSolver& LinearSolver::operator=(LinearSolver&&) noexcept = default;

bool LinearSolver::iterative() const { return impl_->krylov != nullptr; }

Eigen::VectorXd LinearSolver::solve(const Eigen::VectorXd& rhs) const {
    const double scale = rhs.cwiseAbs().maxCoeff();
    if (scale == 0.0) return Eigen::VectorXd::Zero(rhs.size());
    Eigen::VectorXd x;
    long iterations = 0;
    if (impl_->lu) {
        x = impl_->lu->solve(rhs);
    } else {
        x = impl_->krylov->solve(rhs);
        iterations = impl_->krylov->iterations();
    }
    const double residual = (a_ * x - rhs).cwiseAbs().maxCoeff() / scale;
    if (!(residual <= tol_)) {
        throw NumericalError(fmt::format("linear solve missed residual contract: relative residual {:.3e} > {:.1e} "
                                         "after {} iterations ({} unknowns)",
                                         residual, tol_, iterations, a_.rows()));
    }
    return x;
}

Eigen::MatrixXd LinearSolver::solve(const Eigen::MatrixXd& rhs) const {
    Eigen::MatrixXd out(rhs.rows(), rhs.cols());
    if (impl_->lu) {
        out = impl_->lu->solve(rhs);
        for (Eigen::Index c = 0; c < rhs.cols(); ++c) {
            const double scale = rhs.col(c).cwiseAbs().maxCoeff();
            if (scale == 0.0) continue;
            const double residual = (a_ * out.col(c) - rhs.col(c)).cwiseAbs().maxCoeff() / scale;
            if (!(residual <= tol_)) {
                throw NumericalError(fmt::format(
                    "linear solve missed residual contract in column {}: relative residual {:.3e} > {:.1e}", c,
                    residual, tol_));
            }
        }
        return out;
    }
    for (Eigen::Index c = 0; c < rhs.cols(); ++c) out.col(c) = solve(Eigen::VectorXd(rhs.col(c)));
    return out;
}

}  // namespace minsg
