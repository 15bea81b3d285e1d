#pragma once

#include <memory>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace minsg {

/// Factorized sparse system with a uniform residual contract:
/// ||A x - b||_inf <= tol * ||b||_inf, otherwise NumericalError.
/// Sparse LU for systems from dim <= 2 grids, BiCGSTAB with an incomplete
/// LU preconditioner for dim 3.
class LinearSolver {
public:
    LinearSolver(const Eigen::SparseMatrix<double>& a, std::size_t dim, double residual_tol = 1e-10);
    ~LinearSolver();
    LinearSolver(LinearSolver&&) noexcept;
    LinearSolver& operator=(LinearSolver&&) noexcept;

    Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const;
    Eigen::MatrixXd solve(const Eigen::MatrixXd& rhs) const;

    bool iterative() const;
    Eigen::Index size() const { return a_.rows(); }

private:
    struct Impl;
    Eigen::SparseMatrix<double> a_;
    double tol_;
    std::unique_ptr<Impl> impl_;
};

}  // namespace minsg
