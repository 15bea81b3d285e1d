#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "minsg/generator.hpp"
#include "minsg/grid.hpp"
#include "minsg/linear_solver.hpp"
#include "minsg/model.hpp"

namespace minsg {

enum class EvolutionMethod { implicit_euler_power, yosida_exponential };

std::string to_string(EvolutionMethod m);
EvolutionMethod parse_method(const std::string& name);

struct SemigroupEvolution {
    double t = 0.0;
    int steps = 0;
    EvolutionMethod method = EvolutionMethod::implicit_euler_power;
    double lambda = 0.0;
    std::size_t terms = 0;  // Poisson terms summed by the Yosida mode
    GridFunction result;
};

/// Sub-probability kernel on the unknown nodes: k(i, j) = p(t, x_i, cell(x_j))
/// for the backward orientation, p~(t, x_i, cell(x_j)) for the forward one.
struct TransitionKernel {
    double t = 0.0;
    int steps = 0;
    Orientation orientation = Orientation::backward;
    BallDomain domain;
    std::vector<std::size_t> nodes;
    Eigen::MatrixXd k;

    double cell_volume() const { return domain.cell_volume(); }
    Eigen::VectorXd row_sums() const { return k.rowwise().sum(); }
    /// Triplet CSV body: row_x, col_y, value (entries with |value| > threshold).
    void write_triplets(std::ostream& os, double threshold = 0.0) const;
    std::string metadata_json() const;
};

/// T(t) and T~(t) on one absorbing ball (no cutoff), built from resolvent
/// powers [(m/t) R(m/t)]^m. Factorizations are cached per (orientation, lambda).
class Semigroup {
public:
    Semigroup(const DiffusionModel& model, const BallDomain& domain, DriftScheme scheme);

    const DiffusionModel& model() const { return model_; }
    const BallDomain& domain() const { return backward_.domain; }
    const OperatorMatrix& backward() const { return backward_; }
    const OperatorMatrix& forward() const { return forward_; }

    /// max(16, ceil(t / h)).
    int default_steps(double t) const;

    /// Implicit-Euler power on unknown-node vectors.
    Eigen::VectorXd apply(const Eigen::VectorXd& v, double t, int steps, Orientation orientation) const;

    SemigroupEvolution evolve(double t, const GridFunction& f, int steps = 0,
                              EvolutionMethod method = EvolutionMethod::implicit_euler_power,
                              std::size_t max_terms = 200000) const;
    /// Forward (Fokker-Planck) evolution of a density. Throws NumericalError if a
    /// cell mass drops below -1e-10.
    SemigroupEvolution evolve_forward(double t, const GridFunction& g, int steps = 0) const;

    /// Full kernel by evolving identity columns. Throws ValidationError when
    /// the unknown count exceeds row_cap.
    TransitionKernel transition_kernel(double t, int steps, Orientation orientation,
                                       std::size_t row_cap = 10000) const;
    /// Row p(t, x, .) over unknown nodes, from one forward evolution.
    Eigen::VectorXd kernel_row(std::size_t node, double t, int steps = 0) const;

    /// e(t, x) = T(t)1(x) for increasing times, evolved segment by segment.
    /// Each segment uses max(16, ceil(dt / max_step)) steps, or the default
    /// rule when max_step <= 0.
    std::vector<double> mass_function(const std::vector<double>& times, std::size_t node,
                                      double max_step = 0.0) const;

private:
    const LinearSolver& solver(Orientation orientation, double lambda) const;

    DiffusionModel model_;
    OperatorMatrix backward_;
    OperatorMatrix forward_;
    mutable std::mutex mutex_;
    mutable std::map<std::pair<int, double>, std::unique_ptr<LinearSolver>> cache_;
};

/// sup |T(t+s) f - T(t) T(s) f| over unknown nodes.
double check_chapman_kolmogorov(const Semigroup& sg, double t, double s, const GridFunction& f, int steps_t,
                                int steps_s, int steps_ts);

/// max row sum of |K(t+s) - K(t) K(s)|.
double kernel_composition_residual(const TransitionKernel& kts, const TransitionKernel& kt,
                                   const TransitionKernel& ks);

/// | <T(t) f, g> - <f, T~(t) g> | with cell-volume weights.
double check_duality(const Semigroup& sg, double t, const GridFunction& f, const GridFunction& g, int steps = 0);

}  // namespace minsg
