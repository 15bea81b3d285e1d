#pragma once

#include <complex>
#include <cstddef>
#include <string>
#include <vector>

#include "minsg/generator.hpp"
#include "minsg/grid.hpp"
#include "minsg/semigroup.hpp"

namespace minsg {

enum class StationaryMethod { nullspace, time_average };

std::string to_string(StationaryMethod m);
StationaryMethod parse_stationary_method(const std::string& name);

/// Eigenvalues of smallest magnitude, sorted by |mu|.
struct SpectrumReport {
    std::vector<std::complex<double>> eigenvalues;
    double separation_ratio = 0.0;  // |mu_2| / |mu_1|
    int iterations = 0;
};

/// Block inverse iteration on (shift I - L) followed by Rayleigh-Ritz on L.
SpectrumReport smallest_eigenvalues(const OperatorMatrix& op, int count = 2, double shift = 1.0,
                                    int max_iterations = 500, double tol = 1e-10);

struct StationaryOptions {
    double ambiguity_ratio = 10.0;
    double tol = 1e-6;       // time-average: L1 change per unit time
    double chunk = 1.0;      // time-average: evolution time between checks
    double horizon = 400.0;  // time-average: give up after this time
};

struct TimeAverageRow {
    double t = 0.0;
    double l1_change_rate = 0.0;
    double mass = 0.0;
};

struct StationaryDensity {
    GridFunction theta;  // density, total mass 1 on the domain
    StationaryMethod method = StationaryMethod::nullspace;
    double residual = 0.0;  // ||L*_h theta||_inf
    double min_interior = 0.0;
    SpectrumReport spectrum;
    std::vector<TimeAverageRow> trace;
    std::string branch;

    std::string to_csv() const;
};

/// nullspace: gap check on the absorbing generator, then the positive null
/// vector of the reflecting forward operator by shifted inverse iteration.
/// time_average: forward evolution of a broad density on the absorbing ball
/// until the L1 change per unit time drops below tol.
/// Throws NumericalError on an ambiguous null space, on a decaying mass
/// (T(t)f -> 0 branch) or on non-convergence within the horizon.
StationaryDensity stationary_density(const DiffusionModel& model, const BallDomain& domain, DriftScheme scheme,
                                     StationaryMethod method, const StationaryOptions& options = {});

/// Lambda(f) = (1/T) int_0^T T(s) f(x0) ds, stored as a row vector over the
/// semigroup's unknown nodes (trapezoidal rule in s).
struct InvariantFunctional {
    std::size_t base_node = 0;
    double horizon = 0.0;
    int samples = 0;
    Eigen::VectorXd row;        // average over [0, T]
    Eigen::VectorXd row_early;  // average over [0, 0.9 T]
    const OperatorMatrix* op = nullptr;

    double operator()(const GridFunction& f) const;
    /// |Lambda_T(f) - Lambda_{0.9T}(f)|: drift over the last tenth of the horizon.
    double drift(const GridFunction& f) const;
};

InvariantFunctional invariant_functional(const Semigroup& sg, std::size_t x0_node, double horizon,
                                         int samples = 200);

struct EscapeFunction {
    GridFunction e;
    std::vector<double> times;
    std::vector<double> sup_changes;
    double harmonicity_residual = 0.0;
};

/// e(x) = lim T(t)1(x), declared stabilized when the sup change over the last
/// t_grid interval is below tol; harmonicity residual sup|T(t_h) e - e|.
EscapeFunction escape_function(const Semigroup& sg, const std::vector<double>& t_grid, double tol = 1e-6,
                               double harmonic_t = 1.0);

struct InvarianceCheck {
    double l1_residual = 0.0;
    double leak_budget = 0.0;  // 1 - mass after / mass before
    double mass_before = 0.0;
    double mass_after = 0.0;
};

/// ||T~(t) theta - theta||_{L1(interior)} on the absorbing ball.
InvarianceCheck check_invariance(const Semigroup& sg, const GridFunction& theta, double t, int steps = 0);

/// max over cells of (T~(t) theta - theta) * vol; <= 0 means sub-invariant.
double sub_invariance_excess(const Semigroup& sg, const GridFunction& theta, double t, int steps = 0);

}  // namespace minsg
