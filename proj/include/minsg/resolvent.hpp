#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "minsg/generator.hpp"
#include "minsg/grid.hpp"
#include "minsg/model.hpp"

namespace minsg {

/// Dirichlet resolvent on one ball: (lambda I - L_h) u = f g_n, u = 0 off the interior.
struct LocalResolvent {
    double lambda = 0.0;
    int index = 0;
    GridFunction solution;
    double residual = 0.0;  // ||(lambda - L) u - f g||_inf / ||f g||_inf
};

/// `f` may live on any domain sharing the operator's lattice; it is
/// transferred onto the operator's domain (zero where not covered).
LocalResolvent solve_local_resolvent(const OperatorMatrix& op, double lambda, const GridFunction& f,
                                     const CutoffFunction& g);

struct ResolventOptions {
    double tol = 1e-6;
    /// Half-width of the observation box |x_k| <= window; <= 0 selects
    /// radius(max_index - 1) / (2 sqrt(dim)).
    double window = 0.0;
    bool keep_snapshots = true;
};

struct ResolventTraceRow {
    int index = 0;
    double radius = 0.0;
    double sup_change = 0.0;
    double value_at_origin = 0.0;
};

/// Exhaustion limit of R_n(lambda) f over balls n = 1, 2, ...
struct GlobalResolvent {
    double lambda = 0.0;
    GridFunction limit;
    int converged_index = 0;
    double last_sup_change = 0.0;
    double window = 0.0;
    std::vector<ResolventTraceRow> trace;
    std::vector<GridFunction> snapshots;  // per index, on the largest domain
    std::vector<double> snapshot_norms;

    std::string trace_csv() const;
};

/// Runs the exhaustion until successive iterates differ by < tol in sup norm
/// on the observation box. Throws NumericalError with the decay profile if
/// max_index is reached first.
GlobalResolvent resolvent(const DiffusionModel& model, const Discretization& disc, double lambda,
                          const GridFunction& f, const ResolventOptions& options = {});

/// sup | R(l1) f - R(l2) f - (l2 - l1) R(l1) R(l2) f | on a fixed ball
/// (Dirichlet resolvents of one matrix, right-hand side f g_n).
double verify_resolvent_identity(const DiffusionModel& model, const BallDomain& ball, DriftScheme scheme,
                                 double lambda1, double lambda2, const GridFunction& f);

/// Same identity through exhaustion limits, measured on the observation box.
double verify_resolvent_identity_limit(const DiffusionModel& model, const Discretization& disc, double lambda1,
                                       double lambda2, const GridFunction& f, const ResolventOptions& options = {});

struct ContractionEntry {
    std::string label;
    double contraction_excess = 0.0;  // lambda ||R f|| - ||f||
    double min_value = 0.0;           // of R f, meaningful for f >= 0
    bool nonnegative_input = false;
    double decomposition_residual = 0.0;  // || R f - (R f+ - R f-) ||, fixed ball
};

struct ContractionReport {
    double lambda = 0.0;
    std::vector<ContractionEntry> entries;
    double worst_contraction_excess = 0.0;
    double worst_min_value = 0.0;
    double worst_decomposition_residual = 0.0;
    bool passed = true;

    std::string to_text() const;
};

struct NamedFunction {
    std::string label;
    GridFunction f;
};

/// lambda ||R(lambda) f|| <= ||f|| + 1e-10, f >= 0 => R f >= -1e-12, and
/// R f = R f+ - R f- over a suite of inputs.
ContractionReport verify_contraction_positivity(const DiffusionModel& model, const Discretization& disc,
                                                double lambda, const std::vector<NamedFunction>& suite,
                                                const ResolventOptions& options = {});

struct MonotoneReport {
    std::vector<std::pair<int, int>> pairs;
    std::vector<double> violations;  // max(R_n f - R_{n+1} f) per pair
    double worst_violation = 0.0;
    bool passed = true;
};

/// Pointwise R_{n+1} f >= R_n f - 1e-12 for consecutive indices.
MonotoneReport verify_monotone_in_index(const DiffusionModel& model, const Discretization& disc, double lambda,
                                        const GridFunction& f, const std::vector<int>& indices);

}  // namespace minsg
