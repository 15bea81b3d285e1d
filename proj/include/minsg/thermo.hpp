#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "minsg/generator.hpp"
#include "minsg/grid.hpp"
#include "minsg/model.hpp"
#include "minsg/semigroup.hpp"

namespace minsg {

/// J = -1/2 A grad P - b P, one row per node (zero where the stencil is incomplete).
struct FluxField {
    BallDomain domain;
    Eigen::MatrixXd components;  // node_count x dim
    std::vector<char> valid;

    double sup_norm() const;
};

FluxField probability_flux(const DiffusionModel& model, const GridFunction& p);

/// -sum P log P * vol, with 0 log 0 = 0.
double entropy(const GridFunction& p);

struct EprResult {
    double value = 0.0;
    double excluded_mass = 0.0;  // fraction of the mass below the density floor
    std::optional<std::string> warning;
};

/// 1/2 int gamma^T A gamma P with gamma = grad log P + 2 A^{-1} b. Nodes with
/// P < floor_factor * max P, or with a vanishing neighbour, are excluded and
/// their mass reported.
EprResult entropy_production_rate(const DiffusionModel& model, const GridFunction& p, double floor_factor = 1e-12);

/// int 2 A^{-1} b . J.
double heat_dissipation_rate(const DiffusionModel& model, const GridFunction& p);

/// Finite-difference entropy rate against the identity  de/dt = epr + hdr,
/// which holds for the definitions above (both sides are -1/2 for the
/// variance-1 Gaussian under the unit OU drift).
struct EntropyBalance {
    double dt = 0.0;
    double de_dt = 0.0;
    double epr = 0.0;
    double hdr = 0.0;
    double predicted = 0.0;
    double residual = 0.0;
};

EntropyBalance entropy_balance_check(const DiffusionModel& model, const Semigroup& sg, const GridFunction& p,
                                     double dt, int steps = 0);

/// Potential U with grad U = 2 A^{-1} b and U(0) = 0 (radial line integral).
double potential(const DiffusionModel& model, std::span<const double> x);

/// Max |curl(A^{-1} b)| over the interior nodes of a domain.
double curl_residual(const DiffusionModel& model, const BallDomain& domain);

struct FreeEnergy {
    std::optional<double> value;  // u[P] - e[P], absent for non-conservative drifts
    double curl_residual = 0.0;
    double internal_energy = 0.0;
    double entropy = 0.0;
};

FreeEnergy free_energy(const DiffusionModel& model, const GridFunction& p, double curl_tol = 1e-8);

/// phi = -log theta and gamma = grad log theta + 2 A^{-1} b.
struct Helmholtz {
    GridFunction phi;
    Eigen::MatrixXd gamma;  // node_count x dim
    std::vector<char> valid;
    double gamma_sup = 0.0;  // over nodes with theta >= 1e-8 max theta
    double gamma_l2 = 0.0;   // (int |gamma|^2 theta)^{1/2}
};

Helmholtz helmholtz_decompose(const DiffusionModel& model, const GridFunction& theta);

struct ProbePair {
    Eigen::VectorXd f;  // over the operator's unknowns
    Eigen::VectorXd g;
};

/// Seeded pairs of overlapping compact bumps supported where w >= 1e-3 max w.
std::vector<ProbePair> make_symmetry_probes(const OperatorMatrix& forward, const GridFunction& w, int count,
                                            std::uint64_t seed);

/// max over pairs of |<w^{-1} f, L* g> - <w^{-1} g, L* f>| divided by the same
/// expression with absolute values.
double check_weighted_symmetry(const OperatorMatrix& forward, const GridFunction& w,
                               const std::vector<ProbePair>& probes);

struct Box {
    std::vector<double> center;
    std::vector<double> half_width;
    bool contains(std::span<const double> x) const;
};

struct BoxPair {
    Box a;
    Box b;
};

/// Axis-aligned boxes with centers in +-1.5 sigma and half-widths in [0.25, 0.75] sigma.
std::vector<BoxPair> make_box_pairs(const GridFunction& theta, int count, std::uint64_t seed);

/// max over pairs of |P(X_0 in A, X_t in B) - P(X_0 in B, X_t in A)| with X_0 ~ theta.
double check_kernel_reversibility(const Semigroup& sg, const GridFunction& theta, double t,
                                  const std::vector<BoxPair>& pairs, int steps = 0);

struct ThermoReport {
    double entropy = 0.0;
    double epr = 0.0;
    double hdr = 0.0;
    double excluded_mass = 0.0;
    std::optional<std::string> warning;
    std::optional<EntropyBalance> balance;
    FreeEnergy free;
    double detailed_balance_residual = 0.0;  // sup |gamma|

    std::string to_text() const;
    std::string to_json() const;
};

ThermoReport thermo_report(const DiffusionModel& model, const GridFunction& p, const Semigroup* sg = nullptr,
                           double dt = 1e-3);

struct ReversibilityTolerances {
    double kernel = 1e-3;
    double symmetry = 1e-6;
    double epr = 1e-4;
};

struct ReversibilityVerdict {
    double t = 0.0;
    double kernel_residual = 0.0;
    double symmetry_residual = 0.0;
    double epr = 0.0;
    bool kernel_ok = false;
    bool symmetry_ok = false;
    bool epr_ok = false;

    bool consistent() const { return kernel_ok == symmetry_ok && symmetry_ok == epr_ok; }
    bool reversible() const { return kernel_ok && symmetry_ok && epr_ok; }
    std::string to_text() const;
    std::string to_json() const;
};

/// Runs the three legs at the nullspace theta of the largest ball. Throws
/// ConsistencyError with a residual dump when the legs disagree.
ReversibilityVerdict classify_reversibility(const DiffusionModel& model, const Discretization& disc, double t,
                                            const ReversibilityTolerances& tol = {}, std::uint64_t seed = 20240611,
                                            int pairs = 10);

}  // namespace minsg
