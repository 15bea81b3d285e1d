#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "minsg/model.hpp"

namespace minsg {

/// Euler-Maruyama for dx = drift_sign b dt + noise_scale Gamma dW, killed on
/// leaving the open ball of radius absorb_radius.
struct SimulationOptions {
    double dt = 1e-3;
    std::size_t paths = 10000;
    std::uint64_t seed = 1;
    double absorb_radius = std::numeric_limits<double>::infinity();
    std::vector<double> record_times;  // snapped to multiples of dt
    double drift_sign = -1.0;
    double noise_scale = 1.0;
    bool bridge_correction = true;
};

/// Draws an initial state for one path.
using InitialSampler = std::function<void(std::mt19937_64&, std::span<double>)>;

/// States and accumulated heat at the record times. Heat is
/// W = -2 int A^{-1} b o dx (Stratonovich midpoint); its mean rate matches the
/// entropy production rate in a stationary state.
struct TrajectoryEnsemble {
    std::size_t dim = 0;
    std::size_t paths = 0;
    double dt = 0.0;
    std::vector<double> record_times;
    std::vector<Eigen::MatrixXd> states;     // per record time: paths x dim, NaN once absorbed
    std::vector<std::vector<char>> alive;    // per record time
    std::vector<Eigen::VectorXd> heat;       // per record time, frozen at absorption
    std::vector<double> absorption_time;     // +inf if never absorbed

    std::size_t time_index(double t) const;
};

std::uint64_t path_seed(std::uint64_t seed, std::uint64_t path);

TrajectoryEnsemble simulate(const DiffusionModel& model, std::span<const double> x0, const SimulationOptions& opts);
TrajectoryEnsemble simulate(const DiffusionModel& model, const InitialSampler& x0, const SimulationOptions& opts);

/// Per-axis uniform bins [lo, lo + bins * width).
struct HistogramSpec {
    std::vector<double> lo;
    std::vector<double> width;
    std::vector<std::size_t> bins;

    std::size_t cell_count() const;
    double cell_volume() const;
    std::vector<double> cell_center(std::size_t cell) const;
};

/// Empirical sub-probability density over the bins at one record time
/// (surviving paths only, normalized by the total path count).
Eigen::VectorXd empirical_kernel(const TrajectoryEnsemble& ens, std::size_t time_index, const HistogramSpec& spec);

struct Proportion {
    double p = 0.0;
    double se = 0.0;  // Agresti-Coull
    double lo = 0.0;
    double hi = 0.0;
};

Proportion survival_probability(const TrajectoryEnsemble& ens, std::size_t time_index);

struct RateEstimate {
    double mean = 0.0;
    double se = 0.0;
    double ci_lo = 0.0;  // 95% percentile bootstrap
    double ci_hi = 0.0;
};

/// Mean of (W(T) - W(t_b)) / (T - t_b) over paths alive at T.
RateEstimate heat_rate(const TrajectoryEnsemble& ens, std::size_t burn_in_index, std::size_t final_index,
                       int bootstrap = 400, std::uint64_t seed = 7);

struct GfEstimate {
    double lambda = 0.0;
    double value = 0.0;
    double ci_lo = 0.0;
    double ci_hi = 0.0;
    double ess = 0.0;  // effective sample size of the weights at T
    double drift = std::numeric_limits<double>::quiet_NaN();  // |e_T - e_{0.9 T}| when a record time allows
};

/// e(lambda) = -1/(T - t_b) log( mean exp(-lambda W(T)) / mean exp(-lambda W(t_b)) ).
/// Throws NumericalError when the effective sample size falls below
/// max(100, 1% of the paths).
std::vector<GfEstimate> log_generating_function(const TrajectoryEnsemble& ens, const std::vector<double>& lambdas,
                                                std::size_t burn_in_index, std::size_t final_index,
                                                int bootstrap = 200, std::uint64_t seed = 11);

struct ShapeCheck {
    bool passed = false;
    double worst = 0.0;  // most negative normalized second difference, or worst symmetry gap
    std::string detail;
};

/// Second differences on the lambda grid must be >= -(CI half-width sum).
ShapeCheck check_convexity(const std::vector<GfEstimate>& gf);

/// e(lambda) vs e(1 - lambda) for pairs present on the grid. This symmetry is
/// an imported fluctuation-relation convention, reported only.
ShapeCheck check_gf_symmetry(const std::vector<GfEstimate>& gf);

struct SampleMoments {
    Eigen::VectorXd mean;
    Eigen::MatrixXd covariance;
    std::size_t count = 0;
};

SampleMoments sample_moments(const TrajectoryEnsemble& ens, std::size_t time_index);

}  // namespace minsg
