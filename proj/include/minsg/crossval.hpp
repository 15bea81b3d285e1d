#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "minsg/config.hpp"
#include "minsg/grid.hpp"
#include "minsg/mc.hpp"

namespace minsg {

struct CrossvalOptions {
    double t = 1.0;
    std::size_t paths = 100000;
    double dt = 1e-3;
    std::uint64_t seed = 20240611;
    bool kernel = true;
    bool survival = true;
    bool heat = true;
    int bin_cells = 4;  // lattice cells per histogram bin and axis
    double kernel_tol = 0.05;
    double survival_se_factor = 2.0;
    double heat_rel_tol = 0.1;
    double heat_burn_in = 1.0;
    double heat_horizon = 5.0;
    std::size_t heat_paths = 20000;
};

struct CrossvalPair {
    std::string name;
    double pde = 0.0;
    double mc = 0.0;
    double mc_se = 0.0;
    double diff = 0.0;  // the compared quantity (L1 distance or |pde - mc|)
    double tol = 0.0;
    bool passed = false;
    bool skipped = false;
    std::string note;
};

struct CrossvalReport {
    std::vector<CrossvalPair> pairs;

    bool passed() const;
    /// Failing pair with the largest diff / tol, or nullptr.
    const CrossvalPair* worst() const;
    std::string to_csv() const;
    std::string to_text() const;
};

/// Implicit-Euler steps used on the PDE side: ceil(t / h^2).
int crossval_steps(double t, double spacing);

/// Draws x0 from a nodal density: a node by its mass, then uniform within its cell.
InitialSampler density_sampler(const GridFunction& p);

/// Paired PDE/MC quantities from the origin of the largest ball: kernel L1
/// over coarse bins, e(t, 0) vs MC survival, stationary epr vs MC heat rate.
CrossvalReport crossval(const ModelConfig& cfg, const CrossvalOptions& opts);

}  // namespace minsg
