#include "minsg/crossval.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <fmt/format.h>

#include "minsg/error.hpp"
#include "minsg/io.hpp"
#include "minsg/semigroup.hpp"
#include "minsg/stationary.hpp"
#include "minsg/thermo.hpp"

namespace minsg {

bool CrossvalReport::passed() const {
    return std::all_of(pairs.begin(), pairs.end(), [](const CrossvalPair& p) { return p.skipped || p.passed; });
}

const CrossvalPair* CrossvalReport::worst() const {
    const CrossvalPair* w = nullptr;
    double score = -1.0;
    for (const auto& p : pairs) {
        if (p.skipped || p.passed) continue;
        const double s = p.tol > 0.0 ? p.diff / p.tol : std::numeric_limits<double>::infinity();
        if (s > score) {
            score = s;
            w = &p;
        }
    }
    return w;
}

std::string CrossvalReport::to_csv() const {
    std::ostringstream os;
    os << "quantity,pde,mc,mc_se,diff,tol,status\n";
    for (const auto& p : pairs) {
        os << p.name << ',' << fmt_full(p.pde) << ',' << fmt_full(p.mc) << ',' << fmt_full(p.mc_se) << ','
           << fmt_full(p.diff) << ',' << fmt_full(p.tol) << ',' << (p.skipped ? "skipped" : p.passed ? "pass" : "FAIL")
           << '\n';
    }
    return os.str();
}

std::string CrossvalReport::to_text() const {
    std::string s = fmt::format("{:<16} {:>12} {:>12} {:>12} {:>12} {:>12}  {}\n", "quantity", "pde", "mc", "mc_se",
                                "diff", "tol", "status");
    for (const auto& p : pairs) {
        s += fmt::format("{:<16} {:>12.6f} {:>12.6f} {:>12.6f} {:>12.6f} {:>12.6f}  {}", p.name, p.pde, p.mc, p.mc_se,
                         p.diff, p.tol, p.skipped ? "skipped" : p.passed ? "pass" : "FAIL");
        if (!p.note.empty()) s += "  (" + p.note + ")";
        s += '\n';
    }
    return s;
}

int crossval_steps(double t, double spacing) {
    return std::max(16, static_cast<int>(std::ceil(t / (spacing * spacing) - 1e-9)));
}

InitialSampler density_sampler(const GridFunction& p) {
    const BallDomain& d = p.domain;
    std::vector<double> cdf;
    std::vector<std::vector<double>> points;
    double acc = 0.0;
    for (std::size_t n = 0; n < d.node_count(); ++n) {
        const double v = p.values[static_cast<Eigen::Index>(n)];
        if (!(v > 0.0)) continue;
        acc += v;
        cdf.push_back(acc);
        points.push_back(d.coordinates(n));
    }
    if (cdf.empty()) throw ValidationError("density sampler needs positive mass");
    const double h = d.spacing();
    return [cdf, points, h](std::mt19937_64& rng, std::span<double> x) {
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        const double u = unit(rng) * cdf.back();
        const auto i = static_cast<std::size_t>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
        const auto& c = points[std::min(i, points.size() - 1)];
        for (std::size_t k = 0; k < x.size(); ++k) x[k] = c[k] + (unit(rng) - 0.5) * h;
    };
}

CrossvalReport crossval(const ModelConfig& cfg, const CrossvalOptions& opts) {
    if (!(opts.t > 0.0) || !(opts.dt > 0.0) || opts.paths == 0 || opts.bin_cells < 1) {
        throw ValidationError("crossval needs t > 0, dt > 0, paths > 0 and bin_cells >= 1");
    }
    const DiffusionModel& model = cfg.model;
    const BallDomain domain = cfg.disc.largest();
    const std::size_t dim = domain.dim();
    const double h = domain.spacing();
    const Semigroup sg(model, domain, cfg.disc.scheme);
    CrossvalReport report;

    SimulationOptions so;
    so.dt = opts.dt;
    so.paths = opts.paths;
    so.seed = opts.seed;
    so.absorb_radius = domain.radius();
    so.record_times = {opts.t};
    so.drift_sign = cfg.oracle.drift_sign;
    so.noise_scale = cfg.oracle.noise_scale;

    if (opts.kernel || opts.survival) {
        const std::size_t origin = domain.origin();
        const Eigen::VectorXd row = sg.kernel_row(origin, opts.t, crossval_steps(opts.t, h));
        const std::vector<double> x0(dim, 0.0);
        const TrajectoryEnsemble ens = simulate(model, x0, so);

        if (opts.kernel) {
            HistogramSpec spec;
            const auto m = static_cast<std::size_t>(opts.bin_cells);
            const std::size_t bins = (domain.axis_nodes() + m - 1) / m;
            for (std::size_t k = 0; k < dim; ++k) {
                spec.lo.push_back(-static_cast<double>(domain.half()) * h - 0.5 * h);
                spec.width.push_back(static_cast<double>(m) * h);
                spec.bins.push_back(bins);
            }
            Eigen::VectorXd pde = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(spec.cell_count()));
            const OperatorMatrix& op = sg.backward();
            for (std::size_t i = 0; i < op.size(); ++i) {
                const auto off = domain.offsets(op.unknowns[i]);
                std::size_t cell = 0;
                std::size_t stride = 1;
                for (std::size_t k = 0; k < dim; ++k) {
                    cell += static_cast<std::size_t>(off[k] + domain.half()) / m * stride;
                    stride *= bins;
                }
                pde[static_cast<Eigen::Index>(cell)] += row[static_cast<Eigen::Index>(i)];
            }
            const Eigen::VectorXd mc = empirical_kernel(ens, 0, spec) * spec.cell_volume();
            CrossvalPair p;
            p.name = "kernel_l1";
            p.pde = pde.sum();
            p.mc = mc.sum();
            p.diff = (pde - mc).cwiseAbs().sum();
            p.tol = opts.kernel_tol;
            p.passed = p.diff < p.tol;
            p.note = fmt::format("t={}, x0=0, {} paths, bins of {} cells", opts.t, opts.paths, m);
            report.pairs.push_back(p);
        }
        if (opts.survival) {
            const Proportion s = survival_probability(ens, 0);
            CrossvalPair p;
            p.name = "survival";
            p.pde = row.sum();
            p.mc = s.p;
            p.mc_se = s.se;
            p.diff = std::abs(p.pde - p.mc);
            p.tol = opts.survival_se_factor * s.se;
            p.passed = p.diff <= p.tol;
            p.note = fmt::format("t={}, x0=0, radius {}", opts.t, domain.radius());
            report.pairs.push_back(p);
        }
    }

    if (opts.heat) {
        CrossvalPair p;
        p.name = "epr_vs_heat";
        try {
            const StationaryDensity st = stationary_density(model, domain, cfg.disc.scheme, StationaryMethod::nullspace);
            p.pde = entropy_production_rate(model, st.theta).value;
            SimulationOptions ho = so;
            ho.paths = std::min(opts.heat_paths, opts.paths);
            ho.record_times = {opts.heat_burn_in, opts.heat_horizon};
            const TrajectoryEnsemble ens = simulate(model, density_sampler(st.theta), ho);
            const RateEstimate r = heat_rate(ens, 0, 1);
            p.mc = r.mean;
            p.mc_se = r.se;
            p.diff = std::abs(p.pde - p.mc);
            p.tol = std::max(opts.heat_rel_tol * std::abs(p.pde), 2.0 * r.se);
            p.passed = p.diff <= p.tol;
            p.note = fmt::format("x0 ~ theta, window [{}, {}], {} paths", opts.heat_burn_in, opts.heat_horizon, ho.paths);
        } catch (const NumericalError& e) {
            p.skipped = true;
            p.note = std::string("no stationary density: ") + e.what();
        }
        report.pairs.push_back(p);
    }
    return report;
}

}  // namespace minsg
