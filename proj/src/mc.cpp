#include "minsg/mc.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "minsg/error.hpp"

namespace minsg {

namespace {

std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

double log_sum_exp(const Eigen::VectorXd& v) {
    const double m = v.maxCoeff();
    if (!std::isfinite(m)) return m;
    return m + std::log((v.array() - m).exp().sum());
}

std::vector<std::size_t> record_steps(const SimulationOptions& opts) {
    if (!(opts.dt > 0.0)) throw ValidationError("simulation dt must be positive");
    if (opts.paths == 0) throw ValidationError("simulation needs at least one path");
    if (opts.record_times.empty()) throw ValidationError("simulation needs at least one record time");
    if (!(opts.noise_scale >= 0.0)) throw ValidationError("noise_scale must be non-negative");
    if (!(opts.absorb_radius > 0.0)) throw ValidationError("absorb_radius must be positive");
    std::vector<std::size_t> steps;
    double prev = -1.0;
    for (double t : opts.record_times) {
        if (!(t >= 0.0) || t < prev) throw ValidationError("record times must be non-negative and sorted");
        const double q = t / opts.dt;
        const double r = std::round(q);
        if (std::abs(q - r) > 1e-6 * std::max(1.0, r)) {
            throw ValidationError(fmt::format("record time {} is not a multiple of dt = {}", t, opts.dt));
        }
        steps.push_back(static_cast<std::size_t>(r));
        prev = t;
    }
    return steps;
}

double dot_row(const Matrix& m, Eigen::Index row, const std::vector<double>& v) {
    double s = 0.0;
    for (std::size_t k = 0; k < v.size(); ++k) s += m(row, static_cast<Eigen::Index>(k)) * v[k];
    return s;
}

}  // namespace

std::uint64_t path_seed(std::uint64_t seed, std::uint64_t path) {
    return splitmix64(splitmix64(seed) ^ splitmix64(path + 0x632be59bd9b4e019ULL));
}

std::size_t TrajectoryEnsemble::time_index(double t) const {
    for (std::size_t i = 0; i < record_times.size(); ++i) {
        if (std::abs(record_times[i] - t) <= 1e-9 * std::max(1.0, std::abs(t))) return i;
    }
    throw ValidationError(fmt::format("time {} is not a record time of the ensemble", t));
}

TrajectoryEnsemble simulate(const DiffusionModel& model, std::span<const double> x0, const SimulationOptions& opts) {
    if (x0.size() != model.dim()) throw ValidationError("initial point has the wrong dimension");
    std::vector<double> start(x0.begin(), x0.end());
    return simulate(model, [start](std::mt19937_64&, std::span<double> x) { std::copy(start.begin(), start.end(), x.begin()); },
                    opts);
}

TrajectoryEnsemble simulate(const DiffusionModel& model, const InitialSampler& x0, const SimulationOptions& opts) {
    const std::vector<std::size_t> rec = record_steps(opts);
    const std::size_t dim = model.dim();
    const auto n_rec = rec.size();
    const auto n_paths = static_cast<Eigen::Index>(opts.paths);
    const double nan = std::numeric_limits<double>::quiet_NaN();
    const double inf = std::numeric_limits<double>::infinity();
    const double r2_abs = opts.absorb_radius * opts.absorb_radius;
    const Matrix gamma = opts.noise_scale * model.diffusion_sqrt();
    const Matrix a_noise = opts.noise_scale * opts.noise_scale * model.diffusion();
    const Matrix& ainv = model.diffusion_inverse();
    const double sqdt = std::sqrt(opts.dt);

    TrajectoryEnsemble ens;
    ens.dim = dim;
    ens.paths = opts.paths;
    ens.dt = opts.dt;
    ens.record_times = opts.record_times;
    ens.states.assign(n_rec, Eigen::MatrixXd::Constant(n_paths, static_cast<Eigen::Index>(dim), nan));
    ens.alive.assign(n_rec, std::vector<char>(opts.paths, 0));
    ens.heat.assign(n_rec, Eigen::VectorXd::Zero(n_paths));
    ens.absorption_time.assign(opts.paths, inf);

    std::vector<double> x(dim), xn(dim), mid(dim), xi(dim), dx(dim), bmid(dim);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const std::size_t last = rec.back();

    for (std::size_t p = 0; p < opts.paths; ++p) {
        std::mt19937_64 rng(path_seed(opts.seed, p));
        x0(rng, x);
        double w = 0.0;
        bool alive = true;
        double r2 = 0.0;
        for (double v : x) r2 += v * v;
        if (r2 >= r2_abs) {
            alive = false;
            ens.absorption_time[p] = 0.0;
        }
        std::size_t ri = 0;
        const auto pi = static_cast<Eigen::Index>(p);
        for (std::size_t s = 0;; ++s) {
            while (ri < n_rec && rec[ri] == s) {
                if (alive) {
                    for (std::size_t k = 0; k < dim; ++k) ens.states[ri](pi, static_cast<Eigen::Index>(k)) = x[k];
                    ens.alive[ri][p] = 1;
                }
                ens.heat[ri][pi] = w;
                ++ri;
            }
            if (s == last || !alive) {
                for (; ri < n_rec; ++ri) ens.heat[ri][pi] = w;
                break;
            }
            for (std::size_t k = 0; k < dim; ++k) xi[k] = normal(rng);
            double rn2 = 0.0;
            for (std::size_t k = 0; k < dim; ++k) {
                const auto ki = static_cast<Eigen::Index>(k);
                dx[k] = opts.drift_sign * model.drift(k, x) * opts.dt + dot_row(gamma, ki, xi) * sqdt;
                xn[k] = x[k] + dx[k];
                mid[k] = 0.5 * (x[k] + xn[k]);
                rn2 += xn[k] * xn[k];
            }
            for (std::size_t k = 0; k < dim; ++k) bmid[k] = model.drift(k, mid);
            for (std::size_t k = 0; k < dim; ++k) w -= 2.0 * dot_row(ainv, static_cast<Eigen::Index>(k), bmid) * dx[k];

            bool killed = rn2 >= r2_abs;
            if (!killed && opts.bridge_correction && std::isfinite(opts.absorb_radius)) {
                const double rn = std::sqrt(rn2);
                const double d0 = opts.absorb_radius - std::sqrt(r2);
                const double d1 = opts.absorb_radius - rn;
                double sigma2 = 0.0;
                if (rn > 0.0) {
                    for (std::size_t i = 0; i < dim; ++i) {
                        for (std::size_t j = 0; j < dim; ++j) {
                            sigma2 += xn[i] * a_noise(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) * xn[j];
                        }
                    }
                    sigma2 /= rn2;
                }
                if (sigma2 > 0.0 && unit(rng) < std::exp(-2.0 * d0 * d1 / (sigma2 * opts.dt))) killed = true;
            }
            if (killed) {
                alive = false;
                ens.absorption_time[p] = static_cast<double>(s + 1) * opts.dt;
            }
            x.swap(xn);
            r2 = rn2;
        }
    }
    return ens;
}

std::size_t HistogramSpec::cell_count() const {
    std::size_t n = 1;
    for (std::size_t b : bins) n *= b;
    return n;
}

double HistogramSpec::cell_volume() const {
    double v = 1.0;
    for (double w : width) v *= w;
    return v;
}

std::vector<double> HistogramSpec::cell_center(std::size_t cell) const {
    std::vector<double> c(bins.size());
    for (std::size_t k = 0; k < bins.size(); ++k) {
        const std::size_t i = cell % bins[k];
        cell /= bins[k];
        c[k] = lo[k] + (static_cast<double>(i) + 0.5) * width[k];
    }
    return c;
}

Eigen::VectorXd empirical_kernel(const TrajectoryEnsemble& ens, std::size_t time_index, const HistogramSpec& spec) {
    if (time_index >= ens.record_times.size()) throw ValidationError("time index out of range");
    if (spec.lo.size() != ens.dim || spec.width.size() != ens.dim || spec.bins.size() != ens.dim) {
        throw ValidationError("histogram spec dimension does not match the ensemble");
    }
    Eigen::VectorXd h = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(spec.cell_count()));
    const auto& st = ens.states[time_index];
    for (std::size_t p = 0; p < ens.paths; ++p) {
        if (!ens.alive[time_index][p]) continue;
        std::size_t cell = 0;
        std::size_t stride = 1;
        bool inside = true;
        for (std::size_t k = 0; k < ens.dim; ++k) {
            const double u = (st(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(k)) - spec.lo[k]) / spec.width[k];
            if (u < 0.0 || u >= static_cast<double>(spec.bins[k])) {
                inside = false;
                break;
            }
            cell += static_cast<std::size_t>(u) * stride;
            stride *= spec.bins[k];
        }
        if (inside) h[static_cast<Eigen::Index>(cell)] += 1.0;
    }
    return h / (static_cast<double>(ens.paths) * spec.cell_volume());
}

Proportion survival_probability(const TrajectoryEnsemble& ens, std::size_t time_index) {
    if (time_index >= ens.record_times.size()) throw ValidationError("time index out of range");
    const double n = static_cast<double>(ens.paths);
    const double x = static_cast<double>(std::count(ens.alive[time_index].begin(), ens.alive[time_index].end(), 1));
    constexpr double z = 1.959963984540054;
    const double nt = n + z * z;
    const double pt = (x + 0.5 * z * z) / nt;
    Proportion out;
    out.p = x / n;
    out.se = std::sqrt(pt * (1.0 - pt) / nt);
    out.lo = std::max(0.0, pt - z * out.se);
    out.hi = std::min(1.0, pt + z * out.se);
    return out;
}

RateEstimate heat_rate(const TrajectoryEnsemble& ens, std::size_t burn_in_index, std::size_t final_index,
                       int bootstrap, std::uint64_t seed) {
    if (final_index >= ens.record_times.size() || burn_in_index >= final_index) {
        throw ValidationError("heat rate needs burn-in index < final index");
    }
    const double span = ens.record_times[final_index] - ens.record_times[burn_in_index];
    if (!(span > 0.0)) throw ValidationError("heat rate needs a positive time span");
    std::vector<double> r;
    for (std::size_t p = 0; p < ens.paths; ++p) {
        if (!ens.alive[final_index][p]) continue;
        const auto pi = static_cast<Eigen::Index>(p);
        r.push_back((ens.heat[final_index][pi] - ens.heat[burn_in_index][pi]) / span);
    }
    if (r.size() < 2) throw NumericalError("heat rate needs at least two surviving paths");
    const Eigen::Map<const Eigen::VectorXd> v(r.data(), static_cast<Eigen::Index>(r.size()));
    RateEstimate out;
    out.mean = v.mean();
    const double n = static_cast<double>(r.size());
    out.se = std::sqrt((v.array() - out.mean).square().sum() / (n - 1.0) / n);
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, r.size() - 1);
    std::vector<double> means;
    for (int b = 0; b < bootstrap; ++b) {
        double s = 0.0;
        for (std::size_t i = 0; i < r.size(); ++i) s += r[pick(rng)];
        means.push_back(s / n);
    }
    if (means.empty()) {
        out.ci_lo = out.mean - 1.96 * out.se;
        out.ci_hi = out.mean + 1.96 * out.se;
    } else {
        std::sort(means.begin(), means.end());
        const auto at = [&](double q) { return means[static_cast<std::size_t>(q * static_cast<double>(means.size() - 1))]; };
        out.ci_lo = at(0.025);
        out.ci_hi = at(0.975);
    }
    return out;
}

std::vector<GfEstimate> log_generating_function(const TrajectoryEnsemble& ens, const std::vector<double>& lambdas,
                                                std::size_t burn_in_index, std::size_t final_index, int bootstrap,
                                                std::uint64_t seed) {
    if (final_index >= ens.record_times.size() || burn_in_index >= final_index) {
        throw ValidationError("generating function needs burn-in index < final index");
    }
    const double span = ens.record_times[final_index] - ens.record_times[burn_in_index];
    std::vector<std::size_t> idx;
    for (std::size_t p = 0; p < ens.paths; ++p) {
        if (ens.alive[final_index][p]) idx.push_back(p);
    }
    if (idx.size() < 2) throw NumericalError("generating function needs at least two surviving paths");
    const auto n = static_cast<Eigen::Index>(idx.size());
    Eigen::VectorXd wt(n), wb(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        wt[i] = ens.heat[final_index][static_cast<Eigen::Index>(idx[static_cast<std::size_t>(i)])];
        wb[i] = ens.heat[burn_in_index][static_cast<Eigen::Index>(idx[static_cast<std::size_t>(i)])];
    }
    const double ess_floor = std::max(100.0, 0.01 * static_cast<double>(n));

    // record time closest to t_b + 0.9 (T - t_b), for the horizon drift
    std::size_t early = final_index;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = burn_in_index + 1; j < final_index; ++j) {
        const double gap = std::abs(ens.record_times[j] - (ens.record_times[burn_in_index] + 0.9 * span));
        if (gap < best) {
            best = gap;
            early = j;
        }
    }
    Eigen::VectorXd we(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        we[i] = ens.heat[early][static_cast<Eigen::Index>(idx[static_cast<std::size_t>(i)])];
    }
    const double early_span = ens.record_times[early] - ens.record_times[burn_in_index];

    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
    std::vector<std::vector<Eigen::Index>> resamples(static_cast<std::size_t>(std::max(bootstrap, 0)));
    for (auto& rs : resamples) {
        rs.resize(static_cast<std::size_t>(n));
        for (auto& i : rs) i = pick(rng);
    }

    std::vector<GfEstimate> out;
    for (double lam : lambdas) {
        const Eigen::VectorXd lt = -lam * wt;
        const Eigen::VectorXd lb = -lam * wb;
        GfEstimate g;
        g.lambda = lam;
        g.value = -(log_sum_exp(lt) - log_sum_exp(lb)) / span;
        g.ess = std::exp(2.0 * log_sum_exp(lt) - log_sum_exp(2.0 * lt));
        if (early != final_index) {
            const Eigen::VectorXd le = -lam * we;
            g.drift = std::abs(g.value + (log_sum_exp(le) - log_sum_exp(lb)) / early_span);
        }
        if (!(g.ess >= ess_floor)) {
            throw NumericalError(fmt::format("weight collapse at lambda = {}: effective sample size {:.1f} < {:.0f}",
                                             lam, g.ess, ess_floor));
        }
        std::vector<double> reps;
        Eigen::VectorXd rt(n), rb(n);
        for (const auto& rs : resamples) {
            for (Eigen::Index i = 0; i < n; ++i) {
                rt[i] = lt[rs[static_cast<std::size_t>(i)]];
                rb[i] = lb[rs[static_cast<std::size_t>(i)]];
            }
            reps.push_back(-(log_sum_exp(rt) - log_sum_exp(rb)) / span);
        }
        if (reps.empty()) {
            g.ci_lo = g.ci_hi = g.value;
        } else {
            std::sort(reps.begin(), reps.end());
            g.ci_lo = reps[static_cast<std::size_t>(0.025 * static_cast<double>(reps.size() - 1))];
            g.ci_hi = reps[static_cast<std::size_t>(0.975 * static_cast<double>(reps.size() - 1))];
        }
        out.push_back(g);
    }
    return out;
}

ShapeCheck check_convexity(const std::vector<GfEstimate>& gf) {
    ShapeCheck out;
    out.passed = true;
    if (gf.size() < 3) {
        out.detail = "fewer than three lambda values";
        return out;
    }
    for (std::size_t i = 1; i + 1 < gf.size(); ++i) {
        const double h0 = gf[i].lambda - gf[i - 1].lambda;
        const double h1 = gf[i + 1].lambda - gf[i].lambda;
        if (!(h0 > 0.0) || !(h1 > 0.0)) throw ValidationError("lambda grid must be strictly increasing");
        const double w0 = 2.0 / (h0 * (h0 + h1));
        const double w1 = -2.0 / (h0 * h1);
        const double w2 = 2.0 / (h1 * (h0 + h1));
        const double d2 = w0 * gf[i - 1].value + w1 * gf[i].value + w2 * gf[i + 1].value;
        auto half = [](const GfEstimate& g) { return 0.5 * (g.ci_hi - g.ci_lo); };
        const double tol = std::abs(w0) * half(gf[i - 1]) + std::abs(w1) * half(gf[i]) + std::abs(w2) * half(gf[i + 1]);
        if (i == 1 || d2 < out.worst) out.worst = d2;
        if (d2 < -tol) {
            out.passed = false;
            out.detail += fmt::format("lambda={:.4g}: second difference {:.4g} < -{:.3g}; ", gf[i].lambda, d2, tol);
        }
    }
    if (out.passed) out.detail = "all second differences within tolerance of >= 0";
    return out;
}

ShapeCheck check_gf_symmetry(const std::vector<GfEstimate>& gf) {
    ShapeCheck out;
    out.passed = true;
    int pairs = 0;
    for (const auto& a : gf) {
        for (const auto& b : gf) {
            if (std::abs(a.lambda + b.lambda - 1.0) > 1e-9 || a.lambda > b.lambda) continue;
            ++pairs;
            const double gap = std::abs(a.value - b.value);
            const double tol = 0.5 * (a.ci_hi - a.ci_lo) + 0.5 * (b.ci_hi - b.ci_lo);
            out.worst = std::max(out.worst, gap);
            if (gap > tol) {
                out.passed = false;
                out.detail += fmt::format("lambda={:.4g} vs {:.4g}: gap {:.4g} > {:.3g}; ", a.lambda, b.lambda, gap, tol);
            }
        }
    }
    if (pairs == 0) out.detail = "no lambda, 1 - lambda pairs on the grid";
    else if (out.passed) out.detail = fmt::format("{} pairs within confidence bands", pairs);
    return out;
}

SampleMoments sample_moments(const TrajectoryEnsemble& ens, std::size_t time_index) {
    if (time_index >= ens.record_times.size()) throw ValidationError("time index out of range");
    const auto d = static_cast<Eigen::Index>(ens.dim);
    SampleMoments m;
    m.mean = Eigen::VectorXd::Zero(d);
    m.covariance = Eigen::MatrixXd::Zero(d, d);
    for (std::size_t p = 0; p < ens.paths; ++p) {
        if (!ens.alive[time_index][p]) continue;
        m.mean += ens.states[time_index].row(static_cast<Eigen::Index>(p)).transpose();
        ++m.count;
    }
    if (m.count < 2) throw NumericalError("sample moments need at least two surviving paths");
    m.mean /= static_cast<double>(m.count);
    for (std::size_t p = 0; p < ens.paths; ++p) {
        if (!ens.alive[time_index][p]) continue;
        const Eigen::VectorXd c = ens.states[time_index].row(static_cast<Eigen::Index>(p)).transpose() - m.mean;
        m.covariance += c * c.transpose();
    }
    m.covariance /= static_cast<double>(m.count - 1);
    return m;
}

}  // namespace minsg
