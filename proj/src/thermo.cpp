#include "minsg/thermo.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <boost/math/quadrature/gauss.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "minsg/error.hpp"
#include "minsg/stationary.hpp"

namespace minsg {

namespace {

struct LocalGradient {
    bool complete = false;   // every axis neighbour exists
    bool positive = false;   // P and all neighbours > 0
    Eigen::VectorXd grad_p;  // central difference of P
    Eigen::VectorXd grad_log;
};

LocalGradient local_gradient(const GridFunction& p, std::size_t node) {
    const BallDomain& d = p.domain;
    const std::size_t dim = d.dim();
    const double h = d.spacing();
    const double pc = p.values[static_cast<Eigen::Index>(node)];
    LocalGradient out;
    out.grad_p = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim));
    out.grad_log = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim));
    out.complete = true;
    out.positive = pc > 0.0;
    for (std::size_t k = 0; k < dim; ++k) {
        const std::size_t up = d.neighbor(node, k, 1);
        const std::size_t dn = d.neighbor(node, k, -1);
        if (up == BallDomain::npos || dn == BallDomain::npos) {
            out.complete = false;
            out.positive = false;
            return out;
        }
        const double pu = p.values[static_cast<Eigen::Index>(up)];
        const double pd = p.values[static_cast<Eigen::Index>(dn)];
        if (!(pu > 0.0) || !(pd > 0.0)) out.positive = false;
        const auto ki = static_cast<Eigen::Index>(k);
        out.grad_p[ki] = (pu - pd) / (2.0 * h);
        if (out.positive) out.grad_log[ki] = (std::log(pu) - std::log(pd)) / (2.0 * h);
    }
    if (out.positive) {
        out.grad_p = pc * out.grad_log;
    } else if (pc > 0.0) {
        out.grad_log = out.grad_p / pc;
    }
    return out;
}

Eigen::VectorXd force(const DiffusionModel& model, std::span<const double> x) {
    return 2.0 * model.diffusion_inverse() * model.drift(x);
}

// Component k of 2 A^{-1} b averaged over [x - h e_k, x + h e_k], the same span
// the central log-difference sees. Exact for linear drifts.
Eigen::VectorXd cell_force(const DiffusionModel& model, std::span<const double> x, double h) {
    const std::size_t dim = model.dim();
    const Matrix ainv = 2.0 * model.diffusion_inverse();
    Eigen::VectorXd out(static_cast<Eigen::Index>(dim));
    std::vector<double> y(x.begin(), x.end());
    for (std::size_t k = 0; k < dim; ++k) {
        const auto ki = static_cast<Eigen::Index>(k);
        auto integrand = [&](double s) {
            y[k] = x[k] + s;
            return ainv.row(ki).dot(model.drift(y));
        };
        out[ki] = boost::math::quadrature::gauss<double, 10>::integrate(integrand, -h, h) / (2.0 * h);
        y[k] = x[k];
    }
    return out;
}

}  // namespace

double FluxField::sup_norm() const {
    double s = 0.0;
    for (Eigen::Index i = 0; i < components.rows(); ++i) {
        if (valid[static_cast<std::size_t>(i)]) s = std::max(s, components.row(i).norm());
    }
    return s;
}

FluxField probability_flux(const DiffusionModel& model, const GridFunction& p) {
    const BallDomain& d = p.domain;
    FluxField out{d, Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d.node_count()), static_cast<Eigen::Index>(d.dim())),
                  std::vector<char>(d.node_count(), 0)};
    const Matrix& a = model.diffusion();
    for (std::size_t n = 0; n < d.node_count(); ++n) {
        const LocalGradient g = local_gradient(p, n);
        if (!g.complete) continue;
        const auto x = d.coordinates(n);
        const double pc = p.values[static_cast<Eigen::Index>(n)];
        out.components.row(static_cast<Eigen::Index>(n)) = (-0.5 * a * g.grad_p - model.drift(x) * pc).transpose();
        out.valid[n] = 1;
    }
    return out;
}

double entropy(const GridFunction& p) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < p.values.size(); ++i) {
        const double v = p.values[i];
        if (v > 0.0) s -= v * std::log(v);
    }
    return s * p.domain.cell_volume();
}

EprResult entropy_production_rate(const DiffusionModel& model, const GridFunction& p, double floor_factor) {
    const BallDomain& d = p.domain;
    const double floor = floor_factor * p.values.maxCoeff();
    const double vol = d.cell_volume();
    const Matrix& a = model.diffusion();
    double sum = 0.0;
    double excluded = 0.0;
    double total = 0.0;
    for (std::size_t n = 0; n < d.node_count(); ++n) {
        const double pc = p.values[static_cast<Eigen::Index>(n)];
        if (pc <= 0.0) continue;
        total += pc;
        const LocalGradient g = local_gradient(p, n);
        if (pc < floor || !g.positive) {
            excluded += pc;
            continue;
        }
        const auto x = d.coordinates(n);
        const Eigen::VectorXd gamma = g.grad_log + cell_force(model, x, d.spacing());
        sum += 0.5 * gamma.dot(a * gamma) * pc;
    }
    EprResult out;
    out.value = sum * vol;
    out.excluded_mass = total > 0.0 ? excluded / total : 0.0;
    if (out.excluded_mass > 0.01) {
        out.warning = fmt::format("{:.3g}% of the mass lies below the density floor and was excluded",
                                  100.0 * out.excluded_mass);
    }
    return out;
}

double heat_dissipation_rate(const DiffusionModel& model, const GridFunction& p) {
    const FluxField j = probability_flux(model, p);
    double sum = 0.0;
    for (std::size_t n = 0; n < p.domain.node_count(); ++n) {
        if (!j.valid[n]) continue;
        const auto x = p.domain.coordinates(n);
        sum += cell_force(model, x, p.domain.spacing()).dot(j.components.row(static_cast<Eigen::Index>(n)).transpose());
    }
    return sum * p.domain.cell_volume();
}

EntropyBalance entropy_balance_check(const DiffusionModel& model, const Semigroup& sg, const GridFunction& p,
                                     double dt, int steps) {
    if (!(dt > 0.0)) throw ValidationError("entropy balance needs dt > 0");
    const GridFunction p0 = p.transfer(sg.domain());
    const GridFunction p1 = sg.evolve_forward(dt, p0, steps).result;
    EntropyBalance out;
    out.dt = dt;
    out.de_dt = (entropy(p1) - entropy(p0)) / dt;
    out.epr = entropy_production_rate(model, p0).value;
    out.hdr = heat_dissipation_rate(model, p0);
    out.predicted = out.epr + out.hdr;
    out.residual = out.de_dt - out.predicted;
    return out;
}

double potential(const DiffusionModel& model, std::span<const double> x) {
    const std::size_t dim = model.dim();
    std::vector<double> y(dim);
    const Eigen::Map<const Eigen::VectorXd> xv(x.data(), static_cast<Eigen::Index>(dim));
    auto integrand = [&](double s) {
        for (std::size_t k = 0; k < dim; ++k) y[k] = s * x[k];
        return force(model, y).dot(xv);
    };
    return boost::math::quadrature::gauss<double, 15>::integrate(integrand, 0.0, 1.0);
}

double curl_residual(const DiffusionModel& model, const BallDomain& domain) {
    if (model.dim() < 2) return 0.0;
    double r = 0.0;
    for (std::size_t n : domain.interior_nodes()) {
        r = std::max(r, model.curl_weighted(domain.coordinates(n)).cwiseAbs().maxCoeff());
    }
    return r;
}

FreeEnergy free_energy(const DiffusionModel& model, const GridFunction& p, double curl_tol) {
    FreeEnergy out;
    out.entropy = entropy(p);
    out.curl_residual = curl_residual(model, p.domain);
    if (out.curl_residual > curl_tol) return out;
    double u = 0.0;
    for (std::size_t n = 0; n < p.domain.node_count(); ++n) {
        const double pc = p.values[static_cast<Eigen::Index>(n)];
        if (pc != 0.0) u += potential(model, p.domain.coordinates(n)) * pc;
    }
    out.internal_energy = u * p.domain.cell_volume();
    out.value = out.internal_energy - out.entropy;
    return out;
}

Helmholtz helmholtz_decompose(const DiffusionModel& model, const GridFunction& theta) {
    const BallDomain& d = theta.domain;
    Helmholtz out{GridFunction(d), Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d.node_count()), static_cast<Eigen::Index>(d.dim())),
                  std::vector<char>(d.node_count(), 0), 0.0, 0.0};
    const double top = theta.values.maxCoeff();
    if (!(top > 0.0)) throw ValidationError("Helmholtz decomposition needs a positive density");
    double l2 = 0.0;
    for (std::size_t n = 0; n < d.node_count(); ++n) {
        const double tc = theta.values[static_cast<Eigen::Index>(n)];
        if (tc > 0.0) out.phi.values[static_cast<Eigen::Index>(n)] = -std::log(tc);
        const LocalGradient g = local_gradient(theta, n);
        if (!g.positive) continue;
        const Eigen::VectorXd gamma = g.grad_log + cell_force(model, d.coordinates(n), d.spacing());
        out.gamma.row(static_cast<Eigen::Index>(n)) = gamma.transpose();
        out.valid[n] = 1;
        l2 += gamma.squaredNorm() * tc;
        if (tc >= 1e-8 * top) out.gamma_sup = std::max(out.gamma_sup, gamma.norm());
    }
    out.gamma_l2 = std::sqrt(l2 * d.cell_volume());
    return out;
}

std::vector<ProbePair> make_symmetry_probes(const OperatorMatrix& forward, const GridFunction& w, int count,
                                            std::uint64_t seed) {
    const Eigen::VectorXd wv = forward.gather(w);
    const double top = wv.maxCoeff();
    std::vector<std::size_t> support;
    for (std::size_t i = 0; i < forward.size(); ++i) {
        if (wv[static_cast<Eigen::Index>(i)] >= 1e-3 * top) support.push_back(i);
    }
    if (support.empty()) throw ValidationError("weight function has no usable support for probes");
    const BallDomain& d = forward.domain;
    const double rho = 5.0 * d.spacing();
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, support.size() - 1);
    std::uniform_real_distribution<double> offset(-rho, rho);

    auto bump = [&](const std::vector<double>& c) {
        Eigen::VectorXd v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(forward.size()));
        for (std::size_t i : support) {
            const auto x = d.coordinates(forward.unknowns[i]);
            double r2 = 0.0;
            for (std::size_t k = 0; k < x.size(); ++k) r2 += (x[k] - c[k]) * (x[k] - c[k]);
            const double s = 1.0 - r2 / (rho * rho);
            if (s > 0.0) v[static_cast<Eigen::Index>(i)] = s * s * s;
        }
        return v;
    };

    std::vector<ProbePair> out;
    for (int k = 0; k < count; ++k) {
        const auto cf = d.coordinates(forward.unknowns[support[pick(rng)]]);
        auto cg = cf;
        for (double& c : cg) c += offset(rng);
        out.push_back({bump(cf), bump(cg)});
    }
    return out;
}

double check_weighted_symmetry(const OperatorMatrix& forward, const GridFunction& w,
                               const std::vector<ProbePair>& probes) {
    if (forward.orientation != Orientation::forward) throw ValidationError("weighted symmetry uses the forward operator");
    const Eigen::VectorXd wv = forward.gather(w);
    const SparseMatrix abs_op = forward.matrix.cwiseAbs();
    double worst = 0.0;
    for (const auto& pr : probes) {
        Eigen::VectorXd fw = Eigen::VectorXd::Zero(pr.f.size());
        Eigen::VectorXd gw = Eigen::VectorXd::Zero(pr.g.size());
        for (Eigen::Index i = 0; i < wv.size(); ++i) {
            if (wv[i] > 0.0) {
                fw[i] = pr.f[i] / wv[i];
                gw[i] = pr.g[i] / wv[i];
            } else if (pr.f[i] != 0.0 || pr.g[i] != 0.0) {
                throw ValidationError("probe support meets a non-positive weight");
            }
        }
        const double defect = fw.dot(forward.matrix * pr.g) - gw.dot(forward.matrix * pr.f);
        const double scale = fw.cwiseAbs().dot(abs_op * pr.g.cwiseAbs()) + gw.cwiseAbs().dot(abs_op * pr.f.cwiseAbs());
        if (scale > 0.0) worst = std::max(worst, std::abs(defect) / scale);
    }
    return worst;
}

bool Box::contains(std::span<const double> x) const {
    for (std::size_t k = 0; k < center.size(); ++k) {
        if (std::abs(x[k] - center[k]) > half_width[k]) return false;
    }
    return true;
}

std::vector<BoxPair> make_box_pairs(const GridFunction& theta, int count, std::uint64_t seed) {
    const BallDomain& d = theta.domain;
    const std::size_t dim = d.dim();
    std::vector<double> mean(dim, 0.0), second(dim, 0.0);
    double mass = 0.0;
    for (std::size_t n = 0; n < d.node_count(); ++n) {
        const double p = theta.values[static_cast<Eigen::Index>(n)];
        if (p == 0.0) continue;
        const auto x = d.coordinates(n);
        mass += p;
        for (std::size_t k = 0; k < dim; ++k) {
            mean[k] += p * x[k];
            second[k] += p * x[k] * x[k];
        }
    }
    if (!(mass > 0.0)) throw ValidationError("box pairs need a density with positive mass");
    std::vector<double> sigma(dim);
    for (std::size_t k = 0; k < dim; ++k) {
        mean[k] /= mass;
        sigma[k] = std::sqrt(std::max(second[k] / mass - mean[k] * mean[k], 0.0));
    }
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto make_box = [&]() {
        Box b;
        for (std::size_t k = 0; k < dim; ++k) {
            b.center.push_back(mean[k] + (2.0 * unit(rng) - 1.0) * 1.5 * sigma[k]);
            b.half_width.push_back((0.25 + 0.5 * unit(rng)) * sigma[k]);
        }
        return b;
    };
    std::vector<BoxPair> out;
    for (int i = 0; i < count; ++i) {
        Box a = make_box();
        Box b = make_box();
        out.push_back({std::move(a), std::move(b)});
    }
    return out;
}

double check_kernel_reversibility(const Semigroup& sg, const GridFunction& theta, double t,
                                  const std::vector<BoxPair>& pairs, int steps) {
    const OperatorMatrix& op = sg.backward();
    const BallDomain& d = sg.domain();
    const Eigen::VectorXd th = op.gather(theta);
    const double vol = d.cell_volume();
    if (steps <= 0) steps = sg.default_steps(t);
    auto indicator = [&](const Box& box) {
        Eigen::VectorXd v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(op.size()));
        for (std::size_t i = 0; i < op.size(); ++i) {
            if (box.contains(d.coordinates(op.unknowns[i]))) v[static_cast<Eigen::Index>(i)] = 1.0;
        }
        return v;
    };
    double worst = 0.0;
    for (const auto& pr : pairs) {
        const Eigen::VectorXd ia = indicator(pr.a);
        const Eigen::VectorXd ib = indicator(pr.b);
        const double ab = th.cwiseProduct(ia).dot(sg.apply(ib, t, steps, Orientation::backward)) * vol;
        const double ba = th.cwiseProduct(ib).dot(sg.apply(ia, t, steps, Orientation::backward)) * vol;
        worst = std::max(worst, std::abs(ab - ba));
    }
    return worst;
}

std::string ThermoReport::to_text() const {
    std::string s;
    s += fmt::format("entropy e[P]                 {:.6f}\n", entropy);
    s += fmt::format("entropy production rate      {:.6f}\n", epr);
    s += fmt::format("heat dissipation rate        {:.6f}\n", hdr);
    s += fmt::format("excluded mass fraction       {:.6e}\n", excluded_mass);
    s += fmt::format("detailed-balance residual    {:.6e}\n", detailed_balance_residual);
    if (balance) {
        s += fmt::format("entropy rate (finite diff.)  {:.6f}\n", balance->de_dt);
        s += fmt::format("epr + hdr                    {:.6f}\n", balance->predicted);
        s += fmt::format("balance residual             {:.6e}\n", balance->residual);
    }
    if (free.value) {
        s += fmt::format("free energy h[P]             {:.6f}\n", *free.value);
    } else {
        s += fmt::format("free energy h[P]             absent (curl residual {:.6f})\n", free.curl_residual);
    }
    if (warning) s += "warning: " + *warning + "\n";
    return s;
}

std::string ThermoReport::to_json() const {
    nlohmann::ordered_json j;
    j["entropy"] = entropy;
    j["epr"] = epr;
    j["hdr"] = hdr;
    j["excluded_mass"] = excluded_mass;
    j["detailed_balance_residual"] = detailed_balance_residual;
    if (balance) {
        j["entropy_rate"] = balance->de_dt;
        j["epr_plus_hdr"] = balance->predicted;
        j["balance_residual"] = balance->residual;
        j["balance_dt"] = balance->dt;
    }
    j["free_energy"] = free.value ? nlohmann::ordered_json(*free.value) : nlohmann::ordered_json(nullptr);
    j["curl_residual"] = free.curl_residual;
    j["warning"] = warning ? nlohmann::ordered_json(*warning) : nlohmann::ordered_json(nullptr);
    return j.dump(2);
}

ThermoReport thermo_report(const DiffusionModel& model, const GridFunction& p, const Semigroup* sg, double dt) {
    ThermoReport r;
    r.entropy = entropy(p);
    const EprResult e = entropy_production_rate(model, p);
    r.epr = e.value;
    r.excluded_mass = e.excluded_mass;
    r.warning = e.warning;
    r.hdr = heat_dissipation_rate(model, p);
    r.free = free_energy(model, p);
    r.detailed_balance_residual = helmholtz_decompose(model, p).gamma_sup;
    if (sg) r.balance = entropy_balance_check(model, *sg, p, dt);
    return r;
}

std::string ReversibilityVerdict::to_text() const {
    auto mark = [](bool ok) { return ok ? "pass" : "fail"; };
    std::string s;
    s += fmt::format("kernel symmetry      {:>12.6e}  {}\n", kernel_residual, mark(kernel_ok));
    s += fmt::format("weighted symmetry    {:>12.6e}  {}\n", symmetry_residual, mark(symmetry_ok));
    s += fmt::format("epr at theta         {:>12.6e}  {}\n", epr, mark(epr_ok));
    s += fmt::format("verdict              {}\n", !consistent() ? "INCONSISTENT"
                                                  : reversible() ? "reversible"
                                                                 : "irreversible");
    return s;
}

std::string ReversibilityVerdict::to_json() const {
    nlohmann::ordered_json j;
    j["t"] = t;
    j["kernel_residual"] = kernel_residual;
    j["symmetry_residual"] = symmetry_residual;
    j["epr"] = epr;
    j["kernel_symmetric"] = kernel_ok;
    j["weighted_symmetric"] = symmetry_ok;
    j["epr_zero"] = epr_ok;
    j["consistent"] = consistent();
    j["verdict"] = !consistent() ? "inconsistent" : reversible() ? "reversible" : "irreversible";
    return j.dump(2);
}

ReversibilityVerdict classify_reversibility(const DiffusionModel& model, const Discretization& disc, double t,
                                            const ReversibilityTolerances& tol, std::uint64_t seed, int pairs) {
    const BallDomain domain = disc.largest();
    const StationaryDensity st = stationary_density(model, domain, disc.scheme, StationaryMethod::nullspace);
    const Semigroup sg(model, domain, disc.scheme);

    ReversibilityVerdict v;
    v.t = t;
    v.kernel_residual = check_kernel_reversibility(sg, st.theta, t, make_box_pairs(st.theta, pairs, seed));
    v.symmetry_residual =
        check_weighted_symmetry(sg.forward(), st.theta, make_symmetry_probes(sg.forward(), st.theta, pairs, seed));
    v.epr = entropy_production_rate(model, st.theta).value;
    v.kernel_ok = v.kernel_residual < tol.kernel;
    v.symmetry_ok = v.symmetry_residual < tol.symmetry;
    v.epr_ok = std::abs(v.epr) < tol.epr;
    if (!v.consistent()) {
        throw ConsistencyError("reversibility legs disagree: kernel, weighted symmetry and epr must agree",
                               v.to_text() + v.to_json());
    }
    return v;
}

}  // namespace minsg
