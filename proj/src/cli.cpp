#include "minsg/cli.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "minsg/config.hpp"
#include "minsg/crossval.hpp"
#include "minsg/error.hpp"
#include "minsg/io.hpp"
#include "minsg/mc.hpp"
#include "minsg/resolvent.hpp"
#include "minsg/semigroup.hpp"
#include "minsg/stationary.hpp"
#include "minsg/thermo.hpp"

#ifndef MINSG_VERSION
#define MINSG_VERSION "0.0.0"
#endif

namespace minsg {

namespace {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

const std::vector<std::string> kSubcommands = {"validate", "resolvent", "evolve",   "kernel", "stationary", "thermo",
                                               "classify", "simulate",  "crossval", "plot",   "rerun"};
const std::vector<std::string> kPlotKinds = {"convergence", "mass-decay", "density", "gf", "omega-sweep"};

struct Params {
    std::string subcommand;
    std::string config;
    std::string out;
    std::uint64_t seed = 20240611;
    std::optional<double> tol;
    std::optional<int> max_index;
    double lambda = 1.0;
    double time = 1.0;
    int steps = 0;
    std::size_t paths = 100000;
    double dt = 1e-3;
    std::vector<double> x0;
    std::string rhs = "gaussian";
    std::string orientation = "backward";
    std::string method = "nullspace";
    std::string density = "stationary";
    double variance = 1.0;
    std::string kind;
    std::string input;
    std::string manifest;

    Json to_json() const {
        Json j;
        j["seed"] = seed;
        j["tol"] = tol ? Json(*tol) : Json(nullptr);
        j["max_index"] = max_index ? Json(*max_index) : Json(nullptr);
        j["lambda"] = lambda;
        j["time"] = time;
        j["steps"] = steps;
        j["paths"] = paths;
        j["dt"] = dt;
        j["x0"] = x0;
        j["rhs"] = rhs;
        j["orientation"] = orientation;
        j["method"] = method;
        j["density"] = density;
        j["variance"] = variance;
        j["kind"] = kind;
        j["input"] = input;
        return j;
    }

    void load(const Json& j) {
        seed = j.at("seed").get<std::uint64_t>();
        if (!j.at("tol").is_null()) tol = j.at("tol").get<double>();
        if (!j.at("max_index").is_null()) max_index = j.at("max_index").get<int>();
        lambda = j.at("lambda").get<double>();
        time = j.at("time").get<double>();
        steps = j.at("steps").get<int>();
        paths = j.at("paths").get<std::size_t>();
        dt = j.at("dt").get<double>();
        x0 = j.at("x0").get<std::vector<double>>();
        rhs = j.at("rhs").get<std::string>();
        orientation = j.at("orientation").get<std::string>();
        method = j.at("method").get<std::string>();
        density = j.at("density").get<std::string>();
        variance = j.at("variance").get<double>();
        kind = j.at("kind").get<std::string>();
        input = j.at("input").get<std::string>();
    }
};

struct Context {
    Params params;
    fs::path out_dir;
    std::optional<ModelConfig> cfg;
    std::string hash;
    std::vector<std::string> outputs;
    Json seeds = Json::object();
    std::ostream* out = nullptr;

    const ModelConfig& config() const {
        if (!cfg) throw ValidationError(params.subcommand + " needs --config");
        return *cfg;
    }
    void write(const std::string& file, const std::string& body) {
        write_artifact(out_dir, file, hash, body);
        outputs.push_back(file);
    }
};

std::string coords_header(std::size_t dim) {
    std::string s;
    for (std::size_t k = 0; k < dim; ++k) s += fmt::format("x{},", k + 1);
    return s;
}

std::string grid_csv(const GridFunction& g, const std::string& column) {
    std::string s = coords_header(g.domain.dim()) + column + "\n";
    for (std::size_t n = 0; n < g.domain.node_count(); ++n) {
        if (!g.domain.in_ball(n)) continue;
        for (double c : g.domain.coordinates(n)) s += fmt_full(c) + ",";
        s += fmt_full(g.values[static_cast<Eigen::Index>(n)]) + "\n";
    }
    return s;
}

ScalarField rhs_field(const std::string& name) {
    if (name == "gaussian") {
        return [](std::span<const double> x) {
            double r2 = 0.0;
            for (double v : x) r2 += v * v;
            return std::exp(-r2);
        };
    }
    if (name == "one") return [](std::span<const double>) { return 1.0; };
    if (name == "bump") {
        return [](std::span<const double> x) {
            double r2 = 0.0;
            for (double v : x) r2 += v * v;
            return r2 < 1.0 ? std::pow(1.0 - r2, 3) : 0.0;
        };
    }
    throw ValidationError("unknown --rhs '" + name + "' (expected gaussian, one or bump)");
}

GridFunction gaussian_density(const BallDomain& d, double variance) {
    if (!(variance > 0.0)) throw ValidationError("--variance must be positive");
    GridFunction g = build_grid_function(
        [variance](std::span<const double> x) {
            double r2 = 0.0;
            for (double v : x) r2 += v * v;
            return std::exp(-0.5 * r2 / variance) / std::pow(2.0 * M_PI * variance, 0.5 * static_cast<double>(x.size()));
        },
        d, Semantics::density);
    return g;
}

double require_positive(double v, const std::string& flag) {
    if (!(v > 0.0)) throw ValidationError(flag + " must be positive");
    return v;
}

// -- subcommands -------------------------------------------------------------

void cmd_validate(Context& c) {
    const ModelConfig& cfg = c.config();
    const double radius = cfg.disc.largest().radius();
    const ValidationReport rep = validate_model(cfg.model, radius, 4096, c.params.seed);
    c.seeds["validate"] = c.params.seed;
    c.write("validate.txt", rep.to_text());
    *c.out << rep.to_text();
    if (!rep.passed()) throw ValidationError("model assumptions violated:\n" + rep.detail);
}

void cmd_resolvent(Context& c) {
    const ModelConfig& cfg = c.config();
    ResolventOptions opts;
    if (c.params.tol) opts.tol = *c.params.tol;
    const double lambda = require_positive(c.params.lambda, "--lambda");
    const GridFunction f = build_grid_function(rhs_field(c.params.rhs), cfg.disc.largest(), Semantics::function);
    const GlobalResolvent r = resolvent(cfg.model, cfg.disc, lambda, f, opts);
    c.write("resolvent_trace.csv", r.trace_csv());
    c.write("resolvent.csv", grid_csv(r.limit, "value"));
    *c.out << fmt::format("lambda={} converged at index {} (sup change {:.6e} on window {:.6f})\n", lambda,
                          r.converged_index, r.last_sup_change, r.window);
    *c.out << fmt::format("R(lambda)f(0) = {:.6f}\n", r.limit.values[static_cast<Eigen::Index>(r.limit.domain.origin())]);
}

void cmd_evolve(Context& c) {
    const ModelConfig& cfg = c.config();
    const double t = require_positive(c.params.time, "--time");
    const BallDomain d = cfg.disc.largest();
    const Semigroup sg(cfg.model, d, cfg.disc.scheme);
    const bool forward = c.params.orientation == "forward";
    if (!forward && c.params.orientation != "backward") {
        throw ValidationError("unknown --orientation '" + c.params.orientation + "' (expected backward or forward)");
    }
    GridFunction g = forward ? gaussian_density(d, c.params.variance)
                             : build_grid_function(rhs_field(c.params.rhs), d, Semantics::function);
    if (forward) g.values /= g.mass();
    std::string body = "t," + coords_header(d.dim()) + "value\n";
    std::string mass = "t,mass\n";
    auto dump = [&](double time, const GridFunction& v) {
        for (std::size_t n = 0; n < d.node_count(); ++n) {
            if (!d.in_ball(n)) continue;
            body += fmt_full(time) + ",";
            for (double x : d.coordinates(n)) body += fmt_full(x) + ",";
            body += fmt_full(v.values[static_cast<Eigen::Index>(n)]) + "\n";
        }
        mass += fmt_full(time) + "," + fmt_full(v.mass()) + "\n";
    };
    dump(0.0, g);
    const int segments = 4;
    for (int k = 1; k <= segments; ++k) {
        const double seg = t / segments;
        const int steps = c.params.steps > 0 ? std::max(1, c.params.steps / segments) : 0;
        g = forward ? sg.evolve_forward(seg, g, steps).result : sg.evolve(seg, g, steps).result;
        dump(t * k / segments, g);
    }
    c.write("evolve.csv", body);
    c.write("evolve_mass.csv", mass);
    *c.out << fmt::format("{} evolution to t={}: final sup {:.6f}, final mass {:.6f}\n", c.params.orientation, t,
                          g.sup_norm(), g.mass());
}

void cmd_kernel(Context& c) {
    const ModelConfig& cfg = c.config();
    const double t = require_positive(c.params.time, "--time");
    const BallDomain d = cfg.disc.largest();
    const Semigroup sg(cfg.model, d, cfg.disc.scheme);
    const int steps = c.params.steps > 0 ? c.params.steps : sg.default_steps(t);
    const TransitionKernel k = sg.transition_kernel(t, steps, Orientation::backward);
    std::ostringstream trip;
    k.write_triplets(trip, 1e-14);
    c.write("kernel.csv", trip.str());
    c.write("kernel_meta.txt", k.metadata_json());
    std::vector<double> times;
    for (int i = 1; i <= 10; ++i) times.push_back(t * i / 10.0);
    const std::vector<double> e = sg.mass_function(times, d.origin());
    std::string mass = "t,e_t_origin\n";
    for (std::size_t i = 0; i < times.size(); ++i) mass += fmt_full(times[i]) + "," + fmt_full(e[i]) + "\n";
    c.write("mass_decay.csv", mass);
    const Eigen::VectorXd rs = k.row_sums();
    *c.out << fmt::format("kernel t={} steps={} unknowns={}: row sums in [{:.6f}, {:.6f}], e(t,0) = {:.6f}\n", t, steps,
                          rs.size(), rs.minCoeff(), rs.maxCoeff(), e.back());
}

std::string stationary_summary(const StationaryDensity& st) {
    const GridFunction& th = st.theta;
    const BallDomain& d = th.domain;
    std::string s;
    s += fmt::format("method            {}\n", to_string(st.method));
    if (!st.branch.empty()) s += fmt::format("branch            {}\n", st.branch);
    s += fmt::format("mass              {:.6f}\n", th.mass());
    s += fmt::format("residual          {:.6e}\n", st.residual);
    s += fmt::format("min interior      {:.6e}\n", st.min_interior);
    for (std::size_t k = 0; k < d.dim(); ++k) {
        double m1 = 0.0, m2 = 0.0;
        for (std::size_t n = 0; n < d.node_count(); ++n) {
            const double p = th.values[static_cast<Eigen::Index>(n)] * d.cell_volume();
            const double x = d.coordinate(n, k);
            m1 += p * x;
            m2 += p * x * x;
        }
        s += fmt::format("mean x{}           {:.6f}\n", k + 1, m1 / th.mass());
        s += fmt::format("variance x{}       {:.6f}\n", k + 1, m2 / th.mass() - std::pow(m1 / th.mass(), 2));
    }
    for (std::size_t i = 0; i < st.spectrum.eigenvalues.size(); ++i) {
        const auto& z = st.spectrum.eigenvalues[i];
        s += fmt::format("eigenvalue {}      {:.6e}{:+.6e}i\n", i + 1, z.real(), z.imag());
    }
    if (st.spectrum.separation_ratio > 0.0) s += fmt::format("gap ratio         {:.6e}\n", st.spectrum.separation_ratio);
    return s;
}

void cmd_stationary(Context& c) {
    const ModelConfig& cfg = c.config();
    StationaryOptions opts;
    if (c.params.tol) opts.tol = *c.params.tol;
    const StationaryDensity st = stationary_density(cfg.model, cfg.disc.largest(), cfg.disc.scheme,
                                                    parse_stationary_method(c.params.method), opts);
    c.write("stationary.csv", st.to_csv());
    const std::string summary = stationary_summary(st);
    c.write("stationary.txt", summary);
    if (!st.trace.empty()) {
        std::string tr = "t,l1_change_rate,mass\n";
        for (const auto& r : st.trace) tr += fmt_full(r.t) + "," + fmt_full(r.l1_change_rate) + "," + fmt_full(r.mass) + "\n";
        c.write("stationary_trace.csv", tr);
    }
    *c.out << summary;
}

void cmd_thermo(Context& c) {
    const ModelConfig& cfg = c.config();
    const BallDomain d = cfg.disc.largest();
    GridFunction p(d);
    if (c.params.density == "stationary") {
        p = stationary_density(cfg.model, d, cfg.disc.scheme, StationaryMethod::nullspace).theta;
    } else if (c.params.density == "gaussian") {
        p = gaussian_density(d, c.params.variance);
    } else {
        throw ValidationError("unknown --density '" + c.params.density + "' (expected stationary or gaussian)");
    }
    const Semigroup sg(cfg.model, d, cfg.disc.scheme);
    const ThermoReport r = thermo_report(cfg.model, p, &sg);
    c.write("thermo.txt", r.to_text());
    const Json j = Json::parse(r.to_json());
    std::string csv = "key,value\n";
    for (const auto& [k, v] : j.items()) {
        if (v.is_number()) csv += k + "," + fmt_full(v.get<double>()) + "\n";
        else if (v.is_null()) csv += k + ",\n";
        else csv += k + "," + v.dump() + "\n";
    }
    c.write("thermo.csv", csv);
    *c.out << r.to_text();
}

void cmd_classify(Context& c) {
    const ModelConfig& cfg = c.config();
    const double t = require_positive(c.params.time, "--time");
    c.seeds["probes"] = c.params.seed;
    try {
        const ReversibilityVerdict v = classify_reversibility(cfg.model, cfg.disc, t, {}, c.params.seed);
        c.write("classify.txt", v.to_text());
        std::string csv = "leg,residual,tolerance,pass\n";
        const ReversibilityTolerances tol;
        csv += "kernel_symmetry," + fmt_full(v.kernel_residual) + "," + fmt_full(tol.kernel) + "," + (v.kernel_ok ? "1" : "0") + "\n";
        csv += "weighted_symmetry," + fmt_full(v.symmetry_residual) + "," + fmt_full(tol.symmetry) + "," + (v.symmetry_ok ? "1" : "0") + "\n";
        csv += "epr," + fmt_full(v.epr) + "," + fmt_full(tol.epr) + "," + (v.epr_ok ? "1" : "0") + "\n";
        c.write("classify.csv", csv);
        *c.out << v.to_text();
    } catch (const ConsistencyError& e) {
        c.write("classify.txt", e.dump());
        throw;
    }
}

void cmd_simulate(Context& c) {
    const ModelConfig& cfg = c.config();
    const std::size_t dim = cfg.model.dim();
    std::vector<double> x0 = c.params.x0.empty() ? std::vector<double>(dim, 0.0) : c.params.x0;
    if (x0.size() != dim) throw ValidationError(fmt::format("--x0 needs {} coordinates", dim));
    const double t = require_positive(c.params.time, "--time");
    SimulationOptions o;
    o.dt = require_positive(c.params.dt, "--dt");
    o.paths = c.params.paths;
    o.seed = c.params.seed;
    o.absorb_radius = cfg.disc.largest().radius();
    o.drift_sign = cfg.oracle.drift_sign;
    o.noise_scale = cfg.oracle.noise_scale;
    for (int i = 0; i <= 10; ++i) o.record_times.push_back(std::round(t * i / 10.0 / o.dt) * o.dt);
    c.seeds["mc"] = c.params.seed;
    const TrajectoryEnsemble e = simulate(cfg.model, x0, o);

    std::string body = "t,survival,survival_se,";
    for (std::size_t k = 0; k < dim; ++k) body += fmt::format("mean_x{},", k + 1);
    for (std::size_t k = 0; k < dim; ++k) body += fmt::format("var_x{},", k + 1);
    body += "heat_mean\n";
    for (std::size_t i = 0; i < e.record_times.size(); ++i) {
        const Proportion s = survival_probability(e, i);
        body += fmt_full(e.record_times[i]) + "," + fmt_full(s.p) + "," + fmt_full(s.se) + ",";
        std::size_t alive = 0;
        double heat = 0.0;
        for (std::size_t p = 0; p < e.paths; ++p) {
            heat += e.heat[i][static_cast<Eigen::Index>(p)];
            alive += e.alive[i][p] ? 1 : 0;
        }
        if (alive >= 2) {
            const SampleMoments m = sample_moments(e, i);
            for (std::size_t k = 0; k < dim; ++k) body += fmt_full(m.mean[static_cast<Eigen::Index>(k)]) + ",";
            for (std::size_t k = 0; k < dim; ++k) {
                body += fmt_full(m.covariance(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k))) + ",";
            }
        } else {
            for (std::size_t k = 0; k < 2 * dim; ++k) body += "nan,";
        }
        body += fmt_full(heat / static_cast<double>(e.paths)) + "\n";
    }
    c.write("simulate.csv", body);

    std::string gf = "lambda,estimate,ci_lo,ci_hi,ess\n";
    try {
        const std::vector<double> grid = {0.0, 0.2, 0.4, 0.5, 0.6, 0.8};
        for (const auto& g : log_generating_function(e, grid, 2, 10)) {
            gf += fmt_full(g.lambda) + "," + fmt_full(g.value) + "," + fmt_full(g.ci_lo) + "," + fmt_full(g.ci_hi) + "," +
                  fmt_full(g.ess) + "\n";
        }
    } catch (const NumericalError& ex) {
        gf += std::string("# unavailable: ") + ex.what() + "\n";
    } catch (const ValidationError& ex) {
        gf += std::string("# unavailable: ") + ex.what() + "\n";
    }
    c.write("gf.csv", gf);
    const Proportion s = survival_probability(e, e.record_times.size() - 1);
    *c.out << fmt::format("{} paths to t={} (dt={}): survival {:.6f} +- {:.6f}\n", o.paths, t, o.dt, s.p, s.se);
}

void cmd_crossval(Context& c) {
    const ModelConfig& cfg = c.config();
    CrossvalOptions o;
    o.t = require_positive(c.params.time, "--time");
    o.paths = c.params.paths;
    o.dt = require_positive(c.params.dt, "--dt");
    o.seed = c.params.seed;
    c.seeds["mc"] = c.params.seed;
    const CrossvalReport r = crossval(cfg, o);
    c.write("crossval.csv", r.to_csv());
    c.write("crossval.txt", r.to_text());
    *c.out << r.to_text();
    if (!r.passed()) {
        const CrossvalPair* w = r.worst();
        throw NumericalError(fmt::format("crossval failed; worst offender {}: diff {:.6g} > tol {:.6g}", w->name, w->diff,
                                         w->tol),
                             r.to_text());
    }
}

// -- plot data ---------------------------------------------------------------

struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;

    std::size_t column(const std::string& name) const {
        for (std::size_t i = 0; i < columns.size(); ++i) {
            if (columns[i] == name) return i;
        }
        throw ValidationError("artifact has no column '" + name + "'");
    }
};

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    return out;
}

Table parse_table(const std::string& body) {
    Table t;
    std::stringstream ss(body);
    std::string line;
    while (std::getline(ss, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (t.columns.empty()) t.columns = split(line);
        else t.rows.push_back(split(line));
    }
    if (t.columns.empty()) throw ValidationError("artifact has no table");
    return t;
}

void cmd_plot(Context& c) {
    const std::string& kind = c.params.kind;
    if (std::find(kPlotKinds.begin(), kPlotKinds.end(), kind) == kPlotKinds.end()) {
        throw ValidationError("unknown plot kind '" + kind +
                              "' (expected convergence, mass-decay, density, gf or omega-sweep)");
    }
    std::string body = "series,x,y\n";
    auto row = [&](const std::string& series, const std::string& x, const std::string& y) {
        body += series + "," + x + "," + y + "\n";
    };
    if (kind == "omega-sweep") {
        const ModelConfig& cfg = c.config();
        if (cfg.raw.at("drift").value("kind", "") != "rotational") {
            throw ValidationError("omega-sweep needs a rotational drift config");
        }
        for (double omega : {0.0, 0.5, 1.0, 1.5, 2.0}) {
            Json doc = cfg.raw;
            doc["drift"]["params"]["omega"] = omega;
            const ModelConfig m = parse_config(doc, cfg.name);
            const BallDomain d = m.disc.largest();
            const StationaryDensity st = stationary_density(m.model, d, m.disc.scheme, StationaryMethod::nullspace);
            row("epr", fmt_full(omega), fmt_full(entropy_production_rate(m.model, st.theta).value));
            row("hdr", fmt_full(omega), fmt_full(heat_dissipation_rate(m.model, st.theta)));
        }
    } else {
        if (c.params.input.empty()) throw ValidationError("plot needs --input <artifact>");
        std::string input_hash;
        const Table t = parse_table(read_artifact(c.params.input, &input_hash));
        if (!c.cfg) c.hash = input_hash;
        if (kind == "convergence") {
            const auto xi = t.column("index");
            const auto yi = t.column("sup_change");
            for (const auto& r : t.rows) row("sup_change", r.at(xi), r.at(yi));
        } else if (kind == "mass-decay") {
            const auto xi = t.column("t");
            const auto yi = t.column(t.columns.at(1));
            for (const auto& r : t.rows) row("e", r.at(xi), r.at(yi));
        } else if (kind == "gf") {
            const auto xi = t.column("lambda");
            for (const std::string s : {"estimate", "ci_lo", "ci_hi"}) {
                const auto yi = t.column(s);
                for (const auto& r : t.rows) row(s, r.at(xi), r.at(yi));
            }
        } else {  // density
            const bool timed = t.columns.front() == "t";
            const std::size_t x1 = t.column("x1");
            const std::size_t y = t.columns.size() - 1;
            const bool has_x2 = std::find(t.columns.begin(), t.columns.end(), "x2") != t.columns.end();
            for (const auto& r : t.rows) {
                std::string series = "density";
                if (timed) series = "t=" + r.at(0);
                if (has_x2) series += "|x2=" + r.at(t.column("x2"));
                row(series, r.at(x1), r.at(y));
            }
        }
    }
    c.write("plot_" + kind + ".csv", body);
    *c.out << "wrote " << (c.out_dir / ("plot_" + kind + ".csv")).string() << "\n";
}

void dispatch(Context& c) {
    const std::string& s = c.params.subcommand;
    if (s == "validate") cmd_validate(c);
    else if (s == "resolvent") cmd_resolvent(c);
    else if (s == "evolve") cmd_evolve(c);
    else if (s == "kernel") cmd_kernel(c);
    else if (s == "stationary") cmd_stationary(c);
    else if (s == "thermo") cmd_thermo(c);
    else if (s == "classify") cmd_classify(c);
    else if (s == "simulate") cmd_simulate(c);
    else if (s == "crossval") cmd_crossval(c);
    else if (s == "plot") cmd_plot(c);
    else throw ValidationError("unknown subcommand '" + s + "'");
}

fs::path default_out() {
    const char* env = std::getenv("MINSG_OUT");
    return env && *env ? fs::path(env) : fs::path("minsg_out");
}

void write_failure(const fs::path& dir, const std::string& file, const std::string& what, const std::string& detail) {
    try {
        fs::create_directories(dir);
        std::ofstream f(dir / file);
        f << what << "\n" << detail;
        if (!detail.empty() && detail.back() != '\n') f << "\n";
    } catch (...) {
    }
}

int execute(Params params, const std::optional<Json>& embedded, std::ostream& out, std::ostream& err);

int rerun(const Params& p, std::ostream& out, std::ostream& err) {
    if (p.manifest.empty()) throw ValidationError("rerun needs --manifest <path>");
    const fs::path mpath(p.manifest);
    const RunManifest m = RunManifest::load(mpath);
    Params q;
    q.subcommand = m.subcommand;
    try {
        q.load(m.params);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("manifest params: ") + e.what());
    }
    const fs::path original = mpath.parent_path();
    q.out = p.out.empty() ? (original / "rerun").string() : p.out;
    const int code = execute(q, m.config.is_null() ? std::nullopt : std::optional<Json>(m.config), out, err);
    if (code != 0) return code;
    bool same = true;
    for (const auto& f : m.outputs) {
        std::ifstream a(original / f, std::ios::binary), b(fs::path(q.out) / f, std::ios::binary);
        std::stringstream sa, sb;
        sa << a.rdbuf();
        sb << b.rdbuf();
        const bool eq = a && b && sa.str() == sb.str();
        out << fmt::format("{:<24} {}\n", f, eq ? "identical" : "DIFFERS");
        same = same && eq;
    }
    if (!same) throw ConsistencyError("rerun did not reproduce the recorded artifacts", "");
    return 0;
}

int execute(Params params, const std::optional<Json>& embedded, std::ostream& out, std::ostream& err) {
    Context c;
    c.out_dir = params.out.empty() ? default_out() : fs::path(params.out);
    c.out = &out;
    const auto start = std::chrono::steady_clock::now();
    try {
        if (params.subcommand == "rerun") return rerun(params, out, err);
        if (embedded) {
            c.cfg = parse_config(*embedded, "manifest");
        } else if (!params.config.empty()) {
            c.cfg = load_config(params.config);
        }
        if (c.cfg && params.max_index) c.cfg = with_max_index(*c.cfg, *params.max_index);
        if (c.cfg) c.hash = c.cfg->hash();
        c.params = params;
        dispatch(c);

        RunManifest m;
        m.config_hash = c.hash;
        m.subcommand = params.subcommand;
        m.params = params.to_json();
        m.config = c.cfg ? c.cfg->raw : Json(nullptr);
        m.outputs = c.outputs;
        m.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        m.version = MINSG_VERSION;
        m.seeds = c.seeds;
        m.save(c.out_dir / "manifest.json");
        return 0;
    } catch (const ValidationError& e) {
        err << "validation error: " << e.what() << "\n";
        return 1;
    } catch (const NumericalError& e) {
        write_failure(c.out_dir, "diagnostics.txt", e.what(), e.diagnostics());
        err << "numerical error: " << e.what() << "\n"
            << "diagnostics: " << (c.out_dir / "diagnostics.txt").string() << "\n";
        return 2;
    } catch (const ConsistencyError& e) {
        write_failure(c.out_dir, "consistency_dump.txt", e.what(), e.dump());
        err << "consistency error: " << e.what() << "\n"
            << "dump: " << (c.out_dir / "consistency_dump.txt").string() << "\n";
        return 3;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    Params p;
    CLI::App app{"Minimal-semigroup diffusion toolkit", "minsg"};
    app.add_option("subcommand", p.subcommand, "validate|resolvent|evolve|kernel|stationary|thermo|classify|simulate|crossval|plot|rerun")
        ->required();
    app.add_option("--config", p.config, "model config (JSON)");
    app.add_option("--out", p.out, "output directory (default $MINSG_OUT or ./minsg_out)");
    app.add_option("--seed", p.seed, "random seed");
    app.add_option("--tol", p.tol, "convergence tolerance (resolvent, stationary)");
    app.add_option("--max-index", p.max_index, "override domain.max_index");
    app.add_option("--lambda", p.lambda, "resolvent parameter");
    app.add_option("--time", p.time, "evolution / simulation time");
    app.add_option("--steps", p.steps, "implicit-Euler steps (0 = default rule)");
    app.add_option("--paths", p.paths, "Monte-Carlo paths");
    app.add_option("--dt", p.dt, "Euler-Maruyama step");
    app.add_option("--x0", p.x0, "simulation start point")->delimiter(',');
    app.add_option("--rhs", p.rhs, "right-hand side: gaussian|one|bump");
    app.add_option("--orientation", p.orientation, "evolve: backward|forward");
    app.add_option("--method", p.method, "stationary: nullspace|time-average");
    app.add_option("--density", p.density, "thermo: stationary|gaussian");
    app.add_option("--variance", p.variance, "variance of the gaussian density");
    app.add_option("--kind", p.kind, "plot kind: convergence|mass-decay|density|gf|omega-sweep");
    app.add_option("--input", p.input, "plot input artifact");
    app.add_option("--manifest", p.manifest, "rerun: manifest.json of an earlier run");

    std::vector<std::string> rev(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
    try {
        app.parse(rev);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << "\n" << app.help();
        return 1;
    }
    if (std::find(kSubcommands.begin(), kSubcommands.end(), p.subcommand) == kSubcommands.end()) {
        err << "unknown subcommand '" << p.subcommand << "'\n";
        return 1;
    }
    return execute(p, std::nullopt, out, err);
}

}  // namespace minsg
