#include "minsg/semigroup.hpp"

#include <cmath>
#include <ostream>

#include <fmt/format.h>
#include <json.hpp>

#include "minsg/error.hpp"

namespace minsg {

std::string to_string(EvolutionMethod m) {
    return m == EvolutionMethod::implicit_euler_power ? "implicit-euler-power" : "yosida-exponential";
}

EvolutionMethod parse_method(const std::string& name) {
    if (name == "implicit-euler-power") return EvolutionMethod::implicit_euler_power;
    if (name == "yosida-exponential") return EvolutionMethod::yosida_exponential;
    throw ValidationError("unknown evolution method '" + name +
                          "' (expected implicit-euler-power or yosida-exponential)");
}

void TransitionKernel::write_triplets(std::ostream& os, double threshold) const {
    os << "row_x,col_y,value\n";
    for (Eigen::Index i = 0; i < k.rows(); ++i) {
        for (Eigen::Index j = 0; j < k.cols(); ++j) {
            const double v = k(i, j);
            if (std::abs(v) > threshold) {
                os << fmt::format("{},{},{:.17g}\n", nodes[static_cast<std::size_t>(i)],
                                  nodes[static_cast<std::size_t>(j)], v);
            }
        }
    }
}

std::string TransitionKernel::metadata_json() const {
    nlohmann::ordered_json j;
    j["t"] = t;
    j["h"] = domain.spacing();
    j["radius"] = domain.radius();
    j["steps"] = steps;
    j["orientation"] = to_string(orientation);
    j["rows"] = k.rows();
    j["cell_volume"] = cell_volume();
    return j.dump(2);
}

Semigroup::Semigroup(const DiffusionModel& model, const BallDomain& domain, DriftScheme scheme)
    : model_(model),
      backward_(assemble_generator(model, domain, Orientation::backward, scheme)),
      forward_(assemble_generator(model, domain, Orientation::forward, scheme)) {}

int Semigroup::default_steps(double t) const {
    return std::max(16, static_cast<int>(std::ceil(t / domain().spacing() - 1e-9)));
}

const LinearSolver& Semigroup::solver(Orientation orientation, double lambda) const {
    std::lock_guard lock(mutex_);
    const auto key = std::make_pair(orientation == Orientation::backward ? 0 : 1, lambda);
    auto it = cache_.find(key);
    if (it != cache_.end()) return *it->second;
    const OperatorMatrix& op = orientation == Orientation::backward ? backward_ : forward_;
    SparseMatrix id(op.matrix.rows(), op.matrix.cols());
    id.setIdentity();
    SparseMatrix a = lambda * id - op.matrix;
    auto solver = std::make_unique<LinearSolver>(a, op.domain.dim());
    const LinearSolver& ref = *solver;
    cache_.emplace(key, std::move(solver));
    return ref;
}

Eigen::VectorXd Semigroup::apply(const Eigen::VectorXd& v, double t, int steps, Orientation orientation) const {
    if (t < 0.0) throw ValidationError("evolution time must be non-negative");
    if (t == 0.0) return v;
    if (steps < 1) throw ValidationError("evolution needs at least one step");
    const double lambda = steps / t;
    const LinearSolver& s = solver(orientation, lambda);
    Eigen::VectorXd u = v;
    for (int k = 0; k < steps; ++k) u = lambda * s.solve(u);
    return u;
}

SemigroupEvolution Semigroup::evolve(double t, const GridFunction& f, int steps, EvolutionMethod method,
                                     std::size_t max_terms) const {
    if (t < 0.0) throw ValidationError("evolution time must be non-negative");
    if (steps <= 0) steps = default_steps(t);
    SemigroupEvolution out{t, steps, method, 0.0, 0, f.transfer(domain())};
    if (t == 0.0) return out;
    const Eigen::VectorXd v = backward_.gather(f);
    const double lambda = steps / t;
    out.lambda = lambda;
    if (method == EvolutionMethod::implicit_euler_power) {
        out.result = backward_.scatter(apply(v, t, steps, Orientation::backward), f.semantics);
        return out;
    }
    // e^{-lambda t} sum_k (lambda t)^k / k! (lambda R(lambda))^k f
    const LinearSolver& s = solver(Orientation::backward, lambda);
    const double mean = lambda * t;
    Eigen::VectorXd term = v;
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(v.size());
    double cumulative = 0.0;
    std::size_t k = 0;
    for (;; ++k) {
        if (k > max_terms) {
            throw NumericalError(fmt::format("Yosida series exceeded its budget of {} terms (lambda t = {:.6g}, "
                                             "weight summed {:.15f}); use fewer steps or a shorter time",
                                             max_terms, mean, cumulative));
        }
        const double w = std::exp(-mean + static_cast<double>(k) * std::log(mean) - std::lgamma(k + 1.0));
        sum += w * term;
        cumulative += w;
        if (static_cast<double>(k) > mean && 1.0 - cumulative < 1e-14) break;
        term = lambda * s.solve(term);
    }
    out.terms = k + 1;
    out.result = backward_.scatter(sum, f.semantics);
    return out;
}

SemigroupEvolution Semigroup::evolve_forward(double t, const GridFunction& g, int steps) const {
    if (t < 0.0) throw ValidationError("evolution time must be non-negative");
    if (steps <= 0) steps = default_steps(t);
    SemigroupEvolution out{t, steps, EvolutionMethod::implicit_euler_power, 0.0, 0, g.transfer(domain())};
    out.result.semantics = Semantics::density;
    if (t == 0.0) return out;
    out.lambda = steps / t;
    const Eigen::VectorXd p = apply(forward_.gather(g), t, steps, Orientation::forward);
    const double vol = domain().cell_volume();
    for (Eigen::Index i = 0; i < p.size(); ++i) {
        if (p[i] * vol < -1e-10) {
            const std::size_t node = forward_.unknowns[static_cast<std::size_t>(i)];
            throw NumericalError(fmt::format("forward evolution produced negative cell mass {:.3e} at node {}",
                                             p[i] * vol, node));
        }
    }
    out.result = forward_.scatter(p, Semantics::density);
    return out;
}

TransitionKernel Semigroup::transition_kernel(double t, int steps, Orientation orientation,
                                              std::size_t row_cap) const {
    if (!(t > 0.0)) throw ValidationError("kernel time must be positive");
    const std::size_t n = backward_.size();
    if (n > row_cap) {
        throw ValidationError(fmt::format("kernel would need {} x {} entries; row cap is {} (coarsen the grid or "
                                          "extract single rows)",
                                          n, n, row_cap));
    }
    if (steps <= 0) steps = default_steps(t);
    const double lambda = steps / t;
    const LinearSolver& s = solver(orientation, lambda);
    Eigen::MatrixXd k = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (int i = 0; i < steps; ++i) k = lambda * s.solve(k);
    return TransitionKernel{t, steps, orientation, domain(), backward_.unknowns, std::move(k)};
}

Eigen::VectorXd Semigroup::kernel_row(std::size_t node, double t, int steps) const {
    const std::ptrdiff_t pos = backward_.position.at(node);
    if (pos < 0) throw ValidationError(fmt::format("node {} is not an interior node", node));
    if (steps <= 0) steps = default_steps(t);
    Eigen::VectorXd e = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(backward_.size()));
    e[pos] = 1.0;
    return apply(e, t, steps, Orientation::forward);
}

std::vector<double> Semigroup::mass_function(const std::vector<double>& times, std::size_t node,
                                             double max_step) const {
    const std::ptrdiff_t pos = backward_.position.at(node);
    Eigen::VectorXd u = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(backward_.size()));
    std::vector<double> out;
    double previous = 0.0;
    for (double t : times) {
        if (t < previous) throw ValidationError("mass_function times must be increasing");
        const double dt = t - previous;
        if (dt > 0.0) {
            const int steps = max_step > 0.0 ? std::max(16, static_cast<int>(std::ceil(dt / max_step - 1e-9)))
                                             : default_steps(dt);
            u = apply(u, dt, steps, Orientation::backward);
        }
        out.push_back(pos >= 0 ? u[pos] : 0.0);
        previous = t;
    }
    return out;
}

double check_chapman_kolmogorov(const Semigroup& sg, double t, double s, const GridFunction& f, int steps_t,
                                int steps_s, int steps_ts) {
    const Eigen::VectorXd v = sg.backward().gather(f);
    const Eigen::VectorXd whole = sg.apply(v, t + s, steps_ts, Orientation::backward);
    const Eigen::VectorXd composed =
        sg.apply(sg.apply(v, s, steps_s, Orientation::backward), t, steps_t, Orientation::backward);
    return (whole - composed).cwiseAbs().maxCoeff();
}

double kernel_composition_residual(const TransitionKernel& kts, const TransitionKernel& kt,
                                   const TransitionKernel& ks) {
    return (kts.k - kt.k * ks.k).cwiseAbs().rowwise().sum().maxCoeff();
}

double check_duality(const Semigroup& sg, double t, const GridFunction& f, const GridFunction& g, int steps) {
    if (steps <= 0) steps = sg.default_steps(t);
    const Eigen::VectorXd fv = sg.backward().gather(f);
    const Eigen::VectorXd gv = sg.forward().gather(g);
    const double vol = sg.domain().cell_volume();
    const double lhs = sg.apply(fv, t, steps, Orientation::backward).dot(gv) * vol;
    const double rhs = fv.dot(sg.apply(gv, t, steps, Orientation::forward)) * vol;
    return std::abs(lhs - rhs);
}

}  // namespace minsg
