#include "minsg/config.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include <fmt/format.h>

#include "minsg/error.hpp"

namespace minsg {

namespace {

using Json = nlohmann::ordered_json;

const Json& require(const Json& j, const std::string& key, const std::string& where) {
    if (!j.is_object()) throw ValidationError(fmt::format("config: '{}' must be an object", where));
    auto it = j.find(key);
    if (it == j.end()) {
        throw ValidationError(fmt::format("config: missing key '{}'{}", key, where.empty() ? "" : " in '" + where + "'"));
    }
    return *it;
}

std::string path_of(const std::string& where, const std::string& key) {
    return where.empty() ? key : where + "." + key;
}

double number(const Json& j, const std::string& key, const std::string& where) {
    const Json& v = require(j, key, where);
    if (!v.is_number()) throw ValidationError(fmt::format("config: '{}' must be a number", path_of(where, key)));
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw ValidationError(fmt::format("config: '{}' must be finite", path_of(where, key)));
    return d;
}

double number_or(const Json& j, const std::string& key, const std::string& where, double fallback) {
    return j.is_object() && j.contains(key) ? number(j, key, where) : fallback;
}

std::string text(const Json& j, const std::string& key, const std::string& where) {
    const Json& v = require(j, key, where);
    if (!v.is_string()) throw ValidationError(fmt::format("config: '{}' must be a string", path_of(where, key)));
    return v.get<std::string>();
}

Matrix square_matrix(const Json& j, std::size_t dim, const std::string& where) {
    if (!j.is_array() || j.size() != dim) {
        throw ValidationError(fmt::format("config: '{}' must be a {}x{} array", where, dim, dim));
    }
    Matrix m(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
    for (std::size_t i = 0; i < dim; ++i) {
        if (!j[i].is_array() || j[i].size() != dim) {
            throw ValidationError(fmt::format("config: '{}' row {} must have {} entries", where, i, dim));
        }
        for (std::size_t k = 0; k < dim; ++k) {
            if (!j[i][k].is_number()) throw ValidationError(fmt::format("config: '{}'[{}][{}] must be a number", where, i, k));
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = j[i][k].get<double>();
        }
    }
    return m;
}

PolynomialField parse_drift(const Json& d, std::size_t dim) {
    const std::string kind = text(d, "kind", "drift");
    const Json empty = Json::object();
    const Json& p = d.contains("params") ? d["params"] : empty;
    const std::string where = "drift.params";
    if (kind == "zero") return zero_drift(dim);
    if (kind == "linear") {
        if (p.contains("matrix")) return linear_drift(square_matrix(p["matrix"], dim, where + ".matrix"));
        return linear_drift(number(p, "k", where) * Matrix::Identity(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim)));
    }
    if (kind == "rotational") {
        if (dim < 2) throw ValidationError("config: rotational drift needs dim >= 2");
        return rotational_drift(dim, number(p, "omega", where), number_or(p, "k", where, 1.0));
    }
    if (kind == "double_well") {
        return double_well_drift(dim, number_or(p, "alpha", where, 1.0), number_or(p, "beta", where, 1.0));
    }
    if (kind == "gradient_polynomial") {
        const Json& c = require(p, "coeffs", where);
        if (!c.is_array() || c.empty()) throw ValidationError("config: 'drift.params.coeffs' must be a non-empty array");
        std::vector<double> coeffs;
        for (const auto& v : c) {
            if (!v.is_number()) throw ValidationError("config: 'drift.params.coeffs' entries must be numbers");
            coeffs.push_back(v.get<double>());
        }
        return gradient_polynomial_drift(dim, coeffs);
    }
    if (kind == "polynomial") {
        const Json& comps = require(p, "components", where);
        if (!comps.is_array() || comps.size() != dim) {
            throw ValidationError(fmt::format("config: 'drift.params.components' must list {} components", dim));
        }
        PolynomialField field;
        for (std::size_t i = 0; i < dim; ++i) {
            std::vector<Polynomial::Term> terms;
            for (const auto& t : comps[i]) {
                const std::string w = fmt::format("drift.params.components[{}]", i);
                Polynomial::Term term;
                term.coef = number(t, "coef", w);
                const Json& pw = require(t, "powers", w);
                if (!pw.is_array() || pw.size() != dim) {
                    throw ValidationError(fmt::format("config: '{}.powers' must have {} entries", w, dim));
                }
                for (const auto& e : pw) {
                    if (!e.is_number_integer() || e.get<int>() < 0) {
                        throw ValidationError(fmt::format("config: '{}.powers' must be non-negative integers", w));
                    }
                    term.powers.push_back(e.get<int>());
                }
                terms.push_back(std::move(term));
            }
            field.emplace_back(dim, std::move(terms));
        }
        return field;
    }
    throw ValidationError("config: unknown drift kind '" + kind +
                          "' (expected zero, linear, rotational, double_well, gradient_polynomial or polynomial)");
}

Matrix parse_diffusion(const Json& d, std::size_t dim) {
    const std::string kind = text(d, "kind", "diffusion");
    const Json& p = require(d, "params", "diffusion");
    if (kind == "isotropic") {
        const double a = number(p, "a", "diffusion.params");
        if (!(a > 0.0)) throw ValidationError("config: 'diffusion.params.a' must be positive");
        return isotropic_diffusion(dim, a);
    }
    if (kind == "constant") return square_matrix(require(p, "matrix", "diffusion.params"), dim, "diffusion.params.matrix");
    throw ValidationError("config: unknown diffusion kind '" + kind + "' (expected isotropic or constant)");
}

}  // namespace

std::uint64_t fnv1a64(const std::string& text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex64(std::uint64_t v) { return fmt::format("{:016x}", v); }

std::string ModelConfig::canonical() const { return nlohmann::json(raw).dump(); }

std::string ModelConfig::hash() const { return hex64(fnv1a64(canonical())); }

ModelConfig parse_config(const Json& doc, const std::string& name) {
    if (!doc.is_object()) throw ValidationError("config: top level must be an object");
    const Json& dj = require(doc, "dim", "");
    if (!dj.is_number_integer() || dj.get<long long>() < 1 || dj.get<long long>() > 3) {
        throw ValidationError("config: 'dim' must be an integer in 1..3");
    }
    const auto dim = static_cast<std::size_t>(dj.get<long long>());
    const Json& drift = require(doc, "drift", "");
    const Json& diffusion = require(doc, "diffusion", "");
    const Json& domain = require(doc, "domain", "");
    const Json& mu0 = require(doc, "mu0", "");

    Discretization disc;
    disc.dim = dim;
    disc.radius_scale = number(domain, "radius_scale", "domain");
    const Json& mi = require(domain, "max_index", "domain");
    if (!mi.is_number_integer() || mi.get<long long>() < 1) {
        throw ValidationError("config: 'domain.max_index' must be a positive integer");
    }
    disc.max_index = static_cast<int>(mi.get<long long>());
    disc.spacing = number(domain, "spacing", "domain");
    if (!(disc.radius_scale > 0.0) || !(disc.spacing > 0.0)) {
        throw ValidationError("config: 'domain.radius_scale' and 'domain.spacing' must be positive");
    }
    if (doc.contains("scheme")) disc.scheme = parse_scheme(text(doc, "scheme", ""));
    for (int n = 1; n <= disc.max_index; ++n) (void)disc.domain(n);  // R/h integrality

    DiffusionModel model(dim, parse_drift(drift, dim), parse_diffusion(diffusion, dim), name);
    if (!mu0.is_null()) {
        if (!mu0.is_number()) throw ValidationError("config: 'mu0' must be a number or null");
        model.mu0 = mu0.get<double>();
    }
    if (doc.contains("ellipticity")) model.ellipticity_r = number(doc, "ellipticity", "");

    OracleSettings oracle;
    if (doc.contains("oracle")) {
        const Json& o = doc["oracle"];
        oracle.drift_sign = number_or(o, "drift_sign", "oracle", -1.0);
        oracle.noise_scale = number_or(o, "noise_scale", "oracle", 1.0);
    }
    return ModelConfig{name, doc, std::move(model), disc, oracle};
}

ModelConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("config: cannot open '" + path + "'");
    Json doc;
    try {
        doc = Json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError("config: '" + path + "' is not valid JSON: " + e.what());
    }
    return parse_config(doc, std::filesystem::path(path).stem().string());
}

ModelConfig with_max_index(const ModelConfig& cfg, int max_index) {
    Json doc = cfg.raw;
    doc["domain"]["max_index"] = max_index;
    return parse_config(doc, cfg.name);
}

}  // namespace minsg
