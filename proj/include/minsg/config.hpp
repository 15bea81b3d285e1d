#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "minsg/generator.hpp"
#include "minsg/model.hpp"

namespace minsg {

/// Sign and noise conventions used by the Monte-Carlo side only.
struct OracleSettings {
    double drift_sign = -1.0;
    double noise_scale = 1.0;
};

struct ModelConfig {
    std::string name;
    nlohmann::ordered_json raw;
    DiffusionModel model;
    Discretization disc;
    OracleSettings oracle;

    /// Key-sorted compact JSON, the input of the hash.
    std::string canonical() const;
    std::string hash() const;
};

std::uint64_t fnv1a64(const std::string& text);
std::string hex64(std::uint64_t v);

/// Throws ValidationError naming the first missing or malformed key.
ModelConfig parse_config(const nlohmann::ordered_json& doc, const std::string& name = "config");
ModelConfig load_config(const std::string& path);

/// Copy with domain.max_index replaced (raw document updated too).
ModelConfig with_max_index(const ModelConfig& cfg, int max_index);

}  // namespace minsg
