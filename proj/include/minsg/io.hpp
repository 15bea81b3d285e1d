#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace minsg {

/// 17 significant digits, enough to round-trip a double.
std::string fmt_full(double v);

/// Writes "# config_hash=<hash>" followed by the body. Returns the path written.
std::filesystem::path write_artifact(const std::filesystem::path& dir, const std::string& file,
                                     const std::string& config_hash, const std::string& body);

/// Reads an artifact, checking and stripping the config_hash header. Other
/// comment lines are kept.
std::string read_artifact(const std::filesystem::path& path, std::string* config_hash = nullptr);

struct RunManifest {
    std::string config_hash;
    std::string subcommand;
    nlohmann::ordered_json params;
    nlohmann::ordered_json config;
    std::vector<std::string> outputs;  // file names relative to the output directory
    double wall_clock_seconds = 0.0;
    std::string version;
    nlohmann::ordered_json seeds;

    nlohmann::ordered_json to_json() const;
    static RunManifest from_json(const nlohmann::ordered_json& j);
    static RunManifest load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;
};

}  // namespace minsg
