#include "minsg/io.hpp"

#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "minsg/error.hpp"

namespace minsg {

std::string fmt_full(double v) { return fmt::format("{:.17g}", v); }

std::filesystem::path write_artifact(const std::filesystem::path& dir, const std::string& file,
                                     const std::string& config_hash, const std::string& body) {
    std::filesystem::create_directories(dir);
    const auto path = dir / file;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write '" + path.string() + "'");
    out << "# config_hash=" << config_hash << '\n' << body;
    if (!body.empty() && body.back() != '\n') out << '\n';
    return path;
}

std::string read_artifact(const std::filesystem::path& path, std::string* config_hash) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open artifact '" + path.string() + "'");
    std::string first;
    std::getline(in, first);
    const std::string tag = "# config_hash=";
    if (first.rfind(tag, 0) != 0) throw ValidationError("'" + path.string() + "' lacks a config_hash header");
    if (config_hash) *config_hash = first.substr(tag.size());
    std::stringstream rest;
    rest << in.rdbuf();
    return rest.str();
}

nlohmann::ordered_json RunManifest::to_json() const {
    nlohmann::ordered_json j;
    j["config_hash"] = config_hash;
    j["subcommand"] = subcommand;
    j["params"] = params;
    j["config"] = config;
    j["outputs"] = outputs;
    j["wall_clock_seconds"] = wall_clock_seconds;
    j["version"] = version;
    j["seeds"] = seeds;
    return j;
}

RunManifest RunManifest::from_json(const nlohmann::ordered_json& j) {
    RunManifest m;
    try {
        m.config_hash = j.at("config_hash").get<std::string>();
        m.subcommand = j.at("subcommand").get<std::string>();
        m.params = j.at("params");
        m.config = j.at("config");
        m.outputs = j.at("outputs").get<std::vector<std::string>>();
        m.wall_clock_seconds = j.value("wall_clock_seconds", 0.0);
        m.version = j.value("version", std::string{});
        m.seeds = j.value("seeds", nlohmann::ordered_json::object());
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("manifest: ") + e.what());
    }
    return m;
}

RunManifest RunManifest::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open manifest '" + path.string() + "'");
    try {
        return from_json(nlohmann::ordered_json::parse(in));
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError("manifest '" + path.string() + "' is not valid JSON: " + e.what());
    }
}

void RunManifest::save(const std::filesystem::path& path) const {
    std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write manifest '" + path.string() + "'");
    out << to_json().dump(2) << '\n';
}

}  // namespace minsg
