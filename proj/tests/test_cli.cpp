#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "minsg/cli.hpp"

namespace fs = std::filesystem;

namespace {

const fs::path configs = fs::path(MINSG_SOURCE_DIR) / "configs";

struct Run {
    int code = 0;
    std::string out;
    std::string err;
};

Run run(std::vector<std::string> args) {
    args.insert(args.begin(), "minsg");
    std::ostringstream out, err;
    Run r;
    r.code = minsg::run_cli(args, out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

fs::path fresh_dir(const std::string& name) {
    const fs::path d = fs::temp_directory_path() / ("minsg_cli_test_" + name);
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string verdict(const fs::path& p) {
    const std::string text = slurp(p);
    const auto at = text.rfind("verdict");
    if (at == std::string::npos) return "";
    const auto start = text.find_first_not_of(' ', at + 7);
    return text.substr(start, text.find('\n', start) - start);
}

std::string cfg(const std::string& name) { return (configs / (name + ".json")).string(); }

}  // namespace

TEST_CASE("classify verdicts on bundled fixtures") {
    const fs::path d = fresh_dir("classify");
    const Run ou = run({"classify", "--config", cfg("ou1d"), "--out", (d / "ou").string()});
    CHECK(ou.code == 0);
    CHECK(verdict(d / "ou" / "classify.txt") == "reversible");
    const Run rot = run({"classify", "--config", cfg("rot2d"), "--out", (d / "rot").string()});
    CHECK(rot.code == 0);
    CHECK(verdict(d / "rot" / "classify.txt") == "irreversible");
}

TEST_CASE("a config without diffusion is rejected with the key named") {
    const fs::path d = fresh_dir("missing");
    std::ofstream(d / "broken.json") << R"({"dim": 1, "drift": {"kind": "linear", "params": {"k": 1.0}},
        "domain": {"radius_scale": 1.0, "max_index": 6, "spacing": 0.05}, "mu0": 1.0})";
    const Run r = run({"validate", "--config", (d / "broken.json").string(), "--out", (d / "o").string()});
    CHECK(r.code == 1);
    CHECK(r.err.find("'diffusion'") != std::string::npos);
}

TEST_CASE("artifacts carry the config hash and a rerun reproduces them") {
    const fs::path d = fresh_dir("rerun");
    const Run r = run({"stationary", "--config", cfg("ou1d"), "--out", d.string()});
    REQUIRE(r.code == 0);
    std::string hash;
    for (const auto& e : fs::directory_iterator(d)) {
        if (e.path().filename() == "manifest.json") continue;
        std::ifstream in(e.path());
        std::string first;
        std::getline(in, first);
        CHECK(first.rfind("# config_hash=", 0) == 0);
        if (hash.empty()) hash = first;
        CHECK(first == hash);
    }
    CHECK(hash.size() == std::string("# config_hash=").size() + 16);

    const Run again = run({"rerun", "--manifest", (d / "manifest.json").string(), "--out", (d / "again").string()});
    CHECK(again.code == 0);
    CHECK(again.out.find("identical") != std::string::npos);
    CHECK(again.out.find("DIFFERS") == std::string::npos);
}

TEST_CASE("unknown plot kind and unknown subcommand exit 1") {
    const fs::path d = fresh_dir("plot");
    CHECK(run({"plot", "--config", cfg("ou1d"), "--kind", "pie", "--out", d.string()}).code == 1);
    CHECK(run({"frobnicate", "--config", cfg("ou1d"), "--out", d.string()}).code == 1);
}

TEST_CASE("crossval with the wrong drift sign exits 2 and names the offender") {
    const fs::path d = fresh_dir("crossval");
    const Run r = run({"crossval", "--config", cfg("ou1d_wrong_sign"), "--paths", "20000", "--out", d.string()});
    CHECK(r.code == 2);
    CHECK((r.err + slurp(d / "diagnostics.txt")).find("kernel_l1") != std::string::npos);
    CHECK(slurp(d / "crossval.csv").find("quantity,pde,mc,mc_se,diff,tol,status") != std::string::npos);
}
