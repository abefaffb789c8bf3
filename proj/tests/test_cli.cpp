#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <sys/wait.h>
#include <fstream>
#include <sstream>

#include <json.hpp>

// The driver binary path is injected by the build so the tests exercise the
// exact executable that ships.
#ifndef MORSEKIT_CLI_PATH
#error "MORSEKIT_CLI_PATH must be defined"
#endif

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct RunResult {
    int exit_code = -1;
    std::string output; // stdout + stderr
};

RunResult run_cli(const std::string& args) {
    const auto out_file = fs::temp_directory_path() / "morsekit_cli_out.txt";
    const std::string cmd =
        std::string(MORSEKIT_CLI_PATH) + " " + args + " > " + out_file.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    RunResult r;
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    std::ifstream in(out_file);
    std::stringstream ss;
    ss << in.rdbuf();
    r.output = ss.str();
    return r;
}

fs::path fresh_dir(const std::string& name) {
    const auto dir = fs::temp_directory_path() / name;
    fs::remove_all(dir);
    return dir;
}

std::string write_json(const std::string& name, const json& j) {
    const auto path = fs::temp_directory_path() / name;
    std::ofstream out(path);
    out << j.dump(2) << "\n";
    return path.string();
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Tiny separable dataset so train configs run in milliseconds.
std::string toy_dataset() {
    const auto path = fs::temp_directory_path() / "morsekit_cli_toy.csv";
    std::ofstream out(path);
    out << "x,y,label\n";
    for (int i = 0; i < 20; ++i) {
        const double v = (i % 2 == 0 ? -1.0 : 1.0) + 0.01 * i;
        out << v << "," << -v << "," << i % 2 << "\n";
    }
    return path.string();
}

json toy_config(const std::string& out_dir, int cycles) {
    json cfg;
    cfg["dataset"] = {{"path", toy_dataset()}, {"train_fraction", 0.5}};
    cfg["network"] = {{"hidden", json::array({1})}, {"epochs", 10}};
    cfg["ensemble"] = {{"cycles", cycles}, {"base_seed", 7}};
    cfg["grid"] = {{"initial_depth", 3}, {"max_depth", 5}};
    cfg["output"] = {{"dir", out_dir}};
    return cfg;
}

} // namespace

TEST_CASE("validate-config accepts defaults and rejects bad fields") {
    const auto good = write_json("morsekit_cli_good.json", json::object());
    CHECK(run_cli("validate-config --config " + good).exit_code == 0);

    json bad;
    bad["dataset"]["train_fraction"] = 1.5;
    const auto bad_path = write_json("morsekit_cli_bad.json", bad);
    const auto r = run_cli("validate-config --config " + bad_path);
    CHECK(r.exit_code == 1);
    CHECK(r.output.find("train_fraction") != std::string::npos);

    CHECK(run_cli("validate-config --config /nonexistent.json").exit_code == 1);
}

TEST_CASE("train writes one record line per cycle") {
    const auto dir = fresh_dir("morsekit_cli_train");
    const auto cfg = write_json("morsekit_cli_train.json", toy_config(dir.string(), 1));
    CHECK(run_cli("train --config " + cfg).exit_code == 0);
    const auto jsonl = read_file(dir / "records.jsonl");
    CHECK(std::count(jsonl.begin(), jsonl.end(), '\n') == 1);
    CHECK(fs::exists(dir / "entropy.csv"));
    CHECK(fs::exists(dir / "summary.json"));
    CHECK(fs::exists(dir / "resolved_config.json")); // defaults expanded
    const auto resolved = json::parse(read_file(dir / "resolved_config.json"));
    CHECK(resolved["network"]["batch_size"] == 16);
}

TEST_CASE("train with a missing dataset fails without leaving outputs") {
    const auto dir = fresh_dir("morsekit_cli_missing");
    auto cfg = toy_config(dir.string(), 1);
    cfg["dataset"]["path"] = "/nonexistent/data.csv";
    const auto path = write_json("morsekit_cli_missing.json", cfg);
    CHECK(run_cli("train --config " + path).exit_code == 1);
    CHECK_FALSE(fs::exists(dir));
}

TEST_CASE("analyze on the bundled systems reports the expected structure") {
    const auto dir = fresh_dir("morsekit_cli_contr");
    json cfg;
    cfg["grid"] = {{"initial_depth", 3}, {"max_depth", 6}};
    cfg["output"] = {{"dir", dir.string()}};
    const auto path = write_json("morsekit_cli_contr.json", cfg);

    const auto r = run_cli("analyze --config " + path + " --system contraction");
    CHECK(r.exit_code == 0);
    const auto report = json::parse(read_file(dir / "report.json"));
    CHECK(report["morse_nodes"] == 1);
    CHECK(report["retraction_present"] == true);
    CHECK(report["coverage"]["violations"] == 0);

    const auto dir2 = fresh_dir("morsekit_cli_dw");
    json cfg2 = cfg;
    cfg2["grid"]["initial_depth"] = 4;
    cfg2["grid"]["max_depth"] = 7;
    cfg2["output"]["dir"] = dir2.string();
    const auto path2 = write_json("morsekit_cli_dw.json", cfg2);
    CHECK(run_cli("analyze --config " + path2 + " --system double_well").exit_code == 0);
    const auto report2 = json::parse(read_file(dir2 / "report.json"));
    CHECK(report2["morse_nodes"] == 3);
    int minimal = 0;
    for (bool m : report2["minimal"]) minimal += m ? 1 : 0;
    CHECK(minimal == 2);
    CHECK(report2["retraction_present"] == true);

    // --records and --system are mutually exclusive; neither is an error too.
    CHECK(run_cli("analyze --config " + path + " --system contraction --records x").exit_code == 1);
    CHECK(run_cli("analyze --config " + path).exit_code == 1);
}

TEST_CASE("export re-serializes morse artifacts deterministically") {
    const auto dir = fresh_dir("morsekit_cli_export");
    json cfg;
    cfg["grid"] = {{"initial_depth", 3}, {"max_depth", 6}};
    cfg["output"] = {{"dir", dir.string()}};
    const auto path = write_json("morsekit_cli_export.json", cfg);
    REQUIRE(run_cli("analyze --config " + path + " --system contraction").exit_code == 0);
    const auto morse = (dir / "morse.json").string();

    const auto dot = run_cli("export --input " + morse + " --format dot");
    CHECK(dot.exit_code == 0);
    CHECK(dot.output.find("digraph") != std::string::npos);
    CHECK(dot.output.find("->") == std::string::npos); // single node, no edges

    const auto csv = run_cli("export --input " + morse + " --format csv");
    CHECK(csv.exit_code == 0);
    CHECK(csv.output.rfind("node,cells,minimal\n", 0) == 0);

    // JSON round-trip: export, re-import, export again, byte-identical.
    const auto first = run_cli("export --input " + morse + " --format json");
    REQUIRE(first.exit_code == 0);
    const auto reimport = fs::temp_directory_path() / "morsekit_cli_reimport.json";
    std::ofstream(reimport) << first.output;
    const auto second = run_cli("export --input " + reimport.string() + " --format json");
    CHECK(second.output == first.output);

    CHECK(run_cli("export --input " + morse + " --format yaml").exit_code == 1);
}

TEST_CASE("pipeline equals train followed by analyze") {
    const auto dir_a = fresh_dir("morsekit_cli_stage");
    const auto dir_b = fresh_dir("morsekit_cli_pipe");
    auto cfg = toy_config(dir_a.string(), 8);
    cfg["grid"]["initial_depth"] = 2;
    cfg["grid"]["max_depth"] = 4;
    const auto cfg_a = write_json("morsekit_cli_stage.json", cfg);
    cfg["output"]["dir"] = dir_b.string();
    const auto cfg_b = write_json("morsekit_cli_pipe.json", cfg);

    REQUIRE(run_cli("train --config " + cfg_a).exit_code == 0);
    REQUIRE(run_cli("analyze --config " + cfg_a + " --records " +
                    (dir_a / "records.jsonl").string())
                .exit_code == 0);
    REQUIRE(run_cli("pipeline --config " + cfg_b).exit_code == 0);

    // Identical artifacts modulo the files that embed paths (report.json names
    // its input records file, resolved_config.json names the output dir).
    for (const char* name : {"records.jsonl", "entropy.csv", "summary.json", "grid.json",
                             "map.json", "morse.json", "morse.dot", "basins.csv",
                             "surrogate.json", "pairs.csv"}) {
        INFO(name);
        CHECK(read_file(dir_a / name) == read_file(dir_b / name));
    }
}
