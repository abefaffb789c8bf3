// End-to-end acceptance checks. Each criterion prints exactly one PASS/FAIL
// line; the process exits non-zero if any criterion fails. Oracles come from
// oracles.hpp (naive reference implementations) and from direct trajectory
// simulation of the analytic systems.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include <json.hpp>

#include "morsekit/io.hpp"
#include "morsekit/morse.hpp"
#include "morsekit/surrogate.hpp"
#include "morsekit/systems.hpp"
#include "oracles.hpp"

#ifndef MORSEKIT_CLI_PATH
#error "MORSEKIT_CLI_PATH must be defined"
#endif
#ifndef MORSEKIT_IRIS_PATH
#error "MORSEKIT_IRIS_PATH must be defined"
#endif

namespace fs = std::filesystem;
using nlohmann::json;
using namespace morsekit;

namespace {

int g_failures = 0;

void report(int n, bool ok, double seconds, const std::string& detail = "") {
    std::cout << "criterion " << n << ": " << (ok ? "PASS" : "FAIL") << "  ("
              << seconds << " s)";
    if (!ok && !detail.empty()) std::cout << "  [" << detail << "]";
    std::cout << "\n" << std::flush;
    if (!ok) ++g_failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(MORSEKIT_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path work_dir() {
    const auto dir = fs::temp_directory_path() / "morsekit_acceptance";
    fs::create_directories(dir);
    return dir;
}

std::string write_config(const std::string& name, const json& cfg) {
    const auto path = work_dir() / name;
    std::ofstream out(path);
    out << cfg.dump(2) << "\n";
    return path.string();
}

// ---------------------------------------------------------------------------

void criterion_1_scc_oracle() {
    const auto t0 = std::chrono::steady_clock::now();
    bool ok = true;
    std::uint64_t state = 1;
    for (int trial = 0; trial < 1000 && ok; ++trial) {
        const std::size_t n = 2 + oracles::splitmix64(state) % 49; // <= 50 vertices
        const double density = 0.02 + 0.28 * oracles::uniform01(state);
        const auto map = oracles::random_digraph(n, density, oracles::splitmix64(state));
        ok = strongly_connected_components(map) == oracles::brute_force_sccs(map);
    }
    const double dt = seconds_since(t0);
    report(1, ok && dt < 10.0, dt);
}

void criterion_2_retraction_oracle() {
    const auto t0 = std::chrono::steady_clock::now();
    bool ok = true;
    std::uint64_t state = 2;
    int generated = 0;
    while (generated < 500 && ok) {
        const std::size_t n = 2 + oracles::splitmix64(state) % 9; // condensation <= 10 comps
        const double density = 0.05 + 0.45 * oracles::uniform01(state);
        const auto map = oracles::random_digraph(n, density, oracles::splitmix64(state));
        const auto cond = condensation(map);
        if (cond.size() > 10) continue;
        ++generated;
        const auto mg = morse_graph(cond);
        const auto sigma = order_retraction(cond, mg);
        const bool oracle_present = oracles::retraction_exists_exhaustive(cond, mg);
        if (sigma.has_value() != oracle_present) { ok = false; break; }
        if (sigma) {
            // Validity from first principles, not via the library's checker.
            const auto reach = oracles::component_reachability(cond);
            for (std::uint32_t m = 0; m < mg.size() && ok; ++m)
                for (auto c : mg.node_components[m])
                    if (sigma->node_of_component[c] != m) ok = false;
            for (std::size_t u = 0; u < cond.size() && ok; ++u)
                for (std::size_t v = 0; v < cond.size() && ok; ++v)
                    if (reach[u][v] &&
                        !mg.leq[sigma->node_of_component[v]][sigma->node_of_component[u]])
                        ok = false;
        }
    }
    const double dt = seconds_since(t0);
    report(2, ok && dt < 60.0, dt);
}

PipelineResult run_system(const AnalyticSystem& sys, std::uint8_t initial,
                          std::uint8_t max_depth) {
    Grid grid(sys.default_domain, std::vector<std::uint8_t>(sys.default_domain.dim(), initial));
    return adaptive_morse_pipeline(std::move(grid), sys.box_image, max_depth);
}

PipelineResult criterion_3_contraction() {
    const auto t0 = std::chrono::steady_clock::now();
    const auto sys = contraction_system();
    auto result = run_system(sys, 4, 8);
    std::string why;
    bool ok = result.mg.size() == 1 && result.mg.minimal[0];
    if (!ok) why = "expected exactly 1 minimal Morse node";
    if (ok && !result.retraction) { ok = false; why = "retraction absent"; }
    if (ok) {
        const auto part = basins(result.cond, result.mg, *result.retraction);
        for (auto node : part.node_of_cell)
            if (node != 0) { ok = false; why = "basin does not cover all cells"; break; }
    }
    if (ok) {
        const auto coverage = validate_outer(result.map, result.grid, sys.point_map, 100);
        if (coverage.violations != 0) { ok = false; why = "outer approximation violated"; }
    }
    const double dt = seconds_since(t0);
    report(3, ok && dt < 30.0, dt, why);
    return result;
}

PipelineResult criterion_4_double_well() {
    const auto t0 = std::chrono::steady_clock::now();
    const auto sys = double_well_system();
    auto result = run_system(sys, 4, 8);
    std::string why;
    bool ok = result.mg.size() == 3;
    if (!ok) why = "expected exactly 3 Morse nodes";

    // Locate the attractor nodes by the mean center of their cells.
    std::vector<double> node_center(result.mg.size(), 0.0);
    int n_minimal = 0;
    if (ok) {
        for (std::size_t m = 0; m < result.mg.size(); ++m) {
            double c = 0;
            for (auto cell : result.mg.node_cells[m])
                c += result.grid.cell_bounds(result.grid.leaves()[cell]).center()[0];
            node_center[m] = c / static_cast<double>(result.mg.node_cells[m].size());
            if (result.mg.minimal[m]) ++n_minimal;
        }
        for (std::size_t m = 0; m < result.mg.size(); ++m) {
            const bool near_well = std::abs(std::abs(node_center[m]) - 1.0) < 0.2;
            const bool near_origin = std::abs(node_center[m]) < 0.2;
            if (result.mg.minimal[m] ? !near_well : !near_origin) {
                ok = false;
                why = "node locations do not match the wells";
            }
        }
        if (n_minimal != 2) { ok = false; why = "expected 2 minimal nodes"; }
    }
    if (ok && !result.retraction) { ok = false; why = "retraction absent"; }

    if (ok) {
        // Basin labels vs a 10^4-trajectory simulation oracle.
        const auto part = basins(result.cond, result.mg, *result.retraction);
        std::uint64_t state = 4;
        std::size_t considered = 0, agree = 0;
        for (int i = 0; i < 10000; ++i) {
            const double x = -1.6 + 3.2 * oracles::uniform01(state);
            const auto cell = result.grid.position_of(result.grid.locate({x}));
            if (part.role_of_cell[cell] == CellRole::Separatrix) continue;
            const auto node = part.node_of_cell[cell];
            if (!result.mg.minimal[node]) continue; // repeller cells have no basin
            ++considered;
            const double limit = oracles::simulate_1d(&double_well_step, x, 500);
            const double expected = limit > 0 ? 1.0 : -1.0;
            if (std::abs(node_center[node] - expected) < 0.2) ++agree;
        }
        if (considered == 0 ||
            static_cast<double>(agree) < 0.99 * static_cast<double>(considered)) {
            ok = false;
            why = "basin labels disagree with trajectory oracle";
        }
    }
    const double dt = seconds_since(t0);
    report(4, ok && dt < 60.0, dt, why);
    return result;
}

void criterion_5_birkhoff(const PipelineResult& dw) {
    const auto t0 = std::chrono::steady_clock::now();
    bool ok = dw.mg.size() == 3;
    if (ok) {
        std::vector<std::vector<std::uint32_t>> regions;
        for (std::size_t m = 0; m < dw.mg.size(); ++m)
            regions.push_back(reachable_region(dw.map, dw.mg, m));
        const auto lat = region_lattice(regions, dw.map.num_cells);
        const auto ji = join_irreducibles(lat);
        ok = ji.elements.size() == dw.mg.size() && posets_isomorphic(ji.leq, dw.mg.leq);
    }
    const double dt = seconds_since(t0);
    report(5, ok, dt);
}

void criterion_6_forward_invariance(const PipelineResult& contraction,
                                    const PipelineResult& dw) {
    const auto t0 = std::chrono::steady_clock::now();
    bool ok = true;
    for (const auto* result : {&contraction, &dw}) {
        for (std::size_t m = 0; m < result->mg.size() && ok; ++m) {
            const auto region = reachable_region(result->map, result->mg, m);
            std::vector<bool> in(result->map.num_cells, false);
            for (auto c : region) in[c] = true;
            for (auto c : region)
                for (auto t : result->map.adjacency[c])
                    if (!in[t]) { ok = false; break; }
        }
    }
    const double dt = seconds_since(t0);
    report(6, ok, dt);
}

void criterion_7_surrogate() {
    const auto t0 = std::chrono::steady_clock::now();
    std::string why;

    std::uint64_t state = 7;
    std::vector<SamplePair> pairs;
    for (int i = 0; i < 100; ++i) {
        const double x = -1.6 + 3.2 * oracles::uniform01(state);
        pairs.push_back({{x}, {double_well_step(x)}});
    }
    const auto gp = GpSurrogate::fit(pairs);

    // Held-out per-point interval coverage at z = 3.
    std::size_t covered = 0;
    const std::size_t held_out = 1000;
    for (std::size_t i = 0; i < held_out; ++i) {
        const double x = -1.6 + 3.2 * oracles::uniform01(state);
        const auto p = gp.predict({x});
        if (std::abs(double_well_step(x) - p.mean[0]) <= 3.0 * p.std[0]) ++covered;
    }
    bool ok = covered >= 950;
    if (!ok) why = "interval coverage below 95%";

    // Same Morse structure as the exact map on a uniform depth-7 grid.
    if (ok) {
        const auto sys = double_well_system();
        VarianceConfig var;
        var.z = 3.0;
        Grid grid_a(sys.default_domain, {7});
        Grid grid_b(sys.default_domain, {7});
        const auto mg_exact = morse_graph(condensation(build_outer_map(grid_a, sys.box_image)));
        const auto mg_gp =
            morse_graph(condensation(build_outer_map(grid_b, gp.box_image_fn(var))));
        ok = mg_gp.size() == mg_exact.size() && posets_isomorphic(mg_gp.leq, mg_exact.leq);
        if (!ok) why = "surrogate Morse graph differs from exact";
    }
    const double dt = seconds_since(t0);
    report(7, ok && dt < 120.0, dt, why);
}

json iris_config(const std::string& out_dir) {
    json cfg;
    cfg["dataset"] = {{"path", MORSEKIT_IRIS_PATH}, {"train_fraction", 0.8}};
    cfg["network"] = {{"hidden", json::array({1})}, {"epochs", 150}};
    cfg["ensemble"] = {{"cycles", 100}, {"base_seed", 0}};
    cfg["grid"] = {{"initial_depth", 4}, {"max_depth", 7}};
    cfg["output"] = {{"dir", out_dir}};
    return cfg;
}

void criterion_8_iris() {
    const auto t0 = std::chrono::steady_clock::now();
    const auto dir = work_dir() / "iris";
    fs::remove_all(dir);
    const auto cfg = write_config("iris.json", iris_config(dir.string()));
    std::string why;
    bool ok = run_cli("pipeline --config " + cfg) == 0;
    if (!ok) why = "pipeline exited non-zero";
    if (ok) {
        const auto summary = json::parse(read_file(dir / "summary.json"));
        const auto rep = json::parse(read_file(dir / "report.json"));
        if (summary["mean_balanced_accuracy"].get<double>() < 0.80) {
            ok = false;
            why = "mean balanced accuracy below 0.80";
        } else if (summary["entropy_min"].get<double>() > 1e-12 ||
                   summary["entropy_max"].get<double>() < 0.9) {
            ok = false;
            why = "entropy span narrower than [0, 0.9] bits";
        } else if (rep["retraction_present"] != true) {
            ok = false;
            why = "retraction absent";
        }
    }
    const double dt = seconds_since(t0);
    report(8, ok && dt < 900.0, dt, why);
}

void criterion_9_determinism() {
    const auto t0 = std::chrono::steady_clock::now();
    bool ok = true;
    std::string why;

    struct RunSpec {
        std::string tag;
        std::string subcommand;
        std::vector<std::string> artifacts;
    };
    const std::vector<RunSpec> specs{
        {"contraction", "analyze --system contraction",
         {"grid.json", "map.json", "morse.json", "morse.dot", "basins.csv", "report.json"}},
        {"double_well", "analyze --system double_well",
         {"grid.json", "map.json", "morse.json", "morse.dot", "basins.csv", "report.json"}},
        {"iris", "pipeline",
         {"records.jsonl", "entropy.csv", "summary.json", "grid.json", "map.json",
          "morse.json", "morse.dot", "basins.csv", "surrogate.json", "pairs.csv"}},
    };

    for (const auto& spec : specs) {
        if (!ok) break;
        std::vector<fs::path> dirs;
        for (const auto& variant : {"t1", "t4", "t4b"}) {
            const auto dir = work_dir() / ("det_" + spec.tag + "_" + variant);
            fs::remove_all(dir);
            json cfg = spec.tag == "iris" ? iris_config(dir.string()) : json::object();
            if (spec.tag != "iris") {
                cfg["grid"] = {{"initial_depth", 4}, {"max_depth", 8}};
                cfg["output"] = {{"dir", dir.string()}};
            }
            const auto path = write_config("det_" + spec.tag + "_" + variant + ".json", cfg);
            const unsigned threads = variant == std::string("t1") ? 1 : 4;
            if (run_cli(spec.subcommand + " --config " + path + " --threads " +
                        std::to_string(threads)) != 0) {
                ok = false;
                why = spec.tag + ": run failed";
                break;
            }
            dirs.push_back(dir);
        }
        for (const auto& name : spec.artifacts) {
            if (!ok) break;
            const auto baseline = read_file(dirs[0] / name);
            if (baseline.empty()) { ok = false; why = spec.tag + ": missing " + name; }
            for (std::size_t i = 1; i < dirs.size() && ok; ++i)
                if (read_file(dirs[i] / name) != baseline) {
                    ok = false;
                    why = spec.tag + ": " + name + " differs across runs";
                }
        }
    }
    const double dt = seconds_since(t0);
    report(9, ok, dt, why);
}

} // namespace

int main() {
    criterion_1_scc_oracle();
    criterion_2_retraction_oracle();
    const auto contraction = criterion_3_contraction();
    const auto dw = criterion_4_double_well();
    criterion_5_birkhoff(dw);
    criterion_6_forward_invariance(contraction, dw);
    criterion_7_surrogate();
    criterion_8_iris();
    criterion_9_determinism();
    return g_failures == 0 ? EXIT_SUCCESS : EXIT_FAILURE;
}
