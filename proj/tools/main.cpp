// Command-line front end: train ensembles, run the Morse analysis, export
// artifacts. Subcommands: train, analyze, pipeline, export, validate-config.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <map>

#include "morsekit/io.hpp"
#include "morsekit/systems.hpp"

namespace fs = std::filesystem;
using namespace morsekit;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;
constexpr int kExitTruncated = 3;

struct ResolvedConfig {
    json raw; // fully expanded, defaults included

    // dataset
    std::string dataset_path;
    int label_column = -1;
    std::uint64_t split_seed = 0;
    double train_fraction = 0.8;
    bool standardize = true;
    // network
    std::vector<int> hidden;
    std::string activation = "tanh";
    int epochs = 150;
    int batch_size = 16;
    double learning_rate = 0.05;
    // ensemble
    int cycles = 100;
    std::uint64_t base_seed = 0;
    double init_lower = -1.0, init_upper = 1.0;
    // selection
    std::size_t k = 2;
    std::vector<std::size_t> indices; // overrides k when non-empty
    // surrogate
    KernelConfig kernel;
    VarianceConfig variance;
    // grid
    bool auto_domain = true;
    Box domain;
    std::uint8_t initial_depth = 4;
    std::uint8_t max_depth = 7;
    std::size_t leaf_cap = Grid::kDefaultLeafCap;
    // output
    std::string out_dir = "out";
};

template <typename T>
T field(const json& j, const std::string& section, const std::string& key, T fallback) {
    if (!j.contains(section) || !j.at(section).contains(key)) return fallback;
    try {
        return j.at(section).at(key).get<T>();
    } catch (const json::exception& e) {
        throw validation_error("config field " + section + "." + key + ": " + e.what());
    }
}

ResolvedConfig resolve_config(const json& j) {
    ResolvedConfig c;
    c.dataset_path = field<std::string>(j, "dataset", "path", "");
    c.label_column = field<int>(j, "dataset", "label_column", -1);
    c.split_seed = field<std::uint64_t>(j, "dataset", "split_seed", 0);
    c.train_fraction = field<double>(j, "dataset", "train_fraction", 0.8);
    c.standardize = field<bool>(j, "dataset", "standardize", true);

    c.hidden = field<std::vector<int>>(j, "network", "hidden", {1});
    c.activation = field<std::string>(j, "network", "activation", "tanh");
    c.epochs = field<int>(j, "network", "epochs", 150);
    c.batch_size = field<int>(j, "network", "batch_size", 16);
    c.learning_rate = field<double>(j, "network", "learning_rate", 0.05);

    c.cycles = field<int>(j, "ensemble", "cycles", 100);
    c.base_seed = field<std::uint64_t>(j, "ensemble", "base_seed", 0);
    c.init_lower = field<double>(j, "ensemble", "init_lower", -1.0);
    c.init_upper = field<double>(j, "ensemble", "init_upper", 1.0);

    c.k = field<std::size_t>(j, "selection", "k", 2);
    c.indices = field<std::vector<std::size_t>>(j, "selection", "indices", {});

    c.kernel.jitter = field<double>(j, "surrogate", "jitter", 1e-6);
    c.variance.z = field<double>(j, "surrogate", "z", 2.0);
    c.variance.samples_per_cell = field<std::size_t>(j, "surrogate", "samples_per_cell", 0);
    c.variance.epsilon = field<double>(j, "surrogate", "epsilon", 1e-9);

    c.initial_depth = field<std::uint8_t>(j, "grid", "initial_depth", 4);
    c.max_depth = field<std::uint8_t>(j, "grid", "max_depth", 7);
    c.leaf_cap = field<std::size_t>(j, "grid", "leaf_cap", Grid::kDefaultLeafCap);
    if (j.contains("grid") && j.at("grid").contains("domain") &&
        !j.at("grid").at("domain").is_string()) {
        c.auto_domain = false;
        c.domain.lower = j.at("grid").at("domain").at("lower").get<std::vector<double>>();
        c.domain.upper = j.at("grid").at("domain").at("upper").get<std::vector<double>>();
        c.domain.validate();
    }

    c.out_dir = field<std::string>(j, "output", "dir", "out");

    // Numeric sanity up front, with field paths in the message.
    if (c.train_fraction <= 0.0 || c.train_fraction >= 1.0)
        throw validation_error("config field dataset.train_fraction: must be in (0, 1)");
    if (c.epochs < 0) throw validation_error("config field network.epochs: must be >= 0");
    if (c.batch_size <= 0) throw validation_error("config field network.batch_size: must be positive");
    if (c.learning_rate <= 0.0)
        throw validation_error("config field network.learning_rate: must be positive");
    if (c.cycles <= 0) throw validation_error("config field ensemble.cycles: must be positive");
    if (!(c.init_lower < c.init_upper))
        throw validation_error("config field ensemble.init_lower/init_upper: empty range");
    if (c.variance.z < 0.0) throw validation_error("config field surrogate.z: must be >= 0");
    if (c.variance.epsilon < 0.0)
        throw validation_error("config field surrogate.epsilon: must be >= 0");
    if (c.kernel.jitter <= 0.0)
        throw validation_error("config field surrogate.jitter: must be positive");
    if (c.max_depth < c.initial_depth)
        throw validation_error("config field grid.max_depth: must be >= grid.initial_depth");
    activation_from_string(c.activation); // throws on unknown names

    json raw;
    raw["dataset"] = {{"path", c.dataset_path},
                      {"label_column", c.label_column},
                      {"split_seed", c.split_seed},
                      {"train_fraction", c.train_fraction},
                      {"standardize", c.standardize}};
    raw["network"] = {{"hidden", c.hidden},
                      {"activation", c.activation},
                      {"epochs", c.epochs},
                      {"batch_size", c.batch_size},
                      {"learning_rate", c.learning_rate}};
    raw["ensemble"] = {{"cycles", c.cycles},
                       {"base_seed", c.base_seed},
                       {"init_lower", c.init_lower},
                       {"init_upper", c.init_upper}};
    raw["selection"] = {{"k", c.k}, {"indices", c.indices}};
    raw["surrogate"] = {{"jitter", c.kernel.jitter},
                        {"z", c.variance.z},
                        {"samples_per_cell", c.variance.samples_per_cell},
                        {"epsilon", c.variance.epsilon}};
    raw["grid"] = {{"initial_depth", c.initial_depth},
                   {"max_depth", c.max_depth},
                   {"leaf_cap", c.leaf_cap}};
    if (c.auto_domain)
        raw["grid"]["domain"] = "auto";
    else
        raw["grid"]["domain"] = {{"lower", c.domain.lower}, {"upper", c.domain.upper}};
    raw["output"] = {{"dir", c.out_dir}};
    c.raw = std::move(raw);
    return c;
}

// Outputs are staged in memory and written together, so a failing stage
// leaves no partial files behind.
void write_outputs(const std::string& dir, const std::map<std::string, std::string>& files) {
    fs::create_directories(dir);
    for (const auto& [name, content] : files)
        write_file((fs::path(dir) / name).string(), content);
}

int run_train(const ResolvedConfig& cfg, unsigned threads) {
    if (cfg.dataset_path.empty())
        throw validation_error("config field dataset.path: required for training");
    auto data = load_dataset_csv(cfg.dataset_path, cfg.label_column);
    const auto split = stratified_split(data.labels, cfg.train_fraction, cfg.split_seed);
    if (cfg.standardize) data = standardize_features(std::move(data), split.train);

    NetConfig net;
    net.layer_widths.push_back(static_cast<int>(data.feature_dim()));
    for (auto h : cfg.hidden) net.layer_widths.push_back(h);
    net.layer_widths.push_back(data.n_classes);
    net.activation = activation_from_string(cfg.activation);
    net.epochs = cfg.epochs;
    net.batch_size = cfg.batch_size;
    net.learning_rate = cfg.learning_rate;
    net.validate();

    EnsembleConfig ens;
    ens.cycles = cfg.cycles;
    ens.base_seed = cfg.base_seed;
    ens.init_box =
        EnsembleConfig::uniform_init_box(net.parameter_count(), cfg.init_lower, cfg.init_upper);

    const auto records = train_ensemble(net, data, split, ens, threads);
    const auto entropy = prediction_entropy(records, data.n_classes);

    double mean_acc = 0.0, sq = 0.0;
    std::size_t live = 0;
    for (const auto& r : records) {
        if (r.diverged) continue;
        mean_acc += r.balanced_accuracy;
        ++live;
    }
    mean_acc /= static_cast<double>(live);
    for (const auto& r : records) {
        if (r.diverged) continue;
        sq += (r.balanced_accuracy - mean_acc) * (r.balanced_accuracy - mean_acc);
    }
    json summary;
    summary["cycles"] = records.size();
    summary["diverged"] = records.size() - live;
    summary["mean_balanced_accuracy"] = mean_acc;
    summary["std_balanced_accuracy"] = std::sqrt(sq / static_cast<double>(live));
    summary["entropy_min"] = *std::min_element(entropy.begin(), entropy.end());
    summary["entropy_max"] = *std::max_element(entropy.begin(), entropy.end());

    std::map<std::string, std::string> files;
    files["records.jsonl"] = records_to_jsonl(records);
    files["entropy.csv"] = entropy_to_csv(entropy);
    files["summary.json"] = summary.dump(2) + "\n";
    files["resolved_config.json"] = cfg.raw.dump(2) + "\n";
    write_outputs(cfg.out_dir, files);
    std::cout << "train: " << records.size() << " cycles, mean balanced accuracy "
              << mean_acc << "\n";
    return kExitOk;
}

int run_analyze(const ResolvedConfig& cfg, const std::string& records_path,
                const std::string& system_name, unsigned threads) {
    BoxImageFn box_image;
    PointMapFn point_map;
    Box domain;
    std::uint8_t initial_depth = cfg.initial_depth;
    json report;
    std::map<std::string, std::string> files;

    if (!system_name.empty()) {
        const auto sys = analytic_system(system_name);
        box_image = sys.box_image;
        point_map = sys.point_map;
        domain = cfg.auto_domain ? sys.default_domain : cfg.domain;
        report["source"] = "system:" + system_name;
    } else {
        const auto records = load_records(records_path);
        std::vector<std::size_t> coords =
            cfg.indices.empty() ? select_coordinates(records, cfg.k) : cfg.indices;
        const auto pairs = project(records, coords);
        if (pairs.size() < 2)
            throw validation_error("analyze: need at least 2 non-diverged records");
        const auto gp = GpSurrogate::fit(pairs, cfg.kernel);
        box_image = gp.box_image_fn(cfg.variance);
        point_map = gp.mean_map();
        if (cfg.auto_domain) {
            // Bounding box of projected initial weights, inflated 10% per axis.
            const std::size_t d = coords.size();
            domain.lower.assign(d, std::numeric_limits<double>::infinity());
            domain.upper.assign(d, -std::numeric_limits<double>::infinity());
            for (const auto& p : pairs) {
                for (std::size_t a = 0; a < d; ++a) {
                    domain.lower[a] = std::min(domain.lower[a], p.input[a]);
                    domain.upper[a] = std::max(domain.upper[a], p.input[a]);
                }
            }
            for (std::size_t a = 0; a < d; ++a) {
                const double pad = 0.1 * (domain.upper[a] - domain.lower[a]);
                domain.lower[a] -= pad;
                domain.upper[a] += pad;
            }
        } else {
            domain = cfg.domain;
        }
        report["source"] = "records:" + records_path;
        report["selected_coordinates"] = coords;
        files["surrogate.json"] = surrogate_to_json(gp).dump() + "\n";
        files["pairs.csv"] = pairs_to_csv(pairs);
    }

    domain.validate();
    Grid grid(domain, std::vector<std::uint8_t>(domain.dim(), initial_depth), cfg.leaf_cap);
    auto result = adaptive_morse_pipeline(std::move(grid), box_image, cfg.max_depth, threads);
    const auto coverage = validate_outer(result.map, result.grid, point_map, 20);

    std::size_t clipped = 0;
    for (auto c : result.map.clipped)
        if (c) ++clipped;
    report["cells"] = result.grid.size();
    report["morse_nodes"] = result.mg.size();
    json minimal = json::array();
    for (auto m : result.mg.minimal) minimal.push_back(static_cast<bool>(m));
    report["minimal"] = std::move(minimal);
    report["retraction_present"] = result.retraction.has_value();
    report["clipped_cells"] = clipped;
    report["truncated"] = result.truncated;
    report["refinement_rounds"] = result.rounds;
    report["coverage"] = {{"samples", coverage.total_samples},
                          {"violations", coverage.violations},
                          {"violation_fraction", coverage.violation_fraction()},
                          {"out_of_domain", coverage.out_of_domain}};

    files["grid.json"] = grid_to_json(result.grid).dump() + "\n";
    files["map.json"] = map_to_json(result.map).dump() + "\n";
    const auto morse_json = morse_to_json(result.cond, result.mg, result.retraction);
    files["morse.json"] = morse_json.dump() + "\n";
    files["morse.dot"] = morse_to_dot(result.mg);
    if (result.retraction)
        files["basins.csv"] = basins_to_csv(basins(result.cond, result.mg, *result.retraction));
    files["report.json"] = report.dump(2) + "\n";
    files["resolved_config.json"] = cfg.raw.dump(2) + "\n";
    write_outputs(cfg.out_dir, files);

    std::cout << "analyze: " << result.mg.size() << " Morse node(s), retraction "
              << (result.retraction ? "present" : "absent") << "\n";
    return result.truncated ? kExitTruncated : kExitOk;
}

int run_export(const std::string& input, const std::string& format) {
    const auto j = read_json_file(input);
    if (format == "json") {
        std::cout << j.dump() << "\n";
    } else if (format == "dot") {
        std::cout << morse_json_to_dot(j);
    } else if (format == "csv") {
        std::cout << "node,cells,minimal\n";
        for (const auto& n : j.at("nodes"))
            std::cout << n.at("id").get<int>() << ',' << n.at("cells").size() << ','
                      << (n.at("minimal").get<bool>() ? 1 : 0) << "\n";
    } else {
        std::cerr << "unknown format: " << format << " (expected dot, json, or csv)\n";
        return kExitValidation;
    }
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Morse-graph reconstruction of iterated-map dynamics"};
    app.require_subcommand(1);

    std::string config_path, records_path, system_name, out_dir, input_path, format = "json";
    unsigned threads = 1;
    std::int64_t seed_override = -1;

    auto add_common = [&](CLI::App* cmd, bool needs_config) {
        auto* opt = cmd->add_option("--config", config_path, "pipeline configuration JSON");
        if (needs_config) opt->required();
        cmd->add_option("--out", out_dir, "output directory (overrides config)");
        cmd->add_option("--threads", threads, "worker thread cap");
        cmd->add_option("--seed", seed_override, "override ensemble base seed");
    };

    auto* cmd_validate = app.add_subcommand("validate-config", "check a config file");
    cmd_validate->add_option("--config", config_path)->required();

    auto* cmd_train = app.add_subcommand("train", "train an ensemble and write records");
    add_common(cmd_train, true);

    auto* cmd_analyze = app.add_subcommand("analyze", "Morse analysis of records or a test system");
    add_common(cmd_analyze, true);
    cmd_analyze->add_option("--records", records_path, "EnsembleRecord JSONL file");
    cmd_analyze->add_option("--system", system_name,
                            "analytic test system (contraction, double_well, saddle)");

    auto* cmd_pipeline = app.add_subcommand("pipeline", "train then analyze in one run");
    add_common(cmd_pipeline, true);

    auto* cmd_export = app.add_subcommand("export", "re-serialize a morse.json artifact");
    cmd_export->add_option("--input", input_path, "morse.json path")->required();
    cmd_export->add_option("--format", format, "dot, json, or csv");

    CLI11_PARSE(app, argc, argv);

    try {
        if (cmd_export->parsed()) return run_export(input_path, format);

        auto cfg = resolve_config(read_json_file(config_path));
        if (seed_override >= 0) {
            cfg.raw["ensemble"]["base_seed"] = static_cast<std::uint64_t>(seed_override);
            cfg = resolve_config(cfg.raw);
        }
        if (!out_dir.empty()) {
            cfg.raw["output"]["dir"] = out_dir;
            cfg = resolve_config(cfg.raw);
        }

        if (cmd_validate->parsed()) {
            std::cout << "config ok\n";
            return kExitOk;
        }
        if (cmd_train->parsed()) return run_train(cfg, threads);
        if (cmd_analyze->parsed()) {
            if (records_path.empty() && system_name.empty())
                throw validation_error("analyze: provide --records or --system");
            if (!records_path.empty() && !system_name.empty())
                throw validation_error("analyze: --records and --system are exclusive");
            return run_analyze(cfg, records_path, system_name, threads);
        }
        if (cmd_pipeline->parsed()) {
            const int rc = run_train(cfg, threads);
            if (rc != kExitOk) return rc;
            const auto records = (fs::path(cfg.out_dir) / "records.jsonl").string();
            return run_analyze(cfg, records, "", threads);
        }
    } catch (const validation_error& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const capacity_error& e) {
        std::cerr << "capacity error: " << e.what() << "\n";
        return kExitTruncated;
    } catch (const json::exception& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitOk;
}
