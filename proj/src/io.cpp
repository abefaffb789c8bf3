#include "morsekit/io.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace morsekit {

json grid_to_json(const Grid& grid) {
    json j;
    j["domain"] = {{"lower", grid.domain().lower}, {"upper", grid.domain().upper}};
    json leaves = json::array();
    for (const auto& cell : grid.leaves()) {
        json c;
        c["depth"] = cell.depth;
        c["index"] = cell.index;
        leaves.push_back(std::move(c));
    }
    j["leaves"] = std::move(leaves);
    return j;
}

Grid grid_from_json(const json& j) {
    Box domain;
    domain.lower = j.at("domain").at("lower").get<std::vector<double>>();
    domain.upper = j.at("domain").at("upper").get<std::vector<double>>();
    domain.validate();

    // Rebuild by replaying refinement from the shallowest depth present.
    const auto& leaves = j.at("leaves");
    if (leaves.empty()) throw validation_error("grid_from_json: no leaves");
    std::vector<CellId> cells;
    for (const auto& c : leaves) {
        CellId cell;
        cell.depth = c.at("depth").get<std::vector<std::uint8_t>>();
        cell.index = c.at("index").get<std::vector<std::uint64_t>>();
        cells.push_back(std::move(cell));
    }
    std::vector<std::uint8_t> base = cells.front().depth;
    for (const auto& c : cells)
        for (std::size_t a = 0; a < base.size(); ++a)
            base[a] = std::min(base[a], c.depth[a]);
    // Depth vectors differ from base by a uniform per-cell round count.
    std::uint8_t max_round = 0;
    for (const auto& c : cells)
        max_round = std::max<std::uint8_t>(max_round, c.depth[0] - base[0]);

    Grid grid(domain, base);
    for (std::uint8_t r = 0; r < max_round; ++r) {
        std::vector<CellId> to_refine;
        for (const auto& leaf : grid.leaves()) {
            // Refine every current leaf that is a strict ancestor of a stored cell.
            for (const auto& c : cells) {
                if (c.depth[0] <= leaf.depth[0]) continue;
                bool ancestor = true;
                for (std::size_t a = 0; a < base.size() && ancestor; ++a) {
                    const auto shift = c.depth[a] - leaf.depth[a];
                    if ((c.index[a] >> shift) != leaf.index[a]) ancestor = false;
                }
                if (ancestor) {
                    to_refine.push_back(leaf);
                    break;
                }
            }
        }
        if (to_refine.empty()) break;
        grid.refine(to_refine);
    }
    if (grid.size() != cells.size())
        throw validation_error("grid_from_json: leaf set is not a valid subdivision");
    return grid;
}

json map_to_json(const MultivaluedMap& map) {
    json j;
    j["cells"] = map.num_cells;
    json edges = json::array();
    for (std::uint32_t src = 0; src < map.num_cells; ++src)
        for (auto dst : map.adjacency[src]) edges.push_back({src, dst});
    j["edges"] = std::move(edges);
    json clipped = json::array();
    for (std::uint32_t c = 0; c < map.num_cells; ++c)
        if (map.clipped[c]) clipped.push_back(c);
    j["clipped"] = std::move(clipped);
    return j;
}

MultivaluedMap map_from_json(const json& j) {
    MultivaluedMap map;
    map.num_cells = j.at("cells").get<std::size_t>();
    map.adjacency.resize(map.num_cells);
    map.clipped.assign(map.num_cells, false);
    for (const auto& e : j.at("edges")) {
        const auto src = e.at(0).get<std::uint32_t>();
        const auto dst = e.at(1).get<std::uint32_t>();
        if (src >= map.num_cells || dst >= map.num_cells)
            throw validation_error("map_from_json: edge endpoint out of range");
        map.adjacency[src].push_back(dst);
    }
    for (auto& a : map.adjacency) {
        std::sort(a.begin(), a.end());
        a.erase(std::unique(a.begin(), a.end()), a.end());
    }
    for (const auto& c : j.at("clipped")) map.clipped[c.get<std::uint32_t>()] = true;
    return map;
}

std::string map_to_edge_csv(const MultivaluedMap& map) {
    std::ostringstream out;
    out << "src,dst\n";
    for (std::uint32_t src = 0; src < map.num_cells; ++src)
        for (auto dst : map.adjacency[src]) out << src << ',' << dst << '\n';
    return out.str();
}

json morse_to_json(const Condensation& cond, const MorseGraph& mg,
                   const std::optional<Retraction>& sigma) {
    json j;
    json nodes = json::array();
    for (std::uint32_t m = 0; m < mg.size(); ++m) {
        json n;
        n["id"] = m;
        n["cells"] = mg.node_cells[m];
        n["minimal"] = static_cast<bool>(mg.minimal[m]);
        nodes.push_back(std::move(n));
    }
    j["nodes"] = std::move(nodes);
    json order_edges = json::array();
    for (const auto& [from, to] : mg.cover_edges()) order_edges.push_back({from, to});
    j["order_edges"] = std::move(order_edges);
    if (sigma) {
        json r = json::object();
        for (std::uint32_t c = 0; c < cond.size(); ++c)
            r[std::to_string(c)] = sigma->node_of_component[c];
        j["retraction"] = std::move(r);
    } else {
        j["retraction"] = nullptr;
    }
    return j;
}

namespace {

// Longest downward chain length per node, from the covering edges.
std::vector<std::size_t> node_heights(std::size_t n,
                                      const std::vector<std::pair<std::uint32_t, std::uint32_t>>& covers) {
    std::vector<std::size_t> height(n, 0);
    bool changed = true;
    while (changed) {
        changed = false;
        for (const auto& [from, to] : covers) {
            if (height[from] < height[to] + 1) {
                height[from] = height[to] + 1;
                changed = true;
            }
        }
    }
    return height;
}

std::string render_dot(std::size_t n, const std::vector<std::size_t>& cell_counts,
                       const std::vector<bool>& minimal,
                       const std::vector<std::pair<std::uint32_t, std::uint32_t>>& covers) {
    const auto height = node_heights(n, covers);
    const std::size_t max_h = n == 0 ? 0 : *std::max_element(height.begin(), height.end());

    std::ostringstream out;
    out << "digraph morse {\n";
    out << "  rankdir=TB;\n";
    out << "  node [shape=box];\n";
    for (std::size_t m = 0; m < n; ++m) {
        out << "  n" << m << " [label=\"M" << m << "\\ncells=" << cell_counts[m]
            << (minimal[m] ? "\\nminimal" : "") << "\"];\n";
    }
    for (std::size_t h = max_h + 1; h-- > 0;) {
        std::vector<std::size_t> level;
        for (std::size_t m = 0; m < n; ++m)
            if (height[m] == h) level.push_back(m);
        if (level.empty()) continue;
        out << "  { rank=same;";
        for (auto m : level) out << " n" << m << ";";
        out << " }\n";
    }
    for (const auto& [from, to] : covers)
        out << "  n" << from << " -> n" << to << ";\n";
    out << "}\n";
    return out.str();
}

} // namespace

std::string morse_to_dot(const MorseGraph& mg) {
    std::vector<std::size_t> counts;
    for (const auto& cells : mg.node_cells) counts.push_back(cells.size());
    std::vector<bool> minimal(mg.minimal.begin(), mg.minimal.end());
    return render_dot(mg.size(), counts, minimal, mg.cover_edges());
}

std::string morse_json_to_dot(const json& j) {
    const auto& nodes = j.at("nodes");
    std::vector<std::size_t> counts;
    std::vector<bool> minimal;
    for (const auto& n : nodes) {
        counts.push_back(n.at("cells").size());
        minimal.push_back(n.at("minimal").get<bool>());
    }
    std::vector<std::pair<std::uint32_t, std::uint32_t>> covers;
    for (const auto& e : j.at("order_edges"))
        covers.emplace_back(e.at(0).get<std::uint32_t>(), e.at(1).get<std::uint32_t>());
    return render_dot(nodes.size(), counts, minimal, covers);
}

std::string basins_to_csv(const BasinPartition& part) {
    std::ostringstream out;
    out << "cell,node,role\n";
    for (std::size_t c = 0; c < part.node_of_cell.size(); ++c) {
        const char* role = "morse";
        if (part.role_of_cell[c] == CellRole::Basin) role = "basin";
        else if (part.role_of_cell[c] == CellRole::Separatrix) role = "separatrix";
        out << c << ',' << part.node_of_cell[c] << ',' << role << '\n';
    }
    return out.str();
}

json surrogate_to_json(const GpSurrogate& gp) {
    const auto s = gp.state();
    json j;
    json inputs = json::array();
    for (Eigen::Index i = 0; i < s.inputs.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index a = 0; a < s.inputs.cols(); ++a) row.push_back(s.inputs(i, a));
        inputs.push_back(std::move(row));
    }
    j["inputs"] = std::move(inputs);
    json duals = json::array();
    for (Eigen::Index i = 0; i < s.dual_weights.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index c = 0; c < s.dual_weights.cols(); ++c)
            row.push_back(s.dual_weights(i, c));
        duals.push_back(std::move(row));
    }
    j["dual_weights"] = std::move(duals);
    j["length_scales"] = s.length_scales;
    j["signal_variance"] = s.signal_var;
    j["prior_mean"] = s.prior_mean;
    j["jitter"] = s.jitter_used;
    return j;
}

GpSurrogate surrogate_from_json(const json& j) {
    GpSurrogate::State s;
    const auto& inputs = j.at("inputs");
    const auto& duals = j.at("dual_weights");
    const auto rows = static_cast<Eigen::Index>(inputs.size());
    if (rows == 0) throw validation_error("surrogate_from_json: empty inputs");
    s.inputs.resize(rows, static_cast<Eigen::Index>(inputs.at(0).size()));
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index a = 0; a < s.inputs.cols(); ++a)
            s.inputs(i, a) = inputs.at(i).at(a).get<double>();
    s.dual_weights.resize(rows, static_cast<Eigen::Index>(duals.at(0).size()));
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index c = 0; c < s.dual_weights.cols(); ++c)
            s.dual_weights(i, c) = duals.at(i).at(c).get<double>();
    s.length_scales = j.at("length_scales").get<std::vector<double>>();
    s.signal_var = j.at("signal_variance").get<std::vector<double>>();
    s.prior_mean = j.at("prior_mean").get<std::vector<double>>();
    s.jitter_used = j.at("jitter").get<double>();
    return GpSurrogate::from_state(std::move(s));
}

std::string records_to_jsonl(const std::vector<EnsembleRecord>& records) {
    std::ostringstream out;
    for (const auto& r : records) {
        json j;
        j["cycle"] = r.cycle;
        j["seed"] = r.seed;
        j["diverged"] = r.diverged;
        j["initial"] = r.initial_weights;
        j["final"] = r.final_weights;
        j["predictions"] = r.predictions;
        j["balanced_accuracy"] = r.balanced_accuracy;
        out << j.dump() << '\n';
    }
    return out.str();
}

std::vector<EnsembleRecord> records_from_jsonl(std::istream& in) {
    std::vector<EnsembleRecord> records;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const json j = json::parse(line);
        EnsembleRecord r;
        r.cycle = j.at("cycle").get<int>();
        r.seed = j.at("seed").get<std::uint64_t>();
        r.diverged = j.at("diverged").get<bool>();
        r.initial_weights = j.at("initial").get<std::vector<double>>();
        r.final_weights = j.at("final").get<std::vector<double>>();
        r.predictions = j.at("predictions").get<std::vector<int>>();
        r.balanced_accuracy = j.at("balanced_accuracy").get<double>();
        records.push_back(std::move(r));
    }
    return records;
}

std::vector<EnsembleRecord> load_records(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw validation_error("cannot open record file: " + path);
    return records_from_jsonl(in);
}

std::string pairs_to_csv(const std::vector<SamplePair>& pairs) {
    std::ostringstream out;
    if (pairs.empty()) return "";
    const std::size_t d = pairs.front().input.size();
    for (std::size_t a = 0; a < d; ++a) out << "x_" << (a + 1) << ',';
    for (std::size_t a = 0; a < d; ++a) out << "y_" << (a + 1) << (a + 1 < d ? "," : "\n");
    out.precision(17);
    for (const auto& p : pairs) {
        for (std::size_t a = 0; a < d; ++a) out << p.input[a] << ',';
        for (std::size_t a = 0; a < d; ++a) out << p.output[a] << (a + 1 < d ? "," : "\n");
    }
    return out.str();
}

std::vector<SamplePair> pairs_from_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw validation_error("pairs CSV: missing header");
    std::size_t cols = std::count(line.begin(), line.end(), ',') + 1;
    if (cols < 2 || cols % 2 != 0)
        throw validation_error("pairs CSV: need an even number of columns (x_1..x_d, y_1..y_d)");
    const std::size_t d = cols / 2;
    std::vector<SamplePair> pairs;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string field;
        SamplePair p;
        for (std::size_t c = 0; c < cols; ++c) {
            if (!std::getline(ss, field, ','))
                throw validation_error("pairs CSV: short row");
            (c < d ? p.input : p.output).push_back(std::stod(field));
        }
        pairs.push_back(std::move(p));
    }
    return pairs;
}

std::string entropy_to_csv(const std::vector<double>& entropy) {
    std::ostringstream out;
    out << "point,entropy_bits\n";
    out.precision(17);
    for (std::size_t i = 0; i < entropy.size(); ++i) out << i << ',' << entropy[i] << '\n';
    return out.str();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw validation_error("cannot write file: " + path);
    out << content;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw validation_error("cannot read file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json read_json_file(const std::string& path) {
    return json::parse(read_file(path));
}

} // namespace morsekit
