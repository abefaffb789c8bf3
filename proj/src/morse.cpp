#include "morsekit/morse.hpp"

#include <algorithm>
#include <numeric>
#include <set>

namespace morsekit {

namespace {

// Iterative Tarjan; recursion depth would be a liability on fine grids.
struct TarjanState {
    const MultivaluedMap& map;
    std::vector<std::int32_t> index, lowlink;
    std::vector<bool> on_stack;
    std::vector<std::uint32_t> stack;
    std::int32_t next_index = 0;
    std::vector<std::vector<std::uint32_t>> components;

    explicit TarjanState(const MultivaluedMap& m)
        : map(m), index(m.num_cells, -1), lowlink(m.num_cells, 0), on_stack(m.num_cells, false) {}

    void run(std::uint32_t root) {
        struct Frame {
            std::uint32_t v;
            std::size_t child = 0;
        };
        std::vector<Frame> frames;
        frames.push_back({root});
        index[root] = lowlink[root] = next_index++;
        stack.push_back(root);
        on_stack[root] = true;

        while (!frames.empty()) {
            auto& f = frames.back();
            const auto& adj = map.adjacency[f.v];
            if (f.child < adj.size()) {
                const std::uint32_t w = adj[f.child++];
                if (index[w] < 0) {
                    index[w] = lowlink[w] = next_index++;
                    stack.push_back(w);
                    on_stack[w] = true;
                    frames.push_back({w});
                } else if (on_stack[w]) {
                    lowlink[f.v] = std::min(lowlink[f.v], index[w]);
                }
            } else {
                if (lowlink[f.v] == index[f.v]) {
                    std::vector<std::uint32_t> comp;
                    std::uint32_t w;
                    do {
                        w = stack.back();
                        stack.pop_back();
                        on_stack[w] = false;
                        comp.push_back(w);
                    } while (w != f.v);
                    std::sort(comp.begin(), comp.end());
                    components.push_back(std::move(comp));
                }
                const std::uint32_t v = f.v;
                frames.pop_back();
                if (!frames.empty())
                    lowlink[frames.back().v] = std::min(lowlink[frames.back().v], lowlink[v]);
            }
        }
    }
};

std::vector<std::size_t> topological_order(const Condensation& cond) {
    const std::size_t n = cond.size();
    std::vector<std::size_t> indeg(n, 0);
    for (std::size_t u = 0; u < n; ++u)
        for (auto v : cond.edges[u]) ++indeg[v];
    std::vector<std::size_t> order;
    order.reserve(n);
    std::vector<std::size_t> queue;
    for (std::size_t u = 0; u < n; ++u)
        if (indeg[u] == 0) queue.push_back(u);
    while (!queue.empty()) {
        std::sort(queue.begin(), queue.end(), std::greater<>());
        const std::size_t u = queue.back();
        queue.pop_back();
        order.push_back(u);
        for (auto v : cond.edges[u])
            if (--indeg[v] == 0) queue.push_back(v);
    }
    return order;
}

} // namespace

std::vector<std::vector<std::uint32_t>> strongly_connected_components(const MultivaluedMap& map) {
    TarjanState st(map);
    for (std::uint32_t v = 0; v < map.num_cells; ++v)
        if (st.index[v] < 0) st.run(v);
    std::sort(st.components.begin(), st.components.end(),
              [](const auto& a, const auto& b) { return a.front() < b.front(); });
    return st.components;
}

Condensation condensation(const MultivaluedMap& map) {
    Condensation cond;
    cond.components = strongly_connected_components(map);
    cond.component_of.assign(map.num_cells, 0);
    for (std::uint32_t c = 0; c < cond.components.size(); ++c)
        for (auto v : cond.components[c]) cond.component_of[v] = c;

    cond.edges.assign(cond.size(), {});
    cond.recurrent.assign(cond.size(), false);
    for (std::uint32_t v = 0; v < map.num_cells; ++v) {
        const std::uint32_t cu = cond.component_of[v];
        for (auto w : map.adjacency[v]) {
            const std::uint32_t cw = cond.component_of[w];
            if (cu == cw)
                cond.recurrent[cu] = true; // internal edge, self-loops included
            else
                cond.edges[cu].push_back(cw);
        }
    }
    for (auto& e : cond.edges) {
        std::sort(e.begin(), e.end());
        e.erase(std::unique(e.begin(), e.end()), e.end());
    }
    return cond;
}

std::vector<std::pair<std::uint32_t, std::uint32_t>> MorseGraph::cover_edges() const {
    std::vector<std::pair<std::uint32_t, std::uint32_t>> covers;
    const std::size_t n = size();
    for (std::uint32_t q = 0; q < n; ++q) {
        for (std::uint32_t p = 0; p < n; ++p) {
            if (p == q || !leq[p][q]) continue;
            bool covered = true;
            for (std::uint32_t r = 0; r < n && covered; ++r) {
                if (r == p || r == q) continue;
                if (leq[p][r] && leq[r][q]) covered = false;
            }
            if (covered) covers.emplace_back(q, p);
        }
    }
    return covers;
}

MorseGraph morse_graph(const Condensation& cond) {
    std::vector<std::uint32_t> rec; // recurrent components, canonical order
    std::vector<std::int32_t> rec_index(cond.size(), -1);
    for (std::uint32_t c = 0; c < cond.size(); ++c) {
        if (cond.recurrent[c]) {
            rec_index[c] = static_cast<std::int32_t>(rec.size());
            rec.push_back(c);
        }
    }
    const std::size_t r = rec.size();

    // reach[i][j]: recurrent component rec[j] is reachable from rec[i].
    std::vector<std::vector<bool>> reach(r, std::vector<bool>(r, false));
    for (std::size_t i = 0; i < r; ++i) {
        std::vector<bool> seen(cond.size(), false);
        std::vector<std::uint32_t> stack{rec[i]};
        seen[rec[i]] = true;
        while (!stack.empty()) {
            const auto u = stack.back();
            stack.pop_back();
            for (auto v : cond.edges[u])
                if (!seen[v]) { seen[v] = true; stack.push_back(v); }
        }
        for (std::size_t j = 0; j < r; ++j)
            if (seen[rec[j]]) reach[i][j] = true;
    }

    // Two recurrent components joined by a direct map edge have no
    // non-recurrent dynamics separating them and cannot be isolated at this
    // resolution: group them into one node. The grouping graph carries the
    // reachability relation plus the reverse of every direct edge; its
    // strongly connected components are the Morse nodes, which keeps the
    // induced order antisymmetric.
    MultivaluedMap grouping;
    grouping.num_cells = static_cast<std::uint32_t>(r);
    grouping.adjacency.assign(r, {});
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < r; ++j)
            if (i != j && reach[i][j])
                grouping.adjacency[i].push_back(static_cast<std::uint32_t>(j));
    for (std::size_t i = 0; i < r; ++i) {
        for (auto v : cond.edges[rec[i]]) {
            if (rec_index[v] >= 0)
                grouping.adjacency[static_cast<std::size_t>(rec_index[v])].push_back(
                    static_cast<std::uint32_t>(i));
        }
    }
    for (auto& adj : grouping.adjacency) {
        std::sort(adj.begin(), adj.end());
        adj.erase(std::unique(adj.begin(), adj.end()), adj.end());
    }
    const auto groups = strongly_connected_components(grouping);

    MorseGraph mg;
    std::vector<std::uint32_t> group_of(r, 0);
    for (std::uint32_t g = 0; g < groups.size(); ++g) {
        std::vector<std::uint32_t> comps, cells;
        for (auto i : groups[g]) {
            group_of[i] = g;
            comps.push_back(rec[i]);
            cells.insert(cells.end(), cond.components[rec[i]].begin(),
                         cond.components[rec[i]].end());
        }
        std::sort(comps.begin(), comps.end());
        std::sort(cells.begin(), cells.end());
        mg.node_components.push_back(std::move(comps));
        mg.node_cells.push_back(std::move(cells));
    }

    // p <= q iff q's group reaches p's through the grouping graph.
    const std::size_t n = mg.size();
    mg.leq.assign(n, std::vector<bool>(n, false));
    mg.minimal.assign(n, true);
    for (std::uint32_t q = 0; q < n; ++q) {
        std::vector<bool> seen(r, false);
        std::vector<std::uint32_t> stack;
        for (auto c : mg.node_components[q]) {
            const auto i = static_cast<std::uint32_t>(rec_index[c]);
            seen[i] = true;
            stack.push_back(i);
        }
        while (!stack.empty()) {
            const auto u = stack.back();
            stack.pop_back();
            for (auto v : grouping.adjacency[u])
                if (!seen[v]) { seen[v] = true; stack.push_back(v); }
        }
        for (std::uint32_t i = 0; i < r; ++i) {
            if (seen[i]) {
                mg.leq[group_of[i]][q] = true;
                if (group_of[i] != q) mg.minimal[q] = false;
            }
        }
    }
    return mg;
}

bool verify_retraction(const Condensation& cond, const MorseGraph& mg, const Retraction& sigma) {
    if (sigma.node_of_component.size() != cond.size()) return false;
    std::vector<std::int32_t> node_of(cond.size(), -1);
    for (std::uint32_t m = 0; m < mg.size(); ++m)
        for (auto c : mg.node_components[m]) node_of[c] = m;
    for (std::uint32_t c = 0; c < cond.size(); ++c) {
        const auto s = sigma.node_of_component[c];
        if (s >= mg.size()) return false;
        if (node_of[c] >= 0 && s != static_cast<std::uint32_t>(node_of[c])) return false;
    }
    // Edge u -> v means v <= u in SC(F); order preservation over edges gives
    // preservation over all comparable pairs by transitivity.
    for (std::uint32_t u = 0; u < cond.size(); ++u)
        for (auto v : cond.edges[u])
            if (!mg.leq[sigma.node_of_component[v]][sigma.node_of_component[u]]) return false;
    return true;
}

namespace {

// Unique minimal upper bound of a node set in the Morse poset, or -1.
std::int32_t least_upper_bound(const MorseGraph& mg, const std::vector<std::uint32_t>& nodes) {
    const std::size_t n = mg.size();
    std::vector<std::uint32_t> ubs;
    for (std::uint32_t m = 0; m < n; ++m) {
        bool ok = true;
        for (auto s : nodes)
            if (!mg.leq[s][m]) { ok = false; break; }
        if (ok) ubs.push_back(m);
    }
    std::int32_t lub = -1;
    for (auto m : ubs) {
        bool minimal_ub = true;
        for (auto o : ubs)
            if (o != m && mg.leq[o][m]) { minimal_ub = false; break; }
        if (minimal_ub) {
            if (lub >= 0) return -1; // two incomparable minimal upper bounds
            lub = static_cast<std::int32_t>(m);
        }
    }
    return lub;
}

struct RetractionSearch {
    const Condensation& cond;
    const MorseGraph& mg;
    std::vector<std::int32_t> node_of;                 // comp -> fixed Morse node or -1
    std::vector<std::vector<std::uint32_t>> candidates; // per comp
    std::vector<std::int32_t> assignment;
    std::vector<std::size_t> order;                    // reverse topological (sinks first)

    bool feasible(std::size_t comp, std::uint32_t m) const {
        // Out-neighbors are sinks-first, hence already assigned.
        for (auto v : cond.edges[comp]) {
            if (assignment[v] >= 0 &&
                !mg.leq[static_cast<std::uint32_t>(assignment[v])][m])
                return false;
        }
        return true;
    }

    bool solve(std::size_t k) {
        if (k == order.size()) return true;
        const std::size_t comp = order[k];
        if (assignment[comp] >= 0) return solve(k + 1); // recurrent, fixed
        for (auto m : candidates[comp]) {
            if (!feasible(comp, m)) continue;
            assignment[comp] = static_cast<std::int32_t>(m);
            if (solve(k + 1)) return true;
            assignment[comp] = -1;
        }
        return false;
    }
};

} // namespace

std::optional<Retraction> order_retraction(const Condensation& cond, const MorseGraph& mg) {
    if (cond.size() == 0) return Retraction{};
    if (mg.size() == 0) return std::nullopt;

    std::vector<std::int32_t> node_of(cond.size(), -1);
    for (std::uint32_t m = 0; m < mg.size(); ++m)
        for (auto c : mg.node_components[m]) node_of[c] = m;

    const auto topo = topological_order(cond);
    std::vector<std::size_t> sinks_first(topo.rbegin(), topo.rend());

    // Greedy pass: sigma(v) = LUB of the images of v's immediate successors.
    {
        Retraction sigma;
        sigma.node_of_component.assign(cond.size(), 0);
        std::vector<bool> assigned(cond.size(), false);
        bool ok = true;
        for (auto v : sinks_first) {
            if (node_of[v] >= 0) {
                sigma.node_of_component[v] = static_cast<std::uint32_t>(node_of[v]);
                assigned[v] = true;
                continue;
            }
            std::vector<std::uint32_t> succ_nodes;
            for (auto u : cond.edges[v])
                if (assigned[u]) succ_nodes.push_back(sigma.node_of_component[u]);
            if (succ_nodes.empty()) { ok = false; break; }
            const auto lub = least_upper_bound(mg, succ_nodes);
            if (lub < 0) { ok = false; break; }
            sigma.node_of_component[v] = static_cast<std::uint32_t>(lub);
            assigned[v] = true;
        }
        if (ok && verify_retraction(cond, mg, sigma)) return sigma;
    }

    // Exact pass: backtracking over Morse-node assignments, pruned by the
    // recurrent components above and below each vertex.
    std::vector<std::vector<bool>> above(cond.size(), std::vector<bool>(mg.size(), false));
    std::vector<std::vector<bool>> below(cond.size(), std::vector<bool>(mg.size(), false));
    std::vector<std::vector<std::uint32_t>> redges(cond.size());
    for (std::uint32_t u = 0; u < cond.size(); ++u)
        for (auto v : cond.edges[u]) redges[v].push_back(u);
    for (std::uint32_t m = 0; m < mg.size(); ++m) {
        for (int dir = 0; dir < 2; ++dir) {
            const auto& adj = dir == 0 ? cond.edges : redges;
            auto& mark = dir == 0 ? above : below;
            std::vector<bool> seen(cond.size(), false);
            std::vector<std::uint32_t> stack;
            for (auto c : mg.node_components[m]) {
                seen[c] = true;
                stack.push_back(c);
            }
            while (!stack.empty()) {
                const auto u = stack.back();
                stack.pop_back();
                mark[u][m] = true;
                for (auto w : adj[u])
                    if (!seen[w]) { seen[w] = true; stack.push_back(w); }
            }
        }
    }

    RetractionSearch search{cond, mg, node_of, {}, {}, sinks_first};
    search.candidates.resize(cond.size());
    search.assignment.assign(cond.size(), -1);
    for (std::uint32_t c = 0; c < cond.size(); ++c) {
        if (node_of[c] >= 0) {
            search.assignment[c] = node_of[c];
            continue;
        }
        for (std::uint32_t m = 0; m < mg.size(); ++m) {
            bool ok = true;
            for (std::uint32_t r = 0; r < mg.size() && ok; ++r) {
                if (below[c][r] && !mg.leq[r][m]) ok = false; // must sit above all below
                if (above[c][r] && !mg.leq[m][r]) ok = false; // and below all above
            }
            if (ok) search.candidates[c].push_back(m);
        }
        if (search.candidates[c].empty()) return std::nullopt;
    }

    if (!search.solve(0)) return std::nullopt;
    Retraction sigma;
    sigma.node_of_component.resize(cond.size());
    for (std::uint32_t c = 0; c < cond.size(); ++c)
        sigma.node_of_component[c] = static_cast<std::uint32_t>(search.assignment[c]);
    if (!verify_retraction(cond, mg, sigma)) return std::nullopt;
    return sigma;
}

BasinPartition basins(const Condensation& cond, const MorseGraph& mg, const Retraction& sigma) {
    BasinPartition part;
    const std::size_t cells = cond.component_of.size();
    part.node_of_cell.resize(cells);
    part.role_of_cell.resize(cells);
    for (std::size_t cell = 0; cell < cells; ++cell) {
        const auto comp = cond.component_of[cell];
        const auto node = sigma.node_of_component[comp];
        part.node_of_cell[cell] = node;
        if (cond.recurrent[comp])
            part.role_of_cell[cell] = CellRole::Morse;
        else
            part.role_of_cell[cell] = mg.minimal[node] ? CellRole::Basin : CellRole::Separatrix;
    }
    return part;
}

std::vector<std::uint32_t> reachable_region(const MultivaluedMap& map, const MorseGraph& mg,
                                            std::size_t node) {
    if (node >= mg.size()) throw validation_error("reachable_region: node out of range");
    std::vector<bool> seen(map.num_cells, false);
    std::vector<std::uint32_t> stack;
    for (auto c : mg.node_cells[node]) {
        seen[c] = true;
        stack.push_back(c);
    }
    while (!stack.empty()) {
        const auto v = stack.back();
        stack.pop_back();
        for (auto w : map.adjacency[v])
            if (!seen[w]) { seen[w] = true; stack.push_back(w); }
    }
    std::vector<std::uint32_t> out;
    for (std::uint32_t c = 0; c < map.num_cells; ++c)
        if (seen[c]) out.push_back(c);
    return out;
}

bool RegionLattice::subset(std::size_t a, std::size_t b) const {
    const auto& x = elements[a];
    const auto& y = elements[b];
    for (std::size_t i = 0; i < x.size(); ++i)
        if (x[i] & ~y[i]) return false;
    return true;
}

std::size_t RegionLattice::cardinality(std::size_t a) const {
    std::size_t n = 0;
    for (auto w : elements[a]) n += static_cast<std::size_t>(__builtin_popcountll(w));
    return n;
}

RegionLattice region_lattice(const std::vector<std::vector<std::uint32_t>>& regions,
                             std::size_t universe_size) {
    RegionLattice lat;
    lat.universe_size = universe_size;
    const std::size_t words = (universe_size + 63) / 64;

    auto to_bits = [&](const std::vector<std::uint32_t>& cells) {
        std::vector<std::uint64_t> bits(words, 0);
        for (auto c : cells) bits[c / 64] |= (std::uint64_t{1} << (c % 64));
        return bits;
    };

    std::set<std::vector<std::uint64_t>> pool;
    pool.insert(std::vector<std::uint64_t>(words, 0)); // empty set
    std::vector<std::vector<std::uint64_t>> generator_bits;
    for (const auto& r : regions) {
        auto bits = to_bits(r);
        generator_bits.push_back(bits);
        pool.insert(std::move(bits));
    }

    // Fixed-point closure under pairwise union and intersection.
    bool changed = true;
    while (changed) {
        changed = false;
        std::vector<std::vector<std::uint64_t>> snapshot(pool.begin(), pool.end());
        for (std::size_t i = 0; i < snapshot.size(); ++i) {
            for (std::size_t j = i + 1; j < snapshot.size(); ++j) {
                std::vector<std::uint64_t> u(words), x(words);
                for (std::size_t w = 0; w < words; ++w) {
                    u[w] = snapshot[i][w] | snapshot[j][w];
                    x[w] = snapshot[i][w] & snapshot[j][w];
                }
                if (pool.insert(std::move(u)).second) changed = true;
                if (pool.insert(std::move(x)).second) changed = true;
            }
        }
    }

    lat.elements.assign(pool.begin(), pool.end());
    std::sort(lat.elements.begin(), lat.elements.end(),
              [](const auto& a, const auto& b) {
                  std::size_t ca = 0, cb = 0;
                  for (auto w : a) ca += static_cast<std::size_t>(__builtin_popcountll(w));
                  for (auto w : b) cb += static_cast<std::size_t>(__builtin_popcountll(w));
                  if (ca != cb) return ca < cb;
                  return a < b;
              });
    for (const auto& g : generator_bits) {
        const auto it = std::find(lat.elements.begin(), lat.elements.end(), g);
        lat.generator_positions.push_back(
            static_cast<std::size_t>(it - lat.elements.begin()));
    }
    return lat;
}

JoinIrreduciblePoset join_irreducibles(const RegionLattice& lat) {
    const std::size_t n = lat.elements.size();
    std::vector<std::vector<bool>> lt(n, std::vector<bool>(n, false));
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = 0; b < n; ++b)
            if (a != b && lat.subset(a, b)) lt[a][b] = true;

    JoinIrreduciblePoset ji;
    for (std::size_t a = 0; a < n; ++a) {
        std::size_t preds = 0;
        for (std::size_t b = 0; b < n; ++b) {
            if (!lt[b][a]) continue;
            bool immediate = true;
            for (std::size_t c = 0; c < n && immediate; ++c)
                if (lt[b][c] && lt[c][a]) immediate = false;
            if (immediate) ++preds;
        }
        if (preds == 1) ji.elements.push_back(a);
    }
    const std::size_t m = ji.elements.size();
    ji.leq.assign(m, std::vector<bool>(m, false));
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j)
            ji.leq[i][j] = (i == j) || lt[ji.elements[i]][ji.elements[j]];
    return ji;
}

bool posets_isomorphic(const std::vector<std::vector<bool>>& leq_a,
                       const std::vector<std::vector<bool>>& leq_b) {
    const std::size_t n = leq_a.size();
    if (leq_b.size() != n) return false;
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    do {
        bool ok = true;
        for (std::size_t i = 0; i < n && ok; ++i)
            for (std::size_t j = 0; j < n && ok; ++j)
                if (leq_a[i][j] != leq_b[perm[i]][perm[j]]) ok = false;
        if (ok) return true;
    } while (std::next_permutation(perm.begin(), perm.end()));
    return false;
}

PipelineResult adaptive_morse_pipeline(Grid grid, const BoxImageFn& box_image,
                                       std::uint8_t max_depth, unsigned threads) {
    PipelineResult result{std::move(grid), {}, {}, {}, std::nullopt};
    while (true) {
        result.map = build_outer_map(result.grid, box_image, threads);
        result.cond = condensation(result.map);
        result.mg = morse_graph(result.cond);

        double morse_volume = 0.0;
        std::vector<CellId> to_refine;
        for (std::size_t m = 0; m < result.mg.size(); ++m) {
            for (auto c : result.mg.node_cells[m]) {
                const auto& cell = result.grid.leaves()[c];
                morse_volume += result.grid.cell_bounds(cell).volume();
                if (cell.depth[0] < max_depth) to_refine.push_back(cell);
            }
        }
        result.morse_volume_per_round.push_back(morse_volume);
        if (to_refine.empty()) break;
        try {
            result.grid.refine(to_refine);
        } catch (const capacity_error&) {
            result.truncated = true;
            break;
        }
        ++result.rounds;
    }
    result.retraction = order_retraction(result.cond, result.mg);
    return result;
}

} // namespace morsekit
