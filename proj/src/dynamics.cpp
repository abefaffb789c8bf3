#include "morsekit/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <random>
#include <thread>

namespace morsekit {

bool MultivaluedMap::has_edge(std::uint32_t src, std::uint32_t dst) const {
    const auto& a = adjacency[src];
    return std::binary_search(a.begin(), a.end(), dst);
}

std::size_t MultivaluedMap::edge_count() const {
    std::size_t n = 0;
    for (const auto& a : adjacency) n += a.size();
    return n;
}

double CoverageReport::violation_fraction() const {
    const std::size_t in_domain = total_samples - out_of_domain;
    return in_domain == 0 ? 0.0 : static_cast<double>(violations) / static_cast<double>(in_domain);
}

namespace {

// Leaves grouped by depth vector, so intersection queries reduce to per-axis
// integer range scans within each group.
struct DepthGroup {
    std::vector<std::uint8_t> depth;
    std::unordered_map<CellId, std::size_t, CellIdHash> members;
};

std::vector<DepthGroup> group_by_depth(const Grid& grid) {
    std::map<std::vector<std::uint8_t>, DepthGroup> groups;
    const auto& leaves = grid.leaves();
    for (std::size_t i = 0; i < leaves.size(); ++i) {
        auto& g = groups[leaves[i].depth];
        g.depth = leaves[i].depth;
        g.members.emplace(leaves[i], i);
    }
    std::vector<DepthGroup> out;
    out.reserve(groups.size());
    for (auto& [k, v] : groups) out.push_back(std::move(v));
    return out;
}

// All leaf positions whose closed box intersects closed B.
void collect_targets(const Grid& grid, const std::vector<DepthGroup>& groups,
                     const Box& b, std::vector<std::uint32_t>& out) {
    const std::size_t dim = grid.dim();
    const Box& dom = grid.domain();
    for (const auto& g : groups) {
        std::vector<std::int64_t> lo(dim), hi(dim);
        bool empty = false;
        for (std::size_t a = 0; a < dim; ++a) {
            const std::uint64_t n = std::uint64_t{1} << g.depth[a];
            const double w = dom.extent(a) / static_cast<double>(n);
            auto lo_k = static_cast<std::int64_t>(std::floor((b.lower[a] - dom.lower[a]) / w)) - 1;
            auto hi_k = static_cast<std::int64_t>(std::floor((b.upper[a] - dom.lower[a]) / w)) + 1;
            lo[a] = std::max<std::int64_t>(lo_k, 0);
            hi[a] = std::min<std::int64_t>(hi_k, static_cast<std::int64_t>(n) - 1);
            if (lo[a] > hi[a]) { empty = true; break; }
        }
        if (empty) continue;

        std::uint64_t total = 1;
        std::vector<std::uint64_t> counts(dim);
        for (std::size_t a = 0; a < dim; ++a) {
            counts[a] = static_cast<std::uint64_t>(hi[a] - lo[a] + 1);
            total *= counts[a];
        }
        CellId cand;
        cand.depth = g.depth;
        cand.index.assign(dim, 0);
        for (std::uint64_t lin = 0; lin < total; ++lin) {
            std::uint64_t rem = lin;
            for (std::size_t a = dim; a-- > 0;) {
                cand.index[a] = static_cast<std::uint64_t>(lo[a]) + rem % counts[a];
                rem /= counts[a];
            }
            auto it = g.members.find(cand);
            if (it != g.members.end()) {
                // Candidate ranges are padded by one cell; confirm exactly.
                if (grid.cell_bounds(cand).intersects(b))
                    out.push_back(static_cast<std::uint32_t>(it->second));
            }
        }
    }
}

} // namespace

MultivaluedMap build_outer_map(const Grid& grid, const BoxImageFn& box_image,
                               unsigned threads) {
    const auto groups = group_by_depth(grid);
    const std::size_t n = grid.size();
    const Box& dom = grid.domain();

    MultivaluedMap map;
    map.num_cells = n;
    map.adjacency.resize(n);
    map.clipped.assign(n, false);

    auto process = [&](std::size_t i) {
        Box img = box_image(grid.cell_bounds(grid.leaves()[i]));
        if (img.lower.size() != dom.dim() || img.upper.size() != dom.dim())
            throw validation_error("build_outer_map: image box has wrong dimension");
        bool clipped = false;
        for (std::size_t a = 0; a < dom.dim(); ++a) {
            if (img.lower[a] > img.upper[a])
                throw validation_error("build_outer_map: image box has lower > upper");
            if (img.lower[a] < dom.lower[a]) { img.lower[a] = dom.lower[a]; clipped = true; }
            if (img.upper[a] > dom.upper[a]) { img.upper[a] = dom.upper[a]; clipped = true; }
            if (img.lower[a] > img.upper[a]) {
                // Image entirely outside: collapse onto the nearest face.
                img.lower[a] = img.upper[a] = (img.lower[a] > dom.upper[a]) ? dom.upper[a]
                                                                            : dom.lower[a];
            }
        }
        map.clipped[i] = clipped;
        auto& adj = map.adjacency[i];
        collect_targets(grid, groups, img, adj);
        std::sort(adj.begin(), adj.end());
        adj.erase(std::unique(adj.begin(), adj.end()), adj.end());
    };

    if (threads <= 1 || n < 64) {
        for (std::size_t i = 0; i < n; ++i) process(i);
    } else {
        const unsigned workers = std::min<unsigned>(threads, std::thread::hardware_concurrency());
        std::vector<std::thread> pool;
        std::exception_ptr err;
        std::mutex err_mutex;
        for (unsigned w = 0; w < workers; ++w) {
            pool.emplace_back([&, w] {
                try {
                    for (std::size_t i = w; i < n; i += workers) process(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(err_mutex);
                    if (!err) err = std::current_exception();
                }
            });
        }
        for (auto& t : pool) t.join();
        if (err) std::rethrow_exception(err);
    }
    return map;
}

CoverageReport validate_outer(const MultivaluedMap& map, const Grid& grid,
                              const PointMapFn& point_map, std::size_t n_samples) {
    CoverageReport report;
    report.per_cell_coverage.assign(grid.size(), 1.0);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const Box cell = grid.cell_bounds(grid.leaves()[i]);
        std::mt19937_64 rng(0x5eedULL ^ (static_cast<std::uint64_t>(i) * 0x9e3779b97f4a7c15ULL));
        std::size_t covered = 0, in_domain = 0;
        for (std::size_t s = 0; s < n_samples; ++s) {
            std::vector<double> x(cell.dim());
            for (std::size_t a = 0; a < cell.dim(); ++a) {
                const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
                x[a] = cell.lower[a] + u * cell.extent(a);
            }
            const auto y = point_map(x);
            ++report.total_samples;
            if (!grid.domain().contains(y)) {
                ++report.out_of_domain;
                if (!map.clipped[i]) ++report.out_of_domain_unflagged;
                continue;
            }
            ++in_domain;
            const auto target = grid.position_of(grid.locate(y));
            if (map.has_edge(static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(target)))
                ++covered;
            else
                ++report.violations;
        }
        report.per_cell_coverage[i] =
            in_domain == 0 ? 1.0 : static_cast<double>(covered) / static_cast<double>(in_domain);
    }
    return report;
}

} // namespace morsekit
