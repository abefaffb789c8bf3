#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "morsekit/grid.hpp"

namespace morsekit {

using BoxImageFn = std::function<Box(const Box&)>;
using PointMapFn = std::function<std::vector<double>(const std::vector<double>&)>;

/// Directed graph on grid leaves: edge src -> dst when the (clipped) image box
/// of src's cell meets dst's closed cell box. Cells are indexed by position in
/// the grid's canonical leaf order.
struct MultivaluedMap {
    std::size_t num_cells = 0;
    std::vector<std::vector<std::uint32_t>> adjacency; // sorted, duplicate-free
    std::vector<bool> clipped; // image box extended outside the domain

    bool has_edge(std::uint32_t src, std::uint32_t dst) const;
    std::size_t edge_count() const;
};

/// Builds the outer approximation of box_image over the grid. Image boxes are
/// clipped to the domain (flagged per cell); closed-box intersection counts
/// touching, so edges over-approximate rather than miss transitions.
/// Throws validation_error if box_image returns an inverted box.
MultivaluedMap build_outer_map(const Grid& grid, const BoxImageFn& box_image,
                               unsigned threads = 1);

struct CoverageReport {
    std::size_t total_samples = 0;
    std::size_t violations = 0;      // f(x) landed in a cell with no edge from x's cell
    std::size_t out_of_domain = 0;   // f(x) left the domain
    std::size_t out_of_domain_unflagged = 0; // ... from a cell not marked clipped
    std::vector<double> per_cell_coverage;   // fraction of in-domain samples covered
    double violation_fraction() const;
};

/// Samples n_samples points per cell (deterministic per-cell RNG) and checks
/// that locate(point_map(x)) is among the cell's targets.
CoverageReport validate_outer(const MultivaluedMap& map, const Grid& grid,
                              const PointMapFn& point_map, std::size_t n_samples);

} // namespace morsekit
