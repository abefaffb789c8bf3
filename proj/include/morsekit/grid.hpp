#pragma once

#include <cstdint>
#include <unordered_map>
#include <vector>

#include "morsekit/errors.hpp"

namespace morsekit {

/// Axis-aligned box with strictly positive extent on every axis.
struct Box {
    std::vector<double> lower;
    std::vector<double> upper;

    std::size_t dim() const { return lower.size(); }
    double extent(std::size_t axis) const { return upper[axis] - lower[axis]; }
    double volume() const;
    bool contains(const std::vector<double>& point) const; // closed membership
    bool intersects(const Box& other) const;               // closed boxes, touching counts
    std::vector<double> center() const;

    // Throws validation_error unless lower[i] < upper[i] for all i and dim >= 1.
    void validate() const;
};

/// Identifies one leaf cell: per-axis subdivision depth and per-axis index,
/// index[i] < 2^depth[i].
struct CellId {
    std::vector<std::uint8_t> depth;
    std::vector<std::uint64_t> index;

    bool operator==(const CellId& o) const { return depth == o.depth && index == o.index; }
};

struct CellIdHash {
    std::size_t operator()(const CellId& c) const;
};

/// Spatial (tree pre-order) comparison: leaves sorted this way list a refined
/// cell's children exactly where the parent used to sit.
bool cell_order_less(const CellId& a, const CellId& b);

/// Multiscale cubical decomposition of a rectangular domain. Leaves tile the
/// domain; cells are half-open [lo, hi) with the domain's maximal face closed.
/// Refinement bisects every axis simultaneously (2^d children).
class Grid {
public:
    static constexpr std::size_t kDefaultLeafCap = std::size_t{1} << 20;

    Grid(Box domain, std::vector<std::uint8_t> initial_depth,
         std::size_t leaf_cap = kDefaultLeafCap);

    const Box& domain() const { return domain_; }
    std::size_t dim() const { return domain_.dim(); }
    std::size_t leaf_cap() const { return leaf_cap_; }

    /// Leaves in canonical order. Downstream graph code indexes cells by
    /// position in this list.
    const std::vector<CellId>& leaves() const { return leaves_; }
    std::size_t size() const { return leaves_.size(); }

    /// Position of a leaf in the canonical order. Throws validation_error for
    /// unknown cells.
    std::size_t position_of(const CellId& cell) const;
    bool is_leaf(const CellId& cell) const { return pos_.count(cell) != 0; }

    /// Leaf containing the point under the half-open convention. Throws
    /// validation_error if the point lies outside the closed domain.
    CellId locate(const std::vector<double>& point) const;

    Box cell_bounds(const CellId& cell) const;

    /// Replace each listed leaf by its 2^d children. Throws validation_error
    /// if any cell is not a current leaf, capacity_error if the result would
    /// exceed the leaf cap (the grid is left unchanged on error).
    void refine(const std::vector<CellId>& cells);

private:
    Box domain_;
    std::vector<std::uint8_t> initial_depth_;
    std::size_t leaf_cap_;
    std::uint8_t max_round_ = 0; // extra subdivision rounds beyond initial depth
    std::vector<CellId> leaves_;
    std::unordered_map<CellId, std::size_t, CellIdHash> pos_;

    void rebuild_index();
};

} // namespace morsekit
