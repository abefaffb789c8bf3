#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "morsekit/dynamics.hpp"

namespace morsekit {

/// Strongly connected components of the map's digraph. Each component is a
/// sorted vertex list; components are ordered by their smallest vertex.
std::vector<std::vector<std::uint32_t>> strongly_connected_components(const MultivaluedMap& map);

/// The map's condensation: one vertex per SCC, acyclic edges, and a recurrent
/// flag marking components that contain at least one edge (self-loops count).
struct Condensation {
    std::vector<std::vector<std::uint32_t>> components; // canonical order
    std::vector<std::uint32_t> component_of;            // cell -> component
    std::vector<std::vector<std::uint32_t>> edges;      // sorted, no self-edges
    std::vector<bool> recurrent;

    std::size_t size() const { return components.size(); }
};

Condensation condensation(const MultivaluedMap& map);

/// Poset of recurrent sets. Distinct Morse nodes must be separated by
/// non-recurrent connecting dynamics, so recurrent components joined by a
/// direct map edge are grouped into one node (closed under the mutual
/// reachability this induces, keeping the order antisymmetric). Node ids
/// follow canonical order (smallest contained cell first). p <= q iff q
/// reaches p, so minimal nodes are the attractor-like sinks.
struct MorseGraph {
    std::vector<std::vector<std::uint32_t>> node_components; // node -> sorted components
    std::vector<std::vector<std::uint32_t>> node_cells;      // sorted cell positions
    std::vector<std::vector<bool>> leq;                      // leq[p][q]: p <= q
    std::vector<bool> minimal;

    std::size_t size() const { return node_components.size(); }
    /// Covering relations q -> p (q covers p), for DOT export.
    std::vector<std::pair<std::uint32_t, std::uint32_t>> cover_edges() const;
};

MorseGraph morse_graph(const Condensation& cond);

/// Order-preserving map from condensation components onto Morse nodes that
/// fixes every Morse node. Fibers over minimal nodes are basins of attraction.
struct Retraction {
    std::vector<std::uint32_t> node_of_component;
};

/// Returns the retraction if one exists, std::nullopt otherwise (absence
/// signals dynamics not well resolved at this grid resolution). A greedy
/// least-upper-bound pass handles the common case; a backtracking search
/// settles instances where no unique LUB exists.
std::optional<Retraction> order_retraction(const Condensation& cond, const MorseGraph& mg);

/// Checks sigma: fixes Morse nodes and preserves order across every
/// condensation edge (hence, by transitivity, every comparable pair).
bool verify_retraction(const Condensation& cond, const MorseGraph& mg, const Retraction& sigma);

enum class CellRole : std::uint8_t { Morse, Basin, Separatrix };

struct BasinPartition {
    std::vector<std::uint32_t> node_of_cell;
    std::vector<CellRole> role_of_cell;
};

/// Labels every cell with its retracted Morse node. Non-recurrent cells
/// assigned to minimal nodes form basins; those assigned to non-minimal nodes
/// are separatrix-associated.
BasinPartition basins(const Condensation& cond, const MorseGraph& mg, const Retraction& sigma);

/// Forward-reachability closure A(M) of a Morse node's cells.
std::vector<std::uint32_t> reachable_region(const MultivaluedMap& map, const MorseGraph& mg,
                                            std::size_t node);

/// Cell sets closed under union and intersection, ordered by inclusion.
/// Elements are stored as bitsets over cell positions, in a deterministic
/// order (popcount, then lexicographic).
struct RegionLattice {
    std::size_t universe_size = 0;
    std::vector<std::vector<std::uint64_t>> elements; // bitsets
    std::vector<std::size_t> generator_positions;

    bool subset(std::size_t a, std::size_t b) const; // elements[a] subseteq elements[b]
    std::size_t cardinality(std::size_t a) const;
};

RegionLattice region_lattice(const std::vector<std::vector<std::uint32_t>>& regions,
                             std::size_t universe_size);

/// Join-irreducible elements (exactly one immediate predecessor under
/// inclusion) with the induced order.
struct JoinIrreduciblePoset {
    std::vector<std::size_t> elements;   // positions into the lattice
    std::vector<std::vector<bool>> leq;  // induced inclusion order
};

JoinIrreduciblePoset join_irreducibles(const RegionLattice& lat);

/// True when an order-isomorphism exists between the two finite posets.
bool posets_isomorphic(const std::vector<std::vector<bool>>& leq_a,
                       const std::vector<std::vector<bool>>& leq_b);

struct PipelineResult {
    Grid grid;
    MultivaluedMap map;
    Condensation cond;
    MorseGraph mg;
    std::optional<Retraction> retraction;
    bool truncated = false;   // leaf cap stopped refinement early
    int rounds = 0;           // refinement rounds performed
    std::vector<double> morse_volume_per_round;
};

/// Iterates build_outer_map -> condensation -> morse_graph, refining exactly
/// the Morse-node cells until every Morse cell reaches max_depth on axis 0 or
/// the leaf cap stops it.
PipelineResult adaptive_morse_pipeline(Grid grid, const BoxImageFn& box_image,
                                       std::uint8_t max_depth, unsigned threads = 1);

} // namespace morsekit
