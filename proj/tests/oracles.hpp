#pragma once

// Independent reference implementations used to check the library's results.
// Everything here is deliberately naive (O(n^3) reachability, exhaustive
// search) so it can be trusted by inspection.

#include <cstdint>
#include <vector>

#include "morsekit/dynamics.hpp"
#include "morsekit/morse.hpp"

namespace oracles {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ull;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

inline double uniform01(std::uint64_t& state) {
    return static_cast<double>(splitmix64(state) >> 11) * 0x1.0p-53;
}

inline morsekit::MultivaluedMap random_digraph(std::size_t n, double density,
                                               std::uint64_t seed) {
    morsekit::MultivaluedMap map;
    map.num_cells = n;
    map.adjacency.assign(n, {});
    map.clipped.assign(n, false);
    std::uint64_t state = seed;
    for (std::uint32_t u = 0; u < n; ++u)
        for (std::uint32_t v = 0; v < n; ++v)
            if (uniform01(state) < density) map.adjacency[u].push_back(v);
    return map;
}

/// Floyd-Warshall style reachability closure.
inline std::vector<std::vector<bool>> reachability(const morsekit::MultivaluedMap& map) {
    const std::size_t n = map.num_cells;
    std::vector<std::vector<bool>> reach(n, std::vector<bool>(n, false));
    for (std::size_t u = 0; u < n; ++u)
        for (auto v : map.adjacency[u]) reach[u][v] = true;
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t i = 0; i < n; ++i)
            if (reach[i][k])
                for (std::size_t j = 0; j < n; ++j)
                    if (reach[k][j]) reach[i][j] = true;
    return reach;
}

/// SCC partition by mutual reachability, components sorted internally and by
/// smallest vertex — the same canonical form the library promises.
inline std::vector<std::vector<std::uint32_t>> brute_force_sccs(
    const morsekit::MultivaluedMap& map) {
    const std::size_t n = map.num_cells;
    const auto reach = reachability(map);
    std::vector<bool> done(n, false);
    std::vector<std::vector<std::uint32_t>> comps;
    for (std::uint32_t u = 0; u < n; ++u) {
        if (done[u]) continue;
        std::vector<std::uint32_t> comp{u};
        done[u] = true;
        for (std::uint32_t v = u + 1; v < n; ++v) {
            if (!done[v] && reach[u][v] && reach[v][u]) {
                comp.push_back(v);
                done[v] = true;
            }
        }
        comps.push_back(std::move(comp));
    }
    return comps;
}

/// Reachability between condensation components (u can reach v via DAG edges).
inline std::vector<std::vector<bool>> component_reachability(const morsekit::Condensation& c) {
    const std::size_t n = c.size();
    std::vector<std::vector<bool>> reach(n, std::vector<bool>(n, false));
    for (std::size_t u = 0; u < n; ++u) {
        reach[u][u] = true;
        for (auto v : c.edges[u]) reach[u][v] = true;
    }
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t i = 0; i < n; ++i)
            if (reach[i][k])
                for (std::size_t j = 0; j < n; ++j)
                    if (reach[k][j]) reach[i][j] = true;
    return reach;
}

/// True when a valid order retraction exists, decided by exhaustive
/// enumeration of every assignment of non-recurrent components to Morse
/// nodes. Validity is checked from first principles: recurrent components
/// map to their own node, and u ~> v in the condensation implies
/// sigma(v) <= sigma(u) in the Morse order.
inline bool retraction_exists_exhaustive(const morsekit::Condensation& cond,
                                         const morsekit::MorseGraph& mg) {
    const std::size_t n = cond.size();
    if (n == 0) return true;
    if (mg.size() == 0) return false;
    std::vector<std::int32_t> fixed(n, -1);
    for (std::uint32_t m = 0; m < mg.size(); ++m)
        for (auto c : mg.node_components[m]) fixed[c] = static_cast<std::int32_t>(m);
    const auto reach = component_reachability(cond);

    std::vector<std::size_t> free_comps;
    for (std::size_t c = 0; c < n; ++c)
        if (fixed[c] < 0) free_comps.push_back(c);

    std::vector<std::uint32_t> sigma(n, 0);
    for (std::size_t c = 0; c < n; ++c)
        if (fixed[c] >= 0) sigma[c] = static_cast<std::uint32_t>(fixed[c]);

    const auto valid = [&]() {
        for (std::size_t u = 0; u < n; ++u)
            for (std::size_t v = 0; v < n; ++v)
                if (reach[u][v] && !mg.leq[sigma[v]][sigma[u]]) return false;
        return true;
    };

    // Odometer over mg.size()^free_comps.size() assignments.
    std::vector<std::size_t> digits(free_comps.size(), 0);
    while (true) {
        for (std::size_t i = 0; i < free_comps.size(); ++i)
            sigma[free_comps[i]] = static_cast<std::uint32_t>(digits[i]);
        if (valid()) return true;
        std::size_t i = 0;
        for (; i < digits.size(); ++i) {
            if (++digits[i] < mg.size()) break;
            digits[i] = 0;
        }
        if (i == digits.size()) return false;
        if (digits.empty()) return false;
    }
}

/// Iterate a point map and report the final position.
inline double simulate_1d(double (*step)(double), double x0, int iters) {
    double x = x0;
    for (int i = 0; i < iters; ++i) x = step(x);
    return x;
}

} // namespace oracles
