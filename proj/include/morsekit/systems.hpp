#pragma once

#include <string>
#include <vector>

#include "morsekit/dynamics.hpp"

namespace morsekit {

/// Analytic iterated map with exact interval-arithmetic box images, used to
/// exercise the combinatorial machinery without any training or surrogate.
struct AnalyticSystem {
    std::string name;
    Box default_domain;
    std::vector<std::uint8_t> default_initial_depth;
    BoxImageFn box_image; // exact image of a box (outer approximation is tight)
    PointMapFn point_map;
};

/// f(x) = x/2 on [-1, 1]: one attracting fixed point at the origin.
AnalyticSystem contraction_system();

/// Gradient step x -> x - 0.2 * V'(x) with V(x) = (x^2 - 1)^2 on [-1.6, 1.6]:
/// stable fixed points at +-1, an unstable one at 0.
AnalyticSystem double_well_system();

/// 2D product of the contraction (axis 0) and the double-well step (axis 1).
AnalyticSystem saddle_system();

/// Lookup by name ("contraction", "double_well", "saddle").
AnalyticSystem analytic_system(const std::string& name);

std::vector<std::string> analytic_system_names();

/// The double-well point update, exposed for trajectory oracles.
double double_well_step(double x);

} // namespace morsekit
