#include "morsekit/systems.hpp"

#include <algorithm>
#include <cmath>

namespace morsekit {

double double_well_step(double x) {
    // x - 0.2 * d/dx (x^2 - 1)^2 = x - 0.8 x (x^2 - 1)
    return x * (1.8 - 0.8 * x * x);
}

namespace {

// Exact image of [lo, hi] under the double-well step: the map has interior
// critical points at +-sqrt(0.75), so the extrema sit at endpoints or there.
std::pair<double, double> double_well_interval(double lo, double hi) {
    const double crit = std::sqrt(0.75);
    double mn = std::min(double_well_step(lo), double_well_step(hi));
    double mx = std::max(double_well_step(lo), double_well_step(hi));
    for (double c : {-crit, crit}) {
        if (lo <= c && c <= hi) {
            const double v = double_well_step(c);
            mn = std::min(mn, v);
            mx = std::max(mx, v);
        }
    }
    return {mn, mx};
}

} // namespace

AnalyticSystem contraction_system() {
    AnalyticSystem sys;
    sys.name = "contraction";
    sys.default_domain = Box{{-1.0}, {1.0}};
    sys.default_initial_depth = {3};
    sys.box_image = [](const Box& b) {
        Box out = b;
        for (std::size_t a = 0; a < b.dim(); ++a) {
            out.lower[a] = 0.5 * b.lower[a];
            out.upper[a] = 0.5 * b.upper[a];
        }
        return out;
    };
    sys.point_map = [](const std::vector<double>& x) {
        std::vector<double> y(x.size());
        for (std::size_t a = 0; a < x.size(); ++a) y[a] = 0.5 * x[a];
        return y;
    };
    return sys;
}

AnalyticSystem double_well_system() {
    AnalyticSystem sys;
    sys.name = "double_well";
    sys.default_domain = Box{{-1.6}, {1.6}};
    sys.default_initial_depth = {4};
    sys.box_image = [](const Box& b) {
        Box out;
        out.lower.resize(b.dim());
        out.upper.resize(b.dim());
        for (std::size_t a = 0; a < b.dim(); ++a) {
            auto [mn, mx] = double_well_interval(b.lower[a], b.upper[a]);
            out.lower[a] = mn;
            out.upper[a] = mx;
        }
        return out;
    };
    sys.point_map = [](const std::vector<double>& x) {
        std::vector<double> y(x.size());
        for (std::size_t a = 0; a < x.size(); ++a) y[a] = double_well_step(x[a]);
        return y;
    };
    return sys;
}

AnalyticSystem saddle_system() {
    AnalyticSystem sys;
    sys.name = "saddle";
    sys.default_domain = Box{{-1.0, -1.6}, {1.0, 1.6}};
    sys.default_initial_depth = {3, 3};
    sys.box_image = [](const Box& b) {
        Box out;
        out.lower.resize(2);
        out.upper.resize(2);
        out.lower[0] = 0.5 * b.lower[0];
        out.upper[0] = 0.5 * b.upper[0];
        auto [mn, mx] = double_well_interval(b.lower[1], b.upper[1]);
        out.lower[1] = mn;
        out.upper[1] = mx;
        return out;
    };
    sys.point_map = [](const std::vector<double>& x) {
        return std::vector<double>{0.5 * x[0], double_well_step(x[1])};
    };
    return sys;
}

AnalyticSystem analytic_system(const std::string& name) {
    if (name == "contraction") return contraction_system();
    if (name == "double_well") return double_well_system();
    if (name == "saddle") return saddle_system();
    throw validation_error("unknown analytic system: " + name);
}

std::vector<std::string> analytic_system_names() {
    return {"contraction", "double_well", "saddle"};
}

} // namespace morsekit
