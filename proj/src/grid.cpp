#include "morsekit/grid.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace morsekit {

double Box::volume() const {
    double v = 1.0;
    for (std::size_t i = 0; i < dim(); ++i) v *= extent(i);
    return v;
}

bool Box::contains(const std::vector<double>& point) const {
    if (point.size() != dim()) return false;
    for (std::size_t i = 0; i < dim(); ++i) {
        if (point[i] < lower[i] || point[i] > upper[i]) return false;
    }
    return true;
}

bool Box::intersects(const Box& other) const {
    for (std::size_t i = 0; i < dim(); ++i) {
        if (lower[i] > other.upper[i] || upper[i] < other.lower[i]) return false;
    }
    return true;
}

std::vector<double> Box::center() const {
    std::vector<double> c(dim());
    for (std::size_t i = 0; i < dim(); ++i) c[i] = 0.5 * (lower[i] + upper[i]);
    return c;
}

void Box::validate() const {
    if (lower.empty() || lower.size() != upper.size())
        throw validation_error("Box: dimension must be >= 1 and lower/upper must match");
    for (std::size_t i = 0; i < dim(); ++i) {
        if (!(lower[i] < upper[i]))
            throw validation_error("Box: lower must be strictly below upper on every axis");
        if (!std::isfinite(lower[i]) || !std::isfinite(upper[i]))
            throw validation_error("Box: bounds must be finite");
    }
}

std::size_t CellIdHash::operator()(const CellId& c) const {
    std::size_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](std::uint64_t v) {
        h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    };
    for (auto d : c.depth) mix(d);
    for (auto i : c.index) mix(i);
    return h;
}

bool cell_order_less(const CellId& a, const CellId& b) {
    // Tree pre-order.  Refinement deepens every axis together, so for two
    // leaves the depth difference is the same on all axes; truncate the deeper
    // cell's indices to the shallower depth and compare branch bits level by
    // level, axis-major.  Equal truncated prefixes mean one cell contains the
    // other; ordering the descendant first keeps children of a refined cell in
    // their parent's slot.
    const std::size_t d = a.depth.size();
    const int delta = static_cast<int>(a.depth[0]) - static_cast<int>(b.depth[0]);
    std::uint8_t max_level = 0;
    for (std::size_t i = 0; i < d; ++i)
        max_level = std::max(max_level, std::min(a.depth[i], b.depth[i]));
    for (std::uint8_t level = 0; level < max_level; ++level) {
        for (std::size_t i = 0; i < d; ++i) {
            const std::uint8_t m = std::min(a.depth[i], b.depth[i]);
            if (level >= m) continue;
            const std::uint64_t ia = a.index[i] >> (delta > 0 ? delta : 0);
            const std::uint64_t ib = b.index[i] >> (delta < 0 ? -delta : 0);
            const std::uint64_t ba = (ia >> (m - 1 - level)) & 1;
            const std::uint64_t bb = (ib >> (m - 1 - level)) & 1;
            if (ba != bb) return ba < bb;
        }
    }
    return delta > 0;
}

Grid::Grid(Box domain, std::vector<std::uint8_t> initial_depth, std::size_t leaf_cap)
    : domain_(std::move(domain)), initial_depth_(std::move(initial_depth)), leaf_cap_(leaf_cap) {
    domain_.validate();
    if (initial_depth_.size() != domain_.dim())
        throw validation_error("make_grid: initial_depth size must match domain dimension");
    double count = 1.0;
    for (auto d : initial_depth_) {
        if (d > 40) throw validation_error("make_grid: per-axis depth too large");
        count *= static_cast<double>(std::uint64_t{1} << d);
    }
    if (count > static_cast<double>(leaf_cap_))
        throw capacity_error("make_grid: initial leaf count exceeds cap");

    const std::size_t dim = domain_.dim();
    std::vector<std::uint64_t> n(dim);
    std::uint64_t total = 1;
    for (std::size_t i = 0; i < dim; ++i) {
        n[i] = std::uint64_t{1} << initial_depth_[i];
        total *= n[i];
    }
    leaves_.reserve(total);
    for (std::uint64_t lin = 0; lin < total; ++lin) {
        CellId cell;
        cell.depth = initial_depth_;
        cell.index.resize(dim);
        std::uint64_t rem = lin;
        for (std::size_t i = dim; i-- > 0;) {
            cell.index[i] = rem % n[i];
            rem /= n[i];
        }
        leaves_.push_back(std::move(cell));
    }
    std::sort(leaves_.begin(), leaves_.end(), cell_order_less);
    rebuild_index();
}

void Grid::rebuild_index() {
    pos_.clear();
    pos_.reserve(leaves_.size());
    for (std::size_t i = 0; i < leaves_.size(); ++i) pos_.emplace(leaves_[i], i);
}

std::size_t Grid::position_of(const CellId& cell) const {
    auto it = pos_.find(cell);
    if (it == pos_.end()) throw validation_error("position_of: unknown leaf cell");
    return it->second;
}

CellId Grid::locate(const std::vector<double>& point) const {
    if (!domain_.contains(point))
        throw validation_error("locate: point outside domain");
    const std::size_t dim = domain_.dim();
    CellId cell;
    cell.depth.resize(dim);
    cell.index.resize(dim);
    for (std::uint8_t r = 0; r <= max_round_; ++r) {
        for (std::size_t i = 0; i < dim; ++i) {
            const std::uint8_t d = static_cast<std::uint8_t>(initial_depth_[i] + r);
            const std::uint64_t n = std::uint64_t{1} << d;
            const double t = (point[i] - domain_.lower[i]) / domain_.extent(i);
            auto k = static_cast<std::int64_t>(std::floor(t * static_cast<double>(n)));
            if (k < 0) k = 0;
            if (k >= static_cast<std::int64_t>(n)) k = static_cast<std::int64_t>(n) - 1;
            cell.depth[i] = d;
            cell.index[i] = static_cast<std::uint64_t>(k);
        }
        if (pos_.count(cell)) return cell;
    }
    throw validation_error("locate: no leaf contains the point (corrupt grid)");
}

Box Grid::cell_bounds(const CellId& cell) const {
    if (!is_leaf(cell)) throw validation_error("cell_bounds: unknown leaf cell");
    const std::size_t dim = domain_.dim();
    Box b;
    b.lower.resize(dim);
    b.upper.resize(dim);
    for (std::size_t i = 0; i < dim; ++i) {
        const std::uint64_t n = std::uint64_t{1} << cell.depth[i];
        const double w = domain_.extent(i) / static_cast<double>(n);
        b.lower[i] = domain_.lower[i] + w * static_cast<double>(cell.index[i]);
        b.upper[i] = domain_.lower[i] + w * static_cast<double>(cell.index[i] + 1);
    }
    return b;
}

void Grid::refine(const std::vector<CellId>& cells) {
    if (cells.empty()) return;
    const std::size_t dim = domain_.dim();
    const std::size_t children = std::size_t{1} << dim;

    std::vector<std::size_t> positions;
    positions.reserve(cells.size());
    for (const auto& c : cells) positions.push_back(position_of(c));
    std::sort(positions.begin(), positions.end());
    positions.erase(std::unique(positions.begin(), positions.end()), positions.end());

    const std::size_t new_count = leaves_.size() + positions.size() * (children - 1);
    if (new_count > leaf_cap_)
        throw capacity_error("refine: leaf count would exceed cap");

    std::vector<CellId> next;
    next.reserve(new_count);
    std::size_t p = 0;
    for (std::size_t i = 0; i < leaves_.size(); ++i) {
        if (p < positions.size() && positions[p] == i) {
            ++p;
            const CellId& parent = leaves_[i];
            for (std::size_t mask = 0; mask < children; ++mask) {
                CellId child;
                child.depth.resize(dim);
                child.index.resize(dim);
                for (std::size_t a = 0; a < dim; ++a) {
                    child.depth[a] = static_cast<std::uint8_t>(parent.depth[a] + 1);
                    child.index[a] = parent.index[a] * 2 + ((mask >> (dim - 1 - a)) & 1);
                }
                if (child.depth[0] > initial_depth_[0] + max_round_)
                    max_round_ = static_cast<std::uint8_t>(child.depth[0] - initial_depth_[0]);
                next.push_back(std::move(child));
            }
        } else {
            next.push_back(leaves_[i]);
        }
    }
    std::sort(next.begin(), next.end(), cell_order_less);
    leaves_ = std::move(next);
    rebuild_index();
}

} // namespace morsekit
