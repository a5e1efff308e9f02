#pragma once

/// Conservative remap of a cell-average density through a monotone map.
///
/// Each cell is reconstructed as a limited linear profile, pushed through the map
/// (linearized across the cell) and integrated over the target cells. Mass that lands
/// outside the grid is dropped. The result depends linearly on the cell values and
/// slopes, so the overlap weights are computed once per map and reused for every row.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <sstream>
#include <vector>

#include "fca/error.hpp"
#include "fca/grid.hpp"

namespace fca {

/// Monotonized-central slope from the two one-sided differences (zero at extrema).
inline double mc_limited(double dm, double dp, double h) {
    const double mag = std::min(std::min(2.0 * std::fabs(dm), 2.0 * std::fabs(dp)), 0.5 * std::fabs(dm + dp));
    return dm * dp > 0.0 ? std::copysign(mag, dm) / h : 0.0;
}

/// Monotonized-central slopes of cell averages, with zero density outside the grid.
inline void limited_slopes(std::span<const double> v, double h, std::span<double> slope) {
    const std::size_t m = v.size();
    if (m == 0) return;
    if (m == 1) {
        slope[0] = 0.0;
        return;
    }
    slope[0] = mc_limited(v[0], v[1] - v[0], h);
    for (std::size_t j = 1; j + 1 < m; ++j) slope[j] = mc_limited(v[j] - v[j - 1], v[j + 1] - v[j], h);
    slope[m - 1] = mc_limited(v[m - 1] - v[m - 2], -v[m - 1], h);
}

/// Overlap weights of one remap: out[dst] += w_value * v[src] + w_slope * slope[src].
struct RemapPlan {
    struct Entry {
        std::uint32_t src;
        std::uint32_t dst;
        double w_value;
        double w_slope;
    };

    std::size_t m = 0;
    double h = 0.0;
    std::vector<Entry> entries;
    std::vector<double> jacobian;  ///< per source cell: cell width / image width

    /// out = remap(v); `slope` is scratch of length m.
    void apply(std::span<const double> v, std::span<double> slope, std::span<double> out) const {
        limited_slopes(v, h, slope);
        std::fill(out.begin(), out.end(), 0.0);
        for (const auto& e : entries) out[e.dst] += e.w_value * v[e.src] + e.w_slope * slope[e.src];
    }

    std::vector<double> apply(std::span<const double> v) const {
        std::vector<double> slope(m), out(m);
        apply(v, slope, out);
        return out;
    }
};

namespace detail {

/// Deposits the image of source piece [a, b] of cell `src` (node zc) onto the grid.
inline void deposit_piece(const SpatialGrid& g, std::uint32_t src, double zc, double a, double b, double ya, double yb,
                          std::vector<RemapPlan::Entry>& out) {
    const double lo_grid = g.lower();
    const double hi_grid = g.upper();
    const double lo = std::max(ya, lo_grid);
    const double hi = std::min(yb, hi_grid);
    if (!(hi > lo)) return;
    const double h = g.dz;
    const double width = yb - ya;
    const double scale = (b - a) / width / h;
    auto first = static_cast<std::int64_t>(std::floor((lo - lo_grid) / h));
    first = std::clamp<std::int64_t>(first, 0, static_cast<std::int64_t>(g.m) - 1);
    for (auto t = static_cast<std::size_t>(first); t < g.m; ++t) {
        const double c_lo = g.edge(t);
        const double c_hi = g.edge(t + 1);
        if (c_lo >= hi) break;
        const double o_lo = std::max(lo, c_lo);
        const double o_hi = std::min(hi, c_hi);
        if (!(o_hi > o_lo)) continue;
        const double theta = (0.5 * (o_lo + o_hi) - ya) / width;
        const double wv = (o_hi - o_lo) * scale;
        out.push_back({src, static_cast<std::uint32_t>(t), wv, wv * ((a - zc) + (b - a) * theta)});
    }
}

}  // namespace detail

/// Builds the remap plan of z -> f(z, side) on `grid`.
///
/// `f` must be non-decreasing on every piece; pieces are the cells, split at the given
/// branch points. `side` is -1 left of the first branch point, +1 right of it and 0 when
/// there is none, so maps with a jump can be evaluated one-sidedly at the branch.
/// Pieces whose image has zero width are deposited as point masses.
template <class Map>
RemapPlan build_remap_plan(const SpatialGrid& grid, Map&& f, std::span<const double> branch_points = {}) {
    const std::size_t m = grid.m;
    RemapPlan plan;
    plan.m = m;
    plan.h = grid.dz;
    plan.entries.reserve(3 * m);
    plan.jacobian.resize(m);
    if (branch_points.size() > 1) throw std::invalid_argument("at most one branch point is supported");
    const bool has_branch = !branch_points.empty();
    const double bp = has_branch ? branch_points[0] : 0.0;
    auto side_of = [&](double z) { return has_branch ? (z < bp ? -1 : 1) : 0; };

    std::vector<double> edge_img(m + 1);
    for (std::size_t k = 0; k <= m; ++k) edge_img[k] = f(grid.edge(k), side_of(grid.edge(k)));

    auto piece = [&](std::uint32_t src, double zc, double a, double b, double ya, double yb) {
        if (yb < ya) {
            std::ostringstream os;
            os.precision(10);
            os << "non-monotone remap on [" << a << ", " << b << "] (images " << ya << ", " << yb
               << "); reduce dtau";
            throw NumericalError(os.str());
        }
        if (yb - ya > 1e-12 * grid.dz) {
            detail::deposit_piece(grid, src, zc, a, b, ya, yb, plan.entries);
        } else if (ya >= grid.lower() && ya < grid.upper()) {
            // Collapsed piece: all of its mass goes to the cell containing the image point.
            auto t = static_cast<std::size_t>(std::floor((ya - grid.lower()) / grid.dz));
            t = std::min(t, m - 1);
            const double wv = (b - a) / grid.dz;
            plan.entries.push_back({src, static_cast<std::uint32_t>(t), wv, wv * (0.5 * (a + b) - zc)});
        }
        return yb - ya;
    };

    for (std::size_t j = 0; j < m; ++j) {
        const double a = grid.edge(j);
        const double b = grid.edge(j + 1);
        const double zc = grid.node(j);
        const auto src = static_cast<std::uint32_t>(j);
        if (has_branch && bp > a && bp < b) {
            const double y_left = f(bp, -1);
            const double y_right = f(bp, 1);
            const double w = piece(src, zc, a, bp, edge_img[j], y_left) + piece(src, zc, bp, b, y_right, edge_img[j + 1]);
            plan.jacobian[j] = w > 0.0 ? (b - a) / w : std::numeric_limits<double>::infinity();
        } else {
            const double w = piece(src, zc, a, b, edge_img[j], edge_img[j + 1]);
            plan.jacobian[j] = w > 0.0 ? (b - a) / w : std::numeric_limits<double>::infinity();
        }
    }
    return plan;
}

/// Solves f(z) = xi for z in [lo, hi] (f increasing, f(lo) <= xi <= f(hi)) by
/// Newton steps safeguarded with bisection.
template <class Map>
double solve_preimage(Map&& f, double xi, double lo, double hi, double tol = 1e-13, int max_iter = 200) {
    double flo = f(lo) - xi;
    double fhi = f(hi) - xi;
    if (flo > 0.0 || fhi < 0.0) throw NumericalError("preimage not bracketed");
    double z = 0.5 * (lo + hi);
    for (int it = 0; it < max_iter; ++it) {
        const double fz = f(z) - xi;
        if (fz == 0.0) return z;
        if (fz < 0.0) lo = z; else hi = z;
        if (hi - lo <= tol * std::max(1.0, std::fabs(z))) break;
        const double dh = 1e-7 * std::max(1.0, std::fabs(z));
        const double slope = (f(z + dh) - f(z - dh)) / (2.0 * dh);
        double next = slope > 0.0 ? z - fz / slope : 0.5 * (lo + hi);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (std::fabs(next - z) <= tol * std::max(1.0, std::fabs(z))) return next;
        z = next;
    }
    return 0.5 * (lo + hi);
}

}  // namespace fca
