#pragma once

/// Joint density of the Lamperti state Z and a path functional U.
///
/// Each step convolves every u-row along z (the one-dimensional step) and then moves
/// every z-column along u by the recursion u^{i+1} = a_i u^i + b_i(z^{i+1}).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fca/error.hpp"
#include "fca/grid.hpp"
#include "fca/kernel.hpp"
#include "fca/models.hpp"
#include "fca/propagate.hpp"
#include "fca/remap.hpp"

namespace fca {

/// m_u x m_z matrix of p(u, z); row j is the u node u_j.
struct JointDensity {
    SpatialGrid z_grid;
    UGrid u_grid;
    std::vector<double> values;
    double tau = 0.0;
    std::size_t step = 0;
    double mass = 0.0;  ///< du dz sum(values)

    std::span<double> row(std::size_t j) { return {values.data() + j * z_grid.m, z_grid.m}; }
    std::span<const double> row(std::size_t j) const { return {values.data() + j * z_grid.m, z_grid.m}; }
    double at(std::size_t j, std::size_t k) const { return values[j * z_grid.m + k]; }
    void update_mass() { mass = u_grid.dz * z_grid.dz * std::accumulate(values.begin(), values.end(), 0.0); }
};

enum class RecursionKind { identity, asian, vnb };

/// The update u^{i+1} = scale(i) u^i + shift(i, z^{i+1}) of a path functional.
///
/// asian: U is the running discrete average (1/n) sum_j s_j X_j with s_j = j dtau/2 + sqrt(t0),
///        scale = i/(i+1), shift = (dtau/2 + sqrt(t0)/(i+1)) X(z, tau^{i+1}).
/// vnb:   U = sum_j dtau Omega_j^2, scale = 1, shift = dtau Omega(z, tau^{i+1})^2.
/// identity: U stays at 0.
struct URecursion {
    RecursionKind kind = RecursionKind::identity;
    double dtau = 0.0;
    double sqrt_t0 = 0.0;

    double scale(std::size_t i) const {
        return kind == RecursionKind::asian ? static_cast<double>(i) / static_cast<double>(i + 1) : 1.0;
    }
    /// |du^i / du^{i+1}| at fixed z.
    double jacobian(std::size_t i) const { return 1.0 / scale(i); }

    double shift(const ModelSpec& model, Measure measure, std::size_t i, double z, double tau_next) const {
        switch (kind) {
            case RecursionKind::asian:
                return (dtau / 2.0 + sqrt_t0 / static_cast<double>(i + 1)) *
                       lamperti_inverse(model, measure, z, tau_next);
            case RecursionKind::vnb: {
                const double w = lamperti_inverse(model, measure, z, tau_next);
                return dtau * w * w;
            }
            default:
                return 0.0;
        }
    }
    /// U^1 as a function of Z^1.
    double initial(const ModelSpec& model, Measure measure, double z, double tau1) const {
        return shift(model, measure, 0, z, tau1);
    }
};

inline URecursion identity_recursion() { return {}; }

inline URecursion asian_recursion(const PiecewiseParams& p, double dtau) {
    return {RecursionKind::asian, dtau, std::sqrt(p.t0)};
}

inline URecursion vnb_recursion(double dtau) { return {RecursionKind::vnb, dtau, 0.0}; }

/// Limited u-slopes of row `cur` given its neighbours (nullptr outside the grid).
inline void limited_slopes_rows(const double* prev, const double* cur, const double* next, std::size_t n, double h,
                                double* slope) {
    for (std::size_t k = 0; k < n; ++k) {
        const double left = prev ? prev[k] : 0.0;
        const double right = next ? next[k] : 0.0;
        slope[k] = mc_limited(cur[k] - left, right - cur[k], h);
    }
}

namespace detail {

/// Moves every column k of `in` along u by u -> scale u + shift[k], conservatively.
/// Returns the mass dropped at the u boundary.
inline double remap_u_affine(const JointDensity& in, double scale, std::span<const double> shift,
                             std::vector<double>& out, std::vector<double>& slope) {
    const std::size_t mu = in.u_grid.m;
    const std::size_t mz = in.z_grid.m;
    const double h = in.u_grid.dz;
    const double lo_grid = in.u_grid.lower();
    const double hi_grid = in.u_grid.upper();
    out.assign(in.values.size(), 0.0);
    slope.resize(mz);
    double kept = 0.0, total = 0.0;
    for (std::size_t j = 0; j < mu; ++j) {
        const double* cur = in.values.data() + j * mz;
        const double* prev = j > 0 ? cur - mz : nullptr;
        const double* next = j + 1 < mu ? cur + mz : nullptr;
        bool any = false;
        for (std::size_t k = 0; k < mz; ++k) {
            if (cur[k] != 0.0) {
                any = true;
                break;
            }
        }
        if (!any) continue;
        limited_slopes_rows(prev, cur, next, mz, h, slope.data());
        const double uj = in.u_grid.node(j);
        const double ea = in.u_grid.edge(j);
        if (scale <= 1.0) {
            // The image of a cell is at most one cell wide: two pieces in closed form.
            const double w = scale * h;
            const double inv = 1.0 / (scale * h);
            const double inv_h = 1.0 / h;
            for (std::size_t k = 0; k < mz; ++k) {
                const double v = cur[k];
                if (v == 0.0) continue;
                total += v;
                const double s = slope[k];
                const double ya = scale * ea + shift[k];
                const double r = std::clamp((ya - lo_grid) * inv_h, -4.0, static_cast<double>(mu) + 4.0);
                // Truncation after an integer offset is floor for r > -2^20.
                const double fl = static_cast<double>(static_cast<std::int64_t>(r + 1048576.0)) - 1048576.0;
                const double len1 = std::min(w, (1.0 - (r - fl)) * h);
                const double len2 = w - len1;
                const double add1 = len1 * inv * (v + s * (0.5 * len1 / scale - 0.5 * h));
                const double add2 = len2 * inv * (v + s * ((len1 + 0.5 * len2) / scale - 0.5 * h));
                const auto t = static_cast<std::ptrdiff_t>(fl);
                if (t >= 0 && t < static_cast<std::ptrdiff_t>(mu)) {
                    out[static_cast<std::size_t>(t) * mz + k] += add1;
                    kept += add1;
                }
                if (len2 > 0.0 && t + 1 >= 0 && t + 1 < static_cast<std::ptrdiff_t>(mu)) {
                    out[static_cast<std::size_t>(t + 1) * mz + k] += add2;
                    kept += add2;
                }
            }
            continue;
        }
        for (std::size_t k = 0; k < mz; ++k) {
            const double v = cur[k];
            if (v == 0.0) continue;
            const double s = slope[k];
            total += v;
            const double ya = scale * ea + shift[k];
            const double yb = ya + scale * h;
            const double lo = std::max(ya, lo_grid);
            const double hi = std::min(yb, hi_grid);
            if (!(hi > lo)) continue;
            auto t = static_cast<std::ptrdiff_t>(std::floor((lo - lo_grid) / h));
            t = std::clamp<std::ptrdiff_t>(t, 0, static_cast<std::ptrdiff_t>(mu) - 1);
            for (auto tt = static_cast<std::size_t>(t); tt < mu; ++tt) {
                const double c_lo = lo_grid + static_cast<double>(tt) * h;
                if (c_lo >= hi) break;
                const double o_lo = std::max(lo, c_lo);
                const double o_hi = std::min(hi, c_lo + h);
                if (!(o_hi > o_lo)) continue;
                const double mid = 0.5 * (o_lo + o_hi);
                const double u_src = (mid - shift[k]) / scale;
                const double add = (o_hi - o_lo) / (scale * h) * (v + s * (u_src - uj));
                out[tt * mz + k] += add;
                kept += add;
            }
        }
    }
    return (total - kept) * h * in.z_grid.dz;
}

}  // namespace detail

/// Grids and scheme shared by the joint operations.
struct JointSetup {
    SpatialGrid z_grid;
    UGrid u_grid;
    TimeGrid time;
    Scheme scheme = Scheme::strang;
    ConvolutionMethod convolution = ConvolutionMethod::fft;
};

/// Positions Z^{i} of the particles represented by the nodes of the running state.
///
/// Under Strang splitting the running state lags the trailing half drift flow.
inline std::vector<double> particle_positions(const ModelSpec& model, Measure measure, const JointSetup& s,
                                              std::size_t i) {
    std::vector<double> z(s.z_grid.m);
    const double tau = s.time.tau(i);
    if (s.scheme == Scheme::euler) {
        for (std::size_t k = 0; k < z.size(); ++k) z[k] = s.z_grid.node(k);
        return z;
    }
    const auto f = flow_map(model, measure, tau - 0.5 * s.time.dtau, tau);
    const auto bps = branch_points(model);
    for (std::size_t k = 0; k < z.size(); ++k) {
        const double zk = s.z_grid.node(k);
        const int side = bps.empty() ? 0 : (zk < bps[0] ? -1 : (zk > bps[0] ? 1 : 0));
        z[k] = side == 0 && !bps.empty() ? zk : f(zk, side);
    }
    return z;
}

/// Joint density at tau^1: the first-step Gaussian in z, with U^1(z) deposited on the u grid
/// (split linearly between the two bracketing u nodes).
inline JointDensity joint_init(const JointSetup& s, const ModelSpec& model, Measure measure, const URecursion& rec,
                               const CirculantKernel& kernel) {
    const auto& ug = s.u_grid;
    const auto& zg = s.z_grid;
    if (!(ug.lower() < 0.0 && ug.upper() > 0.0 && zg.lower() < 0.0 && zg.upper() > 0.0)) {
        throw std::invalid_argument("joint grids must bracket (0, 0)");
    }
    JointDensity J;
    J.z_grid = zg;
    J.u_grid = ug;
    J.values.assign(ug.m * zg.m, 0.0);
    J.tau = s.time.tau(1);
    J.step = 1;
    const auto p1 = initial_density(zg, kernel);
    const auto zpos = particle_positions(model, measure, s, 1);
    for (std::size_t k = 0; k < zg.m; ++k) {
        const double pz = p1.values[k];
        if (pz == 0.0) continue;
        const double u = rec.initial(model, measure, zpos[k], J.tau);
        const double r = (u - ug.z_min) / ug.dz;
        if (!(r >= 0.0) || r > static_cast<double>(ug.m - 1)) continue;  // leaks
        auto j = static_cast<std::size_t>(std::floor(r));
        if (j >= ug.m - 1) j = ug.m - 2;
        const double w = r - static_cast<double>(j);
        J.values[j * zg.m + k] += (1.0 - w) * pz / ug.dz;
        J.values[(j + 1) * zg.m + k] += w * pz / ug.dz;
    }
    J.update_mass();
    return J;
}

/// Per-step diagnostics of the joint engine.
struct JointStats {
    double leaked_z = 0.0;
    double leaked_u = 0.0;
};

/// Reusable buffers for joint steps.
struct JointScratch {
    explicit JointScratch(std::size_t mz) : step(mz), row_out(mz) {}
    StepScratch step;
    std::vector<double> row_out;
    std::vector<double> u_out;
    std::vector<double> slope;
};

/// J at tau^i -> tau^{i+1}: z-step of every non-empty row, then the u-remap of every column.
inline JointStats joint_step(JointDensity& J, const ModelSpec& model, Measure measure, const URecursion& rec,
                             const CirculantKernel& kernel, const JointSetup& s, JointScratch& scratch) {
    const std::size_t i = J.step;
    if (i < 1) throw std::invalid_argument("joint_step requires a state at step >= 1");
    JointStats st;
    const auto ws = scheme_workspace(s.scheme, model, measure, s.z_grid, s.time, i);
    const std::size_t mz = s.z_grid.m;
    for (std::size_t j = 0; j < s.u_grid.m; ++j) {
        auto row = J.row(j);
        if (std::all_of(row.begin(), row.end(), [](double v) { return v == 0.0; })) continue;
        const auto r = apply_step(ws, kernel, row, scratch.row_out, scratch.step);
        st.leaked_z += r.leaked * s.u_grid.dz;
        std::copy(scratch.row_out.begin(), scratch.row_out.end(), row.begin());
    }
    const double tau_next = s.time.tau(i + 1);
    if (rec.kind != RecursionKind::identity) {
        const auto zpos = particle_positions(model, measure, s, i + 1);
        std::vector<double> shift(mz);
        for (std::size_t k = 0; k < mz; ++k) shift[k] = rec.shift(model, measure, i, zpos[k], tau_next);
        st.leaked_u = detail::remap_u_affine(J, rec.scale(i), shift, scratch.u_out, scratch.slope);
        J.values.swap(scratch.u_out);
    }
    J.step = i + 1;
    J.tau = tau_next;
    J.update_mass();
    return st;
}

/// Applies the trailing half drift flow to every row (Strang), giving the density at J.tau.
inline JointDensity joint_complete(const JointDensity& J, const ModelSpec& model, Measure measure,
                                   const JointSetup& s) {
    if (s.scheme == Scheme::euler) return J;
    JointDensity out = J;
    const double tau = s.time.tau(J.step);
    const auto ws = build_flow_workspace(model, measure, s.z_grid, tau - 0.5 * s.time.dtau, tau);
    std::vector<double> slope(s.z_grid.m);
    for (std::size_t j = 0; j < s.u_grid.m; ++j) {
        auto src = J.row(j);
        if (std::all_of(src.begin(), src.end(), [](double v) { return v == 0.0; })) continue;
        ws.plan.apply(src, slope, out.row(j));
    }
    out.update_mass();
    return out;
}

/// Joint density at tau^n of the time grid.
inline JointDensity joint_propagate(const ModelSpec& model, Measure measure, const URecursion& rec,
                                    const JointSetup& s, JointStats* stats = nullptr) {
    validate_model(model);
    const auto kernel = build_kernel(s.z_grid, s.time.dtau, s.convolution);
    JointDensity J = joint_init(s, model, measure, rec, kernel);
    JointStats total;
    JointScratch scratch(s.z_grid.m);
    while (J.step < s.time.n) {
        const auto st = joint_step(J, model, measure, rec, kernel, s, scratch);
        total.leaked_z += st.leaked_z;
        total.leaked_u += st.leaked_u;
    }
    if (stats) *stats = total;
    return joint_complete(J, model, measure, s);
}

/// du * sum over rows for every column.
inline DensityVector marginal_z(const JointDensity& J) {
    DensityVector d;
    d.values.assign(J.z_grid.m, 0.0);
    for (std::size_t j = 0; j < J.u_grid.m; ++j) {
        const auto row = J.row(j);
        for (std::size_t k = 0; k < J.z_grid.m; ++k) d.values[k] += row[k];
    }
    for (auto& v : d.values) v *= J.u_grid.dz;
    d.tau = J.tau;
    d.step = J.step;
    d.mass = grid_mass(d.values, J.z_grid.dz);
    return d;
}

/// dz * sum over columns for every row.
inline std::vector<double> marginal_u(const JointDensity& J) {
    std::vector<double> out(J.u_grid.m, 0.0);
    for (std::size_t j = 0; j < J.u_grid.m; ++j) {
        const auto row = J.row(j);
        out[j] = J.z_grid.dz * std::accumulate(row.begin(), row.end(), 0.0);
    }
    return out;
}

}  // namespace fca
