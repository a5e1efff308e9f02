#pragma once

/// One-dimensional fast convolution: remap by the drift, convolve with the Gaussian kernel.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "fca/error.hpp"
#include "fca/grid.hpp"
#include "fca/kernel.hpp"
#include "fca/models.hpp"
#include "fca/remap.hpp"

namespace fca {

/// Transition density p(z, tau | 0) on the nodes of a SpatialGrid.
struct DensityVector {
    std::vector<double> values;  ///< density per unit z
    double tau = 0.0;
    double mass = 0.0;           ///< dz * sum(values)
    std::size_t step = 0;        ///< time index i of tau^i
};

/// Sum with four partial accumulators.
inline double sum_values(std::span<const double> v) {
    double a[4] = {0.0, 0.0, 0.0, 0.0};
    const std::size_t n = v.size();
    std::size_t j = 0;
    for (; j + 4 <= n; j += 4) {
        a[0] += v[j];
        a[1] += v[j + 1];
        a[2] += v[j + 2];
        a[3] += v[j + 3];
    }
    for (; j < n; ++j) a[0] += v[j];
    return (a[0] + a[1]) + (a[2] + a[3]);
}

inline double grid_mass(std::span<const double> v, double dz) { return dz * sum_values(v); }

/// Drift image of the grid at one time step.
struct StepWorkspace {
    double tau = 0.0;
    double dtau = 0.0;
    std::vector<double> xi;        ///< z_j + M_Z(z_j, tau) dtau
    std::vector<double> jacobian;  ///< dz/dxi per cell (> 0)
    std::vector<double> z_star;    ///< preimage of each node, only when requested
    RemapPlan plan;
};

/// Euler drift map z -> z + M_Z(z, tau) dtau, evaluated one-sidedly at branch points.
inline auto drift_map(const ModelSpec& model, Measure measure, double tau, double dtau) {
    return [&model, measure, tau, dtau](double z, int side) {
        return z + drift_z_sided(model, measure, z, tau, side) * dtau;
    };
}

/// Flow of dz/dtau = M_Z(z, tau) from tau_from to tau_to (explicit midpoint rule).
///
/// At a branch point where the drift points inward from both sides, trajectories that
/// reach it stay there.
inline auto flow_map(const ModelSpec& model, Measure measure, double tau_from, double tau_to) {
    const auto bps = branch_points(model);
    const bool branch = !bps.empty();
    const double bp = branch ? bps.front() : 0.0;
    const double mid = 0.5 * (tau_from + tau_to);
    const bool sticky = branch && drift_z_sided(model, measure, bp, mid, -1) > 0.0 &&
                        drift_z_sided(model, measure, bp, mid, 1) < 0.0;
    return [&model, measure, tau_from, tau_to, bp, sticky](double z, int side) {
        const double h = tau_to - tau_from;
        const double k1 = drift_z_sided(model, measure, z, tau_from, side);
        const double y = z + h * drift_z_sided(model, measure, z + 0.5 * h * k1, tau_from + 0.5 * h, side);
        if (sticky && side < 0) return std::min(y, bp);
        if (sticky && side > 0) return std::max(y, bp);
        return y;
    };
}

namespace detail {

template <class Map>
StepWorkspace workspace_from_map(Map&& f, const ModelSpec& model, const SpatialGrid& grid, double tau, double dtau,
                                 bool with_preimages) {
    StepWorkspace ws;
    ws.tau = tau;
    ws.dtau = dtau;
    const auto branches = branch_points(model);
    try {
        ws.plan = build_remap_plan(grid, f, branches);
    } catch (const NumericalError& e) {
        throw NumericalError(std::string(e.what()) + " at tau = " + std::to_string(tau));
    }
    ws.jacobian = ws.plan.jacobian;
    const double bp = branches.empty() ? 0.0 : branches.front();
    auto side_of = [&](double z) { return branches.empty() ? 0 : (z < bp ? -1 : (z > bp ? 1 : 0)); };
    auto g = [&](double z) { return f(z, side_of(z)); };
    ws.xi.resize(grid.m);
    for (std::size_t j = 0; j < grid.m; ++j) ws.xi[j] = g(grid.node(j));
    if (with_preimages) {
        ws.z_star.resize(grid.m);
        for (std::size_t j = 0; j < grid.m; ++j) {
            const double xi = grid.node(j);
            if (g(xi) == xi) {
                ws.z_star[j] = xi;
                continue;
            }
            double lo = xi, hi = xi, span = grid.dz;
            for (int k = 0; k < 60 && g(lo) > xi; ++k) { lo -= span; span *= 2.0; }
            span = grid.dz;
            for (int k = 0; k < 60 && g(hi) < xi; ++k) { hi += span; span *= 2.0; }
            ws.z_star[j] = solve_preimage(g, xi, lo, hi);
        }
    }
    return ws;
}

}  // namespace detail

/// Remap for one step with the Euler map xi = z + M_Z(z, tau) dtau.
inline StepWorkspace build_workspace(const ModelSpec& model, Measure measure, const SpatialGrid& grid, double tau,
                                     double dtau, bool with_preimages = false) {
    return detail::workspace_from_map(drift_map(model, measure, tau, dtau), model, grid, tau, dtau, with_preimages);
}

/// Remap by the drift flow over [tau_from, tau_to].
inline StepWorkspace build_flow_workspace(const ModelSpec& model, Measure measure, const SpatialGrid& grid,
                                          double tau_from, double tau_to, bool with_preimages = false) {
    return detail::workspace_from_map(flow_map(model, measure, tau_from, tau_to), model, grid, tau_from,
                                      tau_to - tau_from, with_preimages);
}

/// Per-step diagnostics.
struct StepStats {
    double leaked = 0.0;             ///< mass lost at the boundary in this step
    double negative_excursion = 0.0; ///< max(-value)/max(value) before clipping
};

/// Scratch buffers for repeated steps on one grid.
class StepScratch {
public:
    explicit StepScratch(std::size_t m) : remapped(m), slope(m), toeplitz(m) {}
    std::vector<double> remapped;
    std::vector<double> slope;
    ToeplitzWorkspace toeplitz;
};

/// out = dz * Toeplitz(remap(in)), negatives clipped to zero.
inline StepStats apply_step(const StepWorkspace& ws, const CirculantKernel& kernel, std::span<const double> in,
                            std::span<double> out, StepScratch& scratch) {
    ws.plan.apply(in, scratch.slope, scratch.remapped);
    toeplitz_apply(kernel, scratch.remapped, out, scratch.toeplitz);
    double peak = 0.0, low = 0.0;
    const double dz = kernel.dz;
    for (auto& v : out) {
        const double x = v * dz;
        peak = std::max(peak, x);
        low = std::min(low, x);
        v = std::max(x, 0.0);
    }
    StepStats s;
    s.negative_excursion = peak > 0.0 ? -low / peak : 0.0;
    s.leaked = grid_mass(in, kernel.dz) - grid_mass(scratch.remapped, kernel.dz);
    return s;
}

/// P at tau^{i+1} from P at tau^i = P.tau.
inline DensityVector step(const DensityVector& p, const ModelSpec& model, Measure measure, const SpatialGrid& grid,
                          const CirculantKernel& kernel, double tau) {
    if (p.values.size() != grid.m) throw std::invalid_argument("density does not match the grid");
    const auto ws = build_workspace(model, measure, grid, tau, kernel.dtau);
    StepScratch scratch(grid.m);
    DensityVector next;
    next.values.resize(grid.m);
    apply_step(ws, kernel, p.values, next.values, scratch);
    next.tau = tau + kernel.dtau;
    next.step = p.step + 1;
    next.mass = grid_mass(next.values, grid.dz);
    return next;
}

/// P^1: the delta at z = 0 (value 1/dz at the center node) convolved once with the kernel.
inline DensityVector initial_density(const SpatialGrid& grid, const CirculantKernel& kernel) {
    DensityVector p;
    p.values.resize(grid.m);
    const std::size_t c = grid.center();
    for (std::size_t j = 0; j < grid.m; ++j) p.values[j] = kernel.first_row[j > c ? j - c : c - j];
    p.tau = kernel.dtau;
    p.step = 1;
    p.mass = grid_mass(p.values, grid.dz);
    return p;
}

/// Time splitting of drift and diffusion.
enum class Scheme {
    euler,   ///< xi = z + M_Z(z, tau^i) dtau, then convolution (first order in dtau)
    strang,  ///< half drift flow, convolution, half drift flow (second order in dtau)
};

struct PropagateOptions {
    Scheme scheme = Scheme::strang;
    bool renormalize = false;  ///< rescale to unit mass after every step
    ConvolutionMethod convolution = ConvolutionMethod::fft;
};

/// Summary of a propagation.
struct PropagateStats {
    double leaked = 0.0;
    double max_negative_excursion = 0.0;
    std::vector<std::string> warnings;
};

/// Maps requested report times onto step indices of the time grid.
inline std::vector<std::size_t> report_steps(const TimeGrid& tg, std::span<const double> taus) {
    std::vector<std::size_t> idx;
    for (double t : taus) {
        const double r = t / tg.dtau;
        const auto i = static_cast<std::size_t>(std::llround(r));
        if (i < 1 || i > tg.n || std::fabs(r - static_cast<double>(i)) > 1e-6) {
            throw std::invalid_argument("report time " + std::to_string(t) + " is not a node of the time grid");
        }
        idx.push_back(i);
    }
    return idx;
}

/// The remap applied between the convolutions of steps i-1 and i.
inline StepWorkspace scheme_workspace(Scheme scheme, const ModelSpec& model, Measure measure, const SpatialGrid& grid,
                                      const TimeGrid& tg, std::size_t i) {
    const double tau = tg.tau(i);
    if (scheme == Scheme::euler) return build_workspace(model, measure, grid, tau, tg.dtau);
    return build_flow_workspace(model, measure, grid, tau - 0.5 * tg.dtau, tau + 0.5 * tg.dtau);
}

/// Carries the running state of a Strang propagation to the density at tau^i.
///
/// Under Strang splitting the state after a convolution still lacks the trailing half
/// drift flow; the Euler scheme needs no completion.
inline DensityVector complete_step(Scheme scheme, const DensityVector& p, const ModelSpec& model, Measure measure,
                                   const SpatialGrid& grid, const TimeGrid& tg) {
    if (scheme == Scheme::euler) return p;
    const double tau = tg.tau(p.step);
    const auto ws = build_flow_workspace(model, measure, grid, tau - 0.5 * tg.dtau, tau);
    DensityVector out = p;
    out.values = ws.plan.apply(p.values);
    out.mass = grid_mass(out.values, grid.dz);
    return out;
}

/// Propagates from the delta at z = 0 and returns the densities at the requested times
/// (all of them must be grid nodes tau^i, i >= 1). Without report times the final
/// density is returned.
inline std::vector<DensityVector> propagate(const ModelSpec& model, Measure measure, const SpatialGrid& grid,
                                            const TimeGrid& tg, std::span<const double> report_taus = {},
                                            const PropagateOptions& opt = {}, PropagateStats* stats = nullptr) {
    validate_model(model);
    std::vector<std::size_t> wanted =
        report_taus.empty() ? std::vector<std::size_t>{tg.n} : report_steps(tg, report_taus);
    const auto kernel = build_kernel(grid, tg.dtau, opt.convolution);
    PropagateStats local;
    if (kernel.warning) local.warnings.push_back(*kernel.warning);

    DensityVector p = initial_density(grid, kernel);
    std::vector<DensityVector> out(wanted.size());
    auto record = [&](const DensityVector& d) {
        bool needed = false;
        for (std::size_t k = 0; k < wanted.size(); ++k) needed = needed || wanted[k] == d.step;
        if (!needed) return;
        const auto done = complete_step(opt.scheme, d, model, measure, grid, tg);
        for (std::size_t k = 0; k < wanted.size(); ++k)
            if (wanted[k] == d.step) out[k] = done;
    };
    record(p);

    const std::size_t last = *std::max_element(wanted.begin(), wanted.end());
    StepScratch scratch(grid.m);
    std::vector<double> next(grid.m);
    for (std::size_t i = 1; i < last; ++i) {
        const auto ws = scheme_workspace(opt.scheme, model, measure, grid, tg, i);
        const auto s = apply_step(ws, kernel, p.values, next, scratch);
        local.leaked += s.leaked;
        local.max_negative_excursion = std::max(local.max_negative_excursion, s.negative_excursion);
        p.values.swap(next);
        p.step = i + 1;
        p.tau = tg.tau(i + 1);
        p.mass = grid_mass(p.values, grid.dz);
        if (opt.renormalize && p.mass > 0.0) {
            for (auto& v : p.values) v /= p.mass;
            p.mass = 1.0;
        }
        record(p);
    }
    if (stats) *stats = std::move(local);
    return out;
}

/// Linear interpolation of a node density at z; throws DomainError outside the node range.
inline double interpolate_density(const DensityVector& p, const SpatialGrid& grid, double z) {
    const double r = (z - grid.z_min) / grid.dz;
    if (!(r >= 0.0) || r > static_cast<double>(grid.m - 1)) throw DomainError("point outside the grid");
    auto j = static_cast<std::size_t>(std::floor(r));
    if (j >= grid.m - 1) j = grid.m - 2;
    const double w = r - static_cast<double>(j);
    return (1.0 - w) * p.values[j] + w * p.values[j + 1];
}

/// Density of X at the given states: p_z(Z(x)) / D_X(x).
inline std::vector<double> density_in_x(const DensityVector& p, const ModelSpec& model, Measure measure,
                                        const SpatialGrid& grid, double tau, std::span<const double> x_nodes) {
    std::vector<double> out;
    out.reserve(x_nodes.size());
    for (double x : x_nodes) {
        const double z = lamperti_forward(model, measure, x, tau);
        const double d = native_coefficients(model, measure, x, tau).diffusion;
        out.push_back(interpolate_density(p, grid, z) / d);
    }
    return out;
}

}  // namespace fca
