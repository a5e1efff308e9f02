#pragma once

/// Risk-neutral option prices from propagated densities, and implied-vol surfaces.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "fca/black_scholes.hpp"
#include "fca/error.hpp"
#include "fca/grid.hpp"
#include "fca/joint.hpp"
#include "fca/mc.hpp"
#include "fca/models.hpp"
#include "fca/propagate.hpp"

namespace fca {

enum class OptionStyle { vanilla_piecewise, geometric_asian_piecewise, vanilla_vnb };

inline std::string_view to_string(OptionStyle s) {
    switch (s) {
        case OptionStyle::vanilla_piecewise: return "vanilla-piecewise";
        case OptionStyle::geometric_asian_piecewise: return "geometric-asian-piecewise";
        default: return "vanilla-vnb";
    }
}

inline std::string_view to_string(OptionKind k) { return k == OptionKind::call ? "call" : "put"; }

struct OptionContract {
    double spot = 100.0;
    double strike = 100.0;
    double rate = 0.03;
    double t0 = 0.0;
    double T = 1.0;
    OptionKind kind = OptionKind::call;
    OptionStyle style = OptionStyle::vanilla_piecewise;

    double log_moneyness() const { return std::log(strike / spot); }
    double discount() const { return std::exp(-rate * (T - t0)); }
    /// S0^D = exp(-r (T - t0)) S0.
    double discounted_spot() const { return discount() * spot; }

    void validate() const {
        if (!(spot > 0.0)) throw std::invalid_argument("spot must be > 0");
        if (!(strike > 0.0)) throw std::invalid_argument("strike must be > 0");
        if (!(T > t0)) throw std::invalid_argument("maturity must exceed t0");
        if (!std::isfinite(rate)) throw std::invalid_argument("rate must be finite");
    }
};

/// Grids and step used for one pricing run.
struct PricingGrids {
    SpatialGrid z_grid = build_grid(-10.24, 2048);
    UGrid u_grid = build_u_grid(-2.56, 2048);  ///< joint styles only
    double dtau = 1e-3;                          ///< target step; the grid is fitted to tau(T)
    Scheme scheme = Scheme::strang;
    ConvolutionMethod convolution = ConvolutionMethod::direct;        ///< 1-D vanilla propagation
    /// Rows of the joint engine. FFT is safe when the payoff growth is bounded on the grid
    /// (the Asian exp(kappa u)); the VNB growth is doubly exponential in z and needs direct.
    ConvolutionMethod joint_convolution = ConvolutionMethod::direct;
};

struct GridMeta {
    SpatialGrid z_grid;
    std::optional<UGrid> u_grid;
    double dtau = 0.0;
    std::size_t steps = 0;
};

struct PricingResult {
    double price = 0.0;
    double mass_deficit = 0.0;
    GridMeta grid;
    Measure measure = Measure::risk_neutral;
    std::vector<std::string> warnings;
};

/// Discrete terminal law: growth[i] with probability weight[i].
///
/// Vanilla laws are forward-normalized, S_T = S0 e^{r(T-t0)} growth; for the Asian style
/// growth is the exponentiated average that enters the payoff directly.
struct TerminalLaw {
    std::vector<double> growth;
    std::vector<double> weight;
    double mass = 0.0;
    GridMeta grid;
    std::vector<std::string> warnings;
};

namespace detail {

inline void note_deficit(TerminalLaw& law) {
    const double deficit = 1.0 - law.mass;
    if (deficit > 1e-4) law.warnings.push_back("mass deficit " + std::to_string(deficit) + " exceeds 1e-4");
}

}  // namespace detail

/// Forward-normalized law of e^{X_T} from a density P over z at tau(T).
inline TerminalLaw vanilla_piecewise_law(const DensityVector& p, const PiecewiseParams& params, const SpatialGrid& grid,
                                         double r, double T) {
    const ModelSpec model{params};
    const double tau = integral_time(model, T);
    TerminalLaw law;
    law.growth.resize(grid.m);
    law.weight.resize(grid.m);
    const double d = std::exp(-r * T);
    for (std::size_t k = 0; k < grid.m; ++k) {
        // S_T/S0 = e^x; store e^x e^{-rT} so growth has unit mean under Q.
        law.growth[k] = d * std::exp(lamperti_inverse(model, Measure::risk_neutral, grid.node(k), tau));
        law.weight[k] = p.values[k] * grid.dz;
    }
    law.mass = grid_mass(p.values, grid.dz);
    return law;
}

/// S_T / (S0 e^{r(T-t0)}) for the VNB model, whose Q-mean is one.
inline double vnb_growth(const VnbParams& p, double T, double omega_T, double u) {
    const double c = vnb::c_coef(p.alpha);
    const double s2 = p.sigma * p.sigma;
    return std::exp(p.sigma * (omega_T - p.omega0) - 0.5 * s2 * vnb::beta_integral(p.alpha, p.t0, T) - 0.5 * c * s2 * u);
}

/// Law over the (u, z) grid of the VNB joint density at tau(T).
inline TerminalLaw vnb_law(const JointDensity& J, const VnbParams& p, double T) {
    const double tau = std::log(T / p.t0);
    TerminalLaw law;
    const std::size_t mz = J.z_grid.m, mu = J.u_grid.m;
    std::vector<double> omega(mz);
    for (std::size_t k = 0; k < mz; ++k) omega[k] = vnb_omega(p, J.z_grid.node(k), tau);
    const double cell = J.u_grid.dz * J.z_grid.dz;
    for (std::size_t j = 0; j < mu; ++j) {
        const double u = J.u_grid.node(j);
        const auto row = J.row(j);
        for (std::size_t k = 0; k < mz; ++k) {
            if (row[k] == 0.0) continue;
            law.growth.push_back(vnb_growth(p, T, omega[k], u));
            law.weight.push_back(row[k] * cell);
        }
    }
    law.mass = J.mass;
    return law;
}

/// Law of exp(2 (sqrt T - sqrt t0)/(T - t0) U) from the Asian joint density.
inline TerminalLaw asian_law(const JointDensity& J, double t0, double T) {
    const double kappa = 2.0 * (std::sqrt(T) - std::sqrt(t0)) / (T - t0);
    const auto mu = marginal_u(J);
    TerminalLaw law;
    law.growth.resize(mu.size());
    law.weight.resize(mu.size());
    for (std::size_t j = 0; j < mu.size(); ++j) {
        law.growth[j] = std::exp(kappa * J.u_grid.node(j));
        law.weight[j] = mu[j] * J.u_grid.dz;
    }
    law.mass = J.mass;
    return law;
}

/// S0^D sum_i w_i payoff(growth_i).
inline double price_from_law(const TerminalLaw& law, const OptionContract& c, bool forward_normalized) {
    // For forward-normalized laws S_T/S0 = growth * exp(r (T - t0)).
    const double scale = forward_normalized ? 1.0 / c.discount() : 1.0;
    const double ek = c.strike / c.spot;
    double acc = 0.0;
    for (std::size_t i = 0; i < law.growth.size(); ++i) {
        const double g = law.growth[i] * scale;
        const double pay = c.kind == OptionKind::call ? std::max(g - ek, 0.0) : std::max(ek - g, 0.0);
        acc += pay * law.weight[i];
    }
    return c.discounted_spot() * acc;
}

/// e^{-r(T-t0)} E^Q[S_T] / S0 from a forward-normalized law.
inline double martingale_ratio(const TerminalLaw& law) {
    double acc = 0.0;
    for (std::size_t i = 0; i < law.growth.size(); ++i) acc += law.growth[i] * law.weight[i];
    return acc;
}

namespace detail {

inline PricingResult result_from(const TerminalLaw& law, double price) {
    PricingResult r;
    r.price = price;
    r.mass_deficit = 1.0 - law.mass;
    r.grid = law.grid;
    r.warnings = law.warnings;
    return r;
}

inline PiecewiseParams risk_neutral_piecewise(PiecewiseParams p, const OptionContract& c) {
    p.r = c.rate;
    p.t0 = c.t0;
    return p;
}

inline VnbParams risk_neutral_vnb(VnbParams p, const OptionContract& c) {
    if (std::fabs(p.t0 - c.t0) > 1e-12) throw std::invalid_argument("contract t0 must equal the model t0");
    p.r = c.rate;
    p.T = c.T;
    return p;
}

}  // namespace detail

/// Terminal law of the piecewise model at the contract maturity (t0 = 0).
inline TerminalLaw solve_vanilla_piecewise(const OptionContract& c, const PiecewiseParams& params, const PricingGrids& g) {
    c.validate();
    if (c.t0 != 0.0) throw std::invalid_argument("vanilla piecewise pricing requires t0 = 0");
    const auto p = detail::risk_neutral_piecewise(params, c);
    const ModelSpec model{p};
    const auto tg = time_grid_to(integral_time(model, c.T), g.dtau);
    PropagateOptions opt;
    opt.scheme = g.scheme;
    opt.convolution = g.convolution;
    PropagateStats stats;
    const auto dens = propagate(model, Measure::risk_neutral, g.z_grid, tg, {}, opt, &stats);
    auto law = vanilla_piecewise_law(dens.front(), p, g.z_grid, c.rate, c.T);
    law.grid = {g.z_grid, std::nullopt, tg.dtau, tg.n};
    law.warnings = stats.warnings;
    detail::note_deficit(law);
    return law;
}

inline PricingResult price_vanilla_piecewise(const OptionContract& c, const PiecewiseParams& params,
                                             const PricingGrids& g) {
    const auto law = solve_vanilla_piecewise(c, params, g);
    return detail::result_from(law, price_from_law(law, c, true));
}

/// Terminal law of the geometric average for the Asian style.
inline TerminalLaw solve_asian(const OptionContract& c, const PiecewiseParams& params, const PricingGrids& g,
                               JointDensity* joint_out = nullptr) {
    c.validate();
    const auto p = detail::risk_neutral_piecewise(params, c);
    const ModelSpec model{p};
    const auto tg = time_grid_to(integral_time(model, c.T), g.dtau);
    JointSetup s{g.z_grid, g.u_grid, tg, g.scheme, g.joint_convolution};
    JointStats st;
    auto J = joint_propagate(model, Measure::risk_neutral, asian_recursion(p, tg.dtau), s, &st);
    auto law = asian_law(J, c.t0, c.T);
    law.grid = {g.z_grid, g.u_grid, tg.dtau, tg.n};
    detail::note_deficit(law);
    if (joint_out) *joint_out = std::move(J);
    return law;
}

inline PricingResult price_asian(const OptionContract& c, const PiecewiseParams& params, const PricingGrids& g) {
    const auto law = solve_asian(c, params, g);
    return detail::result_from(law, price_from_law(law, c, false));
}

/// Joint (U, Z) law of the VNB model at the contract maturity.
inline TerminalLaw solve_vnb(const OptionContract& c, const VnbParams& params, const PricingGrids& g,
                             JointDensity* joint_out = nullptr) {
    c.validate();
    const auto p = detail::risk_neutral_vnb(params, c);
    const ModelSpec model{p};
    const auto tg = time_grid_to(integral_time(model, c.T), g.dtau);
    JointSetup s{g.z_grid, g.u_grid, tg, g.scheme, g.joint_convolution};
    JointStats st;
    auto J = joint_propagate(model, Measure::risk_neutral, vnb_recursion(tg.dtau), s, &st);
    auto law = vnb_law(J, p, c.T);
    law.grid = {g.z_grid, g.u_grid, tg.dtau, tg.n};
    detail::note_deficit(law);
    if (joint_out) *joint_out = std::move(J);
    return law;
}

inline PricingResult price_vnb(const OptionContract& c, const VnbParams& params, const PricingGrids& g) {
    const auto law = solve_vnb(c, params, g);
    return detail::result_from(law, price_from_law(law, c, true));
}

/// Implied Black-Scholes volatilities over strikes x maturities (T - t0).
struct VolSurface {
    std::vector<double> strikes;
    std::vector<double> maturities;           ///< T - t0
    std::vector<std::vector<double>> vols;    ///< [maturity][strike]; NaN where missing
    std::vector<std::vector<double>> prices;
    std::vector<std::vector<std::string>> flags;  ///< empty string when the cell is valid
    std::optional<std::vector<std::vector<double>>> ci_low;   ///< MC band on the vol
    std::optional<std::vector<std::vector<double>>> ci_high;
    std::vector<double> mass_deficit;         ///< per maturity

    bool has(std::size_t t, std::size_t k) const { return flags[t][k].empty(); }
};

/// Optional Monte Carlo bands for a surface.
struct SurfaceMc {
    std::size_t n_paths = 1'000'000;
    std::uint64_t seed = 20240521;
    bool antithetic = false;
};

/// Implied vol of a call price; the vol band of an MC interval maps through the
/// monotone price-to-vol relation.
inline std::optional<double> call_implied_vol(double price, double spot, double strike, double rate, double tenor) {
    return implied_vol(price, spot, strike, rate, tenor, OptionKind::call);
}

/// Uses the grids `grid_for(maturity)` (the u range must grow with the maturity).
template <class GridFn>
VolSurface build_surface(const VnbParams& params, std::span<const double> strikes, std::span<const double> maturities,
                         GridFn&& grid_for, double spot = 100.0, std::optional<SurfaceMc> mc = std::nullopt) {
    if (strikes.empty() || maturities.empty()) throw std::invalid_argument("surface needs strikes and maturities");
    VolSurface s;
    s.strikes.assign(strikes.begin(), strikes.end());
    s.maturities.assign(maturities.begin(), maturities.end());
    const std::size_t nt = maturities.size(), nk = strikes.size();
    const double nan = std::numeric_limits<double>::quiet_NaN();
    s.vols.assign(nt, std::vector<double>(nk, nan));
    s.prices.assign(nt, std::vector<double>(nk, nan));
    s.flags.assign(nt, std::vector<std::string>(nk));
    s.mass_deficit.assign(nt, nan);
    if (mc) {
        s.ci_low.emplace(nt, std::vector<double>(nk, nan));
        s.ci_high.emplace(nt, std::vector<double>(nk, nan));
    }
    for (std::size_t t = 0; t < nt; ++t) {
        const double tenor = maturities[t];
        OptionContract c;
        c.spot = spot;
        c.rate = params.r;
        c.t0 = params.t0;
        c.T = params.t0 + tenor;
        c.style = OptionStyle::vanilla_vnb;
        TerminalLaw law;
        try {
            law = solve_vnb(c, params, grid_for(tenor));
        } catch (const std::exception& e) {
            for (auto& f : s.flags[t]) f = std::string("propagation failed: ") + e.what();
            continue;
        }
        s.mass_deficit[t] = 1.0 - law.mass;
        std::optional<McSamples> samples;
        if (mc) {
            auto p = params;
            p.T = c.T;
            McConfig cfg{ModelSpec{p}, Measure::risk_neutral, std::log(c.T / p.t0), law.grid.dtau, mc->n_paths, mc->seed,
                         Functional::integrated_omega_squared, mc->antithetic};
            samples = simulate(cfg);
        }
        for (std::size_t k = 0; k < nk; ++k) {
            c.strike = strikes[k];
            c.kind = OptionKind::put;
            // Calls from puts by parity: the put ignores the far upper tail that a finite
            // u grid loses, which would otherwise pull the ITM call (and its vol) down.
            const double fwd = spot - c.strike * c.discount();
            const double price = price_from_law(law, c, true) + fwd;
            s.prices[t][k] = price;
            if (const auto iv = call_implied_vol(price, spot, c.strike, c.rate, tenor)) s.vols[t][k] = *iv;
            else s.flags[t][k] = "price outside the no-arbitrage band";
            if (samples) {
                const double ek = c.strike / spot;
                auto p = params;
                const auto e = estimate_payoff(
                    *samples,
                    [&](double om, double u) { return spot * std::max(ek - std::exp(c.rate * tenor) * vnb_growth(p, c.T, om, u), 0.0); },
                    c.discount());
                const auto lo = call_implied_vol(e.ci95_low + fwd, spot, c.strike, c.rate, tenor);
                const auto hi = call_implied_vol(e.ci95_high + fwd, spot, c.strike, c.rate, tenor);
                (*s.ci_low)[t][k] = lo ? *lo : nan;
                (*s.ci_high)[t][k] = hi ? *hi : nan;
            }
        }
    }
    return s;
}

/// mean(IV(K_lo), IV(K_hi)) - IV(K_atm) on one maturity row; nullopt if a vol is missing.
inline std::optional<double> smile_spread(const VolSurface& s, std::size_t t, double k_lo, double k_atm, double k_hi) {
    auto at = [&](double K) -> std::optional<double> {
        for (std::size_t k = 0; k < s.strikes.size(); ++k)
            if (std::fabs(s.strikes[k] - K) < 1e-9 && s.has(t, k)) return s.vols[t][k];
        return std::nullopt;
    };
    const auto a = at(k_lo), b = at(k_atm), c = at(k_hi);
    if (!a || !b || !c) return std::nullopt;
    return 0.5 * (*a + *c) - *b;
}

}  // namespace fca
