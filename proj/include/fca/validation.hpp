#pragma once

/// Acceptance suite: every criterion runs at desk scale and reports a measured value
/// against its tolerance. Failures are results, never exceptions.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "fca/black_scholes.hpp"
#include "fca/grid.hpp"
#include "fca/joint.hpp"
#include "fca/kernel.hpp"
#include "fca/mc.hpp"
#include "fca/models.hpp"
#include "fca/pricing.hpp"
#include "fca/printed_drift.hpp"
#include "fca/propagate.hpp"
#include "fca/reference_pdf.hpp"

namespace fca::validation {

struct CriterionResult {
    int id = 0;
    std::string name;
    bool passed = false;
    double measured = std::numeric_limits<double>::quiet_NaN();
    double tolerance = std::numeric_limits<double>::quiet_NaN();
    double seconds = 0.0;
    std::string details;
};

struct Options {
    std::size_t mc_paths = 1'000'000;
    std::uint64_t seed = 20240521;
    bool antithetic = true;            ///< pricing oracles (5-7) use antithetic pairs
    unsigned threads = 0;
    std::size_t stationary_m = 8192;   ///< lowering it is the negative control of criterion 1
    std::set<int> only;                ///< empty: all criteria
};

inline const std::vector<std::string>& criterion_names() {
    static const std::vector<std::string> names = {
        "stationary quadratic density",
        "piecewise objective density",
        "Friedrich density vs MC",
        "martingale",
        "vanilla piecewise price",
        "geometric Asian price",
        "VNB joint pricing",
        "FFT vs dense Toeplitz",
        "propagate complexity",
        "implied-vol round trip",
        "drift cross-validation",
    };
    return names;
}

namespace detail {

using Clock = std::chrono::steady_clock;

inline double since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

inline std::string fmt(double v, int prec = 6) {
    std::ostringstream os;
    os.precision(prec);
    os << v;
    return os.str();
}

inline PiecewiseParams paper_piecewise(double epsilon) {
    PiecewiseParams p;
    p.sigma = 1.0;
    p.epsilon = epsilon;
    return p;
}

inline QuadraticParams stationary_quadratic() {
    QuadraticParams q;
    q.a = -20.0;
    q.b = 0.1;
    q.c = 4.5;
    q.d = 0.1;
    q.e = ETilde::constant(0.1);
    return q;
}

inline QuadraticParams friedrich_quadratic() {
    QuadraticParams q;
    q.a = -0.44;
    q.b = 0.0;
    q.c = 0.038;
    q.d = 3.04e-3;
    q.e = ETilde::friedrich();
    return q;
}

inline VnbParams paper_vnb(double alpha = 0.1, double omega0 = 0.0, double tenor = 0.5) {
    VnbParams p;
    p.alpha = alpha;
    p.omega0 = omega0;
    p.t0 = 0.2;
    p.sigma = 0.3;
    p.r = 0.03;
    p.T = p.t0 + tenor;
    return p;
}

/// Joint grids for VNB prices at the given tenor.
inline PricingGrids vnb_grids(std::size_t mz, std::size_t mu, double u_min, double dtau) {
    PricingGrids g;
    g.z_grid = build_grid(-10.24, mz);
    g.u_grid = build_u_grid(u_min, mu);
    g.dtau = dtau;
    return g;
}

/// Trapezoid integral of the linearly interpolated z-density over [a, b].
inline double integrate_density(const DensityVector& p, const SpatialGrid& g, double a, double b) {
    const double lo = g.node(0), hi = g.node(g.m - 1);
    a = std::clamp(a, lo, hi);
    b = std::clamp(b, lo, hi);
    if (!(b > a)) return 0.0;
    const int n = std::max(8, static_cast<int>(std::ceil((b - a) / g.dz)) * 4);
    const double h = (b - a) / n;
    double acc = 0.5 * (interpolate_density(p, g, a) + interpolate_density(p, g, b));
    for (int i = 1; i < n; ++i) acc += interpolate_density(p, g, a + i * h);
    return acc * h;
}

}  // namespace detail

/// Expensive artifacts shared between criteria, computed on first use.
class Context {
public:
    explicit Context(Options o) : opt_(std::move(o)) {}

    const Options& options() const { return opt_; }

    /// Piecewise risk-neutral vanilla law at T = 1, eps = 2.
    const TerminalLaw& vanilla_law() {
        if (!vanilla_) {
            const auto t = detail::Clock::now();
            OptionContract c;
            c.T = 1.0;
            // About 16% of E[S_T] sits above e^5 S0, so the call needs a finer step than the
            // put: m = 2^12, dtau = 5e-4 brings the martingale error from 4e-4 to 1.6e-4.
            PricingGrids g;
            g.z_grid = build_grid(-10.24, 4096);
            g.dtau = 5e-4;
            vanilla_ = solve_vanilla_piecewise(c, detail::paper_piecewise(2.0), g);
            vanilla_seconds_ = detail::since(t);
        }
        return *vanilla_;
    }
    double vanilla_seconds() const { return vanilla_seconds_; }

    /// Paths of the risk-neutral piecewise model (eps = 2) to T = 1 with the geometric average.
    const McSamples& piecewise_mc() {
        if (!pw_mc_) {
            const auto t = detail::Clock::now();
            auto p = detail::paper_piecewise(2.0);
            p.r = 0.03;
            McConfig cfg{ModelSpec{p}, Measure::risk_neutral, 2.0, 1e-3, opt_.mc_paths, opt_.seed,
                         Functional::geometric_average, opt_.antithetic};
            cfg.threads = opt_.threads;
            pw_mc_ = simulate(cfg);
            pw_mc_seconds_ = detail::since(t);
        }
        return *pw_mc_;
    }
    double piecewise_mc_seconds() const { return pw_mc_seconds_; }

    /// VNB law and joint density at T - t0 = 0.5 (alpha = 0.1, Omega0 = 0).
    const TerminalLaw& vnb_law() {
        if (!vnb_) {
            OptionContract c;
            c.t0 = 0.2;
            c.T = 0.7;
            c.style = OptionStyle::vanilla_vnb;
            JointDensity J;
            vnb_ = solve_vnb(c, detail::paper_vnb(), detail::vnb_grids(1024, 2048, -5.12, 1e-3), &J);
            vnb_joint_ = std::move(J);
        }
        return *vnb_;
    }
    const JointDensity& vnb_joint() {
        vnb_law();
        return *vnb_joint_;
    }

private:
    Options opt_;
    std::optional<TerminalLaw> vanilla_;
    double vanilla_seconds_ = 0.0;
    std::optional<McSamples> pw_mc_;
    double pw_mc_seconds_ = 0.0;
    std::optional<TerminalLaw> vnb_;
    std::optional<JointDensity> vnb_joint_;
};

/// 1. Stationary quadratic density at tau = 1 against the closed form on the z axis.
inline CriterionResult stationary_density(Context& ctx) {
    CriterionResult r;
    r.tolerance = 0.02;
    const auto q = detail::stationary_quadratic();
    const auto g = build_grid(-10.24, ctx.options().stationary_m);
    const auto t = detail::Clock::now();
    PropagateStats st;
    const auto p = propagate(ModelSpec{q}, Measure::objective, g, time_grid_to(1.0, 1e-3), {}, {}, &st).front();
    const double secs = detail::since(t);
    const StationaryDensity sd(q);
    double e6 = 0.0, e10 = 0.0;
    for (std::size_t j = 0; j < g.m; ++j) {
        const double ref = sd.in_z(g.node(j));
        const double rel = std::fabs(p.values[j] - ref) / ref;
        if (ref >= 1e-6) e6 = std::max(e6, rel);
        if (ref >= 1e-10) e10 = std::max(e10, rel);
    }
    r.measured = e6;
    r.passed = e6 <= 0.02 && e10 <= 0.2 && secs <= 120.0;
    r.details = "m=" + std::to_string(g.m) + " err(>=1e-6)=" + detail::fmt(e6, 4) + " err(>=1e-10)=" +
                detail::fmt(e10, 4) + " (tol 0.2) propagate=" + detail::fmt(secs, 3) + "s (tol 120) mass=" +
                detail::fmt(p.mass, 10);
    return r;
}

/// 2. Piecewise objective densities at tau = 1 (t = 0.25) against the closed form in x.
inline CriterionResult piecewise_density(Context&) {
    CriterionResult r;
    r.tolerance = 0.02;
    const auto g = build_grid(-10.24, 2048);
    const auto tg = time_grid_to(1.0, 1e-4);
    double worst = 0.0;
    bool alpha_ok = true;
    std::string det;
    const double eps_list[] = {0.5, 1.0, 2.0};
    const double alpha_expected[] = {4.0, 1.0, 0.25};
    for (int e = 0; e < 3; ++e) {
        const auto p = detail::paper_piecewise(eps_list[e]);
        const ModelSpec model{p};
        const auto dens = propagate(model, Measure::objective, g, tg).front();
        std::vector<double> xs;
        for (std::size_t j = 1; j + 1 < g.m; ++j) xs.push_back(lamperti_inverse(model, Measure::objective, g.node(j), 1.0));
        const auto fx = density_in_x(dens, model, Measure::objective, g, 1.0, xs);
        double err = 0.0;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            const double ref = piecewise_pdf(p.sigma, p.epsilon, xs[i], 0.25);
            if (ref >= 1e-6) err = std::max(err, std::fabs(fx[i] - ref) / ref);
        }
        const double alpha = piecewise_alpha(p.sigma, p.epsilon);
        alpha_ok = alpha_ok && alpha == alpha_expected[e];
        worst = std::max(worst, err);
        det += "eps=" + detail::fmt(eps_list[e]) + ": err=" + detail::fmt(err, 4) + " alpha=" + detail::fmt(alpha) + "; ";
    }
    r.measured = worst;
    r.passed = worst <= r.tolerance && alpha_ok;
    r.details = det + (alpha_ok ? "alpha exact" : "alpha mismatch");
    return r;
}

/// 3. Friedrich density against MC histograms in x at tau = 0.5 and 1.
inline CriterionResult friedrich_density(Context& ctx) {
    CriterionResult r;
    r.tolerance = 0.90;
    const auto q = detail::friedrich_quadratic();
    const ModelSpec model{q};
    const auto g = build_grid(-10.24, 8192);
    const std::vector<double> taus = {0.5, 1.0};
    const auto dens = propagate(model, Measure::objective, g, time_grid_to(1.0, 1e-3), taus);
    McConfig cfg{model, Measure::objective, 1.0, 1e-3, ctx.options().mc_paths, ctx.options().seed};
    cfg.threads = ctx.options().threads;
    cfg.snapshot_taus = {0.5};
    const auto mc = simulate(cfg);
    double worst = 1.0;
    std::string det;
    for (std::size_t s = 0; s < taus.size(); ++s) {
        const auto& p = dens[s];
        const auto& samples = s == 0 ? mc.snapshots[0] : mc.state;
        const double peak = *std::max_element(p.values.begin(), p.values.end());
        std::size_t lo = 0, hi = g.m - 1;
        while (lo < hi && p.values[lo] < 1e-12 * peak) ++lo;
        while (hi > lo && p.values[hi] < 1e-12 * peak) --hi;
        const double x_lo = lamperti_inverse(model, Measure::objective, g.node(lo), taus[s]);
        const double x_hi = lamperti_inverse(model, Measure::objective, g.node(hi), taus[s]);
        const auto h = histogram(samples, 200, x_lo, x_hi);
        std::size_t used = 0, covered = 0;
        for (std::size_t b = 0; b < h.bins(); ++b) {
            if (h.counts[b] < 100) continue;
            ++used;
            const double za = lamperti_forward(model, Measure::objective, h.bin_edges[b], taus[s]);
            const double zb = lamperti_forward(model, Measure::objective, h.bin_edges[b + 1], taus[s]);
            const double avg = detail::integrate_density(p, g, za, zb) / (h.bin_edges[b + 1] - h.bin_edges[b]);
            if (avg >= h.ci_low[b] && avg <= h.ci_high[b]) ++covered;
        }
        const double frac = used ? static_cast<double>(covered) / static_cast<double>(used) : 0.0;
        worst = std::min(worst, frac);
        det += "tau=" + detail::fmt(taus[s]) + ": " + std::to_string(covered) + "/" + std::to_string(used) +
               " bins covered over x in [" + detail::fmt(x_lo, 4) + ", " + detail::fmt(x_hi, 4) + "]; ";
    }
    r.measured = worst;
    r.passed = worst >= r.tolerance;
    r.details = det + "N=" + std::to_string(cfg.n_paths);
    return r;
}

/// 4. Discounted forward of the risk-neutral densities.
inline CriterionResult martingale(Context& ctx) {
    CriterionResult r;
    r.tolerance = 3e-3;
    double worst = 0.0;
    std::string det;
    auto note = [&](const std::string& label, double ratio) {
        worst = std::max(worst, std::fabs(ratio - 1.0));
        det += label + "=" + detail::fmt(ratio, 8) + "; ";
    };
    for (double eps : {0.5, 1.0, 2.0}) {
        OptionContract c;
        c.T = 0.25;
        note("piecewise eps=" + detail::fmt(eps) + " T=0.25",
             martingale_ratio(solve_vanilla_piecewise(c, detail::paper_piecewise(eps), PricingGrids{})));
    }
    note("piecewise eps=2 T=1", martingale_ratio(ctx.vanilla_law()));
    note("VNB T-t0=0.5", martingale_ratio(ctx.vnb_law()));
    r.measured = worst;
    r.passed = worst <= r.tolerance;
    r.details = det;
    return r;
}

/// 5. ATM vanilla call against MC; the MC call interval comes from the put through parity.
inline CriterionResult vanilla_price(Context& ctx) {
    CriterionResult r;
    r.tolerance = 0.5;
    OptionContract c;
    c.T = 1.0;
    const auto& law = ctx.vanilla_law();
    const double fca_call = price_from_law(law, c, true);
    c.kind = OptionKind::put;
    const double fca_put = price_from_law(law, c, true);
    const auto& mc = ctx.piecewise_mc();
    const double disc = c.discount();
    const auto put = estimate_payoff(mc, [&](double x, double) { return std::max(c.strike - c.spot * std::exp(x), 0.0); },
                                     disc);
    const double fwd = c.spot - c.strike * disc;
    const double lo = put.ci95_low + fwd, hi = put.ci95_high + fwd;
    const double half = 0.5 * (hi - lo);
    const double secs = ctx.vanilla_seconds() + ctx.piecewise_mc_seconds();
    r.measured = half;
    r.passed = fca_call >= lo && fca_call <= hi && half <= r.tolerance && secs <= 300.0;
    r.details = "FCA call=" + detail::fmt(fca_call, 8) + " (put " + detail::fmt(fca_put, 8) + ") MC call CI=[" +
                detail::fmt(lo, 8) + ", " + detail::fmt(hi, 8) + "] half-width=" + detail::fmt(half, 4) +
                " combined runtime=" + detail::fmt(ctx.vanilla_seconds(), 3) + "s FCA + " +
                detail::fmt(ctx.piecewise_mc_seconds(), 4) + "s MC (tol 300)";
    return r;
}

/// 6. Geometric Asian calls against the MC functional; Asian below vanilla.
inline CriterionResult asian_price(Context& ctx) {
    CriterionResult r;
    OptionContract c;
    c.T = 1.0;
    c.style = OptionStyle::geometric_asian_piecewise;
    PricingGrids g;
    g.z_grid = build_grid(-10.24, 1024);
    // Same du as u_min = -2.56, m_u = 2^11, with the range doubled: the average reaches
    // above 2.56 on rare paths whose payoff exp(2u) is large.
    g.u_grid = build_u_grid(-5.12, 4096);
    g.joint_convolution = ConvolutionMethod::fft;
    const auto law = solve_asian(c, detail::paper_piecewise(2.0), g);
    const auto& vlaw = ctx.vanilla_law();
    const auto& mc = ctx.piecewise_mc();
    const double kappa = 2.0;  // 2 (sqrt T - sqrt t0)/(T - t0) at t0 = 0, T = 1
    bool ok = true;
    double worst = 0.0;
    std::string det;
    for (double K : {90.0, 100.0, 110.0}) {
        c.strike = K;
        const double a = price_from_law(law, c, false);
        OptionContract v = c;
        v.style = OptionStyle::vanilla_piecewise;
        const double van = price_from_law(vlaw, v, true);
        const auto e = estimate_payoff(
            mc, [&](double, double u) { return std::max(c.spot * std::exp(kappa * u) - K, 0.0); }, c.discount());
        const bool inside = a >= e.ci95_low && a <= e.ci95_high;
        ok = ok && inside && a <= van;
        worst = std::max(worst, std::fabs(a - e.mean) / e.std_error);
        det += "K=" + detail::fmt(K) + ": FCA=" + detail::fmt(a, 7) + " MC=[" + detail::fmt(e.ci95_low, 7) + ", " +
               detail::fmt(e.ci95_high, 7) + "] vanilla=" + detail::fmt(van, 7) + "; ";
    }
    r.measured = worst;
    r.tolerance = kZ95;
    r.passed = ok;
    r.details = det + "u-leak=" + detail::fmt(1.0 - law.mass, 4) + " (measured: max |FCA-MC|/stderr)";
    return r;
}

/// Implied-vol smile spread mean(IV(80), IV(120)) - IV(100) of the VNB model on a coarse grid.
inline std::optional<double> vnb_smile_spread(double alpha, double omega0, double tenor, std::string& note) {
    const auto p = detail::paper_vnb(alpha, omega0, tenor);
    const double u_min = tenor > 1.0 ? -20.48 : -5.12;
    const std::size_t m_u = tenor > 1.0 ? 2048 : 1024;
    const std::vector<double> strikes = {80.0, 100.0, 120.0};
    const std::vector<double> tenors = {tenor};
    const auto s = build_surface(p, strikes, tenors, [&](double) { return detail::vnb_grids(512, m_u, u_min, 2e-3); });
    const auto spread = smile_spread(s, 0, 80.0, 100.0, 120.0);
    note += "T-t0=" + detail::fmt(tenor) + " IV=(" + detail::fmt(s.vols[0][0], 5) + ", " + detail::fmt(s.vols[0][1], 5) +
            ", " + detail::fmt(s.vols[0][2], 5) + ") deficit=" + detail::fmt(s.mass_deficit[0], 3) + "; ";
    return spread;
}

/// 7. VNB: U support, prices against MC, parity and the smile flattening.
inline CriterionResult vnb_pricing(Context& ctx) {
    CriterionResult r;
    const auto& J = ctx.vnb_joint();
    const auto& law = ctx.vnb_law();
    double neg = 0.0;
    for (std::size_t j = 0; j < J.u_grid.m; ++j) {
        if (J.u_grid.node(j) >= -3.0 * J.u_grid.dz) continue;
        for (double v : J.row(j)) neg += v;
    }
    neg *= J.u_grid.dz * J.z_grid.dz;
    const bool support_ok = neg <= 1e-9;

    auto p = detail::paper_vnb();
    McConfig cfg{ModelSpec{p}, Measure::risk_neutral, std::log(p.T / p.t0), law.grid.dtau, ctx.options().mc_paths,
                 ctx.options().seed, Functional::integrated_omega_squared, ctx.options().antithetic};
    cfg.threads = ctx.options().threads;
    const auto mc = simulate(cfg);

    OptionContract c;
    c.t0 = p.t0;
    c.T = p.T;
    c.style = OptionStyle::vanilla_vnb;
    bool prices_ok = true;
    double parity_worst = 0.0;
    std::string det = "mass(u<-3du)=" + detail::fmt(neg, 3) + "; ";
    for (double K : {85.0, 100.0, 115.0}) {
        c.strike = K;
        c.kind = OptionKind::call;
        const double call = price_from_law(law, c, true);
        c.kind = OptionKind::put;
        const double put = price_from_law(law, c, true);
        const double grow = std::exp(c.rate * (c.T - c.t0));
        // MC call band from the put by parity, as for the piecewise vanilla.
        const auto e = estimate_payoff(
            mc, [&](double om, double u) { return std::max(K - c.spot * grow * vnb_growth(p, p.T, om, u), 0.0); },
            c.discount());
        const double fwd = c.spot - K * c.discount();
        const double lo = e.ci95_low + fwd, hi = e.ci95_high + fwd;
        const bool inside = call >= lo && call <= hi;
        prices_ok = prices_ok && inside;
        const double parity = std::fabs(call - put - c.spot + K * c.discount());
        parity_worst = std::max(parity_worst, parity);
        det += "K=" + detail::fmt(K) + ": call=" + detail::fmt(call, 7) + " MC=[" + detail::fmt(lo, 7) + ", " + detail::fmt(hi, 7) + "] parity=" + detail::fmt(parity, 3) + "; ";
    }
    const bool parity_ok = parity_worst <= 0.3;

    bool smile_ok = true;
    for (double alpha : {0.1, 0.4}) {
        std::string note;
        const auto s_short = vnb_smile_spread(alpha, 0.5, 0.5, note);
        const auto s_long = vnb_smile_spread(alpha, 0.5, 2.0, note);
        const bool ok = s_short && s_long && *s_short > *s_long;
        smile_ok = smile_ok && ok;
        det += "alpha=" + detail::fmt(alpha) + " spread(0.5)=" + (s_short ? detail::fmt(*s_short, 5) : "missing") +
               " spread(2)=" + (s_long ? detail::fmt(*s_long, 5) : "missing") + " [" + note + "] ";
    }
    r.measured = parity_worst;
    r.tolerance = 0.3;
    r.passed = support_ok && prices_ok && parity_ok && smile_ok;
    r.details = std::string("(a) ") + (support_ok ? "ok" : "FAIL") + " (b) " + (prices_ok ? "ok" : "FAIL") + " (c) " +
                (parity_ok ? "ok" : "FAIL") + " (d) " + (smile_ok ? "ok" : "FAIL") + " | " + det;
    return r;
}

/// 8. FFT Toeplitz product against the dense product.
inline CriterionResult fft_correctness(Context& ctx) {
    CriterionResult r;
    r.tolerance = 1e-12;
    std::mt19937_64 rng(ctx.options().seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const std::size_t sizes[] = {64, 128, 256, 512};
    const double dtaus[] = {1e-3, 1e-2, 0.1};
    double worst = 0.0;
    int vectors = 0;
    for (int i = 0; i < 100; ++i) {
        const std::size_t m = sizes[i % 4];
        const auto g = build_grid(-10.24, m);
        const auto k = build_kernel(g, dtaus[i % 3]);
        std::vector<double> v(m);
        for (auto& x : v) x = unif(rng);
        const auto a = toeplitz_apply(k, v);
        const auto b = toeplitz_apply_dense(k, v);
        for (std::size_t j = 0; j < m; ++j) worst = std::max(worst, std::fabs(a[j] - b[j]));
        ++vectors;
    }
    r.measured = worst;
    r.passed = worst < r.tolerance;
    r.details = std::to_string(vectors) + " random vectors, m in {64..512}";
    return r;
}

/// Median wall time of 5 propagations of the stationary quadratic model.
inline double median_propagate_seconds(std::size_t m, std::size_t n) {
    const auto q = detail::stationary_quadratic();
    const auto g = build_grid(-10.24, m);
    const auto tg = build_time_grid(1e-3, n);
    std::vector<double> t;
    for (int i = 0; i < 5; ++i) {
        const auto s = detail::Clock::now();
        propagate(ModelSpec{q}, Measure::objective, g, tg);
        t.push_back(detail::since(s));
    }
    std::sort(t.begin(), t.end());
    return t[2];
}

/// 9. Scaling of propagate in m and n.
inline CriterionResult complexity(Context&) {
    CriterionResult r;
    r.tolerance = 2.5;
    const double t11 = median_propagate_seconds(2048, 1000);
    const double t12 = median_propagate_seconds(4096, 1000);
    const double t13 = median_propagate_seconds(8192, 1000);
    const double t12n = median_propagate_seconds(4096, 2000);
    const double r1 = t12 / t11, r2 = t13 / t12, rn = t12n / t12;
    r.measured = std::max(r1, r2);
    r.passed = r1 <= 2.5 && r2 <= 2.5 && rn >= 1.8 && rn <= 2.2;
    r.details = "t(2^11,2^12,2^13)=" + detail::fmt(t11, 4) + ", " + detail::fmt(t12, 4) + ", " + detail::fmt(t13, 4) +
                "s ratios=" + detail::fmt(r1, 4) + ", " + detail::fmt(r2, 4) + " n-doubling ratio=" + detail::fmt(rn, 4) +
                " (tol [1.8, 2.2])";
    return r;
}

/// 10. Implied vol of Black-Scholes prices (out-of-the-money side) recovers sigma.
inline CriterionResult implied_vol_round_trip(Context& ctx) {
    CriterionResult r;
    r.tolerance = 1e-8;
    std::mt19937_64 rng(ctx.options().seed + 10);
    std::uniform_real_distribution<double> us(0.05, 1.5), uk(0.5, 2.0), ut(0.1, 3.0);
    const double S = 100.0, rate = 0.03;
    double worst = 0.0;
    int missing = 0;
    for (int i = 0; i < 1000; ++i) {
        const double sigma = us(rng), K = S * uk(rng), T = ut(rng);
        const auto kind = K >= S * std::exp(rate * T) ? OptionKind::call : OptionKind::put;
        const double price = bs_value(kind, S, K, rate, sigma, T);
        const auto iv = implied_vol(price, S, K, rate, T, kind);
        if (!iv) {
            ++missing;
            continue;
        }
        worst = std::max(worst, std::fabs(*iv - sigma));
    }
    r.measured = worst;
    r.passed = worst <= r.tolerance && missing == 0;
    r.details = "1000 triples, r=0.03, out-of-the-money type; no solution for " + std::to_string(missing);
    return r;
}

/// Generic unit-diffusion drift from finite differences of the transform and the diffusion.
inline double finite_difference_drift(const ModelSpec& model, Measure measure, double z, double tau) {
    const double x = lamperti_inverse(model, measure, z, tau);
    const auto nc = native_coefficients(model, measure, x, tau);
    const double ht = 1e-5 * std::max(1.0, tau);
    const double dz_dtau =
        (lamperti_forward(model, measure, x, tau + ht) - lamperti_forward(model, measure, x, tau - ht)) / (2.0 * ht);
    const double hx = 1e-6 * std::max(1.0, std::fabs(x));
    const double dd_dx = (native_coefficients(model, measure, x + hx, tau).diffusion -
                          native_coefficients(model, measure, x - hx, tau).diffusion) /
                         (2.0 * hx);
    return nc.drift / nc.diffusion + dz_dtau - 0.5 * dd_dx;
}

/// 11. Printed drifts against the finite-difference drift.
inline CriterionResult drift_cross_validation(Context& ctx) {
    CriterionResult r;
    r.tolerance = 1e-4;
    std::mt19937_64 rng(ctx.options().seed + 11);
    std::uniform_real_distribution<double> uz(-4.0, 4.0), ut(0.05, 2.0);
    auto close = [](double a, double b) { return std::fabs(a - b) <= 1e-4 * std::max(std::fabs(a), std::fabs(b)) + 1e-9; };
    double worst = 0.0;
    bool ok = true;
    std::string det;
    auto rel = [](double a, double b) { return std::fabs(a - b) / std::max({std::fabs(a), std::fabs(b), 1e-5}); };

    struct Case {
        std::string label;
        ModelSpec model;
        Measure measure;
        std::function<double(double, double)> printed;
    };
    const auto sq = detail::stationary_quadratic();
    const auto fr = detail::friedrich_quadratic();
    const auto vn1 = detail::paper_vnb(0.1, 0.0), vn4 = detail::paper_vnb(0.4, 0.5);
    const auto pw = detail::paper_piecewise(2.0);
    auto pw_rn = pw;
    pw_rn.r = 0.03;
    std::vector<Case> cases = {
        {"quadratic stationary", sq, Measure::objective, [&](double z, double t) { return printed::quadratic_drift(sq, z, t); }},
        {"quadratic Friedrich", fr, Measure::objective, [&](double z, double t) { return printed::quadratic_drift(fr, z, t); }},
        {"VNB alpha=0.1", vn1, Measure::risk_neutral, [&](double z, double t) { return printed::vnb_drift(vn1, z, t); }},
        {"VNB alpha=0.4 omega0=0.5", vn4, Measure::risk_neutral, [&](double z, double t) { return printed::vnb_drift(vn4, z, t); }},
        {"piecewise objective", pw, Measure::objective,
         [&](double z, double t) { return printed::piecewise_objective_drift(pw, z, t); }},
        {"piecewise risk-neutral (objective form + r s/Q - Q/2)", pw_rn, Measure::risk_neutral,
         [&](double z, double t) {
             return printed::piecewise_objective_drift(pw, z, t) + printed::piecewise_risk_neutral_correction(pw_rn, z, t);
         }},
    };
    for (const auto& c : cases) {
        double w = 0.0;
        for (int i = 0; i < 100; ++i) {
            double z = uz(rng);
            if (std::fabs(z) < 1e-3) z = 1e-3;
            const double tau = ut(rng);
            const double fd = finite_difference_drift(c.model, c.measure, z, tau);
            const double pr = c.printed(z, tau);
            const double en = drift_z(c.model, c.measure, z, tau);
            ok = ok && close(pr, fd) && close(en, fd);
            w = std::max({w, rel(pr, fd), rel(en, fd)});
        }
        worst = std::max(worst, w);
        det += c.label + ": " + detail::fmt(w, 3) + "; ";
    }
    // The printed risk-neutral piecewise form, reported only.
    int agree = 0, flagged = 0;
    double worst_off = 0.0;
    for (int i = 0; i < 100; ++i) {
        double z = uz(rng);
        if (std::fabs(z) < 1e-3) z = 1e-3;
        const double tau = ut(rng);
        const double fd = finite_difference_drift(ModelSpec{pw_rn}, Measure::risk_neutral, z, tau);
        const double pr = printed::piecewise_risk_neutral_drift(pw_rn, z, tau);
        if (z < 0.0) ++flagged;
        if (close(pr, fd)) ++agree;
        else if (z >= 0.0) worst_off = std::max(worst_off, rel(pr, fd));
    }
    r.measured = worst;
    r.passed = ok;
    r.details = det + "printed risk-neutral piecewise form (reported): agrees at " + std::to_string(agree) +
                "/100 samples, " + std::to_string(flagged) + " in the z<0 sign-wrapping locus, max rel. diff off the locus " +
                detail::fmt(worst_off, 3);
    return r;
}

/// Runs the selected criteria in order; `on_result` sees each result as soon as it is ready.
inline std::vector<CriterionResult> run_all(const Options& opt,
                                            const std::function<void(const CriterionResult&)>& on_result = {}) {
    using Fn = CriterionResult (*)(Context&);
    const Fn fns[] = {stationary_density, piecewise_density, friedrich_density, martingale,
                      vanilla_price,      asian_price,       vnb_pricing,       fft_correctness,
                      complexity,         implied_vol_round_trip, drift_cross_validation};
    Context ctx(opt);
    std::vector<CriterionResult> out;
    for (int id = 1; id <= 11; ++id) {
        if (!opt.only.empty() && !opt.only.count(id)) continue;
        const auto t = detail::Clock::now();
        CriterionResult r;
        try {
            r = fns[id - 1](ctx);
        } catch (const std::exception& e) {
            r.passed = false;
            r.details = std::string("error: ") + e.what();
        }
        r.id = id;
        r.name = criterion_names()[static_cast<std::size_t>(id - 1)];
        r.seconds = detail::since(t);
        if (on_result) on_result(r);
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace fca::validation
