#pragma once

/// Euler-Maruyama Monte Carlo in the native coordinates of each model.
///
/// Nothing here goes through the Lamperti transform or the convolution engine; the
/// coefficients are written out again from the SDEs so the simulator can serve as an
/// independent oracle.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <variant>
#include <vector>

#include "fca/error.hpp"
#include "fca/models.hpp"

namespace fca {

/// Philox4x32-10 counter-based generator (Salmon et al., Random123).
struct Philox4x32 {
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    static Counter generate(Counter ctr, Key key) {
        constexpr std::uint32_t m0 = 0xD2511F53u, m1 = 0xCD9E8D57u;
        constexpr std::uint32_t w0 = 0x9E3779B9u, w1 = 0xBB67AE85u;
        for (int round = 0; round < 10; ++round) {
            const std::uint64_t p0 = static_cast<std::uint64_t>(m0) * ctr[0];
            const std::uint64_t p1 = static_cast<std::uint64_t>(m1) * ctr[2];
            ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0], static_cast<std::uint32_t>(p1),
                   static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1], static_cast<std::uint32_t>(p0)};
            key[0] += w0;
            key[1] += w1;
        }
        return ctr;
    }
};

/// Standard normals indexed by (seed, path, draw): draw pairs 2c, 2c+1 come from one
/// Philox block with counter (c, path) through Box-Muller.
class NormalStream {
public:
    NormalStream(std::uint64_t seed, std::uint64_t path)
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)}, path_(path) {}

    double next() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const auto r = Philox4x32::generate({static_cast<std::uint32_t>(call_), static_cast<std::uint32_t>(call_ >> 32),
                                             static_cast<std::uint32_t>(path_), static_cast<std::uint32_t>(path_ >> 32)},
                                            key_);
        ++call_;
        const std::uint64_t a = (static_cast<std::uint64_t>(r[0]) << 32) | r[1];
        const std::uint64_t b = (static_cast<std::uint64_t>(r[2]) << 32) | r[3];
        const double u1 = (static_cast<double>(a >> 11) + 1.0) * 0x1.0p-53;  // (0, 1]
        const double u2 = static_cast<double>(b >> 11) * 0x1.0p-53;          // [0, 1)
        const double rad = std::sqrt(-2.0 * std::log(u1));
        spare_ = rad * std::sin(2.0 * M_PI * u2);
        have_spare_ = true;
        return rad * std::cos(2.0 * M_PI * u2);
    }

private:
    Philox4x32::Key key_;
    std::uint64_t path_;
    std::uint64_t call_ = 0;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

enum class Functional { none, geometric_average, integrated_omega_squared };

struct McConfig {
    ModelSpec model;
    Measure measure = Measure::objective;
    double tau_end = 1.0;
    double dtau = 1e-3;
    std::size_t n_paths = 1'000'000;
    std::uint64_t seed = 20240521;
    Functional functional = Functional::none;
    bool antithetic = false;
    unsigned threads = 0;  ///< 0: hardware concurrency
    std::vector<double> snapshot_taus = {};  ///< extra times (multiples of dtau) at which the state is kept
};

/// Terminal native state per path (X, or Omega for VNB) and the optional functional.
///
/// geometric_average: U = (1/n) sum_j (j dtau/2 + sqrt(t0)) X_j.
/// integrated_omega_squared: U = sum_j dtau Omega_j^2.
struct McSamples {
    std::vector<double> state;
    std::vector<double> functional;
    std::vector<std::vector<double>> snapshots;  ///< state at each snapshot tau
    std::size_t steps = 0;
    double dtau = 0.0;
    bool antithetic = false;
};

namespace detail {

/// Native SDE coefficients with the time dependence evaluated once per step.
struct McFrozen {
    enum class Kind { quadratic, piecewise, vnb } kind = Kind::quadratic;
    double a = 0.0, b = 0.0, c = 0.0, d = 0.0, e = 0.0;  ///< quadratic and VNB
    double s = 0.0, eps = 0.0, s2 = 0.0, level = 0.0;   ///< piecewise: drift = level - half_s2_eps |x|
    double half_s2_eps = 0.0;

    /// (drift, squared diffusion) at x.
    std::pair<double, double> eval(double x) const {
        switch (kind) {
            case Kind::piecewise: {
                const double ax = std::fabs(x);
                return {level - half_s2_eps * ax, s2 * (s + eps * ax)};
            }
            default:
                return {a * x + b, c * x * x + d * x + e};
        }
    }
};

inline McFrozen mc_freeze(const ModelSpec& model, Measure measure, double tau) {
    McFrozen f;
    if (const auto* q = std::get_if<QuadraticParams>(&model)) {
        f.kind = McFrozen::Kind::quadratic;
        f.a = q->a;
        f.b = q->b;
        f.c = q->c;
        f.d = q->d;
        f.e = q->e.value(tau);
        return f;
    }
    if (const auto* p = std::get_if<PiecewiseParams>(&model)) {
        f.kind = McFrozen::Kind::piecewise;
        f.s = 0.5 * tau + std::sqrt(p->t0);
        f.eps = p->epsilon;
        f.s2 = p->sigma * p->sigma;
        if (measure == Measure::objective) {
            f.level = p->mu * f.s;
        } else {
            f.level = (p->r - 0.5 * f.s2) * f.s;
            f.half_s2_eps = 0.5 * f.s2 * p->epsilon;
        }
        return f;
    }
    const auto& v = std::get<VnbParams>(model);
    const double t = v.t0 * std::exp(tau);
    f.kind = McFrozen::Kind::vnb;
    f.c = v.alpha / ((1.0 - v.alpha) * (2.0 - v.alpha));
    f.e = std::pow((1.0 - v.alpha) * (2.0 - v.alpha), v.alpha / (2.0 - v.alpha)) * std::pow(t, 2.0 / (2.0 - v.alpha));
    return f;
}

/// (drift, squared diffusion) of the native SDE in integral time.
inline std::pair<double, double> mc_coefficients(const ModelSpec& model, Measure measure, double x, double tau) {
    return mc_freeze(model, measure, tau).eval(x);
}

inline double mc_initial_state(const ModelSpec& model) {
    if (const auto* q = std::get_if<QuadraticParams>(&model)) return q->x0;
    if (const auto* v = std::get_if<VnbParams>(&model)) return v->omega0;
    return 0.0;
}

/// Time at which the coefficients of step i are evaluated. The piecewise diffusion
/// vanishes at (tau, x) = (0, 0) when t0 = 0, so its first step uses the midpoint.
inline double mc_eval_time(const ModelSpec& model, std::size_t i, double dtau) {
    if (i == 0) {
        if (const auto* p = std::get_if<PiecewiseParams>(&model); p && p->t0 == 0.0) return 0.5 * dtau;
    }
    return static_cast<double>(i) * dtau;
}

}  // namespace detail

/// Runs the path set. Path k draws from stream (seed, k) (antithetic pairs share
/// stream k/2 with opposite signs), so the result does not depend on the thread count.
inline McSamples simulate(const McConfig& cfg) {
    if (cfg.n_paths < 1) throw std::invalid_argument("n_paths must be >= 1");
    if (!(cfg.dtau > 0.0) || !(cfg.tau_end > 0.0)) throw std::invalid_argument("dtau and tau_end must be > 0");
    if (cfg.antithetic && cfg.n_paths % 2 != 0) throw std::invalid_argument("antithetic sampling needs an even path count");
    validate_model(cfg.model);
    const auto n = static_cast<std::size_t>(std::llround(cfg.tau_end / cfg.dtau));
    if (n < 1) throw std::invalid_argument("tau_end shorter than one step");
    const double dt = cfg.tau_end / static_cast<double>(n);
    const double sq = std::sqrt(dt);

    McSamples out;
    out.state.resize(cfg.n_paths);
    if (cfg.functional != Functional::none) out.functional.resize(cfg.n_paths);
    out.steps = n;
    out.dtau = dt;
    out.antithetic = cfg.antithetic;

    const double sqrt_t0 = std::holds_alternative<PiecewiseParams>(cfg.model)
                               ? std::sqrt(std::get<PiecewiseParams>(cfg.model).t0)
                               : 0.0;
    const double x0 = detail::mc_initial_state(cfg.model);
    std::vector<detail::McFrozen> coef(n);
    for (std::size_t i = 0; i < n; ++i)
        coef[i] = detail::mc_freeze(cfg.model, cfg.measure, detail::mc_eval_time(cfg.model, i, dt));

    std::vector<std::size_t> snap_step;
    for (double t : cfg.snapshot_taus) {
        const auto k = static_cast<std::size_t>(std::llround(t / dt));
        if (k < 1 || k > n || std::fabs(t / dt - static_cast<double>(k)) > 1e-6)
            throw std::invalid_argument("snapshot tau " + std::to_string(t) + " is not a multiple of dtau");
        snap_step.push_back(k);
    }
    out.snapshots.assign(snap_step.size(), std::vector<double>(cfg.n_paths));

    const std::size_t units = cfg.antithetic ? cfg.n_paths / 2 : cfg.n_paths;
    unsigned nt = cfg.threads ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
    nt = static_cast<unsigned>(std::min<std::size_t>(nt, units));
    std::vector<std::exception_ptr> errors(nt);

    auto run_unit = [&](std::size_t unit) {
        NormalStream rng(cfg.seed, unit);
        const int signs = cfg.antithetic ? 2 : 1;
        double x[2] = {x0, x0};
        double acc[2] = {0.0, 0.0};
        for (std::size_t i = 0; i < n; ++i) {
            const double w = rng.next() * sq;
            for (int s = 0; s < signs; ++s) {
                const auto [m, v] = coef[i].eval(x[s]);
                if (v < 0.0) throw NumericalError("negative diffusion argument in the Monte Carlo path");
                x[s] += m * dt + std::sqrt(v) * (s == 0 ? w : -w);
                if (cfg.functional == Functional::geometric_average) {
                    acc[s] += (static_cast<double>(i + 1) * dt / 2.0 + sqrt_t0) * x[s];
                } else if (cfg.functional == Functional::integrated_omega_squared) {
                    acc[s] += dt * x[s] * x[s];
                }
            }
            for (std::size_t q = 0; q < snap_step.size(); ++q) {
                if (snap_step[q] != i + 1) continue;
                for (int s = 0; s < signs; ++s)
                    out.snapshots[q][cfg.antithetic ? 2 * unit + static_cast<std::size_t>(s) : unit] = x[s];
            }
        }
        for (int s = 0; s < signs; ++s) {
            const std::size_t k = cfg.antithetic ? 2 * unit + static_cast<std::size_t>(s) : unit;
            out.state[k] = x[s];
            if (cfg.functional == Functional::geometric_average) out.functional[k] = acc[s] / static_cast<double>(n);
            else if (cfg.functional == Functional::integrated_omega_squared) out.functional[k] = acc[s];
        }
    };

    auto worker = [&](unsigned t) {
        try {
            const std::size_t lo = units * t / nt, hi = units * (t + 1) / nt;
            for (std::size_t u = lo; u < hi; ++u) run_unit(u);
        } catch (...) {
            errors[t] = std::current_exception();
        }
    };
    if (nt == 1) {
        worker(0);
    } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < nt; ++t) pool.emplace_back(worker, t);
        for (auto& th : pool) th.join();
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return out;
}

/// Equal-width histogram with per-bin 95% normal-approximation intervals on the density.
struct McHistogram {
    std::vector<double> bin_edges;
    std::vector<std::size_t> counts;
    std::vector<double> density;
    std::vector<double> ci_low;
    std::vector<double> ci_high;
    std::size_t total = 0;  ///< all samples, including those outside the range

    std::size_t bins() const { return counts.size(); }
    double center(std::size_t b) const { return 0.5 * (bin_edges[b] + bin_edges[b + 1]); }
};

inline constexpr double kZ95 = 1.959963984540054;

/// Density is count / (N width) with N the total sample count, so samples outside
/// [lo, hi) reduce the integral below one. Pass the sample range to keep every sample.
inline McHistogram histogram(std::span<const double> samples, std::size_t bins, double lo, double hi) {
    if (samples.empty()) throw std::invalid_argument("histogram needs at least one sample");
    if (bins < 1 || !(hi > lo)) throw std::invalid_argument("histogram needs bins >= 1 and hi > lo");
    McHistogram h;
    h.total = samples.size();
    h.bin_edges.resize(bins + 1);
    const double w = (hi - lo) / static_cast<double>(bins);
    for (std::size_t b = 0; b <= bins; ++b) h.bin_edges[b] = lo + static_cast<double>(b) * w;
    h.counts.assign(bins, 0);
    for (double s : samples) {
        if (!(s >= lo && s <= hi)) continue;
        auto b = static_cast<std::size_t>((s - lo) / w);
        h.counts[std::min(b, bins - 1)]++;
    }
    const double n = static_cast<double>(h.total);
    h.density.resize(bins);
    h.ci_low.resize(bins);
    h.ci_high.resize(bins);
    for (std::size_t b = 0; b < bins; ++b) {
        const double p = static_cast<double>(h.counts[b]) / n;
        const double half = kZ95 * std::sqrt(p * (1.0 - p) / n);
        h.density[b] = p / w;
        h.ci_low[b] = std::max(0.0, p - half) / w;
        h.ci_high[b] = (p + half) / w;
    }
    return h;
}

inline McHistogram histogram(std::span<const double> samples, std::size_t bins) {
    if (samples.empty()) throw std::invalid_argument("histogram needs at least one sample");
    const auto [mn, mx] = std::minmax_element(samples.begin(), samples.end());
    double lo = *mn, hi = *mx;
    if (!(hi > lo)) {
        lo -= 0.5;
        hi += 0.5;
    }
    return histogram(samples, bins, lo, hi);
}

struct McEstimate {
    double mean = 0.0;
    double std_error = 0.0;
    double ci95_low = 0.0;
    double ci95_high = 0.0;
};

/// Mean of `values` with a 95% interval. With `paired`, consecutive entries are
/// averaged first (antithetic pairs are not independent of each other).
inline McEstimate estimate(std::span<const double> values, bool paired = false) {
    std::vector<double> v;
    std::span<const double> use = values;
    if (paired) {
        if (values.size() % 2 != 0) throw std::invalid_argument("paired estimate needs an even sample count");
        v.resize(values.size() / 2);
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = 0.5 * (values[2 * i] + values[2 * i + 1]);
        use = v;
    }
    if (use.empty()) throw std::invalid_argument("estimate needs at least one value");
    const double n = static_cast<double>(use.size());
    // Two-pass mean and variance.
    double mean = 0.0;
    for (double x : use) mean += x;
    mean /= n;
    double ss = 0.0;
    for (double x : use) ss += (x - mean) * (x - mean);
    McEstimate e;
    e.mean = mean;
    e.std_error = use.size() > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0;
    e.ci95_low = mean - kZ95 * e.std_error;
    e.ci95_high = mean + kZ95 * e.std_error;
    return e;
}

/// discount * mean(payoff(sample index)) with a 95% interval.
inline McEstimate estimate_payoff(const McSamples& s, const std::function<double(double state, double functional)>& payoff,
                                  double discount) {
    std::vector<double> v(s.state.size());
    for (std::size_t k = 0; k < v.size(); ++k) {
        v[k] = discount * payoff(s.state[k], s.functional.empty() ? 0.0 : s.functional[k]);
    }
    return estimate(v, s.antithetic);
}

}  // namespace fca
