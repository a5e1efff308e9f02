#pragma once

/// Black-Scholes prices and implied volatility.

#include <algorithm>
#include <cmath>
#include <optional>

namespace fca {

enum class OptionKind { call, put };

inline double norm_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }
inline double norm_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI); }

inline double bs_price(double S, double K, double r, double sigma, double T) {
    const double df = std::exp(-r * T);
    const double sd = sigma * std::sqrt(T);
    if (!(sd > 0.0)) return std::max(S - K * df, 0.0);
    const double d1 = (std::log(S / (K * df)) + 0.5 * sd * sd) / sd;
    return S * norm_cdf(d1) - K * df * norm_cdf(d1 - sd);
}

inline double bs_put(double S, double K, double r, double sigma, double T) {
    const double df = std::exp(-r * T);
    const double sd = sigma * std::sqrt(T);
    if (!(sd > 0.0)) return std::max(K * df - S, 0.0);
    const double d1 = (std::log(S / (K * df)) + 0.5 * sd * sd) / sd;
    return K * df * norm_cdf(sd - d1) - S * norm_cdf(-d1);
}

inline double bs_value(OptionKind kind, double S, double K, double r, double sigma, double T) {
    return kind == OptionKind::call ? bs_price(S, K, r, sigma, T) : bs_put(S, K, r, sigma, T);
}

inline double bs_vega(double S, double K, double r, double sigma, double T) {
    const double sd = sigma * std::sqrt(T);
    const double d1 = (std::log(S / K) + (r + 0.5 * sigma * sigma) * T) / sd;
    return S * norm_pdf(d1) * std::sqrt(T);
}

inline constexpr double kMinVol = 1e-4;
inline constexpr double kMaxVol = 5.0;

/// Volatility reproducing `price` for an option of the given kind.
///
/// The root is searched on the out-of-the-money side (converted by parity), where the
/// price carries the time value at full relative precision. Bisection in sigma brackets
/// the root; Newton steps on the log price finish it. Returns nullopt when the price is
/// outside the no-arbitrage band or the root lies outside [1e-4, 5].
inline std::optional<double> implied_vol(double price, double S, double K, double r, double T,
                                         OptionKind kind = OptionKind::call) {
    if (!(S > 0.0 && K > 0.0 && T > 0.0) || !std::isfinite(price)) return std::nullopt;
    const double fwd_df = K * std::exp(-r * T);
    const double lower = kind == OptionKind::call ? std::max(S - fwd_df, 0.0) : std::max(fwd_df - S, 0.0);
    const double upper = kind == OptionKind::call ? S : fwd_df;
    if (!(price > lower && price < upper)) return std::nullopt;

    const OptionKind otm = S >= fwd_df ? OptionKind::put : OptionKind::call;
    double target = price;
    if (otm != kind) target = kind == OptionKind::call ? price - S + fwd_df : price + S - fwd_df;
    if (!(target > 0.0)) return std::nullopt;

    auto f = [&](double sig) { return bs_value(otm, S, K, r, sig, T); };
    double lo = kMinVol, hi = kMaxVol;
    if (f(lo) > target || f(hi) < target) return std::nullopt;
    for (int it = 0; it < 60 && hi - lo > 1e-3; ++it) {
        const double mid = 0.5 * (lo + hi);
        (f(mid) < target ? lo : hi) = mid;
    }
    const double log_target = std::log(target);
    double sig = 0.5 * (lo + hi);
    for (int it = 0; it < 50; ++it) {
        const double v = f(sig);
        if (!(v > 0.0)) break;
        const double g = std::log(v) - log_target;
        if (g < 0.0) lo = sig; else hi = sig;
        double next = sig - g * v / bs_vega(S, K, r, sig, T);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (std::fabs(next - sig) < 1e-15 * std::max(1.0, sig)) {
            sig = next;
            break;
        }
        sig = next;
    }
    if (!(std::fabs(f(sig) - target) < 1e-10 * S)) return std::nullopt;
    return sig;
}

}  // namespace fca
