#pragma once

/// Model families, their Lamperti maps and the unit-diffusion drift.
///
/// Every model is written in integral time tau as
///   dX = M_X(X, tau) dtau + D_X(X, tau) dW_tau,
/// and the Lamperti transform Z = int_{anchor}^{X} dx / D_X(x, tau) turns it into
///   dZ = M_Z(Z, tau) dtau + dW_tau,
///   M_Z = M_X / D_X + dZ/dtau|_x - (1/2) dD_X/dx.
/// drift_z evaluates this expression from analytic partials.

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "fca/error.hpp"

namespace fca {

enum class Measure { objective, risk_neutral };

inline std::string_view to_string(Measure m) {
    return m == Measure::objective ? "objective" : "risk-neutral";
}

/// Built-in e~(tau) for the quadratic family: base + amplitude * exp(-rate * tau).
///
/// A constant is the special case amplitude = 0.
struct ETilde {
    double base = 0.0;
    double amplitude = 0.0;
    double rate = 0.0;

    static ETilde constant(double e) { return ETilde{e, 0.0, 0.0}; }
    static ETilde exponential(double base, double amplitude, double rate) {
        return ETilde{base, amplitude, rate};
    }
    /// 6.08e-5 + 6e-3 exp(-0.5 tau), the foreign-exchange fit.
    static ETilde friedrich() { return exponential(6.08e-5, 6e-3, 0.5); }

    bool is_constant() const { return amplitude == 0.0 || rate == 0.0; }
    double value(double tau) const { return base + amplitude * std::exp(-rate * tau); }
    double derivative(double tau) const { return -rate * amplitude * std::exp(-rate * tau); }
};

/// Physical clock of the quadratic family: g(t) = 1 gives tau = t - t0, g(t) = t gives tau = ln(t/t0).
enum class Clock { unit, linear };

/// dX = (a X + b) dtau + sqrt(c X^2 + d X + e~(tau)) dW.
struct QuadraticParams {
    double a = 0.0;
    double b = 0.0;
    double c = 1.0;   ///< must be > 0
    double d = 0.0;
    ETilde e = ETilde::constant(1.0);
    Clock clock = Clock::unit;
    double t0 = 0.0;  ///< physical start time (> 0 for Clock::linear)
    double x0 = 0.0;  ///< initial state, the anchor of the Lamperti map
};

/// dX = M_X dtau + sigma sqrt(s(tau) + epsilon |X|) dW with s(tau) = tau/2 + sqrt(t0).
///
/// tau = 2(sqrt(t) - sqrt(t0)) is the integral time of the H = 1/2 scaling process.
/// M_X = mu s under the objective measure and r s - sigma^2 (s + epsilon |X|)/2
/// under the risk-neutral one (X is then the log-return).
struct PiecewiseParams {
    double sigma = 1.0;
    double epsilon = 1.0;
    double hurst = 0.5;                ///< only 1/2 is admissible
    std::optional<double> smooth_k;    ///< replace sign(z) in the drift by d/dz smooth_abs(z, k)
    double mu = 0.0;
    double r = 0.0;
    double t0 = 0.0;
};

/// Vellekoop-Nieuwenhuis-Borland noise process, dOmega = Sigma(Omega, t) dW, with
/// the log-price driven by sigma dOmega. In tau = ln(t/t0) it is a driftless quadratic
/// diffusion with c = alpha/((1-alpha)(2-alpha)) and e~(tau) = e(t0 exp(tau)).
struct VnbParams {
    double alpha = 0.1;   ///< in (0, 1/2)
    double sigma = 0.3;
    double r = 0.03;
    double mu = 0.0;
    double omega0 = 0.0;
    double t0 = 0.2;      ///< must be > 0
    double T = 0.7;
};

using ModelSpec = std::variant<QuadraticParams, PiecewiseParams, VnbParams>;

inline std::string_view model_name(const ModelSpec& m) {
    switch (m.index()) {
        case 0: return "quadratic";
        case 1: return "piecewise";
        default: return "vnb";
    }
}

/// x tanh(kx) = x (2/(1 + exp(-2kx)) - 1).
inline double smooth_abs(double x, double k) { return x * std::tanh(k * x); }

inline double smooth_abs_derivative(double x, double k) {
    const double t = std::tanh(k * x);
    return t + k * x * (1.0 - t * t);
}

inline double exact_sign(double x) { return static_cast<double>((x > 0.0) - (x < 0.0)); }

namespace vnb {

inline double c_coef(double alpha) { return alpha / ((1.0 - alpha) * (2.0 - alpha)); }

/// [(1-alpha)(2-alpha)]^{alpha/(2-alpha)}
inline double e_scale(double alpha) {
    return std::pow((1.0 - alpha) * (2.0 - alpha), alpha / (2.0 - alpha));
}

/// e(t) = [(1-alpha)(2-alpha)]^{alpha/(2-alpha)} t^{2/(2-alpha)}
inline double e_of_t(double alpha, double t) { return e_scale(alpha) * std::pow(t, 2.0 / (2.0 - alpha)); }

/// beta_t = [(1-alpha)(2-alpha) t]^{-2/(2-alpha)}
inline double beta(double alpha, double t) {
    return std::pow((1.0 - alpha) * (2.0 - alpha) * t, -2.0 / (2.0 - alpha));
}

/// sqrt(pi/alpha) Gamma(1/alpha - 1/2) / Gamma(1/alpha)
inline double norm_a(double alpha) {
    return std::sqrt(M_PI / alpha) * std::exp(std::lgamma(1.0 / alpha - 0.5) - std::lgamma(1.0 / alpha));
}

/// Sigma(Omega, t) for t > 0.
inline double sigma_fn(double alpha, double omega, double t) {
    const double b = beta(alpha, t);
    const double p = std::sqrt(b) / norm_a(alpha) * std::pow(1.0 + alpha * b * omega * omega, -1.0 / alpha);
    return std::pow(norm_a(alpha) * p, -alpha / 2.0);
}

/// C_tau = sqrt(alpha beta_{t0}) exp(-tau/(2-alpha)); it equals 1/A_tau of the quadratic form.
inline double c_tau(const VnbParams& p, double tau) {
    return std::sqrt(p.alpha * beta(p.alpha, p.t0)) * std::exp(-tau / (2.0 - p.alpha));
}

/// int_{t1}^{t2} beta_s^{-alpha/2} ds by the closed-form antiderivative.
inline double beta_integral(double alpha, double t1, double t2) {
    const double q = 2.0 / (2.0 - alpha);
    return e_scale(alpha) * (std::pow(t2, q) - std::pow(t1, q)) / q;
}

}  // namespace vnb

namespace detail {

/// Quadratic coefficients frozen at one tau, with the Lamperti helpers.
struct QuadraticFrozen {
    double a, b, c, d, e, e_prime, x0;
    double sqrt_c, shift, big_a, dlog_a, y0, w0;

    double y_of(double x) const { return x + shift; }
    double forward(double x) const { return (std::asinh(y_of(x) / big_a) - w0) / sqrt_c; }
    double inverse(double z) const { return big_a * std::sinh(sqrt_c * z + w0) - shift; }
    double diffusion(double x) const {
        const double y = y_of(x);
        return sqrt_c * std::hypot(y, big_a);
    }
    double diffusion_dx(double x) const {
        const double y = y_of(x);
        return sqrt_c * y / std::hypot(y, big_a);
    }
    double forward_dtau(double x) const {
        const double y = y_of(x);
        return -dlog_a / sqrt_c * (y / std::hypot(y, big_a) - y0 / std::hypot(y0, big_a));
    }
};

inline QuadraticFrozen freeze(double a, double b, double c, double d, double e, double e_prime, double x0) {
    if (!(c > 0.0)) throw DomainError("quadratic model requires c > 0");
    if (e < 0.0) throw DomainError("quadratic model requires e(tau) >= 0");
    const double a2 = (4.0 * c * e - d * d) / (4.0 * c * c);
    if (!(a2 > 0.0)) throw DomainError("quadratic model requires D^2 = 4 c e - d^2 > 0");
    QuadraticFrozen q{};
    q.a = a;
    q.b = b;
    q.c = c;
    q.d = d;
    q.e = e;
    q.e_prime = e_prime;
    q.x0 = x0;
    q.sqrt_c = std::sqrt(c);
    q.shift = d / (2.0 * c);
    q.big_a = std::sqrt(a2);
    q.dlog_a = e_prime / (2.0 * c * a2);
    q.y0 = x0 + q.shift;
    q.w0 = std::asinh(q.y0 / q.big_a);
    return q;
}

inline QuadraticFrozen freeze(const QuadraticParams& p, double tau) {
    return freeze(p.a, p.b, p.c, p.d, p.e.value(tau), p.e.derivative(tau), p.x0);
}

inline QuadraticFrozen freeze(const VnbParams& p, double tau) {
    const double e = vnb::e_of_t(p.alpha, p.t0 * std::exp(tau));
    return freeze(0.0, 0.0, vnb::c_coef(p.alpha), 0.0, e, 2.0 / (2.0 - p.alpha) * e, p.omega0);
}

/// Piecewise coefficients frozen at one tau.
struct PiecewiseFrozen {
    double sigma, epsilon, s, sqrt_s;

    double root(double x) const { return std::sqrt(s + epsilon * std::fabs(x)); }
    /// sign(x) (2/(sigma eps)) (R - sqrt(s)), written without cancellation.
    double forward(double x) const { return 2.0 * x / (sigma * (root(x) + sqrt_s)); }
    double inverse(double z) const {
        const double az = std::fabs(z);
        return exact_sign(z) * sigma * az * (sigma * epsilon * az / 4.0 + sqrt_s);
    }
    double diffusion(double x) const { return sigma * root(x); }
    double diffusion_dx_unsigned(double x) const { return sigma * epsilon / (2.0 * root(x)); }
    double forward_dtau(double x) const {
        const double r = root(x);
        return -x / (2.0 * sigma * (r + sqrt_s) * r * sqrt_s);
    }
};

inline PiecewiseFrozen freeze(const PiecewiseParams& p, double tau) {
    const double s = tau / 2.0 + std::sqrt(p.t0);
    if (!(s > 0.0)) throw DomainError("piecewise model is singular at tau = 0 when t0 = 0");
    return PiecewiseFrozen{p.sigma, p.epsilon, s, std::sqrt(s)};
}

inline double piecewise_drift_x(const PiecewiseParams& p, const PiecewiseFrozen& f, Measure m, double x) {
    if (m == Measure::objective) return p.mu * f.s;
    return p.r * f.s - 0.5 * p.sigma * p.sigma * (f.s + p.epsilon * std::fabs(x));
}

inline void check_finite(double v, const char* what) {
    if (!std::isfinite(v)) throw std::invalid_argument(std::string(what) + " must be finite");
}

}  // namespace detail

/// Throws std::invalid_argument when a parameter block violates its invariants.
inline void validate_model(const ModelSpec& model) {
    std::visit(
        [](const auto& p) {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, QuadraticParams>) {
                for (double v : {p.a, p.b, p.c, p.d, p.x0, p.t0, p.e.base, p.e.amplitude, p.e.rate})
                    detail::check_finite(v, "quadratic parameter");
                if (!(p.c > 0.0)) throw std::invalid_argument("quadratic model requires c > 0");
                if (p.e.base < 0.0 || p.e.base + p.e.amplitude < 0.0 || p.e.rate < 0.0)
                    throw std::invalid_argument("e(tau) must stay non-negative");
                if (p.clock == Clock::linear && !(p.t0 > 0.0))
                    throw std::invalid_argument("the g(t) = t clock requires t0 > 0");
                if (p.t0 < 0.0) throw std::invalid_argument("t0 must be >= 0");
            } else if constexpr (std::is_same_v<T, PiecewiseParams>) {
                for (double v : {p.sigma, p.epsilon, p.mu, p.r, p.t0})
                    detail::check_finite(v, "piecewise parameter");
                if (!(p.sigma > 0.0)) throw std::invalid_argument("piecewise model requires sigma > 0");
                if (!(p.epsilon > 0.0)) throw std::invalid_argument("piecewise model requires epsilon > 0");
                if (p.hurst != 0.5) throw std::invalid_argument("piecewise model requires hurst = 1/2");
                if (p.smooth_k && !(*p.smooth_k > 0.0)) throw std::invalid_argument("smooth_k must be > 0");
                if (p.t0 < 0.0) throw std::invalid_argument("t0 must be >= 0");
            } else {
                for (double v : {p.alpha, p.sigma, p.r, p.mu, p.omega0, p.t0, p.T})
                    detail::check_finite(v, "vnb parameter");
                if (!(p.alpha > 0.0 && p.alpha < 0.5)) throw std::invalid_argument("vnb model requires 0 < alpha < 1/2");
                if (!(p.sigma > 0.0)) throw std::invalid_argument("vnb model requires sigma > 0");
                if (!(p.t0 > 0.0)) throw std::invalid_argument("vnb model requires t0 > 0");
                if (!(p.T > p.t0)) throw std::invalid_argument("vnb model requires T > t0");
            }
        },
        model);
}

/// The state mapped to z = 0.
inline double anchor(const ModelSpec& model) {
    return std::visit(
        [](const auto& p) -> double {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, QuadraticParams>) return p.x0;
            else if constexpr (std::is_same_v<T, PiecewiseParams>) return 0.0;
            else return p.omega0;
        },
        model);
}

/// Z(x, tau). The measure does not enter the transform; it is accepted for symmetry with drift_z.
inline double lamperti_forward(const ModelSpec& model, Measure, double x, double tau) {
    return std::visit([&](const auto& p) { return detail::freeze(p, tau).forward(x); }, model);
}

/// X(z, tau).
inline double lamperti_inverse(const ModelSpec& model, Measure, double z, double tau) {
    return std::visit([&](const auto& p) { return detail::freeze(p, tau).inverse(z); }, model);
}

/// Native coefficients M_X and D_X at (x, tau).
struct NativeCoefficients {
    double drift;
    double diffusion;
};

inline NativeCoefficients native_coefficients(const ModelSpec& model, Measure measure, double x, double tau) {
    return std::visit(
        [&](const auto& p) -> NativeCoefficients {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, QuadraticParams>) {
                const double v = p.c * x * x + p.d * x + p.e.value(tau);
                if (v < 0.0) throw NumericalError("negative diffusion argument in the quadratic model");
                return {p.a * x + p.b, std::sqrt(v)};
            } else if constexpr (std::is_same_v<T, PiecewiseParams>) {
                const double s = tau / 2.0 + std::sqrt(p.t0);
                const double v = s + p.epsilon * std::fabs(x);
                const double m = measure == Measure::objective
                                     ? p.mu * s
                                     : p.r * s - 0.5 * p.sigma * p.sigma * v;
                return {m, p.sigma * std::sqrt(v)};
            } else {
                const double e = vnb::e_of_t(p.alpha, p.t0 * std::exp(tau));
                return {0.0, std::sqrt(vnb::c_coef(p.alpha) * x * x + e)};
            }
        },
        model);
}

/// Unit-diffusion drift M_Z(z, tau) from the generic Ito expression, with sign(z)
/// forced to `side` when side is +1 or -1 (the one-sided limits at a branch point).
inline double drift_z_sided(const ModelSpec& model, Measure measure, double z, double tau, int side) {
    return std::visit(
        [&](const auto& p) -> double {
            using T = std::decay_t<decltype(p)>;
            const auto f = detail::freeze(p, tau);
            const double x = f.inverse(z);
            if constexpr (std::is_same_v<T, PiecewiseParams>) {
                double sgn = 0.0;
                if (p.smooth_k) sgn = smooth_abs_derivative(z, *p.smooth_k);
                else sgn = side != 0 ? static_cast<double>(side) : exact_sign(z);
                return detail::piecewise_drift_x(p, f, measure, x) / f.diffusion(x) + f.forward_dtau(x) -
                       0.5 * sgn * f.diffusion_dx_unsigned(x);
            } else {
                return (f.a * x + f.b) / f.diffusion(x) + f.forward_dtau(x) - 0.5 * f.diffusion_dx(x);
            }
        },
        model);
}

/// Unit-diffusion drift M_Z(z, tau) from the generic Ito expression.
///
/// For the piecewise model sign(z) follows the exact convention sign(0) = 0 unless
/// smooth_k is set, in which case it is replaced by smooth_abs_derivative(z, k).
inline double drift_z(const ModelSpec& model, Measure measure, double z, double tau) {
    return drift_z_sided(model, measure, z, tau, 0);
}

/// Points where drift_z jumps (only the exact-sign piecewise model has one, at z = 0).
inline std::vector<double> branch_points(const ModelSpec& model) {
    if (const auto* p = std::get_if<PiecewiseParams>(&model); p && !p->smooth_k) return {0.0};
    return {};
}

/// Start of the physical clock.
inline double start_time(const ModelSpec& model) {
    return std::visit([](const auto& p) { return p.t0; }, model);
}

/// tau(t) for the model's clock.
inline double integral_time(const ModelSpec& model, double t) {
    const double t0 = start_time(model);
    if (!(t >= t0)) throw DomainError("integral_time requires t >= t0");
    return std::visit(
        [&](const auto& p) -> double {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, QuadraticParams>) {
                return p.clock == Clock::unit ? t - t0 : std::log(t / t0);
            } else if constexpr (std::is_same_v<T, PiecewiseParams>) {
                return 2.0 * (std::sqrt(t) - std::sqrt(t0));
            } else {
                return std::log(t / t0);
            }
        },
        model);
}

/// t(tau), the inverse of integral_time.
inline double physical_time(const ModelSpec& model, double tau) {
    if (!(tau >= 0.0)) throw DomainError("physical_time requires tau >= 0");
    const double t0 = start_time(model);
    return std::visit(
        [&](const auto& p) -> double {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, QuadraticParams>) {
                return p.clock == Clock::unit ? t0 + tau : t0 * std::exp(tau);
            } else if constexpr (std::is_same_v<T, PiecewiseParams>) {
                const double s = tau / 2.0 + std::sqrt(t0);
                return s * s;
            } else {
                return t0 * std::exp(tau);
            }
        },
        model);
}

/// Omega(z, tau) for the VNB model.
inline double vnb_omega(const VnbParams& p, double z, double tau) { return detail::freeze(p, tau).inverse(z); }

}  // namespace fca
