#pragma once

/// Closed-form drifts exactly as they are usually printed for each model.
///
/// These serve as cross-checks of drift_z. The risk-neutral piecewise form differs
/// from drift_z: it wraps the rate and -Q/2 terms in sign(z) and carries r/Q where
/// the tau-clock gives r s/Q, so it is only reported, never used by the engine.

#include <cmath>

#include "fca/models.hpp"

namespace fca::printed {

/// Quadratic family, written with w = sqrt(c)(z + zeta0).
inline double quadratic_drift(const QuadraticParams& p, double z, double tau) {
    const auto f = detail::freeze(p, tau);
    const double a2 = f.big_a * f.big_a;
    const double w = f.sqrt_c * z + f.w0;
    const double chi0 = f.y0 / std::hypot(f.y0, f.big_a);
    const double ep = f.e_prime;
    return (1.0 / f.sqrt_c) * ((p.a - p.c / 2.0) - ep / (2.0 * p.c * a2)) * std::tanh(w) -
           ((p.d / (2.0 * p.c)) * (p.a - p.c / 2.0) - p.b + p.d / 4.0) / (std::sqrt(p.c * a2) * std::cosh(w)) +
           ep / (2.0 * std::pow(p.c, 1.5) * a2) * chi0;
}

/// VNB through the identifications a = b = d = 0, c = alpha/((1-alpha)(2-alpha)).
inline double vnb_drift(const VnbParams& p, double z, double tau) {
    QuadraticParams q;
    q.a = 0.0;
    q.b = 0.0;
    q.c = vnb::c_coef(p.alpha);
    q.d = 0.0;
    q.x0 = p.omega0;
    // e~(tau) = e(t0) exp(2 tau/(2-alpha)), a growing exponential.
    q.e = ETilde::exponential(0.0, vnb::e_of_t(p.alpha, p.t0), -2.0 / (2.0 - p.alpha));
    return quadratic_drift(q, z, tau);
}

namespace detail_pw {
inline double q_of(const PiecewiseParams& p, double z, double tau) {
    return p.sigma * p.sigma * p.epsilon / 2.0 * std::fabs(z) + p.sigma * std::sqrt(tau / 2.0);
}
}  // namespace detail_pw

/// Objective-measure piecewise drift (t0 = 0, mu = 0).
inline double piecewise_objective_drift(const PiecewiseParams& p, double z, double tau) {
    const double q = detail_pw::q_of(p, z, tau);
    const double bracket = (1.0 / (2.0 * p.epsilon)) * (1.0 / q - 1.0 / (p.sigma * std::sqrt(tau / 2.0))) -
                           p.epsilon * p.sigma * p.sigma / 4.0 / q;
    return exact_sign(z) * bracket;
}

/// Risk-neutral piecewise drift with both corrections inside the sign bracket.
inline double piecewise_risk_neutral_drift(const PiecewiseParams& p, double z, double tau) {
    const double q = detail_pw::q_of(p, z, tau);
    return piecewise_objective_drift(p, z, tau) + exact_sign(z) * (-q / 2.0 + p.r / q);
}

/// The two correction terms implied by the tau-clock SDE: r s/Q - Q/2 with s = tau/2.
inline double piecewise_risk_neutral_correction(const PiecewiseParams& p, double z, double tau) {
    const double q = detail_pw::q_of(p, z, tau);
    return p.r * (tau / 2.0) / q - q / 2.0;
}

}  // namespace fca::printed
