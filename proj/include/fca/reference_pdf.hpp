#pragma once

/// Closed-form reference densities.

#include <cmath>
#include <limits>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "fca/error.hpp"
#include "fca/models.hpp"

namespace fca {

/// Stationary density of the quadratic model with constant e, a < 0 and D^2 > 0:
///   P(x) ∝ (c (y^2 + A^2))^{a/c - 1} exp[(2b - a d/c)/(c A) atan(y/A)],  y = x + d/(2c).
///
/// The normalization is computed once by adaptive Gauss-Kronrod quadrature over
/// [x_c - 50 w, x_c + 50 w] with x_c = -d/(2c) and w = sqrt(D^2)/(2c).
class StationaryDensity {
public:
    explicit StationaryDensity(const QuadraticParams& p) : p_(p) {
        if (!p.e.is_constant()) throw DomainError("stationary density requires a constant e");
        if (!(p.a < 0.0)) throw DomainError("stationary density requires a < 0");
        if (!(p.c > 0.0)) throw DomainError("stationary density requires c > 0");
        const double e = p.e.value(0.0);
        const double d2 = 4.0 * p.c * e - p.d * p.d;
        if (!(d2 > 0.0)) throw DomainError("stationary density requires D^2 > 0");
        shift_ = p.d / (2.0 * p.c);
        big_a_ = std::sqrt(d2) / (2.0 * p.c);
        power_ = p.a / p.c - 1.0;
        kappa_ = (2.0 * p.b - p.a * p.d / p.c) / (p.c * big_a_);
        log_ref_ = log_shape(-shift_);
        const double w = big_a_;
        const double xc = -shift_;
        auto f = [this](double x) { return std::exp(log_shape(x) - log_ref_); };
        using boost::math::quadrature::gauss_kronrod;
        double mass = 0.0;
        // Split at the peak scale so the adaptive rule sees the bulk and both tails separately.
        const double cuts[] = {xc - 50.0 * w, xc - 5.0 * w, xc + 5.0 * w, xc + 50.0 * w};
        for (int i = 0; i < 3; ++i) mass += gauss_kronrod<double, 61>::integrate(f, cuts[i], cuts[i + 1], 20, 1e-15);
        log_norm_ = log_ref_ + std::log(mass);
    }

    double operator()(double x) const { return std::exp(log_shape(x) - log_norm_); }
    double log_density(double x) const { return log_shape(x) - log_norm_; }

    /// nu = 1 - 2a/c; moments of order >= nu diverge.
    double nu() const { return 1.0 - 2.0 * p_.a / p_.c; }

    /// The same density on the Lamperti axis: p_z(z) = P(x(z)) D_X(x(z)).
    double in_z(double z) const {
        const double x = lamperti_inverse(ModelSpec{p_}, Measure::objective, z, 0.0);
        const double y = x + shift_;
        return (*this)(x) * std::sqrt(p_.c) * std::hypot(y, big_a_);
    }

private:
    double log_shape(double x) const {
        const double y = x + shift_;
        return power_ * std::log(p_.c * (y * y + big_a_ * big_a_)) + kappa_ * std::atan(y / big_a_);
    }

    QuadraticParams p_;
    double shift_ = 0.0, big_a_ = 0.0, power_ = 0.0, kappa_ = 0.0, log_ref_ = 0.0, log_norm_ = 0.0;
};

inline double stationary_pdf(const QuadraticParams& p, double x) { return StationaryDensity(p)(x); }

/// alpha = 1/(sigma^2 epsilon^2).
inline double piecewise_alpha(double sigma, double epsilon) { return 1.0 / (sigma * sigma * epsilon * epsilon); }

/// Scaling density of the driftless piecewise process at physical time t:
///   P(x, t) = e^{-alpha} / (2 sigma^{2 alpha} eps^{2 alpha - 1} Gamma(alpha, alpha) sqrt(t))
///             exp(-|x| / (sigma^2 eps sqrt(t))) (1 + eps |x| / sqrt(t))^{alpha - 1}.
inline double piecewise_pdf(double sigma, double epsilon, double x, double t) {
    if (!(t > 0.0)) throw DomainError("piecewise_pdf requires t > 0");
    if (!(sigma > 0.0) || !(epsilon > 0.0)) throw DomainError("piecewise_pdf requires sigma, epsilon > 0");
    const double alpha = piecewise_alpha(sigma, epsilon);
    const double st = std::sqrt(t);
    const double ax = std::fabs(x);
    const double log_pref = -alpha - std::log(2.0) - 2.0 * alpha * std::log(sigma) -
                            (2.0 * alpha - 1.0) * std::log(epsilon) -
                            std::log(boost::math::tgamma(alpha, alpha)) - std::log(st);
    return std::exp(log_pref - ax / (sigma * sigma * epsilon * st) + (alpha - 1.0) * std::log1p(epsilon * ax / st));
}

}  // namespace fca
