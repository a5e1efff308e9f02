#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>

namespace fca {

/// Uniform grid z_j = z_min + j*dz, j = 0..m-1, with dz = -2*z_min/m.
///
/// Node values are read as cell averages over [z_j - dz/2, z_j + dz/2].
struct SpatialGrid {
    double z_min = 0.0;
    std::size_t m = 0;
    double dz = 0.0;

    double node(std::size_t j) const { return z_min + static_cast<double>(j) * dz; }
    /// Left edge of cell k (k = m gives the right boundary).
    double edge(std::size_t k) const { return z_min + (static_cast<double>(k) - 0.5) * dz; }
    double lower() const { return edge(0); }
    double upper() const { return edge(m); }
    /// Index of the node at 0.
    std::size_t center() const { return m / 2; }
};

/// The u axis of a joint density uses the same layout.
using UGrid = SpatialGrid;

inline bool is_power_of_two(std::size_t m) { return m != 0 && (m & (m - 1)) == 0; }

inline SpatialGrid build_grid(double z_min, std::size_t m) {
    if (!is_power_of_two(m) || m < 8) {
        throw std::invalid_argument("grid size m must be a power of two >= 8, got " + std::to_string(m));
    }
    if (!(z_min < 0.0) || !std::isfinite(z_min)) {
        throw std::invalid_argument("grid lower bound z_min must be negative");
    }
    return SpatialGrid{z_min, m, -2.0 * z_min / static_cast<double>(m)};
}

inline UGrid build_u_grid(double u_min, std::size_t m_u) { return build_grid(u_min, m_u); }

/// Equally spaced integral-time nodes tau^i = i*dtau, i = 0..n.
struct TimeGrid {
    double dtau = 0.0;
    std::size_t n = 0;

    double tau(std::size_t i) const { return static_cast<double>(i) * dtau; }
    double tau_end() const { return tau(n); }
};

inline TimeGrid build_time_grid(double dtau, std::size_t n) {
    if (!(dtau > 0.0) || !std::isfinite(dtau)) throw std::invalid_argument("dtau must be positive");
    if (n < 1) throw std::invalid_argument("time grid needs at least one step");
    return TimeGrid{dtau, n};
}

/// Time grid ending exactly at tau_end with a step no larger than (about) dtau_target.
inline TimeGrid time_grid_to(double tau_end, double dtau_target) {
    if (!(tau_end > 0.0)) throw std::invalid_argument("tau_end must be positive");
    if (!(dtau_target > 0.0)) throw std::invalid_argument("dtau must be positive");
    auto n = static_cast<std::size_t>(std::llround(tau_end / dtau_target));
    if (n < 1) n = 1;
    return TimeGrid{tau_end / static_cast<double>(n), n};
}

}  // namespace fca
