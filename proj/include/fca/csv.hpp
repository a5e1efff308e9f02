#pragma once

/// CSV writers for densities, histograms, estimates, prices and surfaces.
///
/// Numbers are printed with 17 significant digits so files round-trip exactly.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <string>
#include <vector>

#include "fca/error.hpp"
#include "fca/joint.hpp"
#include "fca/mc.hpp"
#include "fca/pricing.hpp"
#include "fca/propagate.hpp"

namespace fca::csv {

inline std::string num(double v) {
    if (std::isnan(v)) return "nan";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline void write_density(std::ostream& os, const DensityVector& p, const SpatialGrid& grid) {
    os << "z,density,tau\n";
    for (std::size_t j = 0; j < grid.m; ++j) os << num(grid.node(j)) << ',' << num(p.values[j]) << ',' << num(p.tau) << '\n';
}

/// Density over x nodes, same layout with an x column.
inline void write_density_x(std::ostream& os, std::span<const double> x, std::span<const double> density, double tau) {
    os << "x,density,tau\n";
    for (std::size_t j = 0; j < x.size(); ++j) os << num(x[j]) << ',' << num(density[j]) << ',' << num(tau) << '\n';
}

/// u,z,density triplets; exact zeros are skipped.
inline void write_joint(std::ostream& os, const JointDensity& J) {
    os << "u,z,density\n";
    for (std::size_t j = 0; j < J.u_grid.m; ++j) {
        const auto row = J.row(j);
        for (std::size_t k = 0; k < J.z_grid.m; ++k) {
            if (row[k] == 0.0) continue;
            os << num(J.u_grid.node(j)) << ',' << num(J.z_grid.node(k)) << ',' << num(row[k]) << '\n';
        }
    }
}

inline void write_marginal_u(std::ostream& os, const JointDensity& J) {
    const auto mu = marginal_u(J);
    os << "u,density,tau\n";
    for (std::size_t j = 0; j < mu.size(); ++j) os << num(J.u_grid.node(j)) << ',' << num(mu[j]) << ',' << num(J.tau) << '\n';
}

inline void write_histogram(std::ostream& os, const McHistogram& h) {
    os << "bin_lo,bin_hi,density,ci_lo,ci_hi\n";
    for (std::size_t b = 0; b < h.bins(); ++b) {
        os << num(h.bin_edges[b]) << ',' << num(h.bin_edges[b + 1]) << ',' << num(h.density[b]) << ',' << num(h.ci_low[b])
           << ',' << num(h.ci_high[b]) << '\n';
    }
}

struct LabeledEstimate {
    std::string label;
    McEstimate estimate;
};

inline void write_estimates(std::ostream& os, const std::vector<LabeledEstimate>& rows) {
    os << "label,mean,stderr,ci_lo,ci_hi\n";
    for (const auto& r : rows) {
        os << r.label << ',' << num(r.estimate.mean) << ',' << num(r.estimate.std_error) << ',' << num(r.estimate.ci95_low)
           << ',' << num(r.estimate.ci95_high) << '\n';
    }
}

struct PriceRow {
    OptionStyle style;
    double strike;
    double maturity;
    double price;
    double mass_deficit;
};

inline void write_prices(std::ostream& os, const std::vector<PriceRow>& rows) {
    os << "style,strike,maturity,price,mass_deficit\n";
    for (const auto& r : rows) {
        os << to_string(r.style) << ',' << num(r.strike) << ',' << num(r.maturity) << ',' << num(r.price) << ','
           << num(r.mass_deficit) << '\n';
    }
}

inline void write_surface(std::ostream& os, const VolSurface& s) {
    os << "strike,maturity,implied_vol,price,ci_low,ci_high,flag\n";
    const double nan = std::nan("");
    for (std::size_t t = 0; t < s.maturities.size(); ++t) {
        for (std::size_t k = 0; k < s.strikes.size(); ++k) {
            os << num(s.strikes[k]) << ',' << num(s.maturities[t]) << ',' << num(s.vols[t][k]) << ','
               << num(s.prices[t][k]) << ',' << num(s.ci_low ? (*s.ci_low)[t][k] : nan) << ','
               << num(s.ci_high ? (*s.ci_high)[t][k] : nan) << ',' << (s.flags[t][k].empty() ? "ok" : "missing") << '\n';
        }
    }
}

/// Opens `path` for writing, calls `fn(stream)` and checks the stream afterwards.
template <class Fn>
void write_file(const std::string& path, Fn&& fn) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open " + path + " for writing");
    fn(os);
    os.flush();
    if (!os) throw IoError("write to " + path + " failed");
}

}  // namespace fca::csv
