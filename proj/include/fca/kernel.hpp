#pragma once

/// Gaussian short-time kernel as a symmetric Toeplitz matrix, applied through a
/// 2m circulant embedding and real FFTs.

#include <cmath>
#include <complex>
#include <cstddef>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <fftw3.h>

#include "fca/grid.hpp"

namespace fca {

namespace detail {

inline std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

template <class T>
struct FftwDeleter {
    void operator()(T* p) const { fftw_free(p); }
};

template <class T>
using FftwBuffer = std::unique_ptr<T[], FftwDeleter<T>>;

template <class T>
FftwBuffer<T> fftw_buffer(std::size_t n) {
    auto* p = static_cast<T*>(fftw_malloc(sizeof(T) * n));
    if (!p) throw std::bad_alloc();
    return FftwBuffer<T>(p);
}

}  // namespace detail

/// Real-to-complex / complex-to-real transform pair of length n (unnormalized).
///
/// Plans are created with FFTW_ESTIMATE, so results do not depend on timing. Execution
/// uses the new-array interface on aligned buffers and is safe from several threads.
class RealFft {
public:
    explicit RealFft(std::size_t n) : n_(n) {
        auto re = detail::fftw_buffer<double>(n);
        auto co = detail::fftw_buffer<fftw_complex>(n / 2 + 1);
        std::lock_guard lock(detail::fftw_planner_mutex());
        fwd_ = fftw_plan_dft_r2c_1d(static_cast<int>(n), re.get(), co.get(), FFTW_ESTIMATE);
        inv_ = fftw_plan_dft_c2r_1d(static_cast<int>(n), co.get(), re.get(), FFTW_ESTIMATE);
        if (!fwd_ || !inv_) throw std::runtime_error("FFTW plan creation failed");
    }
    RealFft(const RealFft&) = delete;
    RealFft& operator=(const RealFft&) = delete;
    ~RealFft() {
        std::lock_guard lock(detail::fftw_planner_mutex());
        fftw_destroy_plan(fwd_);
        fftw_destroy_plan(inv_);
    }

    std::size_t size() const { return n_; }
    std::size_t spectrum_size() const { return n_ / 2 + 1; }

    /// Buffers must come from fftw_buffer (SIMD alignment).
    void forward(double* in, fftw_complex* out) const { fftw_execute_dft_r2c(fwd_, in, out); }
    /// Overwrites `in`.
    void inverse(fftw_complex* in, double* out) const { fftw_execute_dft_c2r(inv_, in, out); }

private:
    std::size_t n_;
    fftw_plan fwd_ = nullptr;
    fftw_plan inv_ = nullptr;
};

/// How the Toeplitz product is evaluated.
///
/// fft: circulant embedding, O(m log m); round-off leaves an absolute noise floor near
/// 1e-16 max(v). direct: sum over the non-underflowing band of the kernel; every term is
/// non-negative, so small tail values keep their relative accuracy.
enum class ConvolutionMethod { fft, direct };

/// First row of the embedded circulant and its spectrum.
struct CirculantKernel {
    std::vector<double> first_row;                  ///< length 2m: (pi_0..pi_{m-1}, 0, pi_{m-1}..pi_1)
    std::vector<std::complex<double>> spectrum;     ///< r2c transform of first_row (m + 1 entries, real up to round-off)
    double dtau = 0.0;
    double dz = 0.0;
    std::size_t m = 0;
    std::shared_ptr<const RealFft> fft;             ///< length-2m transform
    std::optional<std::string> warning;             ///< set when the Gaussian is under-resolved
    ConvolutionMethod method = ConvolutionMethod::fft;
    std::size_t band = 0;                           ///< pi~_j == 0 for j >= band

    /// pi~_j, the generating entries of the Toeplitz matrix.
    double entry(std::size_t j) const { return first_row[j]; }
};

/// pi~_j = exp(-(j dz)^2/(2 dtau)) / sqrt(2 pi dtau).
inline CirculantKernel build_kernel(const SpatialGrid& grid, double dtau,
                                    ConvolutionMethod method = ConvolutionMethod::fft) {
    if (!(dtau > 0.0)) throw std::invalid_argument("kernel requires dtau > 0");
    const std::size_t m = grid.m;
    CirculantKernel k;
    k.dtau = dtau;
    k.dz = grid.dz;
    k.m = m;
    k.method = method;
    k.first_row.assign(2 * m, 0.0);
    // Divide by the lattice sum over all integers so the discrete kernel has unit mass;
    // the correction only matters when the Gaussian is not resolved by the grid.
    double lattice = 1.0;
    for (std::size_t j = 1;; ++j) {
        const double zj = static_cast<double>(j) * grid.dz;
        const double t = 2.0 * std::exp(-zj * zj / (2.0 * dtau));
        lattice += t;
        if (t < 1e-18 * lattice) break;
    }
    lattice *= grid.dz / std::sqrt(2.0 * M_PI * dtau);
    const double norm = 1.0 / std::sqrt(2.0 * M_PI * dtau) / std::max(lattice, 1.0);
    for (std::size_t j = 0; j < m; ++j) {
        const double zj = static_cast<double>(j) * grid.dz;
        const double v = norm * std::exp(-zj * zj / (2.0 * dtau));
        k.first_row[j] = v;
        if (j > 0) k.first_row[2 * m - j] = v;
        if (v > 0.0) k.band = j + 1;
    }
    k.fft = std::make_shared<const RealFft>(2 * m);
    auto re = detail::fftw_buffer<double>(2 * m);
    auto co = detail::fftw_buffer<fftw_complex>(m + 1);
    std::copy(k.first_row.begin(), k.first_row.end(), re.get());
    k.fft->forward(re.get(), co.get());
    k.spectrum.resize(m + 1);
    for (std::size_t j = 0; j <= m; ++j) k.spectrum[j] = {co[j][0], co[j][1]};
    if (std::sqrt(dtau) < 2.0 * grid.dz) {
        k.warning = "kernel under-resolved: sqrt(dtau) = " + std::to_string(std::sqrt(dtau)) +
                    " < 2 dz = " + std::to_string(2.0 * grid.dz);
    }
    return k;
}

/// Reusable buffers for toeplitz_apply.
class ToeplitzWorkspace {
public:
    explicit ToeplitzWorkspace(std::size_t m)
        : m_(m), re_(detail::fftw_buffer<double>(2 * m)), co_(detail::fftw_buffer<fftw_complex>(m + 1)) {}

    std::size_t size() const { return m_; }

private:
    friend void toeplitz_apply(const CirculantKernel&, std::span<const double>, std::span<double>, ToeplitzWorkspace&);
    std::size_t m_;
    detail::FftwBuffer<double> re_;
    detail::FftwBuffer<fftw_complex> co_;
};

/// out[j] = sum_k pi~_{|j-k|} v[k], computed as the first m entries of C v_e.
inline void toeplitz_apply(const CirculantKernel& kernel, std::span<const double> v, std::span<double> out,
                           ToeplitzWorkspace& ws) {
    const std::size_t m = kernel.m;
    if (v.size() != m || out.size() != m || ws.size() != m) {
        throw std::invalid_argument("toeplitz_apply: length mismatch");
    }
    if (kernel.method == ConvolutionMethod::direct) {
        const double* pi = kernel.first_row.data();
        const double* in = v.data();
        double* o = out.data();
        const std::size_t band = std::min(kernel.band, m);
        for (std::size_t j = 0; j < m; ++j) o[j] = pi[0] * in[j];
        // Offset-major order keeps the inner loops contiguous.
        for (std::size_t d = 1; d < band; ++d) {
            const double w = pi[d];
            for (std::size_t j = d; j < m; ++j) o[j] += w * in[j - d];
            for (std::size_t j = 0; j + d < m; ++j) o[j] += w * in[j + d];
        }
        return;
    }
    double* re = ws.re_.get();
    fftw_complex* co = ws.co_.get();
    std::copy(v.begin(), v.end(), re);
    std::fill(re + m, re + 2 * m, 0.0);
    kernel.fft->forward(re, co);
    for (std::size_t j = 0; j <= m; ++j) {
        const std::complex<double> c(co[j][0], co[j][1]);
        const std::complex<double> r = c * kernel.spectrum[j];
        co[j][0] = r.real();
        co[j][1] = r.imag();
    }
    kernel.fft->inverse(co, re);
    const double scale = 1.0 / static_cast<double>(2 * m);
    for (std::size_t j = 0; j < m; ++j) out[j] = re[j] * scale;
}

inline std::vector<double> toeplitz_apply(const CirculantKernel& kernel, std::span<const double> v) {
    if (v.size() != kernel.m) throw std::invalid_argument("toeplitz_apply: length mismatch");
    ToeplitzWorkspace ws(kernel.m);
    std::vector<double> out(kernel.m);
    toeplitz_apply(kernel, v, out, ws);
    return out;
}

/// O(m^2) reference product, for tests.
inline std::vector<double> toeplitz_apply_dense(const CirculantKernel& kernel, std::span<const double> v) {
    const std::size_t m = kernel.m;
    if (v.size() != m) throw std::invalid_argument("toeplitz_apply_dense: length mismatch");
    std::vector<double> out(m, 0.0);
    for (std::size_t j = 0; j < m; ++j) {
        double acc = 0.0;
        for (std::size_t k = 0; k < m; ++k) acc += kernel.first_row[j > k ? j - k : k - j] * v[k];
        out[j] = acc;
    }
    return out;
}

}  // namespace fca
