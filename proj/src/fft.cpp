#include "nlpert/fft.hpp"

#include <fftw3.h>

#include <algorithm>
#include <mutex>
#include <stdexcept>

namespace nlpert {

namespace {
std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}
}  // namespace

RealFFT::RealFFT(int n) : n_(n) {
    if (n < 2 || n % 2) throw std::invalid_argument("RealFFT: length must be even and >= 2");
    std::lock_guard lock(planner_mutex());
    real_ = fftw_alloc_real(static_cast<std::size_t>(n));
    auto* spectrum = fftw_alloc_complex(static_cast<std::size_t>(n / 2 + 1));
    spectrum_ = spectrum;
    plan_fwd_ = fftw_plan_dft_r2c_1d(n, real_, spectrum, FFTW_ESTIMATE);
    plan_inv_ = fftw_plan_dft_c2r_1d(n, spectrum, real_, FFTW_ESTIMATE);
}

RealFFT::~RealFFT() {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(static_cast<fftw_plan>(plan_fwd_));
    fftw_destroy_plan(static_cast<fftw_plan>(plan_inv_));
    fftw_free(real_);
    fftw_free(spectrum_);
}

void RealFFT::forward(std::span<const double> in, std::span<std::complex<double>> out) {
    std::copy(in.begin(), in.begin() + n_, real_);
    fftw_execute(static_cast<fftw_plan>(plan_fwd_));
    const auto* s = reinterpret_cast<const std::complex<double>*>(spectrum_);
    std::copy(s, s + spectrum_size(), out.begin());
}

void RealFFT::inverse(std::span<const std::complex<double>> in, std::span<double> out) {
    auto* s = reinterpret_cast<std::complex<double>*>(spectrum_);
    std::copy(in.begin(), in.begin() + spectrum_size(), s);
    fftw_execute(static_cast<fftw_plan>(plan_inv_));
    std::copy(real_, real_ + n_, out.begin());
}

}  // namespace nlpert
