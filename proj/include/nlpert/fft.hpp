#pragma once

#include <complex>
#include <span>

namespace nlpert {

/// Real-to-complex transform of fixed length n backed by FFTW. Unnormalized in both directions:
/// forward c_k = sum_j f_j e^{-2 pi i jk/n}, inverse f_j = sum_k c_k e^{2 pi i jk/n} (k = 0..n/2).
/// One instance per thread.
class RealFFT {
public:
    explicit RealFFT(int n);
    ~RealFFT();
    RealFFT(const RealFFT&) = delete;
    RealFFT& operator=(const RealFFT&) = delete;

    int size() const { return n_; }
    int spectrum_size() const { return n_ / 2 + 1; }
    void forward(std::span<const double> in, std::span<std::complex<double>> out);
    void inverse(std::span<const std::complex<double>> in, std::span<double> out);

private:
    int n_;
    double* real_;
    void* spectrum_;
    void* plan_fwd_;
    void* plan_inv_;
};

}  // namespace nlpert
