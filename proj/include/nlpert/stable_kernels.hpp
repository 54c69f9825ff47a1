#pragma once

#include <memory>
#include <span>
#include <vector>

#include "nlpert/model.hpp"

namespace nlpert {

/// Controls for the radial Fourier inversion.
struct KernelOptions {
    double t_floor = 1e-4;     // smaller times are refused
    double rel_tol = 1e-12;
    double abs_tol = 1e-16;
    double tail_exponent = 45.0;  // exp(-t U^alpha) at the cut-off U is below e^{-tail_exponent}
    long max_panels = 400000;
};

struct DensityValue {
    double value = 0.0;
    double error = 0.0;  // quadrature estimate plus tail bound
};

/// Heat kernel of the fractional Laplacian, p_0(t, x, y) with r = |x - y|.
double eval_p0(const ModelParams& params, double t, double r, const KernelOptions& opts = {});
DensityValue eval_p0_detailed(const ModelParams& params, double t, double r, const KernelOptions& opts = {});

/// Heat kernel of Delta^{alpha/2} + a Delta^{beta/2}.
double eval_pa(const ModelParams& params, double a, double t, double r, const KernelOptions& opts = {});
DensityValue eval_pa_detailed(const ModelParams& params, double a, double t, double r,
                              const KernelOptions& opts = {});

/// (1/pi) int_0^inf xi^power exp(-t xi^alpha) cos(xi r) d xi, the one-dimensional inverse Fourier
/// transform of |xi|^power exp(-t |xi|^alpha).
double fourier_moment_1d(double alpha, double t, double power, double r, const KernelOptions& opts = {});

/// Spatial gradient of p_0(t, .) at x (length d).
std::vector<double> grad_p0(const ModelParams& params, double t, std::span<const double> x,
                            const KernelOptions& opts = {});
/// Spatial Hessian of p_0(t, .) at x, row-major d x d.
std::vector<double> hess_p0(const ModelParams& params, double t, std::span<const double> x,
                            const KernelOptions& opts = {});

// Comparison functions h_a, g_a, f_0 and f_{a,lambda}; r = |x - y|.
double comparison_h(const ModelParams& params, const ComparisonWeight& weight, double t, double r);
double comparison_g(const ModelParams& params, double a, double t, double r);
double comparison_f0(const ModelParams& params, double t, double r);
double comparison_f(const ModelParams& params, const ComparisonWeight& weight, double t, double r);

/// Constants of the two-sided envelope for the finite-range stable kernel; the
/// true constants are not explicit so every default is 1.
struct EnvelopeConstants {
    double c1 = 1.0, c2 = 1.0, c3 = 1.0, c4 = 1.0;
    double near = 1.0;  // comparison constant for |x - y| <= 1
};

struct EnvelopePair {
    double lower = 0.0;
    double upper = 0.0;
};

EnvelopePair truncated_envelope(const ModelParams& params, double t, double r,
                                const EnvelopeConstants& constants = {});

/// |p_0(t, x) - lambda^{-d/alpha} p_0(t / lambda, lambda^{-1/alpha} x)|.
double scaling_check_p0(const ModelParams& params, double lambda, double t, std::span<const double> x,
                        const KernelOptions& opts = {});

/// Tabulated one-dimensional p_0 for bulk evaluation: cubic Hermite on the
/// standard density (t = 1) plus the large-argument series. Relative accuracy ~1e-8.
class StableDensityTable {
public:
    static std::shared_ptr<const StableDensityTable> get(double alpha);

    double p0(double t, double r) const;
    double dp0(double t, double r) const;  // derivative in r
    double standard(double x) const;
    double standard_derivative(double x) const;
    double alpha() const { return alpha_; }

    explicit StableDensityTable(double alpha);

private:
    double alpha_;
    double step_;
    double table_end_;
    std::vector<double> values_;
    std::vector<double> slopes_;
    std::vector<double> tail_mag_;   // Gamma(k alpha + 1) / (pi k!)
    std::vector<double> tail_sign_;  // (-1)^{k+1} sin(k pi alpha / 2)

    double tail(double x, int derivative) const;
};

/// Large-|x| series of the standard one-dimensional density and its derivative.
double stable_tail_series(double alpha, double x, int derivative);

}  // namespace nlpert
