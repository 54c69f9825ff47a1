#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nlpert/model.hpp"

namespace nlpert {

/// A(d, -gamma): the constant making A * int (cos(xi.z) - 1)|z|^{-d-gamma} dz = -|xi|^gamma.
/// Obtained from the multiplier integral itself and cached per (d, gamma).
double normalizing_constant(int d, double gamma);
/// Gamma-function expression of the same constant.
double normalizing_constant_closed_form(int d, double gamma);

/// Phi_gamma(X) = int_0^X (1 - cos v) v^{-1-gamma} dv for 0 < gamma < 2; X may be +inf.
double phi_gamma(double gamma, double x);

/// c * r^exponent on inner <= r < outer (outer may be +inf).
struct PowerPiece {
    double coeff = 0.0;
    double exponent = 0.0;
    double inner = 0.0;
    double outer = std::numeric_limits<double>::infinity();
};

/// Piecewise power profile g(|z|). Every piece needs beta - exponent in (0, 2).
class RadialProfile {
public:
    RadialProfile() = default;
    explicit RadialProfile(std::vector<PowerPiece> pieces);

    double operator()(double r) const;
    const std::vector<PowerPiece>& pieces() const { return pieces_; }
    std::vector<double> breakpoints() const;
    double sup_abs() const;
    /// int_lo^inf g(r) r^{-1-beta} dr
    double tail_integral(double lo, double beta) const;
    bool empty() const { return pieces_.empty(); }

private:
    std::vector<PowerPiece> pieces_;
};

/// One term u(x) g(|z|) of a separable coefficient.
struct SeparableTerm {
    std::function<double(std::span<const double>)> u;  // empty when u is the constant u_value
    double u_value = 1.0;
    double u_sup = 1.0;  // bound for |u|
    bool u_nonnegative = false;  // known sign of a non-constant u
    RadialProfile profile;

    bool constant_in_x() const { return !u; }
    double u_at(std::span<const double> x) const { return u ? u(x) : u_value; }
};

enum class SymmetryPolicy { Symmetrize, Reject };

/// Coefficient b(x, z), even in z.
class BFunction {
public:
    using Eval = std::function<double(std::span<const double>, std::span<const double>)>;

    static BFunction zero();
    static BFunction constant(double a);
    /// b(x, z) = |c(x)|^beta (x is the first coordinate). c_sup bounds |c|; when absent it is
    /// estimated by sampling.
    static BFunction sde(std::function<double(double)> c, double beta, std::string label,
                         std::optional<double> c_sup = std::nullopt);
    /// inner for |z| <= lambda, outer for |z| > lambda.
    static BFunction truncated(double inner, double outer, double lambda);
    /// 0 for |z| <= lambda and -(A(d,-alpha)/A(d,-beta))|z|^{beta-alpha} beyond: equality in the
    /// positivity condition. lambda > 0 keeps b bounded.
    static BFunction critical_negative(const ModelParams& params, double lambda);
    static BFunction separable(std::vector<SeparableTerm> terms, std::string id);
    /// Arbitrary b; symmetrized in z (with a warning past 1e-12) or rejected when asymmetric.
    static BFunction from_function(Eval eval, double sup_norm, std::string id, int dim = 1,
                                   SymmetryPolicy policy = SymmetryPolicy::Symmetrize);

    double operator()(std::span<const double> x, std::span<const double> z) const;
    double eval1(double x, double z) const;

    double sup_norm() const { return sup_norm_; }
    const std::string& id() const { return id_; }
    bool is_separable() const { return separable_; }
    bool is_zero() const { return separable_ && terms_.empty(); }
    const std::vector<SeparableTerm>& terms() const { return terms_; }
    bool translation_invariant() const;
    /// Radii where b(x, .) may jump.
    std::vector<double> radial_breakpoints() const;

private:
    BFunction() = default;
    std::string id_;
    double sup_norm_ = 0.0;
    bool separable_ = true;
    std::vector<SeparableTerm> terms_;
    Eval general_;
};

/// Parse "constant:a", "sde:<expr in x>", "truncated:inner,outer,lambda", "critical-negative:lambda".
BFunction make_preset(const std::string& spec, const ModelParams& params);

/// Fourier symbol of z -> g(|z|) |z|^{-1-beta} as a one-dimensional jump operator:
/// S f = symbol * f^ for b(x, z) = g(|z|). Equals -a|xi|^beta for the constant profile a.
double radial_symbol(const RadialProfile& profile, const ModelParams& params, double xi);

struct OperatorOptions {
    double r_min = 1e-6;
    double rho = 1.3;
    double r_max_factor = 1e8;  // radial cut-off R = r_max_factor * (1 + |x|)
    double abs_tol = 1e-13;
    double rel_tol = 1e-10;
    int angular_nodes = 48;       // d >= 2
    std::vector<double> extra_breaks;  // radii where f has kinks
};

using ScalarField = std::function<double(std::span<const double>)>;

/// S^b f(x) in the symmetrized form A(d,-beta)/2 int (f(x+z)+f(x-z)-2f(x)) b(x,z)|z|^{-d-beta} dz.
double apply_Sb(const BFunction& b, const ModelParams& params, const ScalarField& f, std::span<const double> x,
                const OperatorOptions& opts = {});
double apply_Sb_1d(const BFunction& b, const ModelParams& params, const std::function<double(double)>& f, double x,
                   const OperatorOptions& opts = {});

/// Same operator in the compensated form int (f(x+z) - f(x) - f'(x) z 1{|z| <= radius}) ... with the
/// two half-lines integrated separately (d = 1).
double apply_Sb_compensated_1d(const BFunction& b, const ModelParams& params, const std::function<double(double)>& f,
                               double fprime, double x, double radius, const OperatorOptions& opts = {});

/// Delta^{gamma/2} f(x).
double apply_frac_laplacian(double gamma, const ModelParams& params, const ScalarField& f, std::span<const double> x,
                            const OperatorOptions& opts = {});
double apply_frac_laplacian_1d(double gamma, const std::function<double(double)>& f, double x,
                               const OperatorOptions& opts = {});

/// j^b(x, z) = A(d,-alpha)|z|^{-d-alpha} + A(d,-beta) b(x,z)|z|^{-d-beta}; J^b(x, y) = j^b(x, y - x).
double jb_kernel(const BFunction& b, const ModelParams& params, std::span<const double> x, std::span<const double> z);
double Jb_kernel(const BFunction& b, const ModelParams& params, std::span<const double> x, std::span<const double> y);

struct PositivityReport {
    bool holds = true;
    double worst_margin = std::numeric_limits<double>::infinity();  // min of b + (A_a/A_b)|z|^{beta-alpha}
    std::vector<double> worst_x;
    std::vector<double> worst_z;
};

/// Points are flattened with stride params.d.
PositivityReport check_positivity_condition(const BFunction& b, const ModelParams& params,
                                            std::span<const double> x_samples, std::span<const double> z_samples);

/// -(1 - 1/M)(A_a/A_b)|z|^{beta-alpha} <= b(x,z) <= (M - 1)(A_a/A_b)|z|^{beta-alpha} on the samples,
/// i.e. the bounds on j^b taken relative to A(d,-alpha)|z|^{-d-alpha}.
bool check_lower_kernel_condition(const BFunction& b, const ModelParams& params, double M,
                                  std::span<const double> x_samples, std::span<const double> z_samples);

/// j^b(x,z) |z|^{d+alpha} = A(d,-alpha) + A(d,-beta) b(x,z)|z|^{alpha-beta}.
double lower_kernel_ratio(const BFunction& b, const ModelParams& params, std::span<const double> x,
                          std::span<const double> z);

struct TailStats {
    double lambda = 1.0;
    double m_lower = 0.0;  // inf of b over |z| > lambda
    double M_upper = 0.0;  // sup of |b| over |z| > lambda
    double m_plus = 0.0;   // inf of b+
    double M_plus = 0.0;   // sup of b+
};

TailStats tail_stats(const BFunction& b, const ModelParams& params, double lambda, int samples = 20000,
                     std::uint64_t seed = 1);

/// lambda^{beta/alpha - 1} b(lambda^{-1/alpha} x, lambda^{-1/alpha} z).
BFunction scale_b(const BFunction& b, const ModelParams& params, double lambda);

/// b 1{|z| <= lambda} + b^+ 1{|z| > lambda}.
BFunction hat_b(const BFunction& b, double lambda, int dim = 1);

}  // namespace nlpert
