#pragma once

#include <complex>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "nlpert/model.hpp"
#include "nlpert/nonlocal_operator.hpp"

namespace nlpert {

class StableDensityTable;

/// Periodic grid x_j = -L + j h (h = 2L/N) carrying nodal values of band-limited kernels, and a
/// uniform time grid tau_m = m t_max / M.
struct SpaceTimeGrid {
    double L = 16.0;
    int N = 512;
    double t_max = 0.5;
    int M = 64;

    double h() const { return 2.0 * L / N; }
    double dt() const { return t_max / M; }
    double x(int j) const { return -L + j * h(); }
    double time(int m) const { return m * dt(); }
    /// Index of the grid time equal to t (to 1e-9 relative); throws otherwise.
    int time_index(double t) const;
    /// Nearest node to x (periodic).
    int node_index(double x) const;
    /// Wave number of spectral slot k = 0..N/2.
    double wavenumber(int k) const;
    void validate() const;
};

/// Kernel values on (stored time, x node, y node). Translation-invariant fields keep one row
/// indexed by the periodic offset y - x.
class KernelField {
public:
    static constexpr int kSum = -1;

    KernelField() = default;
    KernelField(SpaceTimeGrid grid, ModelParams params, std::string b_id, int term_index, bool translation_invariant,
                std::vector<int> time_indices, std::vector<int> rows);

    double operator()(int slot, int i, int j) const;
    double& ref(int slot, int i, int j);
    /// Row x_i at a stored time (N values over y). Requires i in rows().
    std::vector<double> row(int slot, int i) const;

    const SpaceTimeGrid& grid() const { return grid_; }
    const ModelParams& params() const { return params_; }
    const std::string& b_id() const { return b_id_; }
    int term_index() const { return term_index_; }
    bool translation_invariant() const { return ti_; }
    const std::vector<int>& time_indices() const { return times_; }
    /// Rows that were computed (all N unless a subset was requested).
    const std::vector<int>& rows() const { return rows_; }
    bool has_row(int i) const;
    bool full() const { return ti_ || static_cast<int>(rows_.size()) == grid_.N; }
    int slot_of_index(int m) const;  // -1 if absent
    int slot_of_time(double t) const;
    double time_of_slot(int slot) const { return grid_.time(times_[static_cast<std::size_t>(slot)]); }
    std::size_t slots() const { return times_.size(); }

    double sup_abs() const;
    double min_value() const;

private:
    std::size_t offset(int slot, int i, int j) const;

    SpaceTimeGrid grid_;
    ModelParams params_;
    std::string b_id_;
    int term_index_ = kSum;
    bool ti_ = false;
    std::vector<int> times_;
    std::vector<int> rows_;
    std::vector<int> row_slot_;  // node -> position in rows_, -1 if absent
    std::vector<double> values_;
};

struct SeriesOptions {
    int n_max = 40;
    int n_min = 4;
    double tol = 1e-10;  // stop once ||q_n|| <= tol ||q_0|| on the row
    std::vector<int> rows;             // x rows to compute; empty means all
    std::vector<int> keep_terms;       // term fields to retain
    bool keep_all_times = true;
    std::vector<double> record_times;  // stored times when keep_all_times is false
    double divergence_ratio = 1.0;
    int divergence_run = 3;
};

struct SeriesReport {
    std::vector<double> term_norms;   // sup |q_n| over computed rows and times t > 0
    std::vector<double> term_masses;  // sup |int q_n(t, x, y) dy|
    std::vector<double> term_ratios;
    double ratio = 0.0;               // largest of the last three term ratios
    double truncation_bound = 0.0;
    double horizon_estimate = std::numeric_limits<double>::infinity();
    double mass_defect = 0.0;         // sup |int q(t, x, y) dy - 1|
    int terms_used = 0;
    bool converged = false;
    double duhamel_forward = std::numeric_limits<double>::quiet_NaN();
    double duhamel_backward = std::numeric_limits<double>::quiet_NaN();
    double chapman_kolmogorov = std::numeric_limits<double>::quiet_NaN();
};

struct SeriesResult {
    KernelField sum;
    std::map<int, KernelField> terms;
    SeriesReport report;
};

/// S^b_z p_0(s, z, y) at the given z nodes (real-space operator quadrature).
std::vector<double> sb_p0_field(const BFunction& b, const ModelParams& params, double s, double y,
                                const std::vector<double>& z_nodes, const OperatorOptions& opts = {});

/// Band-limited periodized p_0 on the grid (term 0 of the series).
KernelField p0_field(const ModelParams& params, const SpaceTimeGrid& grid, const std::string& b_id,
                     bool translation_invariant, const std::vector<int>& rows = {});

/// One Picard step q_n from q_{n-1}; previous must hold every grid time.
KernelField picard_term(const BFunction& b, const ModelParams& params, const KernelField& previous);

/// Picard series on the periodic grid. Throws DivergenceError when term ratios stay >= 1.
SeriesResult sum_series(const BFunction& b, const ModelParams& params, const SpaceTimeGrid& grid,
                        const SeriesOptions& opts = {});

/// Kernel at target_t = s + r from two stored times by the spatial product sum_z h q(s,x,z) q(r,z,y).
/// s defaults to the largest stored time with target_t - s also stored. Needs a full field.
KernelField extend_time(const KernelField& q, double target_t, double s = -1.0, double mass_tol = 1e-2);

struct ResidualFields {
    KernelField forward;
    KernelField backward;
    double forward_sup = 0.0;
    double backward_sup = 0.0;
};

/// q - p_0 - int int q(t-s,x,z) S^b_z p_0(s,z,y) and q - p_0 - int int p_0(t-s,x,z) S^b_z q(s,z,y),
/// with the discrete time quadrature of the series. The backward form needs a full field.
ResidualFields duhamel_residuals(const KernelField& q, const BFunction& b, bool backward = true);

/// sup |sum_z h q(t,x,z) q(s,z,y) - q(t+s,x,y)| over the computed rows.
double chapman_kolmogorov_residual(const KernelField& q, double t, double s);

/// T_t f(x_i) = sum_j h q(t, x_i, y_j) f(y_j) for every computed row (NaN elsewhere).
std::vector<double> semigroup_apply(const KernelField& q, const std::vector<double>& f_nodes, double t);

/// sup over computed rows of |T_t f - f - int_0^t T_s L^b f ds| with L^b f evaluated by the
/// real-space operator quadrature on the nodes.
double generator_identity_check(const KernelField& q, const BFunction& b, const std::function<double(double)>& f,
                                double t, const OperatorOptions& opts = {});

/// Far-image correction turning periodic values into whole-line values for offsets |y - x| <= L:
/// exact images of p_0, first-order images t j^b_beta, and the heavy-tail part of the second-order
/// images from the small-frequency behaviour of the symbol (u frozen at the row).
class ImageCorrection {
public:
    ImageCorrection(const BFunction& b, const ModelParams& params, const SpaceTimeGrid& grid);
    /// Amount to subtract from the periodic value of term `term` (KernelField::kSum for the sum).
    double operator()(double t, int i, int j, int term = KernelField::kSum) const;
    /// Same for an arbitrary offset z in [-L, L] from x_i.
    double at_offset(double t, int i, double z, int term = KernelField::kSum) const;

private:
    double p0_images(double t, double z) const;
    double beta_images(int i, double z) const;
    double second_order_images(double t, int i, double z) const;

    ModelParams params_;
    SpaceTimeGrid grid_;
    std::vector<std::vector<double>> u_nodes_;  // per separable term, u at the nodes
    std::vector<RadialProfile> profiles_;
    struct TailPower {
        std::size_t term;
        double kappa;  // symbol ~ -u kappa |xi|^gamma near 0
        double gamma;
    };
    struct TailPair {
        std::size_t first, second;
        double exponent;
        double weight;  // kappa kappa' A(1, -exponent)
    };
    std::vector<TailPower> tail_powers_;
    std::vector<TailPair> tail_pairs_;
    std::shared_ptr<const StableDensityTable> table_;
    double a_alpha_ = 0.0;
    double a_beta_ = 0.0;
};

/// Line value q(t, x_i, x_i + z) for |z| <= L: periodic value minus the image correction.
double line_value(const KernelField& q, const ImageCorrection& images, int slot, int i, int j);

/// Integrals of the kernel row q(t, x_i, .) over consecutive bins (edges within x_i +- L),
/// integrating the trigonometric interpolant exactly and the image correction by Simpson's rule.
std::vector<double> row_bin_integrals(const KernelField& q, const ImageCorrection* images, int slot, int i,
                                      const std::vector<double>& edges);

/// sup over common nodes/times of |q^b(t,x,y) - lambda^{d/alpha} q^{b^(lambda)}(lambda t, ...)| divided by
/// sup |q^b|. The right side runs on the grid scaled by lambda^{1/alpha} with twice as many time steps.
double scaling_equivalence_check(const BFunction& b, const ModelParams& params, double lambda,
                                 const SpaceTimeGrid& grid, const SeriesOptions& opts = {});

struct EnvelopeReport {
    double sup_ratio_upper = 0.0;   // sup q / p_{M_{b+,lambda}}
    double inf_ratio_lower = 0.0;   // inf q / p_{m_{b+,lambda}}
    double sup_ratio_p0 = 0.0;      // sup q / p_0
    double inf_ratio_p0 = 0.0;      // inf q / p_0
    double near_diagonal_inf = 0.0; // inf q / p_0 on |x - y| <= 3 t^{1/alpha}
    TailStats tails;
};

/// Envelope ratios over stored times in [t_min, t_max_used] and offsets |x - y| <= radius, against
/// the discretized p_0 (term 0 of the same grid) and p_a from radial inversion.
EnvelopeReport envelope_report(const KernelField& q, const BFunction& b, double lambda, double t_min,
                               double t_max_used, double radius);

/// Horizon where the term ratio would reach 1/2, from ratio r observed at t_max.
double horizon_from_ratio(const ModelParams& params, double t_max, double ratio);

}  // namespace nlpert
