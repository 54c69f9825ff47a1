#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "nlpert/model.hpp"
#include "nlpert/nonlocal_operator.hpp"

namespace nlpert {

using Rng = std::mt19937_64;

/// Generator for path `index` of a run seeded with `seed` (splitmix64 of the pair).
Rng path_rng(std::uint64_t seed, std::uint64_t index);

/// Y_t with E exp(i xi Y_t) = exp(-t |xi|^alpha) by Chambers-Mallows-Stuck.
double sample_stable(double alpha, double t_scale, Rng& rng);
/// Isotropic version in dimension d: a Gaussian subordinated by a positive alpha/2-stable time.
std::vector<double> sample_stable_isotropic(double alpha, double t_scale, int d, Rng& rng);
/// Positive stable S with E exp(-u S) = exp(-t u^a), 0 < a < 1 (Kanter).
double sample_positive_stable(double a, double t_scale, Rng& rng);

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
    bool contains(double x) const { return x >= lo && x <= hi; }
};

struct LevyRegions {
    Interval from;
    Interval to;
};

struct SimConfig {
    std::size_t n_paths = 100000;
    double dt = 1e-3;
    double horizon = 1.0;
    std::uint64_t seed = 1;
    double domain_cap = 1e6;  // paths beyond are flagged, never killed
    double x0 = 0.0;
    std::vector<double> record_times;  // positions kept for every path at these times
    std::vector<double> exit_radii;    // first exit times from (x0 - r, x0 + r)
    std::vector<LevyRegions> levy;     // jump counts from one region into the other
    bool keep_paths = false;           // raw skeletons and jump logs
    double jump_factor = 10.0;         // increments above jump_factor dt^{1/alpha} are logged as jumps

    void validate() const;
};

enum class JumpTag { Alpha, Beta, Meyer };
const char* to_string(JumpTag tag);

struct JumpRecord {
    double time;
    double from;
    double to;
    JumpTag tag;
};

struct PathRecord {
    std::vector<double> times;
    std::vector<double> positions;
    std::vector<JumpRecord> jumps;
};

/// Jumps added at rate J(x) = 2 A(1,-beta) int_lambda^inf g(r) r^{-1-beta} dr with displacement density
/// proportional to g(|z|)|z|^{-1-beta} on |z| > lambda; g is the x-independent difference b_hat - b.
class MeyerAugmentation {
public:
    MeyerAugmentation() = default;
    MeyerAugmentation(RadialProfile added, const ModelParams& params, double lambda);
    /// Difference b_hat - b of two x-independent coefficients (identical ids give the empty augmentation).
    /// Rejects negative intensity and differences that do not vanish on |z| <= lambda.
    static MeyerAugmentation from_coefficients(const BFunction& b, const BFunction& b_hat, const ModelParams& params,
                                               double lambda);

    double intensity() const { return intensity_; }
    bool empty() const { return intensity_ == 0.0; }
    double lambda() const { return lambda_; }
    /// |z| drawn from the normalized radial density; the sign is drawn separately.
    double sample_radius(Rng& rng) const;

private:
    struct Segment {
        double lo, hi;  // hi may be +inf
        std::vector<PowerPiece> pieces;
        double mass;
    };
    double segment_cdf(const Segment& s, double r) const;

    RadialProfile added_;
    double beta_ = 0.5;
    double lambda_ = 1.0;
    double intensity_ = 0.0;
    std::vector<Segment> segments_;
    std::vector<double> cumulative_;
};

/// Per-path tallies of one run. Path-indexed arrays keep results independent of thread count.
struct PathEnsemble {
    SimConfig config;
    ModelParams params;
    std::string model_id;
    std::vector<std::vector<double>> positions;   // [record time][path]
    std::vector<std::uint8_t> flagged;            // left [-cap, cap] at some step
    std::vector<std::vector<double>> exit_times;  // [radius][path], +inf if no exit
    std::vector<std::vector<double>> levy_counts;     // [region pair][path]
    std::vector<std::vector<double>> levy_predicted;  // [region pair][path] int 1_A(X) int_B J dy ds
    std::vector<double> meyer_counts;
    std::vector<double> meyer_compensator;
    std::uint64_t alpha_jumps = 0;
    std::uint64_t beta_jumps = 0;
    std::vector<PathRecord> paths;  // when keep_paths

    std::size_t size() const { return config.n_paths; }
    const std::vector<double>& positions_at(double t) const;
};

/// Jump coefficient c of the SDE. b(x, z) = |c(x)|^beta.
struct SdeCoefficient {
    std::function<double(double)> c;
    std::string label;
    bool zero = false;
};
/// "const:v" (c = v), "constant:a" (b = a >= 0, so c = a^{1/beta}), "sde:<expr>" or a bare expression in x.
SdeCoefficient sde_coefficient(const std::string& spec, const ModelParams& params);

/// Euler scheme X_{k+1} = X_k + dY_k + c(X_k) dZ_k (d = 1) with optional added jumps.
/// A constant c = 0 skips the beta increments.
PathEnsemble simulate_sde(const std::function<double(double)>& c, const std::string& c_label, const ModelParams& params,
                          const SimConfig& config, const MeyerAugmentation* augmentation = nullptr,
                          bool c_is_zero = false);

/// simulate_sde with Meyer's added jumps, tagged as such.
PathEnsemble meyer_augment(const std::function<double(double)>& c, const std::string& c_label,
                           const ModelParams& params, const SimConfig& config, const MeyerAugmentation& augmentation,
                           bool c_is_zero = false);

/// int_B J^b(x, y) dy for b = |c(x)|^beta and x outside B.
double jump_rate_into(const ModelParams& params, double c_value, double x, const Interval& to);

struct ZScore {
    double empirical = 0.0;
    double predicted = 0.0;
    double z = 0.0;
    double standard_error = 0.0;
};

/// Mean jump count from A into B against the mean compensator, z from the per-path differences.
/// Throws when fewer than 10 events are expected in total.
ZScore levy_system_check(const PathEnsemble& ensemble, std::size_t region);
/// Meyer jump count against its compensator.
ZScore meyer_count_check(const PathEnsemble& ensemble);

struct ExitEstimate {
    double probability = 0.0;
    double kappa_hat = 0.0;  // largest kappa with P(tau <= kappa r^alpha) <= 1/2
    bool discretization_warning = false;
};
ExitEstimate exit_probability(const PathEnsemble& ensemble, std::size_t radius_index, double t);

struct Histogram {
    std::vector<double> edges;
    std::vector<double> probability;  // fraction of all paths per bin
    std::vector<double> density;
    std::vector<double> std_error;    // of the density
    std::size_t n = 0;
    double outside = 0.0;  // fraction outside the bins or flagged
};
Histogram empirical_density(const PathEnsemble& ensemble, double t, const std::vector<double>& edges);
Histogram histogram(const std::vector<double>& samples, const std::vector<double>& edges,
                    const std::vector<std::uint8_t>* flagged = nullptr);
std::vector<double> uniform_edges(double lo, double hi, int bins);

struct DensityComparison {
    double max_z = 0.0;
    double tv = 0.0;  // half the l1 distance over bins plus the outside mass
};
/// model_probability holds the kernel integrated over each bin.
DensityComparison compare_density(const Histogram& h, const std::vector<double>& model_probability);

/// Integrals of a density over consecutive bins by adaptive Gauss-Kronrod.
std::vector<double> bin_probabilities(const std::function<double(double)>& density, const std::vector<double>& edges);

struct TwoSample {
    double statistic = 0.0;
    double p_value = 1.0;
};
/// Kolmogorov-Smirnov two-sample test with the asymptotic distribution.
TwoSample ks_two_sample(std::vector<double> a, std::vector<double> b);
double kolmogorov_survival(double lambda);

/// Empirical characteristic function mean of cos(xi X) and its standard error.
std::pair<double, double> ecf_cos(const std::vector<double>& samples, double xi);

}  // namespace nlpert
