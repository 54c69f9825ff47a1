#pragma once

#include <limits>
#include <stdexcept>
#include <string>

namespace nlpert {

/// Dimension and stability indices shared by every kernel and operator.
/// Requires d >= 1 and 0 < beta < alpha < 2.
struct ModelParams {
    int d = 1;
    double alpha = 1.5;
    double beta = 0.5;

    void validate() const;
    bool operator==(const ModelParams&) const = default;
};

/// Weight a >= 0 of the beta-stable component and truncation radius lambda > 0
/// (infinity allowed) used by the comparison functions.
struct ComparisonWeight {
    double a = 0.0;
    double lambda = std::numeric_limits<double>::infinity();

    void validate() const;
};

/// Thrown when a quadrature cannot reach its tolerance; carries the achieved estimate.
class QuadratureError : public std::runtime_error {
public:
    QuadratureError(const std::string& what, double achieved_error)
        : std::runtime_error(what), achieved_error_(achieved_error) {}
    double achieved_error() const noexcept { return achieved_error_; }

private:
    double achieved_error_;
};

/// Thrown when the Picard series stops decaying.
class DivergenceError : public std::runtime_error {
public:
    DivergenceError(const std::string& what, double horizon_estimate)
        : std::runtime_error(what), horizon_estimate_(horizon_estimate) {}
    double horizon_estimate() const noexcept { return horizon_estimate_; }

private:
    double horizon_estimate_;
};

void log_warning(const std::string& message);

}  // namespace nlpert
