#pragma once

#include <functional>
#include <span>
#include <vector>

namespace nlpert::quad {

struct Result {
    double value = 0.0;
    double error = 0.0;
    int evaluations = 0;
};

struct Tolerance {
    double abs = 1e-14;
    double rel = 1e-12;
    int max_depth = 24;
};

/// Single 7/15-point Gauss-Kronrod rule on [a, b].
Result gauss_kronrod15(const std::function<double(double)>& f, double a, double b);

/// Adaptive G7K15 with bisection on [a, b].
Result adaptive(const std::function<double(double)>& f, double a, double b, const Tolerance& tol = {});

/// Adaptive integration over consecutive panels [breaks[i], breaks[i+1]].
Result panels(const std::function<double(double)>& f, std::span<const double> breaks,
              const Tolerance& tol = {});

/// Breakpoints on [0, upper]: dyadic refinement towards zero (levels) followed by
/// uniform panels no longer than max_len.
std::vector<double> graded_breaks(double upper, double max_len, int dyadic_levels = 30);

/// Integral of e^{iv} v^{-mu} over [x, inf) for x >= 20 by its asymptotic expansion;
/// returns the real (cosine) part when phase == 0 and the sine part when phase == 1.
double oscillatory_tail(double mu, double x, int phase);

/// Integral over [x, inf) of cos(v - shift) v^{-mu}.
double shifted_cos_tail(double mu, double x, double shift);

/// Gauss-Legendre nodes and weights on [-1, 1].
void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights);

}  // namespace nlpert::quad
