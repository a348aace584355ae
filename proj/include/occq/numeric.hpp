#pragma once

#include <cstddef>
#include <functional>
#include <string>

namespace occq::numeric {

using Integrand = std::function<double(double)>;

struct QuadratureOptions {
    double abs_tol = 1e-10;
    std::size_t max_subdivisions = 1'000'000;
};

/// Adaptive Simpson on a finite interval [a, b].
double integrate(const Integrand& f, double a, double b, QuadratureOptions opts = {});

/// Integral over [a, inf) using the map t = a + (1 - u) / u on u in (0, 1].
/// The integrand is taken as zero at t = inf.
double integrate_to_infinity(const Integrand& f, double a, QuadratureOptions opts = {});

/// Integral over (-inf, b].
double integrate_from_minus_infinity(const Integrand& f, double b, QuadratureOptions opts = {});

/// Dispatches on infinite endpoints.
double integrate_range(const Integrand& f, double a, double b, QuadratureOptions opts = {});

/// Root of a monotone function on [lo, inf). `hi` is doubled until the sign changes.
/// Bisection stops once the bracket is narrower than `tol`.
double bisect(const std::function<double(double)>& f, double lo, double hi, double tol = 1e-10,
              std::size_t max_doublings = 200);

/// Short human-readable rendering for messages ("%g", with inf spelled out).
std::string fmt(double v);

}  // namespace occq::numeric
