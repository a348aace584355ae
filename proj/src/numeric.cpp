#include "occq/numeric.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

#include "occq/errors.hpp"

namespace occq::numeric {
namespace {

constexpr int kMaxDepth = 80;

struct Simpson {
    const Integrand& f;
    std::size_t evaluations = 0;
    std::size_t cap;

    double eval(double x) {
        if (++evaluations > cap) {
            throw NumericalError("adaptive Simpson exceeded its subdivision cap");
        }
        const double v = f(x);
        return std::isfinite(v) ? v : 0.0;
    }

    double step(double a, double b, double fa, double fm, double fb, double whole, double eps, int depth) {
        const double m = 0.5 * (a + b);
        const double lm = 0.5 * (a + m);
        const double rm = 0.5 * (m + b);
        const double flm = eval(lm);
        const double frm = eval(rm);
        const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        const double delta = left + right - whole;
        if (depth >= kMaxDepth || std::abs(delta) <= 15.0 * eps || m <= a || m >= b) {
            return left + right + delta / 15.0;
        }
        return step(a, m, fa, flm, fm, left, 0.5 * eps, depth + 1) +
               step(m, b, fm, frm, fb, right, 0.5 * eps, depth + 1);
    }
};

}  // namespace

double integrate(const Integrand& f, double a, double b, QuadratureOptions opts) {
    if (a == b) return 0.0;
    if (a > b) return -integrate(f, b, a, opts);
    Simpson s{f, 0, opts.max_subdivisions};
    // Seed with a few panels so narrow features are not skipped by the first estimate.
    constexpr int kPanels = 8;
    const double h = (b - a) / kPanels;
    double total = 0.0;
    double x0 = a;
    double f0 = s.eval(x0);
    for (int i = 0; i < kPanels; ++i) {
        const double x1 = (i == kPanels - 1) ? b : a + (i + 1) * h;
        const double xm = 0.5 * (x0 + x1);
        const double fm = s.eval(xm);
        const double f1 = s.eval(x1);
        const double whole = (x1 - x0) / 6.0 * (f0 + 4.0 * fm + f1);
        total += s.step(x0, x1, f0, fm, f1, whole, opts.abs_tol / kPanels, 0);
        x0 = x1;
        f0 = f1;
    }
    return total;
}

double integrate_to_infinity(const Integrand& f, double a, QuadratureOptions opts) {
    auto mapped = [&](double u) {
        if (u <= 0.0) return 0.0;
        const double t = a + (1.0 - u) / u;
        return f(t) / (u * u);
    };
    return integrate(mapped, 0.0, 1.0, opts);
}

double integrate_from_minus_infinity(const Integrand& f, double b, QuadratureOptions opts) {
    return integrate_to_infinity([&](double t) { return f(-t); }, -b, opts);
}

double integrate_range(const Integrand& f, double a, double b, QuadratureOptions opts) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    if (a > b) return -integrate_range(f, b, a, opts);
    if (a == b) return 0.0;
    if (a == -inf && b == inf) {
        return integrate_from_minus_infinity(f, 0.0, opts) + integrate_to_infinity(f, 0.0, opts);
    }
    if (a == -inf) return integrate_from_minus_infinity(f, b, opts);
    if (b == inf) return integrate_to_infinity(f, a, opts);
    return integrate(f, a, b, opts);
}

double bisect(const std::function<double(double)>& f, double lo, double hi, double tol,
              std::size_t max_doublings) {
    double flo = f(lo);
    if (flo == 0.0) return lo;
    double fhi = f(hi);
    std::size_t doublings = 0;
    while ((flo > 0) == (fhi > 0) && fhi != 0.0) {
        if (++doublings > max_doublings) {
            throw NumericalError("bisection could not bracket a root");
        }
        lo = hi;
        flo = fhi;
        hi = hi > 0 ? 2.0 * hi : 1.0;
        fhi = f(hi);
    }
    if (fhi == 0.0) return hi;
    while (hi - lo > tol) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        const double fm = f(mid);
        if (fm == 0.0) return mid;
        if ((fm > 0) == (flo > 0)) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

std::string fmt(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

}  // namespace occq::numeric
