#pragma once

// Scalar root bracketing and adaptive quadrature shared by the analysis modules.

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <complex>
#include <cstdio>
#include <functional>
#include <limits>
#include <string>

#include "stemflow/error.hpp"

namespace stemflow {

// Adaptive Gauss-Kronrod (15-point pairs) to the given relative tolerance.
// The library's error estimate can be unreliable on very short intervals, so
// a failed estimate is cross-checked against a 31-point evaluation before the
// result is rejected.
template <class F>
double integrate(F&& f, double a, double b, double rel_tol = 1e-12) {
    using boost::math::quadrature::gauss_kronrod;
    if (a == b) return 0.0;
    double err = 0.0;
    double l1 = 0.0;
    const double v = gauss_kronrod<double, 15>::integrate(f, a, b, 20, rel_tol, &err, &l1);
    if (!std::isfinite(v)) throw QuadratureFailure("quadrature produced a non-finite value");
    const double allowed = 100.0 * rel_tol * l1 + std::numeric_limits<double>::min();
    if (err <= allowed) return v;
    double err31 = 0.0;
    double l1_31 = 0.0;
    const double v31 = gauss_kronrod<double, 31>::integrate(f, a, b, 20, rel_tol, &err31, &l1_31);
    if (std::isfinite(v31) && std::abs(v31 - v) <= allowed) return v31;
    char msg[200];
    std::snprintf(msg, sizeof msg,
                  "quadrature on [%.6g, %.6g] did not reach tolerance %.3g (error estimate %.3g of %.3g)", a, b,
                  rel_tol, err, l1);
    throw QuadratureFailure(msg);
}

// Bisection on a bracketing interval [lo, hi] (f(lo), f(hi) of opposite sign
// or zero), run until the interval cannot be halved in double precision.
template <class F>
double bisect(F&& f, double lo, double hi) {
    double flo = f(lo);
    if (flo == 0.0) return lo;
    const double fhi = f(hi);
    if (fhi == 0.0) return hi;
    if ((flo > 0.0) == (fhi > 0.0)) throw NumericalFailure("bisection interval does not bracket a root");
    for (int it = 0; it < 2000; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        const double fm = f(mid);
        if (fm == 0.0) return mid;
        if ((fm > 0.0) == (flo > 0.0)) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

// (e^z - 1) / z, accurate near z = 0.
inline std::complex<double> expm1_over(std::complex<double> z) {
    if (std::abs(z) < 0.05) {
        std::complex<double> term = 1.0;
        std::complex<double> sum = 1.0;
        for (int k = 2; k <= 10; ++k) {
            term *= z / static_cast<double>(k);
            sum += term;
        }
        return sum;
    }
    return (std::exp(z) - 1.0) / z;
}

inline double expm1_over(double z) {
    return std::abs(z) < 1e-300 ? 1.0 : std::expm1(z) / z;
}

}  // namespace stemflow
