#pragma once

#include <cmath>

#include "mglab/errors.hpp"

namespace mglab {

namespace detail {

inline double simpson(double a, double b, double fa, double fm, double fb) {
    return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

template <class F>
double adaptive_step(const F& f, double a, double fa, double b, double fb,
                     double m, double fm, double whole, double tol,
                     int depth) {
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const double flm = f(lm);
    const double frm = f(rm);
    const double left = simpson(a, m, fa, flm, fm);
    const double right = simpson(m, b, fm, frm, fb);
    const double err = left + right - whole;
    if (std::abs(err) <= 15.0 * tol || depth >= 60)
        return left + right + err / 15.0;
    return adaptive_step(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth + 1)
         + adaptive_step(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth + 1);
}

}  // namespace detail

// Adaptive Simpson integration of f over [a, b] to absolute tolerance tol.
template <class F>
double integrate(const F& f, double a, double b, double tol = 1e-10) {
    if (!(tol > 0.0)) throw InvalidInputError("integrate: tol must be > 0");
    if (!(a <= b)) throw InvalidInputError("integrate: requires a <= b");
    if (a == b) return 0.0;
    const double m = 0.5 * (a + b);
    const double fa = f(a), fb = f(b), fm = f(m);
    const double whole = detail::simpson(a, b, fa, fm, fb);
    return detail::adaptive_step(f, a, fa, b, fb, m, fm, whole, tol, 0);
}

}  // namespace mglab
