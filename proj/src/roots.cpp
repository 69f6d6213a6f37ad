#include "pbill/roots.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include "pbill/error.hpp"

namespace pbill {

RootResult brent_root(const std::function<double(double)>& f, double a, double b, double fa, double fb,
                      double xtol, std::size_t max_evaluations) {
    if (!(a < b)) throw ContractError("root bracket must satisfy a < b");
    if (!(xtol > 0.0)) throw ContractError("root tolerance must be positive");
    RootResult res;
    if (fa == 0.0) return {a, 0.0, a, a, 0, true};
    if (fb == 0.0) return {b, 0.0, b, b, 0, true};
    if ((fa > 0.0) == (fb > 0.0)) throw NumericalError("root bracket has no sign change");

    const double eps = std::numeric_limits<double>::epsilon();
    // b is the best iterate, a the previous one, c the contrapoint with f(c) of opposite sign.
    double c = a, fc = fa, d = b - a, e = d;
    for (;;) {
        if ((fb > 0.0) == (fc > 0.0)) {
            c = a;
            fc = fa;
            d = e = b - a;
        }
        if (std::abs(fc) < std::abs(fb)) {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        const double tol = 0.5 * std::max(xtol, 4.0 * eps * std::abs(b));
        const double m = 0.5 * (c - b);
        if (std::abs(m) <= tol || fb == 0.0) {
            res.x = b;
            res.fx = fb;
            res.lo = std::min(b, c);
            res.hi = std::max(b, c);
            res.converged = true;
            return res;
        }
        if (res.evaluations >= max_evaluations) {
            res.x = b;
            res.fx = fb;
            res.lo = std::min(b, c);
            res.hi = std::max(b, c);
            return res;
        }
        if (std::abs(e) >= tol && std::abs(fa) > std::abs(fb)) {
            double p, q;
            const double s = fb / fa;
            if (a == c) {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                const double qa = fa / fc, r = fb / fc;
                p = s * (2.0 * m * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if (p > 0.0) {
                q = -q;
            } else {
                p = -p;
            }
            if (2.0 * p < std::min(3.0 * m * q - std::abs(tol * q), std::abs(e * q))) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += std::abs(d) > tol ? d : (m > 0.0 ? tol : -tol);
        fb = f(b);
        ++res.evaluations;
    }
}

Transition bisect_transition(const std::function<bool(double)>& pred, double a, double b, double xtol,
                             std::size_t max_steps) {
    if (!(a < b)) throw ContractError("bisection interval must satisfy a < b");
    for (std::size_t k = 0; k < max_steps && b - a > xtol; ++k) {
        const double mid = a + 0.5 * (b - a);
        if (mid <= a || mid >= b) break;
        if (pred(mid)) {
            b = mid;
        } else {
            a = mid;
        }
    }
    return {a, b};
}

}  // namespace pbill
