#pragma once

#include <cstddef>
#include <functional>

namespace pbill {

struct RootResult {
    double x = 0.0;
    double fx = 0.0;
    /// Final bracket; when converged its width is at most max(xtol, 4 eps |x|).
    double lo = 0.0;
    double hi = 0.0;
    std::size_t evaluations = 0;
    bool converged = false;
};

/// Sign-change root of f on [a, b] by Brent's hybrid of bisection, secant and
/// inverse quadratic steps. fa and fb must be the (nonzero, opposite-sign)
/// values at the ends; they are not re-evaluated, so f may be singular there.
RootResult brent_root(const std::function<double(double)>& f, double a, double b, double fa, double fb,
                      double xtol, std::size_t max_evaluations = 200);

struct Transition {
    double lo = 0.0;  // pred false
    double hi = 0.0;  // pred true
};

/// Brackets the point where a monotone predicate switches from false (at a)
/// to true (at b), narrowing until hi - lo <= xtol or doubles run out.
Transition bisect_transition(const std::function<bool(double)>& pred, double a, double b, double xtol,
                             std::size_t max_steps = 200);

}  // namespace pbill
