#pragma once

#include <functional>

namespace dbsuq {

struct BrentResult {
    double root = 0.0;
    double lower = 0.0;  // final bracket, f changes sign on [lower, upper]
    double upper = 0.0;
    int evaluations = 0;
    int iterations = 0;
};

// Bracketing root finder (bisection, secant, inverse quadratic interpolation).
// Requires f(a) f(b) < 0. Stops once the bracket is no wider than tol_abs (plus
// a few ulps of the root); every evaluation lies inside [a, b].
// Throws NumericalError without a sign change or after max_iterations.
BrentResult brent(const std::function<double(double)>& f, double a, double b, double tol_abs,
                  int max_iterations = 200);

}  // namespace dbsuq
