#include "dbsuq/brent.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "dbsuq/errors.hpp"

namespace dbsuq {

BrentResult brent(const std::function<double(double)>& f, double a, double b, double tol_abs, int max_iterations)
{
    if (!(tol_abs > 0.0)) throw std::invalid_argument("brent: tolerance must be positive");
    if (!std::isfinite(a) || !std::isfinite(b) || a == b) throw std::invalid_argument("brent: bad bracket");

    BrentResult res;
    double fa = f(a), fb = f(b);
    res.evaluations = 2;
    if (fa == 0.0 || fb == 0.0) {
        res.root = fa == 0.0 ? a : b;
        res.lower = res.upper = res.root;
        return res;
    }
    if ((fa > 0.0) == (fb > 0.0))
        throw NumericalError("brent: no sign change on [" + std::to_string(a) + ", " + std::to_string(b) + "]");

    // b is the best estimate, c the opposite end of the bracket, a the previous b.
    double c = a, fc = fa;
    double d = b - a, e = d;
    constexpr double eps = std::numeric_limits<double>::epsilon();
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
        const double tol = 2.0 * eps * std::abs(b) + 0.5 * tol_abs;
        const double m = 0.5 * (c - b);
        if (std::abs(m) <= tol || fb == 0.0) break;
        if (res.iterations >= max_iterations)
            throw NumericalError("brent: no convergence after " + std::to_string(max_iterations) + " iterations");
        ++res.iterations;

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
            if (p > 0.0)
                q = -q;
            else
                p = -p;
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
    res.root = b;
    res.lower = fb == 0.0 ? b : std::min(b, c);
    res.upper = fb == 0.0 ? b : std::max(b, c);
    return res;
}

}  // namespace dbsuq
