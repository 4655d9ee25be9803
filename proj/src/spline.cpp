#include "dbsuq/spline.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace dbsuq {

void solve_tridiagonal(std::span<const double> lower, std::span<double> diag,
                       std::span<const double> upper, std::span<double> rhs)
{
    const std::size_t n = diag.size();
    for (std::size_t k = 1; k < n; ++k) {
        const double factor = lower[k] / diag[k - 1];
        diag[k] -= factor * upper[k - 1];
        rhs[k] -= factor * rhs[k - 1];
    }
    rhs[n - 1] /= diag[n - 1];
    for (std::size_t k = n - 1; k-- > 0;)
        rhs[k] = (rhs[k] - upper[k] * rhs[k + 1]) / diag[k];
}

CubicSpline::CubicSpline(std::vector<double> x, std::vector<double> y, SplineEnd end)
    : x_(std::move(x)), y_(std::move(y))
{
    const std::size_t n = x_.size();
    if (n < 2 || y_.size() != n)
        throw std::invalid_argument("spline needs at least two knots and matching values");
    for (std::size_t i = 1; i < n; ++i)
        if (!(x_[i] > x_[i - 1]))
            throw std::invalid_argument("spline knots must be strictly increasing");

    second_.assign(n, 0.0);
    if (n == 2) return;
    if (n == 3 && end == SplineEnd::NotAKnot) {
        // The not-a-knot spline through three points is the interpolating parabola.
        const double h0 = x_[1] - x_[0];
        const double h1 = x_[2] - x_[1];
        const double curvature =
            2.0 * ((y_[2] - y_[1]) / h1 - (y_[1] - y_[0]) / h0) / (h0 + h1);
        second_.assign(3, curvature);
        return;
    }

    const std::size_t m = n - 2;
    std::vector<double> lower(m), diag(m), upper(m), rhs(m);
    for (std::size_t k = 0; k < m; ++k) {
        const std::size_t i = k + 1;
        const double h0 = x_[i] - x_[i - 1];
        const double h1 = x_[i + 1] - x_[i];
        lower[k] = h0;
        diag[k] = 2.0 * (h0 + h1);
        upper[k] = h1;
        rhs[k] = 6.0 * ((y_[i + 1] - y_[i]) / h1 - (y_[i] - y_[i - 1]) / h0);
    }
    if (end == SplineEnd::NotAKnot) {
        // Eliminate M_0 = ((h0+h1) M_1 - h0 M_2) / h1 and the mirror image at the
        // far end from the first and last interior rows.
        const double h0 = x_[1] - x_[0];
        const double h1 = x_[2] - x_[1];
        diag[0] += h0 * (h0 + h1) / h1;
        upper[0] -= h0 * h0 / h1;
        const double ha = x_[n - 2] - x_[n - 3];
        const double hb = x_[n - 1] - x_[n - 2];
        diag[m - 1] += hb * (ha + hb) / ha;
        lower[m - 1] -= hb * hb / ha;
    }
    solve_tridiagonal(lower, diag, upper, rhs);
    std::copy(rhs.begin(), rhs.end(), second_.begin() + 1);
    if (end == SplineEnd::NotAKnot) {
        const double h0 = x_[1] - x_[0];
        const double h1 = x_[2] - x_[1];
        second_[0] = ((h0 + h1) * second_[1] - h0 * second_[2]) / h1;
        const double ha = x_[n - 2] - x_[n - 3];
        const double hb = x_[n - 1] - x_[n - 2];
        second_[n - 1] = ((ha + hb) * second_[n - 2] - hb * second_[n - 3]) / ha;
    }
}

double CubicSpline::operator()(double x) const
{
    if (!(x >= x_.front() && x <= x_.back()))
        throw std::out_of_range("spline query " + std::to_string(x) + " outside [" +
                                std::to_string(x_.front()) + ", " +
                                std::to_string(x_.back()) + "]");
    auto it = std::upper_bound(x_.begin(), x_.end(), x);
    std::size_t i = static_cast<std::size_t>(std::distance(x_.begin(), it));
    i = std::clamp<std::size_t>(i, 1, x_.size() - 1);
    const std::size_t lo = i - 1;
    const double h = x_[i] - x_[lo];
    const double a = (x_[i] - x) / h;
    const double b = (x - x_[lo]) / h;
    return a * y_[lo] + b * y_[i] +
           ((a * a * a - a) * second_[lo] + (b * b * b - b) * second_[i]) * h * h / 6.0;
}

}  // namespace dbsuq
