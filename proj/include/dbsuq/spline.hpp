#pragma once

#include <span>
#include <vector>

namespace dbsuq {

enum class SplineEnd {
    Natural,   // zero second derivative at both ends
    NotAKnot,  // continuous third derivative at the second and penultimate knots
};

// Cubic spline through (x_i, y_i), x strictly increasing. Evaluation is exact
// at the knots and refuses to extrapolate.
class CubicSpline {
public:
    CubicSpline() = default;
    CubicSpline(std::vector<double> x, std::vector<double> y,
                SplineEnd end = SplineEnd::NotAKnot);

    double operator()(double x) const;

    double x_min() const { return x_.front(); }
    double x_max() const { return x_.back(); }
    std::size_t size() const { return x_.size(); }

private:
    std::vector<double> x_;
    std::vector<double> y_;
    std::vector<double> second_;  // second derivatives at the knots
};

// Solves a tridiagonal system in place (Thomas algorithm). lower[0] and
// upper[n-1] are ignored. rhs is overwritten with the solution.
void solve_tridiagonal(std::span<const double> lower, std::span<double> diag,
                       std::span<const double> upper, std::span<double> rhs);

}  // namespace dbsuq
