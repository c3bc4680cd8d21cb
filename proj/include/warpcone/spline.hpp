#pragma once

#include <span>
#include <vector>

#include "warpcone/jet.hpp"

namespace warpcone {

/// Natural cubic spline through strictly increasing knots. Evaluation
/// returns the spline value with its analytic first and second derivatives.
/// Outside the knot range the end cubic is used as is; callers decide how to
/// extend beyond the table.
class CubicSpline {
public:
    CubicSpline(std::span<const double> x, std::span<const double> y);

    Jet2 evaluate(double x) const;

    double front() const { return x_.front(); }
    double back() const { return x_.back(); }

private:
    std::vector<double> x_;
    std::vector<double> y_;
    std::vector<double> m_;  // second derivatives at the knots
};

}  // namespace warpcone
