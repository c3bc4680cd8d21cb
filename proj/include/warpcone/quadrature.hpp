#pragma once

#include <functional>
#include <vector>

namespace warpcone {

struct GaussRule {
    std::vector<double> nodes;    // on [-1, 1], ascending
    std::vector<double> weights;
};

/// n-point Gauss-Legendre rule computed by Newton iteration on P_n.
GaussRule gauss_legendre(int n);

struct QuadResult {
    double value = 0.0;
    double abs_error = 0.0;
    bool converged = true;
};

/// Globally adaptive 7/15-point Gauss-Kronrod quadrature on [a, b].
/// Bisects the interval with the largest error estimate until the total
/// estimate is below max(abs_tol, rel_tol * |value|) or the interval budget
/// runs out (converged = false).
QuadResult integrate_adaptive(const std::function<double(double)>& f, double a, double b,
                              double rel_tol = 1e-13, double abs_tol = 1e-300,
                              int max_intervals = 2000);

/// Cumulative integral of h from lo, tabulated on a log-spaced grid over
/// [lo, hi] and completed inside a cell by a 10-point Gauss-Legendre rule.
/// Saturates at the table end.
class CumulativeIntegral {
public:
    CumulativeIntegral(std::function<double(double)> h, double lo, double hi, int cells_per_doubling = 32);

    /// Integral over [lo, x].
    double operator()(double x) const;
    /// Integral over [x, hi], summed from the top so small tails keep full
    /// relative accuracy.
    double upper(double x) const;
    double total() const { return cum_.back(); }
    double lo() const { return grid_.front(); }
    double hi() const { return grid_.back(); }

private:
    std::function<double(double)> h_;
    GaussRule rule_;
    std::vector<double> grid_;
    std::vector<double> cum_;
    std::vector<double> suf_;
};

}  // namespace warpcone
