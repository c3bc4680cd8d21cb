#include "warpcone/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <queue>

#include "warpcone/error.hpp"

namespace warpcone {

GaussRule gauss_legendre(int n) {
    if (n < 1) throw InputError("gauss_legendre: n must be positive");
    GaussRule rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            if (n == 1) {
                p1 = x;
                p0 = 1.0;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        // Recompute the derivative at the converged root for the weight.
        double p0 = 1.0, p1 = x;
        for (int k = 2; k <= n; ++k) {
            const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
            p0 = p1;
            p1 = p2;
        }
        dp = n == 1 ? 1.0 : n * (x * p1 - p0) / (x * x - 1.0);
        const double w = 2.0 / ((1.0 - x * x) * dp * dp);
        rule.nodes[n - 1 - i] = x;
        rule.nodes[i] = -x;
        rule.weights[i] = w;
        rule.weights[n - 1 - i] = w;
    }
    if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
    return rule;
}

namespace {

constexpr double kXgk[8] = {0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
                            0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
                            0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
                            0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
constexpr double kWgk[8] = {0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
                            0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
                            0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
                            0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr double kWg[4] = {0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
                           0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Segment {
    double a, b, value, error;
    bool operator<(const Segment& o) const { return error < o.error; }
};

Segment gk15(const std::function<double(double)>& f, double a, double b) {
    const double c = 0.5 * (a + b);
    const double h = 0.5 * (b - a);
    const double fc = f(c);
    double kron = fc * kWgk[7];
    double gauss = fc * kWg[3];
    for (int j = 0; j < 7; ++j) {
        const double dx = h * kXgk[j];
        const double sum = f(c - dx) + f(c + dx);
        kron += kWgk[j] * sum;
        if (j % 2 == 1) gauss += kWg[j / 2] * sum;
    }
    return {a, b, kron * h, std::abs((kron - gauss) * h)};
}

}  // namespace

QuadResult integrate_adaptive(const std::function<double(double)>& f, double a, double b,
                              double rel_tol, double abs_tol, int max_intervals) {
    if (a == b) return {};
    std::priority_queue<Segment> heap;
    Segment first = gk15(f, a, b);
    double value = first.value;
    double error = first.error;
    heap.push(first);
    int count = 1;
    while (error > std::max(abs_tol, rel_tol * std::abs(value))) {
        if (!std::isfinite(value)) throw EvaluationError("integrate_adaptive: non-finite integrand");
        if (count >= max_intervals) return {value, error, false};
        Segment worst = heap.top();
        heap.pop();
        const double mid = 0.5 * (worst.a + worst.b);
        Segment left = gk15(f, worst.a, mid);
        Segment right = gk15(f, mid, worst.b);
        value += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        ++count;
        // Roundoff floor: the summed estimate can stall just above the target.
        if (worst.error <= 64.0 * std::numeric_limits<double>::epsilon() * std::abs(worst.value)) {
            error = 0.0;
            while (!heap.empty()) {
                error += heap.top().error;
                heap.pop();
            }
            return {value, error, true};
        }
    }
    // Re-sum to drop accumulated cancellation in the running totals.
    double v = 0.0, e = 0.0;
    while (!heap.empty()) {
        v += heap.top().value;
        e += heap.top().error;
        heap.pop();
    }
    return {v, e, std::isfinite(v)};
}

CumulativeIntegral::CumulativeIntegral(std::function<double(double)> h, double lo, double hi,
                                       int cells_per_doubling)
    : h_(std::move(h)), rule_(gauss_legendre(10)) {
    if (!(lo > 0.0) || !(hi > lo)) throw InputError("CumulativeIntegral: need 0 < lo < hi");
    const int cells = std::max(1, static_cast<int>(std::ceil(std::log2(hi / lo) * cells_per_doubling)));
    grid_.resize(cells + 1);
    cum_.assign(cells + 1, 0.0);
    for (int i = 0; i <= cells; ++i) grid_[i] = lo * std::pow(hi / lo, static_cast<double>(i) / cells);
    grid_.back() = hi;
    std::vector<double> cell(cells);
    for (int i = 0; i < cells; ++i) cell[i] = integrate_adaptive(h_, grid_[i], grid_[i + 1]).value;
    for (int i = 0; i < cells; ++i) cum_[i + 1] = cum_[i] + cell[i];
    suf_.assign(cells + 1, 0.0);
    for (int i = cells - 1; i >= 0; --i) suf_[i] = suf_[i + 1] + cell[i];
}

double CumulativeIntegral::upper(double x) const {
    if (x <= grid_.front()) return suf_.front();
    if (x >= grid_.back()) return 0.0;
    const auto it = std::upper_bound(grid_.begin(), grid_.end(), x);
    const std::size_t i = static_cast<std::size_t>(it - grid_.begin());
    const double b = grid_[i];
    const double c = 0.5 * (x + b), w = 0.5 * (b - x);
    double s = 0.0;
    for (std::size_t j = 0; j < rule_.nodes.size(); ++j) s += rule_.weights[j] * h_(c + w * rule_.nodes[j]);
    return suf_[i] + w * s;
}

double CumulativeIntegral::operator()(double x) const {
    if (x <= grid_.front()) return 0.0;
    if (x >= grid_.back()) return cum_.back();
    const auto it = std::upper_bound(grid_.begin(), grid_.end(), x);
    const std::size_t i = static_cast<std::size_t>(it - grid_.begin()) - 1;
    const double a = grid_[i];
    const double c = 0.5 * (x + a), w = 0.5 * (x - a);
    double s = 0.0;
    for (std::size_t j = 0; j < rule_.nodes.size(); ++j) s += rule_.weights[j] * h_(c + w * rule_.nodes[j]);
    return cum_[i] + w * s;
}

}  // namespace warpcone
