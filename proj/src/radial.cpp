#include "warpcone/radial.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "warpcone/error.hpp"

namespace warpcone {

double indicial_root(int n, double lambda) {
    if (n < 2) throw InputError("indicial_root: n must be at least 2");
    if (!(lambda >= 0.0)) throw InputError("indicial_root: lambda must be nonnegative");
    const double b = n - 2.0;
    // (-b + sqrt(b^2 + 4 lambda^2))/2 written to avoid cancellation for small lambda.
    const double disc = std::sqrt(b * b + 4.0 * lambda * lambda);
    return b > 0.0 ? 2.0 * lambda * lambda / (b + disc) : 0.5 * disc;
}

FrobeniusSeed frobenius_seed(const WarpingProfile& p, int n, double lambda, double r0, int order) {
    if (!(r0 > 0.0)) throw InputError("frobenius_seed: r0 must be positive");
    FrobeniusSeed seed;
    seed.k = indicial_root(n, lambda);
    if (lambda == 0.0) return seed;

    order = std::clamp(order, 0, 2);
    double b1 = 0.0, b2 = 0.0;
    if (order > 0) {
        const auto taylor = p.cone_taylor();
        if (taylor) {
            b1 = (*taylor)[0];
            b2 = (*taylor)[1];
        } else {
            order = 0;
            seed.fallback = true;
        }
    }
    const double k = seed.k;
    const double l2 = lambda * lambda;
    // phi'/phi = 1/r + c0 + c1 r + ...,  1/phi^2 = r^-2 (1 + d1 r + d2 r^2 + ...)
    const double c0 = b1, c1 = 2.0 * b2 - b1 * b1;
    const double d1 = -2.0 * b1, d2 = 3.0 * b1 * b1 - 2.0 * b2;
    auto indicial_shift = [&](int j) { return j * (2.0 * k + j + n - 2.0); };
    double p1 = 0.0, p2 = 0.0;
    if (order >= 1) p1 = -((n - 1.0) * c0 * k - l2 * d1) / indicial_shift(1);
    if (order >= 2)
        p2 = -((n - 1.0) * c0 * (k + 1.0) * p1 + (n - 1.0) * c1 * k - l2 * (d1 * p1 + d2)) / indicial_shift(2);
    seed.series = {1.0, p1, p2};
    seed.order_used = order;
    const double rk = std::pow(r0, k);
    const double poly = 1.0 + p1 * r0 + p2 * r0 * r0;
    seed.value = rk * poly;
    seed.slope = k * rk / r0 * poly + rk * (p1 + 2.0 * p2 * r0);
    return seed;
}

RadialMode constant_mode(double r_max) {
    RadialMode mode;
    mode.constant_ = true;
    mode.r0_ = r_max;
    mode.nodes_r_ = {0.0, r_max};
    mode.nodes_y_ = {1.0, 1.0};
    mode.nodes_yp_ = {0.0, 0.0};
    mode.nodes_ypp_ = {0.0, 0.0};
    mode.A_m_ = 1.01;
    return mode;
}

void RadialMode::hermite(double r, double& value, double& slope) const {
    if (r < 0.0 || r > r_max() * (1.0 + 1e-12))
        throw EvaluationError("radial mode evaluated at r = " + std::to_string(r) + " outside [0, " +
                              std::to_string(r_max()) + "]");
    if (constant_) {
        value = 1.0;
        slope = 0.0;
        return;
    }
    if (r <= r0_) {
        const auto& s = series_;
        const double rk = std::pow(r, k_);
        const double poly = s[0] + s[1] * r + s[2] * r * r;
        value = series_factor_ * rk * poly;
        slope = series_factor_ * (r > 0.0 ? k_ * rk / r * poly + rk * (s[1] + 2.0 * s[2] * r)
                                          : (k_ == 1.0 ? s[0] : (k_ < 1.0 ? std::numeric_limits<double>::infinity() : 0.0)));
        return;
    }
    r = std::min(r, nodes_r_.back());
    auto it = std::upper_bound(nodes_r_.begin(), nodes_r_.end(), r);
    std::size_t i = static_cast<std::size_t>(it - nodes_r_.begin());
    i = std::clamp<std::size_t>(i, 1, nodes_r_.size() - 1) - 1;
    const double h = nodes_r_[i + 1] - nodes_r_[i];
    const double t = (r - nodes_r_[i]) / h;
    const double t2 = t * t, t3 = t2 * t, t4 = t3 * t, t5 = t4 * t;
    const double y0 = nodes_y_[i], y1 = nodes_y_[i + 1];
    const double d0 = h * nodes_yp_[i], d1 = h * nodes_yp_[i + 1];
    const double s0 = h * h * nodes_ypp_[i], s1 = h * h * nodes_ypp_[i + 1];
    value = y0 * (1.0 - 10.0 * t3 + 15.0 * t4 - 6.0 * t5) + d0 * (t - 6.0 * t3 + 8.0 * t4 - 3.0 * t5) +
            s0 * (0.5 * t2 - 1.5 * t3 + 1.5 * t4 - 0.5 * t5) + y1 * (10.0 * t3 - 15.0 * t4 + 6.0 * t5) +
            d1 * (-4.0 * t3 + 7.0 * t4 - 3.0 * t5) + s1 * (0.5 * t3 - t4 + 0.5 * t5);
    slope = (y0 * (-30.0 * t2 + 60.0 * t3 - 30.0 * t4) + d0 * (1.0 - 18.0 * t2 + 32.0 * t3 - 15.0 * t4) +
             s0 * (t - 4.5 * t2 + 6.0 * t3 - 2.5 * t4) + y1 * (30.0 * t2 - 60.0 * t3 + 30.0 * t4) +
             d1 * (-12.0 * t2 + 28.0 * t3 - 15.0 * t4) + s1 * (1.5 * t2 - 4.0 * t3 + 2.5 * t4)) /
            h;
}

double RadialMode::operator()(double r) const {
    double v, s;
    hermite(r, v, s);
    return v;
}

double RadialMode::derivative(double r) const {
    double v, s;
    hermite(r, v, s);
    return s;
}

double RadialMode::raw(double r) const { return (*this)(r) * scale_; }

namespace {

struct State {
    double y, yp;
};

// Dormand-Prince 5(4) tableau.
constexpr double a21 = 1.0 / 5.0;
constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0, a53 = 64448.0 / 6561.0, a54 = -212.0 / 729.0;
constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0, a63 = 46732.0 / 5247.0, a64 = 49.0 / 176.0,
                 a65 = -5103.0 / 18656.0;
constexpr double b1 = 35.0 / 384.0, b3 = 500.0 / 1113.0, b4 = 125.0 / 192.0, b5 = -2187.0 / 6784.0, b6 = 11.0 / 84.0;
constexpr double e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0, e4 = 71.0 / 1920.0, e5 = -17253.0 / 339200.0,
                 e6 = 22.0 / 525.0, e7 = -1.0 / 40.0;
constexpr double c2 = 1.0 / 5.0, c3 = 3.0 / 10.0, c4 = 4.0 / 5.0, c5 = 8.0 / 9.0;

double anchor_constant(const RadialMode& mode, const WarpingProfile& p, const MilnorTail& tail, double R1) {
    const double lambda = mode.lambda();
    const double eta = std::exp(-lambda * tail(R1));
    double A = mode(R1) / eta;
    if (lambda > 0.0) {
        const double eta_slope = lambda * eta * p.reciprocal(R1);
        A = std::max(A, mode.derivative(R1) / eta_slope);
    }
    return 1.01 * A;
}

double default_anchor(const WarpingProfile& p, double r_max) {
    const auto r0 = monotone_threshold(p, r_max);
    if (!r0) return std::numeric_limits<double>::quiet_NaN();
    return std::max(2.0, *r0 + 1.0);
}

}  // namespace

RadialMode solve_radial_mode(const WarpingProfile& p, int n, double lambda, const RadialControls& ctrl) {
    if (n < 2) throw InputError("solve_radial_mode: n must be at least 2");
    if (!(lambda >= 0.0)) throw InputError("solve_radial_mode: lambda must be nonnegative");
    const double R_max = ctrl.R_max > 0.0 ? ctrl.R_max : p.default_mode_radius();

    if (lambda == 0.0) {
        RadialMode mode = constant_mode(R_max);
        mode.n_ = n;
        mode.R_1_ = ctrl.R_1.value_or(2.0);
        return mode;
    }

    double r0 = ctrl.r0;
    if (lambda > 10.0) r0 = std::max(r0, 1e-3 / std::sqrt(1.0 + lambda));
    if (!(r0 > 0.0) || !(R_max > 8.0 * r0)) throw InputError("solve_radial_mode: need 0 < r0 << R_max");

    RadialMode mode;
    mode.lambda_ = lambda;
    mode.n_ = n;
    mode.r0_ = r0;
    const FrobeniusSeed seed = frobenius_seed(p, n, lambda, r0, ctrl.seed_order);
    mode.k_ = seed.k;
    mode.series_ = seed.series;
    mode.series_factor_ = ctrl.seed_scale;
    mode.scale_ = 1.0 / ctrl.seed_scale;
    mode.seed_fallback_ = seed.fallback;
    if (seed.fallback) mode.notes_.push_back("no Taylor data at the cone point: order-0 Frobenius seed");

    const double l2 = lambda * lambda;
    auto rhs = [&](double r, State s) {
        const double inv = p.reciprocal(r);
        return State{s.yp, -(n - 1.0) * p.log_derivative(r) * s.yp + l2 * inv * inv * s.y};
    };

    State s{ctrl.seed_scale * seed.value, ctrl.seed_scale * seed.slope};
    double r = r0;
    State f = rhs(r, s);
    auto push = [&](double rr, State st, State df) {
        mode.nodes_r_.push_back(rr);
        mode.nodes_y_.push_back(st.y);
        mode.nodes_yp_.push_back(st.yp);
        mode.nodes_ypp_.push_back(df.yp);
    };
    push(r, s, f);

    double h = 0.01 * r0;
    double y_ref = 0.0;
    bool grew_out = false;
    std::size_t steps = 0;
    auto integrate_to = [&](double R_target) {
    while (r < R_target) {
        if (++steps > ctrl.max_steps) throw EvaluationError("solve_radial_mode: step budget exhausted");
        h = std::min({h, R_target - r, r});
        const State k1 = f;
        const State k2 = rhs(r + c2 * h, {s.y + h * a21 * k1.y, s.yp + h * a21 * k1.yp});
        const State k3 = rhs(r + c3 * h, {s.y + h * (a31 * k1.y + a32 * k2.y), s.yp + h * (a31 * k1.yp + a32 * k2.yp)});
        const State k4 = rhs(r + c4 * h, {s.y + h * (a41 * k1.y + a42 * k2.y + a43 * k3.y),
                                          s.yp + h * (a41 * k1.yp + a42 * k2.yp + a43 * k3.yp)});
        const State k5 = rhs(r + c5 * h, {s.y + h * (a51 * k1.y + a52 * k2.y + a53 * k3.y + a54 * k4.y),
                                          s.yp + h * (a51 * k1.yp + a52 * k2.yp + a53 * k3.yp + a54 * k4.yp)});
        const State k6 = rhs(r + h, {s.y + h * (a61 * k1.y + a62 * k2.y + a63 * k3.y + a64 * k4.y + a65 * k5.y),
                                     s.yp + h * (a61 * k1.yp + a62 * k2.yp + a63 * k3.yp + a64 * k4.yp + a65 * k5.yp)});
        const State next{s.y + h * (b1 * k1.y + b3 * k3.y + b4 * k4.y + b5 * k5.y + b6 * k6.y),
                         s.yp + h * (b1 * k1.yp + b3 * k3.yp + b4 * k4.yp + b5 * k5.yp + b6 * k6.yp)};
        const double r_next = r + h;
        const State k7 = rhs(r_next, next);
        const double err_y = h * (e1 * k1.y + e3 * k3.y + e4 * k4.y + e5 * k5.y + e6 * k6.y + e7 * k7.y);
        const double err_yp = h * (e1 * k1.yp + e3 * k3.yp + e4 * k4.yp + e5 * k5.yp + e6 * k6.yp + e7 * k7.yp);
        const double ymag = std::max(std::abs(s.y), std::abs(next.y));
        const double sc_y = ctrl.rtol * ymag + 1e-300;
        const double sc_yp = ctrl.rtol * (std::max(std::abs(s.yp), std::abs(next.yp)) + ymag / r_next) + 1e-300;
        const double err = std::max(std::abs(err_y) / sc_y, std::abs(err_yp) / sc_yp);
        if (!std::isfinite(err)) throw EvaluationError("solve_radial_mode: non-finite state at r = " + std::to_string(r));
        if (err <= 1.0) {
            r = r_next;
            s = next;
            f = k7;
            push(r, s, f);
            if (y_ref == 0.0 && r >= 1.0) y_ref = s.y;
            if (std::abs(s.y) > 1e150) {
                // Linear equation: rescale everything stored so far.
                constexpr double factor = 1e-150;
                for (std::size_t i = 0; i < mode.nodes_y_.size(); ++i) {
                    mode.nodes_y_[i] *= factor;
                    mode.nodes_yp_[i] *= factor;
                    mode.nodes_ypp_[i] *= factor;
                }
                mode.series_factor_ *= factor;
                mode.scale_ /= factor;
                s.y *= factor;
                s.yp *= factor;
                f.y *= factor;
                f.yp *= factor;
                y_ref *= factor;
                mode.notes_.push_back("rescaled by 1e-150 at r = " + std::to_string(r));
            }
            if (y_ref > 0.0 && s.y / y_ref > ctrl.growth_cap) {
                grew_out = true;
                mode.notes_.push_back("growth cap exceeded at r = " + std::to_string(r));
                break;
            }
        }
        const double fac = err == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0);
        h *= fac;
        if (h < 1e-14 * r) throw EvaluationError("solve_radial_mode: step size underflow at r = " + std::to_string(r));
    }
    };

    // Plateau detection over the last doubling window. When increments are
    // still contracting at R_max the integration is extended by up to two
    // doublings before giving up.
    enum class Plateau { Found, Contracting, None };
    double limit = 0.0;
    auto detect_plateau = [&]() {
        const double R = mode.nodes_r_.back();
        const double y8 = mode(R / 8.0), y4 = mode(R / 4.0), y2 = mode(R / 2.0), y1 = mode(R);
        const double d1 = y4 - y8, d2 = y2 - y4, d3 = y1 - y2;
        if (std::abs(d3) <= ctrl.plateau_tol * std::abs(y1)) {
            limit = y1;
            return Plateau::Found;
        }
        // Ratio to the comparison function; constant for exact solutions of the form L * eta_m.
        try {
            const MilnorTail tail(p, R / 2.0, R, ctrl.quad);
            const double q2 = y2 / std::exp(-lambda * tail(R / 2.0));
            const double q1 = y1 / std::exp(-lambda * tail(R));
            if (std::abs(q1 - q2) <= ctrl.plateau_tol * std::abs(q1)) {
                limit = q1;
                mode.notes_.push_back("limit from stabilised phi_m/eta_m ratio");
                return Plateau::Found;
            }
        } catch (const HypothesisError&) {
        }
        const bool contracting = d1 > 0.0 && d2 > 0.0 && d3 > 0.0 && d3 < d2 && d2 < d1;
        if (contracting) {
            // Geometric contraction of increments: Aitken extrapolation from two triples.
            const double la = y2 - d2 * d2 / (d2 - d1);
            const double lb = y1 - d3 * d3 / (d3 - d2);
            if (std::abs(la - lb) <= ctrl.plateau_tol * std::abs(lb)) {
                limit = lb;
                mode.notes_.push_back("limit from extrapolated plateau");
                return Plateau::Found;
            }
            return Plateau::Contracting;
        }
        return Plateau::None;
    };

    integrate_to(R_max);
    mode.normalizable_ = false;
    if (!grew_out) {
        Plateau state = detect_plateau();
        for (int extension = 0; extension < 2 && state == Plateau::Contracting && !grew_out; ++extension) {
            integrate_to(2.0 * mode.nodes_r_.back());
            mode.notes_.push_back("integration extended to r = " + std::to_string(mode.nodes_r_.back()) +
                                  " to resolve the plateau");
            if (!grew_out) state = detect_plateau();
        }
        mode.normalizable_ = !grew_out && state == Plateau::Found;
        if (!mode.normalizable_ && !grew_out)
            mode.notes_.push_back("no plateau by r = " + std::to_string(mode.nodes_r_.back()));
    }

    if (mode.normalizable_) {
        // Cross-check: phi_m / eta_m must stabilise over the last doubling.
        try {
            const double R = mode.nodes_r_.back();
            const MilnorTail tail(p, R / 4.0, R, ctrl.quad);
            const double rho2 = mode(R / 2.0) / std::exp(-lambda * tail(R / 2.0));
            const double rho1 = mode(R) / std::exp(-lambda * tail(R));
            const double drift = std::abs(rho1 - rho2) / std::abs(rho1);
            if (drift > ctrl.eta_drift_tol) {
                mode.normalizable_ = false;
                mode.notes_.push_back("phi_m/eta_m drifts by " + std::to_string(drift) + ": plateau rejected");
            }
        } catch (const HypothesisError&) {
            mode.notes_.push_back("eta cross-check unavailable: Milnor integral not convergent");
        }
    }

    if (mode.normalizable_) {
        for (std::size_t i = 0; i < mode.nodes_y_.size(); ++i) {
            mode.nodes_y_[i] /= limit;
            mode.nodes_yp_[i] /= limit;
            mode.nodes_ypp_[i] /= limit;
        }
        mode.series_factor_ /= limit;
        mode.scale_ *= limit;
        mode.limit_raw_ = mode.scale_;
        // Comparison constant at the default anchor.
        try {
            const double R1 = ctrl.R_1.value_or(default_anchor(p, mode.r_max()));
            if (std::isfinite(R1) && R1 < mode.r_max()) {
                const MilnorTail tail(p, R1, mode.r_max(), ctrl.quad);
                mode.R_1_ = R1;
                mode.A_m_ = anchor_constant(mode, p, tail, R1);
            }
        } catch (const HypothesisError&) {
        }
    } else {
        mode.limit_raw_ = std::numeric_limits<double>::quiet_NaN();
    }
    return mode;
}

double comparison_eta(const WarpingProfile& p, double lambda, double r, const QuadratureControls& ctrl) {
    if (!(r > 0.0)) throw InputError("comparison_eta: r must be positive");
    const IntegralVerdict v = milnor_integral(p, r, ctrl);
    if (!v.converges) throw HypothesisError("comparison_eta: Milnor integral " + to_string(v.outcome));
    if (lambda == 0.0) return 1.0;
    return std::exp(-lambda * v.value);
}

double mode_residual(const RadialMode& mode, const WarpingProfile& p, double r) {
    const double h = 0.01 * r;
    const double ym2 = mode(r - 2.0 * h), ym1 = mode(r - h), y0 = mode(r), yp1 = mode(r + h), yp2 = mode(r + 2.0 * h);
    const double d1 = (ym2 - 8.0 * ym1 + 8.0 * yp1 - yp2) / (12.0 * h);
    const double d2 = (-ym2 + 16.0 * ym1 - 30.0 * y0 + 16.0 * yp1 - yp2) / (12.0 * h * h);
    const double inv = p.reciprocal(r);
    const double lam = mode.lambda();
    const double res = d2 + (mode.dimension() - 1.0) * p.log_derivative(r) * d1 - lam * lam * inv * inv * y0;
    const double phi = p(r);
    const double weight = std::min(1.0, phi * phi);
    return weight * std::abs(res);
}

ModeReport verify_mode(const RadialMode& mode, const WarpingProfile& p, int n, const VerifyControls& ctrl) {
    if (!mode.normalizable()) throw HypothesisError("verify_mode: mode is not normalizable");
    if (n != mode.dimension()) throw InputError("verify_mode: dimension mismatch");
    ModeReport report;
    const double R_max = mode.r_max();
    const double lambda = mode.lambda();

    double R1 = ctrl.R_1.value_or(std::numeric_limits<double>::quiet_NaN());
    if (!ctrl.R_1) {
        const auto r0 = monotone_threshold(p, R_max);
        if (!r0) throw HypothesisError("verify_mode: no monotone threshold below r_max");
        R1 = std::max(2.0, *r0 + 1.0);
    }
    if (!(R1 < R_max)) throw HypothesisError("verify_mode: anchor R_1 beyond the mode domain");
    report.R_1 = R1;

    // Check grid: stored nodes plus interval midpoints, or a uniform grid for the constant mode.
    std::vector<double> grid;
    const auto& nodes = mode.nodes();
    if (lambda == 0.0) {
        for (int i = 0; i <= 1000; ++i) grid.push_back(R_max * i / 1000.0);
    } else {
        grid.push_back(0.0);
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            if (i > 0) grid.push_back(0.5 * (nodes[i - 1] + nodes[i]));
            grid.push_back(nodes[i]);
        }
    }

    double monotone_violation = 0.0, range_violation = 0.0;
    double prev = mode(grid.front());
    for (double r : grid) {
        const double v = mode(r);
        monotone_violation = std::max(monotone_violation, prev - v);
        range_violation = std::max({range_violation, -v, v - 1.0});
        prev = v;
    }
    report.monotone_ok = monotone_violation <= ctrl.monotone_slack;
    report.range_ok = range_violation <= ctrl.monotone_slack;

    double bound_violation = 0.0;
    std::optional<MilnorTail> tail;
    if (lambda > 0.0) tail.emplace(p, R1, R_max, ctrl.quad);
    auto eta = [&](double r) { return lambda == 0.0 ? 1.0 : std::exp(-lambda * (*tail)(r)); };
    double A = 1.01 * mode(R1);
    if (lambda > 0.0) {
        const double e = eta(R1);
        A = 1.01 * std::max(mode(R1) / e, mode.derivative(R1) / (lambda * e * p.reciprocal(R1)));
    }
    if (!std::isfinite(A) || !(A > 0.0))
        throw HypothesisError("verify_mode: anchor inequalities unsatisfiable at R_1 = " + std::to_string(R1) +
                              "; try a larger R_1");
    report.A_m = A;
    for (double r : grid) {
        if (r < R1) continue;
        bound_violation = std::max(bound_violation, mode(r) - A * eta(r));
    }
    report.bounds_ok = bound_violation <= ctrl.bound_slack;

    // K <= -1 regime: phi >= sinh r on the probe grid.
    bool dominates_sinh = true;
    const double probe_end = std::min(R_max, 50.0);
    for (int i = 1; i <= 500; ++i) {
        const double r = probe_end * i / 500.0;
        if (p(r) < std::sinh(r) * (1.0 - 1e-12)) {
            dominates_sinh = false;
            break;
        }
    }
    double tanh_violation = 0.0;
    if (dominates_sinh) {
        for (double r : grid) {
            if (r < R1) continue;
            tanh_violation = std::max(tanh_violation, mode(r) - A * std::pow(std::tanh(r), lambda));
        }
        report.tanh_bound_ok = tanh_violation <= ctrl.bound_slack;
    }

    double residual = 0.0;
    if (lambda > 0.0) {
        const double lo = 2.0 * mode.r0(), hi = R_max / 2.0;
        constexpr int kProbes = 400;
        for (int i = 0; i <= kProbes; ++i) {
            const double r = lo * std::pow(hi / lo, static_cast<double>(i) / kProbes);
            residual = std::max(residual, mode_residual(mode, p, r));
        }
    }
    report.residual_max = residual;
    report.max_violation = std::max({monotone_violation, range_violation, bound_violation, tanh_violation});
    if (!report.monotone_ok) report.notes.push_back("mode decreases by " + std::to_string(monotone_violation));
    if (!report.range_ok) report.notes.push_back("mode leaves [0, 1] by " + std::to_string(range_violation));
    if (!report.bounds_ok) report.notes.push_back("comparison bound violated by " + std::to_string(bound_violation));
    if (report.tanh_bound_ok && !*report.tanh_bound_ok)
        report.notes.push_back("tanh bound violated by " + std::to_string(tanh_violation));
    return report;
}

}  // namespace warpcone
