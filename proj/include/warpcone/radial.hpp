#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "warpcone/warping.hpp"

namespace warpcone {

/// Nonnegative root k of k(k-1) + (n-1)k - lambda^2 = 0.
double indicial_root(int n, double lambda);

struct FrobeniusSeed {
    double value = 1.0;
    double slope = 0.0;
    double k = 0.0;
    std::array<double, 3> series{1.0, 0.0, 0.0};  // p_0, p_1, p_2 of r^k (p_0 + p_1 r + p_2 r^2)
    int order_used = 0;
    bool fallback = false;  // requested order unavailable, order 0 used
};

/// Regular Frobenius solution r^k (1 + p_1 r + p_2 r^2) of the radial
/// equation evaluated at r0. Orders above 2 are capped at 2. Profiles without
/// Taylor data at the cone point fall back to order 0 and set `fallback`.
FrobeniusSeed frobenius_seed(const WarpingProfile& p, int n, double lambda, double r0, int order = 2);

struct RadialControls {
    double rtol = 1e-10;
    double R_max = 0.0;           // 0: the profile's default mode radius
    double plateau_tol = 1e-9;
    double growth_cap = 1e30;
    double r0 = 1e-4;             // raised for lambda > 10, see solve_radial_mode
    int seed_order = 2;
    double seed_scale = 1.0;
    double eta_drift_tol = 1e-4;  // allowed drift of phi_m / eta_m over the last doubling
    std::size_t max_steps = 2000000;
    std::optional<double> R_1;    // comparison anchor; default max(2, R_0 + 1)
    QuadratureControls quad;
};

/// One solution phi_m of
///   phi_m'' + (n-1)(phi'/phi) phi_m' - (lambda^2/phi^2) phi_m = 0
/// regular at the cone point. Normalised to limit 1 when a plateau is
/// detected; otherwise values are raw (seed normalisation r^k p(r)).
class RadialMode {
public:
    double lambda() const { return lambda_; }
    int dimension() const { return n_; }
    double k_indicial() const { return k_; }
    bool normalizable() const { return normalizable_; }
    double limit_raw() const { return limit_raw_; }
    double A_m() const { return A_m_; }
    double R_1() const { return R_1_; }
    double r0() const { return r0_; }
    double r_max() const { return nodes_r_.empty() ? r0_ : nodes_r_.back(); }
    bool seed_fallback() const { return seed_fallback_; }
    const std::vector<std::string>& notes() const { return notes_; }

    /// Normalised value (raw when not normalizable). Throws EvaluationError
    /// outside [0, r_max].
    double operator()(double r) const;
    double derivative(double r) const;
    /// Seed-normalised value r^k p(r) continued by the ODE.
    double raw(double r) const;

    const std::vector<double>& nodes() const { return nodes_r_; }

private:
    friend RadialMode solve_radial_mode(const WarpingProfile&, int, double, const RadialControls&);
    friend RadialMode constant_mode(double r_max);

    void hermite(double r, double& value, double& slope) const;

    double lambda_ = 0.0;
    int n_ = 2;
    double k_ = 0.0;
    bool normalizable_ = true;
    double limit_raw_ = 1.0;
    double scale_ = 1.0;  // stored value times scale_ gives the raw value
    double A_m_ = 0.0;
    double R_1_ = 0.0;
    double r0_ = 0.0;
    bool seed_fallback_ = false;
    bool constant_ = false;
    std::array<double, 3> series_{1.0, 0.0, 0.0};
    double series_factor_ = 1.0;  // stored = series_factor_ * r^k * (p0 + p1 r + p2 r^2) below r0
    std::vector<double> nodes_r_, nodes_y_, nodes_yp_, nodes_ypp_;
    std::vector<std::string> notes_;
};

/// The lambda = 0 mode, identically 1 on [0, r_max].
RadialMode constant_mode(double r_max);

/// Integrates the radial equation outward from the Frobenius seed with an
/// adaptive Dormand-Prince 5(4) scheme and normalises by plateau detection.
/// Throws EvaluationError on step-size underflow or step budget exhaustion.
RadialMode solve_radial_mode(const WarpingProfile& p, int n, double lambda, const RadialControls& ctrl = {});

/// exp(-lambda * integral of 1/phi over [r, infinity)). Throws
/// HypothesisError when the Milnor integral does not converge.
double comparison_eta(const WarpingProfile& p, double lambda, double r, const QuadratureControls& ctrl = {});

/// Radial equation residual at r for a mode, with derivatives from a
/// five-point fourth-order stencil of width 0.01 r on the interpolant.
/// Weighted by min(1, phi^2) so the regular singular point stays bounded.
double mode_residual(const RadialMode& mode, const WarpingProfile& p, double r);

struct ModeReport {
    bool monotone_ok = false;
    bool range_ok = false;
    bool bounds_ok = false;
    std::optional<bool> tanh_bound_ok;  // only when phi >= sinh r on the probe grid
    double max_violation = 0.0;
    double residual_max = 0.0;
    double A_m = 0.0;
    double R_1 = 0.0;
    std::vector<std::string> notes;
};

struct VerifyControls {
    std::optional<double> R_1;
    double monotone_slack = 1e-9;
    double bound_slack = 1e-9;
    QuadratureControls quad;
};

/// Checks monotonicity, the [0, 1] range, the comparison bound
/// phi_m <= A_m eta_m on [R_1, r_max] with A_m the smallest constant meeting
/// both anchor inequalities at R_1 times 1.01, the tanh^lambda bound when
/// phi >= sinh, and the equation residual on [2 r0, r_max/2].
/// Throws HypothesisError for non-normalizable modes or infeasible anchors.
ModeReport verify_mode(const RadialMode& mode, const WarpingProfile& p, int n, const VerifyControls& ctrl = {});

}  // namespace warpcone
