#pragma once

#include <array>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "warpcone/jet.hpp"

namespace warpcone {

enum class ProfileKind { Euclidean, HyperbolicSinh, ScaledSinh, PowerTail, Tabulated, CustomExpression };

std::string to_string(ProfileKind kind);
/// Accepts the kebab-case names used in config files ("hyperbolic-sinh", ...).
ProfileKind parse_profile_kind(std::string_view name);

using ParamMap = std::map<std::string, double>;

/// Warping function phi of a cone metric dr^2 + phi(r)^2 g_N.
///
/// Immutable; copies share the underlying evaluator. Evaluation returns the
/// value together with phi' and phi''. Analytic kinds carry exact
/// derivatives, tabulated kinds analytic spline derivatives, custom
/// expressions derivatives propagated through the parse tree.
class WarpingProfile {
public:
    class Impl;

    ProfileKind kind() const;
    const ParamMap& params() const;
    std::string describe() const;

    Jet2 jet(double r) const;
    double operator()(double r) const { return jet(r).v; }
    double deriv1(double r) const { return jet(r).d1; }
    double deriv2(double r) const { return jet(r).d2; }

    /// 1/phi, finite for large r even when phi overflows.
    double reciprocal(double r) const;
    /// phi'/phi, finite for large r even when phi overflows.
    double log_derivative(double r) const;
    /// Radial sectional curvature -phi''/phi.
    double radial_curvature(double r) const;

    /// Coefficients (b1, b2) of phi(r) = r (1 + b1 r + b2 r^2 + ...) at the
    /// cone point, or nullopt when the profile is not smooth enough there.
    std::optional<std::array<double, 2>> cone_taylor() const;

    /// Default radius for mode integration: 40 for exponential-type tails
    /// (sinh kinds, custom expressions with r phi'/phi >= 8 at r = 40), 4096
    /// otherwise; see RadialControls.
    double default_mode_radius() const;

    // Unvalidated constructors. make_* below check the cone axioms.
    static WarpingProfile from_expression(std::string_view text);
    static WarpingProfile from_table(std::vector<double> r, std::vector<double> phi);
    static WarpingProfile from_function(std::function<Jet2(double)> f, std::string name);

    explicit WarpingProfile(std::shared_ptr<const Impl> impl) : impl_(std::move(impl)) {}

private:
    std::shared_ptr<const Impl> impl_;
};

/// Builds an analytic profile. Required parameters:
///   scaled-sinh: a > 0          phi = sinh(a r)/a
///   power-tail:  p > 0, rc > 0  phi = r (1 + (r/rc)^2)^((p-1)/2), ~ r^p at large r
/// Throws InputError for unknown kinds, missing or invalid parameters, and
/// for tabulated/custom kinds (use the dedicated makers).
WarpingProfile make_profile(ProfileKind kind, const ParamMap& params = {});
WarpingProfile make_profile(std::string_view kind, const ParamMap& params = {});
/// Validating makers: throw InputError unless the cone axioms hold.
WarpingProfile make_expression_profile(std::string_view text);
WarpingProfile make_tabulated_profile(std::vector<double> r, std::vector<double> phi);

enum class Outcome { Converges, Diverges, Indeterminate };
std::string to_string(Outcome o);

struct IntegralVerdict {
    Outcome outcome = Outcome::Indeterminate;
    bool converges = false;
    double value = 0.0;                 // partial sums plus fitted tail when convergent
    double tail_exponent = 0.0;         // p for integrand ~ r^-p at the largest scale probed
    double r_max_probed = 0.0;
    double abs_error_estimate = 0.0;
    std::vector<std::pair<double, double>> partials;  // (R, integral up to R)
    std::vector<std::string> notes;
};

/// Controls for the doubling-radius improper integral protocol.
struct QuadratureControls {
    double r_max = 1048576.0;  // 2^20
    double tail_tol = 1e-10;
    double divergence_cap = 1e8;
    double margin = 0.05;
    double rel_tol = 1e-13;
};

struct ValidityReport {
    bool axioms_ok = false;
    std::optional<double> r0_monotone;
    std::optional<bool> curvature_criterion_ok;  // nullopt: indeterminate / not run
    std::vector<std::pair<double, double>> curvature_samples;  // (r, -phi''/phi)
    std::vector<std::string> notes;
};

/// Integral of a nonnegative integrand over [lo, infinity) using doubling
/// pieces, adaptive Gauss-Kronrod on each piece, and a log-log fit of the
/// integrand over the last decade to classify the tail.
IntegralVerdict improper_integral(const std::function<double(double)>& integrand, double lo,
                                  const QuadratureControls& ctrl = {});

/// Checks phi(0) = 0, phi'(0) = 1 and phi > 0 on (0, r_probe].
ValidityReport check_cone_axioms(const WarpingProfile& p, double tol = 1e-10, double r_probe = 10.0);

/// Integral of 1/phi over [r_lo, infinity).
IntegralVerdict milnor_integral(const WarpingProfile& p, double r_lo = 1.0, const QuadratureControls& ctrl = {});

/// Integral over r >= 1 of phi(r)^(n-3) times the inner tail integral of
/// phi^(1-n) over [r, infinity).
IntegralVerdict march_integral(const WarpingProfile& p, int n, const QuadratureControls& ctrl = {});

class CumulativeIntegral;

/// Tail of the Milnor integral, T(r) = integral of 1/phi over [r, infinity),
/// for r >= r_lo. Tabulated once; the part beyond r_hi comes from the
/// improper-integral protocol. Throws HypothesisError when that diverges.
class MilnorTail {
public:
    MilnorTail(const WarpingProfile& p, double r_lo, double r_hi, const QuadratureControls& ctrl = {});

    double operator()(double r) const;
    double r_lo() const { return r_lo_; }

private:
    WarpingProfile profile_;
    double r_lo_, r_hi_;
    double tail_hi_;
    std::shared_ptr<const CumulativeIntegral> cumulative_;
};

/// Smallest sampled R_0 with phi' >= -tol on [R_0, r_max], or nullopt.
std::optional<double> monotone_threshold(const WarpingProfile& p, double r_max, double tol = 1e-10);

/// Tests -phi''/phi <= -(1 + eps)/(r^2 log r) on [r_lo, r_max] together with
/// unbounded growth of phi over the last three doubling scales.
ValidityReport curvature_criterion(const WarpingProfile& p, double eps, double r_lo, double r_max);

}  // namespace warpcone
