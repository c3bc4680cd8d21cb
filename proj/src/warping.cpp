#include "warpcone/warping.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "warpcone/error.hpp"
#include "warpcone/expression.hpp"
#include "warpcone/quadrature.hpp"
#include "warpcone/spline.hpp"

namespace warpcone {

class WarpingProfile::Impl {
public:
    Impl(ProfileKind kind, ParamMap params) : kind_(kind), params_(std::move(params)) {}
    virtual ~Impl() = default;

    virtual Jet2 jet(double r) const = 0;
    virtual std::string describe() const = 0;
    virtual std::optional<std::array<double, 2>> cone_taylor() const = 0;
    virtual double reciprocal(double r) const { return 1.0 / jet(r).v; }
    virtual double log_derivative(double r) const {
        const Jet2 j = jet(r);
        return j.d1 / j.v;
    }
    virtual double radial_curvature(double r) const {
        const Jet2 j = jet(r);
        return -j.d2 / j.v;
    }

    ProfileKind kind_;
    ParamMap params_;
};

namespace {

class SinhProfile final : public WarpingProfile::Impl {
public:
    SinhProfile(ProfileKind kind, double a) : Impl(kind, kind == ProfileKind::ScaledSinh ? ParamMap{{"a", a}} : ParamMap{}), a_(a) {}

    Jet2 jet(double r) const override {
        const double s = std::sinh(a_ * r);
        const double c = std::cosh(a_ * r);
        return {s / a_, c, a_ * s};
    }
    double reciprocal(double r) const override { return a_ / std::sinh(a_ * r); }
    double log_derivative(double r) const override { return a_ / std::tanh(a_ * r); }
    double radial_curvature(double) const override { return -a_ * a_; }
    std::optional<std::array<double, 2>> cone_taylor() const override {
        return std::array<double, 2>{0.0, a_ * a_ / 6.0};
    }
    std::string describe() const override {
        if (kind_ == ProfileKind::HyperbolicSinh) return "phi(r) = sinh(r)";
        std::ostringstream os;
        os.precision(17);
        os << "phi(r) = sinh(" << a_ << " r)/" << a_;
        return os.str();
    }

private:
    double a_;
};

class EuclideanProfile final : public WarpingProfile::Impl {
public:
    EuclideanProfile() : Impl(ProfileKind::Euclidean, {}) {}
    Jet2 jet(double r) const override { return {r, 1.0, 0.0}; }
    std::optional<std::array<double, 2>> cone_taylor() const override {
        return std::array<double, 2>{0.0, 0.0};
    }
    std::string describe() const override { return "phi(r) = r"; }
};

class PowerTailProfile final : public WarpingProfile::Impl {
public:
    PowerTailProfile(double p, double rc)
        : Impl(ProfileKind::PowerTail, {{"p", p}, {"rc", rc}}), p_(p), rc_(rc) {}

    Jet2 jet(double r) const override {
        const Jet2 x = Jet2::variable(r);
        const Jet2 s = x * Jet2::constant(1.0 / rc_);
        const Jet2 base = Jet2::constant(1.0) + s * s;
        // Non-integer exponents go through exp/log; base >= 1 so this is safe.
        const double q = 0.5 * (p_ - 1.0);
        const Jet2 g = compose(base, std::pow(base.v, q), q * std::pow(base.v, q - 1.0),
                               q * (q - 1.0) * std::pow(base.v, q - 2.0));
        return x * g;
    }
    std::optional<std::array<double, 2>> cone_taylor() const override {
        return std::array<double, 2>{0.0, 0.5 * (p_ - 1.0) / (rc_ * rc_)};
    }
    std::string describe() const override {
        std::ostringstream os;
        os.precision(17);
        os << "phi(r) = r (1 + (r/" << rc_ << ")^2)^(" << 0.5 * (p_ - 1.0) << ")";
        return os.str();
    }

private:
    double p_, rc_;
};

class TabulatedProfile final : public WarpingProfile::Impl {
public:
    TabulatedProfile(std::vector<double> r, std::vector<double> phi)
        : Impl(ProfileKind::Tabulated, {}), spline_(r, phi) {
        const Jet2 end = spline_.evaluate(spline_.back());
        end_r_ = spline_.back();
        end_phi_ = end.v;
        end_q_ = end_r_ * end.d1 / end.v;
    }

    Jet2 jet(double r) const override {
        if (r <= end_r_) return spline_.evaluate(r);
        // Power-law continuation matching value and slope at the last knot.
        const double v = end_phi_ * std::pow(r / end_r_, end_q_);
        return {v, end_q_ * v / r, end_q_ * (end_q_ - 1.0) * v / (r * r)};
    }
    std::optional<std::array<double, 2>> cone_taylor() const override { return std::nullopt; }
    std::string describe() const override {
        std::ostringstream os;
        os.precision(17);
        os << "tabulated phi on [" << spline_.front() << ", " << end_r_ << "], power tail r^" << end_q_;
        return os.str();
    }

private:
    CubicSpline spline_;
    double end_r_ = 0.0, end_phi_ = 0.0, end_q_ = 1.0;
};

class FunctionProfile final : public WarpingProfile::Impl {
public:
    FunctionProfile(std::function<Jet2(double)> f, std::string name)
        : Impl(ProfileKind::CustomExpression, {}), f_(std::move(f)), name_(std::move(name)) {}

    Jet2 jet(double r) const override { return f_(r); }
    std::optional<std::array<double, 2>> cone_taylor() const override {
        const double h = 1e-3;
        const double d2_0 = f_(0.0).d2;
        const double d3_0 = (-3.0 * d2_0 + 4.0 * f_(h).d2 - f_(2.0 * h).d2) / (2.0 * h);
        if (!std::isfinite(d2_0) || !std::isfinite(d3_0)) return std::nullopt;
        return std::array<double, 2>{0.5 * d2_0, d3_0 / 6.0};
    }
    std::string describe() const override { return "phi(r) = " + name_; }

private:
    std::function<Jet2(double)> f_;
    std::string name_;
};

}  // namespace

std::string to_string(ProfileKind kind) {
    switch (kind) {
        case ProfileKind::Euclidean: return "euclidean";
        case ProfileKind::HyperbolicSinh: return "hyperbolic-sinh";
        case ProfileKind::ScaledSinh: return "scaled-sinh";
        case ProfileKind::PowerTail: return "power-tail";
        case ProfileKind::Tabulated: return "tabulated";
        case ProfileKind::CustomExpression: return "custom-expression";
    }
    return "unknown";
}

ProfileKind parse_profile_kind(std::string_view name) {
    for (ProfileKind k : {ProfileKind::Euclidean, ProfileKind::HyperbolicSinh, ProfileKind::ScaledSinh,
                          ProfileKind::PowerTail, ProfileKind::Tabulated, ProfileKind::CustomExpression})
        if (to_string(k) == name) return k;
    throw InputError("unknown profile kind '" + std::string(name) + "'");
}

ProfileKind WarpingProfile::kind() const { return impl_->kind_; }
const ParamMap& WarpingProfile::params() const { return impl_->params_; }
std::string WarpingProfile::describe() const { return impl_->describe(); }
Jet2 WarpingProfile::jet(double r) const { return impl_->jet(r); }
double WarpingProfile::reciprocal(double r) const { return impl_->reciprocal(r); }
double WarpingProfile::log_derivative(double r) const { return impl_->log_derivative(r); }
double WarpingProfile::radial_curvature(double r) const { return impl_->radial_curvature(r); }
std::optional<std::array<double, 2>> WarpingProfile::cone_taylor() const { return impl_->cone_taylor(); }

double WarpingProfile::default_mode_radius() const {
    switch (kind()) {
        case ProfileKind::HyperbolicSinh:
        case ProfileKind::ScaledSinh: return 40.0;
        case ProfileKind::CustomExpression: {
            // Exponential-type growth (r phi'/phi large) plateaus early; power tails need room.
            const double growth = 40.0 * log_derivative(40.0);
            return std::isfinite(growth) && growth >= 8.0 ? 40.0 : 4096.0;
        }
        default: return 4096.0;
    }
}

WarpingProfile WarpingProfile::from_expression(std::string_view text) {
    Expression e = Expression::parse(text);
    return from_function([e](double r) { return e.evaluate(Jet2::variable(r)); }, e.text());
}

WarpingProfile WarpingProfile::from_table(std::vector<double> r, std::vector<double> phi) {
    return WarpingProfile(std::make_shared<TabulatedProfile>(std::move(r), std::move(phi)));
}

WarpingProfile WarpingProfile::from_function(std::function<Jet2(double)> f, std::string name) {
    return WarpingProfile(std::make_shared<FunctionProfile>(std::move(f), std::move(name)));
}

namespace {

double require(const ParamMap& params, const std::string& key, ProfileKind kind) {
    const auto it = params.find(key);
    if (it == params.end())
        throw InputError("profile kind " + to_string(kind) + " requires parameter '" + key + "'");
    return it->second;
}

void validate_axioms(const WarpingProfile& p) {
    const ValidityReport report = check_cone_axioms(p, 1e-6);
    if (!report.axioms_ok) {
        std::string msg = "profile violates cone axioms:";
        for (const auto& n : report.notes) msg += " " + n + ";";
        throw InputError(msg);
    }
}

}  // namespace

WarpingProfile make_profile(ProfileKind kind, const ParamMap& params) {
    switch (kind) {
        case ProfileKind::Euclidean: return WarpingProfile(std::make_shared<EuclideanProfile>());
        case ProfileKind::HyperbolicSinh:
            return WarpingProfile(std::make_shared<SinhProfile>(ProfileKind::HyperbolicSinh, 1.0));
        case ProfileKind::ScaledSinh: {
            const double a = require(params, "a", kind);
            if (!(a > 0.0) || !std::isfinite(a)) throw InputError("scaled-sinh requires a > 0");
            return WarpingProfile(std::make_shared<SinhProfile>(ProfileKind::ScaledSinh, a));
        }
        case ProfileKind::PowerTail: {
            const double p = require(params, "p", kind);
            const double rc = require(params, "rc", kind);
            if (!(p > 0.0) || !(rc > 0.0) || !std::isfinite(p) || !std::isfinite(rc))
                throw InputError("power-tail requires p > 0 and rc > 0");
            return WarpingProfile(std::make_shared<PowerTailProfile>(p, rc));
        }
        case ProfileKind::Tabulated:
        case ProfileKind::CustomExpression:
            throw InputError("profile kind " + to_string(kind) + " needs a table or expression");
    }
    throw InputError("unknown profile kind");
}

WarpingProfile make_profile(std::string_view kind, const ParamMap& params) {
    return make_profile(parse_profile_kind(kind), params);
}

WarpingProfile make_expression_profile(std::string_view text) {
    WarpingProfile p = WarpingProfile::from_expression(text);
    validate_axioms(p);
    return p;
}

WarpingProfile make_tabulated_profile(std::vector<double> r, std::vector<double> phi) {
    if (r.empty() || r.front() != 0.0) throw InputError("tabulated profile must start at r = 0");
    WarpingProfile p = WarpingProfile::from_table(std::move(r), std::move(phi));
    validate_axioms(p);
    return p;
}

std::string to_string(Outcome o) {
    switch (o) {
        case Outcome::Converges: return "converges";
        case Outcome::Diverges: return "diverges";
        case Outcome::Indeterminate: return "indeterminate";
    }
    return "unknown";
}

ValidityReport check_cone_axioms(const WarpingProfile& p, double tol, double r_probe) {
    if (!(tol > 0.0)) throw InputError("check_cone_axioms: tol must be positive");
    ValidityReport report;
    const double phi0 = p(0.0);
    double slope0 = 0.0;
    if (p.kind() == ProfileKind::Tabulated) {
        // No symmetric stencil exists at the cone point.
        const double h = 1e-6;
        slope0 = (p(h) - phi0) / h;
    } else {
        slope0 = p.deriv1(0.0);
    }
    if (!std::isfinite(phi0) || !std::isfinite(slope0))
        throw EvaluationError("check_cone_axioms: profile evaluation failed at r = 0");

    bool ok = true;
    if (std::abs(phi0) > tol) {
        ok = false;
        report.notes.push_back("phi(0) = " + std::to_string(phi0) + " != 0");
    }
    if (std::abs(slope0 - 1.0) > tol) {
        ok = false;
        report.notes.push_back("phi'(0) = " + std::to_string(slope0) + " != 1");
    }
    constexpr int kProbe = 2000;
    for (int i = 1; i <= kProbe; ++i) {
        const double r = r_probe * static_cast<double>(i) / kProbe;
        const double v = p(r);
        if (!std::isfinite(v)) throw EvaluationError("check_cone_axioms: non-finite phi at r = " + std::to_string(r));
        if (!(v > 0.0)) {
            ok = false;
            report.notes.push_back("phi(" + std::to_string(r) + ") <= 0");
            break;
        }
    }
    report.axioms_ok = ok;
    return report;
}

namespace {

// Least-squares slope of log f against log s on the last decade below R.
double fit_tail_exponent(const std::function<double(double)>& f, double lo, double R) {
    const double start = std::max(lo, R / 10.0);
    if (!(R > start)) return std::numeric_limits<double>::quiet_NaN();
    constexpr int kSamples = 16;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int count = 0;
    int underflow = 0;
    for (int i = 0; i < kSamples; ++i) {
        const double s = start * std::pow(R / start, static_cast<double>(i) / (kSamples - 1));
        const double v = f(s);
        if (v > 0.0 && std::isfinite(v)) {
            const double x = std::log(s), y = std::log(v);
            sx += x;
            sy += y;
            sxx += x * x;
            sxy += x * y;
            ++count;
        } else if (v == 0.0) {
            ++underflow;
        }
    }
    if (count < 2) return underflow > 0 ? std::numeric_limits<double>::infinity()
                                        : std::numeric_limits<double>::quiet_NaN();
    const double slope = (count * sxy - sx * sy) / (count * sxx - sx * sx);
    return -slope;
}

}  // namespace

IntegralVerdict improper_integral(const std::function<double(double)>& integrand, double lo,
                                  const QuadratureControls& ctrl) {
    if (!(lo > 0.0)) throw InputError("improper_integral: lower limit must be positive");
    IntegralVerdict v;
    double partial = 0.0;
    double quad_error = 0.0;
    double a = lo;
    std::vector<double> contributions;
    double previous_estimate = std::numeric_limits<double>::infinity();
    while (a < ctrl.r_max) {
        const double b = std::min(2.0 * a, ctrl.r_max);
        const QuadResult q = integrate_adaptive(integrand, a, b, ctrl.rel_tol, 1e-300);
        if (!q.converged) {
            v.abs_error_estimate = std::numeric_limits<double>::infinity();
            v.notes.push_back("quadrature did not converge on [" + std::to_string(a) + ", " + std::to_string(b) + "]");
            v.value = partial + q.value;
            v.r_max_probed = b;
            return v;
        }
        if (q.value < 0.0) throw EvaluationError("improper_integral: negative integrand");
        partial += q.value;
        quad_error += q.abs_error;
        contributions.push_back(q.value);
        v.partials.emplace_back(b, partial);
        v.r_max_probed = b;
        a = b;

        const double p = fit_tail_exponent(integrand, lo, b);
        v.tail_exponent = p;
        const bool late = b >= ctrl.r_max / 16.0;

        if (partial > ctrl.divergence_cap) {
            v.outcome = Outcome::Diverges;
            v.notes.push_back("partial integral exceeded divergence cap");
            break;
        }
        // Tail-corrected estimate: partial plus the fitted power tail beyond b.
        const double tail = std::isfinite(p) && p > 1.0 ? integrand(b) * b / (p - 1.0) : 0.0;
        const double estimate = partial + tail;
        const double change = std::abs(estimate - previous_estimate);
        previous_estimate = estimate;
        const bool settled = q.value < ctrl.tail_tol || change < ctrl.tail_tol * std::max(1.0, std::abs(estimate));
        if (contributions.size() >= 3 && settled && p > 1.0 + ctrl.margin) {
            v.outcome = Outcome::Converges;
            partial = estimate;
            quad_error += std::min(change, std::abs(tail));
            break;
        }
        if (late) {
            if (p <= 1.0 - ctrl.margin) {
                v.outcome = Outcome::Diverges;
                v.notes.push_back("tail exponent below 1");
                break;
            }
            const std::size_t n = contributions.size();
            // Contributions over doubling pieces scale like 2^(1-p): no decay means p <= 1.
            if (n >= 3 && p <= 1.0 + ctrl.margin && contributions[n - 1] >= contributions[n - 2] * (1.0 - 1e-6) &&
                contributions[n - 2] >= contributions[n - 3] * (1.0 - 1e-6)) {
                v.outcome = Outcome::Diverges;
                v.notes.push_back("doubling contributions do not decay");
                break;
            }
        }
    }
    v.value = partial;
    v.abs_error_estimate = quad_error;
    v.converges = v.outcome == Outcome::Converges;
    if (v.outcome == Outcome::Indeterminate)
        v.notes.push_back("indeterminate: neither convergence nor divergence established by r_max");
    return v;
}

IntegralVerdict milnor_integral(const WarpingProfile& p, double r_lo, const QuadratureControls& ctrl) {
    if (!(r_lo > 0.0)) throw InputError("milnor_integral: r_lo must be positive");
    auto integrand = [&p](double s) {
        const double inv = p.reciprocal(s);
        if (!(inv >= 0.0) || !std::isfinite(inv))
            throw EvaluationError("milnor_integral: non-positive phi at r = " + std::to_string(s));
        return inv;
    };
    return improper_integral(integrand, r_lo, ctrl);
}


IntegralVerdict march_integral(const WarpingProfile& p, int n, const QuadratureControls& ctrl) {
    if (n < 2) throw InputError("march_integral: n must be at least 2");
    auto inner_integrand = [&p, n](double s) { return std::pow(p.reciprocal(s), n - 1); };
    IntegralVerdict inner = improper_integral(inner_integrand, 1.0, ctrl);
    if (inner.outcome != Outcome::Converges) {
        IntegralVerdict v;
        v.outcome = inner.outcome;
        v.value = inner.outcome == Outcome::Diverges ? std::numeric_limits<double>::infinity() : inner.value;
        v.tail_exponent = inner.tail_exponent;
        v.r_max_probed = inner.r_max_probed;
        v.abs_error_estimate = std::numeric_limits<double>::infinity();
        v.notes.push_back("inner integral " + to_string(inner.outcome));
        return v;
    }
    // Inner tail I(r) = total - cumulative(1 -> r), tabulated once; beyond the
    // tabulated range the fitted power tail of the inner integrand is used.
    const double table_hi = inner.r_max_probed;
    CumulativeIntegral cumulative(inner_integrand, 1.0, table_hi, 32);
    const double p_in = inner.tail_exponent;
    auto power_tail = [&](double r) {
        if (!std::isfinite(p_in)) return 0.0;
        return inner_integrand(r) * r / (p_in - 1.0);
    };
    const double beyond_table = power_tail(table_hi);
    auto inner_tail = [&](double r) {
        if (r >= table_hi) return power_tail(r);
        return cumulative.upper(r) + beyond_table;
    };
    auto outer = [&](double r) {
        const double tail = inner_tail(r);
        if (tail == 0.0) return 0.0;
        // phi^(n-3) may overflow where the tail has already underflowed.
        return std::pow(p.reciprocal(r), 3 - n) * tail;
    };
    IntegralVerdict v = improper_integral(outer, 1.0, ctrl);
    v.abs_error_estimate += inner.abs_error_estimate * (1.0 + v.value);
    return v;
}

MilnorTail::MilnorTail(const WarpingProfile& p, double r_lo, double r_hi, const QuadratureControls& ctrl)
    : profile_(p), r_lo_(r_lo), r_hi_(r_hi) {
    if (!(r_lo > 0.0) || !(r_hi > r_lo)) throw InputError("MilnorTail: need 0 < r_lo < r_hi");
    const IntegralVerdict v = milnor_integral(p, r_hi, ctrl);
    if (!v.converges)
        throw HypothesisError("Milnor integral " + to_string(v.outcome) + ": comparison function undefined");
    tail_hi_ = v.value;
    WarpingProfile copy = p;
    cumulative_ = std::make_shared<CumulativeIntegral>([copy](double s) { return copy.reciprocal(s); }, r_lo, r_hi, 32);
}

double MilnorTail::operator()(double r) const {
    if (r < r_lo_) return tail_hi_ + cumulative_->total() + integrate_adaptive([this](double s) { return profile_.reciprocal(s); }, r, r_lo_).value;
    if (r >= r_hi_) {
        if (r == r_hi_) return tail_hi_;
        return milnor_integral(profile_, r).value;
    }
    return tail_hi_ + cumulative_->upper(r);
}

std::optional<double> monotone_threshold(const WarpingProfile& p, double r_max, double tol) {
    if (!(r_max > 0.0)) throw InputError("monotone_threshold: r_max must be positive");
    std::vector<double> grid;
    const double uniform_end = std::min(r_max, 64.0);
    constexpr int kUniform = 4096;
    for (int i = 0; i <= kUniform; ++i) grid.push_back(uniform_end * i / kUniform);
    if (r_max > uniform_end) {
        const int extra = static_cast<int>(std::ceil(std::log2(r_max / uniform_end) * 64));
        for (int i = 1; i <= extra; ++i) grid.push_back(uniform_end * std::pow(r_max / uniform_end, static_cast<double>(i) / extra));
    }
    std::optional<std::size_t> last_bad;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double d = p.deriv1(grid[i]);
        if (!std::isfinite(d)) throw EvaluationError("monotone_threshold: non-finite phi'");
        if (d < -tol) last_bad = i;
    }
    if (!last_bad) return 0.0;
    if (*last_bad + 1 >= grid.size()) return std::nullopt;
    // Bisect the sign change of phi' + tol between the last bad and the next good sample.
    double lo = grid[*last_bad], hi = grid[*last_bad + 1];
    for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (p.deriv1(mid) < -tol) lo = mid;
        else hi = mid;
    }
    return hi;
}

ValidityReport curvature_criterion(const WarpingProfile& p, double eps, double r_lo, double r_max) {
    if (!(r_lo > 1.0)) throw InputError("curvature_criterion: r_lo must exceed 1");
    if (!(eps > 0.0)) throw InputError("curvature_criterion: eps must be positive");
    if (!(r_max > r_lo)) throw InputError("curvature_criterion: r_max must exceed r_lo");
    ValidityReport report;
    report.axioms_ok = check_cone_axioms(p, 1e-6).axioms_ok;
    constexpr int kSamples = 512;
    bool bound_ok = true;
    for (int i = 0; i < kSamples; ++i) {
        const double r = r_lo * std::pow(r_max / r_lo, static_cast<double>(i) / (kSamples - 1));
        const double k = p.radial_curvature(r);
        if (!std::isfinite(k)) throw EvaluationError("curvature_criterion: non-finite curvature at r = " + std::to_string(r));
        report.curvature_samples.emplace_back(r, k);
        const double bound = -(1.0 + eps) / (r * r * std::log(r));
        if (k > bound + 1e-14 * std::abs(bound)) {
            if (bound_ok)
                report.notes.push_back("curvature bound fails at r = " + std::to_string(r));
            bound_ok = false;
        }
    }
    // Unboundedness probe: phi grows across the last three doubling scales.
    const double a = p(r_max / 4.0), b = p(r_max / 2.0), c = p(r_max);
    auto grows = [](double lo, double hi) { return !std::isfinite(hi) || hi > lo * (1.0 + 1e-6); };
    const bool unbounded = grows(a, b) && grows(b, c);
    if (!unbounded) report.notes.push_back("phi does not grow over the last doubling scales");
    report.curvature_criterion_ok = bound_ok && unbounded;
    return report;
}

}  // namespace warpcone
