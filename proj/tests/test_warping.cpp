#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "warpcone/error.hpp"
#include "warpcone/quadrature.hpp"
#include "warpcone/warping.hpp"

using namespace warpcone;
using doctest::Approx;

namespace {

WarpingProfile sinh_profile() { return make_profile(ProfileKind::HyperbolicSinh); }
WarpingProfile power_tail(double p) { return make_profile(ProfileKind::PowerTail, {{"p", p}, {"rc", 1.0}}); }

}  // namespace

TEST_CASE("profile kinds parse from their config names") {
    CHECK(parse_profile_kind("euclidean") == ProfileKind::Euclidean);
    CHECK(parse_profile_kind("hyperbolic-sinh") == ProfileKind::HyperbolicSinh);
    CHECK(parse_profile_kind("scaled-sinh") == ProfileKind::ScaledSinh);
    CHECK(parse_profile_kind("power-tail") == ProfileKind::PowerTail);
    CHECK(parse_profile_kind("tabulated") == ProfileKind::Tabulated);
    CHECK(parse_profile_kind("custom-expression") == ProfileKind::CustomExpression);
    CHECK_THROWS_AS(parse_profile_kind("flat"), InputError);
    for (auto k : {ProfileKind::Euclidean, ProfileKind::HyperbolicSinh, ProfileKind::PowerTail})
        CHECK(parse_profile_kind(to_string(k)) == k);
}

TEST_CASE("make_profile validates parameters") {
    CHECK_THROWS_AS(make_profile(ProfileKind::ScaledSinh), InputError);
    CHECK_THROWS_AS(make_profile(ProfileKind::ScaledSinh, {{"a", -1.0}}), InputError);
    CHECK_THROWS_AS(make_profile(ProfileKind::PowerTail, {{"p", 2.0}}), InputError);
    CHECK_THROWS_AS(make_profile(ProfileKind::PowerTail, {{"p", 0.0}, {"rc", 1.0}}), InputError);
    CHECK_THROWS_AS(make_profile(ProfileKind::Tabulated), InputError);
    CHECK_THROWS_AS(make_expression_profile("2*r"), InputError);
    CHECK_THROWS_AS(make_tabulated_profile({0.0, 1.0, 2.0}, {0.0, 2.0, 4.0}), InputError);
}

TEST_CASE("analytic profiles carry exact derivatives") {
    const auto a2 = make_profile(ProfileKind::ScaledSinh, {{"a", 2.0}});
    const double r = 0.8;
    CHECK(a2(r) == Approx(std::sinh(2 * r) / 2).epsilon(1e-15));
    CHECK(a2.deriv1(r) == Approx(std::cosh(2 * r)).epsilon(1e-15));
    CHECK(a2.deriv2(r) == Approx(2 * std::sinh(2 * r)).epsilon(1e-15));
    const auto pt = power_tail(3.0);
    // phi = r (1 + r^2): phi' = 1 + 3 r^2, phi'' = 6 r
    CHECK(pt(r) == Approx(r * (1 + r * r)).epsilon(1e-15));
    CHECK(pt.deriv1(r) == Approx(1 + 3 * r * r).epsilon(1e-14));
    CHECK(pt.deriv2(r) == Approx(6 * r).epsilon(1e-14));
}

TEST_CASE("overflow-safe reciprocal and log-derivative for sinh profiles") {
    const auto p = sinh_profile();
    CHECK(std::isfinite(p.reciprocal(800.0)));
    CHECK(p.reciprocal(600.0) > 0.0);
    CHECK(p.log_derivative(800.0) == Approx(1.0).epsilon(1e-15));
    CHECK(p.radial_curvature(800.0) == Approx(-1.0).epsilon(1e-15));
    CHECK(p.reciprocal(3.0) == Approx(1.0 / std::sinh(3.0)).epsilon(1e-15));
}

TEST_CASE("cone Taylor coefficients") {
    const auto s = sinh_profile().cone_taylor();
    REQUIRE(s);
    CHECK((*s)[0] == Approx(0.0));
    CHECK((*s)[1] == Approx(1.0 / 6.0).epsilon(1e-14));
    const auto pt = power_tail(3.0).cone_taylor();
    REQUIRE(pt);
    CHECK((*pt)[1] == Approx(1.0).epsilon(1e-14));
    const auto dip = make_expression_profile("r^3/6 - 3*r^2/4 + r").cone_taylor();
    REQUIRE(dip);
    CHECK((*dip)[0] == Approx(-0.75).epsilon(1e-12));
    CHECK((*dip)[1] == Approx(1.0 / 6.0).epsilon(1e-6));
}

TEST_CASE("check_cone_axioms") {
    CHECK(check_cone_axioms(make_profile(ProfileKind::Euclidean), 1e-12).axioms_ok);
    CHECK_FALSE(check_cone_axioms(WarpingProfile::from_expression("2*r")).axioms_ok);
    CHECK(check_cone_axioms(sinh_profile()).axioms_ok);
    CHECK_FALSE(check_cone_axioms(WarpingProfile::from_expression("r + 0.1")).axioms_ok);
    CHECK_FALSE(check_cone_axioms(WarpingProfile::from_expression("sin(r)")).axioms_ok);  // phi(pi) = 0
}

TEST_CASE("Milnor integral classification") {
    const IntegralVerdict e = milnor_integral(make_profile(ProfileKind::Euclidean), 1.0);
    CHECK(e.outcome == Outcome::Diverges);
    CHECK_FALSE(e.converges);
    CHECK(e.tail_exponent == Approx(1.0).epsilon(1e-6));

    // Antiderivative of 1/sinh s is log tanh(s/2).
    for (double lo : {0.5, 1.0, 2.0}) {
        const IntegralVerdict v = milnor_integral(sinh_profile(), lo);
        CHECK(v.converges);
        CHECK(std::abs(v.value + std::log(std::tanh(lo / 2))) < 1e-8);
    }
    const IntegralVerdict a2 = milnor_integral(make_profile(ProfileKind::ScaledSinh, {{"a", 2.0}}), 1.0);
    CHECK(a2.converges);
    CHECK(std::abs(a2.value - 0.27234146891183160) < 1e-8);  // log coth 1

    // Power tails: closed forms asinh(1) and log(2)/2, quadrature oracle for p = 3/2.
    CHECK(milnor_integral(power_tail(2.0)).value == Approx(std::asinh(1.0)).epsilon(1e-10));
    CHECK(milnor_integral(power_tail(3.0)).value == Approx(0.5 * std::log(2.0)).epsilon(1e-10));
    const IntegralVerdict p15 = milnor_integral(power_tail(1.5));
    CHECK(p15.converges);
    CHECK(p15.value == Approx(1.9234113883800617).epsilon(1e-9));
    CHECK(p15.tail_exponent == Approx(1.5).epsilon(1e-3));

    // phi ~ r^0.9: the tail exponent is below one.
    const IntegralVerdict slow = milnor_integral(power_tail(0.9));
    CHECK(slow.outcome == Outcome::Diverges);
}

TEST_CASE("improper integral invariants") {
    for (const auto& p : {sinh_profile(), power_tail(2.0), make_profile(ProfileKind::Euclidean)}) {
        const IntegralVerdict v = milnor_integral(p, 1.0);
        double prev = 0.0;
        for (const auto& [R, s] : v.partials) {
            CHECK(s >= prev);
            prev = s;
        }
        if (v.converges) {
            CHECK(std::isfinite(v.abs_error_estimate));
            CHECK(v.tail_exponent > 1.0);
        }
    }
    CHECK_THROWS_AS(improper_integral([](double) { return 1.0; }, 0.0), InputError);
    const IntegralVerdict c = improper_integral([](double) { return 1.0; }, 1.0);
    CHECK(c.outcome == Outcome::Diverges);
}

TEST_CASE("march integral") {
    // Nested-quadrature oracle: inner tail of sinh^-2 is coth r - 1.
    const GaussRule g = gauss_legendre(20);
    double brute = 0.0;
    for (double a = 1.0; a < 40.0; a += 0.5) {
        const double b = a + 0.5, c = 0.5 * (a + b), w = 0.25;
        for (std::size_t i = 0; i < g.nodes.size(); ++i) {
            const double r = c + w * g.nodes[i];
            brute += w * g.weights[i] * (1.0 / std::tanh(r) - 1.0);
        }
    }
    const double closed = 1.0 - std::log(2.0) - std::log(std::sinh(1.0));
    CHECK(brute == Approx(closed).epsilon(1e-12));
    const IntegralVerdict v = march_integral(sinh_profile(), 3);
    CHECK(v.converges);
    CHECK(v.value == Approx(0.14541345786885906).epsilon(1e-9));

    CHECK(march_integral(make_profile(ProfileKind::Euclidean), 2).outcome == Outcome::Diverges);
    CHECK(march_integral(make_profile(ProfileKind::Euclidean), 4).outcome == Outcome::Diverges);
    CHECK(march_integral(power_tail(3.0), 3).converges);
}

TEST_CASE("monotone threshold") {
    CHECK(monotone_threshold(sinh_profile(), 40.0) == 0.0);
    // phi' = (r - 1)(r - 2)/2 is negative on (1, 2).
    const auto dip = make_expression_profile("r^3/6 - 3*r^2/4 + r");
    const auto R0 = monotone_threshold(dip, 40.0);
    REQUIRE(R0);
    CHECK(*R0 == Approx(2.0).epsilon(1e-6));
    CHECK_FALSE(monotone_threshold(make_expression_profile("r*exp(-r)"), 15.0));
}

TEST_CASE("curvature criterion") {
    const ValidityReport s = curvature_criterion(sinh_profile(), 0.1, 3.0, 1e4);
    REQUIRE(s.curvature_criterion_ok);
    CHECK(*s.curvature_criterion_ok);
    CHECK(s.curvature_samples.size() == 512);
    const ValidityReport e = curvature_criterion(make_profile(ProfileKind::Euclidean), 0.1, 3.0, 1e4);
    CHECK_FALSE(*e.curvature_criterion_ok);
    CHECK(*curvature_criterion(power_tail(3.0), 0.1, 3.0, 1e4).curvature_criterion_ok);
    // A bounded profile fails the growth probe even though its curvature is harmless.
    CHECK_FALSE(*curvature_criterion(make_expression_profile("atan(r)"), 0.1, 3.0, 1e4).curvature_criterion_ok);
    CHECK_THROWS_AS(curvature_criterion(sinh_profile(), 0.1, 1.0, 10.0), InputError);
}

TEST_CASE("tabulated profile reproduces the sampled function") {
    std::vector<double> r, phi;
    for (int i = 0; i <= 4000; ++i) {
        r.push_back(i * 0.005);
        phi.push_back(std::sinh(r.back()));
    }
    const auto t = make_tabulated_profile(r, phi);
    CHECK(t.kind() == ProfileKind::Tabulated);
    CHECK_FALSE(t.cone_taylor());
    CHECK(t(7.3) == Approx(std::sinh(7.3)).epsilon(1e-7));
    CHECK(t.deriv1(7.3) == Approx(std::cosh(7.3)).epsilon(1e-5));
    CHECK(check_cone_axioms(t, 1e-6).axioms_ok);
    const IntegralVerdict v = milnor_integral(t, 1.0);
    CHECK(v.converges);
    CHECK(v.value == Approx(-std::log(std::tanh(0.5))).epsilon(1e-6));
}

TEST_CASE("Milnor tail matches the closed form") {
    const MilnorTail tail(sinh_profile(), 0.5, 30.0);
    for (double r : {0.5, 1.0, 2.0, 10.0, 29.0, 30.0, 35.0})
        CHECK(tail(r) == Approx(-std::log(std::tanh(r / 2))).epsilon(1e-9));
    CHECK_THROWS_AS(MilnorTail(make_profile(ProfileKind::Euclidean), 1.0, 10.0), HypothesisError);
}
