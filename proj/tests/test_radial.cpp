#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "warpcone/error.hpp"
#include "warpcone/radial.hpp"
#include "warpcone/warping.hpp"

using namespace warpcone;
using doctest::Approx;

namespace {

WarpingProfile sinh_profile() { return make_profile(ProfileKind::HyperbolicSinh); }
WarpingProfile power_tail(double p) { return make_profile(ProfileKind::PowerTail, {{"p", p}, {"rc", 1.0}}); }

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

}  // namespace

TEST_CASE("indicial root") {
    CHECK(indicial_root(2, 3.0) == 3.0);
    CHECK(indicial_root(5, std::sqrt(10.0)) == Approx(2.0).epsilon(1e-15));
    CHECK(indicial_root(3, 1.0) == Approx(0.6180339887498948).epsilon(1e-15));
    CHECK(indicial_root(4, 0.0) == 0.0);
    // Round-sphere identity k = m for lambda^2 = m(m + n - 2), and the quadratic itself.
    for (int n = 2; n <= 7; ++n)
        for (int m = 1; m <= 8; ++m) {
            const double lam = std::sqrt(m * (m + n - 2.0));
            const double k = indicial_root(n, lam);
            CHECK(k == Approx(m).epsilon(1e-14));
            CHECK(k * (k - 1) + (n - 1) * k - lam * lam == Approx(0.0).scale(lam * lam).epsilon(1e-14));
        }
    // No cancellation for tiny lambda: k ~ lambda^2 / (n - 2).
    CHECK(indicial_root(3, 1e-9) == Approx(1e-18).epsilon(1e-12));
}

TEST_CASE("Frobenius seed") {
    const double r0 = 1e-4;
    const FrobeniusSeed e = frobenius_seed(make_profile(ProfileKind::Euclidean), 2, 3.0, r0);
    CHECK(e.k == 3.0);
    CHECK(e.series[1] == 0.0);
    CHECK(e.series[2] == 0.0);
    CHECK(e.value == Approx(std::pow(r0, 3)).epsilon(1e-15));
    CHECK(e.slope == Approx(3 * r0 * r0).epsilon(1e-15));

    // sinh, n = 2: the regular solution is (2 tanh(r/2))^lambda = r^lambda (1 - lambda r^2/12 + ...).
    for (double lam : {1.0, 2.5}) {
        const FrobeniusSeed s = frobenius_seed(sinh_profile(), 2, lam, r0);
        CHECK(s.series[1] == Approx(0.0).scale(1.0));
        CHECK(s.series[2] == Approx(-lam / 12).epsilon(1e-13));
        const double exact = std::pow(2 * std::tanh(r0 / 2), lam);
        const double exact_slope = lam * std::pow(2 * std::tanh(r0 / 2), lam - 1) / std::pow(std::cosh(r0 / 2), 2);
        CHECK(rel(s.value, exact) < 1e-12);
        CHECK(rel(s.slope, exact_slope) < 1e-12);
    }
    const FrobeniusSeed z = frobenius_seed(sinh_profile(), 3, 0.0, r0);
    CHECK(z.value == 1.0);
    CHECK(z.slope == 0.0);

    std::vector<double> r, phi;
    for (int i = 0; i <= 400; ++i) {
        r.push_back(0.05 * i);
        phi.push_back(std::sinh(r.back()));
    }
    const FrobeniusSeed t = frobenius_seed(make_tabulated_profile(r, phi), 3, 1.0, r0);
    CHECK(t.fallback);
    CHECK(t.order_used == 0);
    CHECK(t.value == Approx(std::pow(r0, t.k)).epsilon(1e-15));
}

TEST_CASE("euclidean modes do not normalise and follow the power solution") {
    RadialControls ctrl;
    ctrl.R_max = 1e4;
    const RadialMode m = solve_radial_mode(make_profile(ProfileKind::Euclidean), 2, 2.0, ctrl);
    CHECK_FALSE(m.normalizable());
    for (double r = m.r0(); r <= 10.0; r *= 1.3) CHECK(rel(m.raw(r), r * r) < 1e-8);
    const RadialMode m3 = solve_radial_mode(make_profile(ProfileKind::Euclidean), 3, 1.0, ctrl);
    CHECK_FALSE(m3.normalizable());
    const double k = indicial_root(3, 1.0);
    for (double r : {0.01, 0.5, 3.0, 9.0}) CHECK(rel(m3.raw(r), std::pow(r, k)) < 1e-8);
}

TEST_CASE("dimension-two sinh modes are powers of tanh(r/2)") {
    for (int m = 1; m <= 8; ++m) {
        const RadialMode mode = solve_radial_mode(sinh_profile(), 2, m);
        REQUIRE(mode.normalizable());
        double worst = 0.0;
        for (double r = 0.1; r <= 20.0; r *= 1.02) worst = std::max(worst, rel(mode(r), std::pow(std::tanh(r / 2), m)));
        CHECK(worst < 1e-7);
        CHECK(mode(0.0) == 0.0);
    }
}

TEST_CASE("mode invariants") {
    for (const auto& [p, n] : {std::pair{sinh_profile(), 3}, std::pair{sinh_profile(), 5}, std::pair{power_tail(3.0), 3},
                               std::pair{make_profile(ProfileKind::ScaledSinh, {{"a", 2.0}}), 4}}) {
        for (double lam : {0.5, 2.0, 7.0}) {
            const RadialMode mode = solve_radial_mode(p, n, lam);
            REQUIRE(mode.normalizable());
            CHECK(mode(0.0) == 0.0);
            double prev = -1.0;
            for (double r = 1e-3; r <= mode.r_max(); r *= 1.05) {
                const double v = mode(r);
                CHECK(v >= prev - 1e-9);
                CHECK(v >= -1e-9);
                CHECK(v <= 1.0 + 1e-9);
                prev = v;
            }
            CHECK(mode(mode.r_max()) == Approx(1.0).epsilon(1e-6));
            CHECK(mode.k_indicial() == Approx(indicial_root(n, lam)).epsilon(1e-15));
            CHECK_THROWS_AS(mode(mode.r_max() * 1.5), EvaluationError);
        }
    }
}

TEST_CASE("lambda = 0 gives the constant mode") {
    const RadialMode c = solve_radial_mode(sinh_profile(), 3, 0.0);
    CHECK(c.normalizable());
    for (double r : {0.0, 0.3, 10.0}) {
        CHECK(c(r) == 1.0);
        CHECK(c.derivative(r) == 0.0);
    }
    const RadialMode k = constant_mode(5.0);
    CHECK(k(5.0) == 1.0);
    CHECK(k.lambda() == 0.0);
}

TEST_CASE("normalised modes do not depend on the seed scale") {
    RadialControls a, b;
    b.seed_scale = 1e7;
    const RadialMode m1 = solve_radial_mode(sinh_profile(), 3, 3.0, a);
    const RadialMode m2 = solve_radial_mode(sinh_profile(), 3, 3.0, b);
    for (double r : {0.01, 0.5, 2.0, 10.0, 30.0}) CHECK(rel(m2(r), m1(r)) < 1e-12);
    // limit_raw is reported in seed normalisation r^k p(r), independent of the start scale.
    CHECK(rel(m2.limit_raw(), m1.limit_raw()) < 1e-12);
}

TEST_CASE("large lambda modes survive rescaling") {
    const RadialMode m = solve_radial_mode(sinh_profile(), 2, 40.0);
    REQUIRE(m.normalizable());
    for (double r : {1.0, 5.0, 20.0}) CHECK(rel(m(r), std::pow(std::tanh(r / 2), 40.0)) < 1e-6);
}

TEST_CASE("comparison function") {
    CHECK(comparison_eta(sinh_profile(), 1.0, 2.0) == Approx(std::tanh(1.0)).epsilon(1e-10));
    CHECK(comparison_eta(sinh_profile(), 1.0, 2.0) == Approx(0.761594).epsilon(1e-6));
    CHECK(comparison_eta(power_tail(3.0), 0.0, 0.5) == 1.0);
    double prev = 0.0;
    for (double r = 0.5; r < 200.0; r *= 1.5) {
        const double e = comparison_eta(power_tail(3.0), 2.0, r);
        CHECK(e > prev);
        CHECK(e < 1.0);
        prev = e;
    }
    CHECK(prev == Approx(1.0).epsilon(1e-3));
    CHECK_THROWS_AS(comparison_eta(make_profile(ProfileKind::Euclidean), 1.0, 2.0), HypothesisError);
}

TEST_CASE("radial operator applied to eta is (n - 2) lambda phi' eta / phi^2") {
    // Derivatives of eta by fourth-order central differences.
    for (const auto& [p, n] : {std::pair{sinh_profile(), 3}, std::pair{power_tail(3.0), 4}, std::pair{sinh_profile(), 2}}) {
        const double lam = 1.5;
        for (double r : {1.5, 3.0, 6.0}) {
            const double h = 1e-2 * r;
            auto eta = [&](double s) { return comparison_eta(p, lam, s); };
            const double e0 = eta(r), ep1 = eta(r + h), em1 = eta(r - h), ep2 = eta(r + 2 * h), em2 = eta(r - 2 * h);
            const double d1 = (em2 - 8 * em1 + 8 * ep1 - ep2) / (12 * h);
            const double d2 = (-em2 + 16 * em1 - 30 * e0 + 16 * ep1 - ep2) / (12 * h * h);
            const double phi = p(r), dphi = p.deriv1(r);
            const double lhs = d2 + (n - 1) * dphi / phi * d1 - lam * lam / (phi * phi) * e0;
            const double rhs = (n - 2) * lam * dphi * e0 / (phi * phi);
            CHECK(std::abs(lhs - rhs) <= 1e-5 * std::abs(rhs) + 1e-7 * (std::abs(d2) + lam * lam * e0 / (phi * phi)) +
                                                1e-11 / (h * h));  // rounding of eta through the stencil
            CHECK(lhs >= -1e-8);
        }
    }
}

TEST_CASE("verify_mode passes on shipped convergent profiles") {
    for (const auto& [p, n] : {std::pair{sinh_profile(), 2}, std::pair{sinh_profile(), 3}, std::pair{power_tail(3.0), 3},
                               std::pair{make_profile(ProfileKind::ScaledSinh, {{"a", 2.0}}), 5}}) {
        for (double lam : {0.5, 1.0, 4.0, 20.0}) {
            const RadialMode mode = solve_radial_mode(p, n, lam);
            const ModeReport rep = verify_mode(mode, p, n);
            CHECK(rep.monotone_ok);
            CHECK(rep.range_ok);
            CHECK(rep.bounds_ok);
            CHECK(rep.max_violation <= 1e-9);
            CHECK(rep.residual_max <= 1e-6 * (1 + lam * lam));
            CHECK(rep.A_m > 0.0);
            if (p.kind() == ProfileKind::HyperbolicSinh || p.kind() == ProfileKind::ScaledSinh) {
                REQUIRE(rep.tanh_bound_ok);
                CHECK(*rep.tanh_bound_ok);
            } else {
                CHECK_FALSE(rep.tanh_bound_ok);
            }
        }
    }
}

TEST_CASE("verify_mode refuses non-normalizable modes") {
    RadialControls ctrl;
    ctrl.R_max = 1e3;
    const RadialMode e = solve_radial_mode(make_profile(ProfileKind::Euclidean), 2, 1.0, ctrl);
    CHECK_THROWS_AS(verify_mode(e, make_profile(ProfileKind::Euclidean), 2), HypothesisError);
}

TEST_CASE("slow power tails are caught by the eta drift guard") {
    const RadialMode m = solve_radial_mode(power_tail(2.0), 3, 1.0);
    CHECK_FALSE(m.normalizable());
    const bool noted = std::any_of(m.notes().begin(), m.notes().end(),
                                   [](const std::string& s) { return s.find("drifts") != std::string::npos; });
    CHECK(noted);
    // In dimension two the same profile is fine: eta is an exact solution.
    CHECK(solve_radial_mode(power_tail(2.0), 2, 1.0).normalizable());
}

TEST_CASE("mode residual stays small") {
    const RadialMode m = solve_radial_mode(sinh_profile(), 4, 3.0);
    for (double r : {0.01, 0.2, 1.0, 5.0, 15.0}) CHECK(std::abs(mode_residual(m, sinh_profile(), r)) < 1e-6 * 10);
}
