#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <random>
#include <vector>

#include "warpcone/error.hpp"
#include "warpcone/extension.hpp"

using namespace warpcone;
using doctest::Approx;

namespace {

WarpingProfile sinh_profile() { return make_profile(ProfileKind::HyperbolicSinh); }

std::shared_ptr<const SpectralBasis> circle(int M, int nodes = 0) {
    return std::make_shared<const SpectralBasis>(circle_basis(M, nodes));
}

std::vector<double> sample(const SpectralBasis& b, const std::function<double(AngularPoint)>& f) {
    std::vector<double> out;
    for (const auto& w : b.nodes) out.push_back(f(w));
    return out;
}

/// Band-limited data with uniform(-1, 1) coefficients on blocks 0..band, normalised to sum c^2 = 1.
std::vector<double> random_band(const SpectralBasis& b, int band, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    std::vector<double> c(b.function_count(), 0.0);
    double norm = 0.0;
    for (int m = 0; m <= band; ++m)
        for (std::size_t k = b.blocks[m].first; k < b.blocks[m].first + b.blocks[m].count; ++k) {
            c[k] = U(rng);
            norm += c[k] * c[k];
        }
    std::vector<double> f(b.node_count(), 0.0);
    for (std::size_t k = 0; k < c.size(); ++k)
        for (std::size_t q = 0; q < f.size(); ++q) f[q] += c[k] / std::sqrt(norm) * b.values[k][q];
    return f;
}

}  // namespace

TEST_CASE("single-mode closed form on the hyperbolic plane") {
    const auto basis = circle(1);
    const auto f = sample(*basis, [](AngularPoint w) { return std::cos(w.theta); });
    const HarmonicExtension u = build_extension(sinh_profile(), 2, basis, f, 1);
    CHECK(u.modes().size() == 2);
    CHECK(u.modes()[1].lambda() == 1.0);
    CHECK(u.evaluate(2.0, {0.0}) == Approx(std::tanh(1.0)).epsilon(1e-8));
    CHECK(u.evaluate(2.0, {0.0}) == Approx(0.761594).epsilon(1e-6));
    for (double r : {0.1, 1.0, 4.0, 15.0})
        for (double t : {0.0, 0.7, 2.0, 4.5})
            CHECK(u.evaluate(r, {t}) == Approx(std::tanh(r / 2) * std::cos(t)).epsilon(1e-7).scale(1.0));
    CHECK(std::abs(u.evaluate(0.0, {1.3})) < 1e-15);  // only the projected c_0 ~ 1e-17 survives
    CHECK_THROWS_AS(u.evaluate(u.r_max() * 2, {0.0}), EvaluationError);
}

TEST_CASE("constant data extend to the constant") {
    for (const auto& [p, n] : {std::pair{sinh_profile(), 2}, std::pair{sinh_profile(), 3},
                               std::pair{make_profile(ProfileKind::PowerTail, {{"p", 3.0}, {"rc", 1.0}}), 3}}) {
        const auto basis = n == 2 ? circle(4) : std::make_shared<const SpectralBasis>(sphere_basis(n, 4));
        const std::vector<double> f(basis->node_count(), 2.5);
        const HarmonicExtension u = build_extension(p, n, basis, f, 4);
        for (double r : {0.0, 0.3, 5.0})
            for (double v : u.evaluate_at_nodes(r)) CHECK(v == Approx(2.5).epsilon(1e-13));
        const std::vector<double> radii{1.0, 2.0, 4.0};
        CHECK(laplacian_residual(u, radii).max < 1e-12);
        const ConvergenceReport rep = convergence_report(u, f, radii);
        for (double d : rep.sup_dev) CHECK(d < 1e-12);
        for (double d : rep.l2_dev) CHECK(d < 1e-12);
    }
}

TEST_CASE("euclidean profiles are refused unless in diagnostic mode") {
    const auto basis = circle(3);
    const auto f = sample(*basis, [](AngularPoint w) { return std::cos(w.theta) + 0.5 * std::sin(3 * w.theta); });
    CHECK_THROWS_AS(build_extension(make_profile(ProfileKind::Euclidean), 2, basis, f, 3), HypothesisError);
    ExtensionControls ctrl;
    ctrl.diagnostic = true;
    ctrl.radial.R_max = 100.0;
    const HarmonicExtension u = build_extension(make_profile(ProfileKind::Euclidean), 2, basis, f, 3, ctrl);
    CHECK(u.diagnostic());
    CHECK_FALSE(u.notes().empty());
    // Raw modes are r^m: u = r cos t + r^3 sin(3 t) / 2 is a harmonic polynomial.
    CHECK(u.evaluate(1.7, {0.4}) ==
          Approx(1.7 * std::cos(0.4) + 0.5 * std::pow(1.7, 3) * std::sin(1.2)).epsilon(1e-8));
    const std::vector<double> radii{0.5, 1.0, 2.0, 5.0, 10.0};
    const ResidualTable res = laplacian_residual(u, radii);
    for (std::size_t i = 0; i < radii.size(); ++i) CHECK(res.residual[i] < 1e-8 * std::pow(radii[i], 3));
}

TEST_CASE("Clenshaw evaluation agrees with nodal synthesis") {
    const auto basis = circle(12);
    const auto f = random_band(*basis, 12, 5);
    const HarmonicExtension u = build_extension(sinh_profile(), 2, basis, f, 12);
    for (double r : {0.2, 1.5, 8.0}) {
        const auto nodal = u.evaluate_at_nodes(r);
        for (std::size_t q = 0; q < basis->node_count(); q += 5) {
            CHECK(u.evaluate(r, basis->nodes[q]) == Approx(nodal[q]).epsilon(1e-13).scale(1.0));
            CHECK(u.evaluate_at_node(r, q) == Approx(nodal[q]).epsilon(1e-13).scale(1.0));
        }
    }
    const auto sphere = std::make_shared<const SpectralBasis>(sphere_basis(3, 5));
    const auto g = random_band(*sphere, 5, 8);
    const HarmonicExtension v = build_extension(sinh_profile(), 3, sphere, g, 5);
    const auto nodal = v.evaluate_at_nodes(2.0);
    for (std::size_t q = 0; q < sphere->node_count(); q += 11)
        CHECK(v.evaluate(2.0, sphere->nodes[q]) == Approx(nodal[q]).epsilon(1e-12).scale(1.0));
}

TEST_CASE("deviation closed forms for cos t on the hyperbolic plane") {
    const auto basis = circle(1);
    const auto f = sample(*basis, [](AngularPoint w) { return std::cos(w.theta); });
    const HarmonicExtension u = build_extension(sinh_profile(), 2, basis, f, 1);
    const std::vector<double> radii{1.0, 2.0, 5.0, 10.0, 19.0};
    const ConvergenceReport rep = convergence_report(u, f, radii);
    for (std::size_t i = 0; i < radii.size(); ++i) {
        const double gap = 1.0 - std::tanh(radii[i] / 2);
        CHECK(rep.sup_dev[i] == Approx(gap).epsilon(1e-7));
        CHECK(rep.l2_dev[i] == Approx(gap * std::sqrt(std::numbers::pi)).epsilon(1e-7));
        CHECK(rep.l2_dev_series[i] == Approx(gap * std::sqrt(std::numbers::pi)).epsilon(1e-7));
    }
    CHECK(rep.l2_identity_ok);
    REQUIRE(rep.eps_targets_met.at(1e-2));
    CHECK(*rep.eps_targets_met.at(1e-2) == 10.0);  // 1 - tanh(2.5) = 0.013 > 1e-2
    REQUIRE(rep.eps_targets_met.at(1e-4));
    CHECK(*rep.eps_targets_met.at(1e-4) == 10.0);  // 1 - tanh(5) = 9.1e-5
}

TEST_CASE("uniform deviation obeys the triangle bound and decreases") {
    for (const auto& [p, n, band] : {std::tuple{sinh_profile(), 2, 6}, std::tuple{sinh_profile(), 3, 4},
                                     std::tuple{make_profile(ProfileKind::ScaledSinh, {{"a", 2.0}}), 2, 8}}) {
        const auto basis = n == 2 ? circle(band) : std::make_shared<const SpectralBasis>(sphere_basis(n, band));
        const auto f = random_band(*basis, band, 17);
        const HarmonicExtension u = build_extension(p, n, basis, f, band);
        std::vector<double> radii;
        for (double r = 0.5; r < std::min(u.r_max(), 30.0); r *= 1.25) radii.push_back(r);
        const ConvergenceReport rep = convergence_report(u, f, radii);
        CHECK(rep.truncation_tail_sup < 1e-12);
        CHECK(rep.l2_identity_ok);
        for (std::size_t i = 0; i < radii.size(); ++i) {
            CHECK(rep.sup_dev[i] <= rep.triangle_bound[i] + 1e-12);
            if (i > 0) {
                CHECK(rep.sup_dev[i] <= rep.sup_dev[i - 1] + 1e-9);
                CHECK(rep.l2_dev[i] <= rep.l2_dev[i - 1] + 1e-9);
            }
        }
    }
}

TEST_CASE("L2 deviation matches a brute-force sum over frozen modes") {
    const auto basis = circle(10);
    const auto f = random_band(*basis, 10, 23);
    const HarmonicExtension u = build_extension(sinh_profile(), 2, basis, f, 10);
    const CoefficientTable c = project(f, *basis, 10);
    double sum_c2 = 0.0;
    for (double x : c.c) sum_c2 += x * x;
    CHECK(sum_c2 == Approx(1.0).epsilon(1e-13));
    for (double R : {3.0, 12.0, 30.0}) {
        double brute = 0.0;
        for (int m = 0; m <= 10; ++m) {
            const double gap = 1.0 - (m == 0 ? 1.0 : std::pow(std::tanh(R / 2), m));
            for (std::size_t k = basis->blocks[m].first; k < basis->blocks[m].first + basis->blocks[m].count; ++k)
                brute += gap * gap * c.c[k] * c.c[k];
        }
        const std::vector<double> radii{R};
        const ConvergenceReport rep = l2_convergence_report(u, f, radii);
        CHECK(rep.l2_dev[0] == Approx(std::sqrt(brute)).epsilon(1e-6));
        CHECK(std::abs(rep.l2_dev[0] - rep.l2_dev_series[0]) <= 1e-9);
    }
}

TEST_CASE("truncation tail is reported when M is below the data bandwidth") {
    const auto basis = circle(8);
    const auto f = sample(*basis, [](AngularPoint w) { return std::cos(w.theta) + 0.1 * std::cos(5 * w.theta); });
    const HarmonicExtension u = build_extension(sinh_profile(), 2, basis, f, 3);
    const std::vector<double> radii{5.0, 20.0};
    const ConvergenceReport rep = convergence_report(u, f, radii);
    CHECK(rep.truncation_tail_sup == Approx(0.1).epsilon(1e-12));
    CHECK(rep.truncation_tail_l2 == Approx(0.1 * std::sqrt(std::numbers::pi)).epsilon(1e-12));
    CHECK(rep.l2_identity_ok);
    CHECK(rep.sup_dev[1] >= 0.1 - 1e-9);
    CHECK_FALSE(rep.eps_targets_met.at(1e-2));
}

TEST_CASE("harmonicity residual") {
    for (const auto& [p, n] : {std::pair{sinh_profile(), 2}, std::pair{sinh_profile(), 3},
                               std::pair{make_profile(ProfileKind::PowerTail, {{"p", 3.0}, {"rc", 1.0}}), 3},
                               std::pair{make_profile(ProfileKind::ScaledSinh, {{"a", 2.0}}), 2}}) {
        const int M = n == 2 ? 10 : 6;
        const auto basis = n == 2 ? circle(M) : std::make_shared<const SpectralBasis>(sphere_basis(n, M));
        const auto f = random_band(*basis, M, 31);
        const HarmonicExtension u = build_extension(p, n, basis, f, M);
        std::vector<double> radii;
        for (double r = 0.05; r < u.r_max() / 2.2; r *= 1.4) radii.push_back(r);
        const ResidualTable res = laplacian_residual(u, radii);
        double sup_f = 0.0;
        for (double x : f) sup_f = std::max(sup_f, std::abs(x));
        const double lamM = basis->blocks[M].lambda;
        CHECK(res.max <= 1e-5 * (1 + lamM * lamM) * sup_f);
    }
    const auto basis = circle(2);
    const HarmonicExtension u =
        build_extension(sinh_profile(), 2, basis, sample(*basis, [](AngularPoint w) { return std::cos(w.theta); }), 1);
    const std::vector<double> bad{u.r_max()};
    CHECK_THROWS_AS(laplacian_residual(u, bad), InputError);
}

TEST_CASE("maximum principle surrogate") {
    const auto basis = circle(6);
    const auto f = random_band(*basis, 6, 41);
    const HarmonicExtension u = build_extension(sinh_profile(), 2, basis, f, 6);
    // Extremes of the band-limited f itself, on a grid fine enough for 1e-8.
    const CoefficientTable c = project(f, *basis, 6);
    std::vector<double> vals(basis->function_count());
    double lo = 1e300, hi = -1e300;
    for (int i = 0; i < (1 << 18); ++i) {
        basis->evaluate_all({2 * std::numbers::pi * i / (1 << 18)}, vals);
        double v = 0.0;
        for (std::size_t k = 0; k < vals.size(); ++k) v += c.c[k] * vals[k];
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    for (double r = 0.0; r <= 30.0; r += 0.37)
        for (double t = 0.0; t < 2 * std::numbers::pi; t += 0.05) {
            const double v = u.evaluate(r, {t});
            CHECK(v >= lo - 1e-8);
            CHECK(v <= hi + 1e-8);
        }
}

TEST_CASE("annulus oracle") {
    auto cos_t = [](double t) { return std::cos(t); };
    // Euclidean disk: r cos t with second-order error.
    double prev = 0.0;
    for (int level = 0; level < 3; ++level) {
        const int nr = 16 << level, nt = 32 << level;
        const AnnulusSolution s = annulus_oracle(make_profile(ProfileKind::Euclidean), cos_t, 1.0, nr, nt);
        CHECK(s.relative_residual <= 1e-10);
        double err = 0.0;
        for (std::size_t i = 0; i < s.r.size(); ++i)
            for (std::size_t j = 0; j < s.theta.size(); ++j)
                err = std::max(err, std::abs(s.at(i, j) - s.r[i] * std::cos(s.theta[j])));
        if (level > 0) CHECK(std::log2(prev / err) >= 1.9);
        prev = err;
    }
    // Hyperbolic plane: tanh(r/2)/tanh(5) cos t on r <= 10.
    prev = 0.0;
    for (int level = 0; level < 3; ++level) {
        const int nr = 40 << level, nt = 32 << level;
        const AnnulusSolution s = annulus_oracle(sinh_profile(), cos_t, 10.0, nr, nt);
        double err = 0.0;
        for (std::size_t i = 0; i < s.r.size(); ++i)
            for (std::size_t j = 0; j < s.theta.size(); ++j)
                err = std::max(err, std::abs(s.at(i, j) - std::tanh(s.r[i] / 2) / std::tanh(5.0) * std::cos(s.theta[j])));
        if (level > 0) CHECK(std::log2(prev / err) >= 1.9);
        prev = err;
    }
    const AnnulusSolution c = annulus_oracle(sinh_profile(), [](double) { return 3.0; }, 5.0, 20, 16);
    for (double v : c.u) CHECK(v == Approx(3.0).epsilon(1e-9));
}

TEST_CASE("rescaled extension reproduces the data at the outer radius") {
    const auto basis = circle(5);
    const auto f = random_band(*basis, 5, 3);
    const HarmonicExtension u = build_extension(sinh_profile(), 2, basis, f, 5).rescaled_at(4.0);
    const auto at4 = u.evaluate_at_nodes(4.0);
    for (std::size_t q = 0; q < f.size(); ++q) CHECK(at4[q] == Approx(f[q]).epsilon(1e-12).scale(1.0));
}

TEST_CASE("serial and parallel assembly agree bit for bit") {
    const auto basis = std::make_shared<const SpectralBasis>(sphere_basis(3, 6));
    const auto f = random_band(*basis, 6, 99);
    ExtensionControls serial;
    serial.parallel = false;
    const HarmonicExtension a = build_extension(sinh_profile(), 3, basis, f, 6, serial);
    const HarmonicExtension b = build_extension(sinh_profile(), 3, basis, f, 6);
    for (double r : {0.3, 3.0, 12.0}) CHECK(a.evaluate_at_nodes(r) == b.evaluate_at_nodes(r));
}

TEST_CASE("build_extension input checks") {
    const auto basis = circle(4);
    const std::vector<double> f(basis->node_count(), 1.0);
    CHECK_THROWS_AS(build_extension(sinh_profile(), 2, basis, f, 9), InputError);
    CHECK_THROWS_AS(build_extension(sinh_profile(), 3, basis, f, 2), InputError);
    CHECK_THROWS_AS(build_extension(sinh_profile(), 2, nullptr, f, 2), InputError);
    const std::vector<double> short_f(3, 1.0);
    CHECK_THROWS_AS(build_extension(sinh_profile(), 2, basis, short_f, 2), InputError);
    // phi' < 0 on (1, 2) but phi is nondecreasing beyond R_0 = 2: accepted in every dimension.
    const auto dip = make_expression_profile("r^3/6 - 3*r^2/4 + r");
    const auto sphere = std::make_shared<const SpectralBasis>(sphere_basis(3, 2));
    const std::vector<double> g(sphere->node_count(), 1.0);
    CHECK_NOTHROW(build_extension(dip, 2, basis, f, 2));
    CHECK_NOTHROW(build_extension(dip, 3, sphere, g, 2));
    // Convergent Milnor integral but phi' < 0 once per period: refused once dim N >= 2.
    const auto wobble = make_expression_profile("r*exp(r)*(1.1 + sin(r))/1.1");
    CHECK(milnor_integral(wobble).converges);
    // The threshold is searched up to the mode radius: with phi' < 0 at that radius there is none.
    ExtensionControls ctrl;
    ctrl.radial.R_max = 1.25 * std::numbers::pi + 10 * std::numbers::pi;
    REQUIRE(wobble.deriv1(ctrl.radial.R_max) < 0.0);
    CHECK_THROWS_AS(build_extension(wobble, 3, sphere, g, 2, ctrl), HypothesisError);
    CHECK_NOTHROW(build_extension(wobble, 2, basis, f, 2, ctrl));
}
