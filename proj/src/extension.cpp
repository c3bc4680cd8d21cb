#include "warpcone/extension.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <numbers>

#include "warpcone/error.hpp"

namespace warpcone {

void HarmonicExtension::check_radius(double r) const {
    if (!(r >= 0.0) || r > r_max_ * (1.0 + 1e-12))
        throw EvaluationError("extension evaluated at r = " + std::to_string(r) + " outside [0, " +
                              std::to_string(r_max_) + "]");
}

double HarmonicExtension::mode_value(std::size_t m, double r) const {
    const RadialMode& mode = modes_.at(m);
    return scale_[m] * (mode.normalizable() ? mode(r) : mode.raw(r));
}

double HarmonicExtension::mode_derivative(std::size_t m, double r) const {
    const RadialMode& mode = modes_.at(m);
    const double d = mode.derivative(r);
    return scale_[m] * (mode.normalizable() ? d : d * mode.raw(r) / mode(r));
}

double HarmonicExtension::evaluate(double r, AngularPoint w) const {
    check_radius(r);
    const SpectralBasis& b = *basis_;
    const int M = truncation();
    if (b.kind == BasisKind::Circle) {
        // Clenshaw recurrences for sum a_m cos(m t) and sum b_m sin(m t).
        const double x = std::cos(w.theta);
        const double inv_sqrt_pi = 1.0 / std::sqrt(std::numbers::pi);
        double c1 = 0.0, c2 = 0.0, s1 = 0.0, s2 = 0.0;
        for (int m = M; m >= 1; --m) {
            const double phi = mode_value(static_cast<std::size_t>(m), r);
            const double a = phi * coeffs_.c[2 * m - 1] * inv_sqrt_pi;
            const double bm = phi * coeffs_.c[2 * m] * inv_sqrt_pi;
            const double c0 = a + 2.0 * x * c1 - c2;
            const double s0 = bm + 2.0 * x * s1 - s2;
            c2 = c1;
            c1 = c0;
            s2 = s1;
            s1 = s0;
        }
        const double a0 = mode_value(0, r) * coeffs_.c[0] / std::sqrt(2.0 * std::numbers::pi);
        return a0 + c1 * x - c2 + s1 * std::sin(w.theta);
    }
    if (!b.evaluate_all) throw InputError("evaluate: mesh bases support node evaluation only");
    std::vector<double> buf(b.function_count());
    b.evaluate_all(w, buf);
    double u = 0.0;
    for (int m = 0; m <= M; ++m) {
        const ModeBlock& blk = b.blocks[static_cast<std::size_t>(m)];
        double s = 0.0;
        for (std::size_t f = blk.first; f < blk.first + blk.count; ++f) s += coeffs_.c[f] * buf[f];
        u += mode_value(static_cast<std::size_t>(m), r) * s;
    }
    return u;
}

std::vector<double> HarmonicExtension::evaluate_at_nodes(double r) const {
    check_radius(r);
    std::vector<double> u(basis_->node_count(), 0.0);
    for (std::size_t m = 0; m < modes_.size(); ++m) {
        const double phi = mode_value(m, r);
        const auto& g = components_[m];
        for (std::size_t q = 0; q < u.size(); ++q) u[q] += phi * g[q];
    }
    return u;
}

double HarmonicExtension::evaluate_at_node(double r, std::size_t q) const {
    check_radius(r);
    if (q >= basis_->node_count()) throw InputError("evaluate_at_node: node index out of range");
    double u = 0.0;
    for (std::size_t m = 0; m < modes_.size(); ++m) u += mode_value(m, r) * components_[m][q];
    return u;
}

HarmonicExtension HarmonicExtension::rescaled_at(double R_outer) const {
    check_radius(R_outer);
    HarmonicExtension copy = *this;
    for (std::size_t m = 0; m < modes_.size(); ++m) {
        const double v = mode_value(m, R_outer);
        if (!(std::abs(v) > 0.0)) throw EvaluationError("rescaled_at: mode vanishes at the outer radius");
        copy.scale_[m] = scale_[m] / v;
    }
    copy.r_max_ = R_outer;
    return copy;
}

HarmonicExtension build_extension(const WarpingProfile& p, int n, std::shared_ptr<const SpectralBasis> basis,
                                  const CoefficientTable& coeffs, const ExtensionControls& ctrl) {
    if (!basis) throw InputError("build_extension: missing basis");
    if (n < 2) throw InputError("build_extension: n must be at least 2");
    if (basis->kind != BasisKind::Mesh && basis->dim_N != n - 1)
        throw InputError("build_extension: basis dimension " + std::to_string(basis->dim_N) +
                         " does not match n - 1 = " + std::to_string(n - 1));
    const int M = coeffs.truncation;
    if (M < 0 || static_cast<std::size_t>(M) >= basis->blocks.size())
        throw InputError("build_extension: truncation M exceeds the basis size");
    if (coeffs.c.size() != basis->function_count())
        throw InputError("build_extension: coefficient count does not match the basis");

    HarmonicExtension u(p);
    u.n_ = n;
    u.basis_ = basis;
    u.coeffs_ = coeffs;
    u.diagnostic_ = ctrl.diagnostic;

    if (!ctrl.diagnostic) {
        const IntegralVerdict milnor = milnor_integral(p, 1.0, ctrl.radial.quad);
        if (!milnor.converges)
            throw HypothesisError("Milnor integral " + to_string(milnor.outcome) +
                                  ": solvability hypotheses not met");
        if (n >= 3) {
            const double R = ctrl.radial.R_max > 0.0 ? ctrl.radial.R_max : p.default_mode_radius();
            if (!monotone_threshold(p, R))
                throw HypothesisError("phi is not eventually nondecreasing below r = " + std::to_string(R));
        }
    }

    // One solve per distinct lambda, shared across degenerate blocks.
    std::vector<double> distinct;
    std::vector<std::size_t> which(static_cast<std::size_t>(M) + 1);
    for (int m = 0; m <= M; ++m) {
        const double lam = basis->blocks[static_cast<std::size_t>(m)].lambda;
        auto it = std::find(distinct.begin(), distinct.end(), lam);
        which[static_cast<std::size_t>(m)] = static_cast<std::size_t>(it - distinct.begin());
        if (it == distinct.end()) distinct.push_back(lam);
    }
    std::vector<RadialMode> solved;
    solved.reserve(distinct.size());
    if (ctrl.parallel && distinct.size() > 1) {
        std::vector<std::future<RadialMode>> jobs;
        for (double lam : distinct)
            jobs.push_back(std::async(std::launch::async, [&p, n, lam, &ctrl] {
                return solve_radial_mode(p, n, lam, ctrl.radial);
            }));
        for (auto& job : jobs) solved.push_back(job.get());
    } else {
        for (double lam : distinct) solved.push_back(solve_radial_mode(p, n, lam, ctrl.radial));
    }

    for (const RadialMode& mode : solved) {
        if (mode.normalizable()) continue;
        std::string detail = mode.notes().empty() ? std::string() : ": " + mode.notes().back();
        if (!ctrl.diagnostic)
            throw HypothesisError("mode with lambda = " + std::to_string(mode.lambda()) + " is not normalizable" +
                                  detail);
        u.notes_.push_back("diagnostic: raw mode for lambda = " + std::to_string(mode.lambda()) + detail);
    }

    u.r_max_ = std::numeric_limits<double>::infinity();
    for (int m = 0; m <= M; ++m) {
        u.modes_.push_back(solved[which[static_cast<std::size_t>(m)]]);
        u.r_max_ = std::min(u.r_max_, u.modes_.back().r_max());
    }
    u.scale_.assign(u.modes_.size(), 1.0);

    u.components_.assign(u.modes_.size(), std::vector<double>(basis->node_count(), 0.0));
    for (int m = 0; m <= M; ++m) {
        const ModeBlock& blk = basis->blocks[static_cast<std::size_t>(m)];
        auto& g = u.components_[static_cast<std::size_t>(m)];
        for (std::size_t f = blk.first; f < blk.first + blk.count; ++f)
            for (std::size_t q = 0; q < g.size(); ++q) g[q] += coeffs.c[f] * basis->values[f][q];
    }
    return u;
}

HarmonicExtension build_extension(const WarpingProfile& p, int n, std::shared_ptr<const SpectralBasis> basis,
                                  std::span<const double> f, int M, const ExtensionControls& ctrl) {
    if (!basis) throw InputError("build_extension: missing basis");
    return build_extension(p, n, basis, project(f, *basis, M), ctrl);
}

ResidualTable laplacian_residual(const HarmonicExtension& u, std::span<const double> radii) {
    ResidualTable table;
    double r0 = 0.0;
    for (const RadialMode& mode : u.modes())
        if (mode.lambda() > 0.0) r0 = std::max(r0, mode.r0());
    const WarpingProfile& p = u.profile();
    const int n = u.dimension();
    const std::size_t nodes = u.basis().node_count();
    for (double r : radii) {
        if (!(r > 2.0 * r0) || !(r < 0.5 * u.r_max()))
            throw InputError("laplacian_residual: radius " + std::to_string(r) + " outside (2 r0, r_max / 2)");
        const double h = 0.01 * r;
        const double L = p.log_derivative(r);
        const double inv = p.reciprocal(r);
        std::vector<double> res(nodes, 0.0);
        for (std::size_t m = 0; m < u.modes().size(); ++m) {
            const double ym2 = u.mode_value(m, r - 2.0 * h), ym1 = u.mode_value(m, r - h), y0 = u.mode_value(m, r),
                         yp1 = u.mode_value(m, r + h), yp2 = u.mode_value(m, r + 2.0 * h);
            const double d1 = (ym2 - 8.0 * ym1 + 8.0 * yp1 - yp2) / (12.0 * h);
            const double d2 = (-ym2 + 16.0 * ym1 - 30.0 * y0 + 16.0 * yp1 - yp2) / (12.0 * h * h);
            const double lam = u.modes()[m].lambda();
            const double radial = d2 + (n - 1.0) * L * d1 - lam * lam * inv * inv * y0;
            const auto& g = u.component(m);
            for (std::size_t q = 0; q < nodes; ++q) res[q] += radial * g[q];
        }
        double sup = 0.0;
        for (double v : res) sup = std::max(sup, std::abs(v));
        table.radii.push_back(r);
        table.residual.push_back(sup);
        table.max = std::max(table.max, sup);
    }
    return table;
}

namespace {

const std::vector<double> kDefaultEps{1e-2, 1e-4};

std::map<double, std::optional<double>> eps_targets(std::span<const double> radii, const std::vector<double>& dev,
                                                    std::span<const double> eps_list) {
    std::map<double, std::optional<double>> out;
    for (double eps : eps_list) {
        std::optional<double> hit;
        for (std::size_t i = dev.size(); i-- > 0;) {
            if (!(dev[i] <= eps)) break;
            hit = radii[i];
        }
        out[eps] = hit;
    }
    return out;
}

void check_inputs(const HarmonicExtension& u, std::span<const double> f, std::span<const double> radii) {
    if (f.size() != u.basis().node_count()) throw InputError("convergence report: sample count mismatch");
    for (std::size_t i = 1; i < radii.size(); ++i)
        if (!(radii[i] > radii[i - 1])) throw InputError("convergence report: radii must increase");
}

std::vector<double> truncation_tail(const HarmonicExtension& u, std::span<const double> f) {
    std::vector<double> tail(f.begin(), f.end());
    for (std::size_t m = 0; m < u.modes().size(); ++m) {
        const auto& g = u.component(m);
        for (std::size_t q = 0; q < tail.size(); ++q) tail[q] -= g[q];
    }
    return tail;
}

}  // namespace

ConvergenceReport uniform_convergence_report(const HarmonicExtension& u, std::span<const double> f,
                                             std::span<const double> radii, std::span<const double> eps_list) {
    check_inputs(u, f, radii);
    if (eps_list.empty()) eps_list = kDefaultEps;
    ConvergenceReport rep;
    rep.radii.assign(radii.begin(), radii.end());
    const std::vector<double> tail = truncation_tail(u, f);
    for (double v : tail) rep.truncation_tail_sup = std::max(rep.truncation_tail_sup, std::abs(v));
    std::vector<double> sup_component(u.modes().size(), 0.0);
    for (std::size_t m = 0; m < u.modes().size(); ++m)
        for (double v : u.component(m)) sup_component[m] = std::max(sup_component[m], std::abs(v));
    for (double r : radii) {
        const std::vector<double> ur = u.evaluate_at_nodes(r);
        double sup = 0.0;
        for (std::size_t q = 0; q < ur.size(); ++q) sup = std::max(sup, std::abs(f[q] - ur[q]));
        rep.sup_dev.push_back(sup);
        double bound = rep.truncation_tail_sup;
        for (std::size_t m = 0; m < u.modes().size(); ++m) bound += std::abs(1.0 - u.mode_value(m, r)) * sup_component[m];
        rep.triangle_bound.push_back(bound);
    }
    rep.eps_targets_met = eps_targets(radii, rep.sup_dev, eps_list);
    return rep;
}

ConvergenceReport l2_convergence_report(const HarmonicExtension& u, std::span<const double> f,
                                        std::span<const double> radii, std::span<const double> eps_list,
                                        double identity_tol) {
    check_inputs(u, f, radii);
    if (eps_list.empty()) eps_list = kDefaultEps;
    ConvergenceReport rep;
    rep.radii.assign(radii.begin(), radii.end());
    const SpectralBasis& b = u.basis();
    const std::vector<double> tail = truncation_tail(u, f);
    rep.truncation_tail_l2 = std::sqrt(b.inner(tail, tail));
    const double f_norm2 = b.inner(f, f);
    std::vector<double> energy(u.modes().size());
    for (std::size_t m = 0; m < energy.size(); ++m) energy[m] = u.coeffs().block_energy(b, static_cast<int>(m));
    // Energy of the discarded part, taken directly rather than as a difference of norms.
    const double tail_energy = rep.truncation_tail_l2 * rep.truncation_tail_l2;
    for (double r : radii) {
        const std::vector<double> ur = u.evaluate_at_nodes(r);
        std::vector<double> diff(ur.size());
        for (std::size_t q = 0; q < ur.size(); ++q) diff[q] = f[q] - ur[q];
        rep.l2_dev.push_back(std::sqrt(b.inner(diff, diff)));
        double s = tail_energy;
        for (std::size_t m = 0; m < energy.size(); ++m) {
            const double d = 1.0 - u.mode_value(m, r);
            s += d * d * energy[m];
        }
        rep.l2_dev_series.push_back(std::sqrt(s));
        rep.l2_identity_gap = std::max(rep.l2_identity_gap, std::abs(rep.l2_dev.back() - rep.l2_dev_series.back()));
    }
    rep.l2_identity_ok = rep.l2_identity_gap <= identity_tol * std::max(1.0, std::sqrt(f_norm2));
    if (!rep.l2_identity_ok)
        rep.notes.push_back("quadrature and series L2 deviations disagree by " + std::to_string(rep.l2_identity_gap) +
                            ": quadrature under-resolved");
    rep.eps_targets_met = eps_targets(radii, rep.l2_dev, eps_list);
    return rep;
}

ConvergenceReport convergence_report(const HarmonicExtension& u, std::span<const double> f,
                                     std::span<const double> radii, std::span<const double> eps_list) {
    ConvergenceReport rep = uniform_convergence_report(u, f, radii, eps_list);
    ConvergenceReport l2 = l2_convergence_report(u, f, radii, eps_list);
    rep.l2_dev = std::move(l2.l2_dev);
    rep.l2_dev_series = std::move(l2.l2_dev_series);
    rep.truncation_tail_l2 = l2.truncation_tail_l2;
    rep.l2_identity_gap = l2.l2_identity_gap;
    rep.l2_identity_ok = l2.l2_identity_ok;
    rep.notes.insert(rep.notes.end(), l2.notes.begin(), l2.notes.end());
    return rep;
}

}  // namespace warpcone
