#include "warpcone/spectrum.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "warpcone/error.hpp"
#include "warpcone/quadrature.hpp"

namespace warpcone {

std::string to_string(BasisKind kind) {
    switch (kind) {
        case BasisKind::Circle: return "circle";
        case BasisKind::RoundSphere: return "sphere";
        case BasisKind::Mesh: return "mesh";
    }
    return "unknown";
}

double SpectralBasis::inner(std::span<const double> a, std::span<const double> b) const {
    double s = 0.0;
    for (std::size_t q = 0; q < weights.size(); ++q) s += weights[q] * a[q] * b[q];
    return s;
}

namespace {

void fill_values(SpectralBasis& basis) {
    const std::size_t nf = basis.blocks.back().first + basis.blocks.back().count;
    basis.values.assign(nf, std::vector<double>(basis.nodes.size(), 0.0));
    std::vector<double> buf(nf);
    for (std::size_t q = 0; q < basis.nodes.size(); ++q) {
        basis.evaluate_all(basis.nodes[q], buf);
        for (std::size_t f = 0; f < nf; ++f) basis.values[f][q] = buf[f];
    }
}

}  // namespace

SpectralBasis circle_basis(int M_max, int nodes) {
    if (M_max < 0) throw InputError("circle_basis: M_max must be nonnegative");
    SpectralBasis basis;
    basis.kind = BasisKind::Circle;
    basis.dim_N = 1;
    std::size_t first = 0;
    for (int m = 0; m <= M_max; ++m) {
        const std::size_t count = m == 0 ? 1 : 2;
        basis.blocks.push_back({static_cast<double>(m), static_cast<int>(count), first, count});
        first += count;
    }
    const int q = std::max(nodes, 4 * M_max + 16);
    const double two_pi = 2.0 * std::numbers::pi;
    for (int i = 0; i < q; ++i) {
        basis.nodes.push_back({two_pi * i / q, 0.0});
        basis.weights.push_back(two_pi / q);
    }
    const double c0 = 1.0 / std::sqrt(two_pi);
    const double cm = 1.0 / std::sqrt(std::numbers::pi);
    basis.evaluate_all = [M_max, c0, cm](AngularPoint p, std::span<double> out) {
        out[0] = c0;
        for (int m = 1; m <= M_max; ++m) {
            out[2 * m - 1] = cm * std::cos(m * p.theta);
            out[2 * m] = cm * std::sin(m * p.theta);
        }
    };
    fill_values(basis);
    return basis;
}

namespace {

// Normalised associated Legendre functions Pbar_l^j(cos t) for l, j <= L,
// scaled so that Pbar_l^0 is the zonal spherical harmonic on S^2.
void legendre_table(int L, double x, double s, std::vector<double>& p) {
    auto idx = [](int l, int j) { return static_cast<std::size_t>(l * (l + 1) / 2 + j); };
    p.assign(static_cast<std::size_t>((L + 1) * (L + 2) / 2), 0.0);
    p[idx(0, 0)] = 1.0 / std::sqrt(4.0 * std::numbers::pi);
    for (int j = 1; j <= L; ++j)
        p[idx(j, j)] = std::sqrt((2.0 * j + 1.0) / (2.0 * j)) * s * p[idx(j - 1, j - 1)];
    for (int j = 0; j < L; ++j) p[idx(j + 1, j)] = std::sqrt(2.0 * j + 3.0) * x * p[idx(j, j)];
    for (int j = 0; j <= L; ++j) {
        for (int l = j + 2; l <= L; ++l) {
            const double a = std::sqrt((4.0 * l * l - 1.0) / (static_cast<double>(l) * l - static_cast<double>(j) * j));
            const double b = std::sqrt((static_cast<double>(l - 1) * (l - 1) - static_cast<double>(j) * j) /
                                       (4.0 * (l - 1.0) * (l - 1.0) - 1.0));
            p[idx(l, j)] = a * (x * p[idx(l - 1, j)] - b * p[idx(l - 2, j)]);
        }
    }
}

double sphere_area(int k) {  // |S^k|
    return 2.0 * std::pow(std::numbers::pi, 0.5 * (k + 1)) / std::tgamma(0.5 * (k + 1));
}

}  // namespace

SpectralBasis sphere_basis(int n, int M_max, int n_theta) {
    if (n < 3) throw InputError("sphere_basis: n must be at least 3");
    if (M_max < 0) throw InputError("sphere_basis: M_max must be nonnegative");
    SpectralBasis basis;
    basis.kind = BasisKind::RoundSphere;
    basis.dim_N = n - 1;
    basis.zonal_only = n > 3;
    std::size_t first = 0;
    for (int m = 0; m <= M_max; ++m) {
        // d_m = C(m+n-2, m) (2m+n-2)/(m+n-2); d_0 = 1.
        double mult = 1.0;
        if (m > 0) {
            double binom = 1.0;
            for (int i = 1; i <= m; ++i) binom = binom * (n - 2 + i) / i;
            mult = binom * (2.0 * m + n - 2.0) / (m + n - 2.0);
        }
        const std::size_t count = n == 3 ? static_cast<std::size_t>(2 * m + 1) : 1;
        basis.blocks.push_back({std::sqrt(static_cast<double>(m) * (m + n - 2)),
                                static_cast<int>(std::lround(mult)), first, count});
        first += count;
    }

    if (n == 3) {
        const int nt = n_theta > 0 ? n_theta : 2 * M_max + 8;
        const int np = 2 * nt;
        const GaussRule rule = gauss_legendre(nt);
        for (int i = 0; i < nt; ++i) {
            for (int k = 0; k < np; ++k) {
                basis.nodes.push_back({std::acos(rule.nodes[i]), 2.0 * std::numbers::pi * k / np});
                basis.weights.push_back(rule.weights[i] * 2.0 * std::numbers::pi / np);
            }
        }
        basis.evaluate_all = [M_max](AngularPoint p, std::span<double> out) {
            std::vector<double> leg;
            legendre_table(M_max, std::cos(p.theta), std::sin(p.theta), leg);
            std::size_t f = 0;
            for (int l = 0; l <= M_max; ++l) {
                const std::size_t row = static_cast<std::size_t>(l * (l + 1) / 2);
                out[f++] = leg[row];
                for (int j = 1; j <= l; ++j) {
                    out[f++] = std::numbers::sqrt2 * leg[row + j] * std::cos(j * p.azimuth);
                    out[f++] = std::numbers::sqrt2 * leg[row + j] * std::sin(j * p.azimuth);
                }
            }
        };
    } else {
        // Zonal functions of the colatitude: normalised Gegenbauer C_m^alpha(cos t).
        const double alpha = 0.5 * (n - 2);
        const int nt = n_theta > 0 ? n_theta : 2 * M_max + 16;
        const GaussRule rule = gauss_legendre(nt);
        const double area = sphere_area(n - 2);
        for (int i = 0; i < nt; ++i) {
            const double t = 0.5 * std::numbers::pi * (rule.nodes[i] + 1.0);
            basis.nodes.push_back({t, 0.0});
            basis.weights.push_back(0.5 * std::numbers::pi * rule.weights[i] * area * std::pow(std::sin(t), n - 2));
        }
        std::vector<double> inv_norm(M_max + 1);
        for (int m = 0; m <= M_max; ++m) {
            const double log_norm2 = std::log(area * std::numbers::pi) + (1.0 - 2.0 * alpha) * std::log(2.0) +
                                     std::lgamma(m + 2.0 * alpha) - std::lgamma(m + 1.0) - std::log(m + alpha) -
                                     2.0 * std::lgamma(alpha);
            inv_norm[m] = std::exp(-0.5 * log_norm2);
        }
        basis.evaluate_all = [M_max, alpha, inv_norm](AngularPoint p, std::span<double> out) {
            const double x = std::cos(p.theta);
            double c_prev = 1.0, c = 2.0 * alpha * x;
            out[0] = inv_norm[0];
            if (M_max >= 1) out[1] = c * inv_norm[1];
            for (int m = 2; m <= M_max; ++m) {
                const double next = (2.0 * x * (m + alpha - 1.0) * c - (m + 2.0 * alpha - 2.0) * c_prev) / m;
                c_prev = c;
                c = next;
                out[m] = c * inv_norm[m];
            }
        };
        basis.notes.push_back("zonal-only basis: one evaluator per eigenvalue");
    }
    fill_values(basis);
    return basis;
}

void MeshCrossSection::validate() const {
    if (vertex_count == 0) throw InputError("mesh has no vertices");
    if (mass.size() != vertex_count) throw InputError("mesh vertex measure count does not match vertex count");
    for (double m : mass)
        if (!(m > 0.0) || !std::isfinite(m)) throw InputError("mesh vertex measures must be positive");
    for (const auto& e : edges) {
        if (e.u >= vertex_count || e.v >= vertex_count) throw InputError("mesh edge references a missing vertex");
        if (e.u == e.v) throw InputError("mesh edge is a self loop");
        if (!(e.weight > 0.0) || !std::isfinite(e.weight)) throw InputError("mesh edge weights must be positive");
    }
}

MeshCrossSection cycle_mesh(std::size_t vertices, double circumference) {
    if (vertices < 3) throw InputError("cycle_mesh: need at least 3 vertices");
    MeshCrossSection mesh;
    mesh.vertex_count = vertices;
    const double h = circumference / static_cast<double>(vertices);
    for (std::size_t i = 0; i < vertices; ++i) mesh.edges.push_back({i, (i + 1) % vertices, 1.0 / h});
    mesh.mass.assign(vertices, h);
    return mesh;
}

std::vector<double> mesh_apply(const MeshCrossSection& mesh, std::span<const double> x) {
    std::vector<double> y(mesh.vertex_count, 0.0);
    for (const auto& e : mesh.edges) {
        const double d = e.weight * (x[e.u] - x[e.v]);
        y[e.u] += d;
        y[e.v] -= d;
    }
    for (std::size_t i = 0; i < y.size(); ++i) y[i] /= mesh.mass[i];
    return y;
}

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

void orthogonalize(std::vector<double>& v, const std::vector<std::vector<double>>& against) {
    // Two passes of classical Gram-Schmidt.
    for (int pass = 0; pass < 2; ++pass)
        for (const auto& q : against) {
            const double c = dot(v, q);
            for (std::size_t i = 0; i < v.size(); ++i) v[i] -= c * q[i];
        }
}

double normalize(std::vector<double>& v) {
    const double nrm = std::sqrt(dot(v, v));
    if (nrm > 0.0)
        for (double& x : v) x /= nrm;
    return nrm;
}

struct RitzPair {
    double value;
    std::vector<double> vector;
    double residual;
};

}  // namespace

SpectralBasis mesh_basis(const MeshCrossSection& mesh, int M_max, const EigenControls& ctrl) {
    mesh.validate();
    const std::size_t V = mesh.vertex_count;
    if (M_max < 0 || static_cast<std::size_t>(M_max) >= V)
        throw InputError("mesh_basis: M_max must be below the vertex count");

    // Symmetric form S = D^{-1/2} K D^{-1/2} with D the vertex measures.
    std::vector<double> inv_sqrt_mass(V);
    for (std::size_t i = 0; i < V; ++i) inv_sqrt_mass[i] = 1.0 / std::sqrt(mesh.mass[i]);
    auto apply_sym = [&](const std::vector<double>& x) {
        std::vector<double> y(V, 0.0);
        for (const auto& e : mesh.edges) {
            const double d = e.weight * (x[e.u] * inv_sqrt_mass[e.u] - x[e.v] * inv_sqrt_mass[e.v]);
            y[e.u] += d;
            y[e.v] -= d;
        }
        for (std::size_t i = 0; i < V; ++i) y[i] *= inv_sqrt_mass[i];
        return y;
    };

    // Shift-invert: Lanczos runs on (S + sigma I)^-1, whose largest
    // eigenvalues are the wanted smallest ones of S, well separated.
    std::vector<double> degree(V, 0.0);
    for (const auto& e : mesh.edges) {
        degree[e.u] += e.weight;
        degree[e.v] += e.weight;
    }
    double op_norm = 0.0;  // Gershgorin bound on the spectrum of S
    for (std::size_t i = 0; i < V; ++i) op_norm = std::max(op_norm, 2.0 * degree[i] / mesh.mass[i]);
    const double sigma = 1e-4 * std::max(op_norm, 1e-300);
    std::vector<Eigen::Triplet<double>> trip;
    for (std::size_t i = 0; i < V; ++i) {
        const auto ii = static_cast<int>(i);
        trip.emplace_back(ii, ii, degree[i] / mesh.mass[i] + sigma);
    }
    for (const auto& e : mesh.edges) {
        const double w = -e.weight * inv_sqrt_mass[e.u] * inv_sqrt_mass[e.v];
        trip.emplace_back(static_cast<int>(e.u), static_cast<int>(e.v), w);
        trip.emplace_back(static_cast<int>(e.v), static_cast<int>(e.u), w);
    }
    Eigen::SparseMatrix<double> shifted(static_cast<int>(V), static_cast<int>(V));
    shifted.setFromTriplets(trip.begin(), trip.end());
    const Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> factor(shifted);
    if (factor.info() != Eigen::Success) throw EvaluationError("mesh_basis: shifted Laplacian factorisation failed");
    auto apply_inverse = [&](const std::vector<double>& x) {
        const Eigen::VectorXd sol = factor.solve(Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(V)));
        return std::vector<double>(sol.data(), sol.data() + V);
    };

    std::vector<std::vector<double>> locked;
    std::vector<RitzPair> pairs;
    std::mt19937_64 rng(0x5eed);

    auto find_next = [&]() -> RitzPair {
        std::vector<double> start(V);
        for (double& x : start) x = static_cast<double>(rng() >> 11) * 0x1.0p-53 - 0.5;
        orthogonalize(start, locked);
        normalize(start);
        RitzPair best{0.0, {}, std::numeric_limits<double>::infinity()};
        for (int restart = 0; restart <= ctrl.max_restarts; ++restart) {
            const std::size_t kmax = std::min<std::size_t>(V - locked.size(), static_cast<std::size_t>(ctrl.krylov_dim));
            std::vector<std::vector<double>> Q{start}, AQ;
            for (std::size_t j = 0; j < kmax; ++j) {
                std::vector<double> w = apply_inverse(Q[j]);
                AQ.push_back(w);
                const double w_norm = std::sqrt(dot(w, w));
                // Repeat Gram-Schmidt while it still removes most of the vector.
                double before = w_norm, b = 0.0;
                for (int sweep = 0; sweep < 4; ++sweep) {
                    orthogonalize(w, locked);
                    orthogonalize(w, Q);
                    b = std::sqrt(dot(w, w));
                    if (b > 0.5 * before) break;
                    before = b;
                }
                // Invariant subspace reached: what is left of w is rounding noise.
                if (j + 1 == kmax || b <= 1e-12 / sigma) break;
                normalize(w);
                Q.push_back(std::move(w));
            }
            // Rayleigh-Ritz on the explicit projection, robust to the loss of
            // the three-term recurrence once the Krylov space is exhausted.
            const std::size_t k = Q.size();
            Eigen::MatrixXd H(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
            for (std::size_t a = 0; a < k; ++a)
                for (std::size_t c = 0; c <= a; ++c) {
                    const double h = 0.5 * (dot(Q[a], AQ[c]) + dot(Q[c], AQ[a]));
                    H(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(c)) = h;
                    H(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(a)) = h;
                }
            const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H);
            if (es.info() != Eigen::Success) throw EvaluationError("mesh_basis: projected eigenproblem failed");
            std::vector<double> y(V, 0.0);
            for (std::size_t j = 0; j < k; ++j) {
                const double zj = es.eigenvectors()(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k - 1));
                for (std::size_t i = 0; i < V; ++i) y[i] += zj * Q[j][i];
            }
            orthogonalize(y, locked);
            normalize(y);
            const double theta = dot(apply_sym(y), y);
            std::vector<double> res = apply_sym(y);
            for (std::size_t i = 0; i < V; ++i) res[i] -= theta * y[i];
            const double rn = std::sqrt(dot(res, res));
            best = {theta, y, rn};
            if (rn <= ctrl.tol * (std::abs(theta) + sigma)) return best;
            start = std::move(y);
        }
        throw EvaluationError("mesh_basis: eigenpair " + std::to_string(pairs.size()) +
                              " did not converge, residual " + std::to_string(best.residual));
    };

    auto same_cluster = [](double a, double b) {
        const double scale = std::max(std::abs(a), std::abs(b));
        return std::abs(a - b) <= 1e-8 * scale || (std::abs(a) < 1e-10 && std::abs(b) < 1e-10);
    };

    while (pairs.size() < static_cast<std::size_t>(M_max) + 1) {
        pairs.push_back(find_next());
        locked.push_back(pairs.back().vector);
    }
    // Complete the last degenerate cluster so multiplicity blocks are whole.
    while (locked.size() < V) {
        RitzPair extra = find_next();
        if (!same_cluster(extra.value, pairs.back().value)) break;
        pairs.push_back(std::move(extra));
        locked.push_back(pairs.back().vector);
    }
    std::stable_sort(pairs.begin(), pairs.end(), [](const RitzPair& a, const RitzPair& b) { return a.value < b.value; });

    SpectralBasis basis;
    basis.kind = BasisKind::Mesh;
    for (std::size_t i = 0; i < V; ++i) {
        basis.nodes.push_back({static_cast<double>(i), 0.0});
        basis.weights.push_back(mesh.mass[i]);
    }
    for (std::size_t f = 0; f < pairs.size(); ++f) {
        const auto& pr = pairs[f];
        std::vector<double> v(V);
        for (std::size_t i = 0; i < V; ++i) v[i] = pr.vector[i] * inv_sqrt_mass[i];
        // Deterministic sign: largest-magnitude component positive.
        const auto big = std::max_element(v.begin(), v.end(), [](double a, double b) { return std::abs(a) < std::abs(b); });
        if (*big < 0.0)
            for (double& x : v) x = -x;
        // Residual of the measure-weighted operator: ||L v - mu v|| relative to ||v|| (measure norms).
        const std::vector<double> Lv = mesh_apply(mesh, v);
        double rr = 0.0, vv = 0.0;
        for (std::size_t i = 0; i < V; ++i) {
            const double d = Lv[i] - pr.value * v[i];
            rr += mesh.mass[i] * d * d;
            vv += mesh.mass[i] * v[i] * v[i];
        }
        basis.eigen_residuals.push_back(std::sqrt(rr / vv));
        basis.values.push_back(std::move(v));
        if (f == 0 || !same_cluster(pr.value, pairs[f - 1].value)) {
            basis.blocks.push_back({std::sqrt(std::max(pr.value, 0.0)), 1, f, 1});
        } else {
            basis.blocks.back().multiplicity += 1;
            basis.blocks.back().count += 1;
        }
    }
    basis.blocks.front().lambda = 0.0;
    if (basis.blocks.front().multiplicity > 1)
        basis.notes.push_back("lambda = 0 has multiplicity " + std::to_string(basis.blocks.front().multiplicity) +
                              ": mesh is disconnected");
    if (std::sqrt(std::max(pairs.front().value, 0.0)) > 1e-6)
        basis.notes.push_back("smallest eigenvalue is not zero");
    return basis;
}

double CoefficientTable::block_energy(const SpectralBasis& basis, int m) const {
    const ModeBlock& b = basis.blocks.at(static_cast<std::size_t>(m));
    double s = 0.0;
    for (std::size_t f = b.first; f < b.first + b.count; ++f) s += c[f] * c[f];
    return s;
}

double CoefficientTable::truncated_energy(const SpectralBasis& basis) const {
    double s = 0.0;
    for (int m = 0; m <= truncation; ++m) s += block_energy(basis, m);
    return s;
}

CoefficientTable project(std::span<const double> f, const SpectralBasis& basis, int M) {
    if (f.size() != basis.node_count())
        throw InputError("project: " + std::to_string(f.size()) + " samples for " +
                         std::to_string(basis.node_count()) + " quadrature nodes");
    if (M < 0 || static_cast<std::size_t>(M) >= basis.blocks.size())
        throw InputError("project: truncation M out of range");
    CoefficientTable table;
    table.truncation = M;
    table.c.resize(basis.function_count());
    for (std::size_t k = 0; k < basis.function_count(); ++k) table.c[k] = basis.inner(f, basis.values[k]);
    table.l2_norm_f = std::sqrt(basis.inner(f, f));
    return table;
}

std::vector<double> synthesize(const CoefficientTable& coeffs, const SpectralBasis& basis, int M) {
    std::vector<double> out(basis.node_count(), 0.0);
    for (int m = 0; m <= M; ++m) {
        const ModeBlock& b = basis.blocks.at(static_cast<std::size_t>(m));
        for (std::size_t f = b.first; f < b.first + b.count; ++f)
            for (std::size_t q = 0; q < out.size(); ++q) out[q] += coeffs.c[f] * basis.values[f][q];
    }
    return out;
}

std::vector<double> apply_laplacian(std::span<const double> f, const SpectralBasis& basis) {
    const int M = static_cast<int>(basis.blocks.size()) - 1;
    CoefficientTable coeffs = project(f, basis, M);
    for (const ModeBlock& b : basis.blocks)
        for (std::size_t k = b.first; k < b.first + b.count; ++k) coeffs.c[k] *= -b.lambda * b.lambda;
    return synthesize(coeffs, basis, M);
}

int auto_truncation(const CoefficientTable& coeffs, const SpectralBasis& basis, double rel_tol) {
    const double total = coeffs.l2_norm_f * coeffs.l2_norm_f;
    const int last = static_cast<int>(basis.blocks.size()) - 1;
    double tail = 0.0;
    for (int m = 0; m <= last; ++m) tail += coeffs.block_energy(basis, m);
    tail = std::max(0.0, total - tail);  // energy outside the basis
    for (int m = last; m >= 0; --m) {
        const double e = coeffs.block_energy(basis, m);
        if (tail + e > rel_tol * total) return m;
        tail += e;
    }
    return 0;
}

}  // namespace warpcone
