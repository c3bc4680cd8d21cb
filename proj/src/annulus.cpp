#include <Eigen/IterativeLinearSolvers>
#include <Eigen/Sparse>
#include <cmath>
#include <numbers>

#include "warpcone/error.hpp"
#include "warpcone/extension.hpp"

namespace warpcone {

AnnulusSolution annulus_oracle(const WarpingProfile& p, const std::function<double(double)>& f, double R_outer,
                               int n_r, int n_theta, double tol) {
    if (!(R_outer > 0.0) || n_r < 2 || n_theta < 3) throw InputError("annulus_oracle: invalid grid");
    AnnulusSolution sol;
    sol.R_outer = R_outer;
    const double h = R_outer / n_r;
    const double k = 2.0 * std::numbers::pi / n_theta;
    for (int i = 0; i <= n_r; ++i) sol.r.push_back(i * h);
    for (int j = 0; j < n_theta; ++j) sol.theta.push_back(j * k);

    // Unknowns: cone point, then rings 1..n_r-1.
    const auto T = static_cast<Eigen::Index>(n_theta);
    const Eigen::Index N = 1 + static_cast<Eigen::Index>(n_r - 1) * T;
    auto index = [T](int i, int j) { return 1 + static_cast<Eigen::Index>(i - 1) * T + j; };
    std::vector<Eigen::Triplet<double>> entries;
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(N);

    // Mean-value closure at the cone point.
    entries.emplace_back(0, 0, 1.0);
    for (int j = 0; j < n_theta; ++j) entries.emplace_back(0, index(1, j), -1.0 / n_theta);

    for (int i = 1; i < n_r; ++i) {
        const double r = i * h;
        const double L = p.log_derivative(r);
        const double inv = p.reciprocal(r);
        // Rows scaled by h^2.
        const double lower = 1.0 - 0.5 * h * L;
        const double upper = 1.0 + 0.5 * h * L;
        const double ang = h * h * inv * inv / (k * k);
        for (int j = 0; j < n_theta; ++j) {
            const Eigen::Index row = index(i, j);
            entries.emplace_back(row, row, -2.0 - 2.0 * ang);
            entries.emplace_back(row, index(i, (j + 1) % n_theta), ang);
            entries.emplace_back(row, index(i, (j + n_theta - 1) % n_theta), ang);
            if (i == 1)
                entries.emplace_back(row, 0, lower);
            else
                entries.emplace_back(row, index(i - 1, j), lower);
            if (i + 1 == n_r)
                rhs[row] -= upper * f(sol.theta[static_cast<std::size_t>(j)]);
            else
                entries.emplace_back(row, index(i + 1, j), upper);
        }
    }
    Eigen::SparseMatrix<double, Eigen::RowMajor> A(N, N);
    A.setFromTriplets(entries.begin(), entries.end());

    Eigen::BiCGSTAB<Eigen::SparseMatrix<double, Eigen::RowMajor>, Eigen::IncompleteLUT<double>> solver;
    solver.preconditioner().setDroptol(1e-6);
    solver.preconditioner().setFillfactor(20);
    solver.setTolerance(tol);
    solver.setMaxIterations(20000);
    solver.compute(A);
    if (solver.info() != Eigen::Success) throw EvaluationError("annulus_oracle: preconditioner setup failed");
    const Eigen::VectorXd x = solver.solve(rhs);
    if (solver.info() != Eigen::Success) throw EvaluationError("annulus_oracle: BiCGSTAB did not converge");
    sol.iterations = static_cast<int>(solver.iterations());
    const double rhs_norm = rhs.norm();
    sol.relative_residual = rhs_norm > 0.0 ? (A * x - rhs).norm() / rhs_norm : (A * x).norm();

    sol.u.assign(static_cast<std::size_t>(n_r + 1) * static_cast<std::size_t>(n_theta), 0.0);
    for (int j = 0; j < n_theta; ++j) {
        sol.u[static_cast<std::size_t>(j)] = x[0];
        sol.u[static_cast<std::size_t>(n_r) * n_theta + j] = f(sol.theta[static_cast<std::size_t>(j)]);
    }
    for (int i = 1; i < n_r; ++i)
        for (int j = 0; j < n_theta; ++j)
            sol.u[static_cast<std::size_t>(i) * n_theta + j] = x[index(i, j)];
    return sol;
}

}  // namespace warpcone
