#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace warpcone {

/// A point on the cross-section. Circle: theta is the angle. Round sphere:
/// theta is colatitude, azimuth the longitude. Mesh: theta holds the vertex
/// index and only node evaluation is supported.
struct AngularPoint {
    double theta = 0.0;
    double azimuth = 0.0;
};

enum class BasisKind { Circle, RoundSphere, Mesh };
std::string to_string(BasisKind kind);

/// One eigenvalue lambda^2 of -Delta_N with its eigenfunctions. `multiplicity`
/// is the true dimension of the eigenspace; `count` is the number of
/// evaluators actually carried (smaller only for zonal sphere bases).
struct ModeBlock {
    double lambda = 0.0;
    int multiplicity = 1;
    std::size_t first = 0;
    std::size_t count = 1;
};

/// Measure-orthonormal eigenbasis of the cross-section Laplacian together
/// with a quadrature rule on N. `values[f][q]` is function f at node q.
struct SpectralBasis {
    BasisKind kind = BasisKind::Circle;
    int dim_N = 1;
    bool zonal_only = false;
    std::vector<ModeBlock> blocks;
    std::vector<AngularPoint> nodes;
    std::vector<double> weights;
    std::vector<std::vector<double>> values;
    /// Fills out[f] with every basis function at an arbitrary point. Empty for meshes.
    std::function<void(AngularPoint, std::span<double>)> evaluate_all;
    std::vector<double> eigen_residuals;  // mesh only, one per function
    std::vector<std::string> notes;

    std::size_t function_count() const { return values.size(); }
    std::size_t node_count() const { return nodes.size(); }
    double inner(std::span<const double> a, std::span<const double> b) const;
};

/// Unit circle: lambda_m = m, cos(m t)/sqrt(pi), sin(m t)/sqrt(pi), 1/sqrt(2 pi).
/// Trapezoid quadrature with max(nodes, 4 M_max + 16) points.
SpectralBasis circle_basis(int M_max, int nodes = 0);

/// Round unit sphere S^(n-1): lambda_m^2 = m(m+n-2). Full real spherical
/// harmonics for n = 3 (Gauss-Legendre in cos(colatitude) x uniform
/// longitude, 2 M_max + 8 by twice that by default); zonal Gegenbauer
/// functions for n > 3 with the true multiplicities recorded.
SpectralBasis sphere_basis(int n, int M_max, int n_theta = 0);

struct MeshEdge {
    std::size_t u = 0;
    std::size_t v = 0;
    double weight = 0.0;
};

/// Discretised cross-section: symmetric weighted graph with lumped vertex
/// masses. The Laplacian is (L x)_i = (1/mass_i) sum_j w_ij (x_i - x_j).
struct MeshCrossSection {
    std::size_t vertex_count = 0;
    std::vector<MeshEdge> edges;
    std::vector<double> mass;

    /// Throws InputError on out-of-range vertices, self loops, non-positive
    /// weights or masses.
    void validate() const;
};

/// Cycle graph discretising a circle of the given circumference.
MeshCrossSection cycle_mesh(std::size_t vertices, double circumference = 6.283185307179586);

struct EigenControls {
    double tol = 1e-9;  // residual relative to the eigenvalue plus the inversion shift
    int max_restarts = 50;
    int krylov_dim = 40;
};

/// Smallest M_max + 1 eigenpairs (extended to complete the last degenerate
/// cluster) by deflated shift-invert Lanczos with full reorthogonalisation
/// and explicit Rayleigh-Ritz projection. Throws
/// EvaluationError when a pair fails to converge within the restart budget.
SpectralBasis mesh_basis(const MeshCrossSection& mesh, int M_max, const EigenControls& ctrl = {});
/// Applies the measure-weighted mesh Laplacian (positive semidefinite sign).
std::vector<double> mesh_apply(const MeshCrossSection& mesh, std::span<const double> x);

/// Coefficients c_f for every basis function; `truncation` is the largest
/// block index M kept by the extension.
struct CoefficientTable {
    std::vector<double> c;
    int truncation = 0;
    double l2_norm_f = 0.0;

    double block_energy(const SpectralBasis& basis, int m) const;
    double truncated_energy(const SpectralBasis& basis) const;
};

/// c_f = <f, f_f> under the basis quadrature. Throws InputError on sample
/// count mismatch or M out of range.
CoefficientTable project(std::span<const double> f, const SpectralBasis& basis, int M);

/// Sum of c_f f_f at the nodes over blocks 0..M.
std::vector<double> synthesize(const CoefficientTable& coeffs, const SpectralBasis& basis, int M);

/// Delta_N applied spectrally: project, scale block m by -lambda_m^2, synthesize.
std::vector<double> apply_laplacian(std::span<const double> f, const SpectralBasis& basis);

/// Smallest M with tail energy beyond M at most rel_tol * ||f||^2.
int auto_truncation(const CoefficientTable& coeffs, const SpectralBasis& basis, double rel_tol = 1e-12);

}  // namespace warpcone
