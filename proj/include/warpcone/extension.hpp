#pragma once

#include <cstddef>
#include <functional>
#include <utility>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "warpcone/radial.hpp"
#include "warpcone/spectrum.hpp"
#include "warpcone/warping.hpp"

namespace warpcone {

struct ExtensionControls {
    RadialControls radial;
    /// Skip the solvability checks and accept non-normalizable modes, which
    /// are then used with their raw (seed) normalisation.
    bool diagnostic = false;
    /// Solve the distinct modes concurrently. Results do not depend on it.
    bool parallel = true;
};

/// Truncated separated-variables harmonic function
///   u(r, w) = sum_{m <= M} s_m phi_m(r) sum_k c_{m,k} f_{m,k}(w)
/// with s_m = 1 unless the extension was rescaled to an outer radius.
class HarmonicExtension {
public:
    const WarpingProfile& profile() const { return profile_; }
    int dimension() const { return n_; }
    const SpectralBasis& basis() const { return *basis_; }
    const CoefficientTable& coeffs() const { return coeffs_; }
    int truncation() const { return coeffs_.truncation; }
    /// One mode per block 0..M.
    const std::vector<RadialMode>& modes() const { return modes_; }
    bool diagnostic() const { return diagnostic_; }
    /// Largest radius every mode covers.
    double r_max() const { return r_max_; }
    const std::vector<std::string>& notes() const { return notes_; }

    /// s_m phi_m(r) for block m, raw values for non-normalizable modes.
    double mode_value(std::size_t m, double r) const;
    double mode_derivative(std::size_t m, double r) const;

    /// u(r, w) at an arbitrary point (circle and sphere bases).
    double evaluate(double r, AngularPoint w) const;
    /// u(r, .) at every quadrature node.
    std::vector<double> evaluate_at_nodes(double r) const;
    double evaluate_at_node(double r, std::size_t q) const;

    /// Copy whose modes are divided by their value at R_outer, so that
    /// u(R_outer, .) reproduces the truncated data exactly.
    HarmonicExtension rescaled_at(double R_outer) const;

    /// Mode-m component sum_k c_{m,k} f_{m,k} at every node.
    const std::vector<double>& component(std::size_t m) const { return components_.at(m); }

private:
    friend HarmonicExtension build_extension(const WarpingProfile&, int, std::shared_ptr<const SpectralBasis>,
                                             const CoefficientTable&, const ExtensionControls&);

    explicit HarmonicExtension(WarpingProfile p) : profile_(std::move(p)) {}
    void check_radius(double r) const;

    WarpingProfile profile_;
    int n_ = 2;
    std::shared_ptr<const SpectralBasis> basis_;
    CoefficientTable coeffs_;
    std::vector<RadialMode> modes_;
    std::vector<double> scale_;
    std::vector<std::vector<double>> components_;
    bool diagnostic_ = false;
    double r_max_ = 0.0;
    std::vector<std::string> notes_;
};

/// Assembles the extension from coefficients. Distinct lambda values are
/// solved once and shared across a block's eigenfunctions. Throws
/// HypothesisError when the Milnor integral does not converge, when no
/// monotone threshold exists for dim N >= 2, or when a mode is not
/// normalizable, unless `ctrl.diagnostic` is set.
HarmonicExtension build_extension(const WarpingProfile& p, int n, std::shared_ptr<const SpectralBasis> basis,
                                  const CoefficientTable& coeffs, const ExtensionControls& ctrl = {});

/// Projects nodal samples of f and assembles the extension with truncation M.
HarmonicExtension build_extension(const WarpingProfile& p, int n, std::shared_ptr<const SpectralBasis> basis,
                                  std::span<const double> f, int M, const ExtensionControls& ctrl = {});

struct ResidualTable {
    std::vector<double> radii;
    std::vector<double> residual;  // sup over nodes at each radius
    double max = 0.0;
};

/// Delta u at the nodes for each radius: radial derivatives of every mode by
/// fourth-order finite differences of width 0.01 r on the interpolant,
/// Delta_N applied spectrally. Throws InputError when a stencil leaves
/// (2 r0, r_max).
ResidualTable laplacian_residual(const HarmonicExtension& u, std::span<const double> radii);

struct ConvergenceReport {
    std::vector<double> radii;
    std::vector<double> sup_dev;        // max over nodes of |f - u(r, .)|
    std::vector<double> l2_dev;         // quadrature norm of f - u(r, .)
    std::vector<double> l2_dev_series;  // orthogonality series evaluation
    std::vector<double> triangle_bound; // sum_m (1 - phi_m(r)) L_m + truncation tail
    double truncation_tail_sup = 0.0;   // nodal sup of the discarded expansion tail
    double truncation_tail_l2 = 0.0;
    double l2_identity_gap = 0.0;       // max |l2_dev - l2_dev_series|
    bool l2_identity_ok = true;
    /// epsilon -> smallest probed radius from which the deviation stays <= epsilon.
    std::map<double, std::optional<double>> eps_targets_met;
    std::vector<std::string> notes;
};

/// Sup-norm deviation from the nodal data f, the triangle-inequality bound,
/// and epsilon targets (default 1e-2 and 1e-4).
ConvergenceReport uniform_convergence_report(const HarmonicExtension& u, std::span<const double> f,
                                             std::span<const double> radii,
                                             std::span<const double> eps_list = {});

/// L2 deviation evaluated by quadrature and by the orthogonality series,
/// flagged when the two disagree by more than `identity_tol`.
ConvergenceReport l2_convergence_report(const HarmonicExtension& u, std::span<const double> f,
                                        std::span<const double> radii, std::span<const double> eps_list = {},
                                        double identity_tol = 1e-9);

/// Both reports merged over the same radii.
ConvergenceReport convergence_report(const HarmonicExtension& u, std::span<const double> f,
                                     std::span<const double> radii, std::span<const double> eps_list = {});

struct AnnulusSolution {
    double R_outer = 0.0;
    std::vector<double> r;      // 0 = r_0 < r_1 < ... < r_{N_r} = R_outer
    std::vector<double> theta;  // uniform, N_theta points
    std::vector<double> u;      // u[i * N_theta + j], row i = 0 is the cone point
    int iterations = 0;
    double relative_residual = 0.0;

    double at(std::size_t i, std::size_t j) const { return u[i * theta.size() + j]; }
};

/// Second-order finite differences for the cone Laplacian with circle
/// cross-section on {r <= R_outer}: Dirichlet data f at R_outer and the
/// cone-point value closed by the mean of the first ring. Solved by
/// preconditioned BiCGSTAB to the given relative residual. Throws
/// EvaluationError when the solver fails.
AnnulusSolution annulus_oracle(const WarpingProfile& p, const std::function<double(double)>& f, double R_outer,
                               int n_r, int n_theta, double tol = 1e-10);

}  // namespace warpcone
