#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "pbill/greens.hpp"
#include "pbill/solver.hpp"

namespace pbill {

/// Eigen-decomposition of diag(d) + w z z^T for ascending d.
struct RankOneUpdate {
    Eigen::VectorXd eigenvalues;   // ascending
    Eigen::MatrixXd eigenvectors;  // orthonormal columns
    std::size_t deflated = 0;      // coordinates left untouched or rotated out
    bool extended_precision = false;
};

/// Roots of the secular equation by bisection in interlacing brackets, with
/// deflation of negligible z components and of (near-)coincident d entries.
/// Throws NumericalError if a bracket is violated even in extended precision.
RankOneUpdate rank_one_update(const Eigen::VectorXd& d, const Eigen::VectorXd& z, double w);

/// Sigma^(0)(omega) = T^(0) + sum_n w_n v_n v_n^T with the plain truncated series.
struct SigmaDecomposition {
    double omega = 0.0;
    std::size_t n_max = 0;
    Eigen::VectorXd unperturbed_diag;     // d_i^(0) = counterterm_i - 1/vbar_i, scatterer order
    std::vector<std::size_t> order;       // unperturbed_diag[order[k]] is ascending in k
    std::vector<double> weights;          // 1 / (omega - e_n); the vectors v_n are the cached phi_n(x_i)
};

SigmaDecomposition decompose_sigma(const SeriesTermSource& src, const std::vector<double>& vbar_inv, double omega,
                                   std::size_t n_max);

/// T^(0) + sum_{n < n_max} w_n v_n v_n^T assembled densely, for cross-checks.
Eigen::MatrixXd assemble_sigma(const SeriesTermSource& src, const SigmaDecomposition& dec);

/// State after absorbing the first k rank-one terms.
struct ReductionState {
    std::size_t k = 0;
    Eigen::VectorXd diag;  // d^(k), ascending
    /// Accumulated orthogonal transform; column j is the j-th eigenvector of
    /// Sigma^(k) in scatterer coordinates, so phi_n^(k) = q^T v_n.
    Eigen::MatrixXd q;
};

struct StepCheck {
    bool interlaced = true;
    double orthogonality_defect = 0.0;  // max |Omega^T Omega - 1|
    double trace_defect = 0.0;          // |sum d^(k) - sum d^(k-1) - w |z|^2|, relative to the scale
};

ReductionState initial_state(const SigmaDecomposition& dec);

/// Absorbs term k = state.k (zero-based mode index) at energy omega.
ReductionState reduce_step(const ReductionState& state, const SeriesTermSource& src, double omega,
                           StepCheck* check = nullptr);

struct ReductionSummary {
    Eigen::VectorXd eigenvalues;  // ascending
    std::size_t steps = 0;
    std::size_t interlacing_violations = 0;
    double max_orthogonality_defect = 0.0;
    double max_trace_defect = 0.0;
    std::size_t extended_precision_steps = 0;
};

/// Eigenvalues of Sigma^(0)(omega) after all n_max steps.
ReductionSummary reduce_full(const SeriesTermSource& src, const std::vector<double>& vbar_inv, double omega,
                             std::size_t n_max, bool check_steps = false);

struct ApproximateSigma {
    double omega = 0.0;
    std::vector<std::size_t> retained;  // mode indices kept in V-bar, ascending
    Eigen::VectorXd dbar;               // diagonal with every discarded term folded in
    Eigen::VectorXd eigenvalues;        // of diag(dbar) + V-bar, via the same reduction
    double log_law = 0.0;               // (M / 2 pi) ln(omega / Lambda)
    Eigen::VectorXd closed_form_diag;   // log_law - 1/vbar_i
};

/// Keeps the near_window modes closest to omega as rank-one terms and folds the
/// diagonal part of all others into dbar. near_window >= n_max reproduces reduce_full exactly.
ApproximateSigma approximate_sigma(const SeriesTermSource& src, const std::vector<double>& vbar_inv, double omega,
                                   std::size_t n_max, std::size_t near_window);

/// Zeros of the sorted eigenvalue curves of Sigma^(0) in the window, located on
/// a grid of samples_per_spacing points per mean spacing and refined to tol.
std::vector<double> zero_crossings(const SeriesTermSource& src, const std::vector<double>& vbar_inv,
                                   EnergyWindow window, std::size_t n_max, double tol,
                                   std::size_t samples_per_spacing = 16);

}  // namespace pbill
