#pragma once

#include <complex>
#include <cstddef>
#include <limits>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "pbill/basis.hpp"
#include "pbill/kernels.hpp"

namespace pbill {

using cplx = std::complex<double>;

/// Point interactions: positions, formal inverse couplings 1/vbar_i and the mass scale Lambda.
///
/// Couplings are stored as their inverses because every formula uses 1/vbar;
/// vbar_inv = 0 is the theta = pi extension (infinite formal coupling).
struct ScattererSet {
    std::vector<Point> positions;
    std::vector<double> vbar_inv;
    double lambda = 1.0;

    std::size_t size() const noexcept { return positions.size(); }
    /// Interior, pairwise distinct, finite couplings, lambda > 0. May be empty.
    void validate(const BilliardSpec& spec) const;
};

enum class TailMode {
    none,      // plain truncated series (the matrix Sigma^(0) of the rank-one reduction)
    integral,  // diagonal: analytic tail from the cutoff; off-diagonal: block-averaged partial sums
};

struct GreensAccuracy {
    std::size_t n_max = 100'000;
    TailMode tail = TailMode::integral;
    double target_abs_err = 1e-4;
    /// Levels per averaging block for the off-diagonal series; 0 picks max(4, n_max / 128).
    std::size_t block_levels = 0;
    /// Minimum |omega - e_n| for real-axis evaluation, in units of the mean spacing.
    double pole_exclusion = 1e-9;

    void validate() const;
    std::size_t effective_block_levels() const noexcept;
};

struct Estimate {
    double value = 0.0;
    double abs_error = 0.0;
};

/// Per-scatterer values phi_n(x_i) for the first modes of a table, with the
/// omega-independent partial sums the regularized series need. Built once per
/// (table, positions, Lambda) and read-only afterwards.
class SeriesTermSource {
public:
    SeriesTermSource(std::shared_ptr<const ModeTable> table, std::vector<Point> positions, double lambda);

    const ModeTable& table() const noexcept { return *table_; }
    std::shared_ptr<const ModeTable> table_ptr() const noexcept { return table_; }
    const BilliardSpec& spec() const noexcept { return table_->spec(); }
    std::size_t scatterers() const noexcept { return positions_.size(); }
    std::size_t modes() const noexcept { return table_->size(); }
    const std::vector<Point>& positions() const noexcept { return positions_; }
    double lambda() const noexcept { return lambda_; }
    double rho() const noexcept { return rho_; }
    /// <phi^2> rho_av = M / 2 pi, the prefactor of every integral tail.
    double tail_prefactor() const noexcept;

    std::span<const double> phi(std::size_t i) const { return phi_.at(i); }
    std::span<const double> phi_sq(std::size_t i) const { return phi_sq_.at(i); }
    kernels::Columns columns() const noexcept { return columns_; }

    /// sum_{n < n_max} phi_n(x_i)^2 e_n / (e_n^2 + Lambda^2)
    double counterterm(std::size_t i, std::size_t n_max) const;
    /// sum_{n < n_max} phi_n(x_i)^2 / (e_n^2 + Lambda^2)
    double inverse_square_sum(std::size_t i, std::size_t n_max) const;
    /// sum over scatterers and modes [first, last) of phi^2; zero for modes no scatterer sees.
    double coupling_weight(std::size_t first, std::size_t last) const;

    /// Throws ContractError when n_max exceeds the table.
    void check_truncation(std::size_t n_max) const;

private:
    std::shared_ptr<const ModeTable> table_;
    std::vector<Point> positions_;
    double lambda_;
    double rho_;
    std::vector<std::vector<double>> phi_;
    std::vector<std::vector<double>> phi_sq_;
    std::vector<std::span<const double>> column_spans_;
    kernels::Columns columns_;
    std::vector<std::vector<double>> counterterm_prefix_;
    std::vector<std::vector<double>> inverse_square_prefix_;
};

/// Interval between two pole groups of the table. An open side has no pole.
struct PoleBracket {
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();
    std::size_t lo_first = 0, lo_last = 0;  // mode range [first, last) sitting at lo
    std::size_t hi_first = 0, hi_last = 0;  // mode range sitting at hi

    bool closed_lo() const noexcept { return lo_last > lo_first; }
    bool closed_hi() const noexcept { return hi_last > hi_first; }
    double width() const noexcept { return hi - lo; }
    /// (omega - lo)(hi - omega) with open sides contributing 1.
    double scale(double omega) const noexcept;
};

/// Integral tail <phi^2> rho_av int_{E_c}^inf (1/(omega - E) + E/(E^2 + Lambda^2)) dE.
double integral_tail(double prefactor, double e_cut, double lambda, double omega);
cplx integral_tail(double prefactor, double e_cut, double lambda, cplx omega);

/// Throws PoleProximityError if omega is within the exclusion band of a table energy below n_max.
void check_pole_distance(const SeriesTermSource& src, double omega, const GreensAccuracy& acc);

/// Regularized diagonal Green's function Gbar_i(omega).
Estimate g_bar(const SeriesTermSource& src, std::size_t i, double omega, const GreensAccuracy& acc);
cplx g_bar(const SeriesTermSource& src, std::size_t i, cplx omega, const GreensAccuracy& acc);

/// dGbar_i/domega = -sum phi^2 / (omega - e)^2 (plus the tail's derivative in integral mode).
/// abs_error is the remainder bound of the truncated series.
Estimate g_bar_derivative(const SeriesTermSource& src, std::size_t i, double omega, const GreensAccuracy& acc);

/// Gbar and its derivative from one pass over the series.
struct ValueSlope {
    double value;
    double slope;
};
ValueSlope g_bar_with_slope(const SeriesTermSource& src, std::size_t i, double omega, const GreensAccuracy& acc);

/// (omega - lo)(hi - omega) (Gbar_i(omega) - vbar_inv), finite on the closed bracket.
double scaled_secular(const SeriesTermSource& src, std::size_t i, double vbar_inv, double omega,
                      const PoleBracket& bracket, const GreensAccuracy& acc);

/// Free Green's function between two distinct scatterers. In integral mode the
/// partial sums are averaged over the last three energy blocks; abs_error is
/// their spread.
Estimate g0_offdiag(const SeriesTermSource& src, std::size_t i, std::size_t j, double omega,
                    const GreensAccuracy& acc);

/// Partial sums of the unregularized series sum phi_n(x_i)^2 / (omega - e_n) at each
/// truncation in `schedule`; with_counterterm adds e/(e^2 + Lambda^2) to every term.
std::vector<double> naive_series_divergence_witness(const SeriesTermSource& src, std::size_t i, double omega,
                                                    std::span<const std::size_t> schedule,
                                                    bool with_counterterm = false);

struct LambdaMatrixSample {
    cplx omega;
    Eigen::MatrixXcd matrix;
    double abs_error = 0.0;
};

/// The N x N matrix lambda^{-1}(omega): Gbar_i - 1/vbar_i on the diagonal,
/// G0_ij off it, under a fixed truncation policy.
class LambdaInverse {
public:
    LambdaInverse(std::shared_ptr<const SeriesTermSource> src, std::vector<double> vbar_inv, GreensAccuracy acc);

    std::size_t size() const noexcept { return vbar_inv_.size(); }
    const SeriesTermSource& source() const noexcept { return *src_; }
    const GreensAccuracy& accuracy() const noexcept { return acc_; }
    const std::vector<double>& vbar_inv() const noexcept { return vbar_inv_; }

    /// Real symmetric matrix; throws PoleProximityError near a table energy.
    Eigen::MatrixXd at(double omega) const;
    /// Same with the largest entry error estimate.
    Eigen::MatrixXd at(double omega, double& abs_error) const;
    LambdaMatrixSample at(cplx omega) const;

    /// bracket.scale(omega) * lambda^{-1}(omega); finite on the closed bracket.
    Eigen::MatrixXd scaled(double omega, const PoleBracket& bracket) const;

    /// lambda^{-1}(omega) with the modes [first, last) left out. At omega equal to
    /// their common energy this is the finite part that survives next to the pole.
    Eigen::MatrixXd without_modes(double omega, std::size_t first, std::size_t last) const;

    /// Residue sum_{n in [first, last)} v_n v_n^T of the pole group.
    Eigen::MatrixXd residue(std::size_t first, std::size_t last) const;

private:
    std::shared_ptr<const SeriesTermSource> src_;
    std::vector<double> vbar_inv_;
    GreensAccuracy acc_;
};

}  // namespace pbill
