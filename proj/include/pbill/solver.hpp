#pragma once

#include <cstddef>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "pbill/greens.hpp"

namespace pbill {

/// Closed energy interval [lo, hi]; lo may be -inf to include every bound state.
struct EnergyWindow {
    double lo = 0.0;
    double hi = 0.0;
    void validate() const;
    bool contains(double e) const noexcept { return e >= lo && e <= hi; }
};

enum class LevelKind {
    between_poles,  // root inside a gap between two coupled unperturbed levels
    below_ground,   // root below the lowest coupled level
    unshifted,      // unperturbed level the scatterers do not see (zero residue direction)
};

const char* to_string(LevelKind k) noexcept;

struct PerturbedLevel {
    double omega = 0.0;
    /// Poles enclosing the root; bracket_lo is -inf below the ground state.
    /// Unshifted levels carry their own energy on both sides.
    double bracket_lo = 0.0;
    double bracket_hi = 0.0;
    LevelKind kind = LevelKind::between_poles;
    /// Width of the final sign-change bracket, an energy-units bound on the
    /// distance to the exact root of the truncated secular equation.
    double residual = 0.0;
    std::size_t multiplicity = 1;
};

struct SolverOptions {
    /// Absolute energy tolerance for roots.
    double tol = 1e-9;
    /// Curve-tracking grid density per scatterer and mean spacing.
    std::size_t grid_per_spacing = 8;
    /// Deepest energy searched for bound states when the window is unbounded below.
    double bound_state_floor = -1e250;
    /// A pole group counts as coupled when its residue exceeds this fraction of 4/S.
    double coupling_threshold = 1e-20;

    void validate() const;
};

struct SpectrumResult {
    std::vector<PerturbedLevel> levels;  // ascending in omega
    std::vector<std::string> diagnostics;
    std::size_t gaps_searched = 0;
    std::size_t failed_gaps = 0;

    /// Sum of multiplicities.
    std::size_t count() const noexcept;
};

/// Roots of Gbar_i(omega) = vbar_inv in the window, one per gap between
/// consecutive coupled levels and one below the ground state.
SpectrumResult solve_single(const SeriesTermSource& src, std::size_t i, double vbar_inv, EnergyWindow window,
                            const GreensAccuracy& acc, const SolverOptions& opts = {});

/// Roots of det lambda^{-1}(omega) = 0 in the window. Works for any N >= 1;
/// for N = 1 it agrees with solve_single.
SpectrumResult solve_multi(const LambdaInverse& li, EnergyWindow window, const SolverOptions& opts = {});

/// Perturbed eigenfunction N G0(x, x_i; omega) expanded in the unperturbed basis.
struct EigenfunctionRep {
    PerturbedLevel level;
    std::size_t scatterer = 0;
    std::vector<double> coefficients;  // c_k = N phi_k(x_i) / (omega - e_k), k < n_max
    double normalization = 0.0;        // N
    /// Estimated norm carried by the modes beyond n_max; sum c_k^2 + tail_weight = 1.
    double tail_weight = 0.0;
    std::shared_ptr<const ModeTable> table;

    /// sum_k c_k phi_k(p).
    double evaluate(Point p) const;
};

/// Throws PoleProximityError when the level sits inside the exclusion band of a mode.
EigenfunctionRep build_eigenfunction(const SeriesTermSource& src, std::size_t i, const PerturbedLevel& level,
                                     const GreensAccuracy& acc);

}  // namespace pbill
