#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "pbill/basis.hpp"
#include "pbill/greens.hpp"
#include "pbill/solver.hpp"

namespace pbill {

struct UnfoldedSpectrum {
    std::vector<double> raw;       // ascending
    std::vector<double> unfolded;  // rho_av * raw, rescaled to unit mean spacing
    double rescale = 1.0;          // factor applied after multiplying by rho_av
};

/// Constant-density unfolding. Throws ContractError for fewer than two levels or unsorted input.
UnfoldedSpectrum unfold(std::span<const double> levels, const BilliardSpec& spec);

std::vector<double> nearest_neighbor_spacings(const UnfoldedSpectrum& u);

struct SpacingHistogram {
    std::vector<double> edges;  // bins + 1 entries starting at 0
    std::vector<std::size_t> counts;
    std::vector<double> density;  // counts / (samples * width)
    std::size_t samples = 0;
};

/// Histogram over [0, max(s_max, largest spacing)] so that every spacing is counted.
SpacingHistogram spacing_distribution(const UnfoldedSpectrum& u, std::size_t bins, double s_max = 4.0);

enum class Reference { poisson, goe };

const char* to_string(Reference r) noexcept;
/// 1 - exp(-s) or 1 - exp(-pi s^2 / 4). Throws ContractError for s < 0.
double reference_cdf(Reference kind, double s);
double reference_density(Reference kind, double s);

/// Kolmogorov-Smirnov distance between a sample and a reference distribution.
double ks_distance(std::span<const double> sample, Reference kind);
/// Two-sample Kolmogorov-Smirnov distance.
double ks_distance(std::span<const double> a, std::span<const double> b);

struct CouplingPrediction {
    double omega = 0.0;
    double vbar_inv_star = 0.0;  // (M / 2 pi) ln(omega / Lambda)
    double half_width = 0.0;     // pi M / 4
    std::vector<bool> in_strong_band;
};

/// Band membership is the closed interval |1/vbar_i - vbar_inv_star| <= half_width,
/// evaluated with a few ulps of slack so that boundary values constructed as
/// star +- half_width count as inside.
CouplingPrediction predict_strong_coupling(const ScattererSet& config, const BilliardSpec& spec, double omega);

/// Energies [lo, hi] over which a coupling 1/vbar stays in the strong band.
struct BandRange {
    double lo;
    double hi;
};
BandRange strong_band_energies(double vbar_inv, double mass, double lambda);

struct InflectionRow {
    double gap_lo = 0.0;
    double gap_hi = 0.0;
    double omega = 0.0;     // inflection point of Gbar in the gap
    double g_bar = 0.0;     // Gbar at the inflection point
    double log_law = 0.0;   // (M / 2 pi) ln(omega / Lambda)
    double abs_slope = 0.0; // |Gbar'| at the inflection point
    double offset = 0.0;    // (omega - midpoint) / gap width
};

struct InflectionSurvey {
    std::vector<InflectionRow> rows;
    std::vector<std::string> notes;
};

/// Locates the zero of Gbar'' in every gap lying inside the window. Gbar'' is
/// the central difference of the analytic derivative with step
/// min(1e-3 / rho_av, gap / 16).
InflectionSurvey gbar_inflection_survey(const SeriesTermSource& src, std::size_t i, EnergyWindow window,
                                        const GreensAccuracy& acc);

double median(std::vector<double> values);

struct StatsReport {
    std::size_t total_levels = 0;
    std::size_t excluded_levels = 0;
    double exclusion_energy = 0.0;
    std::vector<double> spacings;
    SpacingHistogram histogram;
    double ks_poisson = 0.0;
    double ks_goe = 0.0;
    Reference closer = Reference::poisson;
    CouplingPrediction band;
    std::vector<std::string> notes;
};

/// Spacing statistics of a level list. Levels below the (exclude_lowest)-th
/// unperturbed level are dropped first. Throws ContractError when fewer than
/// two levels remain; fewer than 100 spacings only adds a note.
StatsReport spectral_report(std::span<const double> levels, const BilliardSpec& spec, const ScattererSet& config,
                            EnergyWindow window, std::size_t exclude_lowest = 200, std::size_t bins = 40);

}  // namespace pbill
