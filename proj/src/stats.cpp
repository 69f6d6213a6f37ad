#include "pbill/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "pbill/error.hpp"
#include "pbill/roots.hpp"

namespace pbill {

namespace {
constexpr double pi = std::numbers::pi;
}

UnfoldedSpectrum unfold(std::span<const double> levels, const BilliardSpec& spec) {
    if (levels.size() < 2) throw ContractError("unfolding needs at least two levels");
    if (!std::is_sorted(levels.begin(), levels.end())) throw ContractError("levels must be ascending");
    const double rho = weyl_density(spec);
    UnfoldedSpectrum u;
    u.raw.assign(levels.begin(), levels.end());
    const double span = rho * (levels.back() - levels.front());
    if (!(span > 0.0)) throw ContractError("levels span zero width");
    u.rescale = static_cast<double>(levels.size() - 1) / span;
    u.unfolded.resize(levels.size());
    for (std::size_t k = 0; k < levels.size(); ++k) u.unfolded[k] = u.rescale * (rho * levels[k]);
    return u;
}

std::vector<double> nearest_neighbor_spacings(const UnfoldedSpectrum& u) {
    std::vector<double> s;
    s.reserve(u.unfolded.size());
    for (std::size_t k = 1; k < u.unfolded.size(); ++k) s.push_back(u.unfolded[k] - u.unfolded[k - 1]);
    return s;
}

SpacingHistogram spacing_distribution(const UnfoldedSpectrum& u, std::size_t bins, double s_max) {
    if (bins == 0) throw ContractError("histogram needs at least one bin");
    const std::vector<double> s = nearest_neighbor_spacings(u);
    const double top = std::max(s_max, *std::max_element(s.begin(), s.end()));
    SpacingHistogram h;
    h.samples = s.size();
    h.edges.resize(bins + 1);
    for (std::size_t b = 0; b <= bins; ++b) h.edges[b] = top * static_cast<double>(b) / static_cast<double>(bins);
    h.counts.assign(bins, 0);
    for (double x : s) {
        auto b = static_cast<std::size_t>(x / top * static_cast<double>(bins));
        ++h.counts[std::min(b, bins - 1)];
    }
    const double width = top / static_cast<double>(bins);
    h.density.resize(bins);
    for (std::size_t b = 0; b < bins; ++b)
        h.density[b] = static_cast<double>(h.counts[b]) / (static_cast<double>(h.samples) * width);
    return h;
}

const char* to_string(Reference r) noexcept { return r == Reference::poisson ? "poisson" : "goe"; }

double reference_cdf(Reference kind, double s) {
    if (!(s >= 0.0)) throw ContractError("spacing must be non-negative");
    return kind == Reference::poisson ? -std::expm1(-s) : -std::expm1(-pi * s * s / 4.0);
}

double reference_density(Reference kind, double s) {
    if (!(s >= 0.0)) throw ContractError("spacing must be non-negative");
    return kind == Reference::poisson ? std::exp(-s) : (pi * s / 2.0) * std::exp(-pi * s * s / 4.0);
}

double ks_distance(std::span<const double> sample, Reference kind) {
    if (sample.empty()) throw ContractError("KS distance needs a non-empty sample");
    std::vector<double> x(sample.begin(), sample.end());
    std::sort(x.begin(), x.end());
    const double n = static_cast<double>(x.size());
    double d = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        const double f = reference_cdf(kind, x[k]);
        d = std::max({d, f - static_cast<double>(k) / n, static_cast<double>(k + 1) / n - f});
    }
    return d;
}

double ks_distance(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty()) throw ContractError("KS distance needs non-empty samples");
    std::vector<double> x(a.begin(), a.end()), y(b.begin(), b.end());
    std::sort(x.begin(), x.end());
    std::sort(y.begin(), y.end());
    const double nx = static_cast<double>(x.size()), ny = static_cast<double>(y.size());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < x.size() && j < y.size()) {
        const double v = std::min(x[i], y[j]);
        while (i < x.size() && x[i] == v) ++i;
        while (j < y.size() && y[j] == v) ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / nx - static_cast<double>(j) / ny));
    }
    return d;
}

CouplingPrediction predict_strong_coupling(const ScattererSet& config, const BilliardSpec& spec, double omega) {
    spec.validate();
    if (!(omega > 0.0) || !std::isfinite(omega)) throw ContractError("prediction needs omega > 0");
    if (!(config.lambda > 0.0)) throw ContractError("Lambda must be positive");
    CouplingPrediction p;
    p.omega = omega;
    p.vbar_inv_star = spec.mass / (2.0 * pi) * std::log(omega / config.lambda);
    p.half_width = pi * spec.mass / 4.0;
    const double eps = std::numeric_limits<double>::epsilon();
    for (double v : config.vbar_inv) {
        const double slack = 4.0 * eps * std::max({std::abs(v), std::abs(p.vbar_inv_star), p.half_width});
        p.in_strong_band.push_back(std::abs(v - p.vbar_inv_star) <= p.half_width + slack);
    }
    return p;
}

BandRange strong_band_energies(double vbar_inv, double mass, double lambda) {
    if (!(mass > 0.0) || !(lambda > 0.0)) throw ContractError("mass and Lambda must be positive");
    const double hw = pi * mass / 4.0;
    const double k = 2.0 * pi / mass;
    return {lambda * std::exp(k * (vbar_inv - hw)), lambda * std::exp(k * (vbar_inv + hw))};
}

InflectionSurvey gbar_inflection_survey(const SeriesTermSource& src, std::size_t i, EnergyWindow window,
                                        const GreensAccuracy& acc) {
    window.validate();
    acc.validate();
    src.check_truncation(acc.n_max);
    InflectionSurvey out;
    const auto e = src.table().energies().first(acc.n_max);
    const auto w = src.phi_sq(i);
    const double rho = src.rho();
    const double threshold = 1e-20 * 4.0 / src.spec().area();
    const double exclusion = acc.pole_exclusion / rho;

    // Coupled distinct levels inside the window.
    std::vector<double> poles;
    std::size_t n = static_cast<std::size_t>(std::lower_bound(e.begin(), e.end(), window.lo) - e.begin());
    while (n < e.size() && e[n] <= window.hi) {
        std::size_t m = n;
        double weight = 0.0;
        while (m < e.size() && e[m] == e[n]) weight += w[m++];
        if (weight > threshold) poles.push_back(e[n]);
        n = m;
    }
    if (poles.size() < 2) {
        out.notes.push_back("window holds no complete gap");
        return out;
    }

    for (std::size_t g = 0; g + 1 < poles.size(); ++g) {
        const double a = poles[g], b = poles[g + 1];
        const double width = b - a;
        const double h = std::min(1e-3 / rho, width / 16.0);
        if (width <= 4.0 * (h + exclusion)) {
            out.notes.push_back("gap (" + std::to_string(a) + ", " + std::to_string(b) +
                                ") narrower than the pole-exclusion band; skipped");
            continue;
        }
        // Central difference of the exact derivative; strictly decreasing in omega.
        auto second = [&](double x) {
            return (g_bar_with_slope(src, i, x + h, acc).slope - g_bar_with_slope(src, i, x - h, acc).slope) /
                   (2.0 * h);
        };
        const double lo = a + 2.0 * h + exclusion, hi = b - 2.0 * h - exclusion;
        const double flo = second(lo), fhi = second(hi);
        if (!(flo > 0.0 && fhi < 0.0)) {
            out.notes.push_back("no sign change of the second derivative in gap (" + std::to_string(a) + ", " +
                                std::to_string(b) + ")");
            continue;
        }
        const RootResult r = brent_root(second, lo, hi, flo, fhi, 1e-6 * width, 200);
        const ValueSlope vs = g_bar_with_slope(src, i, r.x, acc);
        InflectionRow row;
        row.gap_lo = a;
        row.gap_hi = b;
        row.omega = r.x;
        row.g_bar = vs.value;
        row.log_law = r.x > 0.0 ? src.tail_prefactor() * std::log(r.x / src.lambda())
                                : std::numeric_limits<double>::quiet_NaN();
        row.abs_slope = std::abs(vs.slope);
        row.offset = (r.x - 0.5 * (a + b)) / width;
        out.rows.push_back(row);
    }
    return out;
}

double median(std::vector<double> values) {
    if (values.empty()) throw ContractError("median of an empty set");
    const std::size_t mid = values.size() / 2;
    std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
    const double upper = values[mid];
    if (values.size() % 2 == 1) return upper;
    const double lower = *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
    return 0.5 * (lower + upper);
}

StatsReport spectral_report(std::span<const double> levels, const BilliardSpec& spec, const ScattererSet& config,
                            EnergyWindow window, std::size_t exclude_lowest, std::size_t bins) {
    StatsReport rep;
    rep.total_levels = levels.size();
    std::vector<double> kept(levels.begin(), levels.end());
    std::sort(kept.begin(), kept.end());
    if (exclude_lowest > 0) {
        const ModeTable low = ModeTable::lowest(spec, exclude_lowest);
        rep.exclusion_energy = low.energy(exclude_lowest - 1);
        std::erase_if(kept, [&](double x) { return x < rep.exclusion_energy; });
    }
    rep.excluded_levels = rep.total_levels - kept.size();
    if (kept.size() < 2) throw ContractError("insufficient sample: fewer than two levels after exclusion");
    const UnfoldedSpectrum u = unfold(kept, spec);
    rep.spacings = nearest_neighbor_spacings(u);
    if (rep.spacings.size() < 100) {
        rep.notes.push_back("only " + std::to_string(rep.spacings.size()) +
                            " spacings; statistics are not meaningful below 100");
    }
    rep.histogram = spacing_distribution(u, bins);
    rep.ks_poisson = ks_distance(rep.spacings, Reference::poisson);
    rep.ks_goe = ks_distance(rep.spacings, Reference::goe);
    rep.closer = rep.ks_goe < rep.ks_poisson ? Reference::goe : Reference::poisson;
    const double lo = std::isfinite(window.lo) ? window.lo : mode_energy(spec, 1, 1);
    const double center = 0.5 * (lo + window.hi);
    if (center > 0.0) rep.band = predict_strong_coupling(config, spec, center);
    return rep;
}

}  // namespace pbill
