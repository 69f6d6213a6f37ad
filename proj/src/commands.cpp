#include "pbill/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>

#include "pbill/error.hpp"
#include "pbill/kernels.hpp"
#include "pbill/stats.hpp"

#ifdef PBILL_HAVE_OPENMP
#include <omp.h>
#endif

namespace pbill {

namespace {

constexpr std::size_t min_stats_levels = 100;

using Clock = std::chrono::steady_clock;

class Stopwatch {
public:
    explicit Stopwatch(bool enabled) : enabled_(enabled), last_(Clock::now()) {}
    void lap(const char* name) {
        if (!enabled_) return;
        const auto now = Clock::now();
        laps_[name] = std::chrono::duration<double>(now - last_).count();
        last_ = now;
    }
    void attach(ResultEnvelope& env) const {
        if (enabled_) env.timings = laps_;
    }

private:
    bool enabled_;
    Clock::time_point last_;
    ordered_json laps_ = ordered_json::object();
};

ResultEnvelope envelope(const char* command, const RunConfig& c, const PreparedRun* run) {
    ResultEnvelope env;
    env.command = command;
    env.config = config_to_json(c);
    if (run) {
        ordered_json pts = ordered_json::array();
        for (std::size_t k = 0; k < run->scatterers.size(); ++k) {
            pts.push_back({{"x", run->scatterers.positions[k].x},
                           {"y", run->scatterers.positions[k].y},
                           {"vbar_inv", run->scatterers.vbar_inv[k]}});
        }
        env.resolved = {{"lambda", run->scatterers.lambda}, {"scatterers", pts}};
        for (auto& w : symmetry_warnings(c.billiard, run->scatterers)) env.diagnostics.push_back(std::move(w));
    }
    return env;
}

Table levels_table(const SpectrumResult& res, bool unperturbed) {
    Table t{"levels", {"index", "omega", "bracket_lo", "bracket_hi", "kind", "residual", "multiplicity"}, {}};
    std::int64_t index = 0;
    for (const auto& l : res.levels) {
        t.rows.push_back({index++, l.omega, l.bracket_lo, l.bracket_hi,
                          std::string(unperturbed ? "unperturbed" : to_string(l.kind)), l.residual,
                          static_cast<std::int64_t>(l.multiplicity)});
    }
    return t;
}

std::vector<double> expand(const SpectrumResult& res) {
    std::vector<double> out;
    for (const auto& l : res.levels) out.insert(out.end(), l.multiplicity, l.omega);
    return out;
}

StatsReport stats_of(const RunConfig& c, const ScattererSet& set, const std::vector<double>& levels) {
    StatsReport rep = spectral_report(levels, c.billiard, set, c.window, c.exclude_lowest, c.bins);
    if (rep.spacings.size() + 1 < min_stats_levels) {
        throw ContractError("insufficient sample: " + std::to_string(rep.spacings.size() + 1) +
                            " levels after exclusion, at least " + std::to_string(min_stats_levels) + " needed");
    }
    return rep;
}

std::string verdict(Reference r) { return r == Reference::goe ? "closer to GOE" : "closer to Poisson"; }

ordered_json band_json(const CouplingPrediction& p) {
    ordered_json in_band = ordered_json::array();
    for (bool b : p.in_strong_band) in_band.push_back(b);
    return {{"omega", p.omega},
            {"vbar_inv_star", p.vbar_inv_star},
            {"half_width", p.half_width},
            {"in_strong_band", in_band}};
}

// p / q with q <= 12 within a few ulps.
bool on_rational_line(double frac) {
    for (int q = 2; q <= 12; ++q) {
        const double scaled = frac * q;
        if (std::abs(scaled - std::round(scaled)) <= 16.0 * std::numeric_limits<double>::epsilon() * q)
            return true;
    }
    return false;
}

int worker_count(const RunConfig& c) {
#ifdef PBILL_HAVE_OPENMP
    return c.workers > 0 ? c.workers : omp_get_max_threads();
#else
    (void)c;
    return 1;
#endif
}

}  // namespace

PreparedRun prepare(const RunConfig& c) {
    validate(c);
    PreparedRun run;
    run.scatterers = resolve_scatterers(c);
    run.table = std::make_shared<const ModeTable>(ModeTable::lowest(c.billiard, c.accuracy.n_max));
    run.source = std::make_shared<const SeriesTermSource>(run.table, run.scatterers.positions, c.lambda);
    return run;
}

SpectrumResult compute_spectrum(const RunConfig& c, const PreparedRun& run, const std::vector<double>* vbar_inv) {
    const std::vector<double>& v = vbar_inv ? *vbar_inv : run.scatterers.vbar_inv;
    if (v.size() != run.scatterers.size()) throw ContractError("coupling count does not match scatterer count");
    if (run.scatterers.size() == 0) {
        SpectrumResult res;
        const auto e = run.table->energies().first(std::min(c.accuracy.n_max, run.table->size()));
        if (!e.empty() && c.window.hi >= e.back())
            throw ContractError("window reaches the truncation energy; raise n_max");
        std::size_t n = static_cast<std::size_t>(std::lower_bound(e.begin(), e.end(), c.window.lo) - e.begin());
        while (n < e.size() && e[n] <= c.window.hi) {
            std::size_t m = n;
            while (m < e.size() && e[m] == e[n]) ++m;
            PerturbedLevel l;
            l.omega = l.bracket_lo = l.bracket_hi = e[n];
            l.kind = LevelKind::unshifted;
            l.multiplicity = m - n;
            res.levels.push_back(l);
            n = m;
        }
        return res;
    }
    if (run.scatterers.size() == 1) return solve_single(*run.source, 0, v[0], c.window, c.accuracy, c.solver);
    const LambdaInverse li(run.source, v, c.accuracy);
    return solve_multi(li, c.window, c.solver);
}

std::vector<std::string> symmetry_warnings(const BilliardSpec& spec, const ScattererSet& set) {
    std::vector<std::string> out;
    for (std::size_t k = 0; k < set.size(); ++k) {
        const Point p = set.positions[k];
        const bool x_line = on_rational_line(p.x / spec.lx);
        const bool y_line = on_rational_line(p.y / spec.ly);
        if (x_line || y_line) {
            out.push_back("scatterer " + std::to_string(k) + " lies on a symmetry line (" +
                          (x_line ? "x" : "y") + " is a simple rational fraction of the side); " +
                          "many modes vanish there and the average coupling is lower than 1/S");
        }
    }
    return out;
}

ResultEnvelope cmd_spectrum(const RunConfig& c, const CommandOptions& opts) {
    Stopwatch clock(opts.timings);
    const PreparedRun run = prepare(c);
    clock.lap("prepare");
    ResultEnvelope env = envelope("spectrum", c, &run);
    const SpectrumResult res = compute_spectrum(c, run);
    clock.lap("solve");

    double max_residual = 0.0;
    for (const auto& l : res.levels) max_residual = std::max(max_residual, l.residual);
    env.summary["levels"] = res.count();
    env.summary["distinct_levels"] = res.levels.size();
    env.summary["gaps_searched"] = res.gaps_searched;
    env.summary["failed_gaps"] = res.failed_gaps;
    env.summary["max_residual"] = max_residual;
    env.summary["n_max"] = c.accuracy.n_max;
    env.summary["cutoff_energy"] = run.table->energy(std::min(c.accuracy.n_max, run.table->size()) - 1);
    if (run.scatterers.size() > 0 && !res.levels.empty()) {
        // Truncation error of Gbar at the highest root, where it is largest.
        double trunc = 0.0;
        const double top = res.levels.back().omega;
        for (std::size_t i = 0; i < run.scatterers.size(); ++i) {
            try {
                trunc = std::max(trunc, g_bar(*run.source, i, top, c.accuracy).abs_error);
            } catch (const PoleProximityError&) {
                // an unshifted level sits on a pole; its error is not defined there
            }
        }
        env.summary["gbar_truncation_error"] = trunc;
    }
    env.diagnostics.insert(env.diagnostics.end(), res.diagnostics.begin(), res.diagnostics.end());
    env.tables.push_back(levels_table(res, run.scatterers.size() == 0));
    env.numerical_failure = res.failed_gaps > 0;
    clock.lap("report");
    clock.attach(env);
    return env;
}

ResultEnvelope cmd_stats(const RunConfig& c, const std::optional<std::vector<double>>& levels,
                         const CommandOptions& opts) {
    Stopwatch clock(opts.timings);
    validate(c);
    const ScattererSet set = resolve_scatterers(c);
    ResultEnvelope env;
    std::vector<double> input;
    if (levels) {
        env = envelope("stats", c, nullptr);
        input = *levels;
        env.summary["source"] = "levels file";
    } else {
        const PreparedRun run = prepare(c);
        env = envelope("stats", c, &run);
        const SpectrumResult res = compute_spectrum(c, run);
        env.diagnostics.insert(env.diagnostics.end(), res.diagnostics.begin(), res.diagnostics.end());
        env.numerical_failure = res.failed_gaps > 0;
        input = expand(res);
        env.summary["source"] = "inline spectrum";
    }
    clock.lap("levels");
    const StatsReport rep = stats_of(c, set, input);
    clock.lap("stats");

    env.summary["total_levels"] = rep.total_levels;
    env.summary["excluded_levels"] = rep.excluded_levels;
    env.summary["exclusion_energy"] = rep.exclusion_energy;
    env.summary["spacings"] = rep.spacings.size();
    env.summary["ks_poisson"] = rep.ks_poisson;
    env.summary["ks_goe"] = rep.ks_goe;
    env.summary["verdict"] = verdict(rep.closer);
    if (!rep.band.in_strong_band.empty() || rep.band.omega > 0.0) env.summary["band"] = band_json(rep.band);
    env.diagnostics.insert(env.diagnostics.end(), rep.notes.begin(), rep.notes.end());

    Table hist{"histogram", {"bin_lo", "bin_hi", "count", "density", "poisson", "goe"}, {}};
    for (std::size_t b = 0; b < rep.histogram.counts.size(); ++b) {
        const double lo = rep.histogram.edges[b], hi = rep.histogram.edges[b + 1];
        const double width = hi - lo;
        // Bin averages of the reference densities, comparable to the histogram.
        const double p = (reference_cdf(Reference::poisson, hi) - reference_cdf(Reference::poisson, lo)) / width;
        const double g = (reference_cdf(Reference::goe, hi) - reference_cdf(Reference::goe, lo)) / width;
        hist.rows.push_back({lo, hi, static_cast<std::int64_t>(rep.histogram.counts[b]), rep.histogram.density[b], p, g});
    }
    Table spacings{"spacings", {"index", "spacing"}, {}};
    for (std::size_t k = 0; k < rep.spacings.size(); ++k)
        spacings.rows.push_back({static_cast<std::int64_t>(k), rep.spacings[k]});
    env.tables.push_back(std::move(hist));
    env.tables.push_back(std::move(spacings));
    clock.lap("report");
    clock.attach(env);
    return env;
}

ResultEnvelope cmd_sweep(const RunConfig& c, const CommandOptions& opts) {
    Stopwatch clock(opts.timings);
    if (c.sweep_grid.empty()) throw ContractError("sweep.vbar_inv: grid must not be empty");
    const PreparedRun run = prepare(c);
    if (run.scatterers.size() == 0) throw ContractError("sweep needs at least one scatterer");
    ResultEnvelope env = envelope("sweep", c, &run);
    clock.lap("prepare");

    struct Row {
        double vbar_inv = 0.0;
        std::optional<StatsReport> stats;
        std::size_t failed_gaps = 0;
        std::string error;
    };
    std::vector<Row> rows(c.sweep_grid.size());
    for (std::size_t r = 0; r < rows.size(); ++r)
        rows[r].vbar_inv = c.sweep_grid[r].resolve(c.billiard, c.lambda, c.window);

    const auto count = static_cast<std::ptrdiff_t>(rows.size());
#ifdef PBILL_HAVE_OPENMP
#pragma omp parallel for schedule(dynamic, 1) num_threads(worker_count(c))
#endif
    for (std::ptrdiff_t r = 0; r < count; ++r) {
        Row& row = rows[static_cast<std::size_t>(r)];
        try {
            const std::vector<double> v(run.scatterers.size(), row.vbar_inv);
            ScattererSet set = run.scatterers;
            set.vbar_inv = v;
            const SpectrumResult res = compute_spectrum(c, run, &v);
            row.failed_gaps = res.failed_gaps;
            row.stats = stats_of(c, set, expand(res));
        } catch (const std::exception& e) {
            row.error = e.what();
        }
    }
    clock.lap("rows");

    Table t{"sweep", {"vbar_inv", "spacings", "ks_poisson", "ks_goe", "verdict", "in_strong_band", "status"}, {}};
    std::size_t failures = 0;
    for (const auto& row : rows) {
        const double nan = std::numeric_limits<double>::quiet_NaN();
        if (row.stats) {
            const auto& s = *row.stats;
            const bool in_band = !s.band.in_strong_band.empty() && s.band.in_strong_band.front();
            t.rows.push_back({row.vbar_inv, static_cast<std::int64_t>(s.spacings.size()), s.ks_poisson, s.ks_goe,
                              verdict(s.closer), static_cast<std::int64_t>(in_band),
                              std::string(row.failed_gaps ? "failed gaps" : "ok")});
            if (row.failed_gaps) ++failures;
        } else {
            ++failures;
            t.rows.push_back({row.vbar_inv, std::int64_t{0}, nan, nan, std::string(""), std::int64_t{0},
                              std::string("error")});
            env.diagnostics.push_back("row vbar_inv=" + format_real(row.vbar_inv) + ": " + row.error);
        }
    }
    env.summary["rows"] = rows.size();
    env.summary["failed_rows"] = failures;
    const double center = window_center(c);
    if (center > 0.0) {
        const auto p = predict_strong_coupling(run.scatterers, c.billiard, center);
        env.summary["band_center_vbar_inv"] = p.vbar_inv_star;
        env.summary["band_half_width"] = p.half_width;
    }
    env.tables.push_back(std::move(t));
    env.numerical_failure = failures > 0;
    clock.lap("report");
    clock.attach(env);
    return env;
}

ResultEnvelope cmd_survey(const RunConfig& c, const CommandOptions& opts) {
    Stopwatch clock(opts.timings);
    const PreparedRun run = prepare(c);
    if (run.scatterers.size() == 0) throw ContractError("survey needs a scatterer position");
    ResultEnvelope env = envelope("survey", c, &run);
    const InflectionSurvey s = gbar_inflection_survey(*run.source, c.survey_scatterer, c.window, c.accuracy);
    clock.lap("survey");

    Table t{"survey", {"gap_lo", "gap_hi", "omega_tilde", "g_bar", "log_law", "abs_slope", "offset"}, {}};
    std::vector<double> dev, width, offset;
    const double rho = run.source->rho();
    const double half_pi_m = std::numbers::pi * c.billiard.mass / 2.0;
    for (const auto& r : s.rows) {
        t.rows.push_back({r.gap_lo, r.gap_hi, r.omega, r.g_bar, r.log_law, r.abs_slope, r.offset});
        dev.push_back(r.g_bar - r.log_law);
        width.push_back(r.abs_slope / rho / half_pi_m);
        offset.push_back(std::abs(r.offset));
    }
    env.summary["gaps"] = s.rows.size();
    if (!s.rows.empty()) {
        env.summary["median_gbar_minus_log_law"] = median(dev);
        env.summary["median_width_ratio"] = median(width);
        env.summary["median_abs_offset"] = median(offset);
    }
    env.diagnostics.insert(env.diagnostics.end(), s.notes.begin(), s.notes.end());
    env.tables.push_back(std::move(t));
    clock.lap("report");
    clock.attach(env);
    return env;
}

ResultEnvelope cmd_predict(const RunConfig& c, const CommandOptions& opts) {
    Stopwatch clock(opts.timings);
    validate(c);
    const ScattererSet set = resolve_scatterers(c);
    ResultEnvelope env = envelope("predict", c, nullptr);
    const double omega = c.predict_omega.value_or(window_center(c));
    const CouplingPrediction p = predict_strong_coupling(set, c.billiard, omega);
    env.summary["band"] = band_json(p);
    Table t{"band", {"index", "x", "y", "vbar_inv", "vbar_inv_star", "half_width", "in_strong_band",
                     "band_omega_lo", "band_omega_hi"}, {}};
    for (std::size_t k = 0; k < set.size(); ++k) {
        const BandRange r = strong_band_energies(set.vbar_inv[k], c.billiard.mass, set.lambda);
        t.rows.push_back({static_cast<std::int64_t>(k), set.positions[k].x, set.positions[k].y, set.vbar_inv[k],
                          p.vbar_inv_star, p.half_width, static_cast<std::int64_t>(p.in_strong_band[k]), r.lo, r.hi});
    }
    env.tables.push_back(std::move(t));
    for (auto& w : symmetry_warnings(c.billiard, set)) env.diagnostics.push_back(std::move(w));
    clock.lap("predict");
    clock.attach(env);
    return env;
}

}  // namespace pbill
