#include "pbill/solver.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

#include "pbill/error.hpp"
#include "pbill/inertia.hpp"
#include "pbill/roots.hpp"

namespace pbill {

namespace {

constexpr double inf = std::numeric_limits<double>::infinity();

// A distinct unperturbed energy with its mode range and the rank of its residue.
struct PoleGroup {
    double energy;
    std::size_t first;
    std::size_t last;
    std::size_t rank;
    Eigen::MatrixXd kernel;  // orthonormal basis of the residue's null space (multi path only)

    std::size_t multiplicity() const noexcept { return last - first; }
};

template <class RankFn>
std::vector<PoleGroup> pole_groups(const SeriesTermSource& src, std::size_t n_max, RankFn rank_of) {
    const auto e = src.table().energies();
    std::vector<PoleGroup> out;
    std::size_t n = 0;
    while (n < n_max) {
        std::size_t m = n + 1;
        while (m < n_max && e[m] == e[n]) ++m;
        PoleGroup g{e[n], n, m, 0, {}};
        rank_of(g);
        out.push_back(std::move(g));
        n = m;
    }
    return out;
}

PoleBracket bracket_between(const PoleGroup* lo, const PoleGroup& hi) {
    PoleBracket b;
    if (lo) {
        b.lo = lo->energy;
        b.lo_first = lo->first;
        b.lo_last = lo->last;
    }
    b.hi = hi.energy;
    b.hi_first = hi.first;
    b.hi_last = hi.last;
    return b;
}

// Coupled poles whose gaps intersect the window, plus unshifted levels inside it.
struct GapPlan {
    std::vector<const PoleGroup*> poles;  // consecutive coupled poles; gaps are (poles[k], poles[k+1])
    bool include_below_ground = false;    // gap (-inf, poles[0])
};

GapPlan plan_gaps(const std::vector<PoleGroup>& groups, EnergyWindow w, SpectrumResult& res) {
    std::vector<const PoleGroup*> coupled;
    for (const auto& g : groups) {
        if (g.rank > 0) coupled.push_back(&g);
        if (g.rank < g.multiplicity() && w.contains(g.energy)) {
            res.levels.push_back({g.energy, g.energy, g.energy, LevelKind::unshifted, 0.0, g.multiplicity() - g.rank});
        }
    }
    if (coupled.empty()) throw ContractError("no unperturbed level couples to the scatterers");
    if (!(coupled.back()->energy > w.hi)) {
        throw ContractError("window top " + std::to_string(w.hi) +
                            " is not below the highest coupled level inside the truncation; raise n_max");
    }
    GapPlan plan;
    plan.include_below_ground = w.lo < coupled.front()->energy;
    // First pole at or below w.lo (the gap containing w.lo starts there).
    auto it = std::upper_bound(coupled.begin(), coupled.end(), w.lo,
                               [](double v, const PoleGroup* g) { return v < g->energy; });
    std::size_t start = it == coupled.begin() ? 0 : static_cast<std::size_t>(it - coupled.begin()) - 1;
    for (std::size_t k = start; k < coupled.size(); ++k) {
        plan.poles.push_back(coupled[k]);
        if (coupled[k]->energy > w.hi) break;
    }
    return plan;
}

double mean_spacing(const SeriesTermSource& src) { return 1.0 / src.rho(); }

void finish(SpectrumResult& res, EnergyWindow w) {
    std::erase_if(res.levels, [&](const PerturbedLevel& l) { return !w.contains(l.omega); });
    std::stable_sort(res.levels.begin(), res.levels.end(),
                     [](const PerturbedLevel& a, const PerturbedLevel& b) { return a.omega < b.omega; });
}

}  // namespace

const char* to_string(LevelKind k) noexcept {
    switch (k) {
        case LevelKind::between_poles: return "between_poles";
        case LevelKind::below_ground: return "below_ground";
        case LevelKind::unshifted: return "unshifted";
    }
    return "unknown";
}

void EnergyWindow::validate() const {
    if (std::isnan(lo) || !std::isfinite(hi) || !(lo < hi) || lo == inf) {
        throw ContractError("energy window [" + std::to_string(lo) + ", " + std::to_string(hi) +
                            "] must satisfy lo < hi with a finite upper end");
    }
}

void SolverOptions::validate() const {
    if (!(tol > 0.0)) throw ContractError("root tolerance must be positive");
    if (grid_per_spacing == 0) throw ContractError("grid density must be positive");
    if (!(bound_state_floor < 0.0)) throw ContractError("bound-state floor must be negative");
    if (!(coupling_threshold >= 0.0)) throw ContractError("coupling threshold must be non-negative");
}

std::size_t SpectrumResult::count() const noexcept {
    std::size_t c = 0;
    for (const auto& l : levels) c += l.multiplicity;
    return c;
}

SpectrumResult solve_single(const SeriesTermSource& src, std::size_t i, double vbar_inv, EnergyWindow window,
                            const GreensAccuracy& acc, const SolverOptions& opts) {
    window.validate();
    acc.validate();
    opts.validate();
    src.check_truncation(acc.n_max);
    if (i >= src.scatterers()) throw ContractError("scatterer index out of range");
    if (!std::isfinite(vbar_inv)) throw ContractError("1/vbar must be finite");

    const auto w2 = src.phi_sq(i);
    const double threshold = opts.coupling_threshold * 4.0 / src.spec().area();
    const auto groups = pole_groups(src, acc.n_max, [&](PoleGroup& g) {
        double w = 0.0;
        for (std::size_t n = g.first; n < g.last; ++n) w += w2[n];
        g.rank = w > threshold ? 1 : 0;
    });

    SpectrumResult res;
    const GapPlan plan = plan_gaps(groups, window, res);
    auto weight = [&](const PoleGroup& g) {
        double w = 0.0;
        for (std::size_t n = g.first; n < g.last; ++n) w += w2[n];
        return w;
    };

    auto solve_gap = [&](const PoleGroup* lo, const PoleGroup& hi) {
        const PoleBracket br = bracket_between(lo, hi);
        auto f = [&](double x) { return scaled_secular(src, i, vbar_inv, x, br, acc); };
        const double fb = -(lo ? br.width() : 1.0) * weight(hi);
        double a = br.lo, fa = 0.0;
        if (lo) {
            fa = br.width() * weight(*lo);
        } else {
            // The secular function tends to +inf far below the ground state.
            if (std::isfinite(window.lo)) {
                a = window.lo;
                fa = f(a);
                if (fa < 0.0) return;  // bound state lies below the window
            }
            for (double step = mean_spacing(src); !std::isfinite(window.lo) && fa <= 0.0; step *= 4.0) {
                a = hi.energy - step;
                if (a < opts.bound_state_floor) {
                    res.diagnostics.push_back("bound state not bracketed above the floor " +
                                              std::to_string(opts.bound_state_floor));
                    ++res.failed_gaps;
                    return;
                }
                fa = f(a);
            }
        }
        ++res.gaps_searched;
        const RootResult r = brent_root(f, a, br.hi, fa, fb, opts.tol, 400);
        if (!r.converged) {
            res.diagnostics.push_back("root in gap (" + std::to_string(br.lo) + ", " + std::to_string(br.hi) +
                                      ") did not converge");
            ++res.failed_gaps;
        }
        res.levels.push_back({r.x, br.lo, br.hi, lo ? LevelKind::between_poles : LevelKind::below_ground,
                              r.hi - r.lo, 1});
    };

    if (plan.include_below_ground) solve_gap(nullptr, *plan.poles.front());
    for (std::size_t k = 0; k + 1 < plan.poles.size(); ++k) solve_gap(plan.poles[k], *plan.poles[k + 1]);
    finish(res, window);
    return res;
}

SpectrumResult solve_multi(const LambdaInverse& li, EnergyWindow window, const SolverOptions& opts) {
    window.validate();
    opts.validate();
    const SeriesTermSource& src = li.source();
    const std::size_t dim = li.size();
    const GreensAccuracy& acc = li.accuracy();
    const double threshold = opts.coupling_threshold * 4.0 / src.spec().area();

    const auto groups = pole_groups(src, acc.n_max, [&](PoleGroup& g) {
        const Eigen::MatrixXd r = li.residue(g.first, g.last);
        const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(r);
        const auto& ev = es.eigenvalues();
        const double cut = std::max(threshold, 1e-10 * ev.maxCoeff());
        std::size_t rank = 0;
        for (Eigen::Index k = 0; k < ev.size(); ++k)
            if (ev[k] > cut) ++rank;
        g.rank = std::min(rank, g.multiplicity());
        if (g.rank > 0 && rank < dim) g.kernel = es.eigenvectors().leftCols(static_cast<Eigen::Index>(dim - rank));
    });

    SpectrumResult res;
    const GapPlan plan = plan_gaps(groups, window, res);

    auto inertia_at = [&](double x, const PoleBracket& br) { return symmetric_inertia(li.scaled(x, br)); };
    // Negative count of the finite part restricted to the residue's null space.
    auto restricted_negatives = [&](const PoleGroup& g) -> std::size_t {
        if (g.kernel.cols() == 0) return 0;
        const Eigen::MatrixXd b = li.without_modes(g.energy, g.first, g.last);
        return symmetric_inertia(g.kernel.transpose() * b * g.kernel).negative;
    };

    auto add_roots = [&](std::vector<double>& found, std::vector<double>& widths, double lo, double hi,
                         std::size_t base, std::size_t count, const PoleBracket& br, std::size_t steps) {
        for (std::size_t k = 1; k <= count; ++k) {
            const Transition t = bisect_transition(
                [&](double x) { return inertia_at(x, br).negative >= base + k; }, lo, hi, opts.tol, steps);
            found.push_back(0.5 * (t.lo + t.hi));
            widths.push_back(t.hi - t.lo);
            lo = t.lo;  // roots are ordered; the next one is not below this bracket
        }
    };

    auto emit = [&](std::vector<double>& found, std::vector<double>& widths, const PoleBracket& br,
                    LevelKind kind) {
        // Crossings closer than tol are one root of higher multiplicity.
        std::vector<std::size_t> order(found.size());
        for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return found[a] < found[b]; });
        for (std::size_t k = 0; k < order.size();) {
            std::size_t m = k + 1;
            double w = widths[order[k]];
            double sum = found[order[k]];
            while (m < order.size() && found[order[m]] - found[order[m - 1]] <= opts.tol) {
                w = std::max(w, widths[order[m]]);
                sum += found[order[m]];
                ++m;
            }
            res.levels.push_back({sum / static_cast<double>(m - k), br.lo, br.hi, kind, w, m - k});
            k = m;
        }
    };

    auto solve_gap = [&](const PoleGroup& lo, const PoleGroup& hi) {
        const PoleBracket br = bracket_between(&lo, hi);
        const std::size_t nu_a = restricted_negatives(lo);
        const std::size_t nu_b = hi.rank + restricted_negatives(hi);
        ++res.gaps_searched;
        if (nu_b < nu_a) {
            res.diagnostics.push_back("negative root count in gap (" + std::to_string(br.lo) + ", " +
                                      std::to_string(br.hi) + ")");
            ++res.failed_gaps;
            return;
        }
        if (nu_b == nu_a) return;

        for (std::size_t attempt = 0; attempt < 2; ++attempt) {
            const double step = mean_spacing(src) /
                                (static_cast<double>(opts.grid_per_spacing * std::max<std::size_t>(dim, 1)) *
                                 (attempt == 0 ? 1.0 : 4.0));
            const std::size_t interior =
                static_cast<std::size_t>(std::max(0.0, std::ceil(br.width() / step) - 1.0));
            std::vector<double> xs{br.lo};
            std::vector<std::size_t> nu{nu_a};
            std::vector<double> det{0.0};
            for (std::size_t j = 1; j <= interior; ++j) {
                const double x = br.lo + br.width() * static_cast<double>(j) / static_cast<double>(interior + 1);
                const Inertia in = inertia_at(x, br);
                xs.push_back(x);
                nu.push_back(in.negative);
                det.push_back(in.determinant);
            }
            xs.push_back(br.hi);
            nu.push_back(nu_b);
            det.push_back(0.0);

            bool monotone = true;
            for (std::size_t j = 0; j + 1 < nu.size(); ++j) monotone = monotone && nu[j] <= nu[j + 1];
            if (!monotone) {
                if (attempt == 0) continue;
                std::ostringstream dump;
                dump << "non-monotone eigenvalue count in gap (" << br.lo << ", " << br.hi << "):";
                for (std::size_t j = 0; j < nu.size(); ++j) dump << ' ' << xs[j] << ':' << nu[j];
                res.diagnostics.push_back(dump.str());
                ++res.failed_gaps;
                return;
            }

            for (std::size_t j = 0; j + 1 < xs.size(); ++j) {
                const std::size_t jump = nu[j + 1] - nu[j];
                if (jump == 0) continue;
                std::vector<double> found, widths;
                const bool interior_cell = j > 0 && j + 2 < xs.size();
                const bool sign_change = det[j] != 0.0 && det[j + 1] != 0.0 && (det[j] > 0.0) != (det[j + 1] > 0.0);
                if (jump == 1 && interior_cell && sign_change) {
                    const RootResult r = brent_root(
                        [&](double x) { return inertia_at(x, br).determinant; }, xs[j], xs[j + 1], det[j],
                        det[j + 1], opts.tol, 400);
                    found.push_back(r.x);
                    widths.push_back(r.hi - r.lo);
                } else {
                    add_roots(found, widths, xs[j], xs[j + 1], nu[j], jump, br, 200);
                }
                emit(found, widths, br, LevelKind::between_poles);
            }
            return;
        }
    };

    auto solve_below = [&](const PoleGroup& hi) {
        const PoleBracket br = bracket_between(nullptr, hi);
        const std::size_t nu_b = hi.rank + restricted_negatives(hi);
        double a;
        std::size_t nu_a;
        if (std::isfinite(window.lo)) {
            a = window.lo;
            nu_a = inertia_at(a, br).negative;
        } else {
            nu_a = nu_b;
            a = hi.energy;
            for (double step = mean_spacing(src); nu_a > 0; step *= 4.0) {
                a = hi.energy - step;
                if (a < opts.bound_state_floor) {
                    res.diagnostics.push_back("bound states not bracketed above the floor " +
                                              std::to_string(opts.bound_state_floor));
                    ++res.failed_gaps;
                    return;
                }
                nu_a = inertia_at(a, br).negative;
            }
        }
        ++res.gaps_searched;
        if (nu_b <= nu_a) return;
        std::vector<double> found, widths;
        add_roots(found, widths, a, hi.energy, nu_a, nu_b - nu_a, br, 2200);
        emit(found, widths, br, LevelKind::below_ground);
    };

    if (plan.include_below_ground) solve_below(*plan.poles.front());
    for (std::size_t k = 0; k + 1 < plan.poles.size(); ++k) solve_gap(*plan.poles[k], *plan.poles[k + 1]);
    finish(res, window);
    return res;
}

double EigenfunctionRep::evaluate(Point p) const {
    if (!table) throw ContractError("eigenfunction has no mode table");
    const auto mx = table->mx();
    const auto my = table->my();
    double s = 0.0;
    for (std::size_t k = 0; k < coefficients.size(); ++k)
        s += coefficients[k] * eval_eigenfunction(table->spec(), mx[k], my[k], p);
    return s;
}

EigenfunctionRep build_eigenfunction(const SeriesTermSource& src, std::size_t i, const PerturbedLevel& level,
                                     const GreensAccuracy& acc) {
    acc.validate();
    src.check_truncation(acc.n_max);
    if (i >= src.scatterers()) throw ContractError("scatterer index out of range");
    check_pole_distance(src, level.omega, acc);
    const auto phi = src.phi(i);
    const auto e = src.table().energies();
    EigenfunctionRep rep;
    rep.level = level;
    rep.scatterer = i;
    rep.table = src.table_ptr();
    rep.coefficients.resize(acc.n_max);
    double sum = 0.0;
    for (std::size_t k = 0; k < acc.n_max; ++k) {
        const double c = phi[k] / (level.omega - e[k]);
        rep.coefficients[k] = c;
        sum += c * c;
    }
    double tail = 0.0;
    if (acc.tail == TailMode::integral) tail = src.tail_prefactor() / (e[acc.n_max - 1] - level.omega);
    rep.normalization = 1.0 / std::sqrt(sum + tail);
    for (auto& c : rep.coefficients) c *= rep.normalization;
    rep.tail_weight = tail * rep.normalization * rep.normalization;
    return rep;
}

}  // namespace pbill
