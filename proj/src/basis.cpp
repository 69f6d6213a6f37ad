#include "pbill/basis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "pbill/error.hpp"

namespace pbill {

namespace {

constexpr double pi = std::numbers::pi;

bool positive_finite(double v) { return std::isfinite(v) && v > 0.0; }

// Largest quantum number along one side that can stay at or below e_cut.
long max_quantum(double length, double mass, double e_cut) {
    return static_cast<long>(std::floor(length * std::sqrt(2.0 * mass * e_cut) / pi)) + 1;
}

}  // namespace

void BilliardSpec::validate() const {
    std::string bad;
    if (!positive_finite(lx)) bad += " lx=" + std::to_string(lx);
    if (!positive_finite(ly)) bad += " ly=" + std::to_string(ly);
    if (!positive_finite(mass)) bad += " mass=" + std::to_string(mass);
    if (!bad.empty()) throw ContractError("billiard parameters must be positive:" + bad);
}

double mode_energy(const BilliardSpec& spec, int mx, int my) noexcept {
    const double kx = static_cast<double>(mx) / spec.lx;
    const double ky = static_cast<double>(my) / spec.ly;
    return (pi * pi / (2.0 * spec.mass)) * (kx * kx + ky * ky);
}

double weyl_density(const BilliardSpec& spec) {
    spec.validate();
    return spec.mass * spec.area() / (2.0 * pi);
}

double sine_factor(int m, double c, double length) noexcept {
    if (c == 0.0 || c == length) return 0.0;
    return std::sin(static_cast<double>(m) * pi * c / length);
}

double eval_eigenfunction(const BilliardSpec& spec, int mx, int my, Point p) {
    if (!(p.x >= 0.0 && p.x <= spec.lx && p.y >= 0.0 && p.y <= spec.ly)) {
        throw ContractError("point (" + std::to_string(p.x) + ", " + std::to_string(p.y) +
                            ") lies outside the billiard");
    }
    const double norm = 2.0 / std::sqrt(spec.area());
    return norm * sine_factor(mx, p.x, spec.lx) * sine_factor(my, p.y, spec.ly);
}

double eval_eigenfunction(const BilliardSpec& spec, const Mode& mode, Point p) {
    return eval_eigenfunction(spec, mode.mx, mode.my, p);
}

ModeTable ModeTable::up_to_energy(const BilliardSpec& spec, double e_cut, std::size_t mode_budget) {
    spec.validate();
    const double ground = mode_energy(spec, 1, 1);
    if (!(e_cut >= ground)) {
        throw ContractError("energy cut " + std::to_string(e_cut) + " is below the ground state " +
                            std::to_string(ground));
    }
    const long nx = max_quantum(spec.lx, spec.mass, e_cut);
    const long ny = max_quantum(spec.ly, spec.mass, e_cut);

    // Weyl estimate with generous slack, checked before allocating anything.
    const double estimate = weyl_density(spec) * e_cut * 1.05 + 16.0;
    if (estimate > static_cast<double>(mode_budget)) {
        throw ContractError("energy cut " + std::to_string(e_cut) + " needs about " +
                            std::to_string(static_cast<long long>(estimate)) +
                            " modes, over the budget of " + std::to_string(mode_budget));
    }

    struct Entry {
        double energy;
        int mx;
        int my;
    };
    std::vector<Entry> entries;
    entries.reserve(static_cast<std::size_t>(estimate));
    for (long mx = 1; mx <= nx; ++mx) {
        for (long my = 1; my <= ny; ++my) {
            const double e = mode_energy(spec, static_cast<int>(mx), static_cast<int>(my));
            if (e > e_cut) break;  // monotone in my
            entries.push_back({e, static_cast<int>(mx), static_cast<int>(my)});
        }
    }
    if (entries.size() > mode_budget) {
        throw ContractError("mode count " + std::to_string(entries.size()) + " exceeds budget " +
                            std::to_string(mode_budget));
    }
    std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
        if (a.energy != b.energy) return a.energy < b.energy;
        if (a.mx != b.mx) return a.mx < b.mx;
        return a.my < b.my;
    });

    std::vector<int> mxs(entries.size()), mys(entries.size());
    std::vector<double> es(entries.size());
    for (std::size_t i = 0; i < entries.size(); ++i) {
        mxs[i] = entries[i].mx;
        mys[i] = entries[i].my;
        es[i] = entries[i].energy;
    }
    return ModeTable(spec, std::move(mxs), std::move(mys), std::move(es));
}

ModeTable ModeTable::lowest(const BilliardSpec& spec, std::size_t count, std::size_t mode_budget) {
    spec.validate();
    if (count == 0) throw ContractError("mode count must be positive");
    if (count > mode_budget) {
        throw ContractError("requested " + std::to_string(count) + " modes, budget is " +
                            std::to_string(mode_budget));
    }
    const double rho = weyl_density(spec);
    // N(E) ~ rho E - perimeter term; start a little above the Weyl guess.
    double e_cut = std::max(mode_energy(spec, 1, 1), 1.02 * static_cast<double>(count) / rho);
    for (;;) {
        const double e_try = e_cut + 4.0 * std::sqrt(e_cut / rho) + 4.0 / rho;
        ModeTable full = up_to_energy(spec, e_try, std::max(mode_budget, count + count / 4 + 64));
        if (full.size() >= count) {
            // Keep the whole degenerate group that straddles the cut.
            std::size_t keep = count;
            while (keep < full.size() && full.energy_[keep] == full.energy_[count - 1]) ++keep;
            full.mx_.resize(keep);
            full.my_.resize(keep);
            full.energy_.resize(keep);
            full.mx_.shrink_to_fit();
            full.my_.shrink_to_fit();
            full.energy_.shrink_to_fit();
            return full;
        }
        e_cut = e_try * 1.1;
    }
}

Mode ModeTable::mode(std::size_t n) const {
    return Mode{mx_.at(n), my_.at(n), energy_.at(n), n + 1};
}

std::size_t ModeTable::count_below(double e) const noexcept {
    return static_cast<std::size_t>(std::lower_bound(energy_.begin(), energy_.end(), e) - energy_.begin());
}

std::size_t ModeTable::count_at_or_below(double e) const noexcept {
    return static_cast<std::size_t>(std::upper_bound(energy_.begin(), energy_.end(), e) - energy_.begin());
}

std::vector<ModeTable::Level> ModeTable::distinct_levels() const {
    std::vector<Level> out;
    std::size_t i = 0;
    while (i < energy_.size()) {
        std::size_t j = i + 1;
        while (j < energy_.size() && energy_[j] == energy_[i]) ++j;
        out.push_back({energy_[i], i, j});
        i = j;
    }
    return out;
}

}  // namespace pbill
