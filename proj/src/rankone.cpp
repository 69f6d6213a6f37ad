#include "pbill/rankone.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "pbill/error.hpp"
#include "pbill/roots.hpp"

namespace pbill {

namespace {

struct Rotation {
    Eigen::Index p, q;
    double c, s;
};

// Roots of 1 + sign * sum zeta2_a / (d_a - lambda) = 0 for ascending, distinct d.
// Each root is stored as origin index plus offset tau so that lambda - d_a can
// be formed without cancellation.
template <class T>
struct Secular {
    const std::vector<double>& d;
    const std::vector<double>& zeta2;
    int sign;
    double zeta_norm2;

    T g(T tau, std::size_t origin) const {
        T acc = 1.0;
        for (std::size_t a = 0; a < d.size(); ++a) {
            const T delta = T(d[a]) - T(d[origin]);
            acc += T(sign) * T(zeta2[a]) / (delta - tau);
        }
        return acc;
    }

    // Returns false if bisection collapsed onto a pole, i.e. the bracket was violated.
    bool root(std::size_t j, std::size_t& origin, T& tau) const {
        const std::size_t k = d.size();
        // Poles enclosing root j; -1 marks the open side of the outer bracket.
        long lp, rp;
        if (sign > 0) {
            lp = static_cast<long>(j);
            rp = j + 1 < k ? static_cast<long>(j + 1) : -1;
        } else {
            lp = j == 0 ? -1 : static_cast<long>(j - 1);
            rp = static_cast<long>(j);
        }
        if (lp >= 0 && rp >= 0) {
            const double mid = 0.5 * (d[lp] + d[rp]);
            const T fm = g(T(mid) - T(d[lp]), static_cast<std::size_t>(lp));
            const bool left_half = sign > 0 ? fm > 0 : fm < 0;
            origin = static_cast<std::size_t>(left_half ? lp : rp);
        } else {
            origin = static_cast<std::size_t>(lp >= 0 ? lp : rp);
        }
        T lo, hi;
        if (lp >= 0 && static_cast<std::size_t>(lp) == origin) {
            lo = 0;
            hi = rp >= 0 ? T(d[rp]) - T(d[origin]) : T(zeta_norm2);
        } else {
            hi = 0;
            lo = lp >= 0 ? T(d[lp]) - T(d[origin]) : -T(zeta_norm2);
        }
        const T lo0 = lo, hi0 = hi;
        // g runs from -inf to +inf across the bracket for sign > 0, the other way for sign < 0.
        for (int it = 0; it < 4000; ++it) {
            const T m = lo + (hi - lo) / 2;
            if (!(m > lo && m < hi)) break;
            const T gm = g(m, origin);
            const bool right_of_root = sign > 0 ? gm > 0 : gm < 0;
            if (right_of_root) {
                hi = m;
            } else {
                lo = m;
            }
        }
        tau = lo + (hi - lo) / 2;
        // Collapsing onto a pole end means the sign pattern never matched.
        const bool at_left_pole = lo == lo0 && lp >= 0;
        const bool at_right_pole = hi == hi0 && rp >= 0;
        return !(at_left_pole || at_right_pole);
    }
};

template <class T>
bool solve_active(const std::vector<double>& d, const std::vector<double>& zeta, int sign,
                  std::vector<double>& lambda, Eigen::MatrixXd& vecs) {
    const std::size_t k = d.size();
    std::vector<double> zeta2(k);
    double norm2 = 0.0;
    for (std::size_t a = 0; a < k; ++a) {
        zeta2[a] = zeta[a] * zeta[a];
        norm2 += zeta2[a];
    }
    const Secular<T> sec{d, zeta2, sign, norm2};
    std::vector<std::size_t> origin(k);
    std::vector<T> tau(k);
    for (std::size_t j = 0; j < k; ++j)
        if (!sec.root(j, origin[j], tau[j])) return false;

    // lambda_j - d_a without cancellation.
    auto gap = [&](std::size_t j, std::size_t a) { return tau[j] - (T(d[a]) - T(d[origin[j]])); };

    lambda.resize(k);
    for (std::size_t j = 0; j < k; ++j) {
        double l = static_cast<double>(T(d[origin[j]]) + tau[j]);
        // Keep rounding from stepping across the enclosing poles.
        if (sign > 0) {
            l = std::max(l, d[j]);
            if (j + 1 < k) l = std::min(l, d[j + 1]);
        } else {
            l = std::min(l, d[j]);
            if (j > 0) l = std::max(l, d[j - 1]);
        }
        lambda[j] = l;
    }

    // Gu-Eisenstat: recompute z from the computed roots so the eigenvectors are orthogonal.
    std::vector<T> zhat(k);
    for (std::size_t a = 0; a < k; ++a) {
        T num = 1, den = sign;
        for (std::size_t j = 0; j < k; ++j) {
            num *= gap(j, a);
            if (j != a) den *= T(d[j]) - T(d[a]);
        }
        const T z2 = std::abs(num / den);
        zhat[a] = std::copysign(std::sqrt(z2), static_cast<T>(zeta[a]));
    }
    vecs.resize(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
    for (std::size_t j = 0; j < k; ++j) {
        T norm = 0;
        std::vector<T> col(k);
        for (std::size_t a = 0; a < k; ++a) {
            col[a] = zhat[a] / (-gap(j, a));
            norm += col[a] * col[a];
        }
        norm = std::sqrt(norm);
        for (std::size_t a = 0; a < k; ++a)
            vecs(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(j)) = static_cast<double>(col[a] / norm);
    }
    return true;
}

ReductionState state_from_diag(const Eigen::VectorXd& diag0) {
    const Eigen::Index n = diag0.size();
    std::vector<std::size_t> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return diag0[a] < diag0[b]; });
    ReductionState st;
    st.diag.resize(n);
    st.q = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index k = 0; k < n; ++k) {
        const auto from = static_cast<Eigen::Index>(order[static_cast<std::size_t>(k)]);
        st.diag[k] = diag0[from];
        st.q(from, k) = 1.0;
    }
    return st;
}

// Absorbs the rank-one term of mode `row` into the state; k is left to the caller.
ReductionState absorb(const ReductionState& state, const SeriesTermSource& src, std::size_t row, double omega,
                      StepCheck* check, bool* extended) {
    const double e = src.table().energy(row);
    if (omega == e) {
        throw PoleProximityError("omega coincides with the unperturbed level " + std::to_string(row + 1), e, row + 1);
    }
    const double w = 1.0 / (omega - e);
    const Eigen::Index n = state.diag.size();
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = src.phi(static_cast<std::size_t>(i))[row];
    const Eigen::VectorXd z = state.q.transpose() * v;
    const RankOneUpdate upd = rank_one_update(state.diag, z, w);
    if (extended) *extended = upd.extended_precision;

    ReductionState next;
    next.k = state.k;
    next.diag = upd.eigenvalues;
    next.q = state.q * upd.eigenvectors;
    if (check) {
        const Eigen::VectorXd& o = state.diag;
        const Eigen::VectorXd& m = upd.eigenvalues;
        check->interlaced = true;
        for (Eigen::Index i = 0; i < n; ++i) {
            if (w > 0.0) {
                check->interlaced = check->interlaced && o[i] <= m[i] && (i + 1 == n || m[i] <= o[i + 1]);
            } else {
                check->interlaced = check->interlaced && m[i] <= o[i] && (i == 0 || o[i - 1] <= m[i]);
            }
        }
        const double zz = z.squaredNorm();
        const double scale = std::max({o.cwiseAbs().maxCoeff(), m.cwiseAbs().maxCoeff(), std::abs(w) * zz});
        check->trace_defect = std::abs(m.sum() - o.sum() - w * zz) / std::max(scale, 1e-300);
        check->orthogonality_defect =
            (upd.eigenvectors.transpose() * upd.eigenvectors - Eigen::MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff();
    }
    return next;
}

ReductionSummary run_reduction(const SeriesTermSource& src, const Eigen::VectorXd& diag0, double omega,
                               const std::vector<std::size_t>& rows, bool check_steps) {
    ReductionState st = state_from_diag(diag0);
    ReductionSummary sum;
    StepCheck chk;
    for (std::size_t row : rows) {
        bool extended = false;
        st = absorb(st, src, row, omega, check_steps ? &chk : nullptr, &extended);
        if (extended) ++sum.extended_precision_steps;
        if (check_steps) {
            if (!chk.interlaced) ++sum.interlacing_violations;
            sum.max_trace_defect = std::max(sum.max_trace_defect, chk.trace_defect);
            sum.max_orthogonality_defect = std::max(sum.max_orthogonality_defect, chk.orthogonality_defect);
        }
        ++sum.steps;
    }
    sum.eigenvalues = st.diag;
    return sum;
}

}  // namespace

RankOneUpdate rank_one_update(const Eigen::VectorXd& d, const Eigen::VectorXd& z, double w) {
    const Eigen::Index n = d.size();
    if (z.size() != n) throw ContractError("rank-one update: size mismatch");
    for (Eigen::Index i = 1; i < n; ++i)
        if (!(d[i - 1] <= d[i])) throw ContractError("rank-one update needs ascending diagonal entries");
    if (!std::isfinite(w) || !z.allFinite() || !d.allFinite()) throw NumericalError("rank-one update: non-finite input");

    RankOneUpdate out;
    out.eigenvalues = d;
    out.eigenvectors = Eigen::MatrixXd::Identity(n, n);
    if (n == 0 || w == 0.0 || z.squaredNorm() == 0.0) {
        out.deflated = static_cast<std::size_t>(n);
        return out;
    }

    const int sign = w > 0.0 ? 1 : -1;
    Eigen::VectorXd zeta = std::sqrt(std::abs(w)) * z;
    const double znorm = zeta.norm();
    const double scale = std::max(d.cwiseAbs().maxCoeff(), znorm * znorm);
    const double tol = 8.0 * std::numeric_limits<double>::epsilon() * scale;

    std::vector<bool> active(static_cast<std::size_t>(n), true);
    for (Eigen::Index i = 0; i < n; ++i)
        if (std::abs(zeta[i]) * znorm <= tol) active[i] = false;

    std::vector<Rotation> rots;
    Eigen::Index prev = -1;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (!active[i]) continue;
        if (prev >= 0 && d[i] - d[prev] <= tol) {
            // Rotate the pair so only coordinate i couples to the update.
            const double r = std::hypot(zeta[prev], zeta[i]);
            const double c = zeta[i] / r, s = zeta[prev] / r;
            rots.push_back({prev, i, c, s});
            zeta[i] = r;
            zeta[prev] = 0.0;
            active[prev] = false;
        }
        prev = i;
    }

    std::vector<Eigen::Index> idx;
    std::vector<double> da, za;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (active[i]) {
            idx.push_back(i);
            da.push_back(d[i]);
            za.push_back(zeta[i]);
        }
    }
    out.deflated = static_cast<std::size_t>(n) - idx.size();

    std::vector<double> lambda;
    Eigen::MatrixXd vecs;
    if (!solve_active<double>(da, za, sign, lambda, vecs)) {
        out.extended_precision = true;
        if (!solve_active<long double>(da, za, sign, lambda, vecs)) {
            throw NumericalError("secular equation: interlacing bracket violated in extended precision");
        }
    }

    Eigen::MatrixXd y = Eigen::MatrixXd::Identity(n, n);
    Eigen::VectorXd ev = d;
    for (std::size_t j = 0; j < idx.size(); ++j) {
        const Eigen::Index col = idx[j];
        ev[col] = lambda[j];
        y.col(col).setZero();
        for (std::size_t a = 0; a < idx.size(); ++a) y(idx[a], col) = vecs(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(j));
    }
    for (auto it = rots.rbegin(); it != rots.rend(); ++it) {
        for (Eigen::Index col = 0; col < n; ++col) {
            const double yp = y(it->p, col), yq = y(it->q, col);
            y(it->p, col) = it->c * yp + it->s * yq;
            y(it->q, col) = -it->s * yp + it->c * yq;
        }
    }

    std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    std::stable_sort(perm.begin(), perm.end(), [&](Eigen::Index a, Eigen::Index b) { return ev[a] < ev[b]; });
    for (Eigen::Index k = 0; k < n; ++k) {
        out.eigenvalues[k] = ev[perm[k]];
        out.eigenvectors.col(k) = y.col(perm[k]);
    }
    return out;
}

SigmaDecomposition decompose_sigma(const SeriesTermSource& src, const std::vector<double>& vbar_inv, double omega,
                                   std::size_t n_max) {
    src.check_truncation(n_max);
    if (vbar_inv.size() != src.scatterers()) throw ContractError("coupling count does not match scatterer count");
    SigmaDecomposition dec;
    dec.omega = omega;
    dec.n_max = n_max;
    const auto n = static_cast<Eigen::Index>(vbar_inv.size());
    dec.unperturbed_diag.resize(n);
    for (Eigen::Index i = 0; i < n; ++i)
        dec.unperturbed_diag[i] = src.counterterm(static_cast<std::size_t>(i), n_max) - vbar_inv[static_cast<std::size_t>(i)];
    dec.order.resize(vbar_inv.size());
    std::iota(dec.order.begin(), dec.order.end(), 0);
    std::stable_sort(dec.order.begin(), dec.order.end(),
                     [&](std::size_t a, std::size_t b) { return dec.unperturbed_diag[a] < dec.unperturbed_diag[b]; });
    const auto e = src.table().energies();
    dec.weights.resize(n_max);
    for (std::size_t k = 0; k < n_max; ++k) dec.weights[k] = 1.0 / (omega - e[k]);
    return dec;
}

Eigen::MatrixXd assemble_sigma(const SeriesTermSource& src, const SigmaDecomposition& dec) {
    const auto n = dec.unperturbed_diag.size();
    Eigen::MatrixXd m = dec.unperturbed_diag.asDiagonal();
    Eigen::VectorXd v(n);
    for (std::size_t k = 0; k < dec.n_max; ++k) {
        for (Eigen::Index i = 0; i < n; ++i) v[i] = src.phi(static_cast<std::size_t>(i))[k];
        m.noalias() += dec.weights[k] * v * v.transpose();
    }
    return m;
}

ReductionState initial_state(const SigmaDecomposition& dec) { return state_from_diag(dec.unperturbed_diag); }

ReductionState reduce_step(const ReductionState& state, const SeriesTermSource& src, double omega, StepCheck* check) {
    src.check_truncation(state.k + 1);
    ReductionState next = absorb(state, src, state.k, omega, check, nullptr);
    next.k = state.k + 1;
    return next;
}

ReductionSummary reduce_full(const SeriesTermSource& src, const std::vector<double>& vbar_inv, double omega,
                             std::size_t n_max, bool check_steps) {
    const SigmaDecomposition dec = decompose_sigma(src, vbar_inv, omega, n_max);
    std::vector<std::size_t> rows(n_max);
    std::iota(rows.begin(), rows.end(), 0);
    return run_reduction(src, dec.unperturbed_diag, omega, rows, check_steps);
}

ApproximateSigma approximate_sigma(const SeriesTermSource& src, const std::vector<double>& vbar_inv, double omega,
                                   std::size_t n_max, std::size_t near_window) {
    if (near_window == 0) throw ContractError("near_window must be at least 1");
    if (!(omega > 0.0)) throw ContractError("the logarithmic estimate needs omega > 0");
    const SigmaDecomposition dec = decompose_sigma(src, vbar_inv, omega, n_max);
    const auto e = src.table().energies().first(n_max);

    // Two-pointer walk outward from omega picks the near_window closest levels.
    std::size_t right = static_cast<std::size_t>(std::lower_bound(e.begin(), e.end(), omega) - e.begin());
    std::size_t left = right;  // retained range is [left, right)
    while (right - left < std::min(near_window, n_max)) {
        if (left == 0) {
            ++right;
        } else if (right == n_max) {
            --left;
        } else if (omega - e[left - 1] <= e[right] - omega) {
            --left;
        } else {
            ++right;
        }
    }

    ApproximateSigma out;
    out.omega = omega;
    for (std::size_t k = left; k < right; ++k) out.retained.push_back(k);
    const auto n = dec.unperturbed_diag.size();
    Eigen::VectorXd folded = Eigen::VectorXd::Zero(n);
    for (std::size_t k = 0; k < n_max; ++k) {
        if (k >= left && k < right) continue;
        for (Eigen::Index i = 0; i < n; ++i) folded[i] += src.phi_sq(static_cast<std::size_t>(i))[k] * dec.weights[k];
    }
    out.dbar = dec.unperturbed_diag + folded;
    out.eigenvalues = run_reduction(src, out.dbar, omega, out.retained, false).eigenvalues;
    out.log_law = src.tail_prefactor() * std::log(omega / src.lambda());
    out.closed_form_diag.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) out.closed_form_diag[i] = out.log_law - vbar_inv[static_cast<std::size_t>(i)];
    return out;
}

std::vector<double> zero_crossings(const SeriesTermSource& src, const std::vector<double>& vbar_inv,
                                   EnergyWindow window, std::size_t n_max, double tol,
                                   std::size_t samples_per_spacing) {
    window.validate();
    src.check_truncation(n_max);
    if (!(tol > 0.0) || samples_per_spacing == 0) throw ContractError("invalid zero-crossing resolution");
    const auto e = src.table().energies().first(n_max);
    if (!(window.hi < e.back())) throw ContractError("window must lie below the truncation energy");
    if (!std::isfinite(window.lo)) throw ContractError("zero crossings need a finite window");

    auto curves = [&](double x) { return reduce_full(src, vbar_inv, x, n_max).eigenvalues; };

    std::vector<double> roots;
    auto scan = [&](double lo, double hi, bool lo_is_pole, bool hi_is_pole) {
        const double a = lo_is_pole ? lo + tol : lo;
        const double b = hi_is_pole ? hi - tol : hi;
        if (!(a < b)) return;
        const double step = 1.0 / (src.rho() * static_cast<double>(samples_per_spacing));
        const std::size_t cells = static_cast<std::size_t>(std::ceil((b - a) / step));
        std::vector<double> xs(cells + 1);
        for (std::size_t j = 0; j <= cells; ++j) xs[j] = a + (b - a) * static_cast<double>(j) / static_cast<double>(cells);
        xs.back() = b;
        Eigen::VectorXd prev = curves(xs[0]);
        for (std::size_t j = 0; j < cells; ++j) {
            const Eigen::VectorXd next = curves(xs[j + 1]);
            for (Eigen::Index k = 0; k < prev.size(); ++k) {
                if (prev[k] > 0.0 && next[k] <= 0.0) {
                    if (next[k] == 0.0) {
                        roots.push_back(xs[j + 1]);
                        continue;
                    }
                    const RootResult r = brent_root([&](double x) { return curves(x)[k]; }, xs[j], xs[j + 1],
                                                    prev[k], next[k], tol, 400);
                    roots.push_back(r.x);
                }
            }
            prev = next;
        }
    };

    // Sorted curves decrease between consecutive distinct levels and jump at each level.
    std::size_t n = static_cast<std::size_t>(std::upper_bound(e.begin(), e.end(), window.lo) - e.begin());
    double lo = window.lo;
    bool lo_pole = n > 0 && e[n - 1] == window.lo;
    while (lo < window.hi) {
        const double next = n < e.size() ? e[n] : window.hi;
        const bool next_pole = next <= window.hi;
        scan(lo, std::min(next, window.hi), lo_pole, next_pole);
        if (!next_pole) break;
        lo = next;
        lo_pole = true;
        while (n < e.size() && e[n] == lo) ++n;
    }
    std::sort(roots.begin(), roots.end());
    return roots;
}

}  // namespace pbill
