#include "pbill/greens.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string>

#include "pbill/error.hpp"

namespace pbill {

namespace {

constexpr double pi = std::numbers::pi;

struct Range {
    std::size_t begin;
    std::size_t end;
};

// [0, n) with the (possibly empty or overlapping) skip ranges removed, in order.
std::vector<Range> ranges_excluding(std::size_t n, std::initializer_list<Range> skip) {
    std::vector<Range> sorted;
    for (Range r : skip) {
        r.end = std::min(r.end, n);
        if (r.end > r.begin) sorted.push_back(r);
    }
    std::sort(sorted.begin(), sorted.end(), [](Range a, Range b) { return a.begin < b.begin; });
    std::vector<Range> out;
    std::size_t pos = 0;
    for (Range r : sorted) {
        if (r.begin > pos) out.push_back({pos, r.begin});
        pos = std::max(pos, r.end);
    }
    if (pos < n) out.push_back({pos, n});
    return out;
}

bool in_any(std::size_t n, std::initializer_list<Range> skip) {
    for (Range r : skip)
        if (n >= r.begin && n < r.end) return true;
    return false;
}

// Statistical size of the remainder beyond E_c: terms have random amplitude
// ~1/S and magnitude ~(|omega| + Lambda^2/E) / E^2.
double tail_uncertainty(const SeriesTermSource& src, double e_cut, double abs_omega) {
    const double amp = (abs_omega + src.lambda() * src.lambda() / e_cut) / src.spec().area();
    return amp * std::sqrt(src.rho() / (3.0 * e_cut * e_cut * e_cut));
}

double cut_energy(const SeriesTermSource& src, const GreensAccuracy& acc) {
    return src.table().energy(acc.n_max - 1);
}

void check_below_cut(const SeriesTermSource& src, const GreensAccuracy& acc, double re_omega) {
    const double e_cut = cut_energy(src, acc);
    if (!(re_omega < e_cut)) {
        throw ContractError("omega = " + std::to_string(re_omega) + " is not below the truncation energy " +
                            std::to_string(e_cut) + " (n_max = " + std::to_string(acc.n_max) + ")");
    }
}

template <class T>
T tail_value(const SeriesTermSource& src, const GreensAccuracy& acc, T omega) {
    if (acc.tail == TailMode::none) return T(0.0);
    return integral_tail(src.tail_prefactor(), cut_energy(src, acc), src.lambda(), omega);
}

// Packed sums phi_i phi_j / (omega - e_n) over the truncated series, modes in
// `skip` left out. With two or more columns the last three blocks of
// block_levels modes are also accumulated as running partial sums; in integral
// mode the off-diagonal entries take the mean of the three block averages.
template <class T>
std::vector<T> raw_pair_sums(kernels::Columns cols, std::span<const double> energy, const GreensAccuracy& acc,
                             T omega, std::initializer_list<Range> skip, double* offdiag_spread) {
    const std::size_t dim = cols.size();
    const std::size_t n_max = acc.n_max;
    const std::size_t block = acc.effective_block_levels();
    const bool blocks = dim >= 2 && n_max > 3 * block;
    const std::size_t head_end = blocks ? n_max - 3 * block : n_max;

    std::vector<T> out(kernels::packed_size(dim), T(0.0));
    std::vector<std::span<const double>> sub(dim);
    for (Range r : ranges_excluding(head_end, skip)) {
        for (std::size_t i = 0; i < dim; ++i) sub[i] = cols[i].subspan(r.begin, r.end - r.begin);
        kernels::parallel::pair_sums(sub, energy.subspan(r.begin, r.end - r.begin), omega, out);
    }
    if (offdiag_spread) *offdiag_spread = 0.0;
    if (!blocks) return out;

    const std::size_t p_count = out.size();
    std::vector<T> run(p_count, T(0.0));
    std::array<std::vector<T>, 3> mean;
    for (auto& m : mean) m.assign(p_count, T(0.0));
    for (std::size_t b = 0; b < 3; ++b) {
        const std::size_t lo = head_end + b * block;
        for (std::size_t n = lo; n < lo + block; ++n) {
            if (!in_any(n, skip)) {
                const T r = T(1.0) / (omega - energy[n]);
                std::size_t p = 0;
                for (std::size_t i = 0; i < dim; ++i) {
                    const T vi = cols[i][n] * r;
                    for (std::size_t j = i; j < dim; ++j) run[p++] += vi * cols[j][n];
                }
            }
            for (std::size_t p = 0; p < p_count; ++p) mean[b][p] += run[p];
        }
        for (auto& m : mean[b]) m /= static_cast<double>(block);
    }

    double spread = 0.0;
    std::size_t p = 0;
    for (std::size_t i = 0; i < dim; ++i) {
        for (std::size_t j = i; j < dim; ++j, ++p) {
            if (i == j || acc.tail == TailMode::none) {
                out[p] += run[p];
            } else {
                out[p] += (mean[0][p] + mean[1][p] + mean[2][p]) / 3.0;
            }
            if (i != j) {
                const double s = std::max({std::abs(mean[0][p] - mean[1][p]), std::abs(mean[1][p] - mean[2][p]),
                                           std::abs(mean[0][p] - mean[2][p])});
                spread = std::max(spread, s);
            }
        }
    }
    if (offdiag_spread) *offdiag_spread = spread;
    return out;
}

template <class Matrix, class T>
Matrix unpack(const std::vector<T>& packed, std::size_t dim) {
    Matrix m(dim, dim);
    std::size_t p = 0;
    for (std::size_t i = 0; i < dim; ++i) {
        for (std::size_t j = i; j < dim; ++j, ++p) {
            m(i, j) = packed[p];
            m(j, i) = packed[p];
        }
    }
    return m;
}

}  // namespace

void ScattererSet::validate(const BilliardSpec& spec) const {
    spec.validate();
    if (vbar_inv.size() != positions.size()) {
        throw ContractError("got " + std::to_string(positions.size()) + " positions but " +
                            std::to_string(vbar_inv.size()) + " couplings");
    }
    if (!(std::isfinite(lambda) && lambda > 0.0)) throw ContractError("Lambda must be positive and finite");
    for (std::size_t i = 0; i < positions.size(); ++i) {
        const Point p = positions[i];
        if (!(p.x > 0.0 && p.x < spec.lx && p.y > 0.0 && p.y < spec.ly)) {
            throw ContractError("scatterer " + std::to_string(i) + " at (" + std::to_string(p.x) + ", " +
                                std::to_string(p.y) + ") is not strictly inside the billiard");
        }
        if (!std::isfinite(vbar_inv[i])) {
            throw ContractError("inverse coupling of scatterer " + std::to_string(i) + " is not finite");
        }
        for (std::size_t j = 0; j < i; ++j) {
            if (positions[j].x == p.x && positions[j].y == p.y) {
                throw ContractError("scatterers " + std::to_string(j) + " and " + std::to_string(i) +
                                    " coincide");
            }
        }
    }
}

void GreensAccuracy::validate() const {
    if (n_max == 0) throw ContractError("n_max must be positive");
    if (!(target_abs_err > 0.0)) throw ContractError("target_abs_err must be positive");
    if (!(pole_exclusion >= 0.0 && std::isfinite(pole_exclusion))) {
        throw ContractError("pole_exclusion must be finite and non-negative");
    }
}

std::size_t GreensAccuracy::effective_block_levels() const noexcept {
    return block_levels ? block_levels : std::max<std::size_t>(4, n_max / 128);
}

double PoleBracket::scale(double omega) const noexcept {
    const double l = closed_lo() ? omega - lo : 1.0;
    const double r = closed_hi() ? hi - omega : 1.0;
    return l * r;
}

SeriesTermSource::SeriesTermSource(std::shared_ptr<const ModeTable> table, std::vector<Point> positions,
                                   double lambda)
    : table_(std::move(table)), positions_(std::move(positions)), lambda_(lambda) {
    if (!table_ || table_->empty()) throw ContractError("series source needs a non-empty mode table");
    if (!(std::isfinite(lambda_) && lambda_ > 0.0)) throw ContractError("Lambda must be positive and finite");
    const BilliardSpec& spec = table_->spec();
    rho_ = weyl_density(spec);
    const std::size_t n = table_->size();
    const auto mx = table_->mx();
    const auto my = table_->my();
    const auto e = table_->energies();
    const int mx_top = *std::max_element(mx.begin(), mx.end());
    const int my_top = *std::max_element(my.begin(), my.end());
    const double norm = 2.0 / std::sqrt(spec.area());
    const double l2 = lambda_ * lambda_;

    phi_.resize(positions_.size());
    phi_sq_.resize(positions_.size());
    counterterm_prefix_.resize(positions_.size());
    inverse_square_prefix_.resize(positions_.size());
    for (std::size_t i = 0; i < positions_.size(); ++i) {
        const Point p = positions_[i];
        if (!(p.x >= 0.0 && p.x <= spec.lx && p.y >= 0.0 && p.y <= spec.ly)) {
            throw ContractError("scatterer " + std::to_string(i) + " lies outside the billiard");
        }
        std::vector<double> sx(static_cast<std::size_t>(mx_top) + 1), sy(static_cast<std::size_t>(my_top) + 1);
        for (int m = 1; m <= mx_top; ++m) sx[m] = sine_factor(m, p.x, spec.lx);
        for (int m = 1; m <= my_top; ++m) sy[m] = sine_factor(m, p.y, spec.ly);

        auto& f = phi_[i];
        auto& f2 = phi_sq_[i];
        auto& ct = counterterm_prefix_[i];
        auto& k = inverse_square_prefix_[i];
        f.resize(n);
        f2.resize(n);
        ct.assign(n + 1, 0.0);
        k.assign(n + 1, 0.0);
        for (std::size_t m = 0; m < n; ++m) {
            f[m] = norm * sx[mx[m]] * sy[my[m]];
            f2[m] = f[m] * f[m];
            const double d = e[m] * e[m] + l2;
            ct[m + 1] = ct[m] + f2[m] * (e[m] / d);
            k[m + 1] = k[m] + f2[m] / d;
        }
    }
    column_spans_.assign(phi_.begin(), phi_.end());
    columns_ = column_spans_;
}

double SeriesTermSource::tail_prefactor() const noexcept { return spec().mass / (2.0 * pi); }

void SeriesTermSource::check_truncation(std::size_t n_max) const {
    if (n_max == 0 || n_max > modes()) {
        throw ContractError("n_max = " + std::to_string(n_max) + " outside the mode table (" +
                            std::to_string(modes()) + " modes)");
    }
}

double SeriesTermSource::counterterm(std::size_t i, std::size_t n_max) const {
    check_truncation(n_max);
    return counterterm_prefix_.at(i)[n_max];
}

double SeriesTermSource::inverse_square_sum(std::size_t i, std::size_t n_max) const {
    check_truncation(n_max);
    return inverse_square_prefix_.at(i)[n_max];
}

double SeriesTermSource::coupling_weight(std::size_t first, std::size_t last) const {
    double w = 0.0;
    for (const auto& f2 : phi_sq_)
        for (std::size_t n = first; n < last && n < f2.size(); ++n) w += f2[n];
    return w;
}

double integral_tail(double prefactor, double e_cut, double lambda, double omega) {
    return prefactor * std::log((e_cut - omega) / std::hypot(e_cut, lambda));
}

cplx integral_tail(double prefactor, double e_cut, double lambda, cplx omega) {
    return prefactor * (std::log(cplx(e_cut) - omega) - std::log(std::hypot(e_cut, lambda)));
}

void check_pole_distance(const SeriesTermSource& src, double omega, const GreensAccuracy& acc) {
    const auto e = src.table().energies().first(std::min(acc.n_max, src.modes()));
    const double band = acc.pole_exclusion / src.rho();
    const auto it = std::lower_bound(e.begin(), e.end(), omega);
    std::size_t best = e.size();
    double dist = std::numeric_limits<double>::infinity();
    if (it != e.end()) {
        best = static_cast<std::size_t>(it - e.begin());
        dist = *it - omega;
    }
    if (it != e.begin() && omega - *(it - 1) <= dist) {
        best = static_cast<std::size_t>(it - e.begin()) - 1;
        dist = omega - *(it - 1);
    }
    if (best < e.size() && dist <= band) {
        throw PoleProximityError("omega = " + std::to_string(omega) + " is within " + std::to_string(dist) +
                                     " of the unperturbed level " + std::to_string(best + 1),
                                 e[best], best + 1);
    }
}

Estimate g_bar(const SeriesTermSource& src, std::size_t i, double omega, const GreensAccuracy& acc) {
    acc.validate();
    src.check_truncation(acc.n_max);
    check_below_cut(src, acc, omega);
    check_pole_distance(src, omega, acc);
    const auto w = src.phi_sq(i).first(acc.n_max);
    const auto e = src.table().energies().first(acc.n_max);
    const double tail = tail_value(src, acc, omega);
    const double value = kernels::parallel::resolvent_sum(w, e, omega) + src.counterterm(i, acc.n_max) + tail;
    const double e_cut = cut_energy(src, acc);
    double err = tail_uncertainty(src, e_cut, std::abs(omega));
    if (acc.tail == TailMode::none)
        err += std::abs(integral_tail(src.tail_prefactor(), e_cut, src.lambda(), omega));
    return {value, err};
}

cplx g_bar(const SeriesTermSource& src, std::size_t i, cplx omega, const GreensAccuracy& acc) {
    acc.validate();
    src.check_truncation(acc.n_max);
    check_below_cut(src, acc, omega.real());
    if (omega.imag() == 0.0) check_pole_distance(src, omega.real(), acc);
    const auto w = src.phi_sq(i).first(acc.n_max);
    const auto e = src.table().energies().first(acc.n_max);
    return kernels::parallel::resolvent_sum(w, e, omega) + src.counterterm(i, acc.n_max) +
           tail_value(src, acc, omega);
}

ValueSlope g_bar_with_slope(const SeriesTermSource& src, std::size_t i, double omega, const GreensAccuracy& acc) {
    acc.validate();
    src.check_truncation(acc.n_max);
    check_below_cut(src, acc, omega);
    check_pole_distance(src, omega, acc);
    const auto w = src.phi_sq(i).first(acc.n_max);
    const auto e = src.table().energies().first(acc.n_max);
    const kernels::SumSlope s = kernels::parallel::resolvent_sum_slope(w, e, omega);
    ValueSlope out{s.sum + src.counterterm(i, acc.n_max), s.slope};
    if (acc.tail == TailMode::integral) {
        const double e_cut = cut_energy(src, acc);
        out.value += integral_tail(src.tail_prefactor(), e_cut, src.lambda(), omega);
        out.slope -= src.tail_prefactor() / (e_cut - omega);
    }
    return out;
}

Estimate g_bar_derivative(const SeriesTermSource& src, std::size_t i, double omega, const GreensAccuracy& acc) {
    const ValueSlope vs = g_bar_with_slope(src, i, omega, acc);
    const double gap = cut_energy(src, acc) - omega;
    const double err = acc.tail == TailMode::none
                           ? src.tail_prefactor() / gap
                           : std::sqrt(src.rho() / (3.0 * gap * gap * gap)) / src.spec().area();
    return {vs.slope, err};
}

double scaled_secular(const SeriesTermSource& src, std::size_t i, double vbar_inv, double omega,
                      const PoleBracket& bracket, const GreensAccuracy& acc) {
    src.check_truncation(acc.n_max);
    check_below_cut(src, acc, omega);
    const auto w = src.phi_sq(i);
    const auto e = src.table().energies();
    double sum = 0.0;
    for (Range r : ranges_excluding(acc.n_max, {{bracket.lo_first, bracket.lo_last},
                                                {bracket.hi_first, bracket.hi_last}})) {
        sum += kernels::parallel::resolvent_sum(w.subspan(r.begin, r.end - r.begin),
                                                e.subspan(r.begin, r.end - r.begin), omega);
    }
    const double regular = sum + src.counterterm(i, acc.n_max) + tail_value(src, acc, omega) - vbar_inv;
    double value = bracket.scale(omega) * regular;
    if (bracket.closed_lo()) {
        double wl = 0.0;
        for (std::size_t n = bracket.lo_first; n < bracket.lo_last; ++n) wl += w[n];
        value += (bracket.closed_hi() ? bracket.hi - omega : 1.0) * wl;
    }
    if (bracket.closed_hi()) {
        double wh = 0.0;
        for (std::size_t n = bracket.hi_first; n < bracket.hi_last; ++n) wh += w[n];
        value -= (bracket.closed_lo() ? omega - bracket.lo : 1.0) * wh;
    }
    return value;
}

Estimate g0_offdiag(const SeriesTermSource& src, std::size_t i, std::size_t j, double omega,
                    const GreensAccuracy& acc) {
    acc.validate();
    src.check_truncation(acc.n_max);
    if (i == j) throw ContractError("g0_offdiag needs two distinct scatterers");
    check_pole_distance(src, omega, acc);
    // Canonical order keeps the result bit-symmetric in (i, j).
    const std::array<std::span<const double>, 2> cols{src.phi(std::min(i, j)), src.phi(std::max(i, j))};
    double spread = 0.0;
    const auto packed = raw_pair_sums<double>(cols, src.table().energies(), acc, omega, {}, &spread);
    return {packed[1], spread};
}

std::vector<double> naive_series_divergence_witness(const SeriesTermSource& src, std::size_t i, double omega,
                                                    std::span<const std::size_t> schedule, bool with_counterterm) {
    const auto w = src.phi_sq(i);
    const auto e = src.table().energies();
    const double l2 = src.lambda() * src.lambda();
    std::vector<double> out;
    out.reserve(schedule.size());
    double acc = 0.0;
    std::size_t n = 0;
    for (std::size_t target : schedule) {
        src.check_truncation(target);
        if (target < n) throw ContractError("divergence schedule must be non-decreasing");
        for (; n < target; ++n) {
            double t = 1.0 / (omega - e[n]);
            if (with_counterterm) t += e[n] / (e[n] * e[n] + l2);
            acc += w[n] * t;
        }
        out.push_back(acc);
    }
    return out;
}

LambdaInverse::LambdaInverse(std::shared_ptr<const SeriesTermSource> src, std::vector<double> vbar_inv,
                             GreensAccuracy acc)
    : src_(std::move(src)), vbar_inv_(std::move(vbar_inv)), acc_(acc) {
    if (!src_) throw ContractError("LambdaInverse needs a series source");
    acc_.validate();
    src_->check_truncation(acc_.n_max);
    if (vbar_inv_.size() != src_->scatterers()) {
        throw ContractError("coupling count does not match scatterer count");
    }
    if (vbar_inv_.empty()) throw ContractError("LambdaInverse needs at least one scatterer");
}

Eigen::MatrixXd LambdaInverse::at(double omega) const {
    double err = 0.0;
    return at(omega, err);
}

Eigen::MatrixXd LambdaInverse::at(double omega, double& abs_error) const {
    check_below_cut(*src_, acc_, omega);
    check_pole_distance(*src_, omega, acc_);
    double spread = 0.0;
    const auto packed =
        raw_pair_sums<double>(src_->columns(), src_->table().energies(), acc_, omega, {}, &spread);
    Eigen::MatrixXd m = unpack<Eigen::MatrixXd>(packed, size());
    const double tail = tail_value(*src_, acc_, omega);
    for (std::size_t i = 0; i < size(); ++i) m(i, i) += src_->counterterm(i, acc_.n_max) + tail - vbar_inv_[i];
    const double e_cut = cut_energy(*src_, acc_);
    double diag_err = tail_uncertainty(*src_, e_cut, std::abs(omega));
    if (acc_.tail == TailMode::none)
        diag_err += std::abs(integral_tail(src_->tail_prefactor(), e_cut, src_->lambda(), omega));
    abs_error = std::max(diag_err, spread);
    return m;
}

LambdaMatrixSample LambdaInverse::at(cplx omega) const {
    check_below_cut(*src_, acc_, omega.real());
    if (omega.imag() == 0.0) check_pole_distance(*src_, omega.real(), acc_);
    double spread = 0.0;
    const auto packed = raw_pair_sums<cplx>(src_->columns(), src_->table().energies(), acc_, omega, {}, &spread);
    LambdaMatrixSample out{omega, unpack<Eigen::MatrixXcd>(packed, size()), 0.0};
    const cplx tail = tail_value(*src_, acc_, omega);
    for (std::size_t i = 0; i < size(); ++i)
        out.matrix(i, i) += src_->counterterm(i, acc_.n_max) + tail - vbar_inv_[i];
    const double e_cut = cut_energy(*src_, acc_);
    double diag_err = tail_uncertainty(*src_, e_cut, std::abs(omega));
    if (acc_.tail == TailMode::none)
        diag_err += std::abs(integral_tail(src_->tail_prefactor(), e_cut, src_->lambda(), omega));
    out.abs_error = std::max(diag_err, spread);
    return out;
}

Eigen::MatrixXd LambdaInverse::without_modes(double omega, std::size_t first, std::size_t last) const {
    check_below_cut(*src_, acc_, omega);
    const auto packed = raw_pair_sums<double>(src_->columns(), src_->table().energies(), acc_, omega,
                                              {{first, last}}, nullptr);
    Eigen::MatrixXd m = unpack<Eigen::MatrixXd>(packed, size());
    const double tail = tail_value(*src_, acc_, omega);
    for (std::size_t i = 0; i < size(); ++i) m(i, i) += src_->counterterm(i, acc_.n_max) + tail - vbar_inv_[i];
    return m;
}

Eigen::MatrixXd LambdaInverse::residue(std::size_t first, std::size_t last) const {
    const std::size_t dim = size();
    Eigen::MatrixXd r = Eigen::MatrixXd::Zero(dim, dim);
    Eigen::VectorXd v(dim);
    for (std::size_t n = first; n < last; ++n) {
        for (std::size_t i = 0; i < dim; ++i) v[i] = src_->phi(i)[n];
        r.noalias() += v * v.transpose();
    }
    return r;
}

Eigen::MatrixXd LambdaInverse::scaled(double omega, const PoleBracket& bracket) const {
    check_below_cut(*src_, acc_, omega);
    const auto packed =
        raw_pair_sums<double>(src_->columns(), src_->table().energies(), acc_, omega,
                              {{bracket.lo_first, bracket.lo_last}, {bracket.hi_first, bracket.hi_last}}, nullptr);
    Eigen::MatrixXd m = unpack<Eigen::MatrixXd>(packed, size());
    const double tail = tail_value(*src_, acc_, omega);
    for (std::size_t i = 0; i < size(); ++i) m(i, i) += src_->counterterm(i, acc_.n_max) + tail - vbar_inv_[i];
    m *= bracket.scale(omega);
    if (bracket.closed_lo())
        m += (bracket.closed_hi() ? bracket.hi - omega : 1.0) * residue(bracket.lo_first, bracket.lo_last);
    if (bracket.closed_hi())
        m -= (bracket.closed_lo() ? omega - bracket.lo : 1.0) * residue(bracket.hi_first, bracket.hi_last);
    return m;
}

}  // namespace pbill
