#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>
#include <vector>

#include "oracles.hpp"
#include "pbill/error.hpp"
#include "pbill/greens.hpp"

using namespace pbill;

namespace {

constexpr double pi = std::numbers::pi;
const BilliardSpec golden{};
const Point p1{0.3137, 0.7211};
const Point p2{0.6421, 1.1093};

std::shared_ptr<const ModeTable> big_table() {
    static const auto t = std::make_shared<const ModeTable>(ModeTable::lowest(golden, 400'000));
    return t;
}

std::shared_ptr<const SeriesTermSource> source(std::vector<Point> pts = {p1, p2}, double lambda = 1.0) {
    return std::make_shared<const SeriesTermSource>(big_table(), std::move(pts), lambda);
}

GreensAccuracy accuracy(std::size_t n_max, TailMode tail = TailMode::integral) {
    GreensAccuracy a;
    a.n_max = n_max;
    a.tail = tail;
    return a;
}

// Distinct consecutive energies (lo, hi) of the table above `from`.
std::vector<std::pair<double, double>> gaps_above(double from, std::size_t count) {
    const auto e = big_table()->energies();
    std::vector<std::pair<double, double>> out;
    auto n = static_cast<std::size_t>(std::upper_bound(e.begin(), e.end(), from) - e.begin());
    while (out.size() < count && n + 1 < e.size()) {
        if (e[n + 1] > e[n]) out.push_back({e[n], e[n + 1]});
        ++n;
    }
    return out;
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

}  // namespace

TEST_CASE("cached values are bit-identical to eval_eigenfunction") {
    const auto src = source();
    const ModeTable& t = *big_table();
    for (std::size_t n : {0u, 1u, 17u, 9999u, 123'456u, 399'999u}) {
        CHECK(src->phi(0)[n] == eval_eigenfunction(golden, t.mode(n), p1));
        CHECK(src->phi(1)[n] == eval_eigenfunction(golden, t.mode(n), p2));
        CHECK(src->phi_sq(1)[n] == src->phi(1)[n] * src->phi(1)[n]);
    }
}

TEST_CASE("Gbar matches an independent long double sum with the analytic tail") {
    const auto src = source();
    const std::size_t n_max = 50'000;
    const ModeTable& t = *big_table();
    const double e_c = t.energy(n_max - 1);
    for (double omega : {-300.0, 3.3, 1000.25, 20'000.5}) {
        long double s = 0.0L;
        for (std::size_t n = 0; n < n_max; ++n) {
            const auto m = t.mode(n);
            const long double ph = oracle::phi(golden, m.mx, m.my, p1.x, p1.y);
            const long double e = oracle::brute_energy(golden, m.mx, m.my);
            s += ph * ph * (1.0L / (omega - e) + e / (e * e + 1.0L));
        }
        const double tail = 1.0 / (2.0 * pi) * std::log((e_c - omega) / std::hypot(e_c, 1.0));
        const Estimate g = g_bar(*src, 0, omega, accuracy(n_max));
        CHECK(g.value == doctest::Approx(static_cast<double>(s) + tail).epsilon(1e-10));
        const Estimate plain = g_bar(*src, 0, omega, accuracy(n_max, TailMode::none));
        CHECK(plain.value == doctest::Approx(static_cast<double>(s)).epsilon(1e-10));
    }
}

TEST_CASE("Gbar is strictly decreasing between consecutive levels and spans the real line") {
    const auto src = source();
    const auto acc = accuracy(100'000);
    for (auto [a, b] : gaps_above(3000.0, 20)) {
        double prev = std::numeric_limits<double>::infinity();
        for (int k = 1; k < 100; ++k) {
            const double w = a + (b - a) * k / 100.0;
            const double g = g_bar(*src, 0, w, acc).value;
            CHECK(g < prev);
            prev = g;
        }
        const double eps = 1e-7 * (b - a);
        CHECK(g_bar(*src, 0, a + eps, acc).value > 100.0);
        CHECK(g_bar(*src, 0, b - eps, acc).value < -100.0);
    }
}

TEST_CASE("Gbar at gap midpoints follows the log law within the band half-width") {
    const auto src = source();
    const auto acc = accuracy(100'000);
    std::vector<double> dev;
    for (auto [a, b] : gaps_above(8000.0, 60)) {
        const double mid = 0.5 * (a + b);
        dev.push_back(g_bar(*src, 0, mid, acc).value - 1.0 / (2.0 * pi) * std::log(mid));
    }
    CHECK(std::abs(median(dev)) <= pi / 4.0);
}

TEST_CASE("Gbar self-converges between 1e5 and 4e5 terms with the integral tail") {
    const auto src = source();
    const auto a = accuracy(100'000), b = accuracy(400'000);
    for (double omega : {-1000.0, 7.5, 2000.3, 15'000.7, 40'000.1}) {
        const Estimate lo = g_bar(*src, 0, omega, a);
        const Estimate hi = g_bar(*src, 0, omega, b);
        CHECK(std::abs(lo.value - hi.value) <= a.target_abs_err);
        CHECK(std::abs(lo.value - hi.value) <= 3.0 * lo.abs_error + 1e-12);
    }
}

TEST_CASE("plain truncation differences shrink on a doubling ladder") {
    const auto src = source();
    const double omega = 555.5;
    double prev = std::numeric_limits<double>::infinity();
    for (std::size_t n : {12'500u, 25'000u, 50'000u, 100'000u}) {
        const double d = std::abs(g_bar(*src, 0, omega, accuracy(n, TailMode::none)).value -
                                  g_bar(*src, 0, omega, accuracy(2 * n, TailMode::none)).value);
        CHECK(d < prev);
        prev = d;
    }
}

TEST_CASE("derivative is negative and matches central differences") {
    const auto src = source();
    const auto acc = accuracy(100'000);
    for (auto [a, b] : gaps_above(2500.0, 15)) {
        for (double f : {0.2, 0.5, 0.8}) {
            const double w = a + f * (b - a);
            const Estimate d = g_bar_derivative(*src, 0, w, acc);
            CHECK(d.value < 0.0);
            // h balances truncation O(h^2 g''') against rounding O(eps g / h).
            const double h = 1e-4 * (b - a);
            const double fd = (g_bar(*src, 0, w + h, acc).value - g_bar(*src, 0, w - h, acc).value) / (2.0 * h);
            CHECK(std::abs(fd - d.value) <= 1e-4 * std::abs(d.value));
            const ValueSlope vs = g_bar_with_slope(*src, 0, w, acc);
            CHECK(vs.slope == doctest::Approx(d.value).epsilon(1e-12));
            CHECK(vs.value == doctest::Approx(g_bar(*src, 0, w, acc).value).epsilon(1e-12));
        }
    }
}

TEST_CASE("derivative magnitude at gap midpoints against the equal-spacing estimate") {
    const auto src = source();
    const auto acc = accuracy(100'000);
    const double rho = weyl_density(golden);
    const double estimate = pi * pi / golden.area() * rho * rho;
    double sum = 0.0;
    double narrowest = std::numeric_limits<double>::infinity();
    std::vector<double> mags;
    const auto gaps = gaps_above(10'000.0, 50);
    for (auto [a, b] : gaps) {
        mags.push_back(std::abs(g_bar_derivative(*src, 0, 0.5 * (a + b), acc).value));
        sum += mags.back();
        narrowest = std::min(narrowest, b - a);
    }
    const double mean = sum / static_cast<double>(gaps.size());
    std::ranges::sort(mags);
    // |Gbar'| at a midpoint grows like 1/gap^2, so the narrowest gap dominates the mean.
    MESSAGE("mean |Gbar'| at midpoints / estimate = " << mean / estimate << ", median / estimate = "
            << 0.5 * (mags[24] + mags[25]) / estimate << ", narrowest gap = " << narrowest);
    CHECK(std::abs(mean / estimate - 1.0) <= 0.25);
}

TEST_CASE("pole proximity names the offending level") {
    const auto src = source();
    const auto acc = accuracy(100'000);
    const double e = big_table()->energy(41);
    try {
        (void)g_bar(*src, 0, e + 1e-12, acc);
        FAIL("expected PoleProximityError");
    } catch (const PoleProximityError& err) {
        CHECK(err.pole() == e);
        CHECK(err.mode_index() == 42);
    }
    CHECK_NOTHROW((void)g_bar(*src, 0, e + 1e-6, acc));
}

TEST_CASE("off-diagonal Green's function is exactly symmetric") {
    const auto src = source();
    for (TailMode tail : {TailMode::none, TailMode::integral}) {
        const auto acc = accuracy(100'000, tail);
        for (double omega : {-50.0, 1234.5, 9876.5}) {
            CHECK(g0_offdiag(*src, 0, 1, omega, acc).value == g0_offdiag(*src, 1, 0, omega, acc).value);
        }
    }
    CHECK_THROWS_AS(g0_offdiag(*src, 1, 1, 3.0, accuracy(1000)), ContractError);
}

TEST_CASE("off-diagonal sum below the ground state agrees with a 1e6-term direct sum") {
    const auto src = source();
    const double omega = 2.0;
    const auto modes = oracle::brute_modes(golden, 3.9e6);
    REQUIRE(modes.size() >= 1'000'000);
    long double direct = 0.0L;
    for (std::size_t n = 0; n < 1'000'000; ++n) {
        const auto& m = modes[n];
        direct += oracle::phi(golden, m.mx, m.my, p1.x, p1.y) * oracle::phi(golden, m.mx, m.my, p2.x, p2.y) /
                  (omega - m.energy);
    }
    const Estimate g = g0_offdiag(*src, 0, 1, omega, accuracy(100'000));
    MESSAGE("block-averaged " << g.value << " direct " << static_cast<double>(direct));
    CHECK(std::signbit(g.value) == std::signbit(static_cast<double>(direct)));
    CHECK(std::abs(g.value - static_cast<double>(direct)) <= 0.01 * std::abs(static_cast<double>(direct)));
}

TEST_CASE("off-diagonal sum grows logarithmically as the points merge") {
    const double omega = 2.0;
    const auto acc = accuracy(100'000);
    std::vector<double> values;
    for (double d : {0.1, 0.03, 0.01}) {
        const auto src = source({p1, {p1.x + d, p1.y}});
        values.push_back(g0_offdiag(*src, 0, 1, omega, acc).value);
    }
    // G0 ~ (M / pi) ln d near the diagonal: the magnitude grows like ln(1/d).
    const double slope1 = (values[1] - values[0]) / std::log(0.1 / 0.03);
    const double slope2 = (values[2] - values[1]) / std::log(0.03 / 0.01);
    CHECK(values[0] > values[1]);
    CHECK(values[1] > values[2]);
    CHECK(slope1 == doctest::Approx(-1.0 / pi).epsilon(0.2));
    CHECK(slope2 == doctest::Approx(-1.0 / pi).epsilon(0.2));
}

TEST_CASE("naive series diverges with the log-integral slope; the regularized one converges") {
    const auto src = source();
    const double omega = 1.0;
    const std::vector<std::size_t> schedule{1000, 10'000, 100'000};
    const auto naive = naive_series_divergence_witness(*src, 0, omega, schedule);
    CHECK(naive[1] < naive[0]);
    CHECK(naive[2] < naive[1]);
    const ModeTable& t = *big_table();
    for (std::size_t k = 0; k + 1 < schedule.size(); ++k) {
        const double expected = -1.0 / (2.0 * pi) * std::log(t.energy(schedule[k + 1] - 1) / t.energy(schedule[k] - 1));
        CHECK(std::abs((naive[k + 1] - naive[k]) / expected - 1.0) <= 0.10);
    }
    const auto reg = naive_series_divergence_witness(*src, 0, omega, schedule, true);
    CHECK(std::abs(reg[2] - reg[1]) < std::abs(reg[1] - reg[0]));
    CHECK(std::abs(reg[2] - reg[1]) < 0.1 * std::abs(naive[2] - naive[1]));
}

TEST_CASE("lambda-inverse matrix entries follow the definition") {
    const auto src = source();
    const auto acc = accuracy(100'000);
    const LambdaInverse li(src, {0.7, -1.3}, acc);
    const double omega = 3456.789;
    const Eigen::MatrixXd m = li.at(omega);
    CHECK(m(0, 0) == doctest::Approx(g_bar(*src, 0, omega, acc).value - 0.7).epsilon(1e-12));
    CHECK(m(1, 1) == doctest::Approx(g_bar(*src, 1, omega, acc).value + 1.3).epsilon(1e-12));
    CHECK(m(0, 1) == doctest::Approx(g0_offdiag(*src, 0, 1, omega, acc).value).epsilon(1e-12));
    CHECK(m(0, 1) == m(1, 0));
    const LambdaMatrixSample c = li.at(cplx{omega, 0.0});
    CHECK(std::abs(c.matrix(0, 0).real() - m(0, 0)) <= 1e-9);
    CHECK(std::abs(c.matrix(0, 0).imag()) <= 1e-12);
}

TEST_CASE("scaled matrix and residue behave at a pole") {
    const auto src = source();
    const auto acc = accuracy(100'000);
    const LambdaInverse li(src, {0.0, 0.0}, acc);
    const ModeTable& t = *big_table();
    const std::size_t n = 500;
    REQUIRE(t.energy(n) != t.energy(n + 1));
    REQUIRE(t.energy(n) != t.energy(n - 1));
    PoleBracket br;
    br.lo = t.energy(n);
    br.lo_first = n;
    br.lo_last = n + 1;
    br.hi = t.energy(n + 1);
    br.hi_first = n + 1;
    br.hi_last = n + 2;
    // At the lower pole the scaled matrix equals (hi - lo) times the residue.
    const Eigen::MatrixXd at_pole = li.scaled(br.lo, br);
    const Eigen::MatrixXd r = li.residue(n, n + 1);
    CHECK((at_pole - br.width() * r).cwiseAbs().maxCoeff() <= 1e-9 * r.cwiseAbs().maxCoeff());
    CHECK(r(0, 1) == doctest::Approx(src->phi(0)[n] * src->phi(1)[n]).epsilon(1e-15));
}

TEST_CASE("invalid accuracy and sources are rejected") {
    GreensAccuracy a;
    a.n_max = 0;
    CHECK_THROWS_AS(a.validate(), ContractError);
    a = GreensAccuracy{};
    a.target_abs_err = 0.0;
    CHECK_THROWS_AS(a.validate(), ContractError);
    const auto src = source();
    CHECK_THROWS_AS(g_bar(*src, 0, 5.0, accuracy(500'000)), ContractError);
    ScattererSet s{{{0.0, 0.5}}, {1.0}, 1.0};
    CHECK_THROWS_AS(s.validate(golden), ContractError);
    ScattererSet dup{{p1, p1}, {1.0, 1.0}, 1.0};
    CHECK_THROWS_AS(dup.validate(golden), ContractError);
    ScattererSet lam{{p1}, {1.0}, -1.0};
    CHECK_THROWS_AS(lam.validate(golden), ContractError);
}
