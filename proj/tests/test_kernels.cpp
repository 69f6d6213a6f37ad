#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "pbill/kernels.hpp"

using namespace pbill::kernels;

namespace {

struct Data {
    std::vector<double> energy;
    std::vector<std::vector<double>> phi;
    std::vector<std::span<const double>> spans;
};

Data make_data(std::size_t n, std::size_t cols, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> gap(0.1, 7.0), val(-2.0, 2.0);
    Data d;
    double e = 5.0;
    for (std::size_t k = 0; k < n; ++k) d.energy.push_back(e += gap(rng));
    d.phi.resize(cols);
    for (auto& c : d.phi)
        for (std::size_t k = 0; k < n; ++k) c.push_back(val(rng));
    for (const auto& c : d.phi) d.spans.emplace_back(c);
    return d;
}

std::vector<double> squares(const std::vector<double>& v) {
    std::vector<double> out;
    for (double x : v) out.push_back(x * x);
    return out;
}

}  // namespace

TEST_CASE("serial kernels match long double sums") {
    const Data d = make_data(50'000, 1, 3);
    const auto w = squares(d.phi[0]);
    const double omega = 1234.567;
    long double ref = 0.0L, ref_slope = 0.0L, ref_ct = 0.0L;
    for (std::size_t k = 0; k < w.size(); ++k) {
        const long double den = omega - static_cast<long double>(d.energy[k]);
        ref += w[k] / den;
        ref_slope -= w[k] / (den * den);
        ref_ct += w[k] * (d.energy[k] / (static_cast<long double>(d.energy[k]) * d.energy[k] + 4.0L));
    }
    CHECK(serial::resolvent_sum(w, d.energy, omega) == doctest::Approx(static_cast<double>(ref)).epsilon(1e-11));
    const SumSlope s = serial::resolvent_sum_slope(w, d.energy, omega);
    CHECK(s.sum == doctest::Approx(static_cast<double>(ref)).epsilon(1e-11));
    CHECK(s.slope == doctest::Approx(static_cast<double>(ref_slope)).epsilon(1e-11));
    CHECK(serial::counterterm_sum(w, d.energy, 2.0) == doctest::Approx(static_cast<double>(ref_ct)).epsilon(1e-12));
}

TEST_CASE("parallel kernels agree with the serial reference") {
    parallel::set_threads(4);
    for (std::size_t n : {100u, 20'000u, 200'003u}) {
        const Data d = make_data(n, 3, static_cast<unsigned>(n));
        const auto w = squares(d.phi[1]);
        for (double omega : {-50.0, 777.77, 1e5 + 0.5}) {
            const double a = serial::resolvent_sum(w, d.energy, omega);
            const double b = parallel::resolvent_sum(w, d.energy, omega);
            CHECK(b == doctest::Approx(a).epsilon(1e-12));
            const SumSlope sa = serial::resolvent_sum_slope(w, d.energy, omega);
            const SumSlope sb = parallel::resolvent_sum_slope(w, d.energy, omega);
            CHECK(sb.sum == doctest::Approx(sa.sum).epsilon(1e-12));
            CHECK(sb.slope == doctest::Approx(sa.slope).epsilon(1e-12));
            const cplx z{omega, 3.0};
            const cplx ca = serial::resolvent_sum(w, d.energy, z);
            const cplx cb = parallel::resolvent_sum(w, d.energy, z);
            CHECK(std::abs(ca - cb) <= 1e-12 * std::abs(ca) + 1e-300);

            Columns cols(d.spans);
            std::vector<double> pa(packed_size(3), 1.0), pb(packed_size(3), 1.0);
            serial::pair_sums(cols, d.energy, omega, pa);
            parallel::pair_sums(cols, d.energy, omega, pb);
            for (std::size_t k = 0; k < pa.size(); ++k) CHECK(pb[k] == doctest::Approx(pa[k]).epsilon(1e-11));
            std::vector<cplx> qa(packed_size(3)), qb(packed_size(3));
            serial::pair_sums(cols, d.energy, z, qa);
            parallel::pair_sums(cols, d.energy, z, qb);
            for (std::size_t k = 0; k < qa.size(); ++k) CHECK(std::abs(qa[k] - qb[k]) <= 1e-11 * std::abs(qa[k]) + 1e-14);
        }
        CHECK(parallel::counterterm_sum(w, d.energy, 1.0) ==
              doctest::Approx(serial::counterterm_sum(w, d.energy, 1.0)).epsilon(1e-12));
    }
}

TEST_CASE("parallel kernels are reproducible for a fixed thread count") {
    parallel::set_threads(3);
    const Data d = make_data(300'000, 2, 11);
    const auto w = squares(d.phi[0]);
    const double a = parallel::resolvent_sum(w, d.energy, 4321.0);
    const double b = parallel::resolvent_sum(w, d.energy, 4321.0);
    CHECK(a == b);
}

TEST_CASE("pair sums accumulate into the packed triangle") {
    const Data d = make_data(10, 2, 5);
    Columns cols(d.spans);
    std::vector<double> out(packed_size(2), 0.0);
    serial::pair_sums(cols, d.energy, 1.0, out);
    double s01 = 0.0, s11 = 0.0;
    for (std::size_t k = 0; k < 10; ++k) {
        s01 += d.phi[0][k] * d.phi[1][k] / (1.0 - d.energy[k]);
        s11 += d.phi[1][k] * d.phi[1][k] / (1.0 - d.energy[k]);
    }
    CHECK(out[packed_index(0, 1, 2)] == doctest::Approx(s01).epsilon(1e-14));
    CHECK(out[packed_index(1, 1, 2)] == doctest::Approx(s11).epsilon(1e-14));
}
