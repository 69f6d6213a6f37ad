#include <doctest.h>

#include <cmath>
#include <complex>
#include <limits>
#include <memory>
#include <numbers>
#include <random>
#include <stdexcept>
#include <vector>

#include "oracles.hpp"
#include "pbill/error.hpp"
#include "pbill/extension.hpp"

using namespace pbill;

namespace {

constexpr double pi = std::numbers::pi;
const BilliardSpec golden{};
const Point p1{0.3137, 0.7211};
const Point p2{0.6421, 1.1093};

std::shared_ptr<const ModeTable> table(std::size_t n) {
    static std::shared_ptr<const ModeTable> t = std::make_shared<const ModeTable>(ModeTable::lowest(golden, 400'000));
    if (n > t->size()) throw std::logic_error("test table too small");
    return t;
}

GreensAccuracy accuracy(std::size_t n_max) {
    GreensAccuracy a;
    a.n_max = n_max;
    return a;
}

UnitarityReport u_report(std::vector<Point> pts, std::vector<double> vbar_inv, double lambda, std::size_t n_max) {
    auto src = std::make_shared<const SeriesTermSource>(table(n_max), std::move(pts), lambda);
    const LambdaInverse li(src, std::move(vbar_inv), accuracy(n_max));
    return unitarity_defect(li.at(cplx{0.0, lambda}), li.at(cplx{0.0, -lambda}));
}

}  // namespace

TEST_CASE("theta = pi gives vanishing inverse coupling") {
    const SeriesTermSource src(table(100'000), {p1}, 1.0);
    const Estimate v = vbar_inv_from_theta(src, 0, {pi}, accuracy(100'000));
    CHECK(std::abs(v.value) <= 1e-15);
}

TEST_CASE("inverse coupling is monotone decreasing in theta") {
    const SeriesTermSource src(table(100'000), {p1}, 1.0);
    double prev = std::numeric_limits<double>::infinity();
    for (int k = 1; k < 200; ++k) {
        const double v = vbar_inv_from_theta(src, 0, {2.0 * pi * k / 200.0}, accuracy(100'000)).value;
        CHECK(v < prev);
        prev = v;
    }
    CHECK(vbar_inv_from_theta(src, 0, {0.01}, accuracy(100'000)).value > 0.0);
    CHECK(vbar_inv_from_theta(src, 0, {2.0 * pi - 0.01}, accuracy(100'000)).value < 0.0);
}

TEST_CASE("theta round trip through the inverse map") {
    for (double lambda : {0.5, 1.0, 20.0}) {
        const SeriesTermSource src(table(100'000), {p1}, lambda);
        for (double theta : {0.05, 1.0, pi - 1e-3, pi, 4.0, 6.2}) {
            const double v = vbar_inv_from_theta(src, 0, {theta}, accuracy(100'000)).value;
            const ThetaParameter back = theta_from_vbar_inv(src, 0, v, accuracy(100'000));
            CHECK(std::abs(back.theta - theta) <= 1e-10);
        }
    }
}

TEST_CASE("theta outside [0, 2 pi) or at 0 is rejected") {
    const SeriesTermSource src(table(1000), {p1}, 1.0);
    CHECK_THROWS_AS(vbar_inv_from_theta(src, 0, {0.0}, accuracy(1000)), ContractError);
    CHECK_THROWS_AS((ThetaParameter{-0.1}.validate()), ContractError);
    CHECK_THROWS_AS((ThetaParameter{2.0 * pi}.validate()), ContractError);
}

TEST_CASE("single scatterer U equals -exp(i theta) for every Lambda") {
    for (double theta : {0.7, pi, 2.5, 5.1}) {
        std::vector<cplx> phases;
        for (double lambda : {0.5, 1.0, 5.0, 20.0}) {
            const SeriesTermSource src(table(100'000), {p1}, lambda);
            const double v = vbar_inv_from_theta(src, 0, {theta}, accuracy(100'000)).value;
            const UnitarityReport r = u_report({p1}, {v}, lambda, 100'000);
            REQUIRE(r.phase.has_value());
            const cplx expected = -std::exp(cplx{0.0, theta});
            CHECK(std::abs(*r.phase - expected) <= 1e-6);
            CHECK(r.plain_defect <= 1e-6);
            CHECK(r.metric_defect == doctest::Approx(r.plain_defect).epsilon(1e-12));
            phases.push_back(*r.phase);
        }
        for (const cplx& p : phases) CHECK(std::abs(p - phases.front()) <= 2e-6);
    }
}

TEST_CASE("U tends to -1 as the inverse coupling grows") {
    double prev = 10.0;
    for (double v : {1e2, 1e4, 1e6, 1e8}) {
        const UnitarityReport r = u_report({p1}, {v}, 1.0, 100'000);
        const double dist = std::abs(*r.phase + 1.0);
        CHECK(dist < prev);
        prev = dist;
    }
    CHECK(prev <= 1e-7);
}

TEST_CASE("two scatterers with separated conditions give a unitary U in the deficiency metric") {
    const UnitarityReport r = u_report({p1, p2}, {0.3, -1.2}, 1.0, 100'000);
    MESSAGE("plain defect " << r.plain_defect << ", metric defect " << r.metric_defect);
    CHECK(r.metric_defect <= 1e-5);
    CHECK_FALSE(r.phase.has_value());
}

TEST_CASE("metric unitarity holds to rounding at every truncation") {
    // The Gram identity is exact for any truncated series, so the ladder stays flat at rounding level.
    for (std::size_t n : {10'000u, 100'000u, 400'000u}) {
        const double d = u_report({p1, p2}, {0.3, -1.2}, 1.0, n).metric_defect;
        MESSAGE("n_max " << n << " metric defect " << d);
        CHECK(d <= 1e-12);
    }
}

TEST_CASE("hermitian conjugation law holds term by term") {
    std::mt19937_64 rng(17);
    const auto pts = oracle::random_points(rng, golden, 3);
    auto src = std::make_shared<const SeriesTermSource>(table(100'000), pts, 1.0);
    const LambdaInverse li(src, {0.4, -0.2, 1.1}, accuracy(100'000));
    CHECK(hermitian_conjugation_check(li, {1.0, 2.0}) <= 1e-12);
    CHECK(hermitian_conjugation_check(li, {5000.5, -0.3}) <= 1e-12);
    CHECK(hermitian_conjugation_check(li, {-40.0, 100.0}) <= 1e-12);

    const Eigen::MatrixXd m = li.at(1234.5);
    CHECK((m - m.transpose()).cwiseAbs().maxCoeff() == 0.0);
    const LambdaMatrixSample real_sample = li.at(cplx{1234.5, 0.0});
    CHECK(real_sample.matrix.imag().cwiseAbs().maxCoeff() == 0.0);
}
