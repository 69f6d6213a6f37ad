#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <set>
#include <utility>

#include "oracles.hpp"
#include "pbill/basis.hpp"
#include "pbill/error.hpp"

using namespace pbill;

namespace {
constexpr double pi = std::numbers::pi;
const BilliardSpec unit_square{1.0, 1.0, 1.0};
const BilliardSpec golden{};

double quad_overlap(const BilliardSpec& s, int ax, int ay, int bx, int by) {
    std::vector<double> x, wx, y, wy;
    oracle::gauss_legendre(64, 0.0, s.lx, x, wx);
    oracle::gauss_legendre(64, 0.0, s.ly, y, wy);
    double sum = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i)
        for (std::size_t j = 0; j < y.size(); ++j)
            sum += wx[i] * wy[j] * eval_eigenfunction(s, ax, ay, {x[i], y[j]}) *
                   eval_eigenfunction(s, bx, by, {x[i], y[j]});
    return sum;
}
}  // namespace

TEST_CASE("unit square below 10 holds only the ground mode") {
    const ModeTable t = ModeTable::up_to_energy(unit_square, 10.0);
    REQUIRE(t.size() == 1);
    CHECK(t.mode(0).mx == 1);
    CHECK(t.mode(0).my == 1);
    CHECK(t.energy(0) == doctest::Approx(pi * pi).epsilon(1e-15));
    CHECK(t.mode(0).index == 1);
}

TEST_CASE("unit square below 30 holds the degenerate pair in lexicographic order") {
    const ModeTable t = ModeTable::up_to_energy(unit_square, 30.0);
    REQUIRE(t.size() == 3);
    CHECK(t.mode(1).mx == 1);
    CHECK(t.mode(1).my == 2);
    CHECK(t.mode(2).mx == 2);
    CHECK(t.mode(2).my == 1);
    CHECK(t.energy(1) == t.energy(2));
    CHECK(t.energy(1) == doctest::Approx(2.5 * pi * pi).epsilon(1e-15));
    const auto levels = t.distinct_levels();
    REQUIRE(levels.size() == 2);
    CHECK(levels[1].multiplicity() == 2);
}

TEST_CASE("golden rectangle table matches brute-force enumeration") {
    for (double e_cut : {500.0, 1234.5, 4000.0}) {
        const ModeTable t = ModeTable::up_to_energy(golden, e_cut);
        const auto brute = oracle::brute_modes(golden, e_cut);
        REQUIRE(t.size() == brute.size());
        std::set<std::pair<int, int>> a, b;
        for (std::size_t n = 0; n < t.size(); ++n) a.insert({t.mx()[n], t.my()[n]});
        for (const auto& m : brute) b.insert({m.mx, m.my});
        CHECK(a == b);
        for (std::size_t n = 0; n < t.size(); ++n) {
            CHECK(t.energy(n) == mode_energy(golden, t.mx()[n], t.my()[n]));
            if (n > 0) CHECK(t.energy(n - 1) <= t.energy(n));
        }
    }
}

TEST_CASE("completeness for random cutoffs and aspect ratios") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> cut(20.0, 3000.0), side(0.4, 2.5), mass(0.3, 3.0);
    for (int rep = 0; rep < 20; ++rep) {
        const BilliardSpec s{side(rng), side(rng), mass(rng)};
        const double e_cut = cut(rng);
        const ModeTable t = ModeTable::up_to_energy(s, e_cut);
        const auto brute = oracle::brute_modes(s, e_cut);
        CHECK(t.size() == brute.size());
    }
}

TEST_CASE("lowest keeps degenerate groups whole") {
    const ModeTable t = ModeTable::lowest(unit_square, 2);
    CHECK(t.size() == 3);
    const ModeTable g = ModeTable::lowest(golden, 1000);
    CHECK(g.size() == 1000);
}

TEST_CASE("memory budget is enforced") {
    CHECK_THROWS_AS(ModeTable::up_to_energy(golden, 1e7, 1000), ContractError);
    CHECK_THROWS_AS(ModeTable::lowest(golden, 5000, 1000), ContractError);
}

TEST_CASE("counting helpers") {
    const ModeTable t = ModeTable::up_to_energy(unit_square, 60.0);
    const double e2 = t.energy(1);
    CHECK(t.count_below(e2) == 1);
    CHECK(t.count_at_or_below(e2) == 3);
}

TEST_CASE("eigenfunction closed form and Dirichlet walls") {
    CHECK(eval_eigenfunction(unit_square, 1, 1, {0.5, 0.5}) == doctest::Approx(2.0).epsilon(1e-15));
    for (int mx : {1, 3, 17}) {
        for (int my : {1, 2, 40}) {
            CHECK(eval_eigenfunction(golden, mx, my, {0.0, 0.3}) == 0.0);
            CHECK(eval_eigenfunction(golden, mx, my, {golden.lx, 0.3}) == 0.0);
            CHECK(eval_eigenfunction(golden, mx, my, {0.4, 0.0}) == 0.0);
            CHECK(eval_eigenfunction(golden, mx, my, {0.4, golden.ly}) == 0.0);
        }
    }
    CHECK_THROWS_AS(eval_eigenfunction(golden, 1, 1, {-0.1, 0.3}), ContractError);
    CHECK_THROWS_AS(eval_eigenfunction(golden, 1, 1, {0.3, 2.0}), ContractError);
}

TEST_CASE("eigenfunctions are normalized and orthogonal under quadrature") {
    for (auto [mx, my] : {std::pair{1, 1}, {2, 3}, {5, 5}})
        CHECK(std::abs(quad_overlap(golden, mx, my, mx, my) - 1.0) <= 1e-10);
    CHECK(std::abs(quad_overlap(golden, 1, 1, 2, 1)) <= 1e-8);
    CHECK(std::abs(quad_overlap(golden, 2, 3, 3, 2)) <= 1e-8);
    CHECK(std::abs(quad_overlap(golden, 5, 5, 5, 7)) <= 1e-8);
}

TEST_CASE("Weyl density") {
    CHECK(weyl_density(unit_square) == doctest::Approx(1.0 / (2.0 * pi)).epsilon(1e-15));
    CHECK(weyl_density({2.0, 1.0, 1.0}) == doctest::Approx(1.0 / pi).epsilon(1e-15));
    const ModeTable t = ModeTable::lowest(golden, 6000);
    const double e = t.energy(5999);
    const double ratio = static_cast<double>(t.count_at_or_below(e)) / e;
    CHECK(std::abs(ratio / weyl_density(golden) - 1.0) <= 0.03);
}

TEST_CASE("invalid specs are rejected") {
    CHECK_THROWS_AS((BilliardSpec{0.0, 1.0, 1.0}.validate()), ContractError);
    CHECK_THROWS_AS((BilliardSpec{1.0, -1.0, 1.0}.validate()), ContractError);
    CHECK_THROWS_AS((BilliardSpec{1.0, 1.0, std::nan("")}.validate()), ContractError);
}
