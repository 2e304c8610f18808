#include <catch2/catch_amalgamated.hpp>

#include "apfk/diophantine.hpp"
#include "test_util.hpp"

using namespace apfk;
using apfk::test::kTwoPi;

TEST_CASE("divisor is the distance to 2 pi Z") {
    std::vector<double> alpha{1.0};

    // w a.k = 2 pi exactly
    CHECK(divisor(kTwoPi, alpha, MultiIndex::unit(1)) == Catch::Approx(0.0).margin(1e-15));
    // w a.k = pi
    CHECK(divisor(std::numbers::pi, alpha, MultiIndex::unit(1)) ==
          Catch::Approx(std::numbers::pi));

    // golden mean: dist(2 pi g, 2 pi Z) = 2 pi (1 - g)
    double g = (std::sqrt(5.0) - 1.0) / 2.0;
    CHECK(divisor(kTwoPi * g, alpha, MultiIndex::unit(1)) == Catch::Approx(kTwoPi * (1.0 - g)));

    CHECK_THROWS_AS(divisor(1.0, alpha, MultiIndex()), index_error);
    CHECK(divisor(kTwoPi * g, alpha, MultiIndex::unit(1, -1)) ==
          divisor(kTwoPi * g, alpha, MultiIndex::unit(1)));
}

TEST_CASE("empirical nu") {
    std::vector<double> alpha{1.0};
    double g = (std::sqrt(5.0) - 1.0) / 2.0;

    SECTION("resonant omega gives zero") {
        auto set = IndexSet::enumerate(1, 4.0, 1.0);
        double nu = empirical_nu(kTwoPi / 3.0, alpha, set, 1.0, DiophantineStyle::product);
        CHECK(nu == Catch::Approx(0.0).margin(1e-12));  // k = 3 e1 is resonant
    }

    SECTION("two-element set, product weight") {
        auto set = IndexSet::enumerate(1, 1.0, 1.0);  // {0, +-e1}
        double tau = 0.7;
        double nu = empirical_nu(kTwoPi * g, alpha, set, tau, DiophantineStyle::product);
        CHECK(nu == Catch::Approx(2.0 * divisor(kTwoPi * g, alpha, MultiIndex::unit(1))));
    }

    SECTION("golden mean is strictly positive on K = 20") {
        auto set = IndexSet::enumerate(1, 20.0, 1.0);
        double nu = empirical_nu(kTwoPi * g, alpha, set, 1.0, DiophantineStyle::product);
        CHECK(nu > 0.0);

        // exhaustive recomputation
        double best = std::numeric_limits<double>::infinity();
        for (const MultiIndex& k : set.members()) {
            if (k.is_zero()) continue;
            best = std::min(best, divisor(kTwoPi * g, alpha, k) *
                                      diophantine_weight(k, 1.0, DiophantineStyle::product));
        }
        CHECK(nu == Catch::Approx(best));
    }

    SECTION("monotone nonincreasing in the set") {
        auto small = IndexSet::enumerate(1, 5.0, 1.0);
        auto large = IndexSet::enumerate(1, 12.0, 1.0);
        for (DiophantineStyle style : {DiophantineStyle::product, DiophantineStyle::power}) {
            double ns = empirical_nu(kTwoPi * g, alpha, small, 1.2, style);
            double nl = empirical_nu(kTwoPi * g, alpha, large, 1.2, style);
            CHECK(nl <= ns + 1e-15);
        }
    }
}

TEST_CASE("power weight depends only on |k|_1") {
    double tau = 1.4;
    MultiIndex a({{1, 2}, {3, 1}});  // |k|_1 = 3
    MultiIndex b({{2, -3}});         // |k|_1 = 3
    CHECK(diophantine_weight(a, tau, DiophantineStyle::power) ==
          Catch::Approx(diophantine_weight(b, tau, DiophantineStyle::power)));
    CHECK(diophantine_weight(a, tau, DiophantineStyle::product) !=
          diophantine_weight(b, tau, DiophantineStyle::product));
}

TEST_CASE("check report") {
    std::vector<double> alpha{1.0};
    double g = (std::sqrt(5.0) - 1.0) / 2.0;
    auto set = IndexSet::enumerate(1, 16.0, 1.0);
    double tau = 1.0;
    double nu_emp = empirical_nu(kTwoPi * g, alpha, set, tau, DiophantineStyle::product);

    auto pass = check(DiophantineParams(0.9 * nu_emp, tau, DiophantineStyle::product), kTwoPi * g,
                      alpha, set);
    CHECK(pass.pass);
    CHECK(pass.margin > 1.0);
    CHECK_FALSE(pass.witness.has_value());

    auto fail = check(DiophantineParams(1.1 * nu_emp, tau, DiophantineStyle::product), kTwoPi * g,
                      alpha, set);
    CHECK_FALSE(fail.pass);
    REQUIRE(fail.witness.has_value());
    CHECK(divisor(kTwoPi * g, alpha, *fail.witness) *
              diophantine_weight(*fail.witness, tau, DiophantineStyle::product) ==
          Catch::Approx(nu_emp));

    // constructed rational resonance inside the set: w = 2 pi * 2/5
    auto res = check(DiophantineParams(1e-6, tau, DiophantineStyle::product), kTwoPi * 2.0 / 5.0,
                     alpha, set);
    CHECK_FALSE(res.pass);
    REQUIRE(res.witness.has_value());
    CHECK(res.witness->norm_one() == 5);
}
