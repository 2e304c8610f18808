#include <catch2/catch_amalgamated.hpp>

#include "apfk/oracles.hpp"
#include "apfk/short_range.hpp"
#include "test_util.hpp"

using namespace apfk;
using apfk::test::make_set;

namespace {

FrequencyBasis golden_basis(double rho = 0.35, double iota = 1.0) {
    return FrequencyBasis({1.0}, apfk::test::golden_omega(), rho, 1.0, iota);
}

ShortRangeModel sine_model(double eps, const std::shared_ptr<const IndexSet>& set,
                           const FrequencyBasis& b) {
    return ShortRangeModel(FourierSeries::sine(set, MultiIndex::unit(1), eps), b);
}

} // namespace

TEST_CASE("residual operator") {
    auto set = make_set(1, 16.0);
    auto b = golden_basis();
    auto zero = FourierSeries::zero(set);

    ShortRangeModel trivial(zero, b);
    CHECK(weighted_norm(residual(zero, 0.0, trivial, b.rho()), b.rho()) == 0.0);
    CHECK(std::abs(average(residual(zero, 0.7, trivial, b.rho())) - Complex(0.7)) < 1e-15);

    double eps = 0.01;
    auto model = sine_model(eps, set, b);
    auto e = residual(zero, 0.0, model, b.rho());
    auto expected = FourierSeries::sine(set, MultiIndex::unit(1), eps);
    CHECK(weighted_norm(e - expected, b.rho()) < 1e-15);
}

TEST_CASE("condition numbers") {
    auto set = make_set(1, 16.0);
    auto b = golden_basis();
    auto model = sine_model(0.01, set, b);

    auto c0 = condition_numbers(FourierSeries::zero(set), model, b.rho());
    CHECK(c0.n_plus == Catch::Approx(1.0));
    CHECK(c0.n_minus == Catch::Approx(1.0));
    CHECK(c0.c == Catch::Approx(1.0));

    // h = a sin sigma_1: N+ = 1 + |a| alpha_1 e^rho
    double a = 0.08;
    auto h = FourierSeries::sine(set, MultiIndex::unit(1), a);
    auto c1 = condition_numbers(h, model, b.rho());
    CHECK(c1.n_plus == Catch::Approx(1.0 + a * std::exp(b.rho())));

    // <l> = 1 identically
    auto hr = apfk::test::random_real_series(set, 17, 0.05, 1.0, true);
    auto c2 = condition_numbers(hr, model, b.rho());
    CHECK(c2.l_mean_dev < 1e-14);
}

TEST_CASE("newton step on zero residual leaves the state alone") {
    auto set = make_set(1, 16.0);
    auto b = golden_basis();
    ShortRangeModel trivial(FourierSeries::zero(set), b);
    SolverState s0 = SolverState::start(trivial);

    auto [s1, diag] = newton_step(s0, trivial, 0.3);
    CHECK(diag.delta_norm == 0.0);
    CHECK(diag.delta_lambda == 0.0);
    CHECK(s1.h.mode_count() == 0);
    CHECK(s1.lambda == 0.0);
    CHECK(s1.eps == 0.0);
}

TEST_CASE("first step reproduces the Lindstedt closed form") {
    auto set = make_set(1, 16.0);
    auto b = golden_basis();
    double eps = 1e-3;
    auto model = sine_model(eps, set, b);
    SolverState s0 = SolverState::start(model);

    auto [s1, diag] = newton_step(s0, model, 0.3);
    CHECK(std::abs(diag.delta_lambda) < 1e-15);

    double denom = 2.0 * (1.0 - std::cos(b.omega()));
    auto closed_form = FourierSeries::sine(set, MultiIndex::unit(1), eps / denom);
    CHECK(weighted_norm(diag.delta - closed_form, b.rho()) < 1e-12);
    CHECK(weighted_norm(s1.h - closed_form, 0.3) < 1e-12);
}

TEST_CASE("one step is quadratic in the residual") {
    auto set = make_set(1, 24.0);
    auto b = golden_basis();
    std::vector<double> ratios;
    for (double eps : {1e-3, 1e-4, 1e-5}) {
        auto model = sine_model(eps, set, b);
        SolverState s0 = SolverState::start(model);
        double e0 = weighted_norm(residual(s0, model), b.rho());
        auto [s1, diag] = newton_step(s0, model, b.rho());
        ratios.push_back(s1.eps / (e0 * e0));
    }
    for (double r : ratios) CHECK(r < 10.0);
    // the quadratic constant is a constant: ratios agree across three decades
    CHECK(ratios[0] == Catch::Approx(ratios[1]).epsilon(0.05));
    CHECK(ratios[1] == Catch::Approx(ratios[2]).epsilon(0.05));
}

TEST_CASE("step satisfies the quasi-Newton equation to roundoff") {
    auto set = make_set(1, 32.0);
    auto b = golden_basis(0.3, 1.0);
    auto model = sine_model(5e-3, set, b);

    // start from a small smooth h so l is a genuine series
    auto h = FourierSeries::sine(set, MultiIndex::unit(1), 0.03) +
             FourierSeries::cosine(set, MultiIndex({{1, 2}}), 0.01);
    SolverState s0{h, 0.0, b.rho(), 0.0, 0};

    auto e = residual(s0, model);
    auto [s1, diag] = newton_step(s0, model, b.rho());

    const double rho = b.rho();
    auto l = derive_alpha(h, b) + Complex(1.0);
    auto l_sum = shift_steps(l, b, 1.0) + shift_steps(l, b, -1.0);
    auto quotient = multiply(l_sum, reciprocal(l, rho, 1e-15), rho);
    auto lhs = shift_steps(diag.delta, b, 1.0) + shift_steps(diag.delta, b, -1.0) -
               multiply(quotient, diag.delta, rho) + e + Complex(diag.delta_lambda);
    CHECK(weighted_norm(lhs, rho) <= 1e-12 * weighted_norm(e, rho));
}

TEST_CASE("solve: zero force converges immediately") {
    auto set = make_set(1, 8.0);
    auto b = golden_basis();
    ShortRangeModel trivial(FourierSeries::zero(set), b);
    auto [state, rep] = solve(trivial, SolverState::start(trivial));
    CHECK(rep.converged);
    CHECK(state.iteration == 0);
    CHECK(state.h.mode_count() == 0);
    CHECK(state.lambda == 0.0);
    CHECK(rep.final_eps == 0.0);
}

TEST_CASE("solve: moderate sine force converges quadratically") {
    auto set = make_set(1, 48.0);
    auto b = golden_basis(0.35, 1.0);
    auto model = sine_model(0.05, set, b);
    auto [state, rep] = solve(model, SolverState::start(model));

    REQUIRE(rep.converged);
    CHECK(rep.final_eps <= 1e-12);
    CHECK(std::abs(average(state.h)) == 0.0);
    CHECK(real_symmetric(state.h, 1e-10));

    // quadratic convergence: empirical order >= 1.8 above the floor
    int doublings = 0;
    for (std::size_t i = 1; i + 1 < rep.history.size(); ++i) {
        double a = rep.history[i].eps, bb = rep.history[i + 1].eps;
        if (a < 0.1 && bb > 1e-14 && a > bb) {
            double order = std::log(bb) / std::log(a);
            CHECK(order >= 1.8);
            ++doublings;
        }
    }
    CHECK(doublings >= 2);
}

TEST_CASE("solve: breakdown-scale force raises a divergence error") {
    auto set = make_set(1, 32.0);
    auto b = golden_basis(0.35, 50.0);
    auto model = sine_model(2.0, set, b);
    CHECK_THROWS_AS(solve(model, SolverState::start(model)), divergence_error);
}

TEST_CASE("vanishing lemma") {
    auto set = make_set(1, 32.0);
    auto b = golden_basis();

    SECTION("zero force") {
        ShortRangeModel trivial(FourierSeries::zero(set), b,
                                FourierSeries::zero(set));
        auto [state, rep] = solve(trivial, SolverState::start(trivial));
        CHECK(vanishing_check(trivial, state).pass);
    }

    SECTION("gradient force U = d_alpha(mu cos sigma_1)") {
        double mu = 0.04;
        auto v = FourierSeries::cosine(set, MultiIndex::unit(1), mu);
        auto u = FourierSeries::sine(set, MultiIndex::unit(1), -mu);  // alpha_1 = 1
        ShortRangeModel model(u, b, v);
        auto [state, rep] = solve(model, SolverState::start(model));
        REQUIRE(rep.converged);
        auto vr = vanishing_check(model, state);
        CHECK(vr.pass);
        CHECK(std::abs(vr.lambda_star) <= 1e-10);
    }

    SECTION("non-gradient constant force is absorbed by the counterterm") {
        auto u = FourierSeries::constant(set, 0.1);
        ShortRangeModel model(u, b);
        auto [state, rep] = solve(model, SolverState::start(model));
        REQUIRE(rep.converged);
        CHECK(state.lambda == Catch::Approx(-0.1));
        CHECK(weighted_norm(state.h, 0.2) < 1e-14);
        CHECK_THROWS_AS(vanishing_check(model, state), config_error);
    }
}

TEST_CASE("uniqueness probe") {
    auto set = make_set(1, 32.0);
    auto b = golden_basis();
    auto model = sine_model(0.05, set, b);
    auto [state, rep] = solve(model, SolverState::start(model));
    REQUIRE(rep.converged);

    auto same = uniqueness_probe(model, state, 0.0);
    CHECK(same.agree);
    CHECK(same.hull_difference <= same.tolerance);

    auto nudged = uniqueness_probe(model, state, 1e-4, 99);
    CHECK(nudged.agree);
}

TEST_CASE("three-frequency gradient model") {
    auto set = make_set(3, 6.0);
    FrequencyBasis b({1.0, 0.70710678118654752, 0.36602540378443865},
                     apfk::test::golden_omega(), 0.35, 1.0, 1.0);
    auto v = FourierSeries::cosine(set, MultiIndex::unit(1), 8e-3) +
             FourierSeries::cosine(set, MultiIndex({{1, 1}, {2, 1}}), 2e-3) +
             FourierSeries::cosine(set, MultiIndex({{2, 1}, {3, -1}}), 1e-3);
    ShortRangeModel model(derive_alpha(v, b), b, v);

    auto [state, rep] = solve(model, SolverState::start(model));
    REQUIRE(rep.converged);
    CHECK(rep.final_eps <= 1e-12);
    CHECK(vanishing_check(model, state).pass);
    CHECK(real_symmetric(state.h, 1e-10));

    // cross-check against the dense oracle on the same set
    auto dense = oracle_dense_newton(model, set, 1e-13);
    double diff = 0.0;
    for (const MultiIndex& k : set->members())
        diff = std::max(diff, std::abs(state.h.coeff(k) - dense.h.coeff(k)));
    CHECK(diff <= 1e-9);
}

TEST_CASE("mean of h stays zero along the iteration") {
    auto set = make_set(1, 32.0);
    auto b = golden_basis();
    auto model = sine_model(0.03, set, b);
    SolverState s = SolverState::start(model);
    s.eps = weighted_norm(residual(s, model), s.rho);
    for (int n = 1; n <= 4; ++n) {
        auto [next, diag] = newton_step(s, model, s.rho);
        s = next;
        CHECK(std::abs(average(s.h)) == 0.0);
    }
}
