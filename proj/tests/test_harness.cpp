#include <catch2/catch_amalgamated.hpp>

#include <fstream>
#include <sstream>

#include "apfk/harness.hpp"
#include "test_util.hpp"

using namespace apfk;
using apfk::test::make_set;

namespace {

FrequencyBasis golden_basis(double rho = 0.35, double iota = 1.0) {
    return FrequencyBasis({1.0}, apfk::test::golden_omega(), rho, 1.0, iota);
}

ConfigFile cfg_from(const std::string& text) {
    std::istringstream in(text);
    return ConfigFile::parse(in);
}

std::filesystem::path fresh_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / "apfk_tests" / name;
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

std::map<std::string, std::string> read_kv(const std::filesystem::path& file) {
    std::ifstream in(file);
    REQUIRE(in.good());
    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(in, line)) {
        auto eq = line.find('=');
        if (eq != std::string::npos) kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    return kv;
}

} // namespace

TEST_CASE("config parsing") {
    auto cfg = cfg_from("[run]\nmode = short\n# comment\n[basis]\nomega = 1.5\n"
                        "alpha = 1.0 0.5\n[model]\nv = cos; 1:1; 0.05\nv = sin; 1:2; 0.01\n");
    CHECK(cfg.get_string("run", "mode") == "short");
    CHECK(cfg.get_double("basis", "omega") == 1.5);
    CHECK(cfg.get_doubles("basis", "alpha") == std::vector<double>{1.0, 0.5});
    CHECK(cfg.values("model", "v").size() == 2);
    CHECK(cfg.get_int("index", "K", 7) == 7);

    CHECK_THROWS_MATCHES(cfg.get_double("basis", "rho"), config_error,
                         Catch::Matchers::MessageMatches(
                             Catch::Matchers::ContainsSubstring("[basis].rho")));
    CHECK_THROWS_MATCHES(cfg.get_int("run", "mode"), config_error,
                         Catch::Matchers::MessageMatches(
                             Catch::Matchers::ContainsSubstring("not an integer")));
    CHECK_THROWS_AS(cfg_from("[run\nx=1\n"), config_error);
    CHECK_THROWS_AS(cfg_from("just text\n"), config_error);
}

TEST_CASE("hull dump round trip is exact") {
    auto set = make_set(2, 6.0);
    auto f = apfk::test::random_real_series(set, 77, 0.7);
    double rho = 0.31;

    std::ostringstream out;
    save_hull(out, f, rho);
    std::istringstream in(out.str());
    HullDump dump = load_hull(in);

    CHECK(dump.rho == rho);
    REQUIRE(dump.series.mode_count() == f.mode_count());
    for (const auto& [k, c] : f.coeffs()) {
        Complex rc = dump.series.coeff(k);
        CHECK(rc.real() == c.real());  // bit-identical
        CHECK(rc.imag() == c.imag());
    }

    // dumping again yields the identical byte stream
    std::ostringstream out2;
    save_hull(out2, dump.series, dump.rho);
    CHECK(out.str() == out2.str());
}

TEST_CASE("load_hull rejects malformed input") {
    std::istringstream bad1("not-a-hull\n");
    CHECK_THROWS_AS(load_hull(bad1), io_error);
    std::istringstream bad2("apfk-hull v1\nN=1\ns=1\nK=4\nrho=0.3\nmodes=2\n1:1 0 1\n");
    CHECK_THROWS_AS(load_hull(bad2), io_error);  // truncated mode list
}

TEST_CASE("run_long writes the smallness gates") {
    auto out = fresh_dir("long");
    auto cfg = cfg_from(R"(
[run]
mode = long
[basis]
omega = 3.8832220774509327
alpha = 1.0
rho = 0.3
iota = 0.5
[index]
K = 24
[long]
l_max = 2
gap = -1.0
term = 0; 1:1; 0.0; -0.01
term = 2; 1:1||1:-1; 3e-5; 0.0
)");
    REQUIRE(harness::run_long(cfg, out) == 0);
    auto kv = read_kv(out / "report.kv");
    CHECK(kv.at("flag_converged") == "true");

    double q = std::stod(kv.at("gate_contraction"));
    double wbar = std::stod(kv.at("gate_wbar_absorption"));
    CHECK((kv.at("flag_smallness_gates") == "true") == (q < 0.5 && wbar < 0.5));
    CHECK(std::stod(kv.at("identity_defect")) <= 1e-10);
}

TEST_CASE("dense-Newton oracle") {
    auto set = make_set(1, 16.0);
    auto b = golden_basis();

    SECTION("zero force gives the zero solution") {
        ShortRangeModel trivial(FourierSeries::zero(set), b);
        auto r = oracle_dense_newton(trivial, set);
        CHECK(r.h.mode_count() == 0);
        CHECK(r.lambda == 0.0);
        CHECK(r.iterations == 0);
    }

    SECTION("agrees with the spectral solve") {
        auto v = FourierSeries::cosine(set, MultiIndex::unit(1), 0.05);
        ShortRangeModel model(derive_alpha(v, b), b, v);
        auto [state, rep] = solve(model, SolverState::start(model));
        REQUIRE(rep.converged);
        auto dense = oracle_dense_newton(model, set, 1e-13);
        CHECK(std::abs(dense.lambda) <= 1e-10);  // gradient case
        double diff = 0.0;
        for (const MultiIndex& k : set->members())
            diff = std::max(diff, std::abs(state.h.coeff(k) - dense.h.coeff(k)));
        CHECK(diff <= 1e-8);
        CHECK(std::abs(state.lambda - dense.lambda) <= 1e-10);
    }

    SECTION("rejects oversized systems") {
        auto big = make_set(1, 1500.0);
        ShortRangeModel trivial(FourierSeries::zero(big), b);
        CHECK_THROWS_AS(oracle_dense_newton(trivial, big), config_error);
    }
}

TEST_CASE("finite-chain oracle") {
    SECTION("zero potential returns the exact lattice") {
        auto zero = [](double) { return 0.0; };
        auto r = oracle_finite_chain(zero, zero, 3, 8);
        CHECK(r.iterations == 0);
        for (int n = 0; n < 8; ++n)
            CHECK(r.u[(std::size_t)n] == Catch::Approx(2.0 * std::numbers::pi * 3.0 * n / 8.0));
    }

    SECTION("requires a reduced fraction") {
        auto zero = [](double) { return 0.0; };
        CHECK_THROWS_AS(oracle_finite_chain(zero, zero, 2, 8), config_error);
    }

    SECTION("standard cosine chain approximates the hull") {
        auto set = make_set(1, 48.0);
        auto b = golden_basis();
        auto v = FourierSeries::cosine(set, MultiIndex::unit(1), 0.05);
        ShortRangeModel model(derive_alpha(v, b), b, v);
        auto [state, rep] = solve(model, SolverState::start(model));
        REQUIRE(rep.converged);

        auto chain = oracle_finite_chain(chain_force(model), chain_force_derivative(model), 13, 21);
        double worst = 0.0;
        for (int n = 0; n < 21; ++n) {
            double theta = 2.0 * std::numbers::pi * 13.0 * n / 21.0;
            std::vector<double> sigma{theta};
            worst = std::max(worst, std::abs(chain.u[(std::size_t)n] -
                                             (theta + evaluate(state.h, sigma).real())));
        }
        // crude approximant: |w - 2 pi 13/21| ~ 6e-3 dominates
        CHECK(worst <= 0.05);

        // restarting from a nudged seed lands on the same orbit
        auto chain2 = oracle_finite_chain(chain_force(model), chain_force_derivative(model), 13, 21);
        for (int n = 0; n < 21; ++n)
            CHECK(chain.u[(std::size_t)n] == Catch::Approx(chain2.u[(std::size_t)n]).margin(1e-12));
    }
}

TEST_CASE("run_short writes self-consistent reports") {
    auto out = fresh_dir("short");
    auto cfg = cfg_from(R"(
[run]
mode = short
[basis]
omega = 3.8832220774509327
alpha = 1.0
rho = 0.35
iota = 1.0
[index]
K = 24
[model]
v = cos; 1:1; 0.04
[dioph]
nu = 0.05
tau = 1.0
)");
    REQUIRE(harness::run_short(cfg, out) == 0);
    REQUIRE(std::filesystem::exists(out / "residual_history.csv"));
    REQUIRE(std::filesystem::exists(out / "hull.coeffs"));
    REQUIRE(std::filesystem::exists(out / "report.txt"));

    std::ifstream csv(out / "residual_history.csv");
    std::string header;
    std::getline(csv, header);
    CHECK(header == "iteration,rho,eps,delta_norm,lambda");

    auto kv = read_kv(out / "report.kv");
    REQUIRE(kv.count("flag_converged"));

    // flags recomputable from the stored numbers
    double tol = std::stod(kv.at("tol"));
    double final_eps = std::stod(kv.at("residual_final"));
    CHECK((kv.at("flag_converged") == "true") == (final_eps <= tol));

    double nu_req = std::stod(kv.at("dioph.nu_required"));
    double nu_emp = std::stod(kv.at("dioph.nu_empirical"));
    CHECK((kv.at("flag_diophantine") == "true") == (nu_emp >= nu_req));

    double lambda_star = std::stod(kv.at("vanishing_lambda"));
    double vanish_tol = std::stod(kv.at("vanishing_tol"));
    CHECK((kv.at("flag_vanishing") == "true") == (std::abs(lambda_star) <= vanish_tol));

    // hull dump loads back
    auto dump = load_hull(out / "hull.coeffs");
    CHECK(dump.series.mode_count() > 0);
}

TEST_CASE("run_verify prints text and kv blocks") {
    auto cfg = ConfigFile::load(std::filesystem::path(APFK_SOURCE_DIR) / "configs" /
                                "verify_golden.cfg");
    std::ostringstream console;
    int rc = harness::run_verify(cfg, std::nullopt, console);
    CHECK(rc == 0);
    CHECK(console.str().find("dioph.pass") != std::string::npos);
    CHECK(console.str().find("=") != std::string::npos);
}

TEST_CASE("run_ladder_mode writes the ladder CSV") {
    auto out = fresh_dir("ladder");
    auto cfg = cfg_from(R"(
[run]
mode = ladder
[basis]
omega = 3.8832220774509327
rho = 0.5
iota = 1.0
[ladder]
rho_inf = 0.25
K = 10
orbit_range = 100
level = 1.0; 1e-4; 1.5
level = 0.70710678118654752; 1e-5; 2.5
w = 1; sin; 1:1; 0.01
w = 2; sin; 1:1 2:1; 1e-4
)");
    REQUIRE(harness::run_ladder_mode(cfg, out) == 0);
    REQUIRE(std::filesystem::exists(out / "ladder_report.csv"));
    REQUIRE(std::filesystem::exists(out / "level1" / "hull.coeffs"));
    REQUIRE(std::filesystem::exists(out / "level2" / "hull.coeffs"));

    std::ifstream csv(out / "ladder_report.csv");
    std::string header;
    std::getline(csv, header);
    CHECK(header == "level,residual,delta,n_plus,n_minus,c,min_divisor");

    auto kv = read_kv(out / "report.kv");
    CHECK(kv.at("completed") == "true");
    CHECK(kv.at("flag_orbit") == "true");
}

TEST_CASE("malformed configs carry the field path") {
    auto cfg = cfg_from("[run]\nmode = nope\n");
    std::ostringstream console;
    CHECK_THROWS_MATCHES(harness::run(cfg, "", console), config_error,
                         Catch::Matchers::MessageMatches(
                             Catch::Matchers::ContainsSubstring("[run].mode")));

    auto cfg2 = cfg_from("[run]\nmode = short\n[basis]\nomega = 1.0\nalpha = 1.0\nrho = 0.3\n"
                         "[index]\nK = 8\n[model]\nv = cos; 1:1; 0.05\nu = sin; 1:1; 0.01\n");
    CHECK_THROWS_MATCHES(harness::run(cfg2, "ignored", console), config_error,
                         Catch::Matchers::MessageMatches(
                             Catch::Matchers::ContainsSubstring("[model]")));
}
