#pragma once

// Configuration-driven runs: model builders for each mode, the run drivers
// that write hull dumps, CSV histories and verification reports, and the
// oracle-comparison harness.

#include <filesystem>
#include <iostream>
#include <numbers>

#include "apfk/config.hpp"
#include "apfk/continuation.hpp"
#include "apfk/diophantine.hpp"
#include "apfk/io.hpp"
#include "apfk/long_range.hpp"
#include "apfk/oracles.hpp"
#include "apfk/short_range.hpp"

namespace apfk::harness {

namespace fs = std::filesystem;

inline FrequencyBasis build_basis(const ConfigFile& cfg) {
    return FrequencyBasis(cfg.get_doubles("basis", "alpha"), cfg.get_double("basis", "omega"),
                          cfg.get_double("basis", "rho"), cfg.get_double("basis", "s", 1.0),
                          cfg.get_double("basis", "iota", 1.0));
}

inline std::shared_ptr<const IndexSet> build_index_set(const ConfigFile& cfg,
                                                       const FrequencyBasis& basis) {
    int n = cfg.get_int("index", "N", basis.frequency_count());
    if (n != basis.frequency_count())
        throw config_error("[index].N: must equal the number of alpha entries");
    auto cap = static_cast<std::uint64_t>(
        cfg.get_double("index", "cap", static_cast<double>(IndexSet::default_cardinality_cap())));
    return std::make_shared<IndexSet>(
        IndexSet::enumerate(n, cfg.get_double("index", "K"), basis.s(), cap));
}

// "cos|sin; k-text; amplitude[; phase]"
inline FourierSeries parse_term_sum(const ConfigFile& cfg, const std::string& section,
                                    const std::string& key,
                                    const std::shared_ptr<const IndexSet>& set) {
    FourierSeries sum(set);
    for (const std::string& record : cfg.values(section, key)) {
        auto fields = split_fields(record);
        if (fields.size() < 3 || fields.size() > 4)
            throw config_error(ConfigFile::path(section, key) +
                               ": expected 'cos|sin; k; amplitude[; phase]', got '" + record + "'");
        MultiIndex k = MultiIndex::parse(fields[1]);
        double amplitude = cfg.to_double(section, key, fields[2]);
        double phase = fields.size() == 4 ? cfg.to_double(section, key, fields[3]) : 0.0;
        if (fields[0] == "cos")
            sum += FourierSeries::cosine(set, k, amplitude, phase);
        else if (fields[0] == "sin")
            sum += FourierSeries::sine(set, k, amplitude, phase);
        else
            throw config_error(ConfigFile::path(section, key) + ": unknown kind '" + fields[0] +
                               "'");
    }
    return sum;
}

inline ShortRangeModel build_short_model(const ConfigFile& cfg,
                                         const std::shared_ptr<const IndexSet>& set,
                                         const FrequencyBasis& basis) {
    bool has_u = cfg.has("model", "u"), has_v = cfg.has("model", "v");
    if (has_u == has_v)
        throw config_error("[model]: give the force as either 'u' records or 'v' records");
    if (has_v) {
        FourierSeries v = parse_term_sum(cfg, "model", "v", set);
        return ShortRangeModel(derive_alpha(v, basis), basis, v);
    }
    return ShortRangeModel(parse_term_sum(cfg, "model", "u", set), basis);
}

// "L; k0|k1|...|kL; re; im" records plus an optional harmonic "gap" weight.
// Tuples are symmetrized: the negated mirror is added when absent.
inline LongRangeModel build_long_model(const ConfigFile& cfg,
                                       const std::shared_ptr<const IndexSet>& set,
                                       const FrequencyBasis& basis) {
    std::map<int, InteractionTerm> by_range;
    auto term_at = [&](int range) -> InteractionTerm& {
        auto it = by_range.find(range);
        if (it == by_range.end()) it = by_range.emplace(range, InteractionTerm(range)).first;
        return it->second;
    };

    double gap = cfg.get_double("long", "gap", 0.0);
    if (gap != 0.0) term_at(1).set_gap_weight(gap);

    for (const std::string& record : cfg.values("long", "term")) {
        auto fields = split_fields(record);
        if (fields.size() != 4)
            throw config_error("[long].term: expected 'L; k0|k1|...|kL; re; im', got '" + record +
                               "'");
        int range = cfg.to_int("long", "term", fields[0]);
        auto slot_texts = split_fields(fields[1], '|');
        if (static_cast<int>(slot_texts.size()) != range + 1)
            throw config_error("[long].term: tuple needs " + std::to_string(range + 1) +
                               " slots: '" + record + "'");
        InteractionTerm::Tuple tuple;
        for (const std::string& t : slot_texts) tuple.push_back(MultiIndex::parse(t));
        Complex c(cfg.to_double("long", "term", fields[2]),
                  cfg.to_double("long", "term", fields[3]));
        term_at(range).add_tuple(tuple, c);
    }

    // symmetrize missing mirrors
    std::vector<InteractionTerm> terms;
    for (auto& [range, term] : by_range) {
        InteractionTerm sym(range);
        sym.set_gap_weight(term.gap_weight());
        for (const auto& [tuple, c] : term.coeffs()) {
            InteractionTerm::Tuple neg(tuple.size());
            for (std::size_t i = 0; i < tuple.size(); ++i) neg[i] = -tuple[i];
            auto mirror = term.coeffs().find(neg);
            if (mirror == term.coeffs().end()) {
                sym.add_tuple(tuple, c);
                sym.add_tuple(neg, std::conj(c));
            } else {
                sym.add_tuple(tuple, c);
            }
        }
        terms.push_back(std::move(sym));
    }
    int l_max = cfg.get_int("long", "l_max", -1);
    if (l_max >= 0)
        for (const auto& t : terms)
            if (t.range() > l_max)
                throw config_error("[long].l_max: term at range " + std::to_string(t.range()) +
                                   " exceeds l_max");
    return LongRangeModel(std::move(terms), basis, set);
}

inline SolveOptions build_solve_options(const ConfigFile& cfg) {
    SolveOptions opts;
    opts.tol = cfg.get_double("solve", "tol", opts.tol);
    opts.max_iter = cfg.get_int("solve", "max_iter", opts.max_iter);
    opts.vanish_tol = cfg.get_double("solve", "vanish_tol", opts.vanish_tol);
    opts.max_condition = cfg.get_double("solve", "max_condition", opts.max_condition);
    opts.floor.floor = cfg.get_double("solve", "divisor_floor", opts.floor.floor);
    std::string policy = cfg.get_string("solve", "divisor_policy", "error");
    if (policy == "clamp")
        opts.floor.policy = DivisorFloor::Policy::clamp;
    else if (policy != "error")
        throw config_error("[solve].divisor_policy: 'error' or 'clamp'");
    return opts;
}

// "alpha; nu; tau" level records plus "level; cos|sin; k; amplitude[; phase]"
// force records.
inline FrequencyLadder build_ladder(const ConfigFile& cfg) {
    double omega = cfg.get_double("basis", "omega");
    double rho = cfg.get_double("basis", "rho");
    double s = cfg.get_double("basis", "s", 1.0);
    double iota = cfg.get_double("basis", "iota", 1.0);
    double rho_inf = cfg.get_double("ladder", "rho_inf");
    double K = cfg.get_double("ladder", "K");

    FrequencyLadder ladder(omega, rho, rho_inf, s, iota, K);
    for (const std::string& record : cfg.values("ladder", "level")) {
        auto fields = split_fields(record);
        if (fields.size() != 3)
            throw config_error("[ladder].level: expected 'alpha; nu; tau', got '" + record + "'");
        ladder.add_level(cfg.to_double("ladder", "level", fields[0]),
                         cfg.to_double("ladder", "level", fields[1]),
                         cfg.to_double("ladder", "level", fields[2]));
    }
    if (ladder.level_count() == 0) throw config_error("[ladder].level: at least one level");

    std::vector<FourierSeries> forces;
    for (int j = 1; j <= ladder.level_count(); ++j)
        forces.push_back(FourierSeries::zero(ladder.set_at(j)));
    for (const std::string& record : cfg.values("ladder", "w")) {
        auto fields = split_fields(record);
        if (fields.size() < 4 || fields.size() > 5)
            throw config_error("[ladder].w: expected 'level; cos|sin; k; amplitude[; phase]', got '" +
                               record + "'");
        int level = cfg.to_int("ladder", "w", fields[0]);
        if (level < 1 || level > ladder.level_count())
            throw config_error("[ladder].w: level " + fields[0] + " out of range");
        auto set = ladder.set_at(level);
        MultiIndex k = MultiIndex::parse(fields[2]);
        double amplitude = cfg.to_double("ladder", "w", fields[3]);
        double phase = fields.size() == 5 ? cfg.to_double("ladder", "w", fields[4]) : 0.0;
        if (fields[1] == "cos")
            forces[static_cast<std::size_t>(level - 1)] +=
                FourierSeries::cosine(set, k, amplitude, phase);
        else if (fields[1] == "sin")
            forces[static_cast<std::size_t>(level - 1)] +=
                FourierSeries::sine(set, k, amplitude, phase);
        else
            throw config_error("[ladder].w: unknown kind '" + fields[1] + "'");
    }
    for (int j = 1; j <= ladder.level_count(); ++j)
        ladder.set_level_force(j, std::move(forces[static_cast<std::size_t>(j - 1)]));
    return ladder;
}

inline std::optional<DiophantineParams> build_dioph(const ConfigFile& cfg) {
    if (!cfg.has_section("dioph")) return std::nullopt;
    std::string style_text = cfg.get_string("dioph", "style", "product");
    DiophantineStyle style;
    if (style_text == "product")
        style = DiophantineStyle::product;
    else if (style_text == "power")
        style = DiophantineStyle::power;
    else
        throw config_error("[dioph].style: 'product' or 'power'");
    return DiophantineParams(cfg.get_double("dioph", "nu"), cfg.get_double("dioph", "tau"), style,
                             cfg.get_int("dioph", "level", 0));
}

inline std::vector<std::vector<std::string>> history_rows(
    const std::vector<IterationRow>& history) {
    std::vector<std::vector<std::string>> rows;
    for (const IterationRow& r : history)
        rows.push_back({std::to_string(r.iteration), fmt_double(r.rho), fmt_double(r.eps),
                        fmt_double(r.delta_norm), fmt_double(r.lambda)});
    return rows;
}

inline void add_history_summary(KvReport& kv, const std::vector<IterationRow>& history) {
    for (const IterationRow& r : history) {
        std::string p = "iter" + std::to_string(r.iteration) + ".";
        kv.add(p + "rho", r.rho);
        kv.add(p + "eps", r.eps);
        kv.add(p + "n_plus", r.n_plus);
        kv.add(p + "n_minus", r.n_minus);
        kv.add(p + "c", r.c);
        kv.add(p + "min_divisor", r.min_divisor);
        kv.add(p + "trunc_loss", r.trunc_loss);
    }
}

inline void add_dioph_report(KvReport& kv, const DiophantineReport& rep,
                             const std::string& prefix) {
    kv.add(prefix + "style", to_string(rep.style));
    kv.add(prefix + "nu_required", rep.nu);
    kv.add(prefix + "tau", rep.tau);
    kv.add(prefix + "nu_empirical", rep.empirical_nu);
    kv.add(prefix + "margin", rep.margin);
    kv.add(prefix + "min_divisor", rep.min_divisor);
    kv.add(prefix + "checked_indices", rep.checked);
    kv.add(prefix + "worst_index", "'" + rep.worst_index.to_string() + "'");
    kv.add(prefix + "pass", rep.pass);
    if (rep.witness) kv.add(prefix + "witness", "'" + rep.witness->to_string() + "'");
}

inline int run_short(const ConfigFile& cfg, const fs::path& out) {
    FrequencyBasis basis = build_basis(cfg);
    auto set = build_index_set(cfg, basis);
    ShortRangeModel model = build_short_model(cfg, set, basis);
    SolveOptions opts = build_solve_options(cfg);

    auto [state, rep] = solve(model, SolverState::start(model), opts);

    fs::create_directories(out);
    write_csv(out / "residual_history.csv", {"iteration", "rho", "eps", "delta_norm", "lambda"},
              history_rows(rep.history));
    save_hull(out / "hull.coeffs", state.h, rep.report_rho);

    KvReport kv;
    kv.add("mode", std::string("short"));
    kv.add("converged", rep.converged);
    kv.add("stop_reason", rep.stop_reason);
    kv.add("iterations", rep.history.size() - 1);
    kv.add("rho_start", rep.rho_start);
    kv.add("rho_final", state.rho);
    kv.add("report_rho", rep.report_rho);
    kv.add("eps0", rep.eps0);
    kv.add("residual_final", rep.final_eps);
    kv.add("residual_at_report_rho", rep.final_eps_report);
    kv.add("tol", opts.tol);
    kv.add("lambda_star", state.lambda);
    kv.add("hull_drift", rep.hull_drift);
    kv.add("lambda_drift", rep.lambda_drift);
    kv.add("c1_observed", rep.c1_observed);
    kv.add("c2_observed", rep.c2_observed);
    ConditionNumbers cond = condition_numbers(state.h, model, state.rho, opts.series_tol);
    kv.add("n_plus", cond.n_plus);
    kv.add("n_minus", cond.n_minus);
    kv.add("c", cond.c);
    kv.add("flag_nondegenerate",
           cond.n_plus < opts.max_condition && cond.n_minus < opts.max_condition &&
               cond.c > 1.0 / opts.max_condition);
    kv.add("min_divisor", rep.min_divisor);
    kv.add("empirical_nu_tau1", rep.empirical_nu);
    kv.add("trunc_loss_total", rep.trunc_loss_total);
    kv.add("flag_converged", rep.converged);
    if (auto dioph = build_dioph(cfg)) {
        std::vector<double> alpha = basis.alpha();
        auto dr = check(*dioph, basis.omega(), alpha, *set);
        add_dioph_report(kv, dr, "dioph.");
        kv.add("flag_diophantine", dr.pass);
    }
    if (model.gradient_declared()) {
        auto vr = vanishing_check(model, state, opts.vanish_tol);
        kv.add("vanishing_lambda", vr.lambda_star);
        kv.add("vanishing_tol", vr.tol);
        kv.add("flag_vanishing", vr.pass);
    }
    add_history_summary(kv, rep.history);
    kv.save(out);
    return 0;
}

inline int run_long(const ConfigFile& cfg, const fs::path& out) {
    FrequencyBasis basis = build_basis(cfg);
    auto set = build_index_set(cfg, basis);
    LongRangeModel model = build_long_model(cfg, set, basis);
    LongSolveOptions opts;
    opts.tol = cfg.get_double("solve", "tol", opts.tol);
    opts.max_iter = cfg.get_int("solve", "max_iter", opts.max_iter);

    auto [state, rep] = solve_long(model, LongState::start(model), opts);
    LongRangeVerification ver = verify_long(state.h, model, state.rho, opts.series_tol);

    fs::create_directories(out);
    write_csv(out / "residual_history.csv", {"iteration", "rho", "eps", "delta_norm", "lambda"},
              history_rows(rep.history));
    save_hull(out / "hull.coeffs", state.h, rep.report_rho);

    KvReport kv;
    kv.add("mode", std::string("long"));
    kv.add("converged", rep.converged);
    kv.add("stop_reason", rep.stop_reason);
    kv.add("iterations", rep.history.size() - 1);
    kv.add("l_max", model.l_max());
    kv.add("eps0", rep.eps0);
    kv.add("residual_final", rep.final_eps);
    kv.add("tol", opts.tol);
    kv.add("hull_drift", rep.hull_drift);
    kv.add("n_plus", ver.cond.n_plus);
    kv.add("n_minus", ver.cond.n_minus);
    kv.add("c", ver.cond.c);
    for (std::size_t l = 0; l < ver.m_values.size(); ++l)
        kv.add("M_" + std::to_string(l), ver.m_values[l]);
    kv.add("beta", ver.bounds.beta);
    kv.add("T_bound", ver.bounds.t_bound);
    kv.add("U_bound", ver.bounds.u_bound);
    kv.add("gate_contraction", ver.gate_contraction);
    kv.add("gate_wbar_absorption", ver.gate_wbar_absorption);
    kv.add("gate_product_literal", ver.gate_product_literal);
    kv.add("flag_smallness_gates", ver.bounds.gates_ok);
    kv.add("identity_defect", ver.identity_defect);
    kv.add("flag_identity_defect", ver.identity_defect <= 1e-10);
    kv.add("min_divisor", ver.min_divisor);
    kv.add("empirical_nu_tau1", ver.empirical_nu);
    kv.add("fixed_point_contraction", rep.worst_contraction);
    kv.add("trunc_loss_total", rep.trunc_loss_total);
    kv.add("flag_converged", rep.converged);
    add_history_summary(kv, rep.history);
    kv.save(out);
    return 0;
}

inline int run_ladder_mode(const ConfigFile& cfg, const fs::path& out) {
    FrequencyLadder ladder = build_ladder(cfg);
    SolveOptions opts = build_solve_options(cfg);
    int orbit_range = cfg.get_int("ladder", "orbit_range", 500);

    auto [state, rep] = run_ladder(ladder, opts, orbit_range);

    fs::create_directories(out);
    std::vector<std::vector<std::string>> rows;
    for (const LadderRow& r : rep.rows)
        rows.push_back({std::to_string(r.level), fmt_double(r.residual), fmt_double(r.delta),
                        fmt_double(r.n_plus), fmt_double(r.n_minus), fmt_double(r.c),
                        fmt_double(r.min_divisor)});
    write_csv(out / "ladder_report.csv",
              {"level", "residual", "delta", "n_plus", "n_minus", "c", "min_divisor"}, rows);

    for (const LadderRow& r : rep.rows) {
        if (!r.hull) continue;
        fs::path level_dir = out / ("level" + std::to_string(r.level));
        fs::create_directories(level_dir);
        save_hull(level_dir / "hull.coeffs", *r.hull, r.rho_level);
    }

    KvReport kv;
    kv.add("mode", std::string("ladder"));
    kv.add("completed", rep.completed);
    if (!rep.halt_reason.empty()) kv.add("halt_reason", rep.halt_reason);
    kv.add("levels_solved", state.level);
    kv.add("delta_sum", rep.delta_sum);
    kv.add("lambda_star", state.lambda);
    if (rep.orbit_residual >= 0) {
        kv.add("orbit_range", rep.orbit_range);
        kv.add("orbit_residual", rep.orbit_residual);
        kv.add("flag_orbit", rep.orbit_residual <= 1e-9);
    }
    for (const LadderRow& r : rep.rows) {
        std::string p = "level" + std::to_string(r.level) + ".";
        kv.add(p + "rho", r.rho_level);
        kv.add(p + "residual", r.residual);
        kv.add(p + "delta", r.delta);
        kv.add(p + "delta_target", r.delta_target);
        kv.add(p + "flag_delta_within_target", r.delta <= r.delta_target);
        kv.add(p + "lambda", r.lambda);
        kv.add(p + "n_plus", r.n_plus);
        kv.add(p + "n_minus", r.n_minus);
        kv.add(p + "c", r.c);
        kv.add(p + "min_divisor", r.min_divisor);
        kv.add(p + "dioph_nu_empirical", r.dioph_nu_empirical);
        kv.add(p + "flag_dioph", r.dioph_pass);
        kv.add(p + "iterations", r.iterations);
    }
    kv.save(out);
    return 0;
}

inline int run_verify(const ConfigFile& cfg, const std::optional<fs::path>& out,
                      std::ostream& console) {
    FrequencyBasis basis = build_basis(cfg);
    auto set = build_index_set(cfg, basis);
    auto params = build_dioph(cfg);
    if (!params) throw config_error("[dioph]: section required for verify");
    std::vector<double> alpha = basis.alpha();
    DiophantineReport rep = check(*params, basis.omega(), alpha, *set);

    KvReport kv;
    kv.add("mode", std::string("verify"));
    kv.add("omega", basis.omega());
    kv.add("N", set->active_count());
    kv.add("K", set->radius());
    kv.add("s", set->weight_exponent());
    add_dioph_report(kv, rep, "dioph.");

    kv.write_text(console);
    console << "---\n";
    kv.write_kv(console);
    if (out) {
        fs::create_directories(*out);
        kv.save(*out);
    }
    return rep.pass ? 0 : 2;
}

inline int run_oracle(const ConfigFile& cfg, const fs::path& out, std::ostream& console) {
    FrequencyBasis basis = build_basis(cfg);
    auto set = build_index_set(cfg, basis);
    ShortRangeModel model = build_short_model(cfg, set, basis);
    SolveOptions opts = build_solve_options(cfg);

    auto [state, rep] = solve(model, SolverState::start(model), opts);
    if (!rep.converged)
        throw divergence_error("oracle-compare: spectral solve did not converge");

    DenseNewtonResult dense = oracle_dense_newton(model, set, 1e-13);
    double coeff_diff = 0.0;
    for (const MultiIndex& k : set->members())
        coeff_diff = std::max(coeff_diff, std::abs(state.h.coeff(k) - dense.h.coeff(k)));
    double lambda_diff = std::abs(state.lambda - dense.lambda);

    KvReport kv;
    kv.add("mode", std::string("oracle-compare"));
    kv.add("spectral_residual", rep.final_eps);
    kv.add("spectral_lambda", state.lambda);
    kv.add("dense_newton_iterations", dense.iterations);
    kv.add("dense_newton_residual_sup", dense.residual_sup);
    kv.add("dense_newton_lambda", dense.lambda);
    kv.add("coeff_sup_diff", coeff_diff);
    kv.add("lambda_diff", lambda_diff);

    fs::create_directories(out);
    if (cfg.has("oracle", "p")) {
        int p = cfg.get_int("oracle", "p");
        int q = cfg.get_int("oracle", "q");
        double chain_tol = cfg.get_double("oracle", "tol", 1e-12);
        FiniteChainResult chain =
            oracle_finite_chain(chain_force(model), chain_force_derivative(model), p, q, chain_tol);

        const std::vector<double>& alpha = basis.alpha();
        double pointwise = 0.0;
        std::vector<std::vector<std::string>> rows;
        for (int n = 0; n < q; ++n) {
            double theta = 2.0 * std::numbers::pi * p * n / q;
            std::vector<double> sigma(alpha.size());
            for (std::size_t i = 0; i < alpha.size(); ++i) sigma[i] = theta * alpha[i];
            double hull = theta + evaluate(state.h, sigma).real();
            double diff = std::abs(chain.u[static_cast<std::size_t>(n)] - hull);
            pointwise = std::max(pointwise, diff);
            rows.push_back({std::to_string(n), fmt_double(chain.u[static_cast<std::size_t>(n)]),
                            fmt_double(hull), fmt_double(diff)});
        }
        write_csv(out / "chain.csv", {"n", "u_chain", "u_hull", "diff"}, rows);
        kv.add("chain_p", p);
        kv.add("chain_q", q);
        kv.add("chain_residual_sup", chain.residual_sup);
        kv.add("chain_pointwise_diff", pointwise);
        kv.add("omega_minus_2pipq", basis.omega() - 2.0 * std::numbers::pi * p / q);
    }

    save_hull(out / "hull.coeffs", state.h, rep.report_rho);
    kv.save(out);
    kv.write_text(console);
    return 0;
}

// Dispatch on [run].mode; `out_override` (from the command line) wins over
// [run].out.
inline int run(const ConfigFile& cfg, const std::string& out_override, std::ostream& console) {
    std::string mode = cfg.get_string("run", "mode");
    std::string out = !out_override.empty() ? out_override : cfg.get_string("run", "out", "");
    auto need_out = [&]() -> fs::path {
        if (out.empty()) throw config_error("[run].out: output directory required");
        return fs::path(out);
    };
    if (mode == "short") return run_short(cfg, need_out());
    if (mode == "long") return run_long(cfg, need_out());
    if (mode == "ladder") return run_ladder_mode(cfg, need_out());
    if (mode == "verify")
        return run_verify(cfg, out.empty() ? std::nullopt : std::make_optional(fs::path(out)),
                          console);
    if (mode == "oracle") return run_oracle(cfg, need_out(), console);
    throw config_error("[run].mode: unknown mode '" + mode + "'");
}

} // namespace apfk::harness
