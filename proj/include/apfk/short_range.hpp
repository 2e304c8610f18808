#pragma once

// Short-range machinery: the residual operator E[h, lambda] = h o T_{wa} +
// h o T_{-wa} - 2h + U(sigma + alpha h) + lambda, its condition numbers, the
// quasi-Newton step through the pair of difference equations
//   S_1 W = l (e + delta),        S_{-1} beta = W / (l . l o T_{-wa}),
// and the full iteration with the shrinking radius schedule.

#include <cmath>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "apfk/cohomology.hpp"
#include "apfk/diophantine.hpp"
#include "apfk/errors.hpp"
#include "apfk/fourier_series.hpp"

namespace apfk {

class ShortRangeModel {
public:
    // U is the force shell; V, when given, declares U = d_alpha V (gradient
    // case) and is cross-checked against U.
    ShortRangeModel(FourierSeries shell_u, FrequencyBasis basis,
                    std::optional<FourierSeries> shell_v = std::nullopt)
        : shell_u_(std::move(shell_u)), shell_v_(std::move(shell_v)), basis_(std::move(basis)) {
        if (shell_u_.index_set()->active_count() != basis_.frequency_count())
            throw config_error("ShortRangeModel: index set and alpha disagree on N");
        if (shell_v_) {
            double mismatch =
                weighted_norm(derive_alpha(*shell_v_, basis_) - shell_u_, basis_.rho());
            double scale = std::max(1.0, weighted_norm(shell_u_, basis_.rho()));
            if (mismatch > 1e-12 * scale)
                throw config_error("ShortRangeModel: d_alpha V differs from U by " +
                                   std::to_string(mismatch));
        }
    }

    const FourierSeries& shell_u() const { return shell_u_; }
    const std::optional<FourierSeries>& shell_v() const { return shell_v_; }
    const FrequencyBasis& basis() const { return basis_; }
    bool gradient_declared() const { return shell_v_.has_value(); }

private:
    FourierSeries shell_u_;
    std::optional<FourierSeries> shell_v_;
    FrequencyBasis basis_;
};

struct SolverState {
    FourierSeries h;
    double lambda = 0.0;
    double rho = 0.0;       // current radius rho_n
    double eps = 0.0;       // residual norm at rho
    int iteration = 0;

    static SolverState start(const ShortRangeModel& model) {
        return SolverState{FourierSeries::zero(model.shell_u().index_set()), 0.0,
                           model.basis().rho(), 0.0, 0};
    }
};

struct ConditionNumbers {
    double n_plus = 1.0;    // ||l||_rho
    double n_minus = 1.0;   // ||1/l||_rho
    double c = 1.0;         // |<1/(l . l o T_{-wa})>|
    double l_mean_dev = 0.0;  // |<l> - 1|, identically ~0
};

struct SolveOptions {
    double tol = 1e-12;
    int max_iter = 40;
    double rho_start = -1.0;    // default: basis.rho
    double rho_end = -1.0;      // default: 3/4 of rho_start
    double report_rho = -1.0;   // default: rho_start / 2
    double series_tol = 1e-14;
    double max_condition = 1e8;
    double vanish_tol = 1e-10;
    double divergence_floor = -1.0;  // default: 10 * tol
    DivisorFloor floor{};
    ExpSeriesOptions exp_opts{};

    double resolved_rho_start(const FrequencyBasis& b) const {
        return rho_start > 0 ? rho_start : b.rho();
    }
    double resolved_rho_end(const FrequencyBasis& b) const {
        return rho_end > 0 ? rho_end : 0.75 * resolved_rho_start(b);
    }
    double resolved_report_rho(const FrequencyBasis& b) const {
        return report_rho > 0 ? report_rho : 0.5 * resolved_rho_start(b);
    }
};

struct StepDiagnostics {
    FourierSeries delta;        // hull correction
    double delta_norm = 0.0;    // at the step's working radius
    double delta_lambda = 0.0;  // counterterm increment
    double w_bar = 0.0;         // average adjustment of W
    double trunc_loss = 0.0;
    double min_divisor = 0.0;   // smallest |e^{i n k.wa} - 1| met in the step
    ConditionNumbers cond;
};

struct IterationRow {
    int iteration = 0;
    double rho = 0.0;
    double eps = 0.0;
    double delta_norm = 0.0;
    double lambda = 0.0;
    double n_plus = 1.0, n_minus = 1.0, c = 1.0;
    double min_divisor = 0.0;
    double trunc_loss = 0.0;
};

struct SolveReport {
    std::vector<IterationRow> history;
    bool converged = false;
    std::string stop_reason;
    double rho_start = 0.0, rho_end = 0.0, report_rho = 0.0;
    double eps0 = 0.0;
    double final_eps = 0.0;          // at the final working radius
    double final_eps_report = 0.0;   // at report_rho
    double hull_drift = 0.0;         // ||h* - h0|| at report_rho
    double lambda_drift = 0.0;
    double c1_observed = 0.0;        // hull_drift / eps0
    double c2_observed = 0.0;        // lambda_drift / eps0
    double min_divisor = 0.0;        // over the index set at n = +-1
    double empirical_nu = 0.0;       // product-form, tau = 1
    double trunc_loss_total = 0.0;
};

// E[h, lambda] at radius rho.
inline FourierSeries residual(const FourierSeries& h, double lambda, const ShortRangeModel& model,
                              double rho, const ExpSeriesOptions& exp_opts = {}) {
    const FrequencyBasis& b = model.basis();
    FourierSeries e = shift_steps(h, b, 1.0) + shift_steps(h, b, -1.0) - h * Complex(2.0) +
                      compose_shell(model.shell_u(), h, b, rho, exp_opts);
    return e + Complex(lambda);
}

inline FourierSeries residual(const SolverState& state, const ShortRangeModel& model) {
    return residual(state.h, state.lambda, model, state.rho);
}

namespace detail {

// l = 1 + d_alpha h and the derived series every step needs.
struct Twist {
    FourierSeries l;
    FourierSeries l_inv;          // 1/l
    FourierSeries pair_inv;       // 1/(l . l o T_{-wa})
    ConditionNumbers cond;
};

inline Twist make_twist(const FourierSeries& h, const FrequencyBasis& basis, double rho,
                        double series_tol) {
    Twist t{FourierSeries::zero(h.index_set()), FourierSeries::zero(h.index_set()),
            FourierSeries::zero(h.index_set()), {}};
    t.l = derive_alpha(h, basis) + Complex(1.0);
    t.l_inv = reciprocal(t.l, rho, series_tol);
    t.pair_inv = multiply(t.l_inv, shift_steps(t.l_inv, basis, -1.0), rho);
    t.cond.n_plus = weighted_norm(t.l, rho);
    t.cond.n_minus = weighted_norm(t.l_inv, rho);
    t.cond.c = std::abs(average(t.pair_inv));
    t.cond.l_mean_dev = std::abs(average(t.l) - Complex(1.0));
    return t;
}

} // namespace detail

inline ConditionNumbers condition_numbers(const FourierSeries& h, const ShortRangeModel& model,
                                          double rho, double series_tol = 1e-14) {
    return detail::make_twist(h, model.basis(), rho, series_tol).cond;
}

// One quasi-Newton step. Norms and divisions are taken at state.rho; the
// returned state lives at rho_next with its residual evaluated there.
inline std::pair<SolverState, StepDiagnostics> newton_step(const SolverState& state,
                                                           const ShortRangeModel& model,
                                                           double rho_next,
                                                           const SolveOptions& opts = {}) {
    const FrequencyBasis& b = model.basis();
    const double rho = state.rho;

    FourierSeries e = residual(state.h, state.lambda, model, rho, opts.exp_opts);
    detail::Twist tw = detail::make_twist(state.h, b, rho, opts.series_tol);

    if (tw.cond.n_plus > opts.max_condition || tw.cond.n_minus > opts.max_condition)
        throw condition_error("newton_step: condition number beyond cap (N+ = " +
                              std::to_string(tw.cond.n_plus) + ", N- = " +
                              std::to_string(tw.cond.n_minus) + ")");
    if (!(tw.cond.c > 1.0 / opts.max_condition))
        throw condition_error("newton_step: twist average c = " + std::to_string(tw.cond.c) +
                              " vanishes");

    CohomologyStats stats;

    // delta = -<l e>; the counterterm makes l (e + delta) zero-average.
    Complex l_e_mean = average(multiply(tw.l, e, rho));
    double delta_lambda = -l_e_mean.real();

    FourierSeries rhs1 = multiply(tw.l, e + Complex(delta_lambda), rho).without_mean();
    FourierSeries w0 = solve_S(1, rhs1, b, opts.floor, &stats);

    // W-bar kills the average of the right side of the second equation.
    Complex denom = average(tw.pair_inv);
    Complex w_bar = -average(multiply(w0, tw.pair_inv, rho)) / denom;

    FourierSeries rhs2 = multiply(w0 + w_bar, tw.pair_inv, rho).without_mean();
    FourierSeries beta_t = solve_S(-1, rhs2, b, opts.floor, &stats);

    Complex beta_bar = -average(multiply(beta_t, tw.l, rho));
    FourierSeries delta_h = multiply(beta_t + beta_bar, tw.l, rho).without_mean();

    double delta_norm = weighted_norm(delta_h, rho);
    if (delta_norm >= b.iota())
        throw margin_error("newton_step: ||delta|| = " + std::to_string(delta_norm) +
                           " leaves the composition margin iota = " + std::to_string(b.iota()));

    SolverState next{(state.h + delta_h).without_mean(), state.lambda + delta_lambda, rho_next,
                     0.0, state.iteration + 1};
    next.eps = weighted_norm(residual(next.h, next.lambda, model, rho_next, opts.exp_opts),
                             rho_next);

    StepDiagnostics diag{delta_h, delta_norm, delta_lambda, w_bar.real(),
                         e.truncation_loss() + rhs1.truncation_loss() + rhs2.truncation_loss() +
                             delta_h.truncation_loss(),
                         stats.min_divisor, tw.cond};
    return {std::move(next), std::move(diag)};
}

// Full quasi-Newton iteration with the shrinking radius schedule
// rho_n = rho_end + (rho_start - rho_end) 2^{-n}. Stops on tolerance, stagnation (two consecutive
// non-decreases) or max_iter; throws divergence_error when the residual grows
// twice in a row above the floor.
inline std::pair<SolverState, SolveReport> solve(const ShortRangeModel& model,
                                                 const SolverState& initial,
                                                 const SolveOptions& opts = {}) {
    const FrequencyBasis& b = model.basis();
    SolveReport rep;
    rep.rho_start = opts.resolved_rho_start(b);
    rep.rho_end = opts.resolved_rho_end(b);
    rep.report_rho = opts.resolved_report_rho(b);
    const double div_floor =
        opts.divergence_floor > 0 ? opts.divergence_floor : 10.0 * opts.tol;

    SolverState state = initial;
    state.rho = rep.rho_start;
    state.h = state.h.without_mean();

    FourierSeries e0 = residual(state.h, state.lambda, model, state.rho, opts.exp_opts);
    state.eps = weighted_norm(e0, state.rho);
    rep.eps0 = state.eps;

    ConditionNumbers cond0 = condition_numbers(state.h, model, state.rho, opts.series_tol);
    rep.history.push_back(IterationRow{0, state.rho, state.eps, 0.0, state.lambda, cond0.n_plus,
                                       cond0.n_minus, cond0.c, min_unit_divisor(*state.h.index_set(), b),
                                       e0.truncation_loss()});

    const SolverState h0 = state;
    double prev_eps = state.eps;
    int increase_streak = 0, nondecrease_streak = 0;

    if (state.eps <= opts.tol) {
        rep.converged = true;
        rep.stop_reason = "converged at iteration 0";
    } else {
        for (int n = 1; n <= opts.max_iter; ++n) {
            double rho_next = rep.rho_end + (rep.rho_start - rep.rho_end) * std::ldexp(1.0, -n);
            std::optional<StepDiagnostics> diag;
            try {
                auto [next, d] = newton_step(state, model, rho_next, opts);
                state = std::move(next);
                diag.emplace(std::move(d));
            } catch (const condition_error&) {
                throw;
            } catch (const divisor_error&) {
                throw;
            } catch (const error& inner) {
                // A step whose algebra breaks down (singular reciprocal, margin
                // left) is the iteration diverging.
                throw divergence_error("solve: iteration broke down at step " +
                                       std::to_string(n) + ": " + inner.what());
            }

            rep.history.push_back(IterationRow{n, state.rho, state.eps, diag->delta_norm,
                                               state.lambda, diag->cond.n_plus, diag->cond.n_minus,
                                               diag->cond.c, diag->min_divisor, diag->trunc_loss});
            rep.trunc_loss_total += diag->trunc_loss;

            if (state.eps <= opts.tol) {
                rep.converged = true;
                rep.stop_reason = "converged at iteration " + std::to_string(n);
                break;
            }
            increase_streak = state.eps > prev_eps ? increase_streak + 1 : 0;
            nondecrease_streak = state.eps >= prev_eps ? nondecrease_streak + 1 : 0;
            if (increase_streak >= 2 && state.eps > div_floor)
                throw divergence_error("solve: residual grew twice in a row (eps = " +
                                       std::to_string(state.eps) + ")");
            if (nondecrease_streak >= 2) {
                rep.stop_reason = "stagnation at iteration " + std::to_string(n);
                break;
            }
            prev_eps = state.eps;
        }
        if (rep.stop_reason.empty()) rep.stop_reason = "max iterations reached";
    }

    rep.final_eps = state.eps;
    rep.final_eps_report = weighted_norm(
        residual(state.h, state.lambda, model, rep.report_rho, opts.exp_opts), rep.report_rho);
    rep.hull_drift = weighted_norm(state.h - h0.h, rep.report_rho);
    rep.lambda_drift = std::abs(state.lambda - h0.lambda);
    if (rep.eps0 > 0) {
        rep.c1_observed = rep.hull_drift / rep.eps0;
        rep.c2_observed = rep.lambda_drift / rep.eps0;
    }
    rep.min_divisor = min_unit_divisor(*state.h.index_set(), b);
    std::vector<double> alpha = b.alpha();
    rep.empirical_nu =
        empirical_nu(b.omega(), alpha, *state.h.index_set(), 1.0, DiophantineStyle::product);
    return {std::move(state), std::move(rep)};
}

struct VanishingReport {
    double lambda_star = 0.0;
    double tol = 0.0;
    bool pass = false;
};

// Gradient forces must leave no counterterm: |lambda*| <= tol.
inline VanishingReport vanishing_check(const ShortRangeModel& model, const SolverState& final_state,
                                       double tol = 1e-10) {
    if (!model.gradient_declared())
        throw config_error("vanishing_check: model declares no potential V");
    return VanishingReport{final_state.lambda, tol, std::abs(final_state.lambda) <= tol};
}

struct UniquenessReport {
    double perturbation_scale = 0.0;
    double hull_difference = 0.0;    // at report_rho
    double lambda_difference = 0.0;
    double tolerance = 0.0;          // 10 x solver tol
    bool agree = false;
};

// Re-solves from a randomly perturbed start and compares the limits.
inline UniquenessReport uniqueness_probe(const ShortRangeModel& model,
                                         const SolverState& final_state,
                                         double perturbation_scale, std::uint64_t seed = 1,
                                         const SolveOptions& opts = {}) {
    const FrequencyBasis& b = model.basis();
    auto set = final_state.h.index_set();
    double rho0 = opts.resolved_rho_start(b);

    FourierSeries pert(set);
    if (perturbation_scale > 0) {
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> gauss(0.0, 1.0);
        const double s = set->weight_exponent();
        for (const MultiIndex& k : set->members()) {
            if (k.is_zero() || k.lex_sign() < 0) continue;
            Complex c(gauss(rng), gauss(rng));
            c *= std::exp(-2.0 * k.norm_s(s));
            pert.set_coeff(k, c);
            pert.set_coeff(-k, std::conj(c));
        }
        double n = weighted_norm(pert, rho0);
        if (n > 0) pert *= Complex(perturbation_scale / n, 0.0);
    }

    SolverState restart{(final_state.h + pert).without_mean(), final_state.lambda, rho0, 0.0, 0};
    auto [other, rep] = solve(model, restart, opts);

    UniquenessReport out;
    out.perturbation_scale = perturbation_scale;
    out.hull_difference = weighted_norm(other.h - final_state.h, rep.report_rho);
    out.lambda_difference = std::abs(other.lambda - final_state.lambda);
    out.tolerance = 10.0 * opts.tol;
    out.agree = out.hull_difference <= out.tolerance && out.lambda_difference <= out.tolerance;
    return out;
}

} // namespace apfk
