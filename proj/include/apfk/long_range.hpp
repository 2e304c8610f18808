#pragma once

// Long-range machinery: interactions H_L over L+1 sites, the residual
// E[h](theta) = sum_L sum_k d^(k) H_L(gamma_L^(-k)), the comparison series
// C_{j,k,L} = d^(k) d^(j) H_L(gamma_L^(-k)) l l^(j-k), the operator
// G = sum_{L>=2} sum_{j<k} L^+_{k-j} C_{j,k,L} R^-_{j-k}, and the linearized
// solve S_1 W = l E,  S_{-1} eta = (C_{0,1,1} + G)^{-1} W by fixed point.
//
// Interaction terms are finite Fourier sums on (T^N)^{L+1}; the L = 1 term
// may additionally carry a harmonic gap part w * (x0 - x1)^2 / 2 (the
// nearest-neighbour spring), whose slot derivatives are affine in the hull
// and representable exactly.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "apfk/cohomology.hpp"
#include "apfk/errors.hpp"
#include "apfk/fourier_series.hpp"
#include "apfk/short_range.hpp"

namespace apfk {

class InteractionTerm {
public:
    using Tuple = std::vector<MultiIndex>;

    explicit InteractionTerm(int range) : range_(range) {
        if (range < 0) throw config_error("InteractionTerm: range must be >= 0");
    }

    int range() const { return range_; }
    const std::map<Tuple, Complex>& coeffs() const { return coeffs_; }

    double gap_weight() const { return gap_weight_; }
    void set_gap_weight(double w) {
        if (range_ != 1 && w != 0.0)
            throw config_error("InteractionTerm: gap part only exists at range 1");
        gap_weight_ = w;
    }

    void add_tuple(Tuple t, Complex c) {
        if (static_cast<int>(t.size()) != range_ + 1)
            throw config_error("InteractionTerm: tuple must have range+1 slots");
        if (c == 0.0) return;
        auto [it, inserted] = coeffs_.try_emplace(std::move(t), c);
        if (!inserted) it->second += c;
    }

    // Adds the tuple together with its negated mirror so the term stays real.
    void add_real_tuple(const Tuple& t, Complex c) {
        add_tuple(t, c);
        Tuple neg(t.size());
        for (std::size_t i = 0; i < t.size(); ++i) neg[i] = -t[i];
        add_tuple(std::move(neg), std::conj(c));
    }

    // c_{-tuple} = conj(c_tuple); the realness invariant.
    bool real_symmetric(double tol = 1e-12) const {
        for (const auto& [t, c] : coeffs_) {
            Tuple neg(t.size());
            for (std::size_t i = 0; i < t.size(); ++i) neg[i] = -t[i];
            auto it = coeffs_.find(neg);
            Complex mirror = it == coeffs_.end() ? Complex(0.0) : it->second;
            if (std::abs(mirror - std::conj(c)) > tol * std::max(1.0, std::abs(c))) return false;
        }
        return true;
    }

    // max_{i<=3} of the i-linear derivative-norm proxies at radius r:
    // sum |a| (sum_j |k_j|_1)^i e^{r sum_j |k_j|_s}. The harmonic gap enters
    // through its second derivative form (norm 4|w|); its zeroth and first
    // derivatives grow linearly in the gap and carry no Fourier mass.
    double derivative_bound(double r, double s) const {
        double best = 0.0;
        for (int i = 0; i <= 3; ++i) {
            double acc = 0.0;
            for (const auto& [t, c] : coeffs_) {
                double l1 = 0.0, ws = 0.0;
                for (const MultiIndex& k : t) {
                    l1 += static_cast<double>(k.norm_one());
                    ws += k.norm_s(s);
                }
                acc += std::abs(c) * std::pow(l1, static_cast<double>(i)) * std::exp(r * ws);
            }
            best = std::max(best, acc);
        }
        return std::max(best, 4.0 * std::abs(gap_weight_));
    }

private:
    int range_;
    std::map<Tuple, Complex> coeffs_;
    double gap_weight_ = 0.0;
};

class LongRangeModel {
public:
    LongRangeModel(std::vector<InteractionTerm> terms, FrequencyBasis basis,
                   std::shared_ptr<const IndexSet> set)
        : basis_(std::move(basis)), set_(std::move(set)) {
        for (InteractionTerm& t : terms) {
            if (!t.real_symmetric())
                throw config_error("LongRangeModel: interaction at range " +
                                   std::to_string(t.range()) + " breaks realness symmetry");
            merge(std::move(t));
        }
        for (const auto& t : terms_) l_max_ = std::max(l_max_, t.range());
    }

    const FrequencyBasis& basis() const { return basis_; }
    const std::shared_ptr<const IndexSet>& index_set() const { return set_; }
    int l_max() const { return l_max_; }
    const std::vector<InteractionTerm>& terms() const { return terms_; }

    const InteractionTerm* term(int range) const {
        for (const auto& t : terms_)
            if (t.range() == range) return &t;
        return nullptr;
    }

    // M_L at radius r, and beta = sum_{L>=2} M_L L^4 (combinatorial constant
    // taken as 1; all quantities are computed, not bounded symbolically).
    std::vector<double> decay_report(double r) const {
        std::vector<double> m(static_cast<std::size_t>(l_max_) + 1, 0.0);
        for (const auto& t : terms_)
            m[static_cast<std::size_t>(t.range())] = t.derivative_bound(r, basis_.s());
        return m;
    }

    double beta(double r) const {
        double acc = 0.0;
        for (const auto& t : terms_) {
            if (t.range() < 2) continue;
            acc += t.derivative_bound(r, basis_.s()) * std::pow(t.range(), 4.0);
        }
        return acc;
    }

private:
    void merge(InteractionTerm t) {
        for (auto& existing : terms_) {
            if (existing.range() == t.range()) {
                for (const auto& [tuple, c] : t.coeffs()) existing.add_tuple(tuple, c);
                if (t.gap_weight() != 0.0)
                    existing.set_gap_weight(existing.gap_weight() + t.gap_weight());
                return;
            }
        }
        terms_.push_back(std::move(t));
    }

    std::vector<InteractionTerm> terms_;
    FrequencyBasis basis_;
    std::shared_ptr<const IndexSet> set_;
    int l_max_ = 0;
};

namespace detail {

// Shared scratch for one evaluation point: h shifted by integer multiples of
// w alpha, and the exponential factors e^{i t h^(offset)} keyed by (offset, t).
struct EvalCache {
    const FourierSeries* h;
    const FrequencyBasis* basis;
    double rho;
    ExpSeriesOptions exp_opts;
    std::map<int, FourierSeries> shifted;
    std::map<std::pair<int, double>, FourierSeries> exp_factors;

    const FourierSeries& shifted_h(int offset) {
        auto it = shifted.find(offset);
        if (it == shifted.end())
            it = shifted.emplace(offset, shift_steps(*h, *basis, offset)).first;
        return it->second;
    }

    const FourierSeries& exp_factor(int offset, double t) {
        auto key = std::make_pair(offset, t);
        auto it = exp_factors.find(key);
        if (it == exp_factors.end())
            it = exp_factors
                     .emplace(key, exp_i_series(t, shifted_h(offset), rho, exp_opts))
                     .first;
        return it->second;
    }
};

} // namespace detail

// Evaluates the slot derivative prod_{d in derivs} d_alpha^(d) of the term on
// the configuration gamma_L^(-shift): slot j sits at
// sigma + (j-shift) w alpha + alpha h(sigma + (j-shift) w alpha).
inline FourierSeries eval_interaction(const InteractionTerm& term,
                                      const std::vector<int>& derivs, const FourierSeries& h,
                                      int shift, const FrequencyBasis& basis, double rho,
                                      const ExpSeriesOptions& exp_opts = {}) {
    if (derivs.size() > 2)
        throw series_error("eval_interaction: at most two slot derivatives are supported");
    for (int d : derivs)
        if (d < 0 || d > term.range())
            throw series_error("eval_interaction: derivative slot out of range");

    double hn = weighted_norm(h, rho);
    if (hn >= basis.iota())
        throw margin_error("eval_interaction: ||h||_rho = " + std::to_string(hn) +
                           " exceeds composition margin iota = " + std::to_string(basis.iota()));

    detail::EvalCache cache{&h, &basis, rho, exp_opts, {}, {}};
    FourierSeries result(h.index_set());

    // Spectral part.
    for (const auto& [tuple, a] : term.coeffs()) {
        Complex factor = a;
        for (int d : derivs)
            factor *= Complex(0.0, basis.dot_alpha(tuple[static_cast<std::size_t>(d)]));
        if (factor == 0.0) continue;

        MultiIndex total;
        double phase = 0.0;
        FourierSeries prod = FourierSeries::constant(h.index_set(), 1.0);
        bool first = true;
        for (int j = 0; j <= term.range(); ++j) {
            const MultiIndex& kj = tuple[static_cast<std::size_t>(j)];
            if (kj.is_zero()) continue;
            total = total + kj;
            double t = basis.dot_alpha(kj);
            phase += (j - shift) * basis.omega() * t;
            const FourierSeries& ef = cache.exp_factor(j - shift, t);
            prod = first ? ef : multiply(prod, ef, rho);
            first = false;
        }
        FourierSeries contrib = translate_modes(prod, total, rho);
        contrib *= factor * std::exp(Complex(0.0, phase));
        result += contrib;
    }

    // Harmonic gap part w (x0 - x1)^2 / 2 at range 1.
    if (term.gap_weight() != 0.0) {
        double w = term.gap_weight();
        if (derivs.size() == 1) {
            // d^(0) -> w (x0 - x1), d^(1) -> w (x1 - x0)
            double sign = derivs[0] == 0 ? 1.0 : -1.0;
            FourierSeries gap = cache.shifted_h(-shift) - cache.shifted_h(1 - shift) -
                                Complex(basis.omega());
            result += gap * Complex(sign * w);
        } else if (derivs.size() == 2) {
            double sign = derivs[0] == derivs[1] ? 1.0 : -1.0;
            result += FourierSeries::constant(h.index_set(), sign * w);
        } else {
            throw series_error("eval_interaction: the gap energy itself is not a Fourier sum");
        }
    }
    return result;
}

// E[h](theta) = sum_{L <= l_max} sum_{k=0}^{L} d^(k) H_L(gamma_L^(-k)).
inline FourierSeries residual_long(const FourierSeries& h, const LongRangeModel& model,
                                   double rho, const ExpSeriesOptions& exp_opts = {}) {
    FourierSeries e(h.index_set());
    for (const InteractionTerm& term : model.terms())
        for (int k = 0; k <= term.range(); ++k)
            e += eval_interaction(term, {k}, h, k, model.basis(), rho, exp_opts);
    return e;
}

// C_{j,k,L} = d^(k) d^(j) H_L(gamma_L^(-k)) . l . l o T_{(j-k) w alpha}.
inline FourierSeries c_series(int j, int k, int L, const FourierSeries& h,
                              const LongRangeModel& model, double rho,
                              const ExpSeriesOptions& exp_opts = {}) {
    const InteractionTerm* term = model.term(L);
    if (!term) throw config_error("c_series: no interaction at range " + std::to_string(L));
    const FrequencyBasis& b = model.basis();
    FourierSeries d2 = eval_interaction(*term, {j, k}, h, k, b, rho, exp_opts);
    FourierSeries l = derive_alpha(h, b) + Complex(1.0);
    return multiply(multiply(d2, l, rho), shift_steps(l, b, j - k), rho);
}

// The linearized operator of one step: C_{0,1,1}, its reciprocal, and the
// G-sum terms, all evaluated at the current h.
struct LinearizedOperator {
    struct GTerm {
        int n;  // k - j >= 1
        FourierSeries c;
    };
    FourierSeries c011;
    FourierSeries c011_inv;
    std::vector<GTerm> gterms;
    detail::Twist twist;
    double rho = 0.0;
};

inline LinearizedOperator build_linearized(const FourierSeries& h, const LongRangeModel& model,
                                           double rho, double series_tol = 1e-14,
                                           const ExpSeriesOptions& exp_opts = {}) {
    const FrequencyBasis& b = model.basis();
    if (!model.term(1))
        throw config_error("build_linearized: the range-1 interaction is required");

    detail::Twist tw = detail::make_twist(h, b, rho, series_tol);
    LinearizedOperator lin{FourierSeries::zero(h.index_set()),
                           FourierSeries::zero(h.index_set()),
                           {},
                           std::move(tw),
                           rho};

    auto c_at = [&](int j, int k, const InteractionTerm& term) {
        FourierSeries d2 = eval_interaction(term, {j, k}, h, k, b, rho, exp_opts);
        return multiply(multiply(d2, lin.twist.l, rho), shift_steps(lin.twist.l, b, j - k), rho);
    };

    lin.c011 = c_at(0, 1, *model.term(1));
    lin.c011_inv = reciprocal(lin.c011, rho, series_tol);

    for (const InteractionTerm& term : model.terms()) {
        if (term.range() < 2) continue;
        for (int j = 0; j <= term.range(); ++j)
            for (int k = j + 1; k <= term.range(); ++k)
                lin.gterms.push_back({k - j, c_at(j, k, term)});
    }
    return lin;
}

// G x = sum L^+_{k-j} ( C_{j,k,L} . R^-_{j-k} x ) for zero-average x.
inline FourierSeries apply_G(const LinearizedOperator& lin, const FourierSeries& x,
                             const FrequencyBasis& basis, const DivisorFloor& floor = {},
                             CohomologyStats* stats = nullptr) {
    FourierSeries acc(x.index_set());
    FourierSeries x0 = x.without_mean();
    for (const auto& [n, c] : lin.gterms) {
        FourierSeries rx = apply_L(-n, x0, basis, -1, floor, stats);  // R^-_{j-k}, j-k = -n
        acc += apply_L(n, multiply(c, rx, lin.rho), basis, 1, floor, stats);
    }
    return acc;
}

struct FixedPointLog {
    int iterations = 0;
    double contraction = 0.0;     // worst measured step ratio
    double final_update = 0.0;
    double w_bar = 0.0;
    double inversion_residual = 0.0;  // ||(C+G) x - (W0 + w_bar)|| / ||W0||
    double rhs_mean = 0.0;            // |<l E>| before projection
};

struct LinearizedOptions {
    double fp_tol = 1e-13;
    int fp_cap = 200;
    double mean_gate = 1e-9;  // relative gate on |<l E>|
    DivisorFloor floor{};
};

// Solves S_1 W = rhs, then (C_{0,1,1} + G) x = W^0 + W-bar with <x> = 0 by
// the fixed point x <- C^{-1} (W - G x), the scalar W-bar fixed by a secant
// in the (affine) average; finally eta = S_{-1}^{-1} x.
inline std::pair<FourierSeries, FixedPointLog> solve_linearized(
    const LinearizedOperator& lin, const FourierSeries& rhs, const FrequencyBasis& basis,
    const LinearizedOptions& opts = {}, CohomologyStats* stats = nullptr) {
    FixedPointLog log;
    log.rhs_mean = std::abs(average(rhs));
    double rhs_norm = weighted_norm(rhs, lin.rho);
    if (log.rhs_mean > opts.mean_gate * std::max(1.0, rhs_norm))
        throw series_error("solve_linearized: <l E> = " + std::to_string(log.rhs_mean) +
                           " is materially nonzero");

    FourierSeries w0 = solve_S(1, rhs.without_mean(), basis, opts.floor, stats);

    auto fixpoint = [&](const FourierSeries& w) {
        FourierSeries x(w.index_set());
        double prev_update = std::numeric_limits<double>::infinity();
        for (int m = 0; m < opts.fp_cap; ++m) {
            FourierSeries gx = lin.gterms.empty()
                                   ? FourierSeries::zero(w.index_set())
                                   : apply_G(lin, x, basis, opts.floor, stats);
            FourierSeries next = multiply(lin.c011_inv, w - gx, lin.rho);
            double update = weighted_norm(next - x, lin.rho);
            if (m > 0 && prev_update > 0.0)
                log.contraction = std::max(log.contraction, update / prev_update);
            x = std::move(next);
            log.iterations = std::max(log.iterations, m + 1);
            if (update <= opts.fp_tol * std::max(1.0, weighted_norm(x, lin.rho))) {
                log.final_update = update;
                return x;
            }
            prev_update = update;
        }
        throw series_error("solve_linearized: fixed point not converged within cap");
    };

    FourierSeries x0 = fixpoint(w0);
    FourierSeries x1 = fixpoint(FourierSeries::constant(w0.index_set(), 1.0));
    Complex a1 = average(x1);
    if (std::abs(a1) < 1e-14)
        throw series_error("solve_linearized: average of the unit response vanishes");
    Complex w_bar = -average(x0) / a1;
    log.w_bar = w_bar.real();

    FourierSeries x = x0 + x1 * w_bar;
    // residual of the inversion, as a diagnostic
    FourierSeries back = multiply(lin.c011, x, lin.rho) +
                         (lin.gterms.empty() ? FourierSeries::zero(x.index_set())
                                             : apply_G(lin, x, basis, opts.floor, stats)) -
                         w0 - w_bar;
    log.inversion_residual = weighted_norm(back, lin.rho) / std::max(1e-300, rhs_norm);

    FourierSeries eta = solve_S(-1, x.without_mean(), basis, opts.floor, stats);
    return {std::move(eta), log};
}

struct LongStepDiagnostics {
    FourierSeries delta;
    double delta_norm = 0.0;
    double trunc_loss = 0.0;
    double min_divisor = 0.0;
    ConditionNumbers cond;
    FixedPointLog fp;
};

struct LongSolveOptions {
    double tol = 1e-12;
    int max_iter = 40;
    double rho_start = -1.0;
    double rho_end = -1.0;
    double report_rho = -1.0;
    double series_tol = 1e-14;
    double max_condition = 1e8;
    double divergence_floor = -1.0;
    LinearizedOptions lin{};
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

struct LongState {
    FourierSeries h;
    double rho = 0.0;
    double eps = 0.0;
    int iteration = 0;

    static LongState start(const LongRangeModel& model) {
        return LongState{FourierSeries::zero(model.index_set()), model.basis().rho(), 0.0, 0};
    }
};

// One long-range quasi-Newton step: assemble rhs = l E, solve the linearized
// system, update h <- h + l eta (mean re-zeroed). No counterterm exists here.
inline std::pair<LongState, LongStepDiagnostics> newton_step_long(const LongState& state,
                                                                  const LongRangeModel& model,
                                                                  double rho_next,
                                                                  const LongSolveOptions& opts = {}) {
    const FrequencyBasis& b = model.basis();
    const double rho = state.rho;

    FourierSeries e = residual_long(state.h, model, rho, opts.exp_opts);
    LinearizedOperator lin = build_linearized(state.h, model, rho, opts.series_tol, opts.exp_opts);

    if (lin.twist.cond.n_plus > opts.max_condition || lin.twist.cond.n_minus > opts.max_condition)
        throw condition_error("newton_step_long: condition number beyond cap");

    CohomologyStats stats;
    FourierSeries rhs = multiply(lin.twist.l, e, rho);
    auto [eta, fp] = solve_linearized(lin, rhs, b, opts.lin, &stats);

    // Fix the additive constant in eta (the kernel direction l) so that
    // <l (eta + c)> = 0; <l> = 1 makes c = -<l eta>.
    eta += FourierSeries::constant(eta.index_set(),
                                   -average(multiply(lin.twist.l, eta, rho)));
    FourierSeries delta = multiply(lin.twist.l, eta, rho).without_mean();
    double delta_norm = weighted_norm(delta, rho);
    if (delta_norm >= b.iota())
        throw margin_error("newton_step_long: ||delta|| = " + std::to_string(delta_norm) +
                           " leaves the composition margin");

    LongState next{(state.h + delta).without_mean(), rho_next, 0.0, state.iteration + 1};
    next.eps = weighted_norm(residual_long(next.h, model, rho_next, opts.exp_opts), rho_next);

    LongStepDiagnostics diag{delta, delta_norm,
                             e.truncation_loss() + rhs.truncation_loss() + delta.truncation_loss(),
                             stats.min_divisor, lin.twist.cond, fp};
    return {std::move(next), std::move(diag)};
}

struct LongSolveReport {
    std::vector<IterationRow> history;
    bool converged = false;
    std::string stop_reason;
    double rho_start = 0.0, rho_end = 0.0, report_rho = 0.0;
    double eps0 = 0.0;
    double final_eps = 0.0;
    double hull_drift = 0.0;
    double trunc_loss_total = 0.0;
    double worst_contraction = 0.0;  // across fixed-point solves
};

inline std::pair<LongState, LongSolveReport> solve_long(const LongRangeModel& model,
                                                        const LongState& initial,
                                                        const LongSolveOptions& opts = {}) {
    const FrequencyBasis& b = model.basis();
    LongSolveReport rep;
    rep.rho_start = opts.resolved_rho_start(b);
    rep.rho_end = opts.resolved_rho_end(b);
    rep.report_rho = opts.resolved_report_rho(b);
    const double div_floor = opts.divergence_floor > 0 ? opts.divergence_floor : 10.0 * opts.tol;

    LongState state = initial;
    state.rho = rep.rho_start;
    state.h = state.h.without_mean();
    state.eps = weighted_norm(residual_long(state.h, model, state.rho, opts.exp_opts), state.rho);
    rep.eps0 = state.eps;
    rep.history.push_back(
        IterationRow{0, state.rho, state.eps, 0.0, 0.0, 1.0, 1.0, 1.0,
                     min_unit_divisor(*state.h.index_set(), b), 0.0});

    const FourierSeries h0 = state.h;
    double prev_eps = state.eps;
    int increase_streak = 0, nondecrease_streak = 0;

    if (state.eps <= opts.tol) {
        rep.converged = true;
        rep.stop_reason = "converged at iteration 0";
    } else {
        for (int n = 1; n <= opts.max_iter; ++n) {
            double rho_next = rep.rho_end + (rep.rho_start - rep.rho_end) * std::ldexp(1.0, -n);
            std::optional<LongStepDiagnostics> diag;
            try {
                auto [next, d] = newton_step_long(state, model, rho_next, opts);
                state = std::move(next);
                diag.emplace(std::move(d));
            } catch (const condition_error&) {
                throw;
            } catch (const divisor_error&) {
                throw;
            } catch (const error& inner) {
                throw divergence_error("solve_long: iteration broke down at step " +
                                       std::to_string(n) + ": " + inner.what());
            }
            rep.history.push_back(IterationRow{n, state.rho, state.eps, diag->delta_norm, 0.0,
                                               diag->cond.n_plus, diag->cond.n_minus,
                                               diag->cond.c, diag->min_divisor, diag->trunc_loss});
            rep.trunc_loss_total += diag->trunc_loss;
            rep.worst_contraction = std::max(rep.worst_contraction, diag->fp.contraction);

            if (state.eps <= opts.tol) {
                rep.converged = true;
                rep.stop_reason = "converged at iteration " + std::to_string(n);
                break;
            }
            increase_streak = state.eps > prev_eps ? increase_streak + 1 : 0;
            nondecrease_streak = state.eps >= prev_eps ? nondecrease_streak + 1 : 0;
            if (increase_streak >= 2 && state.eps > div_floor)
                throw divergence_error("solve_long: residual grew twice in a row");
            if (nondecrease_streak >= 2) {
                rep.stop_reason = "stagnation at iteration " + std::to_string(n);
                break;
            }
            prev_eps = state.eps;
        }
        if (rep.stop_reason.empty()) rep.stop_reason = "max iterations reached";
    }

    rep.final_eps = state.eps;
    rep.hull_drift = weighted_norm(state.h - h0, rep.report_rho);
    return {std::move(state), std::move(rep)};
}

// || d/dtheta E[h] - (DE[h] . l) ||_rho / (1 + ||E||_rho): the group
// structure identity behind the quasi-Newton trick, as a computable check.
inline double derivative_identity_check(const FourierSeries& h, const LongRangeModel& model, double rho,
                                const ExpSeriesOptions& exp_opts = {}) {
    const FrequencyBasis& b = model.basis();
    FourierSeries e = residual_long(h, model, rho, exp_opts);
    FourierSeries lhs = derive_alpha(e, b);

    FourierSeries l = derive_alpha(h, b) + Complex(1.0);
    FourierSeries rhs(h.index_set());
    for (const InteractionTerm& term : model.terms()) {
        for (int k = 0; k <= term.range(); ++k) {
            for (int j = 0; j <= term.range(); ++j) {
                FourierSeries d2 = eval_interaction(term, {k, j}, h, k, b, rho, exp_opts);
                rhs += multiply(d2, shift_steps(l, b, j - k), rho);
            }
        }
    }
    return weighted_norm(lhs - rhs, rho) / (1.0 + weighted_norm(e, rho));
}

struct LinearizedBounds {
    double t_bound = 0.0;  // ||(d^(0) d^(1) H_1)^{-1}|| proxy on the hull
    double u_bound = 0.0;  // |(<C_{0,1,1}^{-1}>)^{-1}|
    double beta = 0.0;
    bool gates_ok = false;
};

// The two smallness gates behind the linearized solve: the Neumann
// contraction q = (N-)^2 T beta, and the W-bar absorption
// U ||(C+G)^{-1} - C^{-1}||, bounded by U (N-)^2 T q / (1 - q). The cruder
// product (N-)^2 U T is scale-invariant and evaluates to ~1/c even for the
// unperturbed nearest-neighbour chain, so it is reported but does not gate.
struct LongRangeVerification {
    ConditionNumbers cond;
    std::vector<double> m_values;  // M_L at rho0 + ||h|| + iota
    LinearizedBounds bounds;
    double gate_contraction = 0.0;       // (N-)^2 T beta
    double gate_wbar_absorption = 0.0;        // U (N-)^2 T q / (1 - q)
    double gate_product_literal = 0.0;  // (N-)^2 U T, reported only
    double residual_norm = 0.0;
    double min_divisor = 0.0;
    double empirical_nu = 0.0;
    double identity_defect = 0.0;
    double rho = 0.0;
};

// Computes the non-degeneracy numbers, decay bounds and smallness gates at
// the given state.
inline LongRangeVerification verify_long(const FourierSeries& h, const LongRangeModel& model,
                                         double rho, double series_tol = 1e-14,
                                         const ExpSeriesOptions& exp_opts = {}) {
    const FrequencyBasis& b = model.basis();
    LongRangeVerification v;
    v.rho = rho;
    v.cond = detail::make_twist(h, b, rho, series_tol).cond;

    double m_radius = b.rho() + weighted_norm(h, b.rho()) + b.iota();
    v.m_values = model.decay_report(m_radius);
    v.bounds.beta = model.beta(m_radius);

    if (model.term(1)) {
        FourierSeries d2 = eval_interaction(*model.term(1), {0, 1}, h, 1, b, rho, exp_opts);
        v.bounds.t_bound = weighted_norm(reciprocal(d2, rho, series_tol), rho);
        FourierSeries c011 = c_series(0, 1, 1, h, model, rho, exp_opts);
        v.bounds.u_bound = 1.0 / std::abs(average(reciprocal(c011, rho, series_tol)));
    }

    double nm2t = v.cond.n_minus * v.cond.n_minus * v.bounds.t_bound;
    v.gate_contraction = nm2t * v.bounds.beta;
    v.gate_product_literal = nm2t * v.bounds.u_bound;
    v.gate_wbar_absorption = v.gate_contraction < 1.0
                    ? v.bounds.u_bound * nm2t * (v.gate_contraction / (1.0 - v.gate_contraction))
                    : std::numeric_limits<double>::infinity();
    v.bounds.gates_ok = v.gate_contraction < 0.5 && v.gate_wbar_absorption < 0.5;

    v.residual_norm = weighted_norm(residual_long(h, model, rho, exp_opts), rho);
    v.min_divisor = min_unit_divisor(*h.index_set(), b);
    std::vector<double> alpha = b.alpha();
    v.empirical_nu = empirical_nu(b.omega(), alpha, *h.index_set(), 1.0,
                                  DiophantineStyle::product);
    v.identity_defect = derivative_identity_check(h, model, rho, exp_opts);
    return v;
}

// Encodes a short-range model as the (H_0, H_1) pair whose long-range
// residual coincides with the short-range one (lambda = 0): H_0 = +V and a
// harmonic gap of weight -1. The sign convention is chosen so both residuals
// and steps match exactly rather than up to sign.
inline LongRangeModel short_range_reduction(const ShortRangeModel& sr) {
    const FrequencyBasis& b = sr.basis();
    InteractionTerm h0(0);
    if (sr.shell_v()) {
        for (const auto& [k, c] : sr.shell_v()->coeffs()) h0.add_tuple({k}, c);
    } else {
        if (std::abs(average(sr.shell_u())) > 0)
            throw config_error(
                "short_range_reduction: force with nonzero mean is not a slot derivative");
        for (const auto& [k, c] : sr.shell_u().coeffs()) {
            double t = b.dot_alpha(k);
            if (t == 0.0)
                throw config_error("short_range_reduction: resonant mode in the force");
            h0.add_tuple({k}, c / Complex(0.0, t));
        }
    }
    InteractionTerm h1(1);
    h1.set_gap_weight(-1.0);
    return LongRangeModel({std::move(h0), std::move(h1)}, b, sr.shell_u().index_set());
}

} // namespace apfk
