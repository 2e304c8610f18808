#pragma once

// Step-by-step increase of complexity: solve with N frequencies, then use
// the result as the initial guess for N+1. Radii follow
// rho_n = rho_inf + 2^{-n-1} (rho - rho_inf); each level records the
// a-posteriori quantities of the finite-dimensional theorem it invokes.

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "apfk/diophantine.hpp"
#include "apfk/errors.hpp"
#include "apfk/short_range.hpp"

namespace apfk {

struct LadderLevel {
    double alpha = 0.0;  // the frequency added at this level
    double nu = 0.0;     // Diophantine constants for the power-form check
    double tau = 1.0;
    std::optional<FourierSeries> w_shell;  // force shell over this level's set
};

class FrequencyLadder {
public:
    FrequencyLadder(double omega, double rho, double rho_inf, double s, double iota,
                    double index_radius, std::uint64_t cap = IndexSet::default_cardinality_cap())
        : omega_(omega), rho_(rho), rho_inf_(rho_inf), s_(s), iota_(iota),
          index_radius_(index_radius), cap_(cap) {
        if (!(rho_inf > 0) || !(rho_inf < rho))
            throw config_error("FrequencyLadder: need 0 < rho_inf < rho");
    }

    int add_level(double alpha, double nu, double tau) {
        levels_.push_back(LadderLevel{alpha, nu, tau, std::nullopt});
        sets_.push_back(nullptr);
        return static_cast<int>(levels_.size());
    }

    // Index set for a level (frequencies 1..level).
    const std::shared_ptr<const IndexSet>& set_at(int level) const {
        if (level < 1 || level > level_count())
            throw config_error("FrequencyLadder: level out of range");
        auto& slot = sets_[static_cast<std::size_t>(level - 1)];
        if (!slot)
            slot = std::make_shared<IndexSet>(IndexSet::enumerate(level, index_radius_, s_, cap_));
        return slot;
    }

    void set_level_force(int level, FourierSeries w) {
        if (level < 1 || level > level_count())
            throw config_error("FrequencyLadder: level out of range");
        if (!w.index_set()->same_family(*set_at(level)))
            throw config_error("FrequencyLadder: force must live on the level's index set");
        levels_[static_cast<std::size_t>(level - 1)].w_shell = std::move(w);
    }

    int level_count() const { return static_cast<int>(levels_.size()); }
    const std::vector<LadderLevel>& levels() const { return levels_; }
    double omega() const { return omega_; }
    double rho() const { return rho_; }
    double rho_inf() const { return rho_inf_; }
    double s() const { return s_; }
    double iota() const { return iota_; }
    double index_radius() const { return index_radius_; }

    // rho_n = rho_inf + 2^{-n-1} (rho - rho_inf), n = 0, 1, ...
    double rho_at(int n) const { return rho_inf_ + std::ldexp(rho_ - rho_inf_, -n - 1); }

    FrequencyBasis basis_at(int level, double rho) const {
        std::vector<double> alpha;
        alpha.reserve(static_cast<std::size_t>(level));
        for (int j = 0; j < level; ++j) alpha.push_back(levels_[static_cast<std::size_t>(j)].alpha);
        return FrequencyBasis(std::move(alpha), omega_, rho, s_, iota_);
    }

    // Sum of the level forces up to `level`, embedded in that level's space.
    FourierSeries summed_force(int level) const {
        FourierSeries u(set_at(level));
        for (int j = 1; j <= level; ++j) {
            const auto& w = levels_[static_cast<std::size_t>(j - 1)].w_shell;
            if (!w) throw config_error("FrequencyLadder: level " + std::to_string(j) +
                                       " has no force shell");
            u += embed(*w, set_at(level));
        }
        return u;
    }

    // Coefficient-preserving widening of the index space.
    static FourierSeries embed(const FourierSeries& f,
                               const std::shared_ptr<const IndexSet>& target) {
        const IndexSet& src = *f.index_set();
        if (target->active_count() < src.active_count() ||
            target->radius() != src.radius() || target->weight_exponent() != src.weight_exponent())
            throw config_error("embed: target set must widen the source set");
        FourierSeries out(target);
        for (const auto& [k, c] : f.coeffs()) out.set_coeff(k, c);
        out.add_truncation_loss(f.truncation_loss());
        return out;
    }

private:
    std::vector<LadderLevel> levels_;
    mutable std::vector<std::shared_ptr<const IndexSet>> sets_;
    double omega_, rho_, rho_inf_, s_, iota_, index_radius_;
    std::uint64_t cap_;
};

struct LadderState {
    int level = 0;
    FourierSeries h;
    double lambda = 0.0;
    double rho_level = 0.0;
    std::vector<double> deltas;  // ||h^{n+1} - h^n|| at rho_{n+1}, per extension

    static LadderState initial(const FrequencyLadder& ladder) {
        if (ladder.level_count() < 1)
            throw config_error("LadderState: ladder has no levels");
        return LadderState{0, FourierSeries::zero(ladder.set_at(1)), 0.0, ladder.rho_at(0), {}};
    }
};

struct LadderRow {
    int level = 0;
    double rho_level = 0.0;
    double residual = 0.0;      // final eps of the level solve
    double delta = 0.0;         // ||h^{n} - embedded h^{n-1}|| at rho_n
    double delta_target = 0.0;  // (rho - rho_inf) 2^{-(n-1)-2}
    double n_plus = 1.0, n_minus = 1.0, c = 1.0;
    double min_divisor = 0.0;
    double lambda = 0.0;
    double dioph_nu_empirical = 0.0;
    bool dioph_pass = false;
    bool converged = false;
    int iterations = 0;
    std::optional<FourierSeries> hull;  // the level's solved hull
};

struct LadderReport {
    std::vector<LadderRow> rows;
    bool completed = false;
    std::string halt_reason;
    double delta_sum = 0.0;
    double orbit_residual = -1.0;  // filled by orbit_check
    int orbit_range = 0;
};

// One extension: embed the level-n solution, add the level-(n+1) force and
// re-solve from the embedded guess at radii rho_n -> rho_{n+1}.
inline std::pair<LadderState, LadderRow> extend(const LadderState& state,
                                                const FrequencyLadder& ladder,
                                                const SolveOptions& base_opts = {}) {
    int target = state.level + 1;
    if (target > ladder.level_count())
        throw config_error("extend: no level " + std::to_string(target) + " in the ladder");

    double rho_start = ladder.rho_at(target - 1);
    double rho_end = ladder.rho_at(target);
    FrequencyBasis basis = ladder.basis_at(target, rho_start);
    const auto& set = ladder.set_at(target);

    FourierSeries guess = FrequencyLadder::embed(state.h, set);
    ShortRangeModel model(ladder.summed_force(target), basis);

    SolveOptions opts = base_opts;
    opts.rho_start = rho_start;
    opts.rho_end = rho_end;
    opts.report_rho = rho_end;

    SolverState init{guess, state.lambda, rho_start, 0.0, 0};
    auto [solved, rep] = solve(model, init, opts);
    if (!rep.converged)
        throw divergence_error("extend: level " + std::to_string(target) +
                               " did not converge (" + rep.stop_reason + ")");

    LadderRow row;
    row.level = target;
    row.rho_level = rho_end;
    row.residual = weighted_norm(residual(solved.h, solved.lambda, model, rho_end), rho_end);
    row.delta = weighted_norm(solved.h - guess, rho_end);
    row.delta_target = std::ldexp(ladder.rho() - ladder.rho_inf(), -(target - 1) - 2);
    row.lambda = solved.lambda;
    row.converged = rep.converged;
    row.iterations = static_cast<int>(rep.history.size()) - 1;
    ConditionNumbers cond = condition_numbers(solved.h, model, rho_end, opts.series_tol);
    row.n_plus = cond.n_plus;
    row.n_minus = cond.n_minus;
    row.c = cond.c;
    row.min_divisor = min_unit_divisor(*set, basis);

    const LadderLevel& lv = ladder.levels()[static_cast<std::size_t>(target - 1)];
    std::vector<double> alpha = basis.alpha();
    auto dioph = check(DiophantineParams(lv.nu, lv.tau, DiophantineStyle::power, target),
                       ladder.omega(), alpha, *set);
    row.dioph_nu_empirical = dioph.empirical_nu;
    row.dioph_pass = dioph.pass;
    row.hull = solved.h;

    LadderState next{target, solved.h, solved.lambda, rho_end, state.deltas};
    next.deltas.push_back(row.delta);
    return {std::move(next), std::move(row)};
}

// Pointwise second-difference residual of the orbit u_m = m w + h(m w a)
// against the summed level forces, over |m| <= range.
inline double orbit_residual(const LadderState& state, const FrequencyLadder& ladder,
                             int range = 500) {
    if (state.level < 1) return 0.0;
    FrequencyBasis basis = ladder.basis_at(state.level, state.rho_level);
    const std::vector<double>& alpha = basis.alpha();

    auto hull = [&](long long m) {
        double theta = static_cast<double>(m) * ladder.omega();
        std::vector<double> sigma(alpha.size());
        for (std::size_t i = 0; i < alpha.size(); ++i) sigma[i] = theta * alpha[i];
        return theta + evaluate(state.h, sigma).real();
    };
    auto force = [&](double u) {
        double acc = 0.0;
        for (int j = 1; j <= state.level; ++j) {
            const auto& w = ladder.levels()[static_cast<std::size_t>(j - 1)].w_shell;
            std::vector<double> sigma(static_cast<std::size_t>(j));
            for (int i = 0; i < j; ++i)
                sigma[static_cast<std::size_t>(i)] =
                    u * ladder.levels()[static_cast<std::size_t>(i)].alpha;
            acc += evaluate(*w, sigma).real();
        }
        return acc;
    };

    double worst = 0.0;
    double u_prev = hull(-range - 1), u_mid = hull(-range);
    for (long long m = -range; m <= range; ++m) {
        double u_next = hull(m + 1);
        worst = std::max(worst, std::abs(u_next + u_prev - 2.0 * u_mid + force(u_mid)));
        u_prev = u_mid;
        u_mid = u_next;
    }
    return worst;
}

// Folds extend over all levels. A failed level halts the ladder and returns
// the last completed state, flagged.
inline std::pair<LadderState, LadderReport> run_ladder(const FrequencyLadder& ladder,
                                                       const SolveOptions& opts = {},
                                                       int orbit_range = 500) {
    LadderState state = LadderState::initial(ladder);
    LadderReport rep;
    for (int level = 1; level <= ladder.level_count(); ++level) {
        try {
            auto [next, row] = extend(state, ladder, opts);
            state = std::move(next);
            rep.rows.push_back(row);
            rep.delta_sum += row.delta;
        } catch (const error& e) {
            rep.completed = false;
            rep.halt_reason = e.what();
            return {std::move(state), std::move(rep)};
        }
    }
    rep.completed = true;
    if (state.level >= 1 && orbit_range > 0) {
        rep.orbit_residual = orbit_residual(state, ladder, orbit_range);
        rep.orbit_range = orbit_range;
    }
    return {std::move(state), std::move(rep)};
}

} // namespace apfk
