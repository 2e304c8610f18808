#pragma once

// Small-divisor difference equations S_n phi = eta, with [S_n eta](sigma) =
// eta(sigma + n w a) - eta(sigma), and the bounded comparison operators
// L_n = S_{+-1}^{-1} S_n, R_n = S_n S_{+-1}^{-1}. All operators are diagonal
// on Fourier modes; divisions are guarded by a configurable floor.

#include <cmath>
#include <complex>

#include "apfk/errors.hpp"
#include "apfk/fourier_series.hpp"

namespace apfk {

struct DivisorFloor {
    enum class Policy { error, clamp };
    double floor = 1e-14;
    Policy policy = Policy::error;
};

struct CohomologyStats {
    double min_divisor = std::numeric_limits<double>::infinity();
    int clamped = 0;
};

// e^{ix} - 1 = 2 i sin(x/2) e^{i x/2}; |value| = 2 |sin(x/2)|, stable near
// resonances where cos(x) - 1 would cancel.
inline Complex unit_divisor(double x) {
    double half = 0.5 * x;
    return Complex(0.0, 2.0 * std::sin(half)) * std::exp(Complex(0.0, half));
}

namespace detail {

inline Complex guarded(Complex denom, const DivisorFloor& floor, CohomologyStats* stats,
                       const MultiIndex& k) {
    double mag = std::abs(denom);
    if (stats && mag < stats->min_divisor) stats->min_divisor = mag;
    if (mag >= floor.floor) return denom;
    if (floor.policy == DivisorFloor::Policy::error)
        throw divisor_error("small divisor " + std::to_string(mag) + " below floor at k = '" +
                            k.to_string() + "'");
    if (stats) ++stats->clamped;
    return mag > 0.0 ? denom * (floor.floor / mag) : Complex(0.0, floor.floor);
}

inline void require_near_zero_average(const FourierSeries& f, const char* who) {
    double mean = std::abs(average(f));
    if (mean > 1e-12 * std::max(1e-300, weighted_norm(f, 0.0)))
        throw series_error(std::string(who) + ": input average " + std::to_string(mean) +
                           " is materially nonzero");
}

} // namespace detail

// Solves S_n phi = eta for the zero-average phi: phi_k = eta_k /
// (e^{i n k.wa} - 1). The input mean must vanish up to numerical noise;
// it is projected out after the check.
inline FourierSeries solve_S(int n, const FourierSeries& eta, const FrequencyBasis& basis,
                             const DivisorFloor& floor = {}, CohomologyStats* stats = nullptr) {
    if (n == 0) throw series_error("solve_S: n must be nonzero");
    detail::require_near_zero_average(eta, "solve_S");
    FourierSeries phi(eta.index_set());
    for (const auto& [k, c] : eta.coeffs()) {
        if (k.is_zero()) continue;
        double x = n * basis.omega() * basis.dot_alpha(k);
        phi.set_coeff(k, c / detail::guarded(unit_divisor(x), floor, stats, k));
    }
    phi.add_truncation_loss(eta.truncation_loss());
    return phi;
}

// Applies S_n itself (finite difference along the orbit).
inline FourierSeries apply_S(int n, const FourierSeries& f, const FrequencyBasis& basis) {
    return shift_steps(f, basis, static_cast<double>(n)) - f;
}

// L_n^{sign} = S_{sign}^{-1} S_n: diagonal multiplier
// (e^{i n k.wa} - 1) / (e^{i sign k.wa} - 1) on nonzero modes; n = 0 gives 0.
inline FourierSeries apply_L(int n, const FourierSeries& f, const FrequencyBasis& basis,
                             int sign = 1, const DivisorFloor& floor = {},
                             CohomologyStats* stats = nullptr) {
    if (sign != 1 && sign != -1) throw series_error("apply_L: sign must be +-1");
    FourierSeries r(f.index_set());
    if (n == 0) return r;
    for (const auto& [k, c] : f.coeffs()) {
        if (k.is_zero()) continue;
        double x = basis.omega() * basis.dot_alpha(k);
        Complex num = unit_divisor(n * x);
        Complex den = detail::guarded(unit_divisor(sign * x), floor, stats, k);
        r.set_coeff(k, c * num / den);
    }
    r.add_truncation_loss(f.truncation_loss());
    return r;
}

// R_n^{sign} = S_n S_{sign}^{-1} on zero-average series; same diagonal values
// as L_n^{sign}.
inline FourierSeries apply_R(int n, const FourierSeries& f, const FrequencyBasis& basis,
                             int sign = 1, const DivisorFloor& floor = {},
                             CohomologyStats* stats = nullptr) {
    detail::require_near_zero_average(f, "apply_R");
    return apply_L(n, f.without_mean(), basis, sign, floor, stats);
}

// Smallest |e^{i k.wa} - 1| over the nonzero modes of the set.
inline double min_unit_divisor(const IndexSet& set, const FrequencyBasis& basis) {
    double best = std::numeric_limits<double>::infinity();
    for (const MultiIndex& k : set.members()) {
        if (k.is_zero()) continue;
        best = std::min(best, std::abs(unit_divisor(basis.omega() * basis.dot_alpha(k))));
    }
    return best;
}

} // namespace apfk
