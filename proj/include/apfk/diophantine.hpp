#pragma once

// Finite certificates for the two Diophantine condition families: the
// infinite-dimensional product form |w a.k - 2 pi n| >= nu / prod_j (1 +
// <<j>>^{1+tau} |k_j|^{1+tau}) and the finite-dimensional power form
// |w a.k - 2 pi n| >= nu |k|_1^{-tau}. Checks run over the solver's actual
// truncated index set; nothing here claims full measure.

#include <cmath>
#include <numbers>
#include <optional>
#include <span>
#include <string>

#include "apfk/errors.hpp"
#include "apfk/multi_index.hpp"

namespace apfk {

enum class DiophantineStyle { product, power };

struct DiophantineParams {
    double nu = 0.0;
    double tau = 1.0;
    DiophantineStyle style = DiophantineStyle::product;
    int level = 0;  // N for the power style; informational

    DiophantineParams() = default;
    DiophantineParams(double nu_, double tau_, DiophantineStyle style_, int level_ = 0)
        : nu(nu_), tau(tau_), style(style_), level(level_) {
        if (!(nu > 0)) throw config_error("DiophantineParams: nu must be positive");
        if (!(tau > 0)) throw config_error("DiophantineParams: tau must be positive");
    }
};

// Distance of w a.k to 2 pi Z, via nearest-integer rounding.
inline double divisor(double omega, std::span<const double> alpha, const MultiIndex& k) {
    if (k.is_zero()) throw index_error("divisor: k must be nonzero");
    double t = 0.0;
    for (const auto& e : k.entries()) {
        if (e.pos > static_cast<int>(alpha.size()))
            throw index_error("divisor: index position beyond alpha length");
        t += alpha[static_cast<std::size_t>(e.pos - 1)] * e.val;
    }
    t *= omega;
    const double two_pi = 2.0 * std::numbers::pi;
    return std::abs(t - two_pi * std::round(t / two_pi));
}

// The weight that multiplies the divisor in each condition: the condition
// reads divisor(k) * weight(k) >= nu.
inline double diophantine_weight(const MultiIndex& k, double tau, DiophantineStyle style) {
    if (style == DiophantineStyle::product) {
        double w = 1.0;
        for (const auto& e : k.entries())
            w *= 1.0 + std::pow(frequency_weight(e.pos, 1.0), 1.0 + tau) *
                           std::pow(std::abs(static_cast<double>(e.val)), 1.0 + tau);
        return w;
    }
    return std::pow(static_cast<double>(k.norm_one()), tau);
}

// Largest nu for which the condition holds on the truncated set:
// min over k != 0 of divisor(k) * weight(k).
inline double empirical_nu(double omega, std::span<const double> alpha, const IndexSet& set,
                           double tau, DiophantineStyle style,
                           const MultiIndex** argmin = nullptr) {
    double best = std::numeric_limits<double>::infinity();
    const MultiIndex* best_k = nullptr;
    for (const MultiIndex& k : set.members()) {
        if (k.is_zero()) continue;
        double v = divisor(omega, alpha, k) * diophantine_weight(k, tau, style);
        if (v < best) {
            best = v;
            best_k = &k;
        }
    }
    if (!best_k) throw index_error("empirical_nu: set holds no nonzero index");
    if (argmin) *argmin = best_k;
    return best;
}

struct DiophantineReport {
    bool pass = false;
    double nu = 0.0;
    double tau = 0.0;
    DiophantineStyle style = DiophantineStyle::product;
    double empirical_nu = 0.0;   // min divisor * weight over the set
    double margin = 0.0;         // empirical_nu / nu
    double min_divisor = 0.0;    // raw min distance to 2 pi Z
    MultiIndex worst_index;      // argmin of divisor * weight
    std::optional<MultiIndex> witness;  // violating k when pass == false
    std::size_t checked = 0;
};

inline DiophantineReport check(const DiophantineParams& params, double omega,
                               std::span<const double> alpha, const IndexSet& set) {
    DiophantineReport rep;
    rep.nu = params.nu;
    rep.tau = params.tau;
    rep.style = params.style;

    const MultiIndex* worst = nullptr;
    rep.empirical_nu = empirical_nu(omega, alpha, set, params.tau, params.style, &worst);
    rep.worst_index = *worst;
    rep.margin = rep.empirical_nu / params.nu;
    rep.pass = rep.empirical_nu >= params.nu;
    if (!rep.pass) rep.witness = rep.worst_index;
    rep.checked = set.size() - 1;

    double dmin = std::numeric_limits<double>::infinity();
    for (const MultiIndex& k : set.members())
        if (!k.is_zero()) dmin = std::min(dmin, divisor(omega, alpha, k));
    rep.min_divisor = dmin;
    return rep;
}

inline std::string to_string(DiophantineStyle s) {
    return s == DiophantineStyle::product ? "product" : "power";
}

} // namespace apfk
