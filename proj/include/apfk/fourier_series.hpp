#pragma once

// Truncated Fourier series on T^N with the rho-weighted analytic norm:
// products, shifts, alpha-derivatives, averages, reciprocals and the
// composition operators built from the exponential series.
//
// Series are value-semantic; operations return new series. Modes pushed out
// of the index set by a product or composition are never dropped silently:
// their rho-weighted mass is accumulated into a truncation-loss scalar
// carried by the result.

#include <cmath>
#include <complex>
#include <limits>
#include <map>
#include <memory>
#include <numbers>
#include <span>
#include <vector>

#include "apfk/errors.hpp"
#include "apfk/multi_index.hpp"

namespace apfk {

using Complex = std::complex<double>;

// Frequency data shared by a whole computation: the truncated frequency
// vector alpha, the rotation number omega, the analyticity radius rho,
// the weight exponent s and the composition-domain margin iota.
class FrequencyBasis {
public:
    FrequencyBasis(std::vector<double> alpha, double omega, double rho, double s, double iota)
        : alpha_(std::move(alpha)), omega_(omega), rho_(rho), s_(s), iota_(iota) {
        if (alpha_.empty()) throw index_error("FrequencyBasis: alpha must be nonempty");
        for (std::size_t i = 0; i < alpha_.size(); ++i) {
            if (alpha_[i] == 0.0)
                throw index_error("FrequencyBasis: alpha entries must be nonzero");
            for (std::size_t j = i + 1; j < alpha_.size(); ++j)
                if (alpha_[i] == alpha_[j])
                    throw index_error("FrequencyBasis: alpha entries must be pairwise distinct");
        }
        if (!(rho_ > 0)) throw index_error("FrequencyBasis: rho must be positive");
        if (!(iota_ > 0)) throw index_error("FrequencyBasis: iota must be positive");
        if (!(s_ > 0)) throw index_error("FrequencyBasis: s must be positive");
    }

    const std::vector<double>& alpha() const { return alpha_; }
    double omega() const { return omega_; }
    double rho() const { return rho_; }
    double s() const { return s_; }
    double iota() const { return iota_; }
    int frequency_count() const { return static_cast<int>(alpha_.size()); }

    double dot_alpha(const MultiIndex& k) const {
        double acc = 0.0;
        for (const auto& e : k.entries()) {
            if (e.pos > frequency_count())
                throw index_error("FrequencyBasis: index position beyond alpha length");
            acc += alpha_[static_cast<std::size_t>(e.pos - 1)] * e.val;
        }
        return acc;
    }

    // The translation vector of T_{n omega alpha}.
    std::vector<double> step_vector(double steps) const {
        std::vector<double> x(alpha_.size());
        for (std::size_t i = 0; i < x.size(); ++i) x[i] = steps * omega_ * alpha_[i];
        return x;
    }

    // Restriction to the first n frequencies (continuation levels).
    FrequencyBasis truncated(int n, double rho) const {
        if (n < 1 || n > frequency_count())
            throw index_error("FrequencyBasis: bad truncation length");
        return FrequencyBasis(std::vector<double>(alpha_.begin(), alpha_.begin() + n),
                              omega_, rho, s_, iota_);
    }

private:
    std::vector<double> alpha_;
    double omega_, rho_, s_, iota_;
};

class FourierSeries {
public:
    using SetPtr = std::shared_ptr<const IndexSet>;
    using CoeffMap = std::map<MultiIndex, Complex>;

    explicit FourierSeries(SetPtr set) : set_(std::move(set)) {
        if (!set_) throw series_error("FourierSeries: null index set");
    }

    static FourierSeries zero(SetPtr set) { return FourierSeries(std::move(set)); }

    static FourierSeries constant(SetPtr set, Complex value) {
        FourierSeries f(std::move(set));
        if (value != 0.0) f.coeffs_[MultiIndex()] = value;
        return f;
    }

    // Single mode c * e^{i k.sigma}.
    static FourierSeries mode(SetPtr set, const MultiIndex& k, Complex c) {
        FourierSeries f(std::move(set));
        if (!f.set_->contains(k))
            throw series_error("FourierSeries: mode outside index set: " + k.to_string());
        if (c != 0.0) f.coeffs_[k] = c;
        return f;
    }

    // a * cos(k.sigma + phase) as the Hermitian pair of modes.
    static FourierSeries cosine(SetPtr set, const MultiIndex& k, double a, double phase = 0.0) {
        FourierSeries f(std::move(set));
        f.add_term(k, 0.5 * a * std::exp(Complex(0.0, phase)));
        f.add_term(-k, 0.5 * a * std::exp(Complex(0.0, -phase)));
        return f;
    }

    // a * sin(k.sigma + phase).
    static FourierSeries sine(SetPtr set, const MultiIndex& k, double a, double phase = 0.0) {
        return cosine(std::move(set), k, a, phase - std::numbers::pi / 2.0);
    }

    const SetPtr& index_set() const { return set_; }
    const CoeffMap& coeffs() const { return coeffs_; }
    std::size_t mode_count() const { return coeffs_.size(); }

    Complex coeff(const MultiIndex& k) const {
        auto it = coeffs_.find(k);
        return it == coeffs_.end() ? Complex(0.0) : it->second;
    }

    void set_coeff(const MultiIndex& k, Complex c) {
        if (!set_->contains(k))
            throw series_error("FourierSeries: mode outside index set: " + k.to_string());
        if (c == 0.0)
            coeffs_.erase(k);
        else
            coeffs_[k] = c;
    }

    void add_term(const MultiIndex& k, Complex c) {
        if (c == 0.0) return;
        if (!set_->contains(k))
            throw series_error("FourierSeries: mode outside index set: " + k.to_string());
        auto [it, inserted] = coeffs_.try_emplace(k, c);
        if (!inserted) {
            it->second += c;
            if (it->second == 0.0) coeffs_.erase(it);
        }
    }

    double truncation_loss() const { return trunc_loss_; }
    void add_truncation_loss(double x) { trunc_loss_ += x; }

    // Drops the zero mode.
    FourierSeries without_mean() const {
        FourierSeries r = *this;
        r.coeffs_.erase(MultiIndex());
        return r;
    }

    FourierSeries& operator+=(const FourierSeries& g) {
        require_same_family(g);
        for (const auto& [k, c] : g.coeffs_) add_unchecked(k, c);
        trunc_loss_ += g.trunc_loss_;
        return *this;
    }
    FourierSeries& operator-=(const FourierSeries& g) {
        require_same_family(g);
        for (const auto& [k, c] : g.coeffs_) add_unchecked(k, -c);
        trunc_loss_ += g.trunc_loss_;
        return *this;
    }
    FourierSeries& operator*=(Complex z) {
        trunc_loss_ *= std::abs(z);
        if (z == 0.0) {
            coeffs_.clear();
            return *this;
        }
        for (auto& [k, c] : coeffs_) c *= z;
        return *this;
    }

    friend FourierSeries operator+(FourierSeries f, const FourierSeries& g) { return f += g; }
    friend FourierSeries operator-(FourierSeries f, const FourierSeries& g) { return f -= g; }
    friend FourierSeries operator*(FourierSeries f, Complex z) { return f *= z; }
    friend FourierSeries operator*(Complex z, FourierSeries f) { return f *= z; }
    friend FourierSeries operator+(FourierSeries f, Complex z) {
        f.add_unchecked(MultiIndex(), z);
        return f;
    }
    friend FourierSeries operator-(FourierSeries f, Complex z) { return std::move(f) + (-z); }

    void require_same_family(const FourierSeries& g) const {
        if (!set_->same_family(*g.set_))
            throw series_error("FourierSeries: incompatible index sets");
    }

private:
    void add_unchecked(const MultiIndex& k, Complex c) {
        if (c == 0.0) return;
        auto [it, inserted] = coeffs_.try_emplace(k, c);
        if (!inserted) {
            it->second += c;
            if (it->second == 0.0) coeffs_.erase(it);
        }
    }

    SetPtr set_;
    CoeffMap coeffs_;
    double trunc_loss_ = 0.0;

    friend FourierSeries multiply(const FourierSeries&, const FourierSeries&, double);
    friend FourierSeries translate_modes(const FourierSeries&, const MultiIndex&, double);
};

// || f ||_rho = sum_k |c_k| e^{rho |k|_s}
inline double weighted_norm(const FourierSeries& f, double rho) {
    const double s = f.index_set()->weight_exponent();
    double acc = 0.0;
    for (const auto& [k, c] : f.coeffs()) acc += std::abs(c) * std::exp(rho * k.norm_s(s));
    return acc;
}

inline Complex average(const FourierSeries& f) { return f.coeff(MultiIndex()); }

// Truncated convolution. Modes leaving the index set are accounted at weight
// e^{rho_loss |k|_s} in the result's truncation loss (rho_loss = 0 gives the
// plain dropped-coefficient mass). The loss is a conservative aggregate
// diagnostic: operand losses are inherited on top of this operation's drops,
// so it is zero exactly when nothing was dropped anywhere in the chain.
inline FourierSeries multiply(const FourierSeries& f, const FourierSeries& g,
                              double rho_loss = 0.0) {
    f.require_same_family(g);
    const IndexSet& set = *f.index_set();
    const double s = set.weight_exponent();
    FourierSeries r(f.index_set());
    for (const auto& [ka, ca] : f.coeffs_) {
        for (const auto& [kb, cb] : g.coeffs_) {
            MultiIndex k = ka + kb;
            Complex c = ca * cb;
            if (set.contains(k))
                r.add_unchecked(k, c);
            else
                r.trunc_loss_ += std::abs(c) * std::exp(rho_loss * k.norm_s(s));
        }
    }
    r.trunc_loss_ += f.trunc_loss_ + g.trunc_loss_;
    return r;
}

// f * e^{i k0.sigma}: every mode moves by k0; moved-out modes are accounted.
inline FourierSeries translate_modes(const FourierSeries& f, const MultiIndex& k0,
                                     double rho_loss = 0.0) {
    const IndexSet& set = *f.index_set();
    const double s = set.weight_exponent();
    FourierSeries r(f.index_set());
    for (const auto& [k, c] : f.coeffs_) {
        MultiIndex kk = k + k0;
        if (set.contains(kk))
            r.add_unchecked(kk, c);
        else
            r.trunc_loss_ += std::abs(c) * std::exp(rho_loss * kk.norm_s(s));
    }
    r.trunc_loss_ += f.trunc_loss_;
    return r;
}

// f composed with T_x, x real: coefficients pick up the phase e^{i k.x}.
inline FourierSeries shift(const FourierSeries& f, std::span<const double> x) {
    FourierSeries r(f.index_set());
    for (const auto& [k, c] : f.coeffs()) {
        double phase = 0.0;
        for (const auto& e : k.entries()) {
            if (e.pos > static_cast<int>(x.size()))
                throw series_error("shift: translation vector shorter than index support");
            phase += x[static_cast<std::size_t>(e.pos - 1)] * e.val;
        }
        r.set_coeff(k, c * std::exp(Complex(0.0, phase)));
    }
    r.add_truncation_loss(f.truncation_loss());
    return r;
}

// f composed with T_{steps * omega * alpha}.
inline FourierSeries shift_steps(const FourierSeries& f, const FrequencyBasis& basis,
                                 double steps) {
    std::vector<double> x = basis.step_vector(steps);
    return shift(f, x);
}

// d_alpha f = (alpha . grad) f: coefficients i (k.alpha) c_k.
inline FourierSeries derive_alpha(const FourierSeries& f, const FrequencyBasis& basis) {
    FourierSeries r(f.index_set());
    for (const auto& [k, c] : f.coeffs()) {
        if (k.is_zero()) continue;
        r.set_coeff(k, c * Complex(0.0, basis.dot_alpha(k)));
    }
    r.add_truncation_loss(f.truncation_loss());
    return r;
}

// Pointwise evaluation by direct summation.
inline Complex evaluate(const FourierSeries& f, std::span<const double> sigma) {
    Complex acc = 0.0;
    for (const auto& [k, c] : f.coeffs()) {
        double phase = 0.0;
        for (const auto& e : k.entries()) {
            if (e.pos > static_cast<int>(sigma.size()))
                throw series_error("evaluate: point has fewer components than index support");
            phase += sigma[static_cast<std::size_t>(e.pos - 1)] * e.val;
        }
        acc += c * std::exp(Complex(0.0, phase));
    }
    return acc;
}

// Multiplicative inverse by the quadratically convergent Newton iteration
// r <- r (2 - f r), seeded with 1/<f>. Postcondition ||f r - 1||_rho <= tol.
inline FourierSeries reciprocal(const FourierSeries& f, double rho, double tol = 1e-14,
                                int max_iter = 64) {
    Complex mean = average(f);
    if (std::abs(mean) == 0.0)
        throw series_error("reciprocal: series has zero average");
    FourierSeries r = FourierSeries::constant(f.index_set(), 1.0 / mean);
    double prev = std::numeric_limits<double>::infinity();
    for (int it = 0; it < max_iter; ++it) {
        FourierSeries fr = multiply(f, r, rho);
        double res = weighted_norm(fr - Complex(1.0), rho);
        if (res <= tol) return r;
        if (res >= prev && res > 1e-3)
            throw series_error("reciprocal: Newton iteration diverged (singular series)");
        prev = res;
        FourierSeries two_minus = FourierSeries::constant(f.index_set(), 2.0) - fr;
        r = multiply(r, two_minus, rho);
    }
    throw series_error("reciprocal: residual tolerance not reached within iteration cap");
}

struct ExpSeriesOptions {
    double tol = 1e-14;   // relative term-size stopping rule
    int term_cap = 64;
};

// Partial sum of e^{i t h} = sum_n (it)^n h^n / n!, stopping once the
// rho-norm of the current term is below tol relative to the sum.
inline FourierSeries exp_i_series(double t, const FourierSeries& h, double rho,
                                  const ExpSeriesOptions& opts = {}) {
    FourierSeries sum = FourierSeries::constant(h.index_set(), 1.0);
    if (t == 0.0 || h.mode_count() == 0) return sum;
    FourierSeries term = sum;
    for (int n = 1; n <= opts.term_cap; ++n) {
        term = multiply(term, h, rho);
        term *= Complex(0.0, t) / static_cast<double>(n);
        sum += term;
        if (weighted_norm(term, rho) <= opts.tol * std::max(1.0, weighted_norm(sum, rho)))
            return sum;
    }
    throw series_error("exp_i_series: term cap exceeded before convergence");
}

// Composition operator Phi[h](sigma) = U(sigma + alpha h(sigma)), computed
// mode by mode through the exponential series. Requires ||h||_rho < iota.
inline FourierSeries compose_shell(const FourierSeries& U, const FourierSeries& h,
                                   const FrequencyBasis& basis, double rho,
                                   const ExpSeriesOptions& opts = {}) {
    U.require_same_family(h);
    double hn = weighted_norm(h, rho);
    if (hn >= basis.iota())
        throw margin_error("compose_shell: ||h||_rho = " + std::to_string(hn) +
                           " exceeds composition margin iota = " + std::to_string(basis.iota()));
    FourierSeries result(U.index_set());
    std::map<double, FourierSeries> exp_cache;
    for (const auto& [k, c] : U.coeffs()) {
        double t = basis.dot_alpha(k);
        auto it = exp_cache.find(t);
        if (it == exp_cache.end())
            it = exp_cache.emplace(t, exp_i_series(t, h, rho, opts)).first;
        FourierSeries term = translate_modes(it->second, k, rho);
        term *= c;
        result += term;
    }
    return result;
}

// Interpolation inequality ||f||_rho <= ||f||_{rho-delta}^{1/2} ||f||_{rho+delta}^{1/2},
// checked with 1e-12 relative slack.
inline bool interpolation_check(const FourierSeries& f, double rho, double delta) {
    if (!(delta > 0) || delta > rho)
        throw series_error("interpolation_check: need 0 < delta <= rho");
    double mid = weighted_norm(f, rho);
    double lo = weighted_norm(f, rho - delta);
    double hi = weighted_norm(f, rho + delta);
    return mid <= std::sqrt(lo * hi) * (1.0 + 1e-12) + 1e-300;
}

// True when c_{-k} = conj(c_k) for every stored mode (real-valued series).
inline bool real_symmetric(const FourierSeries& f, double tol = 1e-12) {
    double scale = std::max(1.0, weighted_norm(f, 0.0));
    for (const auto& [k, c] : f.coeffs()) {
        if (std::abs(c - std::conj(f.coeff(-k))) > tol * scale) return false;
    }
    return true;
}

} // namespace apfk
