#pragma once

// Two brute-force oracles anchoring acceptance, independent of the
// quasi-Newton path:
//   - a full-Jacobian Newton solve of the truncated system E[h, lambda] = 0
//     with <h> = 0 on the real coefficient vector;
//   - a periodic-chain Newton for the rational approximant w ~ 2 pi p / q
//     with boundary u_{n+q} = u_n + 2 pi p.

#include <Eigen/Dense>
#include <functional>
#include <numbers>
#include <numeric>
#include <vector>

#include "apfk/errors.hpp"
#include "apfk/short_range.hpp"

namespace apfk {

struct DenseNewtonResult {
    FourierSeries h;
    double lambda = 0.0;
    double residual_sup = 0.0;  // sup over coefficient equations
    int iterations = 0;
};

// Solves the truncated nonlinear system by dense Newton. Unknowns are the
// real and imaginary parts of c_k over one representative of each {k, -k}
// pair, plus lambda; equations are the residual coefficients.
inline DenseNewtonResult oracle_dense_newton(const ShortRangeModel& model,
                                             const std::shared_ptr<const IndexSet>& set,
                                             double tol = 1e-13, int max_iter = 50) {
    const FrequencyBasis& basis = model.basis();
    const double rho = basis.rho();

    std::vector<MultiIndex> half;
    for (const MultiIndex& k : set->members())
        if (k.lex_sign() > 0) half.push_back(k);
    const std::size_t m = 2 * half.size() + 1;
    if (m > 2000)
        throw config_error("oracle_dense_newton: " + std::to_string(m) +
                           " unknowns exceed the dense-solver budget");

    auto build_h = [&](const Eigen::VectorXd& x) {
        FourierSeries h(set);
        for (std::size_t i = 0; i < half.size(); ++i) {
            Complex c(x(static_cast<Eigen::Index>(2 * i)),
                      x(static_cast<Eigen::Index>(2 * i + 1)));
            h.set_coeff(half[i], c);
            h.set_coeff(-half[i], std::conj(c));
        }
        return h;
    };
    auto pack_residual = [&](const FourierSeries& e, Eigen::VectorXd& f) {
        for (std::size_t i = 0; i < half.size(); ++i) {
            Complex c = e.coeff(half[i]);
            f(static_cast<Eigen::Index>(2 * i)) = c.real();
            f(static_cast<Eigen::Index>(2 * i + 1)) = c.imag();
        }
        f(static_cast<Eigen::Index>(m - 1)) = average(e).real();
    };

    Eigen::VectorXd x = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m));
    DenseNewtonResult result{FourierSeries::zero(set), 0.0, 0.0, 0};

    for (int it = 0; it <= max_iter; ++it) {
        FourierSeries h = build_h(x);
        double lambda = x(static_cast<Eigen::Index>(m - 1));
        FourierSeries e = residual(h, lambda, model, rho);
        Eigen::VectorXd f(static_cast<Eigen::Index>(m));
        pack_residual(e, f);

        double sup = f.cwiseAbs().maxCoeff();
        if (sup <= tol) {
            result.h = std::move(h);
            result.lambda = lambda;
            result.residual_sup = sup;
            result.iterations = it;
            return result;
        }
        if (it == max_iter || !std::isfinite(sup) || sup > 1e6)
            throw divergence_error("oracle_dense_newton: no convergence (sup residual " +
                                   std::to_string(sup) + ")");

        // J v = v o T_+ + v o T_- - 2 v + G . v, with G the composed force
        // derivative; the lambda column is the constant equation.
        FourierSeries g = compose_shell(derive_alpha(model.shell_u(), basis), h, basis, rho);
        Eigen::MatrixXd jac(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
        Eigen::VectorXd col(static_cast<Eigen::Index>(m));
        for (std::size_t i = 0; i < half.size(); ++i) {
            for (int part = 0; part < 2; ++part) {
                Complex unit = part == 0 ? Complex(1.0, 0.0) : Complex(0.0, 1.0);
                FourierSeries v(set);
                v.set_coeff(half[i], unit);
                v.set_coeff(-half[i], std::conj(unit));
                FourierSeries jv = shift_steps(v, basis, 1.0) + shift_steps(v, basis, -1.0) -
                                   v * Complex(2.0) + multiply(g, v, rho);
                pack_residual(jv, col);
                jac.col(static_cast<Eigen::Index>(2 * i + static_cast<std::size_t>(part))) = col;
            }
        }
        FourierSeries one = FourierSeries::constant(set, 1.0);
        pack_residual(one, col);
        jac.col(static_cast<Eigen::Index>(m - 1)) = col;

        x -= jac.partialPivLu().solve(f);
    }
    throw divergence_error("oracle_dense_newton: unreachable");
}

struct FiniteChainResult {
    std::vector<double> u;  // q positions, u_{n+q} = u_n + 2 pi p
    int p = 0, q = 0;
    double residual_sup = 0.0;
    int iterations = 0;
};

// Newton on the q-site periodic chain u_{n+1} + u_{n-1} - 2 u_n + force(u_n)
// with the rational rotation 2 pi p / q. The seed is the unperturbed lattice.
inline FiniteChainResult oracle_finite_chain(const std::function<double(double)>& force,
                                             const std::function<double(double)>& dforce, int p,
                                             int q, double tol = 1e-12, int max_iter = 100) {
    if (q < 2 || p < 1) throw config_error("oracle_finite_chain: need p >= 1, q >= 2");
    if (std::gcd(p, q) != 1) throw config_error("oracle_finite_chain: p/q must be reduced");

    const double step = 2.0 * std::numbers::pi * p / q;
    const double wrap = 2.0 * std::numbers::pi * p;
    Eigen::VectorXd u(q);
    for (int n = 0; n < q; ++n) u(n) = step * n;

    auto assemble = [&](const Eigen::VectorXd& v, Eigen::VectorXd& f) {
        for (int n = 0; n < q; ++n) {
            double up = n + 1 < q ? v(n + 1) : v(0) + wrap;
            double um = n - 1 >= 0 ? v(n - 1) : v(q - 1) - wrap;
            f(n) = up + um - 2.0 * v(n) + force(v(n));
        }
    };

    Eigen::VectorXd f(q);
    for (int it = 0; it <= max_iter; ++it) {
        assemble(u, f);
        double sup = f.cwiseAbs().maxCoeff();
        if (sup <= tol) {
            FiniteChainResult r;
            r.u.assign(u.data(), u.data() + q);
            r.p = p;
            r.q = q;
            r.residual_sup = sup;
            r.iterations = it;
            return r;
        }
        if (it == max_iter || !std::isfinite(sup) || sup > 1e6)
            throw divergence_error("oracle_finite_chain: no convergence (sup residual " +
                                   std::to_string(sup) + ")");

        Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(q, q);
        for (int n = 0; n < q; ++n) {
            jac(n, n) = -2.0 + dforce(u(n));
            jac(n, (n + 1) % q) += 1.0;
            jac(n, (n - 1 + q) % q) += 1.0;
        }
        u -= jac.partialPivLu().solve(f);
    }
    throw divergence_error("oracle_finite_chain: unreachable");
}

// The pointwise force U(alpha u) of a short-range model, for the chain oracle.
inline std::function<double(double)> chain_force(const ShortRangeModel& model) {
    return [&model](double u) {
        const std::vector<double>& alpha = model.basis().alpha();
        std::vector<double> sigma(alpha.size());
        for (std::size_t i = 0; i < alpha.size(); ++i) sigma[i] = alpha[i] * u;
        return evaluate(model.shell_u(), sigma).real();
    };
}

inline std::function<double(double)> chain_force_derivative(const ShortRangeModel& model) {
    return [&model, d = derive_alpha(model.shell_u(), model.basis())](double u) {
        const std::vector<double>& alpha = model.basis().alpha();
        std::vector<double> sigma(alpha.size());
        for (std::size_t i = 0; i < alpha.size(); ++i) sigma[i] = alpha[i] * u;
        return evaluate(d, sigma).real();
    };
}

} // namespace apfk
