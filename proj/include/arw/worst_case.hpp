#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Cholesky>

#include "arw/arrowhead.hpp"
#include "arw/errors.hpp"
#include "arw/symmetric_matrix.hpp"

namespace arw {

enum class DivergenceKind { LogDet, BuresW };

inline const char* divergence_name(DivergenceKind k) {
    return k == DivergenceKind::LogDet ? "logdet" : "buresw";
}

inline DivergenceKind divergence_from_name(const std::string& name) {
    if (name == "logdet") return DivergenceKind::LogDet;
    if (name == "buresw") return DivergenceKind::BuresW;
    throw invalid_input_error("unknown divergence: " + name);
}

/// Uncertainty ball around the nominal matrix: divergence kind plus radius.
struct UncertaintySpec {
    DivergenceKind divergence = DivergenceKind::LogDet;
    double rho = 0.0;

    void validate() const {
        if (!(rho >= 0.0) || !std::isfinite(rho))
            throw invalid_input_error("UncertaintySpec: rho must be finite and >= 0");
    }
};

struct WorstCaseOptions {
    int max_iterations = 200;
};

/// Solution of max <Omega, V> over the uncertainty ball. `value` is the
/// attained objective, `omega_star` the maximizer, `gamma_star` the optimal
/// dual multiplier (+inf when the problem short-circuits at the nominal),
/// `residual` the final |d/dgamma| of the dual, and `divergence_value` the
/// divergence from the nominal spent by omega_star.
struct WorstCaseSolution {
    double value = 0.0;
    double gamma_star = std::numeric_limits<double>::infinity();
    SymmetricMatrix omega_star;
    std::vector<double> first_row_weights;
    int iterations = 0;
    double residual = 0.0;
    double divergence_value = 0.0;
};

/// Dual objective evaluated at one gamma: value and its first two
/// derivatives in gamma. Both duals are convex on their domain.
struct DualPoint {
    double value = 0.0;
    double derivative = 0.0;
    double second_derivative = 0.0;
};

namespace detail {

// Reduction of the pair (omega_hat, V) to the 2x2 block B = Q^T omega_hat Q
// and the propagated columns U = omega_hat Q. Everything the duals need.
struct ReducedNominal {
    double b_plus = 0.0, b_cross = 0.0, b_minus = 0.0;
    std::vector<double> u_plus, u_minus;
};

inline ReducedNominal reduce_nominal(const SymmetricMatrix& omega_hat, const RankTwoSpectral& v) {
    const int p = v.dim;
    ReducedNominal r;
    r.u_plus.assign(p, 0.0);
    r.u_minus.assign(p, 0.0);
    for (int i = 0; i < p; ++i) {
        double up = 0.0, um = 0.0;
        for (int j = 0; j < p; ++j) {
            up += omega_hat(i, j) * v.q_plus[j];
            um += omega_hat(i, j) * v.q_minus[j];
        }
        r.u_plus[i] = up;
        r.u_minus[i] = um;
    }
    for (int i = 0; i < p; ++i) {
        r.b_plus += v.q_plus[i] * r.u_plus[i];
        r.b_cross += v.q_plus[i] * r.u_minus[i];
        r.b_minus += v.q_minus[i] * r.u_minus[i];
    }
    return r;
}

// g(gamma) = gamma rho - gamma sum_j log(1 - mu_j / gamma), the log-det dual,
// written on the two nonzero eigenvalues mu_1 > 0 > mu_2 of
// omega_hat^{1/2} V omega_hat^{1/2}.
inline DualPoint logdet_dual_point(double gamma, double mu1, double mu2, double rho) {
    DualPoint d;
    d.value = gamma * rho;
    d.derivative = rho;
    for (double mu : {mu1, mu2}) {
        if (mu == 0.0) continue;
        const double log_term = std::log1p(-mu / gamma);
        d.value -= gamma * log_term;
        d.derivative -= log_term + mu / (gamma - mu);
        d.second_derivative += mu * mu / (gamma * (gamma - mu) * (gamma - mu));
    }
    return d;
}

// h(gamma) = gamma rho + sum_j b_j gamma lambda_j / (gamma - lambda_j), the
// Bures-Wasserstein dual, with lambda = +-s and b_j = q_j^T omega_hat q_j.
inline DualPoint bures_dual_point(double gamma, double s, double b_plus, double b_minus,
                                  double rho) {
    DualPoint d;
    d.value = gamma * rho;
    d.derivative = rho;
    const double bs[2] = {b_plus, b_minus};
    const double ls[2] = {s, -s};
    for (int j = 0; j < 2; ++j) {
        const double denom = gamma - ls[j];
        d.value += bs[j] * gamma * ls[j] / denom;
        d.derivative -= bs[j] * ls[j] * ls[j] / (denom * denom);
        d.second_derivative += 2.0 * bs[j] * ls[j] * ls[j] / (denom * denom * denom);
    }
    return d;
}

// Safeguarded Newton on the dual derivative over (gamma_min, inf). The
// derivative runs from -inf at the pole to rho > 0, so the root exists and
// is unique (the dual is strictly convex here). Newton steps that leave the
// bracket fall back to bisection.
template <typename Eval>
inline void solve_gamma(const Eval& eval, double gamma_min, double rho, int max_iterations,
                        double& gamma_out, DualPoint& point_out, int& iterations_out) {
    const double tol = 1e-10 * std::max(1.0, rho);
    double lo = gamma_min;
    double hi = 2.0 * gamma_min;
    int used = 0;
    DualPoint at_hi = eval(hi);
    while (at_hi.derivative <= 0.0) {
        lo = hi;
        hi *= 2.0;
        at_hi = eval(hi);
        if (++used > max_iterations)
            throw convergence_error("worst_case: no finite bracket for gamma (residual " +
                                    std::to_string(at_hi.derivative) + ")");
    }
    double x = hi;
    DualPoint at_x = at_hi;
    while (std::abs(at_x.derivative) > tol && hi - lo > 1e-12 * x) {
        if (++used > max_iterations)
            throw convergence_error("worst_case: gamma solve exceeded iteration cap (residual " +
                                    std::to_string(std::abs(at_x.derivative)) + ")");
        double next = x - at_x.derivative / at_x.second_derivative;
        if (!std::isfinite(next) || next <= lo || next >= hi) next = 0.5 * (lo + hi);
        at_x = eval(next);
        x = next;
        (at_x.derivative < 0.0 ? lo : hi) = x;
    }
    gamma_out = x;
    point_out = at_x;
    iterations_out = used;
}

inline void require_above_pole(double gamma, double pole, const char* who) {
    if (!(gamma > pole))
        throw out_of_domain_error(std::string(who) + ": gamma = " + std::to_string(gamma) +
                                  " not above the pole " + std::to_string(pole));
}

}  // namespace detail

/// Log-det dual objective g(gamma) = gamma rho - gamma log det(I - M/gamma),
/// M = sqrt_omega V sqrt_omega, evaluated with its derivatives. Domain:
/// gamma > lambda_max(M).
inline DualPoint dual_objective_logdet(double gamma, const SymmetricMatrix& sqrt_omega,
                                       const ArrowheadLoss& v, double rho) {
    if (sqrt_omega.dim() != v.dim())
        throw invalid_input_error("dual_objective_logdet: dimension mismatch");
    const double s = v.spectral_norm();
    if (s == 0.0) {
        detail::require_above_pole(gamma, 0.0, "dual_objective_logdet");
        return {gamma * rho, rho, 0.0};
    }
    const RankTwoSpectral q = v.spectral();
    // B = (SQ)^T (SQ) = Q^T omega_hat Q
    SymmetricMatrix omega = SymmetricMatrix::from_eigen_symmetric(
        sqrt_omega.as_eigen() * sqrt_omega.as_eigen());
    const detail::ReducedNominal r = detail::reduce_nominal(omega, q);
    const auto [mu1, mu2] = detail::indefinite_pair_eigs(r.b_plus, r.b_cross, r.b_minus, s);
    detail::require_above_pole(gamma, mu1, "dual_objective_logdet");
    return detail::logdet_dual_point(gamma, mu1, mu2, rho);
}

/// Bures-Wasserstein dual objective
/// h(gamma) = gamma (rho - tr omega_hat) + gamma^2 <(gamma I - V)^{-1}, omega_hat>,
/// evaluated with its derivatives. Domain: gamma > spectral norm of V.
inline DualPoint dual_objective_bures(double gamma, const SymmetricMatrix& omega_hat,
                                      const ArrowheadLoss& v, double rho) {
    if (omega_hat.dim() != v.dim())
        throw invalid_input_error("dual_objective_bures: dimension mismatch");
    const double s = v.spectral_norm();
    detail::require_above_pole(gamma, s, "dual_objective_bures");
    if (s == 0.0) return {gamma * rho, rho, 0.0};
    const detail::ReducedNominal r = detail::reduce_nominal(omega_hat, v.spectral());
    return detail::bures_dual_point(gamma, s, r.b_plus, r.b_minus, rho);
}

namespace detail {

inline WorstCaseSolution worst_case_impl(const SymmetricMatrix& omega_hat,
                                         const RankTwoSpectral& v, const UncertaintySpec& spec,
                                         const WorstCaseOptions& opts, bool pd_checked) {
    spec.validate();
    const int p = v.dim;
    if (omega_hat.dim() != p) throw invalid_input_error("worst_case: dimension mismatch");
    if (spec.divergence == DivergenceKind::LogDet && !pd_checked) {
        Eigen::LLT<Eigen::MatrixXd> llt(omega_hat.as_eigen());
        if (llt.info() != Eigen::Success)
            throw not_psd_error(
                "worst_case: LogDet ball needs a positive definite nominal matrix");
    }

    const ReducedNominal r = reduce_nominal(omega_hat, v);
    const double s = v.s;
    const double nominal_value = s * (r.b_plus - r.b_minus);  // <omega_hat, V>

    WorstCaseSolution sol;
    sol.omega_star = omega_hat;
    sol.first_row_weights.assign(p - 1, 0.0);

    if (spec.rho == 0.0 || s == 0.0) {
        sol.value = nominal_value;
        for (int i = 1; i < p; ++i) sol.first_row_weights[i - 1] = omega_hat(0, i);
        return sol;
    }

    double gamma = 0.0;
    DualPoint at;
    int iterations = 0;
    if (spec.divergence == DivergenceKind::LogDet) {
        const auto [mu1, mu2] = indefinite_pair_eigs(r.b_plus, r.b_cross, r.b_minus, s);
        solve_gamma([&](double g) { return logdet_dual_point(g, mu1, mu2, spec.rho); }, mu1,
                    spec.rho, opts.max_iterations, gamma, at, iterations);
        // Omega* = omega_hat - U C^{-1} U^T, U = omega_hat Q,
        // C = Q^T omega_hat Q - gamma Lambda^{-1}
        const double c00 = r.b_plus - gamma / s;
        const double c11 = r.b_minus + gamma / s;
        const double det_c = c00 * c11 - r.b_cross * r.b_cross;
        if (det_c == 0.0 || !std::isfinite(det_c))
            throw internal_consistency_error("worst_case: singular 2x2 core");
        const double i00 = c11 / det_c, i01 = -r.b_cross / det_c, i11 = c00 / det_c;
        for (int i = 0; i < p; ++i) {
            const double ti = i00 * r.u_plus[i] + i01 * r.u_minus[i];
            const double si = i01 * r.u_plus[i] + i11 * r.u_minus[i];
            for (int j = i; j < p; ++j)
                sol.omega_star.set(i, j,
                                   omega_hat(i, j) - ti * r.u_plus[j] - si * r.u_minus[j]);
        }
    } else {
        solve_gamma([&](double g) { return bures_dual_point(g, s, r.b_plus, r.b_minus, spec.rho); },
                    s, spec.rho, opts.max_iterations, gamma, at, iterations);
        // Omega* = gamma^2 R omega_hat R with R = (gamma I - V)^{-1}
        //        = omega_hat + gamma (U D Q^T + Q D U^T) + gamma^2 Q D B D Q^T
        const double a_plus = s / (gamma * (gamma - s));
        const double a_minus = -s / (gamma * (gamma + s));
        const double g2 = gamma * gamma;
        const double m00 = g2 * a_plus * a_plus * r.b_plus;
        const double m01 = g2 * a_plus * a_minus * r.b_cross;
        const double m11 = g2 * a_minus * a_minus * r.b_minus;
        for (int i = 0; i < p; ++i) {
            const double qp = v.q_plus[i], qm = v.q_minus[i];
            for (int j = i; j < p; ++j) {
                const double cross = gamma * (a_plus * (r.u_plus[i] * v.q_plus[j] +
                                                        v.q_plus[i] * r.u_plus[j]) +
                                              a_minus * (r.u_minus[i] * v.q_minus[j] +
                                                         v.q_minus[i] * r.u_minus[j]));
                const double outer = m00 * qp * v.q_plus[j] +
                                     m01 * (qp * v.q_minus[j] + qm * v.q_plus[j]) +
                                     m11 * qm * v.q_minus[j];
                sol.omega_star.set(i, j, omega_hat(i, j) + cross + outer);
            }
        }
    }

    sol.gamma_star = gamma;
    sol.iterations = iterations;
    sol.residual = std::abs(at.derivative);
    // Envelope identities at the solved gamma: the divergence spent equals
    // rho - f'(gamma) and the attained objective equals f - gamma f'.
    sol.divergence_value = std::max(spec.rho - at.derivative, 0.0);
    sol.value = at.value - gamma * at.derivative;
    for (int i = 1; i < p; ++i) sol.first_row_weights[i - 1] = sol.omega_star(0, i);

    // Cheap consistency checks; the O(p^3) certificates live in the tests.
    const double scale = std::max(1.0, sol.omega_star.max_abs());
    if (sol.omega_star.min_entry() < -1e-8 * scale)
        throw internal_consistency_error("worst_case: omega_star has a negative entry " +
                                         std::to_string(sol.omega_star.min_entry()));
    double t_plus = 0.0, t_minus = 0.0;
    for (int i = 0; i < p; ++i) {
        double row_p = 0.0, row_m = 0.0;
        for (int j = 0; j < p; ++j) {
            row_p += sol.omega_star(i, j) * v.q_plus[j];
            row_m += sol.omega_star(i, j) * v.q_minus[j];
        }
        t_plus += v.q_plus[i] * row_p;
        t_minus += v.q_minus[i] * row_m;
    }
    const double attained = s * (t_plus - t_minus);  // <omega_star, V>
    if (std::abs(sol.value - attained) > 1e-8 * (1.0 + std::abs(sol.value)))
        throw internal_consistency_error("worst_case: dual value " + std::to_string(sol.value) +
                                         " does not match <omega_star, V> = " +
                                         std::to_string(attained));
    if (sol.value < nominal_value - 1e-8 * (1.0 + std::abs(nominal_value)))
        throw internal_consistency_error("worst_case: value below the nominal objective");
    return sol;
}

}  // namespace detail

/// Worst-case reweighted objective max <Omega, V> over the divergence ball,
/// solved through the univariate dual. rho = 0 and V = 0 return the nominal
/// matrix directly with gamma_star = +inf.
inline WorstCaseSolution worst_case(const SymmetricMatrix& omega_hat, const ArrowheadLoss& v,
                                    const UncertaintySpec& spec,
                                    const WorstCaseOptions& opts = {}) {
    return detail::worst_case_impl(omega_hat, v.spectral(), spec, opts, false);
}

/// Same solve for a loss matrix given in rank-two spectral form (e.g. a
/// symmetric permutation of an arrowhead matrix).
inline WorstCaseSolution worst_case_spectral(const SymmetricMatrix& omega_hat,
                                             const RankTwoSpectral& v,
                                             const UncertaintySpec& spec,
                                             const WorstCaseOptions& opts = {}) {
    return detail::worst_case_impl(omega_hat, v, spec, opts, false);
}

/// Danskin gradient of the worst-case objective in the loss parameters:
/// grad F = 2 sum_i omega_star[0, i] * grad l_i. `loss_gradients` holds one
/// row per sample.
inline std::vector<double> robust_gradient(const WorstCaseSolution& sol,
                                           const std::vector<std::vector<double>>& loss_gradients) {
    if (loss_gradients.size() != sol.first_row_weights.size())
        throw invalid_input_error("robust_gradient: gradient count mismatch");
    if (loss_gradients.empty()) throw invalid_input_error("robust_gradient: no gradients");
    const size_t k = loss_gradients.front().size();
    std::vector<double> g(k, 0.0);
    for (size_t i = 0; i < loss_gradients.size(); ++i) {
        if (loss_gradients[i].size() != k)
            throw invalid_input_error("robust_gradient: ragged gradient rows");
        for (size_t j = 0; j < k; ++j)
            g[j] += 2.0 * sol.first_row_weights[i] * loss_gradients[i][j];
    }
    return g;
}

}  // namespace arw
