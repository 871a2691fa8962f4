#pragma once

#include <cmath>
#include <limits>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "arw/errors.hpp"
#include "arw/estimators.hpp"
#include "arw/kernel.hpp"
#include "arw/worst_case.hpp"

namespace arw {

enum class StepRule { Backtracking, Fixed };

/// Configuration of the outer descent on beta.
struct OuterConfig {
    int max_iterations = 500;
    double gradient_tolerance = 1e-8;  // relative: ||grad|| <= tol * (1 + |F|)
    StepRule step_rule = StepRule::Backtracking;
    double fixed_step = 1e-2;
    double shrink = 0.5;
    double sufficient_decrease = 1e-4;
    std::optional<std::vector<double>> init;  // overrides the nominal fit
};

struct IterationRecord {
    int iteration = 0;
    double objective = 0.0;
    double gradient_norm = 0.0;
    double step = 0.0;
    int inner_iterations = 0;
};

struct OuterTrace {
    std::vector<IterationRecord> iterations;
    bool converged = false;
};

/// A differentiable family of non-negative convex per-sample losses l_i(beta)
/// together with a nominal (rho = 0) fit used as the default initializer.
struct LossFamily {
    int parameter_dim = 0;
    int sample_count = 0;
    std::function<double(std::span<const double>, int)> loss;
    std::function<std::vector<double>(std::span<const double>, int)> loss_gradient;
    std::function<std::vector<double>()> nominal_fit;
};

struct RobustFit {
    std::vector<double> beta;
    double objective = 0.0;
    OuterTrace trace;
    WorstCaseSolution inner;  // worst case at the returned beta
};

struct RobustScalarFit {
    double beta = 0.0;
    double objective = 0.0;
    OuterTrace trace;
    WorstCaseSolution inner;
};

/// Squared losses (beta - y_i)^2 of a constant fit; nominal fit is the
/// weighted mean under the given weights.
inline LossFamily squared_loss_family(const LocalSample& sample,
                                      const std::vector<double>& nominal_weights) {
    sample.validate();
    if (nominal_weights.size() != sample.responses.size())
        throw invalid_input_error("squared_loss_family: weight count mismatch");
    LossFamily f;
    f.parameter_dim = 1;
    f.sample_count = sample.count();
    const std::vector<double> y = sample.responses;
    f.loss = [y](std::span<const double> beta, int i) {
        const double r = beta[0] - y[i];
        return r * r;
    };
    f.loss_gradient = [y](std::span<const double> beta, int i) {
        return std::vector<double>{2.0 * (beta[0] - y[i])};
    };
    f.nominal_fit = [y, w = nominal_weights]() {
        double sw = 0.0, swy = 0.0;
        for (size_t i = 0; i < y.size(); ++i) {
            sw += w[i];
            swy += w[i] * y[i];
        }
        if (sw > 0.0) return std::vector<double>{swy / sw};
        double m = 0.0;
        for (double v : y) m += v;
        return std::vector<double>{m / static_cast<double>(y.size())};
    };
    return f;
}

/// Local linear losses (b0 + b' (z_i - z0) - y_i)^2 on the centered design;
/// nominal fit is the weighted least squares solution.
inline LossFamily llr_loss_family(const LocalSample& sample,
                                  const std::vector<double>& nominal_weights) {
    sample.validate();
    if (nominal_weights.size() != sample.responses.size())
        throw invalid_input_error("llr_loss_family: weight count mismatch");
    const int d = sample.feature_dim();
    std::vector<std::vector<double>> centered(sample.count());
    for (int i = 0; i < sample.count(); ++i) {
        centered[i].resize(d);
        for (int j = 0; j < d; ++j) centered[i][j] = sample.points[i][j] - sample.center[j];
    }
    LossFamily f;
    f.parameter_dim = d + 1;
    f.sample_count = sample.count();
    const std::vector<double> y = sample.responses;
    auto residual = [centered, y, d](std::span<const double> beta, int i) {
        double r = beta[0] - y[i];
        for (int j = 0; j < d; ++j) r += beta[j + 1] * centered[i][j];
        return r;
    };
    f.loss = [residual](std::span<const double> beta, int i) {
        const double r = residual(beta, i);
        return r * r;
    };
    f.loss_gradient = [residual, centered, d](std::span<const double> beta, int i) {
        const double r = residual(beta, i);
        std::vector<double> g(d + 1);
        g[0] = 2.0 * r;
        for (int j = 0; j < d; ++j) g[j + 1] = 2.0 * r * centered[i][j];
        return g;
    };
    f.nominal_fit = [sample, w = nominal_weights]() {
        LocalSample weighted = sample;
        weighted.weights = w;
        const LlrFit fit = llr_estimate(weighted);
        std::vector<double> beta{fit.coefficients.intercept};
        beta.insert(beta.end(), fit.coefficients.slope.begin(), fit.coefficients.slope.end());
        return beta;
    };
    return f;
}

namespace detail {

struct ObjectiveEval {
    double value = 0.0;
    WorstCaseSolution sol;
};

/// Projected-free descent of beta |-> worst_case(V(beta)). The objective is
/// convex (max of linear images of convex losses), its gradient comes from
/// Danskin's rule, and Armijo backtracking keeps accepted steps monotone.
inline RobustFit minimize_worst_case(const LossFamily& family, const SymmetricMatrix& omega_hat,
                                     const UncertaintySpec& spec, const OuterConfig& cfg) {
    spec.validate();
    if (family.sample_count < 1 || omega_hat.dim() != family.sample_count + 1)
        throw invalid_input_error("robust fit: nominal matrix does not match the sample count");
    if (cfg.max_iterations < 1 || !(cfg.shrink > 0.0 && cfg.shrink < 1.0))
        throw invalid_input_error("robust fit: bad OuterConfig");
    if (spec.divergence == DivergenceKind::LogDet) {
        Eigen::LLT<Eigen::MatrixXd> llt(omega_hat.as_eigen());
        if (llt.info() != Eigen::Success)
            throw not_psd_error("robust fit: LogDet ball needs a positive definite nominal");
    }

    std::vector<double> beta = cfg.init ? *cfg.init : family.nominal_fit();
    if (static_cast<int>(beta.size()) != family.parameter_dim)
        throw invalid_input_error("robust fit: init has wrong parameter dimension");

    auto evaluate = [&](const std::vector<double>& b) {
        std::vector<double> losses(family.sample_count);
        for (int i = 0; i < family.sample_count; ++i) losses[i] = family.loss(b, i);
        ObjectiveEval e;
        e.sol = worst_case_impl(omega_hat, ArrowheadLoss::from_losses(losses).spectral(), spec,
                                WorstCaseOptions{}, /*pd_checked=*/true);
        e.value = e.sol.value;
        return e;
    };

    RobustFit fit;
    ObjectiveEval cur = evaluate(beta);
    double step = 0.0;
    std::vector<double> prev_beta, prev_g;
    for (int iter = 0; iter < cfg.max_iterations; ++iter) {
        std::vector<std::vector<double>> grads(family.sample_count);
        for (int i = 0; i < family.sample_count; ++i) grads[i] = family.loss_gradient(beta, i);
        const std::vector<double> g = robust_gradient(cur.sol, grads);
        double gnorm2 = 0.0;
        for (double v : g) gnorm2 += v * v;
        const double gnorm = std::sqrt(gnorm2);
        fit.trace.iterations.push_back({iter, cur.value, gnorm, step, cur.sol.iterations});
        if (gnorm <= cfg.gradient_tolerance * (1.0 + std::abs(cur.value))) {
            fit.trace.converged = true;
            break;
        }

        if (cfg.step_rule == StepRule::Fixed) {
            step = cfg.fixed_step;
            for (size_t j = 0; j < beta.size(); ++j) beta[j] -= step * g[j];
            cur = evaluate(beta);
            continue;
        }

        // First trial step: secant (Barzilai-Borwein) estimate of 1/L once
        // history exists; it damps the step below the 2/L oscillation
        // boundary that a pure doubling warm start can land on. Fallbacks:
        // twice the last accepted step, then F/||g||^2.
        double alpha = 0.0;
        if (!prev_beta.empty()) {
            double num = 0.0, den = 0.0;
            for (size_t j = 0; j < beta.size(); ++j) {
                const double db = beta[j] - prev_beta[j];
                const double dg = g[j] - prev_g[j];
                num += db * dg;
                den += dg * dg;
            }
            if (den > 0.0) alpha = num / den;
        }
        if (!(alpha > 0.0) || !std::isfinite(alpha))
            alpha = step > 0.0 ? 2.0 * step : cur.value / std::max(gnorm2, 1e-300);
        if (!(alpha > 0.0) || !std::isfinite(alpha)) alpha = 1.0;
        prev_beta = beta;
        prev_g = g;

        bool accepted = false;
        std::vector<double> trial(beta.size());
        for (int bt = 0; bt < 60; ++bt) {
            bool moved = false;
            for (size_t j = 0; j < beta.size(); ++j) {
                trial[j] = beta[j] - alpha * g[j];
                moved = moved || trial[j] != beta[j];
            }
            if (!moved) break;  // the step is below double resolution of beta
            ObjectiveEval next = evaluate(trial);
            const double f_ulps =
                4.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(cur.value));
            bool take = next.value <= cur.value - cfg.sufficient_decrease * alpha * gnorm2;
            if (!take && next.value <= cur.value + f_ulps) {
                // Near the minimum the decrease falls under the last ulp of F
                // while the gradient is still informative: accept a step whose
                // F is indistinguishable at double precision if it at least
                // halves the gradient norm.
                std::vector<std::vector<double>> tg(family.sample_count);
                for (int i = 0; i < family.sample_count; ++i)
                    tg[i] = family.loss_gradient(trial, i);
                double tn2 = 0.0;
                for (double v : robust_gradient(next.sol, tg)) tn2 += v * v;
                take = tn2 <= 0.25 * gnorm2;
            }
            if (take) {
                beta = trial;
                cur = next;
                step = alpha;
                accepted = true;
                break;
            }
            alpha *= cfg.shrink;
        }
        if (!accepted) break;  // stalled: return the best iterate, not converged
    }

    fit.beta = beta;
    fit.objective = cur.value;
    fit.inner = cur.sol;
    return fit;
}

}  // namespace detail

/// Robust counterpart of the NW estimate: minimizes the worst-case
/// reweighted squared loss of a constant fit over the uncertainty ball.
inline RobustScalarFit robust_nw(const LocalSample& sample, const NominalWeights& nominal,
                                 const UncertaintySpec& spec, const OuterConfig& cfg = {}) {
    const LossFamily family = squared_loss_family(sample, nominal.weights);
    RobustFit fit = detail::minimize_worst_case(family, nominal.omega_hat, spec, cfg);
    RobustScalarFit out;
    out.beta = fit.beta[0];
    out.objective = fit.objective;
    out.trace = std::move(fit.trace);
    out.inner = std::move(fit.inner);
    return out;
}

/// Robust fit of an arbitrary differentiable loss family (e.g. the local
/// linear losses from llr_loss_family).
inline RobustFit robust_estimate_generic(const LossFamily& family, const NominalWeights& nominal,
                                         const UncertaintySpec& spec,
                                         const OuterConfig& cfg = {}) {
    if (static_cast<int>(nominal.weights.size()) != family.sample_count)
        throw invalid_input_error("robust_estimate_generic: nominal weight count mismatch");
    return detail::minimize_worst_case(family, nominal.omega_hat, spec, cfg);
}

}  // namespace arw
