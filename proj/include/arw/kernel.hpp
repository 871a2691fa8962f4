#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Cholesky>

#include "arw/errors.hpp"
#include "arw/symmetric_matrix.hpp"

namespace arw {

enum class KernelFamily {
    Gaussian,            // exp(-||z - z'||^2 / h^2)
    Laplacian,           // exp(-||z - z'|| / h)
    Cauchy,              // 1 / (1 + ||z - z'||^2 / h^2)
    RationalQuadratic,   // (1 + ||z - z'||^2 / (2 a h^2))^-a, a = 2
    MahalanobisGaussian  // exp(-(z - z')^T M (z - z') / h^2)
};

inline const char* kernel_family_name(KernelFamily f) {
    switch (f) {
        case KernelFamily::Gaussian: return "gaussian";
        case KernelFamily::Laplacian: return "laplacian";
        case KernelFamily::Cauchy: return "cauchy";
        case KernelFamily::RationalQuadratic: return "rational-quadratic";
        case KernelFamily::MahalanobisGaussian: return "mahalanobis-gaussian";
    }
    return "?";
}

inline KernelFamily kernel_family_from_name(const std::string& name) {
    for (KernelFamily f : {KernelFamily::Gaussian, KernelFamily::Laplacian, KernelFamily::Cauchy,
                           KernelFamily::RationalQuadratic, KernelFamily::MahalanobisGaussian})
        if (name == kernel_family_name(f)) return f;
    throw invalid_input_error("unknown kernel family: " + name);
}

/// Kernel choice. `bandwidth2` is the squared bandwidth h^2 (the quantity the
/// benchmark grid sweeps). `metric` is only read by MahalanobisGaussian and
/// must be SPD of the feature dimension.
struct KernelSpec {
    KernelFamily family = KernelFamily::Gaussian;
    double bandwidth2 = 1.0;
    std::optional<SymmetricMatrix> metric;

    void validate(int feature_dim) const {
        if (!(bandwidth2 > 0.0) || !std::isfinite(bandwidth2))
            throw invalid_input_error("KernelSpec: bandwidth2 must be positive and finite");
        if (family == KernelFamily::MahalanobisGaussian) {
            if (!metric) throw invalid_input_error("KernelSpec: MahalanobisGaussian needs a metric");
            if (metric->dim() != feature_dim)
                throw invalid_input_error("KernelSpec: metric dimension mismatch");
        }
    }
};

/// Evaluates K(z, z') for the chosen family. All families are 1 at z = z'
/// and take values in (0, 1].
inline double eval_kernel(const KernelSpec& spec, std::span<const double> z,
                          std::span<const double> z_prime) {
    if (z.size() != z_prime.size())
        throw invalid_input_error("eval_kernel: point dimension mismatch");
    spec.validate(static_cast<int>(z.size()));
    const double h2 = spec.bandwidth2;
    double d2 = 0.0;
    if (spec.family == KernelFamily::MahalanobisGaussian) {
        const SymmetricMatrix& m = *spec.metric;
        for (size_t i = 0; i < z.size(); ++i) {
            const double di = z[i] - z_prime[i];
            for (size_t j = 0; j < z.size(); ++j)
                d2 += di * m(static_cast<int>(i), static_cast<int>(j)) * (z[j] - z_prime[j]);
        }
        if (d2 < 0.0)
            throw not_psd_error("eval_kernel: metric produced a negative squared distance");
    } else {
        for (size_t i = 0; i < z.size(); ++i) {
            const double di = z[i] - z_prime[i];
            d2 += di * di;
        }
    }
    switch (spec.family) {
        case KernelFamily::Gaussian:
        case KernelFamily::MahalanobisGaussian:
            return std::exp(-d2 / h2);
        case KernelFamily::Laplacian:
            return std::exp(-std::sqrt(d2 / h2));
        case KernelFamily::Cauchy:
            return 1.0 / (1.0 + d2 / h2);
        case KernelFamily::RationalQuadratic: {
            const double alpha = 2.0;
            const double base = 1.0 + d2 / (2.0 * alpha * h2);
            return 1.0 / (base * base);
        }
    }
    throw internal_consistency_error("eval_kernel: unreachable family");
}

/// Kernel weights of the sample points relative to the query point.
inline std::vector<double> kernel_weights(const KernelSpec& spec, std::span<const double> z0,
                                          const std::vector<std::vector<double>>& points) {
    std::vector<double> w;
    w.reserve(points.size());
    for (const auto& p : points) w.push_back(eval_kernel(spec, z0, p));
    return w;
}

/// Nominal weighting matrix for one query point, plus bookkeeping about how
/// it was produced. Row and column 0 belong to the query; `weights` mirrors
/// row 0 entries 1..N.
struct NominalWeights {
    SymmetricMatrix omega_hat;
    std::vector<double> weights;
    std::vector<int> kept_indices;   // surviving point -> index in the caller's list
    int duplicates_collapsed = 0;
    double jitter_applied = 0.0;
};

/// Kernel Gram construction of the nominal matrix over (z0, points...).
/// Exact duplicate points are collapsed to their first occurrence (reported
/// via kept_indices / duplicates_collapsed). If the Gram fails Cholesky,
/// jitter * I is added once; the default jitter is 1e-10 * trace / dim.
/// Still-indefinite Grams raise degenerate_gram_error.
inline NominalWeights gram_nominal(const KernelSpec& spec, std::span<const double> z0,
                                   const std::vector<std::vector<double>>& points,
                                   std::optional<double> jitter = std::nullopt) {
    spec.validate(static_cast<int>(z0.size()));
    for (const auto& p : points)
        if (p.size() != z0.size())
            throw invalid_input_error("gram_nominal: point dimension mismatch");

    NominalWeights out;
    std::vector<const std::vector<double>*> kept;
    for (int i = 0; i < static_cast<int>(points.size()); ++i) {
        bool dup = false;
        for (int j : out.kept_indices)
            if (points[i] == points[j]) {
                dup = true;
                break;
            }
        if (dup) {
            ++out.duplicates_collapsed;
        } else {
            out.kept_indices.push_back(i);
            kept.push_back(&points[i]);
        }
    }

    const int n = static_cast<int>(kept.size());
    const int p = n + 1;
    SymmetricMatrix g(p);
    g.set(0, 0, 1.0);
    for (int i = 0; i < n; ++i) {
        g.set(0, i + 1, eval_kernel(spec, z0, *kept[i]));
        g.set(i + 1, i + 1, 1.0);
        for (int j = 0; j < i; ++j)
            g.set(j + 1, i + 1, eval_kernel(spec, *kept[i], *kept[j]));
    }

    Eigen::LLT<Eigen::MatrixXd> llt(g.as_eigen());
    if (llt.info() != Eigen::Success) {
        const double eps = jitter.value_or(1e-10 * g.trace() / p);
        for (int i = 0; i < p; ++i) g.set(i, i, g(i, i) + eps);
        out.jitter_applied = eps;
        llt.compute(g.as_eigen());
        if (llt.info() != Eigen::Success) {
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g.as_eigen(), Eigen::EigenvaluesOnly);
            throw degenerate_gram_error(
                "gram_nominal: Gram matrix indefinite even after jitter; min eigenvalue " +
                std::to_string(es.eigenvalues().minCoeff()));
        }
    }

    out.weights.resize(n);
    for (int i = 0; i < n; ++i) out.weights[i] = g(0, i + 1);
    out.omega_hat = std::move(g);
    return out;
}

/// Arrowhead construction of the nominal matrix: diagonal plus the weights in
/// row/column 0. Each diagonal entry is `slack` times the smallest value
/// keeping the leading minors positive, floored at slack * max(1, max weight)
/// where the minimal admissible value degenerates to zero. The minor
/// recursion is carried as the ratio r_k = (d_1...d_{k-1}) / minor_k, which
/// stays representable where the raw minors would overflow.
inline NominalWeights arrowhead_nominal(const std::vector<double>& weights, double slack = 1.5) {
    if (!(slack > 1.0) || !std::isfinite(slack))
        throw invalid_input_error("arrowhead_nominal: slack must be > 1");
    double wmax = 0.0;
    for (double w : weights) {
        if (!std::isfinite(w)) throw invalid_input_error("arrowhead_nominal: non-finite weight");
        if (w < 0.0) throw invalid_input_error("arrowhead_nominal: negative weight");
        wmax = std::max(wmax, w);
    }
    const int n = static_cast<int>(weights.size());
    const double eps0 = std::max(1.0, wmax);
    SymmetricMatrix m(n + 1);
    const double d0 = slack * eps0;
    m.set(0, 0, d0);
    double r = 1.0 / d0;
    for (int k = 0; k < n; ++k) {
        const double w = weights[k];
        m.set(0, k + 1, w);
        const double minimal = r * w * w;
        const double d = slack * (minimal > 0.0 ? minimal : eps0);
        m.set(k + 1, k + 1, d);
        const double denom = d - minimal;
        if (!(denom > 0.0) || !std::isfinite(r * d / denom))
            throw internal_consistency_error("arrowhead_nominal: minor recursion degenerated");
        r = r * d / denom;
    }
    NominalWeights out;
    out.omega_hat = std::move(m);
    out.weights = weights;
    out.kept_indices.resize(n);
    for (int i = 0; i < n; ++i) out.kept_indices[i] = i;
    return out;
}

}  // namespace arw
