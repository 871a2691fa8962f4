#pragma once

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "arw/errors.hpp"
#include "arw/symmetric_matrix.hpp"

namespace arw {

/// Log-determinant divergence
///   D(A, B) = Tr(A B^{-1}) - log det(A B^{-1}) - p.
/// Asymmetric; both arguments must be positive definite.
inline double logdet_divergence(const SymmetricMatrix& omega1, const SymmetricMatrix& omega2) {
    if (omega1.dim() != omega2.dim())
        throw invalid_input_error("logdet_divergence: dimension mismatch");
    Eigen::LLT<Eigen::MatrixXd> llt2(omega2.as_eigen());
    if (llt2.info() != Eigen::Success)
        throw not_psd_error("logdet_divergence: second argument not positive definite");
    const double tr = llt2.solve(omega1.as_eigen()).trace();
    const double value = tr - (logdet(omega1) - logdet(omega2)) - omega1.dim();
    return std::max(value, 0.0);
}

/// Squared Bures-Wasserstein distance
///   W(A, B) = Tr A + Tr B - 2 Tr (B^{1/2} A B^{1/2})^{1/2}.
/// Symmetric in its arguments; defined for PSD matrices.
inline double bures_divergence(const SymmetricMatrix& omega1, const SymmetricMatrix& omega2) {
    if (omega1.dim() != omega2.dim())
        throw invalid_input_error("bures_divergence: dimension mismatch");
    const SymmetricMatrix root = psd_sqrt(omega2);
    const Eigen::MatrixXd inner_m =
        root.as_eigen() * omega1.as_eigen() * root.as_eigen();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(inner_m, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success)
        throw convergence_error("bures_divergence: symmetric eigensolver failed");
    const double lam_max = es.eigenvalues().maxCoeff();
    if (es.eigenvalues().minCoeff() < -1e-10 * std::max(1.0, lam_max))
        throw not_psd_error("bures_divergence: first argument not PSD");
    double tr_root = 0.0;
    for (int i = 0; i < omega1.dim(); ++i)
        tr_root += std::sqrt(std::max(es.eigenvalues()(i), 0.0));
    return std::max(omega1.trace() + omega2.trace() - 2.0 * tr_root, 0.0);
}

}  // namespace arw
