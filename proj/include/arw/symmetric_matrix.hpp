#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "arw/errors.hpp"

namespace arw {

/// Dense real symmetric matrix with value semantics. Symmetry is enforced
/// structurally: every write lands on both (i, j) and (j, i).
class SymmetricMatrix {
public:
    SymmetricMatrix() = default;

    explicit SymmetricMatrix(int dim) : dim_(dim), data_(static_cast<size_t>(dim) * dim, 0.0) {
        if (dim < 1) throw invalid_input_error("SymmetricMatrix: dim must be >= 1");
    }

    static SymmetricMatrix identity(int dim) {
        SymmetricMatrix m(dim);
        for (int i = 0; i < dim; ++i) m.data_[static_cast<size_t>(i) * dim + i] = 1.0;
        return m;
    }

    /// Builds from full row data; rejects non-finite entries and asymmetry
    /// beyond `sym_tol` (absolute, relative to the largest magnitude entry).
    static SymmetricMatrix from_rows(const std::vector<std::vector<double>>& rows,
                                     double sym_tol = 1e-12) {
        const int p = static_cast<int>(rows.size());
        SymmetricMatrix m(p);
        double scale = 0.0;
        for (int i = 0; i < p; ++i) {
            if (static_cast<int>(rows[i].size()) != p)
                throw invalid_input_error("SymmetricMatrix::from_rows: ragged rows");
            for (int j = 0; j < p; ++j) {
                if (!std::isfinite(rows[i][j]))
                    throw invalid_input_error("SymmetricMatrix::from_rows: non-finite entry");
                scale = std::max(scale, std::abs(rows[i][j]));
            }
        }
        for (int i = 0; i < p; ++i)
            for (int j = i; j < p; ++j) {
                if (std::abs(rows[i][j] - rows[j][i]) > sym_tol * std::max(1.0, scale))
                    throw invalid_input_error("SymmetricMatrix::from_rows: matrix not symmetric");
                const double v = 0.5 * (rows[i][j] + rows[j][i]);
                m.data_[static_cast<size_t>(i) * p + j] = v;
                m.data_[static_cast<size_t>(j) * p + i] = v;
            }
        return m;
    }

    int dim() const { return dim_; }

    double operator()(int i, int j) const {
        assert(i >= 0 && i < dim_ && j >= 0 && j < dim_);
        return data_[static_cast<size_t>(i) * dim_ + j];
    }

    /// Mirrored write: sets both (i, j) and (j, i).
    void set(int i, int j, double value) {
        assert(i >= 0 && i < dim_ && j >= 0 && j < dim_);
        data_[static_cast<size_t>(i) * dim_ + j] = value;
        data_[static_cast<size_t>(j) * dim_ + i] = value;
    }

    double trace() const {
        double t = 0.0;
        for (int i = 0; i < dim_; ++i) t += data_[static_cast<size_t>(i) * dim_ + i];
        return t;
    }

    double min_entry() const {
        return *std::min_element(data_.begin(), data_.end());
    }

    double max_abs() const {
        double m = 0.0;
        for (double v : data_) m = std::max(m, std::abs(v));
        return m;
    }

    const double* data() const { return data_.data(); }
    double* data() { return data_.data(); }

    Eigen::Map<const Eigen::MatrixXd> as_eigen() const {
        // Symmetric, so the row-major buffer reads correctly as column-major.
        return Eigen::Map<const Eigen::MatrixXd>(data_.data(), dim_, dim_);
    }

    static SymmetricMatrix from_eigen_symmetric(const Eigen::MatrixXd& e) {
        SymmetricMatrix m(static_cast<int>(e.rows()));
        for (int i = 0; i < m.dim_; ++i)
            for (int j = 0; j <= i; ++j) {
                const double v = 0.5 * (e(i, j) + e(j, i));
                m.data_[static_cast<size_t>(i) * m.dim_ + j] = v;
                m.data_[static_cast<size_t>(j) * m.dim_ + i] = v;
            }
        return m;
    }

private:
    int dim_ = 0;
    std::vector<double> data_;
};

/// Frobenius inner product <A, B> = sum_ij A_ij B_ij.
inline double inner(const SymmetricMatrix& a, const SymmetricMatrix& b) {
    if (a.dim() != b.dim()) throw invalid_input_error("inner: dimension mismatch");
    const size_t n = static_cast<size_t>(a.dim()) * a.dim();
    double s = 0.0;
    for (size_t k = 0; k < n; ++k) s += a.data()[k] * b.data()[k];
    return s;
}

/// Eigendecomposition of a symmetric matrix: eigenvalues in descending order,
/// eigenvectors as orthonormal columns aligned with them.
struct SpectralFactorization {
    int dim = 0;
    std::vector<double> eigenvalues;   // descending
    std::vector<double> eigenvectors;  // column-major, column j pairs with eigenvalues[j]

    double vector(int row, int col) const {
        return eigenvectors[static_cast<size_t>(col) * dim + row];
    }

    SymmetricMatrix reconstruct() const {
        Eigen::Map<const Eigen::MatrixXd> u(eigenvectors.data(), dim, dim);
        Eigen::Map<const Eigen::VectorXd> w(eigenvalues.data(), dim);
        return SymmetricMatrix::from_eigen_symmetric(u * w.asDiagonal() * u.transpose());
    }
};

inline SpectralFactorization spectral(const SymmetricMatrix& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m.as_eigen());
    if (solver.info() != Eigen::Success)
        throw convergence_error("spectral: symmetric eigensolver failed");
    const int p = m.dim();
    SpectralFactorization f;
    f.dim = p;
    f.eigenvalues.resize(p);
    f.eigenvectors.resize(static_cast<size_t>(p) * p);
    // Eigen returns ascending order; flip to descending.
    for (int j = 0; j < p; ++j) {
        const int src = p - 1 - j;
        f.eigenvalues[j] = solver.eigenvalues()(src);
        for (int i = 0; i < p; ++i)
            f.eigenvectors[static_cast<size_t>(j) * p + i] = solver.eigenvectors()(i, src);
    }
    return f;
}

/// Symmetric PSD square root. Eigenvalues in [-tol, 0) with
/// tol = 1e-10 * max(1, lambda_max) are clamped to zero; anything below that
/// is treated as genuinely indefinite.
inline SymmetricMatrix psd_sqrt(const SymmetricMatrix& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m.as_eigen());
    if (solver.info() != Eigen::Success)
        throw convergence_error("psd_sqrt: symmetric eigensolver failed");
    const double lam_max = solver.eigenvalues().maxCoeff();
    const double lam_min = solver.eigenvalues().minCoeff();
    const double tol = 1e-10 * std::max(1.0, lam_max);
    if (lam_min < -tol)
        throw not_psd_error("psd_sqrt: matrix has eigenvalue " + std::to_string(lam_min) +
                            " below -" + std::to_string(tol));
    Eigen::VectorXd roots = solver.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return SymmetricMatrix::from_eigen_symmetric(solver.eigenvectors() * roots.asDiagonal() *
                                                 solver.eigenvectors().transpose());
}

/// log det of a positive definite matrix via Cholesky:
/// 2 * sum_i log L_ii. Throws not_psd_error if the factorization fails.
inline double logdet(const SymmetricMatrix& m) {
    for (size_t k = 0, n = static_cast<size_t>(m.dim()) * m.dim(); k < n; ++k)
        if (!std::isfinite(m.data()[k]))
            throw invalid_input_error("logdet: non-finite entry");
    Eigen::LLT<Eigen::MatrixXd> llt(m.as_eigen());
    if (llt.info() != Eigen::Success)
        throw not_psd_error("logdet: matrix is not positive definite");
    double s = 0.0;
    for (int i = 0; i < m.dim(); ++i) s += std::log(llt.matrixLLT()(i, i));
    return 2.0 * s;
}

/// Certificate that a matrix is doubly non-negative (entrywise non-negative
/// and PSD), up to tolerances: entries >= -tol, eigenvalues
/// >= -tol * max(1, lambda_max).
struct DnnReport {
    bool ok = false;
    bool entrywise_ok = false;
    bool psd_ok = false;
    double min_entry = 0.0;
    double min_eigenvalue = 0.0;
    double max_eigenvalue = 0.0;
};

inline DnnReport is_doubly_nonnegative(const SymmetricMatrix& m, double tol = 1e-10) {
    DnnReport r;
    r.min_entry = m.min_entry();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m.as_eigen(), Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success)
        throw convergence_error("is_doubly_nonnegative: symmetric eigensolver failed");
    r.min_eigenvalue = solver.eigenvalues().minCoeff();
    r.max_eigenvalue = solver.eigenvalues().maxCoeff();
    r.entrywise_ok = r.min_entry >= -tol;
    r.psd_ok = r.min_eigenvalue >= -tol * std::max(1.0, r.max_eigenvalue);
    r.ok = r.entrywise_ok && r.psd_ok;
    return r;
}

}  // namespace arw
