#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "arw/errors.hpp"
#include "arw/symmetric_matrix.hpp"

namespace arw {

/// Rank-two spectral form s * (q+ q+^T - q- q-^T). This is the whole spectrum
/// of an arrowhead loss matrix, and stays closed under symmetric permutation,
/// which the solver relies on.
struct RankTwoSpectral {
    int dim = 0;
    double s = 0.0;  // nonzero eigenvalues are +s and -s
    std::vector<double> q_plus;
    std::vector<double> q_minus;

    double q(int row, int col) const { return col == 0 ? q_plus[row] : q_minus[row]; }

    SymmetricMatrix densify() const {
        SymmetricMatrix m(dim);
        for (int i = 0; i < dim; ++i)
            for (int j = i; j < dim; ++j)
                m.set(i, j, s * (q_plus[i] * q_plus[j] - q_minus[i] * q_minus[j]));
        return m;
    }

    /// Applies an index relabeling: entry i moves to perm[i].
    RankTwoSpectral permuted(const std::vector<int>& perm) const {
        if (static_cast<int>(perm.size()) != dim)
            throw invalid_input_error("RankTwoSpectral::permuted: permutation size mismatch");
        RankTwoSpectral out;
        out.dim = dim;
        out.s = s;
        out.q_plus.assign(dim, 0.0);
        out.q_minus.assign(dim, 0.0);
        for (int i = 0; i < dim; ++i) {
            out.q_plus[perm[i]] = q_plus[i];
            out.q_minus[perm[i]] = q_minus[i];
        }
        return out;
    }
};

/// Loss matrix V(beta): first row and column hold the per-sample losses,
/// every other entry is zero. Its spectrum is known in closed form: with
/// s = sqrt(sum_i l_i^2) the only nonzero eigenvalues are +s and -s, with
/// eigenvectors (+-s, l_1, ..., l_N) / (s * sqrt(2)).
class ArrowheadLoss {
public:
    static ArrowheadLoss from_losses(std::vector<double> losses) {
        if (losses.empty()) throw invalid_input_error("ArrowheadLoss: need at least one loss");
        double sq = 0.0;
        for (double l : losses) {
            if (!std::isfinite(l)) throw invalid_input_error("ArrowheadLoss: non-finite loss");
            if (l < 0.0) throw invalid_input_error("ArrowheadLoss: negative loss");
            sq += l * l;
        }
        ArrowheadLoss v;
        v.losses_ = std::move(losses);
        v.norm_ = std::sqrt(sq);
        return v;
    }

    int count() const { return static_cast<int>(losses_.size()); }
    int dim() const { return count() + 1; }
    const std::vector<double>& losses() const { return losses_; }

    /// Cached spectral norm s = sqrt(sum of squared losses).
    double spectral_norm() const { return norm_; }

    RankTwoSpectral spectral() const {
        RankTwoSpectral r;
        r.dim = dim();
        r.s = norm_;
        r.q_plus.assign(r.dim, 0.0);
        r.q_minus.assign(r.dim, 0.0);
        if (norm_ > 0.0) {
            const double c = 1.0 / (norm_ * std::sqrt(2.0));
            r.q_plus[0] = norm_ * c;
            r.q_minus[0] = -norm_ * c;
            for (int i = 0; i < count(); ++i) {
                r.q_plus[i + 1] = losses_[i] * c;
                r.q_minus[i + 1] = losses_[i] * c;
            }
        } else {
            // Zero matrix: any orthonormal pair represents it; pick e0, e1.
            r.q_plus[0] = 1.0;
            r.q_minus[1] = 1.0;
        }
        return r;
    }

    SymmetricMatrix densify() const {
        SymmetricMatrix m(dim());
        for (int i = 0; i < count(); ++i) m.set(0, i + 1, losses_[i]);
        return m;
    }

private:
    std::vector<double> losses_;
    double norm_ = 0.0;
};

inline ArrowheadLoss arrowhead_eigen(std::vector<double> losses) {
    return ArrowheadLoss::from_losses(std::move(losses));
}

namespace detail {

/// Eigenvalues of B * diag(s, -s) for symmetric 2x2 B, i.e. roots of
/// mu^2 - s(b00 - b11) mu - s^2 det(B). Returns {mu1 >= 0 >= mu2}; computed
/// with the stable quadratic formula (no cancellation in the dominant root).
inline std::pair<double, double> indefinite_pair_eigs(double b00, double b01, double b11,
                                                      double s) {
    const double tr = s * (b00 - b11);
    const double det = -s * s * (b00 * b11 - b01 * b01);  // <= 0 when B is PSD
    const double disc = std::sqrt(std::max(tr * tr - 4.0 * det, 0.0));
    if (disc == 0.0) return {0.5 * tr, 0.5 * tr};
    double mu1, mu2;
    if (tr >= 0.0) {
        mu1 = 0.5 * (tr + disc);
        mu2 = det / mu1;
    } else {
        mu2 = 0.5 * (tr - disc);
        mu1 = det / mu2;
    }
    return {mu1, mu2};
}

inline void require_margin(double gamma, double pole, const char* who) {
    if (!(gamma - pole > 1e-9 * std::max(1.0, std::abs(pole))))
        throw out_of_domain_error(std::string(who) + ": gamma = " + std::to_string(gamma) +
                                  " too close to pole " + std::to_string(pole));
}

}  // namespace detail

/// Resolvent (gamma I - V)^{-1} without forming or factoring the dense
/// matrix: rank-two correction of I/gamma using the arrowhead spectrum.
/// Requires gamma above the spectral norm of V by a relative margin of 1e-9.
inline SymmetricMatrix woodbury_resolvent(double gamma, const ArrowheadLoss& v) {
    const double s = v.spectral_norm();
    detail::require_margin(gamma, s, "woodbury_resolvent");
    const int p = v.dim();
    SymmetricMatrix r(p);
    const double inv = 1.0 / gamma;
    for (int i = 0; i < p; ++i) r.set(i, i, inv);
    if (s == 0.0) return r;
    // (gamma I - V)^{-1} = I/gamma + a+ q+ q+^T + a- q- q-^T
    const double a_plus = s / (gamma * (gamma - s));
    const double a_minus = -s / (gamma * (gamma + s));
    const RankTwoSpectral q = v.spectral();
    for (int i = 0; i < p; ++i)
        for (int j = i; j < p; ++j)
            r.set(i, j, r(i, j) + a_plus * q.q_plus[i] * q.q_plus[j] +
                            a_minus * q.q_minus[i] * q.q_minus[j]);
    return r;
}

/// Resolvent (I - SVS/gamma)^{-1} for S = sqrt_omega, again as a rank-two
/// correction: I - U C^{-1} U^T with U = S Q and C = B - gamma Lambda^{-1},
/// B = U^T U. Requires gamma above lambda_max(SVS) by a relative 1e-9 margin.
inline SymmetricMatrix woodbury_sandwich_resolvent(double gamma, const SymmetricMatrix& sqrt_omega,
                                                   const ArrowheadLoss& v) {
    const int p = v.dim();
    if (sqrt_omega.dim() != p)
        throw invalid_input_error("woodbury_sandwich_resolvent: dimension mismatch");
    const double s = v.spectral_norm();
    if (s == 0.0) {
        detail::require_margin(gamma, 0.0, "woodbury_sandwich_resolvent");
        return SymmetricMatrix::identity(p);
    }
    const RankTwoSpectral q = v.spectral();
    std::vector<double> u_plus(p, 0.0), u_minus(p, 0.0);
    for (int i = 0; i < p; ++i) {
        double up = 0.0, um = 0.0;
        for (int j = 0; j < p; ++j) {
            up += sqrt_omega(i, j) * q.q_plus[j];
            um += sqrt_omega(i, j) * q.q_minus[j];
        }
        u_plus[i] = up;
        u_minus[i] = um;
    }
    double b00 = 0.0, b01 = 0.0, b11 = 0.0;
    for (int i = 0; i < p; ++i) {
        b00 += u_plus[i] * u_plus[i];
        b01 += u_plus[i] * u_minus[i];
        b11 += u_minus[i] * u_minus[i];
    }
    const auto [mu1, mu2] = detail::indefinite_pair_eigs(b00, b01, b11, s);
    (void)mu2;
    detail::require_margin(gamma, mu1, "woodbury_sandwich_resolvent");
    // C = B - gamma Lambda^{-1}, Lambda = diag(s, -s)
    const double c00 = b00 - gamma / s;
    const double c11 = b11 + gamma / s;
    const double det_c = c00 * c11 - b01 * b01;
    if (det_c == 0.0 || !std::isfinite(det_c))
        throw internal_consistency_error("woodbury_sandwich_resolvent: singular 2x2 core");
    const double i00 = c11 / det_c, i01 = -b01 / det_c, i11 = c00 / det_c;
    SymmetricMatrix w = SymmetricMatrix::identity(p);
    for (int i = 0; i < p; ++i) {
        const double ti = i00 * u_plus[i] + i01 * u_minus[i];
        const double si = i01 * u_plus[i] + i11 * u_minus[i];
        for (int j = i; j < p; ++j)
            w.set(i, j, w(i, j) - (ti * u_plus[j] + si * u_minus[j]));
    }
    return w;
}

}  // namespace arw
