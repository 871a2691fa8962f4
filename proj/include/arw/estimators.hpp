#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "arw/errors.hpp"

namespace arw {

/// One query point with its weighted neighborhood.
struct LocalSample {
    std::vector<double> center;
    std::vector<std::vector<double>> points;
    std::vector<double> responses;
    std::vector<double> weights;

    int count() const { return static_cast<int>(points.size()); }
    int feature_dim() const { return static_cast<int>(center.size()); }

    void validate() const {
        if (points.empty()) throw invalid_input_error("LocalSample: need at least one point");
        if (responses.size() != points.size() || weights.size() != points.size())
            throw invalid_input_error("LocalSample: responses/weights size mismatch");
        for (const auto& p : points)
            if (p.size() != center.size())
                throw invalid_input_error("LocalSample: point dimension mismatch");
        for (double y : responses)
            if (!std::isfinite(y)) throw invalid_input_error("LocalSample: non-finite response");
        for (double w : weights) {
            if (!std::isfinite(w)) throw invalid_input_error("LocalSample: non-finite weight");
            if (w < 0.0) throw invalid_input_error("LocalSample: negative weight");
        }
    }
};

/// Weighted mean of the responses (the minimizer of sum_i w_i (b - y_i)^2).
inline double nw_estimate(const LocalSample& sample) {
    sample.validate();
    double sw = 0.0, swy = 0.0;
    for (int i = 0; i < sample.count(); ++i) {
        sw += sample.weights[i];
        swy += sample.weights[i] * sample.responses[i];
    }
    if (sw <= 0.0) throw degenerate_weights_error("nw_estimate: all weights are zero");
    return swy / sw;
}

struct LlrCoefficients {
    double intercept = 0.0;
    std::vector<double> slope;
};

struct LlrFit {
    LlrCoefficients coefficients;
    double prediction = 0.0;  // fitted value at the query point
    bool ridged = false;      // normal matrix needed a ridge to stay invertible
};

/// Weighted least squares of the responses on the centered design
/// [1, z_i - z0]. Because the design is centered at the query, the fitted
/// value there is the intercept. A numerically singular normal matrix (min
/// eigenvalue <= 1e-12 * trace) gets a ridge of 1e-8 * trace / dim.
inline LlrFit llr_estimate(const LocalSample& sample) {
    sample.validate();
    const int n = sample.count();
    const int d = sample.feature_dim();
    double sw = 0.0;
    for (double w : sample.weights) sw += w;
    if (sw <= 0.0) throw degenerate_weights_error("llr_estimate: all weights are zero");

    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(d + 1, d + 1);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(d + 1);
    Eigen::VectorXd x(d + 1);
    for (int i = 0; i < n; ++i) {
        x(0) = 1.0;
        for (int j = 0; j < d; ++j) x(j + 1) = sample.points[i][j] - sample.center[j];
        a.noalias() += sample.weights[i] * x * x.transpose();
        b.noalias() += sample.weights[i] * sample.responses[i] * x;
    }

    LlrFit fit;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() <= 1e-12 * a.trace()) {
        a.diagonal().array() += 1e-8 * a.trace() / (d + 1);
        fit.ridged = true;
    }
    Eigen::LLT<Eigen::MatrixXd> llt(a);
    if (llt.info() != Eigen::Success)
        throw rank_deficient_error("llr_estimate: normal matrix singular even after ridge");
    Eigen::VectorXd beta = llt.solve(b);
    fit.coefficients.intercept = beta(0);
    fit.coefficients.slope.assign(beta.data() + 1, beta.data() + d + 1);
    fit.prediction = beta(0);
    return fit;
}

/// Intercept-only variant reported as its own estimator in the benchmarks.
inline double llr_intercept(const LocalSample& sample) {
    return llr_estimate(sample).coefficients.intercept;
}

/// Per-sample squared losses l_i = (beta - y_i)^2 of a constant fit.
inline std::vector<double> squared_losses(double beta, const std::vector<double>& responses) {
    if (!std::isfinite(beta)) throw invalid_input_error("squared_losses: non-finite beta");
    std::vector<double> l(responses.size());
    for (size_t i = 0; i < responses.size(); ++i) {
        if (!std::isfinite(responses[i]))
            throw invalid_input_error("squared_losses: non-finite response");
        const double r = beta - responses[i];
        l[i] = r * r;
    }
    return l;
}

}  // namespace arw
