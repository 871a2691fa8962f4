#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "arw/dataset.hpp"
#include "arw/errors.hpp"
#include "arw/estimators.hpp"
#include "arw/kernel.hpp"
#include "arw/rng.hpp"
#include "arw/robust.hpp"
#include "arw/worst_case.hpp"

namespace arw {

/// A whole benchmark run failed (too many per-point estimator failures).
class run_failure_error : public std::runtime_error {
public:
    explicit run_failure_error(const std::string& what) : std::runtime_error(what) {}
};

inline const std::vector<std::string>& known_estimators() {
    static const std::vector<std::string> names{"nw", "llr", "llr-i", "nw-logdet", "nw-buresw"};
    return names;
}

inline bool estimator_is_robust(const std::string& name) {
    return name == "nw-logdet" || name == "nw-buresw";
}

/// h^2 candidates {1, 2, 5} x 10^k for k in -2..4, ascending.
inline std::vector<double> default_bandwidth2_grid() {
    std::vector<double> g;
    for (int k = -2; k <= 4; ++k)
        for (double m : {1.0, 2.0, 5.0}) g.push_back(m * std::pow(10.0, k));
    return g;
}

/// Indices of the n nearest rows to z0 (squared euclidean), nearest first;
/// distance ties break toward the lower index.
inline std::vector<int> knn_neighbors(const std::vector<std::vector<double>>& rows,
                                      std::span<const double> z0, int n) {
    const int m = static_cast<int>(rows.size());
    if (n < 1 || n > m) throw invalid_input_error("knn_neighbors: n out of range");
    std::vector<std::pair<double, int>> order(m);
    for (int i = 0; i < m; ++i) {
        if (rows[i].size() != z0.size())
            throw invalid_input_error("knn_neighbors: dimension mismatch");
        double d2 = 0.0;
        for (size_t j = 0; j < z0.size(); ++j) {
            const double d = rows[i][j] - z0[j];
            d2 += d * d;
        }
        order[i] = {d2, i};
    }
    std::partial_sort(order.begin(), order.begin() + n, order.end());
    std::vector<int> idx(n);
    for (int i = 0; i < n; ++i) idx[i] = order[i].second;
    return idx;
}

inline std::vector<double> draw_kappas(Rng& rng, int n, double lo, double hi) {
    if (n < 0 || !(lo <= hi)) throw invalid_input_error("draw_kappas: bad arguments");
    std::vector<double> k(n);
    for (double& v : k) v = rng.uniform(lo, hi);
    return k;
}

/// Multiplies the first tau responses (callers pass them nearest-first) by
/// the matching kappas, in place.
inline void perturb_responses(std::vector<double>& responses, int tau,
                              std::span<const double> kappas) {
    if (tau < 0 || tau > static_cast<int>(responses.size()) ||
        tau > static_cast<int>(kappas.size()))
        throw invalid_input_error("perturb_responses: tau out of range");
    for (int i = 0; i < tau; ++i) responses[i] *= kappas[i];
}

inline double rmse(const std::vector<double>& predictions, const std::vector<double>& truths) {
    if (predictions.size() != truths.size() || predictions.empty())
        throw invalid_input_error("rmse: size mismatch or empty");
    double s = 0.0;
    for (size_t i = 0; i < predictions.size(); ++i) {
        const double d = predictions[i] - truths[i];
        s += d * d;
    }
    return std::sqrt(s / static_cast<double>(predictions.size()));
}

/// Feature standardization fit on the training split only.
struct Standardizer {
    std::vector<double> mean, sd;

    static Standardizer fit(const std::vector<std::vector<double>>& rows,
                            std::span<const int> train_indices) {
        if (train_indices.empty()) throw invalid_input_error("Standardizer: empty training split");
        const int d = static_cast<int>(rows[train_indices[0]].size());
        Standardizer s;
        s.mean.assign(d, 0.0);
        s.sd.assign(d, 0.0);
        for (int i : train_indices)
            for (int j = 0; j < d; ++j) s.mean[j] += rows[i][j];
        for (int j = 0; j < d; ++j) s.mean[j] /= static_cast<double>(train_indices.size());
        for (int i : train_indices)
            for (int j = 0; j < d; ++j) {
                const double c = rows[i][j] - s.mean[j];
                s.sd[j] += c * c;
            }
        for (int j = 0; j < d; ++j) {
            s.sd[j] = std::sqrt(s.sd[j] / static_cast<double>(train_indices.size()));
            if (s.sd[j] == 0.0) s.sd[j] = 1.0;  // constant feature: leave it centered
        }
        return s;
    }

    std::vector<double> apply(std::span<const double> row) const {
        std::vector<double> out(row.size());
        for (size_t j = 0; j < row.size(); ++j) out[j] = (row[j] - mean[j]) / sd[j];
        return out;
    }
};

/// Validation-set bandwidth selection for the NW estimator restricted to n
/// nearest neighbors. Candidates where some validation point ends up with
/// zero total weight are skipped; ties prefer the smaller h^2.
inline double select_bandwidth(const std::vector<std::vector<double>>& train_features,
                               const std::vector<double>& train_responses,
                               const std::vector<std::vector<double>>& val_features,
                               const std::vector<double>& val_responses, int n,
                               KernelFamily family, const std::vector<double>& grid) {
    if (grid.empty()) throw invalid_input_error("select_bandwidth: empty grid");
    if (val_features.empty()) throw invalid_input_error("select_bandwidth: empty validation set");
    std::vector<double> sorted_grid = grid;
    std::sort(sorted_grid.begin(), sorted_grid.end());
    std::vector<std::vector<int>> neighbor_cache(val_features.size());
    for (size_t v = 0; v < val_features.size(); ++v)
        neighbor_cache[v] = knn_neighbors(train_features, val_features[v], n);

    double best_h2 = 0.0, best_err = 0.0;
    bool found = false;
    for (double h2 : sorted_grid) {
        const KernelSpec spec{family, h2, std::nullopt};
        double sq = 0.0;
        bool degenerate = false;
        for (size_t v = 0; v < val_features.size() && !degenerate; ++v) {
            double sw = 0.0, swy = 0.0;
            for (int i : neighbor_cache[v]) {
                const double w = eval_kernel(spec, val_features[v], train_features[i]);
                sw += w;
                swy += w * train_responses[i];
            }
            if (!(sw > 0.0) || !std::isfinite(swy / sw)) {
                degenerate = true;
                break;
            }
            const double r = swy / sw - val_responses[v];
            sq += r * r;
        }
        if (degenerate) continue;
        if (!found || sq < best_err) {
            found = true;
            best_err = sq;
            best_h2 = h2;
        }
    }
    if (!found)
        throw degenerate_weights_error("select_bandwidth: every candidate was degenerate");
    return best_h2;
}

struct SplitSizes {
    int train = 1200;
    int val = 50;
    int test = 800;
};

struct ExperimentConfig {
    Dataset dataset;
    SplitSizes split;
    KernelFamily kernel = KernelFamily::Gaussian;
    std::vector<double> bandwidth2_grid = default_bandwidth2_grid();
    std::vector<int> neighbor_grid{50};
    std::vector<std::string> estimators{"nw", "llr", "llr-i", "nw-logdet", "nw-buresw"};
    std::vector<double> rho_grid{0.01, 0.1, 1.0, 10.0};
    std::vector<double> tau_fracs{0.0, 0.2, 0.4, 0.6, 0.8, 1.0};
    double kappa_min = 1.8;
    double kappa_max = 2.2;
    int replications = 10;
    uint64_t seed = 0;
    int threads = 0;  // 0 = hardware concurrency

    void validate() const {
        if (split.train < 1 || split.val < 1 || split.test < 1)
            throw invalid_input_error("ExperimentConfig: split sizes must be positive");
        if (split.train + split.val + split.test > dataset.rows())
            throw invalid_input_error("ExperimentConfig: split larger than the dataset");
        if (neighbor_grid.empty() || bandwidth2_grid.empty() || estimators.empty() ||
            tau_fracs.empty() || replications < 1)
            throw invalid_input_error("ExperimentConfig: empty grid");
        for (int n : neighbor_grid)
            if (n < 1 || n > split.train)
                throw invalid_input_error("ExperimentConfig: neighbors out of range");
        for (double f : tau_fracs)
            if (!(f >= 0.0 && f <= 1.0))
                throw invalid_input_error("ExperimentConfig: tau fraction outside [0, 1]");
        for (const std::string& e : estimators)
            if (std::find(known_estimators().begin(), known_estimators().end(), e) ==
                known_estimators().end())
                throw invalid_input_error("ExperimentConfig: unknown estimator " + e);
        bool any_robust = false;
        for (const std::string& e : estimators) any_robust |= estimator_is_robust(e);
        if (any_robust && rho_grid.empty())
            throw invalid_input_error("ExperimentConfig: robust estimators need a rho grid");
        for (double r : rho_grid)
            if (!(r >= 0.0) || !std::isfinite(r))
                throw invalid_input_error("ExperimentConfig: bad rho");
        if (!(kappa_min <= kappa_max))
            throw invalid_input_error("ExperimentConfig: kappa_min > kappa_max");
    }
};

struct CellResult {
    std::string estimator;
    int neighbors = 0;
    double rho = 0.0;  // 0 for the non-robust estimators
    double tau_frac = 0.0;
    int tau = 0;
    int replication = 0;
    double rmse = 0.0;
    double seconds = 0.0;
    int failed_points = 0;
};

struct BandwidthChoice {
    int replication = 0;
    int neighbors = 0;
    double bandwidth2 = 0.0;
};

struct RunReport {
    std::string dataset_name;
    int rows = 0;
    int cols = 0;
    int dropped_rows = 0;
    ExperimentConfig const* config = nullptr;  // echoed by the writers
    std::vector<uint64_t> replication_seeds;
    std::vector<BandwidthChoice> bandwidths;
    std::vector<CellResult> cells;
    std::map<std::string, double> estimator_seconds;
};

namespace detail {

struct CellSpec {
    std::string estimator;
    double rho = 0.0;
    int tau_index = 0;
};

// Exact-duplicate feature groups inside one neighborhood (nearest-first
// order). The robust path collapses each group to its first member with the
// group's mean response, so the Gram stays PD-able.
struct NeighborhoodDedup {
    std::vector<int> representative_of;  // per neighbor: index of group head
    std::vector<int> heads;              // unique group heads, in order
    bool any = false;
};

inline NeighborhoodDedup dedup_neighborhood(const std::vector<std::vector<double>>& points) {
    NeighborhoodDedup d;
    const int n = static_cast<int>(points.size());
    d.representative_of.resize(n);
    for (int i = 0; i < n; ++i) {
        int rep = i;
        for (int h : d.heads)
            if (points[h] == points[i]) {
                rep = h;
                break;
            }
        d.representative_of[i] = rep;
        if (rep == i) d.heads.push_back(i);
    }
    d.any = static_cast<int>(d.heads.size()) != n;
    return d;
}

}  // namespace detail

/// Runs the full benchmark protocol: per replication, shuffle and split the
/// data, standardize features on the training split, pick the bandwidth on
/// clean data, then for every test point perturb the tau nearest neighbor
/// responses and score every estimator configuration against the clean test
/// responses. Deterministic for a fixed seed, independent of thread count
/// and estimator order.
inline RunReport run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    const Dataset& data = cfg.dataset;
    const int n_test = cfg.split.test;

    RunReport report;
    report.dataset_name = data.name;
    report.rows = data.rows();
    report.cols = data.cols();
    report.dropped_rows = data.dropped_rows;
    report.config = &cfg;
    for (const std::string& e : cfg.estimators) report.estimator_seconds[e] = 0.0;

    // Cell layout shared by every (replication, N) block: estimator-major,
    // then rho (robust only), then tau.
    std::vector<detail::CellSpec> cell_specs;
    for (const std::string& est : cfg.estimators) {
        const std::vector<double> rhos =
            estimator_is_robust(est) ? cfg.rho_grid : std::vector<double>{0.0};
        for (double rho : rhos)
            for (int ti = 0; ti < static_cast<int>(cfg.tau_fracs.size()); ++ti)
                cell_specs.push_back({est, rho, ti});
    }
    const int n_cells = static_cast<int>(cell_specs.size());

    const Rng root(cfg.seed);
    for (int rep = 0; rep < cfg.replications; ++rep) {
        const Rng rep_root = root.fork(static_cast<uint64_t>(rep) + 1);
        {
            Rng probe = rep_root.fork(0);
            report.replication_seeds.push_back(probe.next_u64());
        }
        std::vector<int> perm(data.rows());
        std::iota(perm.begin(), perm.end(), 0);
        {
            Rng shuffle_rng = rep_root.fork(1);
            shuffle_rng.shuffle(perm);
        }
        const std::vector<int> train_idx(perm.begin(), perm.begin() + cfg.split.train);
        const std::vector<int> val_idx(perm.begin() + cfg.split.train,
                                       perm.begin() + cfg.split.train + cfg.split.val);
        const std::vector<int> test_idx(perm.begin() + cfg.split.train + cfg.split.val,
                                        perm.begin() + cfg.split.train + cfg.split.val + n_test);

        const Standardizer stand = Standardizer::fit(data.features, train_idx);
        std::vector<std::vector<double>> train_f(train_idx.size());
        std::vector<double> train_y(train_idx.size());
        for (size_t i = 0; i < train_idx.size(); ++i) {
            train_f[i] = stand.apply(data.features[train_idx[i]]);
            train_y[i] = data.responses[train_idx[i]];
        }
        std::vector<std::vector<double>> val_f(val_idx.size());
        std::vector<double> val_y(val_idx.size());
        for (size_t i = 0; i < val_idx.size(); ++i) {
            val_f[i] = stand.apply(data.features[val_idx[i]]);
            val_y[i] = data.responses[val_idx[i]];
        }
        std::vector<std::vector<double>> test_f(test_idx.size());
        std::vector<double> test_y(test_idx.size());
        for (size_t i = 0; i < test_idx.size(); ++i) {
            test_f[i] = stand.apply(data.features[test_idx[i]]);
            test_y[i] = data.responses[test_idx[i]];
        }

        for (int n_neighbors : cfg.neighbor_grid) {
            const double h2 = select_bandwidth(train_f, train_y, val_f, val_y, n_neighbors,
                                               cfg.kernel, cfg.bandwidth2_grid);
            report.bandwidths.push_back({rep, n_neighbors, h2});
            const KernelSpec kspec{cfg.kernel, h2, std::nullopt};

            // Per (cell, point) slots keep the reduction order fixed no
            // matter how the points are scheduled across threads.
            std::vector<double> sqerr(static_cast<size_t>(n_cells) * n_test, 0.0);
            std::vector<double> secs(static_cast<size_t>(n_cells) * n_test, 0.0);
            std::vector<unsigned char> failed(static_cast<size_t>(n_cells) * n_test, 0);

            auto run_point = [&](int t) {
                const std::vector<double>& z0 = test_f[t];
                const std::vector<int> nbr = knn_neighbors(train_f, z0, n_neighbors);
                LocalSample base;
                base.center = z0;
                base.points.reserve(nbr.size());
                base.responses.reserve(nbr.size());
                for (int i : nbr) {
                    base.points.push_back(train_f[i]);
                    base.responses.push_back(train_y[i]);
                }
                base.weights = kernel_weights(kspec, z0, base.points);

                const detail::NeighborhoodDedup dedup = detail::dedup_neighborhood(base.points);
                std::vector<std::vector<double>> robust_points;
                for (int h : dedup.heads) robust_points.push_back(base.points[h]);
                NominalWeights nominal;
                bool nominal_ok = true;
                try {
                    nominal = gram_nominal(kspec, z0, robust_points);
                } catch (const std::exception&) {
                    nominal_ok = false;
                }

                Rng kappa_rng = rep_root.fork(2)
                                    .fork(static_cast<uint64_t>(n_neighbors))
                                    .fork(static_cast<uint64_t>(t));
                const std::vector<double> kappas =
                    draw_kappas(kappa_rng, n_neighbors, cfg.kappa_min, cfg.kappa_max);

                std::vector<double> perturbed(base.responses.size());
                std::vector<double> robust_y(dedup.heads.size());
                std::vector<int> group_size(dedup.heads.size());
                for (int ti = 0; ti < static_cast<int>(cfg.tau_fracs.size()); ++ti) {
                    const int tau = static_cast<int>(
                        std::lround(cfg.tau_fracs[ti] * static_cast<double>(n_neighbors)));
                    perturbed = base.responses;
                    perturb_responses(perturbed, tau, kappas);

                    std::fill(robust_y.begin(), robust_y.end(), 0.0);
                    std::fill(group_size.begin(), group_size.end(), 0);
                    for (int i = 0; i < static_cast<int>(perturbed.size()); ++i) {
                        const int head = dedup.representative_of[i];
                        const int slot = static_cast<int>(
                            std::find(dedup.heads.begin(), dedup.heads.end(), head) -
                            dedup.heads.begin());
                        robust_y[slot] += perturbed[i];
                        ++group_size[slot];
                    }
                    for (size_t gidx = 0; gidx < robust_y.size(); ++gidx)
                        robust_y[gidx] /= static_cast<double>(group_size[gidx]);

                    LocalSample sample = base;
                    sample.responses = perturbed;
                    LocalSample robust_sample;
                    robust_sample.center = z0;
                    robust_sample.points = robust_points;
                    robust_sample.responses = robust_y;
                    robust_sample.weights = nominal_ok ? nominal.weights
                                                       : std::vector<double>(robust_y.size(), 1.0);

                    for (int c = 0; c < n_cells; ++c) {
                        const detail::CellSpec& spec = cell_specs[c];
                        if (spec.tau_index != ti) continue;
                        const size_t slot = static_cast<size_t>(c) * n_test + t;
                        const auto t0 = std::chrono::steady_clock::now();
                        try {
                            double pred;
                            if (spec.estimator == "nw") {
                                pred = nw_estimate(sample);
                            } else if (spec.estimator == "llr") {
                                pred = llr_estimate(sample).prediction;
                            } else if (spec.estimator == "llr-i") {
                                pred = llr_intercept(sample);
                            } else {
                                if (!nominal_ok)
                                    throw degenerate_gram_error("no nominal matrix");
                                const DivergenceKind kind = spec.estimator == "nw-logdet"
                                                                ? DivergenceKind::LogDet
                                                                : DivergenceKind::BuresW;
                                pred = robust_nw(robust_sample, nominal,
                                                 UncertaintySpec{kind, spec.rho})
                                           .beta;
                            }
                            const double err = pred - test_y[t];
                            sqerr[slot] = err * err;
                        } catch (const std::exception&) {
                            failed[slot] = 1;
                        }
                        secs[slot] = std::chrono::duration<double>(
                                         std::chrono::steady_clock::now() - t0)
                                         .count();
                    }
                }
            };

            int n_threads = cfg.threads > 0
                                ? cfg.threads
                                : static_cast<int>(std::thread::hardware_concurrency());
            n_threads = std::max(1, std::min(n_threads, n_test));
            if (n_threads == 1) {
                for (int t = 0; t < n_test; ++t) run_point(t);
            } else {
                std::vector<std::thread> workers;
                workers.reserve(n_threads);
                for (int w = 0; w < n_threads; ++w)
                    workers.emplace_back([&, w]() {
                        for (int t = w; t < n_test; t += n_threads) run_point(t);
                    });
                for (std::thread& w : workers) w.join();
            }

            for (int c = 0; c < n_cells; ++c) {
                const detail::CellSpec& spec = cell_specs[c];
                CellResult cell;
                cell.estimator = spec.estimator;
                cell.neighbors = n_neighbors;
                cell.rho = spec.rho;
                cell.tau_frac = cfg.tau_fracs[spec.tau_index];
                cell.tau = static_cast<int>(
                    std::lround(cell.tau_frac * static_cast<double>(n_neighbors)));
                cell.replication = rep;
                double sum = 0.0, sec = 0.0;
                int ok = 0;
                for (int t = 0; t < n_test; ++t) {
                    const size_t slot = static_cast<size_t>(c) * n_test + t;
                    sec += secs[slot];
                    if (failed[slot]) {
                        ++cell.failed_points;
                    } else {
                        sum += sqerr[slot];
                        ++ok;
                    }
                }
                if (cell.failed_points > n_test / 100)
                    throw run_failure_error("run failed: estimator " + spec.estimator + " failed on " +
                                            std::to_string(cell.failed_points) + "/" +
                                            std::to_string(n_test) + " test points");
                cell.rmse = std::sqrt(sum / static_cast<double>(ok));
                cell.seconds = sec;
                report.estimator_seconds[spec.estimator] += sec;
                report.cells.push_back(std::move(cell));
            }
        }
    }
    return report;
}

}  // namespace arw
