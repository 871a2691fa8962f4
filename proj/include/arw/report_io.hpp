#pragma once

#include <cstdio>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "arw/harness.hpp"

namespace arw {

namespace detail {

inline std::string fmt_double(const char* spec, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

}  // namespace detail

/// Flat plot-ready rows, one per (estimator, N, rho, tau, replication).
/// `redact_seconds` zeroes the wall-clock column; every other column is a
/// deterministic function of the config and seed.
inline std::string report_csv_string(const RunReport& report, bool redact_seconds = false) {
    const ExperimentConfig& cfg = *report.config;
    std::string out = "dataset,estimator,N,rho,tau,kappa_min,kappa_max,replication,rmse,seconds\n";
    for (const CellResult& c : report.cells) {
        out += report.dataset_name;
        out += ',' + c.estimator;
        out += ',' + std::to_string(c.neighbors);
        out += ',' + detail::fmt_double("%g", c.rho);
        out += ',' + std::to_string(c.tau);
        out += ',' + detail::fmt_double("%g", cfg.kappa_min);
        out += ',' + detail::fmt_double("%g", cfg.kappa_max);
        out += ',' + std::to_string(c.replication);
        out += ',' + detail::fmt_double("%.17g", c.rmse);
        out += ',' + detail::fmt_double("%.6f", redact_seconds ? 0.0 : c.seconds);
        out += '\n';
    }
    return out;
}

inline void write_report_csv(const RunReport& report, const std::string& path,
                             bool redact_seconds = false) {
    std::ofstream out(path);
    if (!out) throw io_error("cannot write report CSV: " + path);
    out << report_csv_string(report, redact_seconds);
    if (!out.good()) throw io_error("failed writing report CSV: " + path);
}

/// Machine-readable report: config echo, per-replication seeds, selected
/// bandwidths, every cell, and mean/sd RMSE per configuration across
/// replications.
inline nlohmann::ordered_json report_json(const RunReport& report, bool redact_timing = false) {
    const ExperimentConfig& cfg = *report.config;
    nlohmann::ordered_json j;
    j["dataset"] = {{"name", report.dataset_name},
                    {"rows", report.rows},
                    {"feature_columns", report.cols},
                    {"dropped_rows", report.dropped_rows}};
    nlohmann::ordered_json jc;
    jc["kernel"] = kernel_family_name(cfg.kernel);
    jc["bandwidth2_grid"] = cfg.bandwidth2_grid;
    jc["neighbors"] = cfg.neighbor_grid;
    jc["estimators"] = cfg.estimators;
    jc["rho_grid"] = cfg.rho_grid;
    jc["tau_fracs"] = cfg.tau_fracs;
    jc["kappa"] = {cfg.kappa_min, cfg.kappa_max};
    jc["replications"] = cfg.replications;
    jc["seed"] = std::to_string(cfg.seed);
    jc["split"] = {{"train", cfg.split.train}, {"val", cfg.split.val}, {"test", cfg.split.test}};
    jc["standardization"] = "z-score fit on the training split";
    jc["bandwidth_policy"] = "selected on clean data per replication and neighbor count";
    j["config"] = std::move(jc);

    std::vector<std::string> seeds;
    for (uint64_t s : report.replication_seeds) seeds.push_back(std::to_string(s));
    j["replication_seeds"] = seeds;

    nlohmann::ordered_json bw = nlohmann::ordered_json::array();
    for (const BandwidthChoice& b : report.bandwidths)
        bw.push_back({{"replication", b.replication},
                      {"neighbors", b.neighbors},
                      {"bandwidth2", b.bandwidth2}});
    j["bandwidths"] = std::move(bw);

    nlohmann::ordered_json cells = nlohmann::ordered_json::array();
    for (const CellResult& c : report.cells)
        cells.push_back({{"estimator", c.estimator},
                         {"neighbors", c.neighbors},
                         {"rho", c.rho},
                         {"tau_frac", c.tau_frac},
                         {"tau", c.tau},
                         {"replication", c.replication},
                         {"rmse", c.rmse},
                         {"seconds", redact_timing ? 0.0 : c.seconds},
                         {"failed_points", c.failed_points}});
    j["cells"] = std::move(cells);

    // Mean / sd across replications per configuration, in first-seen order.
    std::vector<std::string> order;
    std::map<std::string, std::vector<double>> grouped;
    std::map<std::string, const CellResult*> exemplar;
    for (const CellResult& c : report.cells) {
        const std::string key = c.estimator + "|" + std::to_string(c.neighbors) + "|" +
                                detail::fmt_double("%.17g", c.rho) + "|" +
                                detail::fmt_double("%.17g", c.tau_frac);
        if (!grouped.count(key)) {
            order.push_back(key);
            exemplar[key] = &c;
        }
        grouped[key].push_back(c.rmse);
    }
    nlohmann::ordered_json summary = nlohmann::ordered_json::array();
    for (const std::string& key : order) {
        const std::vector<double>& v = grouped[key];
        double mean = 0.0;
        for (double x : v) mean += x;
        mean /= static_cast<double>(v.size());
        double var = 0.0;
        for (double x : v) var += (x - mean) * (x - mean);
        const double sd = v.size() > 1 ? std::sqrt(var / static_cast<double>(v.size() - 1)) : 0.0;
        const CellResult* e = exemplar[key];
        summary.push_back({{"estimator", e->estimator},
                           {"neighbors", e->neighbors},
                           {"rho", e->rho},
                           {"tau_frac", e->tau_frac},
                           {"rmse_mean", mean},
                           {"rmse_sd", sd},
                           {"replications", v.size()}});
    }
    j["summary"] = std::move(summary);

    nlohmann::ordered_json secs;
    for (const auto& [name, s] : report.estimator_seconds)
        secs[name] = redact_timing ? 0.0 : s;
    j["estimator_seconds"] = std::move(secs);
    return j;
}

inline void write_report_json(const RunReport& report, const std::string& path,
                              bool redact_timing = false) {
    std::ofstream out(path);
    if (!out) throw io_error("cannot write report JSON: " + path);
    out << report_json(report, redact_timing).dump(2) << '\n';
    if (!out.good()) throw io_error("failed writing report JSON: " + path);
}

}  // namespace arw
