// Command line front end around the library: local estimates at a query
// point, standalone worst-case solves, the benchmark harness, and synthetic
// data generation. Plain text output by default, --json for machines; no
// color is ever emitted, so NO_COLOR holds trivially.
//
// Exit codes: 0 success, 1 numeric or data failure, 2 usage error.

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "arw/arw.hpp"
#include "arw/report_io.hpp"

namespace {

using nlohmann::ordered_json;

std::vector<double> parse_query(const std::string& text) {
    std::vector<double> out;
    size_t pos = 0;
    while (pos <= text.size()) {
        size_t comma = text.find(',', pos);
        if (comma == std::string::npos) comma = text.size();
        std::string cell = text.substr(pos, comma - pos);
        const size_t a = cell.find_first_not_of(" \t");
        const size_t b = cell.find_last_not_of(" \t");
        if (a == std::string::npos) throw arw::invalid_input_error("empty --query coordinate");
        cell = cell.substr(a, b - a + 1);
        double v = 0.0;
        const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
        if (res.ec != std::errc{} || res.ptr != cell.data() + cell.size())
            throw arw::invalid_input_error("cannot parse --query coordinate '" + cell + "'");
        out.push_back(v);
        pos = comma + 1;
        if (comma == text.size()) break;
    }
    return out;
}

std::string last_header_column(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw arw::io_error("cannot open dataset file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw arw::io_error("empty dataset file: " + path);
    const size_t comma = line.find_last_of(',');
    std::string name = comma == std::string::npos ? line : line.substr(comma + 1);
    while (!name.empty() && (name.back() == '\r' || name.back() == ' ')) name.pop_back();
    return name;
}

arw::Dataset load_dataset(const std::string& path, std::string response_col) {
    if (response_col.empty()) response_col = last_header_column(path);
    return arw::load_csv(path, response_col);
}

void emit(const ordered_json& doc, bool as_json) {
    if (as_json) {
        std::cout << doc.dump(2) << '\n';
        return;
    }
    for (const auto& [key, value] : doc.items()) {
        if (value.is_number_float())
            std::printf("%s %.17g\n", key.c_str(), value.get<double>());
        else if (value.is_string())
            std::printf("%s %s\n", key.c_str(), value.get<std::string>().c_str());
        else
            std::printf("%s %s\n", key.c_str(), value.dump().c_str());
    }
}

// ---------------------------------------------------------------------- //

struct EstimateArgs {
    std::string data;
    std::string response_col;
    std::string query;
    std::string estimator = "nw";
    std::string kernel = "gaussian";
    double bandwidth2 = 1.0;
    int neighbors = 50;
    double rho = 0.1;
    bool json = false;
};

int run_estimate(const EstimateArgs& a) {
    const arw::Dataset data = load_dataset(a.data, a.response_col);
    const std::vector<double> z0 = parse_query(a.query);
    if (static_cast<int>(z0.size()) != data.cols())
        throw arw::invalid_input_error("--query has " + std::to_string(z0.size()) +
                                       " coordinates but the dataset has " +
                                       std::to_string(data.cols()) + " features");

    const arw::KernelSpec kspec{arw::kernel_family_from_name(a.kernel), a.bandwidth2, std::nullopt};
    const std::vector<int> nbr = arw::knn_neighbors(data.features, z0, a.neighbors);

    arw::LocalSample sample;
    sample.center = z0;
    for (int i : nbr) {
        sample.points.push_back(data.features[i]);
        sample.responses.push_back(data.responses[i]);
    }
    sample.weights = arw::kernel_weights(kspec, z0, sample.points);

    ordered_json out;
    out["estimator"] = a.estimator;
    out["neighbors"] = a.neighbors;
    out["bandwidth2"] = a.bandwidth2;

    if (a.estimator == "nw") {
        out["prediction"] = arw::nw_estimate(sample);
    } else if (a.estimator == "llr") {
        out["prediction"] = arw::llr_estimate(sample).prediction;
    } else if (a.estimator == "llr-i") {
        out["prediction"] = arw::llr_intercept(sample);
    } else if (a.estimator == "nw-logdet" || a.estimator == "nw-buresw") {
        const arw::detail::NeighborhoodDedup dedup = arw::detail::dedup_neighborhood(sample.points);
        arw::LocalSample robust_sample;
        robust_sample.center = z0;
        std::vector<double> group_mean(dedup.heads.size(), 0.0);
        std::vector<int> group_size(dedup.heads.size(), 0);
        for (int i = 0; i < sample.count(); ++i) {
            const int slot = static_cast<int>(
                std::find(dedup.heads.begin(), dedup.heads.end(), dedup.representative_of[i]) -
                dedup.heads.begin());
            group_mean[slot] += sample.responses[i];
            ++group_size[slot];
        }
        for (size_t g = 0; g < group_mean.size(); ++g) group_mean[g] /= group_size[g];
        for (int h : dedup.heads) robust_sample.points.push_back(sample.points[h]);
        robust_sample.responses = group_mean;

        const arw::NominalWeights nominal = arw::gram_nominal(kspec, z0, robust_sample.points);
        robust_sample.weights = nominal.weights;
        const arw::DivergenceKind kind = a.estimator == "nw-logdet"
                                             ? arw::DivergenceKind::LogDet
                                             : arw::DivergenceKind::BuresW;
        const arw::RobustScalarFit fit =
            arw::robust_nw(robust_sample, nominal, arw::UncertaintySpec{kind, a.rho});
        out["prediction"] = fit.beta;
        out["rho"] = a.rho;
        out["divergence"] = arw::divergence_name(kind);
        out["objective"] = fit.objective;
        out["gamma"] = std::isfinite(fit.inner.gamma_star) ? ordered_json(fit.inner.gamma_star)
                                                           : ordered_json("inf");
        out["outer_iterations"] = static_cast<int>(fit.trace.iterations.size());
        out["outer_converged"] = fit.trace.converged;
        if (dedup.any) out["collapsed_duplicates"] = true;
        if (nominal.jitter_applied) out["gram_jitter_applied"] = true;
    } else {
        throw arw::invalid_input_error("unknown estimator '" + a.estimator + "'");
    }
    emit(out, a.json);
    return 0;
}

// ---------------------------------------------------------------------- //

struct WorstCaseArgs {
    std::string input;
    std::optional<double> rho;
    std::optional<std::string> divergence;
    bool json = false;
};

int run_worst_case(const WorstCaseArgs& a) {
    std::ifstream in(a.input);
    if (!in) throw arw::io_error("cannot open problem file: " + a.input);
    ordered_json doc;
    try {
        in >> doc;
    } catch (const std::exception& e) {
        throw arw::io_error("cannot parse problem file " + a.input + ": " + e.what());
    }
    if (!doc.contains("omega_hat") || !doc.contains("losses"))
        throw arw::io_error("problem file needs 'omega_hat' and 'losses' fields");

    const auto rows = doc["omega_hat"].get<std::vector<std::vector<double>>>();
    const arw::SymmetricMatrix omega_hat = arw::SymmetricMatrix::from_rows(rows);
    const auto losses = doc["losses"].get<std::vector<double>>();

    double rho = a.rho ? *a.rho : doc.value("rho", 0.1);
    std::string div_name =
        a.divergence ? *a.divergence : doc.value("divergence", std::string("logdet"));
    const arw::DivergenceKind kind = arw::divergence_from_name(div_name);

    const arw::ArrowheadLoss v = arw::ArrowheadLoss::from_losses(losses);
    const arw::WorstCaseSolution sol = arw::worst_case(omega_hat, v, arw::UncertaintySpec{kind, rho});

    const arw::SpectralFactorization spec = arw::spectral(sol.omega_star);
    const double min_eig = spec.eigenvalues.back();
    const double direct = kind == arw::DivergenceKind::LogDet
                              ? arw::logdet_divergence(sol.omega_star, omega_hat)
                              : arw::bures_divergence(sol.omega_star, omega_hat);

    ordered_json out;
    out["value"] = sol.value;
    out["gamma"] = std::isfinite(sol.gamma_star) ? ordered_json(sol.gamma_star)
                                                 : ordered_json("inf");
    out["iterations"] = sol.iterations;
    out["residual"] = sol.residual;
    out["divergence"] = arw::divergence_name(kind);
    out["rho"] = rho;
    out["divergence_value"] = sol.divergence_value;
    out["feasibility_gap"] = direct - rho;
    out["min_entry"] = sol.omega_star.min_entry();
    out["min_eigenvalue"] = min_eig;
    emit(out, a.json);
    return 0;
}

// ---------------------------------------------------------------------- //

struct BenchArgs {
    std::string data;
    std::string response_col;
    std::string synthetic;
    int rows = 2050;
    int dim = 4;
    double noise_sd = 0.1;
    uint64_t data_seed = 7;

    int train = 1200;
    int val = 50;
    int test = 800;
    std::string kernel = "gaussian";
    std::vector<int> neighbors{50};
    std::vector<std::string> estimators{"nw", "llr", "llr-i", "nw-logdet", "nw-buresw"};
    std::vector<double> rho_grid{0.01, 0.1, 1.0, 10.0};
    std::vector<double> tau_fracs{0.0, 0.2, 0.4, 0.6, 0.8, 1.0};
    double kappa_min = 1.8;
    double kappa_max = 2.2;
    int replications = 10;
    uint64_t seed = 0;
    int threads = 0;
    std::string out_dir = "bench-out";
    bool redact_timing = false;
};

int run_bench(const BenchArgs& a) {
    arw::ExperimentConfig cfg;
    if (!a.data.empty()) {
        cfg.dataset = load_dataset(a.data, a.response_col);
    } else {
        cfg.dataset = arw::synthetic_dataset(arw::synthetic_kind_from_name(a.synthetic), a.rows, a.dim,
                                             a.noise_sd, a.data_seed);
    }
    cfg.split = {a.train, a.val, a.test};
    cfg.kernel = arw::kernel_family_from_name(a.kernel);
    cfg.neighbor_grid = a.neighbors;
    cfg.estimators = a.estimators;
    cfg.rho_grid = a.rho_grid;
    cfg.tau_fracs = a.tau_fracs;
    cfg.kappa_min = a.kappa_min;
    cfg.kappa_max = a.kappa_max;
    cfg.replications = a.replications;
    cfg.seed = a.seed;
    cfg.threads = a.threads;

    const arw::RunReport report = arw::run_experiment(cfg);

    std::filesystem::create_directories(a.out_dir);
    const std::string csv_path = a.out_dir + "/report.csv";
    const std::string json_path = a.out_dir + "/report.json";
    arw::write_report_csv(report, csv_path, a.redact_timing);
    arw::write_report_json(report, json_path, a.redact_timing);

    std::printf("dataset %s (%d rows, %d features)\n", report.dataset_name.c_str(), report.rows,
                report.cols);
    for (const auto& [est, secs] : report.estimator_seconds)
        std::printf("estimator %-10s %10.3f s\n", est.c_str(), secs);
    std::printf("wrote %s\nwrote %s\n", csv_path.c_str(), json_path.c_str());
    return 0;
}

// ---------------------------------------------------------------------- //

struct GenDataArgs {
    std::string kind = "sinusoid";
    int rows = 2050;
    int dim = 4;
    double noise_sd = 0.1;
    uint64_t seed = 7;
    std::string out;
};

int run_gen_data(const GenDataArgs& a) {
    const arw::Dataset d =
        arw::synthetic_dataset(arw::synthetic_kind_from_name(a.kind), a.rows, a.dim, a.noise_sd, a.seed);
    arw::write_csv(d, a.out);
    std::printf("wrote %s (%d rows, %d features)\n", a.out.c_str(), d.rows(), d.cols());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"adversarially reweighted kernel regression"};
    app.require_subcommand(1);
    app.set_config("--config", "", "read options from a key=value file");

    EstimateArgs est;
    CLI::App* cmd_est = app.add_subcommand("estimate", "local estimate at a query point");
    cmd_est->add_option("--data", est.data, "CSV dataset")->required();
    cmd_est->add_option("--response-col", est.response_col,
                        "response column name (default: last column)");
    cmd_est->add_option("--query", est.query, "comma separated query point")->required();
    cmd_est->add_option("--estimator", est.estimator,
                        "nw | llr | llr-i | nw-logdet | nw-buresw");
    cmd_est->add_option("--kernel", est.kernel,
                        "gaussian | laplacian | cauchy | rational-quadratic");
    cmd_est->add_option("--bandwidth2", est.bandwidth2, "squared bandwidth");
    cmd_est->add_option("--neighbors", est.neighbors, "neighborhood size");
    cmd_est->add_option("--rho", est.rho, "uncertainty radius (robust estimators)");
    cmd_est->add_flag("--json", est.json, "JSON output");

    WorstCaseArgs wc;
    CLI::App* cmd_wc = app.add_subcommand("worst-case", "solve one worst-case reweighting");
    cmd_wc->add_option("--input", wc.input, "JSON problem file with omega_hat and losses")
        ->required();
    double wc_rho = 0.0;
    std::string wc_div;
    cmd_wc->add_option("--rho", wc_rho, "uncertainty radius (overrides the file)");
    cmd_wc->add_option("--divergence", wc_div, "logdet | buresw (overrides the file)");
    cmd_wc->add_flag("--json", wc.json, "JSON output");

    BenchArgs bn;
    CLI::App* cmd_bn = app.add_subcommand("bench", "run the benchmark harness");
    cmd_bn->add_option("--data", bn.data, "CSV dataset (omit to use --synthetic)");
    cmd_bn->add_option("--response-col", bn.response_col,
                       "response column name (default: last column)");
    cmd_bn->add_option("--synthetic", bn.synthetic, "linear | sinusoid | piecewise")
        ->default_val("sinusoid");
    cmd_bn->add_option("--rows", bn.rows, "synthetic rows");
    cmd_bn->add_option("--dim", bn.dim, "synthetic feature count");
    cmd_bn->add_option("--noise-sd", bn.noise_sd, "synthetic noise level");
    cmd_bn->add_option("--data-seed", bn.data_seed, "synthetic data seed");
    cmd_bn->add_option("--train", bn.train, "training rows");
    cmd_bn->add_option("--val", bn.val, "validation rows");
    cmd_bn->add_option("--test", bn.test, "test rows");
    cmd_bn->add_option("--kernel", bn.kernel, "kernel family");
    cmd_bn->add_option("--neighbors", bn.neighbors, "neighborhood sizes")->delimiter(',');
    cmd_bn->add_option("--estimators", bn.estimators, "estimators to run")->delimiter(',');
    cmd_bn->add_option("--rho", bn.rho_grid, "uncertainty radii")->delimiter(',');
    cmd_bn->add_option("--tau-frac", bn.tau_fracs, "perturbed neighbor fractions")->delimiter(',');
    cmd_bn->add_option("--kappa-min", bn.kappa_min, "perturbation factor lower bound");
    cmd_bn->add_option("--kappa-max", bn.kappa_max, "perturbation factor upper bound");
    cmd_bn->add_option("--replications", bn.replications, "replication count");
    cmd_bn->add_option("--seed", bn.seed, "experiment seed");
    cmd_bn->add_option("--threads", bn.threads, "worker threads (0 = all cores)");
    cmd_bn->add_option("--out-dir", bn.out_dir, "output directory");
    cmd_bn->add_flag("--redact-timing", bn.redact_timing,
                     "zero out timing fields for byte-stable reports");

    GenDataArgs gd;
    CLI::App* cmd_gd = app.add_subcommand("gen-data", "write a synthetic CSV dataset");
    cmd_gd->add_option("--kind", gd.kind, "linear | sinusoid | piecewise");
    cmd_gd->add_option("--rows", gd.rows, "row count");
    cmd_gd->add_option("--dim", gd.dim, "feature count");
    cmd_gd->add_option("--noise-sd", gd.noise_sd, "noise level");
    cmd_gd->add_option("--seed", gd.seed, "generator seed");
    cmd_gd->add_option("--out", gd.out, "output CSV path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    if (cmd_wc->parsed()) {
        if (cmd_wc->count("--rho")) wc.rho = wc_rho;
        if (cmd_wc->count("--divergence")) wc.divergence = wc_div;
    }

    try {
        if (cmd_est->parsed()) return run_estimate(est);
        if (cmd_wc->parsed()) return run_worst_case(wc);
        if (cmd_bn->parsed()) return run_bench(bn);
        if (cmd_gd->parsed()) return run_gen_data(gd);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 2;
}
