#pragma once

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "arw/errors.hpp"
#include "arw/rng.hpp"

namespace arw {

struct Dataset {
    std::string name;
    std::vector<std::string> feature_names;
    std::string response_name;
    std::vector<std::vector<double>> features;  // row major
    std::vector<double> responses;
    int dropped_rows = 0;  // rows rejected for missing / non-finite cells

    int rows() const { return static_cast<int>(features.size()); }
    int cols() const { return features.empty() ? 0 : static_cast<int>(features.front().size()); }
};

namespace detail {

inline std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
    if (!line.empty() && line.back() == ',') out.push_back("");
    return out;
}

// Parses a numeric cell. Returns false for a missing value (empty or a nan
// token); throws for anything else non-numeric.
inline bool parse_cell(const std::string& cell, double& out, int line_no) {
    if (cell.empty() || cell == "nan" || cell == "NaN" || cell == "NA") return false;
    const char* begin = cell.data();
    const char* end = begin + cell.size();
    auto [ptr, ec] = std::from_chars(begin, end, out);
    if (ec != std::errc() || ptr != end)
        throw io_error("CSV line " + std::to_string(line_no) + ": cell '" + cell +
                       "' is not numeric");
    if (!std::isfinite(out)) return false;
    return true;
}

}  // namespace detail

/// Loads a numeric CSV with a header row. The named response column becomes
/// the response; every other column is a feature. Rows with missing or
/// non-finite cells are dropped and counted in dropped_rows.
inline Dataset load_csv(const std::string& path, const std::string& response_col) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open dataset file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw io_error("empty dataset file: " + path);

    Dataset d;
    d.name = path;
    d.response_name = response_col;
    const std::vector<std::string> header = detail::split_csv_line(line);
    int response_idx = -1;
    for (int i = 0; i < static_cast<int>(header.size()); ++i) {
        if (header[i] == response_col) {
            response_idx = i;
        } else {
            d.feature_names.push_back(header[i]);
        }
    }
    if (response_idx < 0)
        throw io_error("response column '" + response_col + "' not found in " + path);
    if (header.size() < 2) throw io_error("dataset needs at least one feature column: " + path);

    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        const std::vector<std::string> cells = detail::split_csv_line(line);
        if (cells.size() != header.size())
            throw io_error("CSV line " + std::to_string(line_no) + ": expected " +
                           std::to_string(header.size()) + " cells, got " +
                           std::to_string(cells.size()));
        std::vector<double> row;
        row.reserve(header.size() - 1);
        double y = 0.0;
        bool ok = true;
        for (int i = 0; i < static_cast<int>(cells.size()) && ok; ++i) {
            double v = 0.0;
            ok = detail::parse_cell(cells[i], v, line_no);
            if (!ok) break;
            if (i == response_idx) {
                y = v;
            } else {
                row.push_back(v);
            }
        }
        if (!ok) {
            ++d.dropped_rows;
            continue;
        }
        d.features.push_back(std::move(row));
        d.responses.push_back(y);
    }
    if (d.features.empty()) throw io_error("dataset has no complete rows: " + path);
    return d;
}

enum class SyntheticKind { Linear, Sinusoid, Piecewise };

inline const char* synthetic_kind_name(SyntheticKind k) {
    switch (k) {
        case SyntheticKind::Linear: return "linear";
        case SyntheticKind::Sinusoid: return "sinusoid";
        case SyntheticKind::Piecewise: return "piecewise";
    }
    return "?";
}

inline SyntheticKind synthetic_kind_from_name(const std::string& name) {
    for (SyntheticKind k :
         {SyntheticKind::Linear, SyntheticKind::Sinusoid, SyntheticKind::Piecewise})
        if (name == synthetic_kind_name(k)) return k;
    throw invalid_input_error("unknown synthetic generator: " + name);
}

/// Seeded synthetic regression data. Features are iid standard normal.
///   linear:    y = a0 + a.x + noise
///   sinusoid:  y = 2 + sin(w.x + phase) + noise          (positive responses)
///   piecewise: y = 0.5 + c1 x0 [x0 > 0] - c2 x0 [x0 <= 0] + noise  (positive)
inline Dataset synthetic_dataset(SyntheticKind kind, int rows, int dim, double noise_sd,
                                 uint64_t seed) {
    if (rows < 1 || dim < 1) throw invalid_input_error("synthetic_dataset: rows/dim must be >= 1");
    if (noise_sd < 0.0 || !std::isfinite(noise_sd))
        throw invalid_input_error("synthetic_dataset: bad noise_sd");
    Rng root(seed);
    Rng coef_rng = root.fork(1);
    Rng x_rng = root.fork(2);
    Rng noise_rng = root.fork(3);

    std::vector<double> slope(dim);
    double intercept = 0.0, phase = 0.0, c1 = 0.0, c2 = 0.0;
    switch (kind) {
        case SyntheticKind::Linear:
            intercept = coef_rng.uniform(-1.0, 1.0);
            for (double& a : slope) a = coef_rng.uniform(-2.0, 2.0);
            break;
        case SyntheticKind::Sinusoid:
            for (double& a : slope) a = coef_rng.uniform(0.5, 1.5);
            phase = coef_rng.uniform(0.0, 2.0 * std::numbers::pi);
            break;
        case SyntheticKind::Piecewise:
            c1 = coef_rng.uniform(0.5, 1.5);
            c2 = coef_rng.uniform(0.5, 1.5);
            break;
    }

    Dataset d;
    d.name = std::string("synthetic-") + synthetic_kind_name(kind);
    d.response_name = "y";
    for (int j = 0; j < dim; ++j) d.feature_names.push_back("x" + std::to_string(j + 1));
    d.features.resize(rows);
    d.responses.resize(rows);
    for (int i = 0; i < rows; ++i) {
        std::vector<double>& x = d.features[i];
        x.resize(dim);
        for (int j = 0; j < dim; ++j) x[j] = x_rng.normal();
        double y = 0.0;
        switch (kind) {
            case SyntheticKind::Linear: {
                y = intercept;
                for (int j = 0; j < dim; ++j) y += slope[j] * x[j];
                break;
            }
            case SyntheticKind::Sinusoid: {
                double arg = phase;
                for (int j = 0; j < dim; ++j) arg += slope[j] * x[j];
                y = 2.0 + std::sin(arg);
                break;
            }
            case SyntheticKind::Piecewise: {
                y = 0.5 + (x[0] > 0.0 ? c1 * x[0] : -c2 * x[0]);
                break;
            }
        }
        d.responses[i] = y + noise_sd * noise_rng.normal();
    }
    return d;
}

/// Writes a dataset as CSV with full double round-trip precision.
inline void write_csv(const Dataset& d, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw io_error("cannot write dataset file: " + path);
    for (const auto& n : d.feature_names) out << n << ',';
    out << d.response_name << '\n';
    char buf[64];
    for (int i = 0; i < d.rows(); ++i) {
        for (double v : d.features[i]) {
            std::snprintf(buf, sizeof buf, "%.17g", v);
            out << buf << ',';
        }
        std::snprintf(buf, sizeof buf, "%.17g", d.responses[i]);
        out << buf << '\n';
    }
    if (!out.good()) throw io_error("failed writing dataset file: " + path);
}

}  // namespace arw
