#pragma once

#include "ttc/observation.hpp"
#include "ttc/solver_common.hpp"
#include "ttc/tensor.hpp"
#include "ttc/tt_tensor.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <iomanip>
#include <sstream>

namespace ttc {

inline constexpr int kReportSchemaVersion = 1;

namespace detail {

inline std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::invalid_argument("cannot open for writing: " + path);
    out << std::setprecision(17);
    return out;
}

inline std::ifstream open_in(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open for reading: " + path);
    return in;
}

[[noreturn]] inline void parse_fail(const std::string& path, std::size_t line,
                                    const std::string& what) {
    throw std::invalid_argument(path + ": line " + std::to_string(line) + ": " + what);
}

inline double parse_double(const std::string& token, const std::string& path, std::size_t line) {
    double v = 0;
    std::size_t used = 0;
    bool ok = true;
    try {
        v = std::stod(token, &used);
    } catch (...) {
        ok = false;
    }
    if (!ok || used != token.size())
        parse_fail(path, line, "expected a number, got '" + token + "'");
    return v;
}

inline long long parse_int(const std::string& token, const std::string& path, std::size_t line) {
    long long v = 0;
    std::size_t used = 0;
    bool ok = true;
    try {
        v = std::stoll(token, &used);
    } catch (...) {
        ok = false;
    }
    if (!ok || used != token.size())
        parse_fail(path, line, "expected an integer, got '" + token + "'");
    return v;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) fields.push_back(field);
    return fields;
}

}  // namespace detail

/// Dense tensor text file: header "K d_1 ... d_K", then one value per line
/// in row-major order.
inline void write_dense_text(const DenseTensor& x, const std::string& path) {
    auto out = detail::open_out(path);
    out << x.shape().order();
    for (Index d : x.shape().dims()) out << ' ' << d;
    out << '\n';
    for (Eigen::Index i = 0; i < x.values().size(); ++i) out << x.values()[i] << '\n';
}

inline DenseTensor read_dense_text(const std::string& path, std::uint64_t cap = kDefaultDenseCap) {
    auto in = detail::open_in(path);
    std::string line;
    if (!std::getline(in, line)) detail::parse_fail(path, 1, "missing header");
    std::stringstream header(line);
    long long order = 0;
    if (!(header >> order) || order < 2) detail::parse_fail(path, 1, "bad tensor order");
    std::vector<Index> dims;
    for (long long k = 0; k < order; ++k) {
        long long d = 0;
        if (!(header >> d) || d < 1) detail::parse_fail(path, 1, "bad mode extent");
        dims.push_back(d);
    }
    Shape shape(dims);
    if (shape.num_elements() > cap)
        throw CapExceededError("read_dense_text: tensor exceeds the dense cap");
    Vector values(static_cast<Eigen::Index>(shape.num_elements()));
    for (Eigen::Index i = 0; i < values.size(); ++i) {
        if (!std::getline(in, line))
            detail::parse_fail(path, static_cast<std::size_t>(i) + 2, "missing value");
        values[i] = detail::parse_double(line, path, static_cast<std::size_t>(i) + 2);
    }
    return DenseTensor(shape, std::move(values), cap);
}

/// TT checkpoint: header "K", then for each core a line "I_k R_{k-1} R_k"
/// followed by the core values in row-major (i, r_left, r_right) order.
inline void write_tt_checkpoint(const TTTensor& tt, const std::string& path) {
    auto out = detail::open_out(path);
    out << tt.order() << '\n';
    for (Index c = 0; c < tt.order(); ++c) {
        out << tt.shape().dim(c) << ' ' << tt.rank(c) << ' ' << tt.rank(c + 1) << '\n';
        Vector v = tt.core_vec(c);
        for (Eigen::Index i = 0; i < v.size(); ++i) out << v[i] << '\n';
    }
}

inline TTTensor read_tt_checkpoint(const std::string& path) {
    auto in = detail::open_in(path);
    std::string line;
    std::size_t lineno = 1;
    if (!std::getline(in, line)) detail::parse_fail(path, lineno, "missing header");
    long long order = detail::parse_int(line, path, lineno);
    if (order < 2) detail::parse_fail(path, lineno, "tensor order must be at least 2");
    std::vector<Index> dims, left_ranks, right_ranks;
    std::vector<Vector> cores;
    for (long long c = 0; c < order; ++c) {
        ++lineno;
        if (!std::getline(in, line)) detail::parse_fail(path, lineno, "missing core header");
        std::stringstream header(line);
        long long dim = 0, r1 = 0, r2 = 0;
        if (!(header >> dim >> r1 >> r2) || dim < 1 || r1 < 1 || r2 < 1)
            detail::parse_fail(path, lineno, "bad core header");
        dims.push_back(dim);
        left_ranks.push_back(r1);
        right_ranks.push_back(r2);
        Vector v(dim * r1 * r2);
        for (Eigen::Index i = 0; i < v.size(); ++i) {
            ++lineno;
            if (!std::getline(in, line)) detail::parse_fail(path, lineno, "missing core value");
            v[i] = detail::parse_double(line, path, lineno);
        }
        cores.push_back(std::move(v));
    }
    if (left_ranks.front() != 1 || right_ranks.back() != 1)
        detail::parse_fail(path, lineno, "boundary ranks must be 1");
    for (long long c = 0; c + 1 < order; ++c)
        if (right_ranks[static_cast<std::size_t>(c)] != left_ranks[static_cast<std::size_t>(c + 1)])
            detail::parse_fail(path, lineno, "adjacent cores disagree on the shared rank");
    TTTensor tt(Shape(dims), {right_ranks.begin(), right_ranks.end() - 1});
    for (long long c = 0; c < order; ++c)
        tt.set_core_from_vec(c, cores[static_cast<std::size_t>(c)]);
    return tt;
}

/// Observation CSV: header "i1,...,iK,y", one observation per row with
/// 0-based indices.
inline void write_observations_csv(const ObservationSet& obs, const std::string& path) {
    auto out = detail::open_out(path);
    for (Index k = 0; k < obs.shape.order(); ++k) out << 'i' << (k + 1) << ',';
    out << "y\n";
    for (Index i = 0; i < obs.n(); ++i) {
        for (Index v : obs.indices[static_cast<std::size_t>(i)]) out << v << ',';
        out << obs.values[i] << '\n';
    }
}

inline ObservationSet read_observations_csv(const std::string& path, const Shape& shape) {
    auto in = detail::open_in(path);
    std::string line;
    std::size_t lineno = 1;
    if (!std::getline(in, line)) detail::parse_fail(path, lineno, "missing header line");
    if (detail::split_csv_line(line).size() != static_cast<std::size_t>(shape.order()) + 1)
        detail::parse_fail(path, lineno, "header column count does not match tensor order");
    std::vector<MultiIndex> indices;
    std::vector<double> values;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        auto fields = detail::split_csv_line(line);
        if (fields.size() != static_cast<std::size_t>(shape.order()) + 1)
            detail::parse_fail(path, lineno, "expected " + std::to_string(shape.order() + 1) +
                                                 " columns, got " + std::to_string(fields.size()));
        MultiIndex idx;
        for (Index k = 0; k < shape.order(); ++k) {
            long long v = detail::parse_int(fields[static_cast<std::size_t>(k)], path, lineno);
            if (v < 0 || v >= shape.dim(k)) detail::parse_fail(path, lineno, "index out of range");
            idx.push_back(v);
        }
        indices.push_back(std::move(idx));
        values.push_back(detail::parse_double(fields.back(), path, lineno));
    }
    if (indices.empty()) throw std::invalid_argument(path + ": no observations");
    return ObservationSet(shape, std::move(indices),
                          Eigen::Map<Vector>(values.data(), static_cast<Eigen::Index>(values.size())));
}

/// Single-column numeric time series, optional header.
inline std::vector<double> read_series_csv(const std::string& path) {
    auto in = detail::open_in(path);
    std::vector<double> series;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        try {
            std::size_t used = 0;
            double v = std::stod(line, &used);
            if (used != line.size()) throw std::invalid_argument("trailing");
            series.push_back(v);
        } catch (...) {
            if (lineno == 1) continue;  // header
            detail::parse_fail(path, lineno, "expected a number, got '" + line + "'");
        }
    }
    if (series.empty()) throw std::invalid_argument(path + ": no numeric values");
    return series;
}

inline nlohmann::json report_to_json(const SolverReport& report) {
    return nlohmann::json{{"schema_version", kReportSchemaVersion},
                          {"solver", report.solver},
                          {"iterations", report.iterations},
                          {"wall_seconds", report.wall_seconds},
                          {"converged", report.converged},
                          {"objective", report.objective},
                          {"residual", report.residual},
                          {"rel_change", report.rel_change}};
}

inline void write_report_json(const SolverReport& report, const std::string& path) {
    auto out = detail::open_out(path);
    out << report_to_json(report).dump(2) << '\n';
}

}  // namespace ttc
