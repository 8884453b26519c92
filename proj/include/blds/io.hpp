#pragma once

#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "estimate.hpp"
#include "features.hpp"
#include "moments.hpp"
#include "simulate.hpp"
#include "stability.hpp"
#include "types.hpp"

namespace blds::io {

using json = nlohmann::json;

/// Shortest decimal string that round-trips to the same double.
inline std::string format_double(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    if (ec != std::errc{}) throw std::runtime_error("format_double: conversion failed");
    return std::string(buf, ptr);
}

inline double parse_double(std::string_view s) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size())
        throw ConfigError("cannot parse number '" + std::string(s) + "'");
    return v;
}

/// Row-major nesting: an array of rows.
inline json matrix_to_json(const Matrix& M) {
    json rows = json::array();
    for (Index i = 0; i < M.rows(); ++i) {
        json row = json::array();
        for (Index j = 0; j < M.cols(); ++j) row.push_back(M(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline Matrix matrix_from_json(const json& j, Index rows, Index cols, const std::string& what) {
    if (!j.is_array() || static_cast<Index>(j.size()) != rows)
        throw ConfigError(what + ": expected " + std::to_string(rows) + " rows");
    Matrix M(rows, cols);
    for (Index i = 0; i < rows; ++i) {
        const json& row = j[static_cast<std::size_t>(i)];
        if (!row.is_array() || static_cast<Index>(row.size()) != cols)
            throw ConfigError(what + ": row " + std::to_string(i) + " must have " + std::to_string(cols) + " entries");
        for (Index c = 0; c < cols; ++c) M(i, c) = row[static_cast<std::size_t>(c)].get<double>();
    }
    return M;
}

/// {n, p, m, A: [p+1 matrices], B, C, D}.
inline json system_to_json(const SystemParams& sys) {
    json j;
    j["n"] = sys.dims.n;
    j["p"] = sys.dims.p;
    j["m"] = sys.dims.m;
    json A = json::array();
    for (const auto& Ak : sys.A) A.push_back(matrix_to_json(Ak));
    j["A"] = std::move(A);
    j["B"] = matrix_to_json(sys.B);
    j["C"] = matrix_to_json(sys.C);
    j["D"] = matrix_to_json(sys.D);
    return j;
}

inline SystemParams system_from_json(const json& j) {
    try {
        SystemParams sys;
        sys.dims = Dims{j.at("n").get<int>(), j.at("p").get<int>(), j.at("m").get<int>()};
        sys.dims.validate();
        const auto [n, p, m] = sys.dims;
        const json& A = j.at("A");
        if (!A.is_array() || static_cast<int>(A.size()) != p + 1)
            throw ConfigError("system: A must list p+1 matrices");
        for (int k = 0; k <= p; ++k)
            sys.A.push_back(matrix_from_json(A[static_cast<std::size_t>(k)], n, n, "system.A[" + std::to_string(k) + "]"));
        sys.B = matrix_from_json(j.at("B"), n, p, "system.B");
        sys.C = matrix_from_json(j.at("C"), m, n, "system.C");
        sys.D = matrix_from_json(j.at("D"), m, p, "system.D");
        sys.validate();
        return sys;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("system JSON: ") + e.what());
    }
}

/// {m, p, L, d, G}.
inline json markov_to_json(const MarkovParams& mp) {
    json j;
    j["m"] = mp.G.rows();
    j["p"] = mp.cfg.p;
    j["L"] = mp.cfg.L;
    j["d"] = mp.cfg.dim();
    j["G"] = matrix_to_json(mp.G);
    return j;
}

inline MarkovParams markov_from_json(const json& j) {
    try {
        MarkovParams mp;
        mp.cfg = FeatureConfig{j.at("L").get<int>(), j.at("p").get<int>()};
        mp.cfg.validate();
        mp.G = matrix_from_json(j.at("G"), j.at("m").get<Index>(), mp.cfg.dim(), "markov.G");
        return mp;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("markov JSON: ") + e.what());
    }
}

inline json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open '" + path + "'");
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError("'" + path + "': " + e.what());
    }
}

inline void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write '" + path + "'");
    out << content;
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// ---------------------------------------------------------------------------
// Trajectory CSV. Columns, in order:
//   t, u1..up, y1..ym                       always
//   x1..xn, w1..wn, z1..zm                  when states are included
// ---------------------------------------------------------------------------

inline std::string trajectory_to_csv(const Trajectory& tr, bool include_states) {
    std::ostringstream out;
    auto header = [&](char name, Index count) {
        for (Index i = 1; i <= count; ++i) out << ',' << name << i;
    };
    out << 't';
    header('u', tr.u.cols());
    header('y', tr.y.cols());
    if (include_states) {
        header('x', tr.x.cols());
        header('w', tr.w.cols());
        header('z', tr.z.cols());
    }
    out << '\n';
    auto row = [&](const Matrix& M, Index t) {
        for (Index j = 0; j < M.cols(); ++j) out << ',' << format_double(M(t, j));
    };
    for (Index t = 0; t < tr.u.rows(); ++t) {
        out << t;
        row(tr.u, t);
        row(tr.y, t);
        if (include_states) {
            row(tr.x, t);
            row(tr.w, t);
            row(tr.z, t);
        }
        out << '\n';
    }
    return out.str();
}

namespace detail {

inline std::vector<std::string> split(std::string_view line, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (;;) {
        const auto pos = line.find(sep, start);
        out.emplace_back(line.substr(start, pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

}  // namespace detail

inline Trajectory trajectory_from_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line) && (line.empty() || line[0] == '#')) {
    }
    const auto head = detail::split(line, ',');
    if (head.empty() || head[0] != "t") throw ConfigError("trajectory CSV: first column must be 't'");
    Index count[256] = {};
    std::vector<char> kinds;
    for (std::size_t c = 1; c < head.size(); ++c) {
        if (head[c].empty()) throw ConfigError("trajectory CSV: empty header cell");
        const char k = head[c][0];
        if (std::string("uyxwz").find(k) == std::string::npos)
            throw ConfigError("trajectory CSV: unknown column '" + head[c] + "'");
        ++count[static_cast<unsigned char>(k)];
        kinds.push_back(k);
    }
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        const auto cells = detail::split(line, ',');
        if (cells.size() != head.size()) throw ConfigError("trajectory CSV: ragged row");
        std::vector<double> r;
        for (std::size_t c = 1; c < cells.size(); ++c) r.push_back(parse_double(cells[c]));
        rows.push_back(std::move(r));
    }
    const Index T1 = static_cast<Index>(rows.size());
    Trajectory tr;
    auto alloc = [&](Matrix& M, char k) { M.resize(count[static_cast<unsigned char>(k)] ? T1 : 0, count[static_cast<unsigned char>(k)]); };
    alloc(tr.u, 'u');
    alloc(tr.y, 'y');
    alloc(tr.x, 'x');
    alloc(tr.w, 'w');
    alloc(tr.z, 'z');
    if (tr.u.cols() == 0 || tr.y.cols() == 0) throw ConfigError("trajectory CSV: needs u and y columns");
    for (Index t = 0; t < T1; ++t) {
        Index seen[256] = {};
        for (std::size_t c = 0; c < kinds.size(); ++c) {
            const auto k = static_cast<unsigned char>(kinds[c]);
            Matrix& M = k == 'u' ? tr.u : k == 'y' ? tr.y : k == 'x' ? tr.x : k == 'w' ? tr.w : tr.z;
            M(t, seen[k]++) = rows[static_cast<std::size_t>(t)][c];
        }
    }
    return tr;
}

inline json trajectory_to_json(const Trajectory& tr) {
    json j;
    j["T"] = tr.horizon();
    j["u"] = matrix_to_json(tr.u);
    j["y"] = matrix_to_json(tr.y);
    j["x"] = matrix_to_json(tr.x);
    j["w"] = matrix_to_json(tr.w);
    j["z"] = matrix_to_json(tr.z);
    return j;
}

inline Trajectory trajectory_from_json(const json& j) {
    try {
        const Index steps = j.at("T").get<Index>() + 1;
        auto read = [&](const char* key) {
            const json& a = j.at(key);
            if (a.empty()) return Matrix();
            const Index cols = a.empty() ? 0 : static_cast<Index>(a[0].size());
            return matrix_from_json(a, steps, cols, std::string("trajectory.") + key);
        };
        return Trajectory{read("x"), read("u"), read("y"), read("w"), read("z")};
    } catch (const json::exception& e) {
        throw ConfigError(std::string("trajectory JSON: ") + e.what());
    }
}

/// column, ell, chain, j. The D block is written with ell = 0 and an empty
/// chain; chain entries are joined with ':' (i_1 first).
inline std::string index_map_csv(const FeatureConfig& cfg) {
    cfg.validate();
    std::ostringstream out;
    out << "column,ell,chain,j\n";
    for (Index c = 0; c < cfg.dim(); ++c) {
        const MultiIndex mi = multi_index_of(c, cfg);
        out << c << ',' << mi.ell << ',';
        for (std::size_t r = 0; r < mi.chain.size(); ++r) out << (r ? ":" : "") << mi.chain[r];
        out << ',' << mi.j << '\n';
    }
    return out.str();
}

inline std::string decomposition_csv_header() { return "seed,T,L,excitation,multiplier,truncation,bound,actual\n"; }

inline std::string decomposition_csv_row(std::uint64_t seed, Index T, int L, const ErrorDecomposition& e) {
    std::ostringstream out;
    out << seed << ',' << T << ',' << L << ',' << format_double(e.excitation) << ',' << format_double(e.multiplier)
        << ',' << format_double(e.truncation) << ',' << format_double(e.bound) << ',' << format_double(e.actual)
        << '\n';
    return out.str();
}

inline json to_json(const StabilityReport& r) {
    return json{{"rho_hat", r.rho_hat}, {"norm_rate", r.norm_rate}, {"kappa_hat", r.kappa_hat},
                {"rho", r.rho},         {"kappa", r.kappa},         {"depth", r.depth},
                {"samples", r.samples}, {"certified", r.certified}};
}

inline json to_json(const MomentReport& r) {
    return json{{"gamma_hat", r.gamma_hat},
                {"isotropy_dev", r.isotropy_dev},
                {"third_moment_max", r.third_moment_max},
                {"sample_count", r.sample_count},
                {"direction_count", r.direction_count}};
}

inline json to_json(const FeatureMomentReport& r) {
    return json{{"max_fourth_moment", r.max_fourth_moment},
                {"bound", r.bound},
                {"isotropy_dev", r.isotropy_dev},
                {"satisfied", r.satisfied},
                {"dim", r.dim},
                {"sample_count", r.sample_count},
                {"direction_count", r.direction_count}};
}

inline json to_json(const ErrorDecomposition& e) {
    auto num = [](double v) { return std::isfinite(v) ? json(v) : json("inf"); };
    return json{{"excitation", num(e.excitation)}, {"multiplier", e.multiplier}, {"truncation", e.truncation},
                {"bound", num(e.bound)},           {"actual", e.actual},         {"singular_gram", e.singular_gram},
                {"holds", e.holds}};
}

}  // namespace blds::io
