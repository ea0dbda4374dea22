#pragma once

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "tloho/graph.hpp"
#include "tloho/inference.hpp"
#include "tloho/linalg.hpp"
#include "tloho/model.hpp"
#include "tloho/sampler.hpp"

namespace tloho {

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// 17 significant digits, so the value reads back bit for bit.
inline std::string format_double(double x)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

inline double parse_double(const std::string& tok, const std::string& where)
{
    // strtod rather than stod: subnormal values set ERANGE but are valid
    const char* begin = tok.c_str();
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(begin, &end);
    const bool overflow = errno == ERANGE && std::isinf(v);
    const char* rest = end;
    while (*rest && std::isspace(static_cast<unsigned char>(*rest))) ++rest;
    if (end == begin || *rest || overflow) throw DataError(where + ": cannot parse number '" + tok + "'");
    return v;
}

inline std::ifstream open_input(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    return in;
}

inline std::ofstream open_output(const std::string& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    return out;
}

inline std::vector<std::string> split_csv_line(const std::string& line)
{
    std::vector<std::string> out;
    std::string tok;
    std::stringstream ss(line);
    while (std::getline(ss, tok, ',')) out.push_back(tok);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

// Headerless numeric CSV, row-major; blank lines are skipped.
inline MatrixXd read_matrix_csv(const std::string& path)
{
    auto in = open_input(path);
    std::vector<std::vector<double>> rows;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        std::vector<double> row;
        for (const auto& tok : split_csv_line(line)) row.push_back(parse_double(tok, path + ":" + std::to_string(lineno)));
        if (!rows.empty() && row.size() != rows.front().size())
            throw DataError(path + ":" + std::to_string(lineno) + ": expected " + std::to_string(rows.front().size()) +
                            " columns, found " + std::to_string(row.size()));
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw DataError(path + ": no data");
    MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j) m(i, j) = rows[i][j];
    return m;
}

// A single column or a single row.
inline VectorXd read_vector_csv(const std::string& path)
{
    MatrixXd m = read_matrix_csv(path);
    if (m.cols() == 1) return m.col(0);
    if (m.rows() == 1) return m.row(0).transpose();
    throw DataError(path + ": expected a single row or column, found " + std::to_string(m.rows()) + " x " +
                    std::to_string(m.cols()));
}

inline void write_matrix_csv(const std::string& path, const MatrixXd& m)
{
    auto out = open_output(path);
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            if (j) out << ',';
            out << format_double(m(i, j));
        }
        out << '\n';
    }
    if (!out) throw IoError("write to '" + path + "' failed");
}

inline void write_vector_csv(const std::string& path, const std::vector<double>& v)
{
    write_matrix_csv(path, Eigen::Map<const VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
}

/* Edge list: one "u v" pair per line (whitespace or comma separated), '#'
 * starts a comment. Vertex ids are shifted by index_base and must land in
 * [0, p). */
inline Graph read_edge_list(const std::string& path, int p, int index_base = 0)
{
    if (index_base != 0 && index_base != 1) throw ConfigError("index base must be 0 or 1");
    auto in = open_input(path);
    std::vector<Edge> edges;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        for (char& ch : line)
            if (ch == ',') ch = ' ';
        std::stringstream ss(line);
        long long u = 0, v = 0;
        if (!(ss >> u)) continue;
        std::string rest;
        if (!(ss >> v) || (ss >> rest))
            throw DataError(path + ":" + std::to_string(lineno) + ": expected two vertex ids");
        u -= index_base;
        v -= index_base;
        if (u < 0 || v < 0 || u >= p || v >= p)
            throw DataError(path + ":" + std::to_string(lineno) + ": vertex id outside [" +
                            std::to_string(index_base) + ", " + std::to_string(p - 1 + index_base) + "]");
        edges.emplace_back(static_cast<int>(u), static_cast<int>(v));
    }
    try {
        return Graph(p, std::move(edges));
    } catch (const GraphError& e) {
        throw DataError(path + ": " + e.what());
    }
}

inline void write_edge_list(const std::string& path, const Graph& g)
{
    auto out = open_output(path);
    out << "# " << g.num_vertices() << " vertices, " << g.num_edges() << " edges\n";
    for (const auto& [u, v] : g.edges()) out << u << ' ' << v << '\n';
    if (!out) throw IoError("write to '" + path + "' failed");
}

// One integer label per line (or comma separated).
inline Partition read_labels(const std::string& path)
{
    auto in = open_input(path);
    std::vector<int> raw;
    std::string line;
    while (std::getline(in, line)) {
        for (char& ch : line)
            if (ch == ',') ch = ' ';
        std::stringstream ss(line);
        std::string tok;
        while (ss >> tok) {
            std::size_t pos = 0;
            int v = 0;
            try {
                v = std::stoi(tok, &pos);
            } catch (const std::exception&) {
                pos = 0;
            }
            if (pos != tok.size()) throw DataError(path + ": malformed label '" + tok + "'");
            raw.push_back(v);
        }
    }
    if (raw.empty()) throw DataError(path + ": no labels");
    return Partition(raw);
}

inline void write_labels(const std::string& path, const Partition& pi)
{
    auto out = open_output(path);
    for (int l : pi.labels()) out << l << '\n';
    if (!out) throw IoError("write to '" + path + "' failed");
}

/* Run settings accepted in a JSON config file. Unknown keys are rejected so
 * that typos do not pass silently. */
struct RunConfig {
    Hyperparams hyper;
    Schedule schedule{1000, 1000, 1};
    std::uint64_t seed = 1;
    int chains = 1;
};

inline RunConfig read_config(const std::string& path)
{
    auto in = open_input(path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(path + ": invalid JSON: " + e.what());
    }
    if (!j.is_object()) throw ConfigError(path + ": top level must be an object");
    RunConfig c;
    try {
        for (const auto& [key, value] : j.items()) {
            if (key == "tau0") c.hyper.tau0 = value.get<double>();
            else if (key == "c") c.hyper.c = value.get<double>();
            else if (key == "mh_step_tau") c.hyper.mh_step_tau = value.get<double>();
            else if (key == "move_probs") {
                auto v = value.get<std::vector<double>>();
                if (v.size() != 4) throw ConfigError(path + ": move_probs needs 4 entries (split, merge, change, hyper)");
                for (int i = 0; i < 4; ++i) c.hyper.move_probs[i] = v[i];
            } else if (key == "iters") c.schedule.iters = value.get<long>();
            else if (key == "burnin") c.schedule.burnin = value.get<long>();
            else if (key == "thin") c.schedule.thin = value.get<long>();
            else if (key == "seed") c.seed = value.get<std::uint64_t>();
            else if (key == "chains") c.chains = value.get<int>();
            else throw ConfigError(path + ": unknown key '" + key + "'");
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(path + ": wrong value type: " + e.what());
    }
    return c;
}

/* Draws of all chains in one CSV with header
 * chain,iter,K,sigma2,tau,label_0..label_{p-1},beta_0..beta_{p-1}. */
inline void write_draws_csv(const std::string& path, const std::vector<ChainOutput>& chains)
{
    auto out = open_output(path);
    std::size_t p = 0;
    for (const auto& c : chains)
        if (!c.draws.empty()) p = c.draws.front().labels.size();
    out << "chain,iter,K,sigma2,tau";
    for (std::size_t j = 0; j < p; ++j) out << ",label_" << j;
    for (std::size_t j = 0; j < p; ++j) out << ",beta_" << j;
    out << '\n';
    for (std::size_t c = 0; c < chains.size(); ++c)
        for (const auto& d : chains[c].draws) {
            out << c << ',' << d.iter << ',' << d.K << ',' << format_double(d.sigma2) << ',' << format_double(d.tau);
            for (int l : d.labels) out << ',' << l;
            for (double b : d.beta) out << ',' << format_double(b);
            out << '\n';
        }
    if (!out) throw IoError("write to '" + path + "' failed");
}

inline std::vector<Draw> read_draws_csv(const std::string& path)
{
    auto in = open_input(path);
    std::string line;
    if (!std::getline(in, line)) throw DataError(path + ": empty draws file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto header = split_csv_line(line);
    if (header.size() < 5 || (header.size() - 5) % 2 != 0 || header[0] != "chain" || header[1] != "iter" ||
        header[2] != "K" || header[3] != "sigma2" || header[4] != "tau")
        throw DataError(path + ": unrecognized header");
    const std::size_t p = (header.size() - 5) / 2;
    for (std::size_t j = 0; j < p; ++j)
        if (header[5 + j] != "label_" + std::to_string(j) || header[5 + p + j] != "beta_" + std::to_string(j))
            throw DataError(path + ": unrecognized header");

    std::vector<Draw> draws;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto tok = split_csv_line(line);
        const std::string where = path + ":" + std::to_string(lineno);
        if (tok.size() != header.size())
            throw DataError(where + ": expected " + std::to_string(header.size()) + " fields, found " +
                            std::to_string(tok.size()));
        Draw d;
        d.iter = static_cast<long>(parse_double(tok[1], where));
        d.K = static_cast<int>(parse_double(tok[2], where));
        d.sigma2 = parse_double(tok[3], where);
        d.tau = parse_double(tok[4], where);
        d.labels.resize(p);
        d.beta.resize(p);
        int k = 0;
        for (std::size_t j = 0; j < p; ++j) {
            const double l = parse_double(tok[5 + j], where);
            if (l < 0 || l != static_cast<int>(l)) throw DataError(where + ": labels must be nonnegative integers");
            d.labels[j] = static_cast<int>(l);
            k = std::max(k, d.labels[j] + 1);
            d.beta[j] = parse_double(tok[5 + p + j], where);
        }
        if (k != d.K) throw DataError(where + ": K disagrees with the labels");
        draws.push_back(std::move(d));
    }
    if (draws.empty()) throw DataError(path + ": no draws");
    return draws;
}

struct Summary {
    std::vector<int> dahl_labels;
    std::size_t dahl_draw = 0;
    BetaSummary beta;
    std::map<int, double> k_hist;
    std::size_t num_draws = 0;
};

inline Summary summarize_draws(const std::vector<Draw>& draws, double level = 0.9)
{
    Summary s;
    s.dahl_draw = dahl_index(draws);
    s.dahl_labels = draws[s.dahl_draw].labels;
    s.beta = posterior_median_beta(draws, level);
    s.k_hist = k_distribution(draws);
    s.num_draws = draws.size();
    return s;
}

inline nlohmann::json summary_json(const Summary& s)
{
    nlohmann::json j;
    j["num_draws"] = s.num_draws;
    j["dahl_draw"] = s.dahl_draw;
    j["dahl_labels"] = s.dahl_labels;
    int k = 0;
    for (int l : s.dahl_labels) k = std::max(k, l + 1);
    j["dahl_K"] = k;
    j["level"] = s.beta.level;
    j["beta_median"] = s.beta.median;
    j["beta_lower"] = s.beta.lower;
    j["beta_upper"] = s.beta.upper;
    nlohmann::json hist = nlohmann::json::object();
    for (const auto& [kk, f] : s.k_hist) hist[std::to_string(kk)] = f;
    j["k_distribution"] = hist;
    return j;
}

inline void write_json(const std::string& path, const nlohmann::json& j)
{
    auto out = open_output(path);
    out << j.dump(2) << '\n';
    if (!out) throw IoError("write to '" + path + "' failed");
}

} // namespace tloho
