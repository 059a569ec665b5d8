#pragma once

// Wide-format trajectory export:
//
//   # tfc-trajectory v1 buses=<n> lines=<m> step=<h>
//   t,lambda_<i>_<j>...,omega_<i>...,u_<i>...,q_<i>...,p_<i>...,energy
//
// Bus numbers are 1-based, lambda columns are named by the positive and
// negative end of each line, frequencies are rad/s. Numbers are written in
// shortest round-trip form so import(export(tr)) reproduces tr bit for bit.

#include "tfc/errors.hpp"
#include "tfc/network.hpp"
#include "tfc/simulation.hpp"
#include "tfc/units.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace tfc {

inline std::vector<std::string> trajectory_header(const PowerNetwork& net, const std::vector<std::size_t>& controlled)
{
    std::vector<std::string> cols{"t"};
    for (const auto& l : net.lines)
        cols.push_back("lambda_" + std::to_string(l.positive + 1) + "_" + std::to_string(l.negative + 1));
    for (std::size_t i = 0; i < net.n_buses; ++i)
        cols.push_back("omega_" + std::to_string(i + 1));
    for (auto c : controlled)
        cols.push_back("u_" + std::to_string(c + 1));
    for (auto c : controlled)
        cols.push_back("q_" + std::to_string(c + 1));
    for (std::size_t i = 0; i < net.n_buses; ++i)
        cols.push_back("p_" + std::to_string(i + 1));
    cols.emplace_back("energy");
    return cols;
}

inline void write_trajectory(std::ostream& out, const PowerNetwork& net, const Trajectory& tr)
{
    out << "# tfc-trajectory v1 buses=" << net.n_buses << " lines=" << net.line_count()
        << " step=" << format_double(tr.step) << '\n';
    auto cols = trajectory_header(net, tr.controlled);
    for (std::size_t c = 0; c < cols.size(); ++c)
        out << (c ? "," : "") << cols[c];
    out << '\n';
    std::string row;
    for (Eigen::Index k = 0; k < tr.size(); ++k) {
        row.clear();
        row += format_double(tr.time[k]);
        auto put = [&](const Eigen::MatrixXd& mat) {
            for (Eigen::Index c = 0; c < mat.cols(); ++c) {
                row += ',';
                row += format_double(mat(k, c));
            }
        };
        put(tr.lambda);
        put(tr.omega);
        put(tr.input);
        put(tr.q);
        put(tr.injection);
        row += ',';
        row += format_double(tr.energy[k]);
        row += '\n';
        out << row;
    }
}

inline void save_trajectory(const std::string& path, const PowerNetwork& net, const Trajectory& tr)
{
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("cannot write '" + path + "'");
    write_trajectory(out, net, tr);
}

namespace detail {

inline std::size_t parse_count(std::string_view text, std::size_t line)
{
    std::size_t v = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size())
        throw ParseError("bad count '" + std::string(text) + "'", line);
    return v;
}

} // namespace detail

inline Trajectory read_trajectory(std::istream& in)
{
    std::string line;
    std::size_t ln = 0;
    if (!std::getline(in, line))
        throw ParseError("empty trajectory file", 1);
    ++ln;
    std::size_t n = 0, m = 0;
    Trajectory tr;
    {
        std::istringstream ss(line);
        std::string hash, magic, version;
        ss >> hash >> magic >> version;
        if (hash != "#" || magic != "tfc-trajectory" || version != "v1")
            throw ParseError("missing '# tfc-trajectory v1' header", ln);
        for (std::string kv; ss >> kv;) {
            auto eq = kv.find('=');
            if (eq == std::string::npos)
                throw ParseError("bad header field '" + kv + "'", ln);
            auto key = kv.substr(0, eq), val = kv.substr(eq + 1);
            if (key == "buses")
                n = detail::parse_count(val, ln);
            else if (key == "lines")
                m = detail::parse_count(val, ln);
            else if (key == "step" && !parse_double(val, tr.step))
                throw ParseError("bad step '" + val + "'", ln);
        }
    }
    if (!std::getline(in, line))
        throw ParseError("missing column header", ln + 1);
    ++ln;
    std::vector<std::string> cols;
    {
        std::istringstream ss(line);
        for (std::string c; std::getline(ss, c, ',');)
            cols.push_back(c);
    }
    if (cols.size() < 2 + m + 2 * n || (cols.size() - 2 - m - 2 * n) % 2 != 0)
        throw ParseError("column count does not match buses/lines", ln);
    const std::size_t nc = (cols.size() - 2 - m - 2 * n) / 2;
    for (std::size_t c = 0; c < nc; ++c) {
        const auto& name = cols[1 + m + n + c];
        if (name.rfind("u_", 0) != 0)
            throw ParseError("expected u_<bus> column, got '" + name + "'", ln);
        const std::size_t bus = detail::parse_count(std::string_view(name).substr(2), ln);
        if (bus == 0 || bus > n)
            throw ParseError("input column '" + name + "' names an unknown bus", ln);
        tr.controlled.push_back(bus - 1);
    }

    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        ++ln;
        if (line.empty())
            continue;
        std::vector<double> vals;
        vals.reserve(cols.size());
        std::string_view rest(line);
        while (true) {
            auto comma = rest.find(',');
            auto tok = rest.substr(0, comma);
            double v = 0;
            if (!parse_double(tok, v))
                throw ParseError("bad number '" + std::string(tok) + "'", ln);
            vals.push_back(v);
            if (comma == std::string_view::npos)
                break;
            rest.remove_prefix(comma + 1);
        }
        if (vals.size() != cols.size())
            throw ParseError("row has " + std::to_string(vals.size()) + " fields, expected " +
                                 std::to_string(cols.size()),
                             ln);
        rows.push_back(std::move(vals));
    }

    const auto rcount = static_cast<Eigen::Index>(rows.size());
    tr.time.resize(rcount);
    tr.lambda.resize(rcount, static_cast<Eigen::Index>(m));
    tr.omega.resize(rcount, static_cast<Eigen::Index>(n));
    tr.input.resize(rcount, static_cast<Eigen::Index>(nc));
    tr.q.resize(rcount, static_cast<Eigen::Index>(nc));
    tr.injection.resize(rcount, static_cast<Eigen::Index>(n));
    tr.energy.resize(rcount);
    for (Eigen::Index k = 0; k < rcount; ++k) {
        const auto& r = rows[static_cast<std::size_t>(k)];
        std::size_t c = 0;
        tr.time[k] = r[c++];
        for (Eigen::Index j = 0; j < tr.lambda.cols(); ++j)
            tr.lambda(k, j) = r[c++];
        for (Eigen::Index j = 0; j < tr.omega.cols(); ++j)
            tr.omega(k, j) = r[c++];
        for (Eigen::Index j = 0; j < tr.input.cols(); ++j)
            tr.input(k, j) = r[c++];
        for (Eigen::Index j = 0; j < tr.q.cols(); ++j)
            tr.q(k, j) = r[c++];
        for (Eigen::Index j = 0; j < tr.injection.cols(); ++j)
            tr.injection(k, j) = r[c++];
        tr.energy[k] = r[c++];
    }
    return tr;
}

inline Trajectory load_trajectory(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw ParseError("cannot open trajectory '" + path + "'", 0);
    return read_trajectory(in);
}

/// Plot data: time and absolute frequency (Hz) plus input for each
/// controlled bus.
inline void write_frequency_hz(std::ostream& out, const Trajectory& tr, double base_hz)
{
    out << "t";
    for (auto c : tr.controlled)
        out << ",f_" << c + 1 << "_hz";
    for (auto c : tr.controlled)
        out << ",u_" << c + 1;
    out << '\n';
    for (Eigen::Index k = 0; k < tr.size(); ++k) {
        out << format_double(tr.time[k]);
        for (auto c : tr.controlled)
            out << ',' << format_double(absolute_hz(tr.omega(k, static_cast<Eigen::Index>(c)), base_hz));
        for (Eigen::Index c = 0; c < tr.input.cols(); ++c)
            out << ',' << format_double(tr.input(k, c));
        out << '\n';
    }
}

} // namespace tfc
