#pragma once

// Line-oriented network case format:
//
//   # comment (also allowed after a record)
//   bus  <id> <M> <E> [controlled]
//   line <i> <j> <b>
//   injection <id> <p0>        (optional; base power injection, default 0)
//
// Bus ids are 1..n, each declared exactly once, in any order. Values are
// kept exactly as written; M and E are per unit of the scenario's declared
// frequency unit and are rescaled by network_to_internal(). Lines are
// oriented with the lower bus id positive.

#include "tfc/errors.hpp"
#include "tfc/network.hpp"
#include "tfc/units.hpp"

#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace tfc {

/// Network plus the optional per-bus base injections.
struct CaseData {
    PowerNetwork network;
    std::vector<double> base_injection; // one per bus
    bool has_injections = false;
};

inline CaseData parse_case_data(std::istream& in)
{
    struct BusRecord {
        double inertia, damping;
        bool controlled;
    };
    std::map<std::size_t, BusRecord> buses;
    struct LineRecord {
        std::size_t i, j;
        double b;
        std::size_t src;
    };
    std::vector<LineRecord> lines;
    std::map<std::size_t, std::pair<double, std::size_t>> injections;

    auto parse_id = [](const std::string& tok, std::size_t ln) {
        std::size_t pos = 0;
        long long v = 0;
        try {
            v = std::stoll(tok, &pos);
        } catch (const std::exception&) {
            pos = 0;
        }
        if (pos != tok.size() || pos == 0 || v < 1)
            throw ParseError("bad bus id '" + tok + "'", ln);
        return static_cast<std::size_t>(v);
    };
    auto parse_num = [](const std::string& tok, std::size_t ln, const char* field) {
        double v = 0;
        if (!parse_double(tok, v))
            throw ParseError(std::string("bad ") + field + " '" + tok + "'", ln);
        return v;
    };

    std::string raw;
    std::size_t ln = 0;
    while (std::getline(in, raw)) {
        ++ln;
        if (auto hash = raw.find('#'); hash != std::string::npos)
            raw.erase(hash);
        std::istringstream ss(raw);
        std::vector<std::string> tok;
        for (std::string t; ss >> t;)
            tok.push_back(t);
        if (tok.empty())
            continue;
        if (tok[0] == "bus") {
            if (tok.size() != 4 && tok.size() != 5)
                throw ParseError("expected: bus <id> <M> <E> [controlled]", ln);
            if (tok.size() == 5 && tok[4] != "controlled")
                throw ParseError("unknown bus flag '" + tok[4] + "'", ln);
            auto id = parse_id(tok[1], ln);
            BusRecord rec{parse_num(tok[2], ln, "inertia"), parse_num(tok[3], ln, "damping"), tok.size() == 5};
            if (!buses.emplace(id, rec).second)
                throw ParseError("bus " + tok[1] + " declared twice", ln);
        } else if (tok[0] == "line") {
            if (tok.size() != 4)
                throw ParseError("expected: line <i> <j> <b>", ln);
            lines.push_back({parse_id(tok[1], ln), parse_id(tok[2], ln), parse_num(tok[3], ln, "susceptance"), ln});
        } else if (tok[0] == "injection") {
            if (tok.size() != 3)
                throw ParseError("expected: injection <id> <p0>", ln);
            if (!injections.emplace(parse_id(tok[1], ln), std::pair{parse_num(tok[2], ln, "injection"), ln}).second)
                throw ParseError("injection for bus " + tok[1] + " given twice", ln);
        } else {
            throw ParseError("unknown record '" + tok[0] + "'", ln);
        }
    }

    if (buses.empty())
        throw ParseError("case declares no buses", 0);
    PowerNetwork net;
    net.n_buses = buses.rbegin()->first;
    if (buses.size() != net.n_buses)
        throw ParseError("bus ids must be contiguous 1.." + std::to_string(net.n_buses), 0);
    net.inertia.resize(net.n_buses);
    net.damping.resize(net.n_buses);
    for (const auto& [id, rec] : buses) {
        net.inertia[id - 1] = rec.inertia;
        net.damping[id - 1] = rec.damping;
        if (rec.controlled)
            net.controlled.push_back(id - 1);
    }
    for (const auto& l : lines) {
        if (l.i > net.n_buses || l.j > net.n_buses)
            throw ParseError("line references undeclared bus", l.src);
        net.lines.push_back(make_line(l.i - 1, l.j - 1, l.b));
    }
    CaseData data{std::move(net), {}, !injections.empty()};
    data.base_injection.assign(data.network.n_buses, 0.0);
    for (const auto& [id, rec] : injections) {
        if (id > data.network.n_buses)
            throw ParseError("injection references undeclared bus", rec.second);
        data.base_injection[id - 1] = rec.first;
    }
    return data;
}

inline PowerNetwork parse_case(std::istream& in) { return parse_case_data(in).network; }

inline CaseData load_case_data(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw ParseError("cannot open case file '" + path + "'", 0);
    return parse_case_data(in);
}

inline PowerNetwork load_case(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw ParseError("cannot open case file '" + path + "'", 0);
    return parse_case(in);
}

/// Rescales inertia and damping from `unit` to internal rad/s units.
inline PowerNetwork network_to_internal(PowerNetwork net, FrequencyUnit unit)
{
    for (auto& m : net.inertia)
        m = coefficient_to_internal(m, unit);
    for (auto& e : net.damping)
        e = coefficient_to_internal(e, unit);
    return net;
}

inline void write_case(std::ostream& out, const PowerNetwork& net, const std::vector<double>& base_injection = {})
{
    out << "# bus <id> <M> <E> [controlled]\n";
    for (std::size_t i = 0; i < net.n_buses; ++i) {
        out << "bus " << i + 1 << ' ' << format_double(net.inertia[i]) << ' ' << format_double(net.damping[i]);
        if (net.is_controlled(i))
            out << " controlled";
        out << '\n';
    }
    for (const auto& l : net.lines)
        out << "line " << l.positive + 1 << ' ' << l.negative + 1 << ' ' << format_double(l.susceptance) << '\n';
    for (std::size_t i = 0; i < base_injection.size(); ++i)
        out << "injection " << i + 1 << ' ' << format_double(base_injection[i]) << '\n';
}

} // namespace tfc
