#pragma once

#include "tfc/errors.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace tfc {

/// Transmission line between two buses (0-based). `positive` is the
/// positive end of the edge in the oriented incidence matrix.
struct Line {
    std::size_t positive = 0;
    std::size_t negative = 0;
    double susceptance = 0.0;
};

/// Default orientation: the lower bus index is the positive end.
inline Line make_line(std::size_t i, std::size_t j, double b)
{
    return Line{std::min(i, j), std::max(i, j), b};
}

/// Phase/frequency network model. Inertia and damping are in internal
/// units (per-unit power per rad/s and per rad/s^2).
struct PowerNetwork {
    std::size_t n_buses = 0;
    std::vector<Line> lines;
    std::vector<double> inertia;
    std::vector<double> damping;
    std::vector<std::size_t> controlled; // sorted, unique

    std::size_t bus_count() const { return n_buses; }
    std::size_t line_count() const { return lines.size(); }

    bool is_controlled(std::size_t bus) const
    {
        return std::binary_search(controlled.begin(), controlled.end(), bus);
    }

    Eigen::VectorXd susceptances() const
    {
        Eigen::VectorXd b(lines.size());
        for (std::size_t k = 0; k < lines.size(); ++k)
            b[static_cast<Eigen::Index>(k)] = lines[k].susceptance;
        return b;
    }

    Eigen::VectorXd inertia_vector() const
    {
        return Eigen::Map<const Eigen::VectorXd>(inertia.data(), static_cast<Eigen::Index>(inertia.size()));
    }

    Eigen::VectorXd damping_vector() const
    {
        return Eigen::Map<const Eigen::VectorXd>(damping.data(), static_cast<Eigen::Index>(damping.size()));
    }
};

/// Signed m x n edge-vertex matrix: +1 at the positive end, -1 at the
/// negative end of each line.
using IncidenceMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Connected components as sorted lists of bus indices, ordered by their
/// smallest member.
inline std::vector<std::vector<std::size_t>> connected_components(const PowerNetwork& net)
{
    std::vector<std::size_t> parent(net.n_buses);
    std::iota(parent.begin(), parent.end(), std::size_t{0});
    auto find = [&](std::size_t x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    };
    for (const auto& l : net.lines) {
        if (l.positive >= net.n_buses || l.negative >= net.n_buses)
            continue;
        auto a = find(l.positive), b = find(l.negative);
        if (a != b)
            parent[std::max(a, b)] = std::min(a, b);
    }
    std::vector<std::vector<std::size_t>> groups;
    std::vector<std::size_t> slot(net.n_buses, net.n_buses);
    for (std::size_t i = 0; i < net.n_buses; ++i) {
        auto r = find(i);
        if (slot[r] == net.n_buses) {
            slot[r] = groups.size();
            groups.emplace_back();
        }
        groups[slot[r]].push_back(i);
    }
    return groups;
}

namespace detail {

inline std::string format_buses(const std::vector<std::size_t>& buses)
{
    std::ostringstream os;
    os << '{';
    for (std::size_t k = 0; k < buses.size(); ++k)
        os << (k ? "," : "") << buses[k] + 1;
    os << '}';
    return os.str();
}

} // namespace detail

/// Lists every violated invariant; empty iff the network is valid. Bus
/// numbers in messages are 1-based.
inline std::vector<std::string> validate(const PowerNetwork& net)
{
    std::vector<std::string> issues;
    if (net.n_buses == 0) {
        issues.emplace_back("network has no buses");
        return issues;
    }
    if (net.inertia.size() != net.n_buses || net.damping.size() != net.n_buses)
        issues.emplace_back("inertia/damping vectors must have one entry per bus");
    for (std::size_t i = 0; i < std::min(net.n_buses, net.inertia.size()); ++i)
        if (!(net.inertia[i] > 0.0))
            issues.push_back("bus " + std::to_string(i + 1) + ": inertia must be strictly positive");
    for (std::size_t i = 0; i < std::min(net.n_buses, net.damping.size()); ++i)
        if (!(net.damping[i] > 0.0))
            issues.push_back("bus " + std::to_string(i + 1) + ": damping must be strictly positive");

    std::set<std::pair<std::size_t, std::size_t>> seen;
    for (std::size_t k = 0; k < net.lines.size(); ++k) {
        const auto& l = net.lines[k];
        std::string tag = "line " + std::to_string(k + 1);
        if (l.positive >= net.n_buses || l.negative >= net.n_buses) {
            issues.push_back(tag + ": endpoint out of range");
            continue;
        }
        if (l.positive == l.negative)
            issues.push_back(tag + ": self loop");
        if (!(l.susceptance > 0.0))
            issues.push_back(tag + ": susceptance must be strictly positive");
        if (!seen.emplace(std::min(l.positive, l.negative), std::max(l.positive, l.negative)).second)
            issues.push_back(tag + ": duplicate line " + std::to_string(l.positive + 1) + "-" +
                             std::to_string(l.negative + 1));
    }

    for (std::size_t k = 0; k < net.controlled.size(); ++k) {
        if (net.controlled[k] >= net.n_buses)
            issues.push_back("controlled bus " + std::to_string(net.controlled[k] + 1) + " out of range");
        if (k && net.controlled[k] <= net.controlled[k - 1])
            issues.emplace_back("controlled set must be sorted and unique");
    }

    auto comps = connected_components(net);
    if (comps.size() > 1) {
        std::string msg = "graph not connected: components";
        for (const auto& c : comps)
            msg += " " + detail::format_buses(c);
        issues.push_back(msg);
    }
    return issues;
}

/// Builds D. Throws ValidationError for a disconnected graph, naming the
/// component(s) cut off from bus 1.
inline IncidenceMatrix build_incidence(const PowerNetwork& net)
{
    auto comps = connected_components(net);
    if (comps.size() > 1) {
        std::string msg = "graph not connected; isolated from bus 1:";
        for (std::size_t c = 1; c < comps.size(); ++c)
            msg += " " + detail::format_buses(comps[c]);
        throw ValidationError(msg);
    }
    std::vector<Eigen::Triplet<double>> entries;
    entries.reserve(2 * net.lines.size());
    for (std::size_t k = 0; k < net.lines.size(); ++k) {
        const auto& l = net.lines[k];
        if (l.positive >= net.n_buses || l.negative >= net.n_buses || l.positive == l.negative)
            throw ValidationError("line " + std::to_string(k + 1) + " has invalid endpoints");
        auto row = static_cast<Eigen::Index>(k);
        entries.emplace_back(row, static_cast<Eigen::Index>(l.positive), 1.0);
        entries.emplace_back(row, static_cast<Eigen::Index>(l.negative), -1.0);
    }
    IncidenceMatrix d(static_cast<Eigen::Index>(net.lines.size()), static_cast<Eigen::Index>(net.n_buses));
    d.setFromTriplets(entries.begin(), entries.end());
    return d;
}

/// D^T Y_b lambda: linearized power leaving each bus toward its neighbors.
inline Eigen::VectorXd aggregate_flow(const PowerNetwork& net, const IncidenceMatrix& d, const Eigen::VectorXd& lambda)
{
    if (lambda.size() != static_cast<Eigen::Index>(net.lines.size()) || d.rows() != lambda.size() ||
        d.cols() != static_cast<Eigen::Index>(net.n_buses))
        throw std::invalid_argument("aggregate_flow: dimension mismatch");
    Eigen::VectorXd weighted = net.susceptances().cwiseProduct(lambda);
    return d.transpose() * weighted;
}

/// Weighted Laplacian D^T Y_b D.
inline Eigen::MatrixXd laplacian(const PowerNetwork& net)
{
    const auto n = static_cast<Eigen::Index>(net.n_buses);
    Eigen::MatrixXd lap = Eigen::MatrixXd::Zero(n, n);
    for (const auto& l : net.lines) {
        auto i = static_cast<Eigen::Index>(l.positive), j = static_cast<Eigen::Index>(l.negative);
        lap(i, i) += l.susceptance;
        lap(j, j) += l.susceptance;
        lap(i, j) -= l.susceptance;
        lap(j, i) -= l.susceptance;
    }
    return lap;
}

/// Neighbors of each bus with the connecting susceptance.
inline std::vector<std::vector<std::pair<std::size_t, double>>> adjacency(const PowerNetwork& net)
{
    std::vector<std::vector<std::pair<std::size_t, double>>> adj(net.n_buses);
    for (const auto& l : net.lines) {
        adj[l.positive].emplace_back(l.negative, l.susceptance);
        adj[l.negative].emplace_back(l.positive, l.susceptance);
    }
    return adj;
}

} // namespace tfc
