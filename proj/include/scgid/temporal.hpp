#pragma once

#include <compare>
#include <cstdlib>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "scgid/mixed_graph.hpp"

namespace scgid {

using Series = std::string;

/// A (series, time) vertex of a full-time graph. Named "X@3" inside the
/// underlying MixedGraph.
struct TemporalVertex {
    Series series;
    int time = 0;

    std::string name() const { return series + "@" + std::to_string(time); }

    static TemporalVertex parse(const std::string& name) {
        auto pos = name.rfind('@');
        if (pos == std::string::npos || pos == 0 || pos + 1 == name.size())
            throw std::invalid_argument("not a temporal vertex name: " + name);
        TemporalVertex v;
        v.series = name.substr(0, pos);
        v.time = std::atoi(name.c_str() + pos + 1);
        return v;
    }

    friend bool operator==(const TemporalVertex&, const TemporalVertex&) = default;
    friend auto operator<=>(const TemporalVertex& l, const TemporalVertex& r) {
        if (auto c = l.series <=> r.series; c != 0) return c;
        return l.time <=> r.time;
    }
};

using TemporalVertexSet = std::set<TemporalVertex>;

struct Window {
    int t0 = 0;
    int tmax = 0;

    int span() const { return tmax - t0; }
    int slices() const { return tmax - t0 + 1; }
    bool contains(int t) const { return t0 <= t && t <= tmax; }

    friend bool operator==(const Window&, const Window&) = default;
};

/// Series-level graph: one vertex per time series, directed and bidirected
/// edges, self-loops of both kinds allowed, plus the maximal lag gamma_max.
struct SummaryCausalGraph {
    MixedGraph base = MixedGraph::series_level();
    int gamma_max = 0;

    static SummaryCausalGraph make(const std::vector<Series>& series, int gamma_max) {
        if (gamma_max < 0) throw std::invalid_argument("gamma_max must be >= 0");
        SummaryCausalGraph g;
        g.gamma_max = gamma_max;
        for (const auto& s : series) g.base.add_vertex(s);
        return g;
    }

    const std::vector<Series>& series() const { return base.vertices(); }
    bool has_series(const Series& s) const { return base.has_vertex(s); }

    bool same_structure(const SummaryCausalGraph& other) const {
        auto mine = base.vertices();
        auto theirs = other.base.vertices();
        std::sort(mine.begin(), mine.end());
        std::sort(theirs.begin(), theirs.end());
        return mine == theirs && base.edges() == other.base.edges();
    }
};

/// Micro-level graph over (series, time) vertices. Directed edges never point
/// backward in time and no time slice may contain a directed cycle.
class FullTimeGraph {
public:
    FullTimeGraph(std::vector<Series> series, Window window)
        : series_(std::move(series)), window_(window), base_(MixedGraph::time_level()) {
        if (window_.t0 > window_.tmax) throw std::invalid_argument("empty window");
        for (int t = window_.t0; t <= window_.tmax; ++t)
            for (const auto& s : series_) base_.add_vertex(TemporalVertex{s, t}.name());
    }

    const Window& window() const { return window_; }
    const std::vector<Series>& series() const { return series_; }
    const MixedGraph& graph() const { return base_; }

    void add_directed(const TemporalVertex& from, const TemporalVertex& to) {
        check_vertex(from);
        check_vertex(to);
        if (from.time > to.time)
            throw std::invalid_argument("directed edge backward in time: " + from.name() + " -> " +
                                        to.name());
        base_.add_directed(from.name(), to.name());
    }

    void add_bidirected(const TemporalVertex& a, const TemporalVertex& b) {
        check_vertex(a);
        check_vertex(b);
        base_.add_bidirected(a.name(), b.name());
    }

    /// Directed acyclicity of each time slice (whole-graph acyclicity then
    /// follows from the no-backward-in-time invariant).
    bool slices_acyclic() const {
        for (int t = window_.t0; t <= window_.tmax; ++t) {
            // Kahn over the instantaneous subgraph of slice t
            std::map<Series, int> indeg;
            std::map<Series, std::vector<Series>> succ;
            for (const auto& s : series_) indeg[s] = 0;
            for (const auto& s : series_) {
                TemporalVertex v{s, t};
                for (const auto& childName : base_.children(v.name())) {
                    TemporalVertex c = TemporalVertex::parse(childName);
                    if (c.time != t) continue;
                    succ[s].push_back(c.series);
                    ++indeg[c.series];
                }
            }
            std::vector<Series> ready;
            for (auto& [s, d] : indeg)
                if (d == 0) ready.push_back(s);
            std::size_t seen = 0;
            while (!ready.empty()) {
                Series s = ready.back();
                ready.pop_back();
                ++seen;
                for (const auto& c : succ[s])
                    if (--indeg[c] == 0) ready.push_back(c);
            }
            if (seen != series_.size()) return false;
        }
        return true;
    }

private:
    void check_vertex(const TemporalVertex& v) const {
        if (!window_.contains(v.time))
            throw std::invalid_argument("vertex outside window: " + v.name());
        if (!base_.has_vertex(v.name()))
            throw std::invalid_argument("unknown series: " + v.series);
    }

    std::vector<Series> series_;
    Window window_;
    MixedGraph base_;
};

/// Series-level image of a full-time graph: X -> Y iff some X_{t'} -> Y_t
/// exists (t' <= t holds by construction), X <-> Y iff some bidirected edge
/// connects the two series anywhere. gamma_max is set to the window span.
inline SummaryCausalGraph project(const FullTimeGraph& g) {
    SummaryCausalGraph out = SummaryCausalGraph::make(g.series(), g.window().span());
    for (const Edge& e : g.graph().edges()) {
        TemporalVertex from = TemporalVertex::parse(e.from);
        TemporalVertex to = TemporalVertex::parse(e.to);
        if (e.kind == EdgeKind::Directed)
            out.base.add_directed(from.series, to.series);
        else
            out.base.add_bidirected(from.series, to.series);
    }
    return out;
}

/// Time offsets (relative to the query time, always <= 0) of the possible
/// parents of Y_t: every non-self parent series at lags 0..gamma_max, plus
/// the series itself at lags 1..gamma_max when it has a directed self-loop.
inline std::set<std::pair<Series, int>> possible_parent_offsets(const SummaryCausalGraph& scg,
                                                                const Series& y) {
    if (!scg.has_series(y)) throw std::invalid_argument("unknown series: " + y);
    std::set<std::pair<Series, int>> out;
    for (const auto& p : scg.base.parents(y)) {
        if (p == y) continue;
        for (int gamma = 0; gamma <= scg.gamma_max; ++gamma) out.insert({p, -gamma});
    }
    if (scg.base.has_directed(y, y))
        for (int gamma = 1; gamma <= scg.gamma_max; ++gamma) out.insert({y, -gamma});
    return out;
}

/// Possible parents of Y_t materialized inside a window; vertices whose time
/// would precede the window start are dropped.
inline TemporalVertexSet possible_parents(const SummaryCausalGraph& scg, const Series& y, int t,
                                          const Window& window) {
    if (!window.contains(t)) throw std::invalid_argument("query time outside window");
    TemporalVertexSet out;
    for (const auto& [series, offset] : possible_parent_offsets(scg, y)) {
        int time = t + offset;
        if (time < window.t0) continue;
        out.insert(TemporalVertex{series, time});
    }
    return out;
}

/// The densest full-time graph used as the enumeration universe: every
/// directed edge licensed by an SCG edge at lags 0..gamma_max and every
/// licensed bidirected edge. Instantaneous self-edges are impossible;
/// instantaneous edges between series of the same directed cycle keep only
/// one fixed orientation (series-name order) so the template stays acyclic.
inline FullTimeGraph unroll_template(const SummaryCausalGraph& scg, const Window& window) {
    if (window.span() < scg.gamma_max)
        throw std::invalid_argument("window span smaller than gamma_max");
    FullTimeGraph out(scg.series(), window);

    // component ids of the non-self directed part
    std::map<Series, int> comp;
    {
        int next = 0;
        for (const auto& s : scg.series()) {
            VertexSet c = scg.base.scc(s);
            if (comp.count(s)) continue;
            if (c.size() <= 1) {
                comp[s] = next++;
            } else {
                for (const auto& m : c) comp[m] = next;
                ++next;
            }
        }
    }

    for (const Edge& e : scg.base.edges()) {
        if (e.kind == EdgeKind::Directed) {
            for (int t = window.t0; t <= window.tmax; ++t) {
                for (int gamma = 0; gamma <= scg.gamma_max; ++gamma) {
                    if (t - gamma < window.t0) continue;
                    if (gamma == 0) {
                        if (e.from == e.to) continue;
                        if (comp[e.from] == comp[e.to] && !(e.from < e.to)) continue;
                    }
                    out.add_directed({e.from, t - gamma}, {e.to, t});
                }
            }
        } else {
            // both temporal orders are admissible for confounding
            for (int t = window.t0; t <= window.tmax; ++t)
                for (int gamma = 0; gamma <= scg.gamma_max; ++gamma) {
                    if (t - gamma < window.t0) continue;
                    if (gamma == 0 && e.from == e.to) continue;
                    out.add_bidirected({e.from, t - gamma}, {e.to, t});
                    out.add_bidirected({e.to, t - gamma}, {e.from, t});
                }
        }
    }
    return out;
}

} // namespace scgid
