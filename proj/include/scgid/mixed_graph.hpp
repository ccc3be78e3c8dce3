#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace scgid {

using Vertex = std::string;
using VertexSet = std::set<Vertex>;

enum class EdgeKind { Directed, Bidirected };

/// One edge of a mixed graph. Bidirected edges are stored with their
/// endpoints normalized (from <= to) so that {a,b} and {b,a} compare equal.
struct Edge {
    Vertex from;
    Vertex to;
    EdgeKind kind = EdgeKind::Directed;

    friend bool operator==(const Edge&, const Edge&) = default;
    friend auto operator<=>(const Edge& l, const Edge& r) {
        // bidirected sorts before directed; then endpoint order
        auto lk = l.kind == EdgeKind::Bidirected ? 0 : 1;
        auto rk = r.kind == EdgeKind::Bidirected ? 0 : 1;
        if (auto c = lk <=> rk; c != 0) return c;
        if (auto c = l.from <=> r.from; c != 0) return c;
        return l.to <=> r.to;
    }
};

/// Graph with directed and bidirected edges over opaque string vertices.
///
/// Two flavours exist: series-level graphs admit directed and bidirected
/// self-loops (a series may cause or be confounded with itself across time),
/// time-level graphs forbid them. Instances are meant to be built once and
/// then treated as immutable; every query below is const and pure.
class MixedGraph {
public:
    static MixedGraph series_level() { return MixedGraph(true); }
    static MixedGraph time_level() { return MixedGraph(false); }

    bool allows_self_loops() const { return allow_self_loops_; }

    void add_vertex(const Vertex& v) {
        if (index_.count(v)) return;
        index_.emplace(v, static_cast<int>(order_.size()));
        order_.push_back(v);
        children_.emplace_back();
        parents_.emplace_back();
        siblings_.emplace_back();
    }

    void add_directed(const Vertex& tail, const Vertex& head) {
        int t = checked_index(tail);
        int h = checked_index(head);
        if (t == h && !allow_self_loops_)
            throw std::invalid_argument("directed self-loop not allowed: " + tail);
        insert_sorted(children_[t], h);
        insert_sorted(parents_[h], t);
    }

    void add_bidirected(const Vertex& a, const Vertex& b) {
        int i = checked_index(a);
        int j = checked_index(b);
        if (i == j && !allow_self_loops_)
            throw std::invalid_argument("bidirected self-loop not allowed: " + a);
        insert_sorted(siblings_[i], j);
        insert_sorted(siblings_[j], i);
    }

    bool has_vertex(const Vertex& v) const { return index_.count(v) != 0; }

    bool has_directed(const Vertex& tail, const Vertex& head) const {
        int t = checked_index(tail), h = checked_index(head);
        return std::binary_search(children_[t].begin(), children_[t].end(), h);
    }

    bool has_bidirected(const Vertex& a, const Vertex& b) const {
        int i = checked_index(a), j = checked_index(b);
        return std::binary_search(siblings_[i].begin(), siblings_[i].end(), j);
    }

    std::size_t vertex_count() const { return order_.size(); }

    /// Vertices in insertion order.
    const std::vector<Vertex>& vertices() const { return order_; }

    /// All edges in canonical sorted order.
    std::vector<Edge> edges() const {
        std::vector<Edge> out;
        for (int i = 0; i < static_cast<int>(order_.size()); ++i) {
            for (int j : children_[i])
                out.push_back({order_[i], order_[j], EdgeKind::Directed});
            for (int j : siblings_[i])
                if (i <= j) out.push_back({order_[i], order_[j], EdgeKind::Bidirected});
        }
        std::sort(out.begin(), out.end());
        return out;
    }

    std::size_t directed_edge_count() const {
        std::size_t n = 0;
        for (const auto& c : children_) n += c.size();
        return n;
    }

    std::size_t bidirected_edge_count() const {
        std::size_t n = 0;
        for (int i = 0; i < static_cast<int>(order_.size()); ++i)
            for (int j : siblings_[i])
                if (i <= j) ++n;
        return n;
    }

    VertexSet parents(const Vertex& v) const { return to_set(parents_[checked_index(v)]); }
    VertexSet children(const Vertex& v) const { return to_set(children_[checked_index(v)]); }

    /// Bidirected neighbours of v.
    VertexSet siblings(const Vertex& v) const { return to_set(siblings_[checked_index(v)]); }

    /// Reflexive-transitive closure over directed edges, against the arrows.
    VertexSet ancestors(const Vertex& v) const { return closure(checked_index(v), parents_); }

    /// Reflexive-transitive closure over directed edges, along the arrows.
    VertexSet descendants(const Vertex& v) const { return closure(checked_index(v), children_); }

    /// Strongly connected component of v over the directed part, with the
    /// convention: empty if v lies on no directed cycle, {v} if its only
    /// cycle is a self-loop, otherwise the full mutually-reachable set.
    VertexSet scc(const Vertex& v) const {
        int s = checked_index(v);
        std::vector<char> down = reach(s, children_);
        std::vector<char> up = reach(s, parents_);
        VertexSet comp;
        for (int i = 0; i < static_cast<int>(order_.size()); ++i)
            if (i != s && down[i] && up[i]) comp.insert(order_[i]);
        if (!comp.empty()) {
            comp.insert(order_[s]);
            return comp;
        }
        if (std::binary_search(children_[s].begin(), children_[s].end(), s))
            return {order_[s]};
        return {};
    }

    /// Removes every edge with an arrowhead into a vertex of `overline`
    /// (directed heads and both ends of bidirected edges) and every directed
    /// edge whose tail lies in `underline`. Bidirected edges have no tails.
    MixedGraph mutilate(const VertexSet& overline, const VertexSet& underline) const {
        for (const auto& v : overline) checked_index(v);
        for (const auto& v : underline) checked_index(v);
        MixedGraph out(allow_self_loops_);
        for (const auto& v : order_) out.add_vertex(v);
        for (int i = 0; i < static_cast<int>(order_.size()); ++i) {
            const Vertex& tail = order_[i];
            for (int j : children_[i]) {
                const Vertex& head = order_[j];
                if (overline.count(head) || underline.count(tail)) continue;
                out.add_directed(tail, head);
            }
            for (int j : siblings_[i]) {
                if (i > j) continue;
                if (overline.count(order_[i]) || overline.count(order_[j])) continue;
                out.add_bidirected(order_[i], order_[j]);
            }
        }
        return out;
    }

    /// Vertices with a directed path into some member of `to` (reflexive).
    VertexSet ancestors_of(const VertexSet& to) const {
        VertexSet out;
        for (const auto& v : to) {
            VertexSet a = ancestors(v);
            out.insert(a.begin(), a.end());
        }
        return out;
    }

    int checked_index(const Vertex& v) const {
        auto it = index_.find(v);
        if (it == index_.end()) throw std::invalid_argument("unknown vertex: " + v);
        return it->second;
    }

    // Index-level adjacency, used by the d-separation traversal.
    const std::vector<int>& children_of(int i) const { return children_[i]; }
    const std::vector<int>& parents_of(int i) const { return parents_[i]; }
    const std::vector<int>& siblings_of(int i) const { return siblings_[i]; }
    const Vertex& name_of(int i) const { return order_[i]; }

private:
    explicit MixedGraph(bool allow_self_loops) : allow_self_loops_(allow_self_loops) {}

    static void insert_sorted(std::vector<int>& xs, int v) {
        auto it = std::lower_bound(xs.begin(), xs.end(), v);
        if (it == xs.end() || *it != v) xs.insert(it, v);
    }

    VertexSet to_set(const std::vector<int>& xs) const {
        VertexSet out;
        for (int i : xs) out.insert(order_[i]);
        return out;
    }

    std::vector<char> reach(int start, const std::vector<std::vector<int>>& adj) const {
        std::vector<char> seen(order_.size(), 0);
        std::vector<int> stack{start};
        seen[start] = 1;
        while (!stack.empty()) {
            int v = stack.back();
            stack.pop_back();
            for (int u : adj[v])
                if (!seen[u]) {
                    seen[u] = 1;
                    stack.push_back(u);
                }
        }
        return seen;
    }

    VertexSet closure(int start, const std::vector<std::vector<int>>& adj) const {
        std::vector<char> seen = reach(start, adj);
        VertexSet out;
        for (int i = 0; i < static_cast<int>(order_.size()); ++i)
            if (seen[i]) out.insert(order_[i]);
        return out;
    }

    bool allow_self_loops_;
    std::vector<Vertex> order_;
    std::map<Vertex, int> index_;
    std::vector<std::vector<int>> children_;
    std::vector<std::vector<int>> parents_;
    std::vector<std::vector<int>> siblings_;
};

} // namespace scgid
