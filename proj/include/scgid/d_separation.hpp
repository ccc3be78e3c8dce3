#pragma once

#include <stdexcept>
#include <vector>

#include "scgid/mixed_graph.hpp"

namespace scgid {

namespace detail {

inline void require_disjoint(const VertexSet& a, const VertexSet& b, const char* what) {
    for (const auto& v : a)
        if (b.count(v)) throw std::invalid_argument(std::string("overlapping sets: ") + what + " share " + v);
}

} // namespace detail

/// True iff every path between A and B is blocked by C.
///
/// A vertex on a path is a collider when both incident path edges carry an
/// arrowhead at it (-> v <-, -> v <->, <-> v <-, <-> v <->). A collider lets
/// the path through only if it has a descendant in C (itself included); a
/// non-collider blocks exactly when it is in C.
///
/// Implemented as reachability over (vertex, entry-mark) states, which finds
/// an activated walk iff an activated simple path exists; the exhaustive
/// path-enumeration equivalent lives in the test suite as an oracle.
/// Self-loop edges never occur on a simple path and are skipped.
inline bool d_separated(const MixedGraph& g, const VertexSet& a, const VertexSet& b,
                        const VertexSet& c) {
    detail::require_disjoint(a, b, "A,B");
    detail::require_disjoint(a, c, "A,C");
    detail::require_disjoint(b, c, "B,C");
    for (const auto& v : b) g.checked_index(v);
    for (const auto& v : c) g.checked_index(v);

    const int n = static_cast<int>(g.vertex_count());
    std::vector<char> in_b(n, 0), in_c(n, 0), anc_c(n, 0);
    for (const auto& v : b) in_b[g.checked_index(v)] = 1;
    for (const auto& v : c) in_c[g.checked_index(v)] = 1;
    for (const auto& v : g.ancestors_of(c)) anc_c[g.checked_index(v)] = 1;

    // state = vertex index * 2 + (entered through an arrowhead ? 1 : 0)
    std::vector<char> seen(2 * static_cast<std::size_t>(n), 0);
    std::vector<int> stack;

    auto visit = [&](int v, bool head_in) {
        int s = v * 2 + (head_in ? 1 : 0);
        if (seen[s]) return false;
        seen[s] = 1;
        stack.push_back(s);
        return in_b[v] != 0;
    };

    // Leaving a start vertex is unconstrained (A is disjoint from C).
    for (const auto& av : a) {
        int i = g.checked_index(av);
        for (int u : g.children_of(i))
            if (u != i && visit(u, true)) return false;
        for (int u : g.parents_of(i))
            if (u != i && visit(u, false)) return false;
        for (int u : g.siblings_of(i))
            if (u != i && visit(u, true)) return false;
    }

    while (!stack.empty()) {
        int s = stack.back();
        stack.pop_back();
        int v = s / 2;
        bool head_in = (s % 2) != 0;
        if (in_b[v]) continue; // endpoint reached; no need to pass through

        // Continue via an edge whose mark at v is `head_out`:
        //   collider at v  <=>  head_in && head_out
        auto passable = [&](bool head_at_v) {
            return (head_in && head_at_v) ? anc_c[v] != 0 : in_c[v] == 0;
        };
        if (passable(false)) // leave through a tail: directed edge v -> u
            for (int u : g.children_of(v))
                if (u != v && visit(u, true)) return false;
        if (passable(true)) { // leave through a head: v <- u or v <-> u
            for (int u : g.parents_of(v))
                if (u != v && visit(u, false)) return false;
            for (int u : g.siblings_of(v))
                if (u != v && visit(u, true)) return false;
        }
    }
    return true;
}

} // namespace scgid
