#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "scgid/mixed_graph.hpp"

using namespace scgid;

namespace {

MixedGraph fig1a_scg() {
    MixedGraph g = MixedGraph::series_level();
    for (const char* v : {"X", "Y", "W"}) g.add_vertex(v);
    g.add_directed("X", "Y");
    g.add_directed("X", "W");
    g.add_directed("W", "Y");
    g.add_directed("Y", "W");
    g.add_directed("X", "X");
    g.add_directed("Y", "Y");
    g.add_directed("W", "W");
    return g;
}

MixedGraph random_series_graph(std::mt19937& rng, int n, double p_dir, double p_bi) {
    MixedGraph g = MixedGraph::series_level();
    for (int i = 0; i < n; ++i) g.add_vertex("V" + std::to_string(i));
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    const auto& vs = g.vertices();
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (coin(rng) < p_dir) g.add_directed(vs[i], vs[j]);
    for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j)
            if (coin(rng) < p_bi) g.add_bidirected(vs[i], vs[j]);
    return g;
}

} // namespace

TEST_CASE("parents over directed edges only") {
    MixedGraph g = MixedGraph::series_level();
    g.add_vertex("X");
    g.add_vertex("Y");
    g.add_directed("X", "Y");
    CHECK(g.parents("Y") == VertexSet{"X"});
    CHECK(g.parents("X") == VertexSet{});

    MixedGraph h = MixedGraph::series_level();
    h.add_vertex("X");
    h.add_vertex("Y");
    h.add_bidirected("X", "Y");
    CHECK(h.parents("Y") == VertexSet{});
    CHECK(h.siblings("Y") == VertexSet{"X"});

    CHECK(fig1a_scg().parents("Y") == VertexSet{"X", "W", "Y"});
}

TEST_CASE("ancestors and descendants are reflexive closures") {
    MixedGraph g = MixedGraph::series_level();
    for (const char* v : {"X", "W", "Y"}) g.add_vertex(v);
    g.add_directed("X", "W");
    g.add_directed("W", "Y");
    CHECK(g.ancestors("Y") == VertexSet{"X", "W", "Y"});
    CHECK(g.descendants("Y") == VertexSet{"Y"});
    CHECK(g.descendants("X") == VertexSet{"X", "W", "Y"});

    // 2-cycle X<->W plus X->Y, W->Y and self-loops
    MixedGraph f = MixedGraph::series_level();
    for (const char* v : {"X", "W", "Y"}) f.add_vertex(v);
    f.add_directed("X", "W");
    f.add_directed("W", "X");
    f.add_directed("X", "Y");
    f.add_directed("W", "Y");
    f.add_directed("X", "X");
    f.add_directed("W", "W");
    f.add_directed("Y", "Y");
    CHECK(f.ancestors("Y") == VertexSet{"X", "W", "Y"});
}

TEST_CASE("scc uses the three-case convention") {
    MixedGraph g = MixedGraph::series_level();
    g.add_vertex("X");
    g.add_vertex("Y");
    g.add_directed("X", "Y");
    CHECK(g.scc("X") == VertexSet{});

    MixedGraph h = MixedGraph::series_level();
    h.add_vertex("Y");
    h.add_directed("Y", "Y");
    CHECK(h.scc("Y") == VertexSet{"Y"});

    CHECK(fig1a_scg().scc("Y") == VertexSet{"Y", "W"});
    CHECK(fig1a_scg().scc("X") == VertexSet{"X"});
}

TEST_CASE("scc components partition the cyclic vertices") {
    std::mt19937 rng(7);
    for (int trial = 0; trial < 60; ++trial) {
        MixedGraph g = random_series_graph(rng, 6, 0.25, 0.0);
        const auto& vs = g.vertices();
        for (const auto& u : vs)
            for (const auto& v : vs) {
                if (u == v) continue;
                VertexSet su = g.scc(u), sv = g.scc(v);
                if (su.empty() || sv.empty()) continue;
                VertexSet inter;
                std::set_intersection(su.begin(), su.end(), sv.begin(), sv.end(),
                                      std::inserter(inter, inter.begin()));
                CHECK((su == sv || inter.empty()));
            }
    }
}

TEST_CASE("mutilate removes heads into overline and tails out of underline") {
    MixedGraph g = MixedGraph::series_level();
    g.add_vertex("X");
    g.add_vertex("Y");
    g.add_directed("X", "Y");
    g.add_bidirected("X", "Y");

    MixedGraph m1 = g.mutilate({"Y"}, {});
    CHECK(m1.edges().empty());

    MixedGraph m2 = g.mutilate({}, {"X"});
    CHECK(m2.directed_edge_count() == 0);
    CHECK(m2.has_bidirected("X", "Y"));
}

TEST_CASE("mutilation is idempotent and monotone") {
    std::mt19937 rng(11);
    for (int trial = 0; trial < 40; ++trial) {
        MixedGraph g = random_series_graph(rng, 5, 0.3, 0.2);
        const auto& vs = g.vertices();
        VertexSet over{vs[0], vs[2]}, under{vs[1]};
        MixedGraph m = g.mutilate(over, under);
        MixedGraph mm = m.mutilate(over, under);
        CHECK(m.edges() == mm.edges());
        // every surviving edge is an edge of g
        for (const Edge& e : m.edges()) {
            if (e.kind == EdgeKind::Directed)
                CHECK(g.has_directed(e.from, e.to));
            else
                CHECK(g.has_bidirected(e.from, e.to));
        }
    }
}

TEST_CASE("edge bookkeeping") {
    MixedGraph g = MixedGraph::series_level();
    g.add_vertex("A");
    g.add_vertex("B");
    g.add_directed("A", "B");
    g.add_directed("A", "B"); // duplicate is a no-op
    g.add_bidirected("B", "A");
    g.add_bidirected("A", "B");
    CHECK(g.directed_edge_count() == 1);
    CHECK(g.bidirected_edge_count() == 1);

    CHECK_THROWS_AS(g.parents("nope"), std::invalid_argument);
    CHECK_THROWS_AS(g.add_directed("A", "nope"), std::invalid_argument);

    MixedGraph t = MixedGraph::time_level();
    t.add_vertex("A@0");
    CHECK_THROWS_AS(t.add_directed("A@0", "A@0"), std::invalid_argument);
    CHECK_THROWS_AS(t.add_bidirected("A@0", "A@0"), std::invalid_argument);
}
