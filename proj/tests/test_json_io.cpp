#include <catch2/catch_amalgamated.hpp>

#include "scgid/json_io.hpp"
#include "support/fixtures.hpp"

using namespace scgid;
using test_support::fixture_path;

TEST_CASE("every figure fixture round-trips byte-identically") {
    for (const char* name :
         {"fig1a.json", "fig2a.json", "fig3a.json", "fig4a.json", "fig5a.json", "fig5b.json",
          "fig5c.json", "fig1b.json", "fig1c.json", "fig2b.json", "fig3b.json", "fig3c.json",
          "fig4b.json"}) {
        CAPTURE(name);
        std::string text = read_text_file(fixture_path(name));
        json doc = json::parse(text);
        if (is_full_time_document(doc)) {
            FullTimeGraph g = full_time_from_json(doc);
            CHECK(to_json_text(g) == text);
        } else {
            SummaryCausalGraph g = scg_from_json(doc);
            CHECK(to_json_text(g) == text);
        }
    }
}

TEST_CASE("summary loader rejects full-time files and vice versa") {
    CHECK_THROWS_AS(load_scg(fixture_path("fig1b.json")), std::invalid_argument);
    CHECK_THROWS_AS(load_full_time(fixture_path("fig1a.json")), std::invalid_argument);
    CHECK_THROWS_AS(load_scg(fixture_path("does-not-exist.json")), std::runtime_error);
}

TEST_CASE("malformed documents are rejected") {
    CHECK_THROWS(scg_from_json(json::parse(R"({"vertices": ["A"], "edges": []})")));
    CHECK_THROWS(scg_from_json(json::parse(
        R"({"vertices": ["A"], "edges": [{"from":"A","to":"B","kind":"directed"}], "gamma_max": 1})")));
    CHECK_THROWS(scg_from_json(json::parse(
        R"({"vertices": ["A","B"], "edges": [{"from":"A","to":"B","kind":"wavy"}], "gamma_max": 1})")));
    CHECK_THROWS(scg_from_json(json::parse(
        R"({"vertices": ["A"], "edges": [], "gamma_max": -1})")));
    // cyclic slice
    CHECK_THROWS(full_time_from_json(json::parse(R"({
        "vertices": ["A@0","B@0"],
        "edges": [{"from":"A@0","to":"B@0","kind":"directed"},
                  {"from":"B@0","to":"A@0","kind":"directed"}],
        "gamma_max": 0, "window": [0,0]})")));
}

TEST_CASE("dot export lists every edge") {
    SummaryCausalGraph g = test_support::fixture_scg("fig2a.json");
    std::string dot = to_dot(g.base, "fig2a");
    CHECK(dot.find("\"X\" -> \"Y\";") != std::string::npos);
    CHECK(dot.find("[dir=both, style=dashed]") != std::string::npos);
    CHECK(dot.find("digraph") == 0);
}
