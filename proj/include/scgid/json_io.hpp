#pragma once

#include <fstream>
#include <optional>
#include <sstream>
#include <string>

#include <json.hpp>

#include "scgid/simulation.hpp"
#include "scgid/temporal.hpp"

namespace scgid {

using nlohmann::json;

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    out << content;
}

namespace detail {

inline json edges_to_json(const MixedGraph& g, bool temporal) {
    auto normalize = [&](Edge e) {
        if (e.kind != EdgeKind::Bidirected) return e;
        bool swap;
        if (temporal) {
            TemporalVertex a = TemporalVertex::parse(e.from);
            TemporalVertex b = TemporalVertex::parse(e.to);
            swap = b < a;
        } else {
            swap = e.to < e.from;
        }
        if (swap) std::swap(e.from, e.to);
        return e;
    };
    std::vector<Edge> edges;
    for (const Edge& e : g.edges()) edges.push_back(normalize(e));
    std::sort(edges.begin(), edges.end());
    json out = json::array();
    for (const Edge& e : edges)
        out.push_back({{"from", e.from},
                       {"to", e.to},
                       {"kind", e.kind == EdgeKind::Directed ? "directed" : "bidirected"}});
    return out;
}

inline EdgeKind parse_kind(const json& e) {
    std::string k = e.at("kind").get<std::string>();
    if (k == "directed") return EdgeKind::Directed;
    if (k == "bidirected") return EdgeKind::Bidirected;
    throw std::invalid_argument("unknown edge kind: " + k);
}

} // namespace detail

/// Canonical JSON form of an SCG: sorted vertices, sorted edges, gamma_max.
inline std::string to_json_text(const SummaryCausalGraph& g) {
    json doc;
    std::vector<std::string> names = g.base.vertices();
    std::sort(names.begin(), names.end());
    doc["vertices"] = names;
    doc["edges"] = detail::edges_to_json(g.base, false);
    doc["gamma_max"] = g.gamma_max;
    return doc.dump(2) + "\n";
}

/// Canonical JSON form of a full-time graph: vertices "S@t", window [t0,tmax].
inline std::string to_json_text(const FullTimeGraph& g) {
    json doc;
    std::vector<TemporalVertex> vs;
    for (const auto& name : g.graph().vertices()) vs.push_back(TemporalVertex::parse(name));
    std::sort(vs.begin(), vs.end());
    json names = json::array();
    for (const auto& v : vs) names.push_back(v.name());
    doc["vertices"] = names;
    doc["edges"] = detail::edges_to_json(g.graph(), true);
    doc["gamma_max"] = g.window().span();
    doc["window"] = {g.window().t0, g.window().tmax};
    return doc.dump(2) + "\n";
}

inline SummaryCausalGraph scg_from_json(const json& doc) {
    SummaryCausalGraph g;
    g.gamma_max = doc.at("gamma_max").get<int>();
    if (g.gamma_max < 0) throw std::invalid_argument("gamma_max must be >= 0");
    for (const auto& v : doc.at("vertices")) g.base.add_vertex(v.get<std::string>());
    for (const auto& e : doc.at("edges")) {
        std::string from = e.at("from").get<std::string>();
        std::string to = e.at("to").get<std::string>();
        if (detail::parse_kind(e) == EdgeKind::Directed)
            g.base.add_directed(from, to);
        else
            g.base.add_bidirected(from, to);
    }
    return g;
}

inline FullTimeGraph full_time_from_json(const json& doc) {
    if (!doc.contains("window"))
        throw std::invalid_argument("full-time graph file requires a \"window\" field");
    Window w{doc.at("window").at(0).get<int>(), doc.at("window").at(1).get<int>()};
    std::set<Series> series;
    for (const auto& v : doc.at("vertices")) {
        TemporalVertex tv = TemporalVertex::parse(v.get<std::string>());
        if (!w.contains(tv.time))
            throw std::invalid_argument("vertex outside window: " + tv.name());
        series.insert(tv.series);
    }
    FullTimeGraph g(std::vector<Series>(series.begin(), series.end()), w);
    for (const auto& e : doc.at("edges")) {
        TemporalVertex from = TemporalVertex::parse(e.at("from").get<std::string>());
        TemporalVertex to = TemporalVertex::parse(e.at("to").get<std::string>());
        if (detail::parse_kind(e) == EdgeKind::Directed)
            g.add_directed(from, to);
        else
            g.add_bidirected(from, to);
    }
    if (!g.slices_acyclic())
        throw std::invalid_argument("full-time graph has a cyclic time slice");
    return g;
}

inline bool is_full_time_document(const json& doc) { return doc.contains("window"); }

inline SummaryCausalGraph load_scg(const std::string& path) {
    json doc = json::parse(read_text_file(path));
    if (is_full_time_document(doc))
        throw std::invalid_argument(path + ": expected a summary graph, found a full-time graph");
    return scg_from_json(doc);
}

inline FullTimeGraph load_full_time(const std::string& path) {
    json doc = json::parse(read_text_file(path));
    return full_time_from_json(doc);
}

// ---------------------------------------------------------------------------
// structural model files

inline std::string to_json_text(const ModelSpec& ms) {
    json doc;
    doc["family"] = ms.family == ModelFamily::Linear ? "linear" : "discrete";
    doc["series"] = ms.series;
    doc["window"] = {ms.window.t0, ms.window.tmax};
    doc["gamma_max"] = ms.gamma_max;
    json eqs = json::array();
    for (const auto& e : ms.equations) {
        json je;
        je["series"] = e.series;
        json parents = json::array();
        for (const auto& p : e.parents) {
            json jp{{"series", p.series}, {"lag", p.lag}};
            if (ms.family == ModelFamily::Linear) jp["coeff"] = p.coeff;
            parents.push_back(jp);
        }
        je["parents"] = parents;
        if (ms.family == ModelFamily::Linear)
            je["intercept"] = e.intercept;
        else
            je["table"] = e.table;
        eqs.push_back(je);
    }
    doc["equations"] = eqs;
    if (ms.family == ModelFamily::Linear) {
        json noise = json::array();
        for (const auto& n : ms.noise) {
            json jn{{"series", n.series}, {"mean", n.mean}, {"sd", n.sd}};
            if (!n.shared_group.empty()) {
                jn["shared_group"] = n.shared_group;
                jn["shared_weight"] = n.shared_weight;
            }
            noise.push_back(jn);
        }
        doc["noise"] = noise;
    }
    return doc.dump(2) + "\n";
}

inline ModelSpec model_from_json(const json& doc) {
    ModelSpec ms;
    std::string family = doc.at("family").get<std::string>();
    if (family == "linear")
        ms.family = ModelFamily::Linear;
    else if (family == "discrete")
        ms.family = ModelFamily::Discrete;
    else
        throw std::invalid_argument("unknown model family: " + family);
    ms.series = doc.at("series").get<std::vector<std::string>>();
    ms.window = {doc.at("window").at(0).get<int>(), doc.at("window").at(1).get<int>()};
    ms.gamma_max = doc.at("gamma_max").get<int>();
    for (const auto& je : doc.at("equations")) {
        Equation e;
        e.series = je.at("series").get<std::string>();
        for (const auto& jp : je.at("parents")) {
            ParentRef p;
            p.series = jp.at("series").get<std::string>();
            p.lag = jp.at("lag").get<int>();
            if (ms.family == ModelFamily::Linear) p.coeff = jp.at("coeff").get<double>();
            e.parents.push_back(p);
        }
        if (ms.family == ModelFamily::Linear)
            e.intercept = je.value("intercept", 0.0);
        else
            e.table = je.at("table").get<std::vector<double>>();
        ms.equations.push_back(std::move(e));
    }
    if (ms.family == ModelFamily::Linear)
        for (const auto& jn : doc.at("noise")) {
            NoiseSpec n;
            n.series = jn.at("series").get<std::string>();
            n.mean = jn.value("mean", 0.0);
            n.sd = jn.value("sd", 1.0);
            n.shared_group = jn.value("shared_group", std::string());
            n.shared_weight = jn.value("shared_weight", 0.0);
            ms.noise.push_back(std::move(n));
        }
    ms.validate();
    return ms;
}

inline ModelSpec load_model(const std::string& path) {
    return model_from_json(json::parse(read_text_file(path)));
}

/// Graphviz rendering; bidirected edges drawn dashed with both arrowheads.
/// Export only, never parsed back.
inline std::string to_dot(const MixedGraph& g, const std::string& name = "G") {
    std::ostringstream out;
    out << "digraph \"" << name << "\" {\n";
    std::vector<std::string> names = g.vertices();
    std::sort(names.begin(), names.end());
    for (const auto& v : names) out << "  \"" << v << "\";\n";
    std::vector<Edge> edges = g.edges();
    std::sort(edges.begin(), edges.end());
    for (const Edge& e : edges) {
        if (e.kind == EdgeKind::Directed)
            out << "  \"" << e.from << "\" -> \"" << e.to << "\";\n";
        else
            out << "  \"" << e.from << "\" -> \"" << e.to << "\" [dir=both, style=dashed];\n";
    }
    out << "}\n";
    return out.str();
}

} // namespace scgid
