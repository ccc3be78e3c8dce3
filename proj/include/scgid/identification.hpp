#pragma once

#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "scgid/d_separation.hpp"
#include "scgid/estimand.hpp"
#include "scgid/temporal.hpp"

namespace scgid {

/// The effect of interest: treatment series at lag `lag` before the outcome's
/// reference time, contrasting treatment values x_from against x_to.
struct EffectQuery {
    Series treatment;
    int lag = 0;
    Series outcome;
    int time = 0;
    double x_from = 0.0;
    double x_to = 1.0;
};

enum class IdStatus { Identifiable, NotIdentifiableByAdjustment, Unknown };

inline const char* to_string(IdStatus s) {
    switch (s) {
    case IdStatus::Identifiable: return "IDENTIFIABLE";
    case IdStatus::NotIdentifiableByAdjustment: return "NOT_IDENTIFIABLE_BY_ADJUSTMENT";
    case IdStatus::Unknown: return "UNKNOWN";
    }
    return "?";
}

struct ConditionCheck {
    int id = 0; // positions 1..5 of the identification checklist
    std::string description;
    bool passed = false;
    std::string detail; // populated on failure
};

struct Verdict {
    IdStatus status = IdStatus::Unknown;
    std::vector<ConditionCheck> conditions;
    std::vector<Series> violating_cycle; // witness when status is NotIdentifiableByAdjustment
};

struct Decision {
    Verdict verdict;
    std::optional<Estimand> estimand; // present iff status == Identifiable
};

namespace detail {

inline std::string braced_set(const Series& first, const VertexSet& rest) {
    std::ostringstream os;
    os << "{" << first;
    for (const auto& v : rest)
        if (v != first) os << ", " << v;
    os << "}";
    return os.str();
}

/// scc(S) within {S} under the three-case convention.
inline ConditionCheck scc_condition(const SummaryCausalGraph& g, const Series& s, int id) {
    VertexSet comp = g.base.scc(s);
    ConditionCheck c{id, "scc(" + s + ") within {" + s + "}", comp.size() <= 1, ""};
    if (!c.passed) c.detail = "scc(" + s + ") = " + braced_set(s, comp);
    return c;
}

/// No bidirected edge between `partner` and an ancestor of `anchor`.
inline ConditionCheck confounder_condition(const SummaryCausalGraph& g, const Series& anchor,
                                           const Series& partner, int id) {
    VertexSet anc = g.base.ancestors(anchor);
    VertexSet sib = g.base.siblings(partner);
    VertexSet bad;
    for (const auto& z : sib)
        if (anc.count(z)) bad.insert(z);
    ConditionCheck c{id,
                     "no bidirected edge between " + partner + " and an ancestor of " + anchor,
                     bad.empty(), ""};
    if (!c.passed) {
        std::ostringstream os;
        bool first = true;
        for (const auto& z : bad) {
            os << (first ? "" : "; ") << z << " <-> " << partner << " with " << z
               << " in ancestors(" << anchor << ")";
            first = false;
        }
        c.detail = os.str();
    }
    return c;
}

inline ConditionCheck pp_disjoint_condition(const SummaryCausalGraph& g, const EffectQuery& q,
                                            int id) {
    auto pp_y = possible_parent_offsets(g, q.outcome);
    auto pp_x = possible_parent_offsets(g, q.treatment);
    std::vector<EstimandVar> shared;
    for (const auto& [series, off] : pp_x)
        if (pp_y.count({series, off - q.lag})) shared.push_back({series, off - q.lag});
    ConditionCheck c{id, "PP(" + q.treatment + "_{t-" + std::to_string(q.lag) + "}) disjoint from PP(" +
                             q.outcome + "_t)",
                     shared.empty(), ""};
    if (!c.passed) {
        std::sort(shared.begin(), shared.end());
        std::ostringstream os;
        os << "shared possible parents:";
        for (const auto& v : shared) os << " " << v.text();
        c.detail = os.str();
    }
    return c;
}

/// Some directed cycle through s other than the self-loop, as a vertex list
/// s -> ... -> s. Empty when none exists.
inline std::vector<Series> cycle_witness(const SummaryCausalGraph& g, const Series& s) {
    VertexSet comp = g.base.scc(s);
    if (comp.size() <= 1) return {};
    // shortest path s -> ... -> s through the component, avoiding the self-loop
    std::map<Series, Series> pred;
    std::vector<Series> queue{s};
    for (std::size_t i = 0; i < queue.size(); ++i) {
        Series v = queue[i];
        for (const auto& c : g.base.children(v)) {
            if (!comp.count(c)) continue;
            if (c == s && v != s) {
                std::vector<Series> path{s};
                Series cur = v;
                std::vector<Series> back;
                while (cur != s) {
                    back.push_back(cur);
                    cur = pred.at(cur);
                }
                for (auto it = back.rbegin(); it != back.rend(); ++it) path.push_back(*it);
                path.push_back(s);
                return path;
            }
            if (c != s && !pred.count(c)) {
                pred[c] = v;
                queue.push_back(c);
            }
        }
    }
    return {};
}

inline void validate_query(const SummaryCausalGraph& g, const EffectQuery& q) {
    if (!g.has_series(q.treatment)) throw std::invalid_argument("unknown series: " + q.treatment);
    if (!g.has_series(q.outcome)) throw std::invalid_argument("unknown series: " + q.outcome);
    if (!possible_parent_offsets(g, q.outcome).count({q.treatment, -q.lag}))
        throw std::invalid_argument(q.treatment + "_{t-" + std::to_string(q.lag) +
                                    "} is not a possible parent of " + q.outcome +
                                    "_t (check the edge and 0 <= lag <= gamma_max)");
}

inline std::vector<EstimandVar> role_vars(const std::set<std::pair<Series, int>>& offsets,
                                          std::optional<std::pair<Series, int>> drop = {}) {
    std::vector<EstimandVar> out;
    for (const auto& [series, off] : offsets) {
        if (drop && drop->first == series && drop->second == off) continue;
        out.push_back({series, off});
    }
    std::sort(out.begin(), out.end());
    return out;
}

} // namespace detail

/// Adjustment formula of the controlled-direct-effect decision:
///   E[Y_t | X_{t-g}=x', Z=z] - E[Y_t | X_{t-g}=x, Z=z],  Z = PP(Y_t) \ {X_{t-g}}.
/// Built unconditionally; callers are expected to consult the verdict before
/// treating it as valid (the negative-control experiments evaluate it on
/// purpose where it is not).
inline Estimand make_cde_estimand(const SummaryCausalGraph& g, const EffectQuery& q) {
    detail::validate_query(g, q);
    EstimandVar outcome{q.outcome, 0};
    EstimandVar treatment{q.treatment, -q.lag};
    std::vector<EstimandVar> z =
        detail::role_vars(possible_parent_offsets(g, q.outcome), {{q.treatment, -q.lag}});

    Estimand e;
    if (!z.empty()) e.sets["Z"] = z;
    auto expect = [&](const char* sym) {
        Expectation ex;
        ex.target = outcome;
        ex.scalar_given.push_back({treatment, sym});
        if (!z.empty()) ex.set_given.push_back({"Z", "z"});
        return make_expr({ex});
    };
    e.root = make_expr({Difference{expect("x'"), expect("x")}});
    return e;
}

/// Adjustment formula of the natural-direct-effect decision:
///   sum_z ( CDE(x,x',z) * sum_a P(Z=z | X_{t-g}=x, A=a) * P(A=a) )
/// with Z = PP(Y_t) \ {X_{t-g}} and A = PP(X_{t-g}). With A empty the inner
/// weight collapses to P(Z=z | X_{t-g}=x); with Z empty the whole formula
/// collapses to the CDE difference.
inline Estimand make_nde_estimand(const SummaryCausalGraph& g, const EffectQuery& q) {
    Estimand cde = make_cde_estimand(g, q);
    EstimandVar treatment{q.treatment, -q.lag};
    std::vector<EstimandVar> z =
        detail::role_vars(possible_parent_offsets(g, q.outcome), {{q.treatment, -q.lag}});
    if (z.empty()) return cde;

    std::vector<EstimandVar> a;
    for (const auto& [series, off] : possible_parent_offsets(g, q.treatment))
        a.push_back({series, off - q.lag});
    std::sort(a.begin(), a.end());

    Estimand e;
    e.sets["Z"] = z;
    if (!a.empty()) e.sets["A"] = a;

    ExprPtr weight;
    if (a.empty()) {
        Probability p;
        p.set_targets.push_back({"Z", "z"});
        p.scalar_given.push_back({treatment, "x"});
        weight = make_expr({p});
    } else {
        Probability pz;
        pz.set_targets.push_back({"Z", "z"});
        pz.scalar_given.push_back({treatment, "x"});
        pz.set_given.push_back({"A", "a"});
        Probability pa;
        pa.set_targets.push_back({"A", "a"});
        weight = make_expr({SumOver{"A", "a", make_expr({Product{{make_expr({pz}), make_expr({pa})}}})}});
    }
    e.root = make_expr({SumOver{"Z", "z", make_expr({Product{{cde.root, weight}}})}});
    return e;
}

/// Controlled-direct-effect decision from the summary graph alone.
///
/// IDENTIFIABLE requires scc(Y) within {Y} and no bidirected edge between Y
/// and one of its ancestors (Y itself counts: ancestors are reflexive, so a
/// bidirected self-loop on Y violates the condition). Under the
/// no-hidden-confounding assumption a cycle through Y is a proof of
/// non-identifiability by adjustment; otherwise failures yield UNKNOWN.
inline Decision check_cde(const SummaryCausalGraph& g, const EffectQuery& q,
                          bool assume_no_hidden_confounding = false) {
    detail::validate_query(g, q);
    if (assume_no_hidden_confounding && g.base.bidirected_edge_count() > 0)
        throw std::invalid_argument(
            "no-hidden-confounding assumption conflicts with bidirected edges in the graph");

    Decision d;
    ConditionCheck c1 = detail::scc_condition(g, q.outcome, 1);
    ConditionCheck c4 = detail::confounder_condition(g, q.outcome, q.outcome, 4);
    d.verdict.conditions = {c1, c4};

    if (c1.passed && c4.passed) {
        d.verdict.status = IdStatus::Identifiable;
        d.estimand = make_cde_estimand(g, q);
    } else if (assume_no_hidden_confounding && !c1.passed) {
        d.verdict.status = IdStatus::NotIdentifiableByAdjustment;
        d.verdict.violating_cycle = detail::cycle_witness(g, q.outcome);
    } else {
        d.verdict.status = IdStatus::Unknown;
    }
    return d;
}

/// Natural-direct-effect decision from the summary graph alone. All five
/// conditions must pass; no necessity result exists for this effect, so the
/// negative arm is always UNKNOWN.
inline Decision check_nde(const SummaryCausalGraph& g, const EffectQuery& q) {
    detail::validate_query(g, q);
    Decision d;
    ConditionCheck c1 = detail::scc_condition(g, q.outcome, 1);
    ConditionCheck c2 = detail::scc_condition(g, q.treatment, 2);
    ConditionCheck c3 = detail::pp_disjoint_condition(g, q, 3);
    ConditionCheck c4 = detail::confounder_condition(g, q.outcome, q.outcome, 4);
    ConditionCheck c5 = detail::confounder_condition(g, q.outcome, q.treatment, 5);
    d.verdict.conditions = {c1, c2, c3, c4, c5};
    bool all = c1.passed && c2.passed && c3.passed && c4.passed && c5.passed;
    d.verdict.status = all ? IdStatus::Identifiable : IdStatus::Unknown;
    if (all) d.estimand = make_nde_estimand(g, q);
    return d;
}

/// The set that may replace the true parents of Y_t in a do() on all parents:
/// the possible parents of Y_t. Requires gamma_max headroom inside the window
/// so that no possible parent is truncated away.
inline TemporalVertexSet property1_reduction(const SummaryCausalGraph& g, const Series& y, int t,
                                             const Window& window) {
    if (t - g.gamma_max < window.t0)
        throw std::invalid_argument("insufficient window headroom: need t - gamma_max >= t0");
    if (!window.contains(t)) throw std::invalid_argument("query time outside window");
    return possible_parents(g, y, t, window);
}

enum class DoRule { R1, R2, R3 };

namespace detail {
inline void rule_sets_disjoint(const VertexSet& y, const VertexSet& x, const VertexSet& z,
                               const VertexSet& w) {
    require_disjoint(y, x, "Y,X");
    require_disjoint(y, z, "Y,Z");
    require_disjoint(y, w, "Y,W");
    require_disjoint(x, z, "X,Z");
    require_disjoint(x, w, "X,W");
    require_disjoint(z, w, "Z,W");
}
} // namespace detail

/// Graphical applicability of one rewrite rule on a full-time graph:
///   R1 drops an observation, tested in G with arrows into Z removed;
///   R2 turns an intervention into an observation, tested with arrows into Z
///      and arrows out of X removed;
///   R3 drops an intervention, tested with arrows into Z and into X(W)
///      removed, where X(W) are the members of X that are not ancestors of
///      any W-vertex once arrows into Z are gone.
inline bool rule_applicable(const FullTimeGraph& g, DoRule rule, const TemporalVertexSet& y,
                            const TemporalVertexSet& x, const TemporalVertexSet& z,
                            const TemporalVertexSet& w) {
    auto names = [](const TemporalVertexSet& s) {
        VertexSet out;
        for (const auto& v : s) out.insert(v.name());
        return out;
    };
    VertexSet ny = names(y), nx = names(x), nz = names(z), nw = names(w);
    detail::rule_sets_disjoint(ny, nx, nz, nw);

    VertexSet cond = nz;
    cond.insert(nw.begin(), nw.end());

    const MixedGraph& base = g.graph();
    MixedGraph m = base;
    switch (rule) {
    case DoRule::R1: m = base.mutilate(nz, {}); break;
    case DoRule::R2: m = base.mutilate(nz, nx); break;
    case DoRule::R3: {
        MixedGraph gz = base.mutilate(nz, {});
        VertexSet anc_w = gz.ancestors_of(nw);
        VertexSet xw;
        for (const auto& v : nx)
            if (!anc_w.count(v)) xw.insert(v);
        VertexSet over = nz;
        over.insert(xw.begin(), xw.end());
        m = base.mutilate(over, {});
        break;
    }
    }
    return d_separated(m, ny, nx, cond);
}

} // namespace scgid
