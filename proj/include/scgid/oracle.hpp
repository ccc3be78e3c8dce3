#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <unordered_map>
#include <variant>
#include <vector>

#include "scgid/d_separation.hpp"
#include "scgid/identification.hpp"
#include "scgid/temporal.hpp"

namespace scgid {

inline constexpr std::uint64_t kDefaultEnumerationCap = 10'000'000;

struct CapExceeded : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Subset of the edge universe of one compatibility class (up to 256 slots).
struct SlotMask {
    std::array<std::uint64_t, 4> words{};

    static constexpr int capacity() { return 256; }
    void set(int i) { words[i >> 6] |= std::uint64_t(1) << (i & 63); }
    bool test(int i) const { return (words[i >> 6] >> (i & 63)) & 1; }
    bool none() const { return !(words[0] | words[1] | words[2] | words[3]); }
    int count() const {
        int c = 0;
        for (auto w : words) c += __builtin_popcountll(w);
        return c;
    }
    SlotMask operator&(const SlotMask& o) const {
        SlotMask r;
        for (int i = 0; i < 4; ++i) r.words[i] = words[i] & o.words[i];
        return r;
    }
    SlotMask operator|(const SlotMask& o) const {
        SlotMask r;
        for (int i = 0; i < 4; ++i) r.words[i] = words[i] | o.words[i];
        return r;
    }
    friend bool operator==(const SlotMask&, const SlotMask&) = default;

    struct Hash {
        std::size_t operator()(const SlotMask& m) const {
            std::uint64_t h = 0x9e3779b97f4a7c15ull;
            for (auto w : m.words) {
                h ^= w + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
                h *= 0xff51afd7ed558ccdull;
            }
            return static_cast<std::size_t>(h);
        }
    };
};

/// One edge of the enumeration universe.
struct Slot {
    TemporalVertex from;
    TemporalVertex to;
    EdgeKind kind = EdgeKind::Directed;
    int scg_edge = -1;
};

/// One universally quantified d-separation: mutilate, then test A _||_ B | C.
struct SeparationClaim {
    std::string label;
    TemporalVertexSet overline;
    TemporalVertexSet underline;
    TemporalVertexSet a;
    TemporalVertexSet b;
    TemporalVertexSet c;
};

/// Conjunction of separations that must hold in every compatible graph.
struct AllSeparationsClaim {
    std::string label;
    std::vector<SeparationClaim> seps;
};

/// "Some conditioning set makes rule 2 or rule 3 applicable for removing the
/// intervention on `treatment` in P(outcome | do(treatment))", which must
/// hold in every compatible graph.
struct ExistsAdjustmentClaim {
    std::string label;
    TemporalVertex treatment;
    TemporalVertex outcome;
};

using OracleClaim = std::variant<AllSeparationsClaim, ExistsAdjustmentClaim>;

enum class OracleMethod { Literal, DedupSweep, MaximalCertificate };

inline const char* to_string(OracleMethod m) {
    switch (m) {
    case OracleMethod::Literal: return "literal enumeration";
    case OracleMethod::DedupSweep: return "enumeration with projection dedup";
    case OracleMethod::MaximalCertificate: return "maximal-graph certificate";
    }
    return "?";
}

struct HoldsResult {
    bool holds = false;
    std::optional<FullTimeGraph> counterexample;
    std::uint64_t graphs_checked = 0;
    OracleMethod method = OracleMethod::Literal;
};

/// All FT graphs compatible with an SCG over a finite window: every subset of
/// the licensed edge universe (the unrolled template plus the flipped
/// instantaneous orientations inside directed cycles) that projects back to
/// the SCG exactly and keeps every time slice acyclic.
///
/// The universe is partitioned into independent groups: one per bidirected
/// SCG edge, one per directed self-loop, one per edge outside directed
/// cycles, and one joint group per strongly connected cluster (whose slots
/// interact through per-slice acyclicity). A compatible graph is exactly one
/// valid choice per group, so the class is the product of the group choice
/// sets; choices are enumerated by increasing cardinality, then
/// lexicographically by slot.
class CompatibilityClass {
public:
    CompatibilityClass(SummaryCausalGraph scg, Window window, bool stationary)
        : scg_(std::move(scg)), window_(window), stationary_(stationary) {
        if (window_.span() < scg_.gamma_max)
            throw std::invalid_argument("window span smaller than gamma_max");
        build_universe();
        build_groups();
    }

    const SummaryCausalGraph& scg() const { return scg_; }
    const Window& window() const { return window_; }
    bool stationary() const { return stationary_; }
    const std::vector<Slot>& slots() const { return slots_; }

    /// Exact number of compatible graphs (saturating at uint64 max).
    std::uint64_t count() const {
        std::uint64_t total = 1;
        for (const auto& g : groups_) total = sat_mul(total, choice_count(g));
        return total;
    }

    /// Cheap upper bound that never enumerates group choices.
    std::uint64_t count_bound() const {
        std::uint64_t total = 1;
        for (const auto& g : groups_) {
            int n = static_cast<int>(g.slots.size());
            std::uint64_t b = n >= 64 ? UINT64_MAX : ((std::uint64_t(1) << n) - 1);
            if (stationary_) b = g.choices_built ? g.fixed_choices.size() : b;
            total = sat_mul(total, b);
        }
        return total;
    }

    /// Visits every compatible graph as a slot mask, in canonical order.
    /// `fn` returns false to stop early. Throws CapExceeded once more than
    /// `cap` graphs have been visited.
    template <typename Fn>
    std::uint64_t for_each_mask(Fn&& fn, std::uint64_t cap = kDefaultEnumerationCap) const {
        std::uint64_t visited = 0;
        if (groups_.empty()) {
            ++visited;
            fn(SlotMask{});
            return visited;
        }
        recurse_masks(static_cast<int>(groups_.size()) - 1, SlotMask{}, fn, visited, cap);
        return visited;
    }

    FullTimeGraph materialize(const SlotMask& mask) const {
        FullTimeGraph g(scg_.series(), window_);
        for (int i = 0; i < static_cast<int>(slots_.size()); ++i) {
            if (!mask.test(i)) continue;
            const Slot& s = slots_[i];
            if (s.kind == EdgeKind::Directed)
                g.add_directed(s.from, s.to);
            else
                g.add_bidirected(s.from, s.to);
        }
        return g;
    }

    std::vector<Vertex> window_vertex_names() const {
        std::vector<Vertex> out;
        for (int t = window_.t0; t <= window_.tmax; ++t)
            for (const auto& s : scg_.series()) out.push_back(TemporalVertex{s, t}.name());
        return out;
    }

    // --- implementation guts shared with the claim engine below ---

    struct Group {
        std::vector<int> slots;        // global slot ids, ascending
        std::vector<int> member_edges; // SCG edge ordinals realized by this group
        bool cluster = false;
        // per local slot:
        std::vector<int> slot_edge_ordinal; // index into member_edges
        std::vector<char> slot_lag0;
        std::vector<int> slot_slice;       // head time for lag-0 slots
        std::vector<int> slot_tail_sid, slot_head_sid;
        // stationary choices are few and precomputed
        std::vector<std::uint64_t> fixed_choices;
        bool choices_built = false;
        mutable std::uint64_t cached_count = 0;
        mutable bool count_ready = false;
    };

    const std::vector<Group>& groups() const { return groups_; }

    SlotMask to_global(const Group& g, std::uint64_t local) const {
        SlotMask m;
        for (int i = 0; i < static_cast<int>(g.slots.size()); ++i)
            if ((local >> i) & 1) m.set(g.slots[i]);
        return m;
    }

    /// Streams the valid choices of one group in canonical order
    /// (cardinality, then lexicographic on slot indices). Returns false if
    /// the callback stopped.
    template <typename Fn>
    bool for_each_choice(const Group& g, Fn&& fn) const {
        if (stationary_) {
            for (std::uint64_t c : g.fixed_choices)
                if (!fn(c)) return false;
            return true;
        }
        const int n = static_cast<int>(g.slots.size());
        if (n > 26)
            throw CapExceeded("edge group too large to enumerate (" + std::to_string(n) +
                              " slots)");
        const int kmin = std::max<int>(1, static_cast<int>(g.member_edges.size()));
        std::vector<int> idx;
        for (int k = kmin; k <= n; ++k) {
            idx.resize(k);
            for (int i = 0; i < k; ++i) idx[i] = i;
            while (true) {
                std::uint64_t m = 0;
                for (int i : idx) m |= std::uint64_t(1) << i;
                if (choice_valid(g, m) && !fn(m)) return false;
                int i = k - 1;
                while (i >= 0 && idx[i] == n - k + i) --i;
                if (i < 0) break;
                ++idx[i];
                for (int j = i + 1; j < k; ++j) idx[j] = idx[j - 1] + 1;
            }
        }
        return true;
    }

    std::uint64_t choice_count(const Group& g) const {
        if (g.count_ready) return g.cached_count;
        std::uint64_t c = 0;
        for_each_choice(g, [&](std::uint64_t) {
            ++c;
            return true;
        });
        g.cached_count = c;
        g.count_ready = true;
        return c;
    }

    /// Inclusion-maximal compatible graphs: all lagged and bidirected slots,
    /// plus one inclusion-maximal acyclic instantaneous configuration per
    /// slice of each cluster. Every compatible graph is a subgraph of one of
    /// these.
    std::vector<SlotMask> maximal_masks(std::uint64_t limit = 65536) const {
        SlotMask base;
        std::vector<const Group*> clusters;
        for (const auto& g : groups_) {
            if (g.cluster) {
                clusters.push_back(&g);
                for (int i = 0; i < static_cast<int>(g.slots.size()); ++i)
                    if (!g.slot_lag0[i]) base.set(g.slots[i]);
            } else {
                for (int s : g.slots) base.set(s);
            }
        }
        std::vector<SlotMask> result{base};
        for (const Group* g : clusters) {
            // per-slice maximal acyclic sets of instantaneous slots
            for (int t = window_.t0; t <= window_.tmax; ++t) {
                std::vector<int> locals;
                for (int i = 0; i < static_cast<int>(g->slots.size()); ++i)
                    if (g->slot_lag0[i] && g->slot_slice[i] == t) locals.push_back(i);
                if (locals.empty()) continue;
                std::vector<std::uint64_t> maximal;
                const int m = static_cast<int>(locals.size());
                for (std::uint64_t sub = 0; sub < (std::uint64_t(1) << m); ++sub) {
                    std::uint64_t mask = 0;
                    for (int i = 0; i < m; ++i)
                        if ((sub >> i) & 1) mask |= std::uint64_t(1) << locals[i];
                    if (!slice_acyclic(*g, mask, t)) continue;
                    maximal.push_back(mask);
                }
                // keep inclusion-maximal only
                std::vector<std::uint64_t> keep;
                for (std::uint64_t a : maximal) {
                    bool dominated = false;
                    for (std::uint64_t b : maximal)
                        if (a != b && (a & b) == a) {
                            dominated = true;
                            break;
                        }
                    if (!dominated) keep.push_back(a);
                }
                std::vector<SlotMask> next;
                for (const SlotMask& r : result)
                    for (std::uint64_t k : keep) next.push_back(r | to_global(*g, k));
                if (next.size() > limit)
                    throw CapExceeded("too many maximal instantaneous configurations");
                result = std::move(next);
            }
        }
        // drop configurations that fail to realize some SCG edge
        std::vector<SlotMask> ok;
        for (const SlotMask& m : result)
            if (realizes_all_edges(m)) ok.push_back(m);
        if (ok.empty() && !result.empty())
            throw CapExceeded("maximal-graph certificate inapplicable for this class");
        return ok;
    }

private:
    template <typename Fn>
    bool recurse_masks(int level, const SlotMask& acc, Fn& fn, std::uint64_t& visited,
                       std::uint64_t cap) const {
        const Group& g = groups_[level];
        return for_each_choice(g, [&](std::uint64_t local) {
            SlotMask m = acc | to_global(g, local);
            if (level == 0) {
                if (++visited > cap) throw CapExceeded("enumeration cap exceeded");
                return fn(m);
            }
            return recurse_masks(level - 1, m, fn, visited, cap);
        });
    }

    static std::uint64_t sat_mul(std::uint64_t a, std::uint64_t b) {
        if (a == 0 || b == 0) return 0;
        if (a > UINT64_MAX / b) return UINT64_MAX;
        return a * b;
    }

    bool realizes_all_edges(const SlotMask& m) const {
        std::vector<char> seen(scg_edges_.size(), 0);
        for (int i = 0; i < static_cast<int>(slots_.size()); ++i)
            if (m.test(i)) seen[slots_[i].scg_edge] = 1;
        for (char s : seen)
            if (!s) return false;
        return true;
    }

    bool slice_acyclic(const Group& g, std::uint64_t local, int slice) const {
        // DFS cycle check on the chosen instantaneous edges of one slice
        const int ns = static_cast<int>(series_index_.size());
        std::vector<std::vector<int>> adj(ns);
        bool any = false;
        for (int i = 0; i < static_cast<int>(g.slots.size()); ++i) {
            if (!((local >> i) & 1) || !g.slot_lag0[i] || g.slot_slice[i] != slice) continue;
            adj[g.slot_tail_sid[i]].push_back(g.slot_head_sid[i]);
            any = true;
        }
        if (!any) return true;
        std::vector<char> state(ns, 0); // 0 fresh, 1 on stack, 2 done
        std::function<bool(int)> dfs = [&](int v) {
            state[v] = 1;
            for (int u : adj[v]) {
                if (state[u] == 1) return false;
                if (state[u] == 0 && !dfs(u)) return false;
            }
            state[v] = 2;
            return true;
        };
        for (int v = 0; v < ns; ++v)
            if (state[v] == 0 && !dfs(v)) return false;
        return true;
    }

    bool choice_valid(const Group& g, std::uint64_t local) const {
        std::uint64_t covered = 0;
        for (int i = 0; i < static_cast<int>(g.slots.size()); ++i)
            if ((local >> i) & 1) covered |= std::uint64_t(1) << g.slot_edge_ordinal[i];
        if (covered != (std::uint64_t(1) << g.member_edges.size()) - 1) return false;
        if (!g.cluster) return true;
        for (int t = window_.t0; t <= window_.tmax; ++t)
            if (!slice_acyclic(g, local, t)) return false;
        return true;
    }

    void build_universe() {
        scg_edges_ = scg_.base.edges();
        int sid = 0;
        for (const auto& s : scg_.series()) series_index_[s] = sid++;

        std::set<std::pair<std::string, std::string>> seen_bidirected;
        for (int e = 0; e < static_cast<int>(scg_edges_.size()); ++e) {
            const Edge& edge = scg_edges_[e];
            for (int t = window_.t0; t <= window_.tmax; ++t) {
                for (int gamma = 0; gamma <= scg_.gamma_max; ++gamma) {
                    if (t - gamma < window_.t0) continue;
                    TemporalVertex from{edge.from, t - gamma};
                    TemporalVertex to{edge.to, t};
                    if (edge.kind == EdgeKind::Directed) {
                        if (gamma == 0 && edge.from == edge.to) continue;
                        slots_.push_back({from, to, EdgeKind::Directed, e});
                    } else {
                        if (from == to) continue;
                        // both temporal orders, normalized and deduplicated
                        for (auto [a, b] : {std::pair{from, to},
                                            std::pair{TemporalVertex{edge.to, t - gamma},
                                                      TemporalVertex{edge.from, t}}}) {
                            if (a == b) continue;
                            TemporalVertex lo = std::min(a, b), hi = std::max(a, b);
                            if (!seen_bidirected.insert({lo.name(), hi.name()}).second) continue;
                            slots_.push_back({lo, hi, EdgeKind::Bidirected, e});
                        }
                    }
                }
            }
        }
        std::sort(slots_.begin(), slots_.end(), [](const Slot& l, const Slot& r) {
            auto key = [](const Slot& s) {
                return std::tuple(s.kind == EdgeKind::Bidirected ? 0 : 1, s.from.series,
                                  s.to.series, s.from.time, s.to.time);
            };
            return key(l) < key(r);
        });
        if (static_cast<int>(slots_.size()) > SlotMask::capacity())
            throw CapExceeded("edge universe exceeds " + std::to_string(SlotMask::capacity()) +
                              " slots");
    }

    void build_groups() {
        // cluster ids: strongly connected components of the non-self directed part
        std::map<Series, int> comp;
        int next = 0;
        for (const auto& s : scg_.series()) {
            if (comp.count(s)) continue;
            VertexSet c = scg_.base.scc(s);
            if (c.size() <= 1) {
                comp[s] = next++;
            } else {
                for (const auto& m : c) comp[m] = next;
                ++next;
            }
        }

        // key: cluster groups share (2, comp) keys, everything else is its own edge
        std::map<std::pair<int, int>, std::vector<int>> edge_groups; // key -> edge ids
        for (int e = 0; e < static_cast<int>(scg_edges_.size()); ++e) {
            const Edge& edge = scg_edges_[e];
            bool joint = edge.kind == EdgeKind::Directed && edge.from != edge.to &&
                         comp[edge.from] == comp[edge.to];
            if (joint)
                edge_groups[{1, comp[edge.from]}].push_back(e);
            else
                edge_groups[{0, e}].push_back(e);
        }

        for (auto& [key, edges] : edge_groups) {
            Group g;
            g.member_edges = edges;
            g.cluster = key.first == 1;
            for (int i = 0; i < static_cast<int>(slots_.size()); ++i) {
                auto it = std::find(edges.begin(), edges.end(), slots_[i].scg_edge);
                if (it == edges.end()) continue;
                g.slots.push_back(i);
                g.slot_edge_ordinal.push_back(static_cast<int>(it - edges.begin()));
                bool lag0 = slots_[i].kind == EdgeKind::Directed &&
                            slots_[i].from.time == slots_[i].to.time;
                g.slot_lag0.push_back(lag0 ? 1 : 0);
                g.slot_slice.push_back(slots_[i].to.time);
                g.slot_tail_sid.push_back(series_index_[slots_[i].from.series]);
                g.slot_head_sid.push_back(series_index_[slots_[i].to.series]);
            }
            if (static_cast<int>(g.slots.size()) > 63)
                throw CapExceeded("edge group exceeds 63 slots");
            if (stationary_) build_stationary_choices(g);
            groups_.push_back(std::move(g));
        }
        // nesting order: ascending by smallest slot id; index 0 iterates fastest
        std::sort(groups_.begin(), groups_.end(), [](const Group& a, const Group& b) {
            return a.slots.front() < b.slots.front();
        });
    }

    /// Stationary choices: a pattern is a set of (edge, lag, orientation)
    /// items applied at every slice where the lag fits; one pattern item
    /// turns on all its instantiations.
    void build_stationary_choices(Group& g) {
        struct Item {
            int edge;
            std::uint64_t local_mask;
            bool lag0;
            int tail_sid, head_sid;
        };
        std::vector<Item> items;
        std::map<std::tuple<int, int, std::string>, int> item_index;
        for (int i = 0; i < static_cast<int>(g.slots.size()); ++i) {
            const Slot& s = slots_[g.slots[i]];
            int lag = std::abs(s.to.time - s.from.time);
            // orientation tag distinguishes A_{t-l}<->B_t from B_{t-l}<->A_t
            std::string tag = s.kind == EdgeKind::Bidirected
                                  ? (s.from.time <= s.to.time ? s.from.series : s.to.series)
                                  : "";
            auto key = std::tuple(s.scg_edge, lag, tag);
            auto it = item_index.find(key);
            if (it == item_index.end()) {
                item_index[key] = static_cast<int>(items.size());
                items.push_back({s.scg_edge, 0, g.slot_lag0[i] != 0,
                                 g.slot_tail_sid[i], g.slot_head_sid[i]});
                it = item_index.find(key);
            }
            items[it->second].local_mask |= std::uint64_t(1) << i;
        }
        const int n = static_cast<int>(items.size());
        if (n > 20) throw CapExceeded("stationary pattern space too large");
        std::vector<std::pair<int, std::uint64_t>> found; // (cardinality, mask) for ordering
        for (std::uint64_t sub = 1; sub < (std::uint64_t(1) << n); ++sub) {
            std::uint64_t covered = 0, local = 0;
            for (int i = 0; i < n; ++i)
                if ((sub >> i) & 1) {
                    covered |= std::uint64_t(1) << std::distance(
                                   g.member_edges.begin(),
                                   std::find(g.member_edges.begin(), g.member_edges.end(),
                                             items[i].edge));
                    local |= items[i].local_mask;
                }
            if (covered != (std::uint64_t(1) << g.member_edges.size()) - 1) continue;
            if (g.cluster) {
                bool ok = true;
                for (int t = window_.t0; t <= window_.tmax && ok; ++t)
                    ok = slice_acyclic(g, local, t);
                if (!ok) continue;
            }
            found.push_back({__builtin_popcountll(sub), local});
        }
        std::stable_sort(found.begin(), found.end(),
                         [](const auto& a, const auto& b) { return a.first < b.first; });
        for (const auto& [k, m] : found) g.fixed_choices.push_back(m);
        g.choices_built = true;
    }

    SummaryCausalGraph scg_;
    Window window_;
    bool stationary_;
    std::vector<Edge> scg_edges_;
    std::map<Series, int> series_index_;
    std::vector<Slot> slots_;
    std::vector<Group> groups_;
};

inline CompatibilityClass enumerate_compatible(const SummaryCausalGraph& scg, const Window& window,
                                               bool stationary = false) {
    return CompatibilityClass(scg, window, stationary);
}

// ---------------------------------------------------------------------------
// claim builders

/// The separation used to justify the controlled-effect formula:
/// Y_t independent of PP(Y_t) once all arrows out of PP(Y_t) are removed.
inline AllSeparationsClaim thm1_claim(const SummaryCausalGraph& scg, const Series& outcome,
                                      const Window& window) {
    if (window.span() < scg.gamma_max)
        throw std::invalid_argument("window span smaller than gamma_max");
    int t = window.tmax;
    TemporalVertexSet pp = possible_parents(scg, outcome, t, window);
    SeparationClaim s;
    s.label = "Y_t _||_ PP(Y_t) in G with tails out of PP(Y_t) removed";
    s.underline = pp;
    s.a = {TemporalVertex{outcome, t}};
    s.b = pp;
    return {"thm1", {s}};
}

/// The two separations used to justify the natural-effect formula:
/// (a) X_{t-g} _||_ Z | A with tails out of X_{t-g} removed, and
/// (b) A _||_ X_{t-g} with arrows into X_{t-g} removed,
/// where Z = PP(Y_t) \ {X_{t-g}} and A = PP(X_{t-g}).
inline AllSeparationsClaim thm2_claim(const SummaryCausalGraph& scg, const Series& treatment,
                                      int lag, const Series& outcome, const Window& window) {
    if (window.span() < scg.gamma_max)
        throw std::invalid_argument("window span smaller than gamma_max");
    if (lag < 0 || lag > scg.gamma_max) throw std::invalid_argument("lag outside [0, gamma_max]");
    int t = window.tmax;
    TemporalVertex xv{treatment, t - lag};
    TemporalVertexSet z = possible_parents(scg, outcome, t, window);
    z.erase(xv);
    TemporalVertexSet a = possible_parents(scg, treatment, t - lag, window);
    for (const auto& v : a)
        if (z.count(v))
            throw std::invalid_argument(
                "PP(X_{t-g}) overlaps PP(Y_t): the separations are not defined for this query");

    AllSeparationsClaim claim{"thm2", {}};
    SeparationClaim sa;
    sa.label = "X_{t-g} _||_ Z | A in G with tails out of X_{t-g} removed";
    sa.underline = {xv};
    sa.a = {xv};
    sa.b = z;
    sa.c = a;
    claim.seps.push_back(std::move(sa));
    SeparationClaim sb;
    sb.label = "A _||_ X_{t-g} in G with arrows into X_{t-g} removed";
    sb.overline = {xv};
    sb.a = a;
    sb.b = {xv};
    claim.seps.push_back(std::move(sb));
    return claim;
}

inline ExistsAdjustmentClaim r2r3_claim(const Series& treatment, const Series& outcome,
                                        const Window& window) {
    return {"r2r3", TemporalVertex{treatment, window.tmax}, TemporalVertex{outcome, window.tmax}};
}

// ---------------------------------------------------------------------------
// claim evaluation

namespace oracle_detail {

inline SlotMask keep_mask(const CompatibilityClass& cc, const SeparationClaim& s) {
    SlotMask keep;
    std::set<std::string> over, under;
    for (const auto& v : s.overline) over.insert(v.name());
    for (const auto& v : s.underline) under.insert(v.name());
    const auto& slots = cc.slots();
    for (int i = 0; i < static_cast<int>(slots.size()); ++i) {
        const Slot& sl = slots[i];
        bool removed;
        if (sl.kind == EdgeKind::Directed)
            removed = over.count(sl.to.name()) || under.count(sl.from.name());
        else
            removed = over.count(sl.from.name()) || over.count(sl.to.name());
        if (!removed) keep.set(i);
    }
    return keep;
}

inline MixedGraph graph_from_mask(const CompatibilityClass& cc, const SlotMask& mask) {
    MixedGraph g = MixedGraph::time_level();
    for (const auto& name : cc.window_vertex_names()) g.add_vertex(name);
    const auto& slots = cc.slots();
    for (int i = 0; i < static_cast<int>(slots.size()); ++i) {
        if (!mask.test(i)) continue;
        if (slots[i].kind == EdgeKind::Directed)
            g.add_directed(slots[i].from.name(), slots[i].to.name());
        else
            g.add_bidirected(slots[i].from.name(), slots[i].to.name());
    }
    return g;
}

inline VertexSet names(const TemporalVertexSet& vs) {
    VertexSet out;
    for (const auto& v : vs) out.insert(v.name());
    return out;
}

/// Memoizing evaluator for one separation: the verdict depends only on the
/// edges that survive the claim's mutilation.
class SeparationEval {
public:
    SeparationEval(const CompatibilityClass& cc, const SeparationClaim& s)
        : cc_(cc), sep_(s), keep_(keep_mask(cc, s)), a_(names(s.a)), b_(names(s.b)),
          c_(names(s.c)) {}

    bool holds(const SlotMask& graph_mask) {
        if (a_.empty() || b_.empty()) return true;
        SlotMask key = graph_mask & keep_;
        auto it = memo_.find(key);
        if (it != memo_.end()) return it->second;
        bool result = d_separated(graph_from_mask(cc_, key), a_, b_, c_);
        memo_.emplace(key, result);
        return result;
    }

    const SlotMask& keep() const { return keep_; }

private:
    const CompatibilityClass& cc_;
    SeparationClaim sep_;
    SlotMask keep_;
    VertexSet a_, b_, c_;
    std::unordered_map<SlotMask, bool, SlotMask::Hash> memo_;
};

/// True when some conditioning set S makes rule 2 or rule 3 applicable for
/// removing do(treatment) from P(outcome | do(treatment)) in this graph.
inline bool some_adjustment_applies(const FullTimeGraph& g, const TemporalVertex& treatment,
                                    const TemporalVertex& outcome) {
    std::vector<TemporalVertex> rest;
    for (const auto& name : g.graph().vertices()) {
        TemporalVertex v = TemporalVertex::parse(name);
        if (v == treatment || v == outcome) continue;
        rest.push_back(v);
    }
    if (rest.size() > 16) throw CapExceeded("too many conditioning subsets to exhaust");
    TemporalVertexSet y{outcome}, x{treatment};
    const std::uint32_t total = std::uint32_t(1) << rest.size();
    // subsets by increasing size so the empty set is tried first
    std::vector<std::uint32_t> order;
    order.reserve(total);
    for (std::uint32_t s = 0; s < total; ++s) order.push_back(s);
    std::stable_sort(order.begin(), order.end(), [](std::uint32_t a, std::uint32_t b) {
        return __builtin_popcount(a) < __builtin_popcount(b);
    });
    for (std::uint32_t sub : order) {
        TemporalVertexSet s;
        for (std::size_t i = 0; i < rest.size(); ++i)
            if ((sub >> i) & 1) s.insert(rest[i]);
        if (rule_applicable(g, DoRule::R2, y, x, {}, s)) return true;
        if (rule_applicable(g, DoRule::R3, y, x, {}, s)) return true;
    }
    return false;
}

} // namespace oracle_detail

/// Checks one claim against every compatible graph. Verification strategy,
/// in order of preference:
///   1. literal enumeration of the whole class (class size within the cap);
///   2. sweep over per-group distinct projections onto the claim's surviving
///      edges, which covers every compatible graph exactly (separation claims
///      only);
///   3. certificate on the inclusion-maximal compatible graphs: adding edges
///      can only activate more paths, so a separation that holds in every
///      maximal graph holds in all of their subgraphs.
/// Existential claims always use literal enumeration and may hit the cap.
inline HoldsResult holds_in_all(const CompatibilityClass& cc, const OracleClaim& claim,
                                std::uint64_t cap = kDefaultEnumerationCap) {
    HoldsResult result;

    if (const auto* exists = std::get_if<ExistsAdjustmentClaim>(&claim)) {
        std::optional<SlotMask> bad;
        result.graphs_checked = cc.for_each_mask(
            [&](const SlotMask& m) {
                if (!oracle_detail::some_adjustment_applies(cc.materialize(m), exists->treatment,
                                                            exists->outcome)) {
                    bad = m;
                    return false;
                }
                return true;
            },
            cap);
        result.method = OracleMethod::Literal;
        result.holds = !bad.has_value();
        if (bad) result.counterexample = cc.materialize(*bad);
        return result;
    }

    const auto& all = std::get<AllSeparationsClaim>(claim);
    std::vector<oracle_detail::SeparationEval> evals;
    for (const auto& s : all.seps) evals.emplace_back(cc, s);

    auto holds_for = [&](const SlotMask& m) {
        for (auto& e : evals)
            if (!e.holds(m)) return false;
        return true;
    };

    if (cc.count_bound() <= cap) {
        std::optional<SlotMask> bad;
        result.graphs_checked = cc.for_each_mask(
            [&](const SlotMask& m) {
                if (!holds_for(m)) {
                    bad = m;
                    return false;
                }
                return true;
            },
            cap);
        result.method = OracleMethod::Literal;
        result.holds = !bad.has_value();
        if (bad) result.counterexample = cc.materialize(*bad);
        return result;
    }

    // distinct projections onto the union of surviving edges
    SlotMask keep_all;
    for (const auto& e : evals) keep_all = keep_all | e.keep();
    std::uint64_t dedup_bound = 1;
    for (const auto& g : cc.groups()) {
        int kept = 0;
        for (int s : g.slots)
            if (keep_all.test(s)) ++kept;
        std::uint64_t options = kept >= 63 ? UINT64_MAX : (std::uint64_t(1) << kept);
        dedup_bound = (options != 0 && dedup_bound > UINT64_MAX / options) ? UINT64_MAX
                                                                           : dedup_bound * options;
        if (dedup_bound == UINT64_MAX) break;
    }

    if (dedup_bound <= cap) {
        try {
            // per group: distinct projections, each with its first (smallest) witness
            struct Projected {
                std::vector<SlotMask> projections;
                std::vector<SlotMask> witnesses;
            };
            std::vector<Projected> per_group;
            for (const auto& g : cc.groups()) {
                Projected p;
                std::unordered_map<SlotMask, int, SlotMask::Hash> seen;
                cc.for_each_choice(g, [&](std::uint64_t local) {
                    SlotMask full = cc.to_global(g, local);
                    SlotMask proj = full & keep_all;
                    if (seen.emplace(proj, static_cast<int>(p.projections.size())).second) {
                        p.projections.push_back(proj);
                        p.witnesses.push_back(full);
                    }
                    return true;
                });
                per_group.push_back(std::move(p));
            }
            std::optional<SlotMask> bad_witness;
            std::uint64_t combos = 0;
            // nested sweep, innermost group first (same canonical nesting order)
            std::function<bool(int, const SlotMask&, const SlotMask&)> rec =
                [&](int level, const SlotMask& acc, const SlotMask& wit) -> bool {
                const Projected& p = per_group[level];
                for (std::size_t i = 0; i < p.projections.size(); ++i) {
                    SlotMask m = acc | p.projections[i];
                    SlotMask w = wit | p.witnesses[i];
                    if (level == 0) {
                        if (++combos > cap) throw CapExceeded("projection sweep cap exceeded");
                        if (!holds_for(m)) {
                            bad_witness = w;
                            return false;
                        }
                    } else if (!rec(level - 1, m, w)) {
                        return false;
                    }
                }
                return true;
            };
            bool ok = per_group.empty() ? holds_for(SlotMask{})
                                        : rec(static_cast<int>(per_group.size()) - 1, SlotMask{},
                                              SlotMask{});
            result.method = OracleMethod::DedupSweep;
            result.graphs_checked = combos;
            result.holds = ok;
            if (bad_witness) result.counterexample = cc.materialize(*bad_witness);
            return result;
        } catch (const CapExceeded&) {
            // a group too large to stream; fall through to the certificate
        }
    }

    // maximal-graph certificate
    std::vector<SlotMask> maximal = cc.maximal_masks();
    result.method = OracleMethod::MaximalCertificate;
    result.graphs_checked = maximal.size();
    for (const SlotMask& m : maximal) {
        if (!holds_for(m)) {
            // prefer an early, small counterexample when the search is cheap
            std::optional<SlotMask> bad;
            try {
                cc.for_each_mask(
                    [&](const SlotMask& g) {
                        if (!holds_for(g)) {
                            bad = g;
                            return false;
                        }
                        return true;
                    },
                    cap);
            } catch (const CapExceeded&) {
            }
            result.holds = false;
            if (bad)
                result.counterexample = cc.materialize(*bad);
            else if (!cc.stationary())
                result.counterexample = cc.materialize(m);
            // a failing maximal graph need not be stationary, so a capped
            // stationary search reports the refutation without a witness
            return result;
        }
    }
    result.holds = true;
    return result;
}

/// Possible parents by brute force: the union of the parent sets of Y_t over
/// every compatible graph. Falls back to a groupwise union (each group's
/// choices are independently combinable) when the class is too large to
/// stream.
inline TemporalVertexSet pp_by_enumeration(const CompatibilityClass& cc, const Series& y, int t,
                                           std::uint64_t cap = kDefaultEnumerationCap) {
    if (!cc.window().contains(t) || t - cc.scg().gamma_max < cc.window().t0)
        throw std::invalid_argument("query time needs gamma_max headroom inside the window");
    TemporalVertex target{y, t};
    SlotMask head_filter;
    const auto& slots = cc.slots();
    for (int i = 0; i < static_cast<int>(slots.size()); ++i)
        if (slots[i].kind == EdgeKind::Directed && slots[i].to == target) head_filter.set(i);

    SlotMask acc;
    if (cc.count_bound() <= cap) {
        cc.for_each_mask(
            [&](const SlotMask& m) {
                acc = acc | (m & head_filter);
                return true;
            },
            cap);
    } else {
        for (const auto& g : cc.groups()) {
            SlotMask group_heads;
            for (int s : g.slots)
                if (head_filter.test(s)) group_heads.set(s);
            if (group_heads.none()) continue;
            cc.for_each_choice(g, [&](std::uint64_t local) {
                acc = acc | (cc.to_global(g, local) & group_heads);
                return !((acc & group_heads) == group_heads); // stop once saturated
            });
        }
    }

    TemporalVertexSet out;
    for (int i = 0; i < static_cast<int>(slots.size()); ++i)
        if (acc.test(i)) out.insert(slots[i].from);
    return out;
}

} // namespace scgid
