#pragma once

#include <cmath>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "scgid/estimand.hpp"
#include "scgid/identification.hpp"
#include "scgid/temporal.hpp"

namespace scgid {

// ---------------------------------------------------------------------------
// deterministic random numbers: splitmix64 streams + Box-Muller

class Rng {
public:
    /// Stream `stream` of a seed; replicates own disjoint streams, so samples
    /// do not depend on evaluation order.
    Rng(std::uint64_t seed, std::uint64_t stream) {
        state_ = seed * 0x9e3779b97f4a7c15ull + stream * 0xbf58476d1ce4e5b9ull + 1;
        next();
        next();
    }

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    /// Uniform in the open interval (0, 1).
    double uniform01() {
        return (static_cast<double>(next() >> 11) + 0.5) / 9007199254740992.0;
    }

    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u = uniform01();
        double v = uniform01();
        double r = std::sqrt(-2.0 * std::log(u));
        double a = 6.283185307179586476925286766559 * v;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

private:
    std::uint64_t state_ = 0;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

// ---------------------------------------------------------------------------
// model specification

struct ParentRef {
    Series series;
    int lag = 0;
    double coeff = 0.0; // linear family only

    friend bool operator==(const ParentRef&, const ParentRef&) = default;
};

struct Equation {
    Series series;
    std::vector<ParentRef> parents;
    double intercept = 0.0;    // linear
    std::vector<double> table; // discrete: P(V=1 | parents), row = sum(value_i << i)
};

struct NoiseSpec {
    Series series;
    double mean = 0.0;
    double sd = 1.0;
    std::string shared_group; // empty = independent
    double shared_weight = 0.0;
};

enum class ModelFamily { Linear, Discrete };

/// A concrete structural model over (series, time) variables: linear-Gaussian
/// equations with optional shared noise components (hidden confounding), or
/// binary variables with conditional probability tables realized through the
/// uniform-threshold response u < p(parents). Out-of-window parents contribute
/// zero (linear) or bind to value 0 (discrete).
struct ModelSpec {
    std::vector<Series> series;
    Window window;
    int gamma_max = 0;
    ModelFamily family = ModelFamily::Linear;
    std::vector<Equation> equations; // one per series
    std::vector<NoiseSpec> noise;    // linear only, one per series

    const Equation& equation(const Series& s) const {
        for (const auto& e : equations)
            if (e.series == s) return e;
        throw std::invalid_argument("no equation for series: " + s);
    }

    const NoiseSpec& noise_of(const Series& s) const {
        for (const auto& n : noise)
            if (n.series == s) return n;
        throw std::invalid_argument("no noise law for series: " + s);
    }

    /// Series-level graph induced by the equations and shared-noise groups.
    SummaryCausalGraph to_scg() const {
        SummaryCausalGraph g = SummaryCausalGraph::make(series, gamma_max);
        for (const auto& e : equations)
            for (const auto& p : e.parents) g.base.add_directed(p.series, e.series);
        std::map<std::string, std::vector<Series>> groups;
        for (const auto& n : noise)
            if (!n.shared_group.empty()) groups[n.shared_group].push_back(n.series);
        for (const auto& [name, members] : groups)
            for (std::size_t i = 0; i < members.size(); ++i)
                for (std::size_t j = i + 1; j < members.size(); ++j)
                    g.base.add_bidirected(members[i], members[j]);
        return g;
    }

    /// Per-slice evaluation order respecting instantaneous dependencies.
    std::vector<Series> slice_order() const {
        std::map<Series, std::vector<Series>> succ;
        std::map<Series, int> indeg;
        for (const auto& s : series) indeg[s] = 0;
        for (const auto& e : equations)
            for (const auto& p : e.parents)
                if (p.lag == 0) {
                    succ[p.series].push_back(e.series);
                    ++indeg[e.series];
                }
        std::vector<Series> ready, order;
        for (auto it = series.rbegin(); it != series.rend(); ++it)
            if (indeg[*it] == 0) ready.push_back(*it);
        while (!ready.empty()) {
            Series s = ready.back();
            ready.pop_back();
            order.push_back(s);
            for (const auto& c : succ[s])
                if (--indeg[c] == 0) ready.push_back(c);
        }
        if (order.size() != series.size())
            throw std::invalid_argument("instantaneous dependencies contain a cycle");
        return order;
    }

    void validate() const {
        if (window.t0 > window.tmax) throw std::invalid_argument("empty window");
        if (gamma_max < 0) throw std::invalid_argument("gamma_max must be >= 0");
        if (window.span() < gamma_max)
            throw std::invalid_argument("window span smaller than gamma_max");
        std::set<Series> known(series.begin(), series.end());
        std::set<Series> covered;
        for (const auto& e : equations) {
            if (!known.count(e.series)) throw std::invalid_argument("unknown series: " + e.series);
            if (!covered.insert(e.series).second)
                throw std::invalid_argument("duplicate equation for series: " + e.series);
            for (const auto& p : e.parents) {
                if (!known.count(p.series))
                    throw std::invalid_argument("unknown parent series: " + p.series);
                if (p.lag < 0 || p.lag > gamma_max)
                    throw std::invalid_argument("parent lag outside [0, gamma_max]");
                if (p.lag == 0 && p.series == e.series)
                    throw std::invalid_argument("instantaneous self-dependence: " + e.series);
                if (family == ModelFamily::Linear && p.coeff == 0.0)
                    throw std::invalid_argument("zero coefficient for declared parent of " +
                                                e.series);
            }
            if (family == ModelFamily::Discrete) {
                std::size_t rows = std::size_t(1) << e.parents.size();
                if (e.table.size() != rows)
                    throw std::invalid_argument("table of " + e.series + " must have " +
                                                std::to_string(rows) + " rows");
                for (double p : e.table)
                    if (!(p > 0.0 && p < 1.0))
                        throw std::invalid_argument(
                            "table probabilities must be strictly inside (0,1)");
            }
        }
        if (covered.size() != series.size())
            throw std::invalid_argument("every series needs an equation");
        if (family == ModelFamily::Linear) {
            std::set<Series> with_noise;
            for (const auto& n : noise) {
                if (!known.count(n.series))
                    throw std::invalid_argument("unknown series in noise: " + n.series);
                if (!with_noise.insert(n.series).second)
                    throw std::invalid_argument("duplicate noise for series: " + n.series);
                if (!(n.sd > 0.0)) throw std::invalid_argument("noise sd must be positive");
                if (!n.shared_group.empty() && n.shared_weight == 0.0)
                    throw std::invalid_argument("shared group member needs a nonzero weight");
            }
            if (with_noise.size() != series.size())
                throw std::invalid_argument("every series needs a noise law");
        }
        slice_order(); // throws on instantaneous cycles
    }
};

// ---------------------------------------------------------------------------
// datasets

struct Dataset {
    std::vector<Series> series;
    Window window{0, 0};
    std::vector<TemporalVertex> columns; // time-major, slice order within time
    std::vector<double> values;          // row-major
    std::vector<double> weights;         // empty means unit weights
    bool discrete = false;
    std::string provenance = "observational";

    std::size_t rows() const { return columns.empty() ? 0 : values.size() / columns.size(); }

    int column_of(const TemporalVertex& v) const {
        for (int i = 0; i < static_cast<int>(columns.size()); ++i)
            if (columns[i] == v) return i;
        throw std::invalid_argument("no column for variable " + v.name() +
                                    " (window too short for the estimand?)");
    }

    double at(std::size_t row, int col) const { return values[row * columns.size() + col]; }
    double weight(std::size_t row) const { return weights.empty() ? 1.0 : weights[row]; }

    std::string to_csv() const {
        std::ostringstream os;
        for (std::size_t i = 0; i < columns.size(); ++i)
            os << (i ? "," : "") << columns[i].name();
        os << "\n";
        os.precision(17);
        for (std::size_t r = 0; r < rows(); ++r) {
            for (std::size_t c = 0; c < columns.size(); ++c)
                os << (c ? "," : "") << at(r, static_cast<int>(c));
            os << "\n";
        }
        return os.str();
    }
};

using DoAssignments = std::map<TemporalVertex, double>;

namespace sim_detail {

/// Slot-indexed execution plan so the per-replicate loops never touch maps.
struct Plan {
    struct VarPlan {
        TemporalVertex vertex;
        const Equation* eq = nullptr;
        const NoiseSpec* noise = nullptr;      // linear
        std::vector<int> parent_slots;         // -1 when truncated at the window start
        std::vector<double> parent_coeffs;
    };
    struct LatentGroup {
        std::vector<std::pair<int, double>> members; // (slot, weight)
    };

    const ModelSpec* ms = nullptr;
    std::vector<VarPlan> vars;                       // evaluation order
    std::map<std::string, int> index;                // vertex name -> slot
    std::vector<std::vector<LatentGroup>> latents;   // per slice

    int slot(const TemporalVertex& v) const {
        auto it = index.find(v.name());
        if (it == index.end()) throw std::invalid_argument("unknown variable: " + v.name());
        return it->second;
    }
};

inline Plan make_plan(const ModelSpec& ms) {
    Plan plan;
    plan.ms = &ms;
    std::vector<Series> order = ms.slice_order();
    for (int t = ms.window.t0; t <= ms.window.tmax; ++t)
        for (const auto& s : order) {
            Plan::VarPlan vp;
            vp.vertex = {s, t};
            vp.eq = &ms.equation(s);
            if (ms.family == ModelFamily::Linear) vp.noise = &ms.noise_of(s);
            plan.index[vp.vertex.name()] = static_cast<int>(plan.vars.size());
            plan.vars.push_back(std::move(vp));
        }
    for (auto& vp : plan.vars) {
        for (const auto& p : vp.eq->parents) {
            int pt = vp.vertex.time - p.lag;
            auto it = plan.index.find(TemporalVertex{p.series, pt}.name());
            vp.parent_slots.push_back(pt < ms.window.t0 ? -1 : it->second);
            vp.parent_coeffs.push_back(p.coeff);
        }
    }
    if (ms.family == ModelFamily::Linear) {
        std::map<std::string, std::vector<const NoiseSpec*>> groups;
        for (const auto& n : ms.noise)
            if (!n.shared_group.empty()) groups[n.shared_group].push_back(&n);
        plan.latents.resize(ms.window.slices());
        for (int t = ms.window.t0; t <= ms.window.tmax; ++t)
            for (const auto& [gname, members] : groups) {
                Plan::LatentGroup lg;
                for (const NoiseSpec* n : members)
                    lg.members.push_back({plan.index.at(TemporalVertex{n->series, t}.name()),
                                          n->shared_weight});
                plan.latents[t - ms.window.t0].push_back(std::move(lg));
            }
    }
    return plan;
}

/// One replicate's exogenous draw, indexed by variable slot. Linear: noise
/// value including the shared latent component. Discrete: the uniform.
inline void draw_noise(const Plan& plan, Rng& rng, std::vector<double>& eps) {
    const ModelSpec& ms = *plan.ms;
    eps.assign(plan.vars.size(), 0.0);
    if (ms.family == ModelFamily::Discrete) {
        for (std::size_t i = 0; i < plan.vars.size(); ++i) eps[i] = rng.uniform01();
        return;
    }
    const std::size_t per_slice = ms.series.size();
    for (int slice = 0; slice < ms.window.slices(); ++slice) {
        for (const auto& lg : plan.latents[slice]) {
            double latent = rng.normal();
            for (const auto& [slot, weight] : lg.members) eps[slot] += weight * latent;
        }
        for (std::size_t j = 0; j < per_slice; ++j) {
            std::size_t slot = slice * per_slice + j;
            const NoiseSpec& n = *plan.vars[slot].noise;
            eps[slot] += n.mean + n.sd * rng.normal();
        }
    }
}

struct DoVec {
    std::vector<char> forced;
    std::vector<double> value;
};

inline DoVec to_dovec(const Plan& plan, const DoAssignments& dos) {
    DoVec d;
    d.forced.assign(plan.vars.size(), 0);
    d.value.assign(plan.vars.size(), 0.0);
    for (const auto& [v, val] : dos) {
        int s = plan.slot(v);
        d.forced[s] = 1;
        d.value[s] = val;
    }
    return d;
}

/// Deterministic forward pass given a fixed exogenous draw.
inline void propagate(const Plan& plan, const std::vector<double>& eps, const DoVec& dos,
                      std::vector<double>& out) {
    const bool discrete = plan.ms->family == ModelFamily::Discrete;
    out.resize(plan.vars.size());
    for (std::size_t i = 0; i < plan.vars.size(); ++i) {
        if (dos.forced[i]) {
            out[i] = dos.value[i];
            continue;
        }
        const Plan::VarPlan& vp = plan.vars[i];
        if (!discrete) {
            double x = vp.eq->intercept + eps[i];
            for (std::size_t k = 0; k < vp.parent_slots.size(); ++k)
                if (vp.parent_slots[k] >= 0) x += vp.parent_coeffs[k] * out[vp.parent_slots[k]];
            out[i] = x;
        } else {
            std::size_t row = 0;
            for (std::size_t k = 0; k < vp.parent_slots.size(); ++k) {
                double pv = vp.parent_slots[k] < 0 ? 0.0 : out[vp.parent_slots[k]];
                if (pv != 0.0) row |= std::size_t(1) << k;
            }
            out[i] = eps[i] < vp.eq->table[row] ? 1.0 : 0.0;
        }
    }
}

struct RunningMean {
    double sum = 0, sumsq = 0;
    std::size_t n = 0;
    void add(double x) {
        sum += x;
        sumsq += x * x;
        ++n;
    }
    double mean() const { return n ? sum / n : 0.0; }
    double se() const {
        if (n < 2) return 0.0;
        double m = mean();
        double var = (sumsq - n * m * m) / (n - 1);
        return std::sqrt(std::max(0.0, var) / n);
    }
};

/// Exact integration over the discrete family: each variable's uniform is
/// partitioned by its table values; within one cell every response u < p is
/// constant (the cell midpoint decides it), so summing cells is exact.
template <typename Fn>
void for_each_u_cell(const Plan& plan, Fn&& eval) {
    std::vector<std::vector<double>> bounds; // per slot: interval upper bounds
    for (const auto& vp : plan.vars) {
        std::vector<double> th = vp.eq->table;
        std::sort(th.begin(), th.end());
        th.erase(std::unique(th.begin(), th.end()), th.end());
        th.push_back(1.0);
        bounds.push_back(std::move(th));
    }
    double total_cells = 1;
    for (const auto& b : bounds) total_cells *= static_cast<double>(b.size());
    if (total_cells > 2e7) throw std::invalid_argument("exact enumeration too large");

    std::vector<std::size_t> idx(plan.vars.size(), 0);
    std::vector<double> eps(plan.vars.size(), 0.0);
    while (true) {
        double prob = 1.0;
        for (std::size_t i = 0; i < plan.vars.size(); ++i) {
            double hi = bounds[i][idx[i]];
            double lo = idx[i] == 0 ? 0.0 : bounds[i][idx[i] - 1];
            prob *= hi - lo;
            eps[i] = lo + 0.5 * (hi - lo);
        }
        eval(eps, prob);
        std::size_t k = 0;
        while (k < idx.size() && ++idx[k] == bounds[k].size()) idx[k++] = 0;
        if (k == idx.size()) break;
    }
}

inline TemporalVertexSet query_adjustment_set(const ModelSpec& ms, const EffectQuery& q) {
    SummaryCausalGraph scg = ms.to_scg();
    TemporalVertexSet z = possible_parents(scg, q.outcome, q.time, ms.window);
    z.erase(TemporalVertex{q.treatment, q.time - q.lag});
    return z;
}

inline DoAssignments z_assignments(const TemporalVertexSet& z, const std::vector<double>& values) {
    DoAssignments out;
    std::size_t i = 0;
    for (const auto& v : z) {
        out[v] = i < values.size() ? values[i] : 0.0;
        ++i;
    }
    return out;
}

inline void check_headroom(const ModelSpec& ms, const EffectQuery& q) {
    if (!ms.window.contains(q.time) || q.time - ms.gamma_max < ms.window.t0)
        throw std::invalid_argument("query time needs gamma_max headroom inside the window");
}

} // namespace sim_detail

/// Ancestral sampling in time order; do-assignments override the structural
/// equation of their targets. Deterministic for a fixed seed, with one
/// independent stream per replicate.
inline Dataset sample(const ModelSpec& ms, std::size_t n, const DoAssignments& dos = {},
                      std::uint64_t seed = 0) {
    ms.validate();
    for (const auto& [v, value] : dos)
        if (!ms.window.contains(v.time) ||
            std::find(ms.series.begin(), ms.series.end(), v.series) == ms.series.end())
            throw std::invalid_argument("do-assignment outside the model: " + v.name());

    sim_detail::Plan plan = sim_detail::make_plan(ms);
    sim_detail::DoVec dv = sim_detail::to_dovec(plan, dos);
    Dataset d;
    d.series = ms.series;
    d.window = ms.window;
    for (const auto& vp : plan.vars) d.columns.push_back(vp.vertex);
    d.discrete = ms.family == ModelFamily::Discrete;
    d.provenance = dos.empty() ? "observational" : "interventional";
    d.values.reserve(n * d.columns.size());
    std::vector<double> eps, row;
    for (std::size_t r = 0; r < n; ++r) {
        Rng rng(seed, r);
        sim_detail::draw_noise(plan, rng, eps);
        sim_detail::propagate(plan, eps, dv, row);
        d.values.insert(d.values.end(), row.begin(), row.end());
    }
    return d;
}

struct EffectEstimate {
    double value = 0.0;
    double se = 0.0;
    std::string method; // "monte-carlo" or "exact"
};

/// Ground-truth controlled direct effect: contrast of Y_t under joint
/// interventions on X_{t-g} and Z = PP(Y_t) \ {X_{t-g}} held at `z_values`
/// (zeros when omitted). Monte-Carlo with paired replicates for the linear
/// family, exact cell enumeration for the discrete family.
inline EffectEstimate true_cde(const ModelSpec& ms, const EffectQuery& q,
                               const std::vector<double>& z_values = {}, std::size_t n = 100000,
                               std::uint64_t seed = 1) {
    ms.validate();
    sim_detail::check_headroom(ms, q);
    sim_detail::Plan plan = sim_detail::make_plan(ms);
    TemporalVertex xv{q.treatment, q.time - q.lag};
    int y_slot = plan.slot({q.outcome, q.time});
    DoAssignments base =
        sim_detail::z_assignments(sim_detail::query_adjustment_set(ms, q), z_values);
    DoAssignments hi = base, lo = base;
    hi[xv] = q.x_to;
    lo[xv] = q.x_from;
    sim_detail::DoVec dhi = sim_detail::to_dovec(plan, hi);
    sim_detail::DoVec dlo = sim_detail::to_dovec(plan, lo);

    std::vector<double> a, b;
    if (ms.family == ModelFamily::Discrete) {
        double effect = 0.0;
        sim_detail::for_each_u_cell(plan, [&](const std::vector<double>& eps, double prob) {
            sim_detail::propagate(plan, eps, dhi, a);
            sim_detail::propagate(plan, eps, dlo, b);
            effect += prob * (a[y_slot] - b[y_slot]);
        });
        return {effect, 0.0, "exact"};
    }
    sim_detail::RunningMean acc;
    std::vector<double> eps;
    for (std::size_t r = 0; r < n; ++r) {
        Rng rng(seed, r);
        sim_detail::draw_noise(plan, rng, eps);
        sim_detail::propagate(plan, eps, dhi, a);
        sim_detail::propagate(plan, eps, dlo, b);
        acc.add(a[y_slot] - b[y_slot]);
    }
    return {acc.mean(), acc.se(), "monte-carlo"};
}

/// Ground-truth natural direct effect: per exogenous draw, read off the
/// values z_x of Z under do(X=x), then contrast Y under do(X=x', Z=z_x)
/// against Y under do(X=x) on the same draw.
inline EffectEstimate true_nde(const ModelSpec& ms, const EffectQuery& q, std::size_t n = 100000,
                               std::uint64_t seed = 1) {
    ms.validate();
    sim_detail::check_headroom(ms, q);
    sim_detail::Plan plan = sim_detail::make_plan(ms);
    TemporalVertex xv{q.treatment, q.time - q.lag};
    int y_slot = plan.slot({q.outcome, q.time});
    TemporalVertexSet z = sim_detail::query_adjustment_set(ms, q);
    std::vector<int> z_slots;
    for (const auto& v : z) z_slots.push_back(plan.slot(v));

    sim_detail::DoVec under_x = sim_detail::to_dovec(plan, {{xv, q.x_from}});
    sim_detail::DoVec flipped = sim_detail::to_dovec(plan, {{xv, q.x_to}});
    for (int s : z_slots) flipped.forced[s] = 1;

    std::vector<double> natural, counter;
    auto replicate = [&](const std::vector<double>& eps) {
        sim_detail::propagate(plan, eps, under_x, natural);
        for (int s : z_slots) flipped.value[s] = natural[s];
        sim_detail::propagate(plan, eps, flipped, counter);
        return counter[y_slot] - natural[y_slot];
    };

    if (ms.family == ModelFamily::Discrete) {
        double effect = 0.0;
        sim_detail::for_each_u_cell(
            plan, [&](const std::vector<double>& eps, double prob) { effect += prob * replicate(eps); });
        return {effect, 0.0, "exact"};
    }
    sim_detail::RunningMean acc;
    std::vector<double> eps;
    for (std::size_t r = 0; r < n; ++r) {
        Rng rng(seed, r);
        sim_detail::draw_noise(plan, rng, eps);
        acc.add(replicate(eps));
    }
    return {acc.mean(), acc.se(), "monte-carlo"};
}

/// Interventional mean of one variable under arbitrary do-assignments;
/// Monte-Carlo for the linear family, exact for the discrete one.
inline EffectEstimate interventional_mean(const ModelSpec& ms, const TemporalVertex& target,
                                          const DoAssignments& dos, std::size_t n = 100000,
                                          std::uint64_t seed = 1) {
    ms.validate();
    sim_detail::Plan plan = sim_detail::make_plan(ms);
    int slot = plan.slot(target);
    sim_detail::DoVec dv = sim_detail::to_dovec(plan, dos);
    std::vector<double> out;
    if (ms.family == ModelFamily::Discrete) {
        double mean = 0.0;
        sim_detail::for_each_u_cell(plan, [&](const std::vector<double>& eps, double prob) {
            sim_detail::propagate(plan, eps, dv, out);
            mean += prob * out[slot];
        });
        return {mean, 0.0, "exact"};
    }
    sim_detail::RunningMean acc;
    std::vector<double> eps;
    for (std::size_t r = 0; r < n; ++r) {
        Rng rng(seed, r);
        sim_detail::draw_noise(plan, rng, eps);
        sim_detail::propagate(plan, eps, dv, out);
        acc.add(out[slot]);
    }
    return {acc.mean(), acc.se(), "monte-carlo"};
}

// ---------------------------------------------------------------------------
// plug-in evaluation of estimands on datasets

struct EmptyCell : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct EstimandBindings {
    int reference_time = 0;
    double x_from = 0.0;
    double x_to = 1.0;
    std::map<std::string, std::vector<double>> free_set_values; // role -> values, default zeros
};

namespace sim_detail {

/// Literal evaluation over a (possibly weighted) discrete dataset: sums range
/// over the observed support, expectations and probabilities use weighted
/// cell frequencies, empty conditioning cells are an error.
class CellEvaluator {
public:
    CellEvaluator(const Estimand& e, const Dataset& d, const EstimandBindings& b)
        : e_(e), d_(d), b_(b) {
        scalars_["x"] = b.x_from;
        scalars_["x'"] = b.x_to;
        for (const auto& [role, vars] : e.sets) {
            // set members truncated at the window start are dropped, mirroring
            // the possible-parents truncation
            std::vector<int> cols;
            for (const auto& v : vars) {
                TemporalVertex tv = v.at(b.reference_time);
                if (tv.time < d.window.t0) continue;
                cols.push_back(d.column_of(tv));
            }
            set_cols_[role] = cols;
        }
    }

    double run() { return eval(e_.root); }

private:
    using Assignment = std::vector<double>;

    const std::vector<Assignment>& support(const std::string& role) {
        auto it = support_.find(role);
        if (it != support_.end()) return it->second;
        std::map<Assignment, char> seen;
        const auto& cols = set_cols_.at(role);
        for (std::size_t r = 0; r < d_.rows(); ++r) {
            if (d_.weight(r) <= 0.0) continue;
            Assignment a;
            for (int c : cols) a.push_back(d_.at(r, c));
            seen[a];
        }
        std::vector<Assignment> out;
        for (const auto& [a, unused] : seen) out.push_back(a);
        return support_.emplace(role, std::move(out)).first->second;
    }

    const Assignment& set_value(const std::string& role, const std::string& symbol) const {
        auto bound = bound_sets_.find(symbol);
        if (bound != bound_sets_.end()) return bound->second;
        auto free = free_defaults_.find(role);
        if (free != free_defaults_.end()) return free->second;
        auto& slot = free_defaults_[role];
        auto supplied = b_.free_set_values.find(role);
        if (supplied != b_.free_set_values.end())
            slot = supplied->second;
        slot.resize(set_cols_.at(role).size(), 0.0);
        return slot;
    }

    template <typename RowFn>
    void matching_rows(const std::vector<std::pair<EstimandVar, std::string>>& scalar_conds,
                       const std::vector<std::pair<std::string, std::string>>& set_conds,
                       RowFn&& fn) const {
        std::vector<std::pair<int, double>> constraints;
        for (const auto& [v, sym] : scalar_conds)
            constraints.push_back({d_.column_of(v.at(b_.reference_time)), scalars_.at(sym)});
        for (const auto& [role, sym] : set_conds) {
            const auto& cols = set_cols_.at(role);
            const Assignment& vals = set_value(role, sym);
            for (std::size_t i = 0; i < cols.size(); ++i)
                constraints.push_back({cols[i], vals[i]});
        }
        for (std::size_t r = 0; r < d_.rows(); ++r) {
            double w = d_.weight(r);
            if (w <= 0.0) continue;
            bool ok = true;
            for (const auto& [c, v] : constraints)
                if (d_.at(r, c) != v) {
                    ok = false;
                    break;
                }
            if (ok) fn(r, w);
        }
    }

    double eval(const ExprPtr& x) {
        return std::visit(
            [&](const auto& n) -> double {
                using T = std::decay_t<decltype(n)>;
                if constexpr (std::is_same_v<T, Expectation>) {
                    int target = d_.column_of(n.target.at(b_.reference_time));
                    double num = 0, den = 0;
                    matching_rows(n.scalar_given, n.set_given, [&](std::size_t r, double w) {
                        num += w * d_.at(r, target);
                        den += w;
                    });
                    if (den <= 0.0) throw EmptyCell("empty conditioning cell in expectation");
                    return num / den;
                } else if constexpr (std::is_same_v<T, Probability>) {
                    double num = 0, den = 0;
                    matching_rows(n.scalar_given, n.set_given, [&](std::size_t r, double w) {
                        den += w;
                        bool hit = true;
                        for (const auto& [role, sym] : n.set_targets) {
                            const auto& cols = set_cols_.at(role);
                            const Assignment& vals = set_value(role, sym);
                            for (std::size_t i = 0; i < cols.size() && hit; ++i)
                                hit = d_.at(r, cols[i]) == vals[i];
                            if (!hit) break;
                        }
                        if (hit) num += w;
                    });
                    if (den <= 0.0) throw EmptyCell("empty conditioning cell in probability");
                    return num / den;
                } else if constexpr (std::is_same_v<T, SumOver>) {
                    double total = 0;
                    for (const Assignment& a : support(n.set_name)) {
                        bound_sets_[n.symbol] = a;
                        total += eval(n.body);
                    }
                    bound_sets_.erase(n.symbol);
                    return total;
                } else if constexpr (std::is_same_v<T, Product>) {
                    double p = 1;
                    for (const auto& f : n.factors) p *= eval(f);
                    return p;
                } else { // Difference
                    return eval(n.lhs) - eval(n.rhs);
                }
            },
            x->node);
    }

    const Estimand& e_;
    const Dataset& d_;
    const EstimandBindings& b_;
    std::map<std::string, double> scalars_;
    std::map<std::string, std::vector<int>> set_cols_;
    std::map<std::string, std::vector<Assignment>> support_;
    std::map<std::string, Assignment> bound_sets_;
    mutable std::map<std::string, Assignment> free_defaults_;
};

/// Weighted least squares of y on [1, regressors...]; returns the coefficient
/// of the first regressor and its standard error.
inline std::pair<double, double> ols_first_coeff(const Dataset& d, int y_col,
                                                 const std::vector<int>& x_cols) {
    const std::size_t k = x_cols.size() + 1;
    std::vector<std::vector<double>> xtx(k, std::vector<double>(k, 0.0));
    std::vector<double> xty(k, 0.0);
    std::vector<double> row(k, 1.0);
    double total_w = 0;
    for (std::size_t r = 0; r < d.rows(); ++r) {
        double w = d.weight(r);
        for (std::size_t j = 1; j < k; ++j) row[j] = d.at(r, x_cols[j - 1]);
        double y = d.at(r, y_col);
        for (std::size_t i = 0; i < k; ++i) {
            xty[i] += w * row[i] * y;
            for (std::size_t j = i; j < k; ++j) xtx[i][j] += w * row[i] * row[j];
        }
        total_w += w;
    }
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < i; ++j) xtx[i][j] = xtx[j][i];

    // Gauss-Jordan inverse
    std::vector<std::vector<double>> inv(k, std::vector<double>(k, 0.0));
    for (std::size_t i = 0; i < k; ++i) inv[i][i] = 1.0;
    auto a = xtx;
    for (std::size_t col = 0; col < k; ++col) {
        std::size_t piv = col;
        for (std::size_t r2 = col + 1; r2 < k; ++r2)
            if (std::abs(a[r2][col]) > std::abs(a[piv][col])) piv = r2;
        if (std::abs(a[piv][col]) < 1e-12)
            throw std::runtime_error("singular design matrix in the plug-in regression");
        std::swap(a[piv], a[col]);
        std::swap(inv[piv], inv[col]);
        double s = a[col][col];
        for (std::size_t j = 0; j < k; ++j) {
            a[col][j] /= s;
            inv[col][j] /= s;
        }
        for (std::size_t r2 = 0; r2 < k; ++r2) {
            if (r2 == col) continue;
            double f = a[r2][col];
            if (f == 0.0) continue;
            for (std::size_t j = 0; j < k; ++j) {
                a[r2][j] -= f * a[col][j];
                inv[r2][j] -= f * inv[col][j];
            }
        }
    }
    std::vector<double> beta(k, 0.0);
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < k; ++j) beta[i] += inv[i][j] * xty[j];

    double rss = 0;
    for (std::size_t r = 0; r < d.rows(); ++r) {
        double w = d.weight(r);
        double pred = beta[0];
        for (std::size_t j = 1; j < k; ++j) pred += beta[j] * d.at(r, x_cols[j - 1]);
        double res = d.at(r, y_col) - pred;
        rss += w * res * res;
    }
    double dof = total_w - static_cast<double>(k);
    double sigma2 = dof > 0 ? rss / dof : 0.0;
    double se = std::sqrt(std::max(0.0, sigma2 * inv[1][1]));
    return {beta[1], se};
}

struct CdeShape {
    EstimandVar outcome;
    EstimandVar treatment;
    std::optional<std::string> z_role;
};

/// Recognizes the two emitted estimand shapes: the bare adjustment contrast
/// and the weighted sum around it. The weights integrate to one, so under the
/// linear family both reduce to the same regression coefficient.
inline std::optional<CdeShape> match_cde_shape(const ExprPtr& root) {
    const Difference* diff = std::get_if<Difference>(&root->node);
    if (!diff) {
        const SumOver* sum = std::get_if<SumOver>(&root->node);
        if (!sum) return std::nullopt;
        const Product* prod = std::get_if<Product>(&sum->body->node);
        if (!prod || prod->factors.empty()) return std::nullopt;
        diff = std::get_if<Difference>(&prod->factors.front()->node);
        if (!diff) return std::nullopt;
    }
    const Expectation* hi = std::get_if<Expectation>(&diff->lhs->node);
    const Expectation* lo = std::get_if<Expectation>(&diff->rhs->node);
    if (!hi || !lo || hi->scalar_given.size() != 1 || lo->scalar_given.size() != 1)
        return std::nullopt;
    if (!(hi->target == lo->target) || !(hi->scalar_given[0].first == lo->scalar_given[0].first))
        return std::nullopt;
    CdeShape shape;
    shape.outcome = hi->target;
    shape.treatment = hi->scalar_given[0].first;
    if (!hi->set_given.empty()) shape.z_role = hi->set_given[0].first;
    return shape;
}

} // namespace sim_detail

/// Plug-in value of an estimand on a dataset. Discrete datasets are evaluated
/// literally with cell frequencies (exact when the dataset carries the exact
/// joint weights). Continuous datasets use the least-squares plug-in of
/// E[Y | X, Z], valid for the linear family; the reported value is the fitted
/// treatment coefficient scaled by (x' - x).
inline EffectEstimate evaluate_estimand(const Estimand& e, const Dataset& d,
                                        const EstimandBindings& b) {
    if (d.rows() == 0) throw std::invalid_argument("empty dataset");
    if (d.discrete) {
        sim_detail::CellEvaluator eval(e, d, b);
        return {eval.run(), 0.0, "plug-in-cells"};
    }
    auto shape = sim_detail::match_cde_shape(e.root);
    if (!shape)
        throw std::invalid_argument("unsupported estimand shape for continuous evaluation");
    int y_col = d.column_of(shape->outcome.at(b.reference_time));
    std::vector<int> x_cols{d.column_of(shape->treatment.at(b.reference_time))};
    if (shape->z_role)
        for (const auto& v : e.sets.at(*shape->z_role)) {
            TemporalVertex tv = v.at(b.reference_time);
            if (tv.time < d.window.t0) continue; // truncated, as in possible_parents
            x_cols.push_back(d.column_of(tv));
        }
    auto [coeff, se] = sim_detail::ols_first_coeff(d, y_col, x_cols);
    double scale = b.x_to - b.x_from;
    return {coeff * scale, se * std::abs(scale), "plug-in-ols"};
}

/// The exact joint law of a discrete model as a weighted dataset.
inline Dataset exact_joint(const ModelSpec& ms) {
    ms.validate();
    if (ms.family != ModelFamily::Discrete)
        throw std::invalid_argument("exact joint requires the discrete family");
    sim_detail::Plan plan = sim_detail::make_plan(ms);
    Dataset d;
    d.series = ms.series;
    d.window = ms.window;
    for (const auto& vp : plan.vars) d.columns.push_back(vp.vertex);
    d.discrete = true;
    d.provenance = "exact-joint";
    sim_detail::DoVec none = sim_detail::to_dovec(plan, {});
    std::map<std::vector<double>, double> mass;
    std::vector<double> out;
    sim_detail::for_each_u_cell(plan, [&](const std::vector<double>& eps, double prob) {
        sim_detail::propagate(plan, eps, none, out);
        mass[out] += prob;
    });
    for (const auto& [row, w] : mass) {
        d.values.insert(d.values.end(), row.begin(), row.end());
        d.weights.push_back(w);
    }
    return d;
}

} // namespace scgid
