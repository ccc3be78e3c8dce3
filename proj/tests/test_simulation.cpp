#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "scgid/identification.hpp"
#include "scgid/json_io.hpp"
#include "scgid/simulation.hpp"
#include "support/fixtures.hpp"

using namespace scgid;
using test_support::fixture_path;
using test_support::fixture_scg;

namespace {

double combined_se(const EffectEstimate& a, const EffectEstimate& b) {
    return std::sqrt(a.se * a.se + b.se * b.se);
}

ModelSpec two_series_linear(double coeff) {
    ModelSpec ms;
    ms.family = ModelFamily::Linear;
    ms.series = {"X", "Y"};
    ms.window = {0, 2};
    ms.gamma_max = 1;
    ms.equations = {
        {"X", {}, 0.0, {}},
        {"Y", {{"X", 1, coeff}}, 0.0, {}},
    };
    if (coeff == 0.0) ms.equations[1].parents.clear();
    ms.noise = {{"X", 0.0, 1.0, "", 0.0}, {"Y", 0.0, 1.0, "", 0.0}};
    return ms;
}

// Independent check for the discrete family: probability of a full value
// configuration is the product of its table factors, with do-overrides
// truncating the factorization.
double cpt_joint_mean(const ModelSpec& ms, const TemporalVertex& target,
                      const DoAssignments& dos) {
    std::vector<TemporalVertex> vars;
    for (int t = ms.window.t0; t <= ms.window.tmax; ++t)
        for (const auto& s : ms.series) vars.push_back({s, t});
    double mean = 0.0;
    const std::size_t combos = std::size_t(1) << vars.size();
    for (std::size_t bits = 0; bits < combos; ++bits) {
        std::map<std::string, double> val;
        for (std::size_t i = 0; i < vars.size(); ++i)
            val[vars[i].name()] = (bits >> i) & 1 ? 1.0 : 0.0;
        double prob = 1.0;
        for (const auto& v : vars) {
            auto forced = dos.find(v);
            if (forced != dos.end()) {
                if (val[v.name()] != forced->second) {
                    prob = 0.0;
                    break;
                }
                continue;
            }
            const Equation& eq = ms.equation(v.series);
            std::size_t row = 0;
            for (std::size_t k = 0; k < eq.parents.size(); ++k) {
                int pt = v.time - eq.parents[k].lag;
                double pv = pt < ms.window.t0 ? 0.0 : val[TemporalVertex{eq.parents[k].series, pt}.name()];
                if (pv != 0.0) row |= std::size_t(1) << k;
            }
            double p1 = eq.table[row];
            prob *= val[v.name()] != 0.0 ? p1 : 1.0 - p1;
        }
        mean += prob * val[target.name()];
    }
    return mean;
}

} // namespace

TEST_CASE("interventional contrast matches the structural coefficient") {
    ModelSpec ms = two_series_linear(2.0);
    EffectEstimate hi = interventional_mean(ms, {"Y", 2}, {{{"X", 1}, 1.0}}, 100000, 7);
    EffectEstimate lo = interventional_mean(ms, {"Y", 2}, {{{"X", 1}, 0.0}}, 100000, 7);
    double diff = hi.value - lo.value;
    CHECK(std::abs(diff - 2.0) < 3.0 * combined_se(hi, lo));
}

TEST_CASE("sampling basics") {
    ModelSpec ms = two_series_linear(1.0);
    Dataset empty = sample(ms, 0);
    CHECK(empty.rows() == 0);
    CHECK(empty.columns.size() == 6);

    Dataset a = sample(ms, 50, {}, 42);
    Dataset b = sample(ms, 50, {}, 42);
    CHECK(a.values == b.values); // bit-identical under a fixed seed
    Dataset c = sample(ms, 50, {}, 43);
    CHECK(a.values != c.values);

    Dataset forced = sample(ms, 10, {{{"X", 1}, 5.0}}, 1);
    int col = forced.column_of({"X", 1});
    for (std::size_t r = 0; r < forced.rows(); ++r) CHECK(forced.at(r, col) == 5.0);
    CHECK(forced.provenance == "interventional");

    CHECK_THROWS_AS(sample(ms, 1, {{{"Q", 1}, 0.0}}), std::invalid_argument);
    CHECK_THROWS_AS(sample(ms, 1, {{{"X", 9}, 0.0}}), std::invalid_argument);
}

TEST_CASE("csv export uses series-at-time headers") {
    ModelSpec ms = two_series_linear(1.0);
    Dataset d = sample(ms, 2, {}, 3);
    std::string csv = d.to_csv();
    CHECK(csv.rfind("X@0,Y@0,X@1,Y@1,X@2,Y@2\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
}

TEST_CASE("controlled effect of the linear family is the direct coefficient") {
    SummaryCausalGraph fig5c = fixture_scg("fig5c.json");
    ModelSpec ms = load_model(fixture_path("fig5c-model.json"));
    CHECK(ms.to_scg().same_structure(fig5c));

    EffectQuery q{"X", 1, "Y", 4, 0.0, 1.0};
    EffectEstimate cde = true_cde(ms, q, {}, 60000, 11);
    CHECK(std::abs(cde.value - 0.7) < 3.0 * cde.se);

    // the contrast does not depend on where the other parents are held
    EffectEstimate other = true_cde(ms, q, {1.0, -0.5, 2.0, 0.3}, 60000, 11);
    CHECK(std::abs(other.value - cde.value) < 3.0 * combined_se(cde, other));

    EffectEstimate null_effect = true_cde(two_series_linear(0.0), {"X", 1, "Y", 2, 0.0, 1.0});
    CHECK(null_effect.value == 0.0);
}

TEST_CASE("natural effect of the linear family is the direct coefficient") {
    ModelSpec ms = load_model(fixture_path("fig5c-model.json"));
    EffectQuery q{"X", 1, "Y", 4, 0.0, 1.0};
    EffectEstimate nde = true_nde(ms, q, 60000, 13);
    CHECK(std::abs(nde.value - 0.7) < 3.0 * nde.se);

    EffectQuery same{"X", 1, "Y", 4, 0.4, 0.4};
    CHECK(true_nde(ms, same, 2000, 13).value == 0.0);
}

TEST_CASE("discrete effects agree with closed forms and the factorized joint") {
    ModelSpec ms = load_model(fixture_path("discrete3-model.json"));
    EffectQuery q{"X", 1, "Y", 1, 0.0, 1.0};

    EffectEstimate cde = true_cde(ms, q);
    CHECK(cde.method == "exact");
    // direct contrast at Z = 0: rows x=1,y0=0 and x=0,y0=0 of the outcome table
    CHECK(cde.value == Catch::Approx(0.7 - 0.2).margin(1e-12));

    // independent route: truncated factorization over all configurations
    TemporalVertexSet z = possible_parents(ms.to_scg(), "Y", 1, ms.window);
    z.erase(TemporalVertex{"X", 0});
    DoAssignments hi{{TemporalVertex{"X", 0}, 1.0}}, lo{{TemporalVertex{"X", 0}, 0.0}};
    for (const auto& v : z) hi[v] = lo[v] = 0.0;
    double by_cpt = cpt_joint_mean(ms, {"Y", 1}, hi) - cpt_joint_mean(ms, {"Y", 1}, lo);
    CHECK(cde.value == Catch::Approx(by_cpt).margin(1e-12));

    // natural effect mixes the two outcome-table columns by P(Y_0)
    EffectEstimate nde = true_nde(ms, q);
    CHECK(nde.method == "exact");
    double expected = 0.8 * (0.7 - 0.2) + 0.2 * (0.8 - 0.35);
    CHECK(nde.value == Catch::Approx(expected).margin(1e-12));
}

TEST_CASE("estimand evaluation on a hand-built dataset") {
    Dataset d;
    d.series = {"X", "Y"};
    d.window = {0, 0};
    d.columns = {{"X", 0}, {"Y", 0}};
    d.discrete = true;
    d.values = {0, 0, 1, 1, 1, 1, 0, 0}; // Y == X on every row
    Estimand e;
    Expectation hi{{"Y", 0}, {{{"X", 0}, "x'"}}, {}};
    Expectation lo{{"Y", 0}, {{{"X", 0}, "x"}}, {}};
    e.root = make_expr({Difference{make_expr({hi}), make_expr({lo})}});
    EstimandBindings b{0, 0.0, 1.0, {}};
    CHECK(evaluate_estimand(e, d, b).value == 1.0);

    // conditioning on a value that never occurs is an error
    EstimandBindings bad{0, 2.0, 3.0, {}};
    CHECK_THROWS_AS(evaluate_estimand(e, d, bad), EmptyCell);
}

TEST_CASE("plug-in estimands match the simulated truth on the linear fixture") {
    ModelSpec ms = load_model(fixture_path("fig5c-model.json"));
    SummaryCausalGraph scg = ms.to_scg();
    EffectQuery q{"X", 1, "Y", 4, 0.0, 1.0};

    Dataset obs = sample(ms, 100000, {}, 21);
    EstimandBindings b{4, q.x_from, q.x_to, {}};

    Decision cde_dec = check_cde(scg, q);
    REQUIRE(cde_dec.estimand.has_value());
    EffectEstimate plug_cde = evaluate_estimand(*cde_dec.estimand, obs, b);
    EffectEstimate truth_cde = true_cde(ms, q, {}, 100000, 22);
    CHECK(std::abs(plug_cde.value - truth_cde.value) < 3.0 * combined_se(plug_cde, truth_cde));

    Decision nde_dec = check_nde(scg, q);
    REQUIRE(nde_dec.estimand.has_value());
    EffectEstimate plug_nde = evaluate_estimand(*nde_dec.estimand, obs, b);
    EffectEstimate truth_nde = true_nde(ms, q, 100000, 23);
    CHECK(std::abs(plug_nde.value - truth_nde.value) < 3.0 * combined_se(plug_nde, truth_nde));
}

TEST_CASE("plug-in estimands are exact on the discrete fixture") {
    ModelSpec ms = load_model(fixture_path("discrete3-model.json"));
    SummaryCausalGraph scg = ms.to_scg();
    EffectQuery q{"X", 1, "Y", 1, 0.0, 1.0};
    Dataset joint = exact_joint(ms);
    EstimandBindings b{1, 0.0, 1.0, {}};

    Decision cde_dec = check_cde(scg, q);
    REQUIRE(cde_dec.verdict.status == IdStatus::Identifiable);
    double plug_cde = evaluate_estimand(*cde_dec.estimand, joint, b).value;
    CHECK(plug_cde == Catch::Approx(true_cde(ms, q).value).margin(1e-9));

    Decision nde_dec = check_nde(scg, q);
    REQUIRE(nde_dec.verdict.status == IdStatus::Identifiable);
    double plug_nde = evaluate_estimand(*nde_dec.estimand, joint, b).value;
    CHECK(plug_nde == Catch::Approx(true_nde(ms, q).value).margin(1e-9));
    CHECK(plug_nde == Catch::Approx(0.49).margin(1e-9));
}

TEST_CASE("replacing the parents by the possible parents leaves do-means unchanged") {
    // linear fixture, Monte-Carlo on both sides
    ModelSpec ms = load_model(fixture_path("fig5c-model.json"));
    DoAssignments parents{{TemporalVertex{"X", 3}, 1.0},
                          {TemporalVertex{"W", 4}, 0.5},
                          {TemporalVertex{"Z", 3}, -0.3},
                          {TemporalVertex{"Y", 3}, 0.8}};
    TemporalVertexSet pp = property1_reduction(ms.to_scg(), "Y", 4, ms.window);
    DoAssignments extended = parents;
    for (const auto& v : pp)
        if (!extended.count(v)) extended[v] = 0.7;
    EffectEstimate lhs = interventional_mean(ms, {"Y", 4}, parents, 100000, 31);
    EffectEstimate rhs = interventional_mean(ms, {"Y", 4}, extended, 100000, 32);
    CHECK(std::abs(lhs.value - rhs.value) < 3.0 * combined_se(lhs, rhs));

    // discrete fixture, exact on both sides
    ModelSpec dm = load_model(fixture_path("discrete3-model.json"));
    DoAssignments dparents{{TemporalVertex{"X", 0}, 1.0}, {TemporalVertex{"Y", 0}, 0.0}};
    TemporalVertexSet dpp = property1_reduction(dm.to_scg(), "Y", 1, dm.window);
    DoAssignments dext = dparents;
    for (const auto& v : dpp)
        if (!dext.count(v)) dext[v] = 1.0;
    double dl = interventional_mean(dm, {"Y", 1}, dparents).value;
    double dr = interventional_mean(dm, {"Y", 1}, dext).value;
    CHECK(dl == Catch::Approx(dr).margin(1e-12));

    // degenerate case: isolated outcome, empty reduction, equal plain means
    SummaryCausalGraph iso = SummaryCausalGraph::make({"Y"}, 0);
    CHECK(property1_reduction(iso, "Y", 1, {0, 2}).empty());
}

TEST_CASE("the two compatible mechanisms share one observational law") {
    ModelSpec mb = load_model(fixture_path("fig1b-model.json"));
    ModelSpec mc = load_model(fixture_path("fig1c-model.json"));
    SummaryCausalGraph fig1a = fixture_scg("fig1a.json");
    CHECK(mb.to_scg().same_structure(fig1a));
    CHECK(mc.to_scg().same_structure(fig1a));

    // re-derive the matched parameters and compare against the fixture
    const double theta = 0.8, beta = 0.9, delta = 0.4, rho = 0.5;
    const double c = 1.0, d = 0.6, e = 0.3;
    const double sy2_c = theta * theta + 1.0;
    const double theta_c = theta / sy2_c;
    auto coeff = [&](const Equation& eq, const Series& s, int lag) {
        for (const auto& p : eq.parents)
            if (p.series == s && p.lag == lag) return p.coeff;
        return 0.0;
    };
    const Equation& yc = mc.equation("Y");
    const Equation& wc = mc.equation("W");
    CHECK(coeff(yc, "X", 1) == Catch::Approx(theta * beta + c).margin(1e-12));
    CHECK(coeff(yc, "W", 1) == Catch::Approx(theta * delta + d).margin(1e-12));
    CHECK(coeff(yc, "Y", 1) == Catch::Approx(theta * rho + e).margin(1e-12));
    CHECK(coeff(wc, "Y", 0) == Catch::Approx(theta_c).margin(1e-12));
    CHECK(coeff(wc, "X", 1) == Catch::Approx(beta - theta_c * (theta * beta + c)).margin(1e-12));
    CHECK(mc.noise_of("Y").sd == Catch::Approx(std::sqrt(sy2_c)).margin(1e-12));
    CHECK(mc.noise_of("W").sd == Catch::Approx(std::sqrt(1.0 / sy2_c)).margin(1e-12));

    // empirical check: second moments of one slice match across the models
    Dataset db = sample(mb, 120000, {}, 41);
    Dataset dc = sample(mc, 120000, {}, 42);
    struct Moment {
        double mean, se;
    };
    auto moment = [](const Dataset& ds, const TemporalVertex& a, const TemporalVertex& b) {
        int ca = ds.column_of(a), cb = ds.column_of(b);
        double s = 0, s2 = 0;
        for (std::size_t r = 0; r < ds.rows(); ++r) {
            double p = ds.at(r, ca) * ds.at(r, cb);
            s += p;
            s2 += p * p;
        }
        double n = static_cast<double>(ds.rows());
        double m = s / n;
        return Moment{m, std::sqrt(std::max(0.0, (s2 / n - m * m) / n))};
    };
    for (auto [a, b] : std::vector<std::pair<TemporalVertex, TemporalVertex>>{
             {{"W", 3}, {"W", 3}}, {{"Y", 3}, {"Y", 3}}, {{"W", 3}, {"Y", 3}},
             {{"W", 3}, {"X", 2}}, {{"Y", 3}, {"W", 2}}}) {
        CAPTURE(a.name(), b.name());
        Moment ma = moment(db, a, b), mc2 = moment(dc, a, b);
        CHECK(std::abs(ma.mean - mc2.mean) <
              5.0 * std::sqrt(ma.se * ma.se + mc2.se * mc2.se));
    }
}

TEST_CASE("negative control: one plug-in number, two different truths") {
    ModelSpec mb = load_model(fixture_path("fig1b-model.json"));
    ModelSpec mc = load_model(fixture_path("fig1c-model.json"));
    SummaryCausalGraph fig1a = fixture_scg("fig1a.json");
    EffectQuery q{"X", 1, "Y", 3, 0.0, 1.0};

    // intervening on every parent of the outcome leaves only its own noise,
    // which the paired contrast cancels, so the truths come out exact
    EffectEstimate truth_b = true_cde(mb, q, {}, 100000, 51);
    EffectEstimate truth_c = true_cde(mc, q, {}, 100000, 52);
    CHECK(std::abs(truth_b.value - 1.0) < 3.0 * truth_b.se + 1e-9);
    CHECK(std::abs(truth_c.value - 1.72) < 3.0 * truth_c.se + 1e-9);
    CHECK(std::abs(truth_b.value - truth_c.value) > 5.0 * combined_se(truth_b, truth_c));

    // the naive adjustment formula is built despite the UNKNOWN verdict
    CHECK(check_cde(fig1a, q).verdict.status == IdStatus::Unknown);
    Estimand naive = make_cde_estimand(fig1a, q);
    EstimandBindings b{3, 0.0, 1.0, {}};
    EffectEstimate plug_b = evaluate_estimand(naive, sample(mb, 100000, {}, 53), b);
    EffectEstimate plug_c = evaluate_estimand(naive, sample(mc, 100000, {}, 54), b);

    // both datasets give the same number (they share the observational law)
    CHECK(std::abs(plug_b.value - plug_c.value) < 4.0 * combined_se(plug_b, plug_c));
    // and that number is wrong for at least one of the mechanisms
    CHECK(std::abs(plug_b.value - truth_c.value) > 5.0 * combined_se(plug_b, truth_c));
    CHECK(std::abs(plug_b.value - truth_b.value) < 3.0 * combined_se(plug_b, truth_b));
}

TEST_CASE("plug-in error shrinks along the sample-size grid") {
    ModelSpec ms = load_model(fixture_path("fig5c-model.json"));
    SummaryCausalGraph scg = ms.to_scg();
    EffectQuery q{"X", 1, "Y", 4, 0.0, 1.0};
    Estimand est = *check_cde(scg, q).estimand;
    EstimandBindings b{4, 0.0, 1.0, {}};
    std::vector<double> diffs, ses;
    for (std::size_t n : {1000u, 10000u, 100000u}) {
        EffectEstimate plug = evaluate_estimand(est, sample(ms, n, {}, 61), b);
        diffs.push_back(std::abs(plug.value - 0.7));
        ses.push_back(plug.se);
    }
    CHECK(diffs[1] < diffs[0] + 3.0 * ses[0]);
    CHECK(diffs[2] < diffs[1] + 3.0 * ses[1]);
    CHECK(diffs[2] < diffs[0]);
}

TEST_CASE("model validation rejects malformed specifications") {
    ModelSpec ms = two_series_linear(1.0);
    ms.equations[1].parents[0].lag = 5;
    CHECK_THROWS_AS(ms.validate(), std::invalid_argument);

    ModelSpec cyc = two_series_linear(1.0);
    cyc.equations[0].parents = {{"Y", 0, 1.0}};
    cyc.equations[1].parents = {{"X", 0, 1.0}};
    CHECK_THROWS_AS(cyc.validate(), std::invalid_argument);

    ModelSpec badsd = two_series_linear(1.0);
    badsd.noise[0].sd = 0.0;
    CHECK_THROWS_AS(badsd.validate(), std::invalid_argument);

    ModelSpec disc = load_model(fixture_path("discrete3-model.json"));
    disc.equations[2].table = {0.5};
    CHECK_THROWS_AS(disc.validate(), std::invalid_argument);
    disc.equations[2].table = {0.0, 1.0, 0.5, 0.5};
    CHECK_THROWS_AS(disc.validate(), std::invalid_argument);
}

TEST_CASE("effect estimates are bit-identical across runs") {
    ModelSpec ms = load_model(fixture_path("fig5c-model.json"));
    EffectQuery q{"X", 1, "Y", 4, 0.0, 1.0};
    EffectEstimate a = true_cde(ms, q, {}, 5000, 9);
    EffectEstimate b = true_cde(ms, q, {}, 5000, 9);
    CHECK(a.value == b.value);
    CHECK(a.se == b.se);
    EffectEstimate n1 = true_nde(ms, q, 5000, 9);
    EffectEstimate n2 = true_nde(ms, q, 5000, 9);
    CHECK(n1.value == n2.value);
}
