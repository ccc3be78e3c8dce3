// Command-line front end: identifiability checks on summary causal graphs,
// brute-force verification against compatible full-time graphs, and
// simulation-based validation of the emitted adjustment formulas.
//
// Exit codes: 0 identifiable / claim holds / estimate within tolerance,
// 1 usage or input error, 2 not identifiable by adjustment, 3 unknown,
// 4 counterexample found, 5 enumeration cap exceeded, 6 estimate mismatch.

#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "scgid/identification.hpp"
#include "scgid/json_io.hpp"
#include "scgid/oracle.hpp"
#include "scgid/simulation.hpp"

using namespace scgid;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitNotByAdjustment = 2;
constexpr int kExitUnknown = 3;
constexpr int kExitCounterexample = 4;
constexpr int kExitCapExceeded = 5;
constexpr int kExitEstimateMismatch = 6;

std::string fmt(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", x);
    return buf;
}

std::uint64_t default_cap() {
    if (const char* env = std::getenv("SCGID_ORACLE_CAP")) {
        char* end = nullptr;
        unsigned long long v = std::strtoull(env, &end, 10);
        if (end && *end == '\0' && v > 0) return v;
        std::cerr << "warning: ignoring malformed SCGID_ORACLE_CAP\n";
    }
    return kDefaultEnumerationCap;
}

void print_conditions(const Verdict& v) {
    std::cout << "conditions:\n";
    for (const auto& c : v.conditions)
        std::cout << "  [" << (c.passed ? "pass" : "fail") << "] " << c.id << ": "
                  << c.description << "\n";
    for (const auto& c : v.conditions)
        if (!c.passed) std::cout << "condition " << c.id << " failed: " << c.detail << "\n";
}

int report_decision(const Decision& d, const std::string& effect) {
    std::cout << "verdict: " << to_string(d.verdict.status) << "\n";
    print_conditions(d.verdict);
    if (!d.verdict.violating_cycle.empty()) {
        std::cout << "witness cycle:";
        for (std::size_t i = 0; i < d.verdict.violating_cycle.size(); ++i)
            std::cout << (i ? " -> " : " ") << d.verdict.violating_cycle[i];
        std::cout << "\n";
    }
    if (d.estimand) {
        std::cout << effect << " = " << d.estimand->text() << "\n";
    }
    switch (d.verdict.status) {
    case IdStatus::Identifiable: return kExitOk;
    case IdStatus::NotIdentifiableByAdjustment: return kExitNotByAdjustment;
    case IdStatus::Unknown: return kExitUnknown;
    }
    return kExitUsage;
}

struct CheckArgs {
    std::string graph;
    std::string treatment;
    std::string outcome;
    int lag = -1; // defaults to gamma_max
    bool assume_no_hidden_confounding = false;
};

int run_check(const CheckArgs& args, bool nde) {
    SummaryCausalGraph scg = load_scg(args.graph);
    EffectQuery q;
    q.treatment = args.treatment;
    q.outcome = args.outcome;
    q.lag = args.lag < 0 ? scg.gamma_max : args.lag;
    q.time = 0;
    std::cout << "graph: " << args.graph << "\n";
    std::cout << "query: " << (nde ? "NDE" : "CDE") << " of " << q.treatment << "_{t-" << q.lag
              << "} on " << q.outcome << "_t\n";
    Decision d = nde ? check_nde(scg, q) : check_cde(scg, q, args.assume_no_hidden_confounding);
    return report_decision(d, nde ? "NDE(x,x')" : "CDE(x,x',z)");
}

struct OracleArgs {
    std::string graph;
    int window_slices = 3;
    bool stationary = false;
    std::string claim = "thm1";
    std::string treatment;
    std::string outcome;
    int lag = -1;
    std::uint64_t cap = 0;
    std::string counterexample_out = "counterexample.json";
};

int run_oracle(const OracleArgs& args) {
    SummaryCausalGraph scg = load_scg(args.graph);
    if (args.window_slices < 1) throw std::invalid_argument("--window must be at least 1");
    Window window{0, args.window_slices - 1};
    int lag = args.lag < 0 ? scg.gamma_max : args.lag;
    std::uint64_t cap = args.cap ? args.cap : default_cap();

    OracleClaim claim = [&]() -> OracleClaim {
        if (args.claim == "thm1") {
            if (args.outcome.empty()) throw std::invalid_argument("--claim thm1 needs --outcome");
            return thm1_claim(scg, args.outcome, window);
        }
        if (args.claim == "thm2") {
            if (args.outcome.empty() || args.treatment.empty())
                throw std::invalid_argument("--claim thm2 needs --treatment and --outcome");
            return thm2_claim(scg, args.treatment, lag, args.outcome, window);
        }
        if (args.claim == "r2r3") {
            if (args.outcome.empty() || args.treatment.empty())
                throw std::invalid_argument("--claim r2r3 needs --treatment and --outcome");
            return r2r3_claim(args.treatment, args.outcome, window);
        }
        throw std::invalid_argument("unknown claim: " + args.claim);
    }();

    CompatibilityClass cc(scg, window, args.stationary);
    std::cout << "graph: " << args.graph << "\n";
    std::cout << "window: " << args.window_slices << " slices [" << window.t0 << ", "
              << window.tmax << "]" << (args.stationary ? ", stationary" : "") << "\n";
    std::cout << "claim: " << args.claim << "\n";

    HoldsResult r = holds_in_all(cc, claim, cap);
    std::cout << "graphs checked: " << r.graphs_checked << " (" << to_string(r.method) << ")\n";
    if (r.holds) {
        std::cout << "result: PASS\n";
        return kExitOk;
    }
    std::cout << "result: FAIL\n";
    if (r.counterexample) {
        write_text_file(args.counterexample_out, to_json_text(*r.counterexample));
        std::cout << "counterexample written to " << args.counterexample_out << "\n";
    } else {
        std::cout << "no counterexample materialized within the cap\n";
    }
    return kExitCounterexample;
}

struct EstimateArgs {
    std::string model;
    std::string effect = "cde";
    std::string treatment;
    std::string outcome;
    int lag = -1;
    double x0 = 0.0;
    double x1 = 1.0;
    std::size_t n = 100000;
    std::uint64_t seed = 0;
    double tolerance_se = 3.0;
    std::string dump_data;
};

int run_estimate(const EstimateArgs& args) {
    ModelSpec ms = load_model(args.model);
    SummaryCausalGraph scg = ms.to_scg();
    EffectQuery q;
    q.treatment = args.treatment;
    q.outcome = args.outcome;
    q.lag = args.lag < 0 ? ms.gamma_max : args.lag;
    q.time = ms.window.tmax;
    q.x_from = args.x0;
    q.x_to = args.x1;
    bool nde = args.effect == "nde";
    if (!nde && args.effect != "cde")
        throw std::invalid_argument("--effect must be cde or nde");

    std::cout << "model: " << args.model << " ("
              << (ms.family == ModelFamily::Linear ? "linear" : "discrete") << ")\n";
    std::cout << "query: " << (nde ? "NDE" : "CDE") << " of " << q.treatment << "_{t-" << q.lag
              << "} on " << q.outcome << "_t, x: " << fmt(q.x_from) << " -> " << fmt(q.x_to)
              << ", reference time " << q.time << "\n";

    if (nde && q.time - q.lag - ms.gamma_max < ms.window.t0)
        std::cout << "warning: the window start truncates some possible parents of the "
                     "treatment; the estimand uses the truncated sets\n";

    Decision d = nde ? check_nde(scg, q) : check_cde(scg, q);
    std::cout << "verdict: " << to_string(d.verdict.status) << "\n";
    if (!d.estimand) {
        print_conditions(d.verdict);
        std::cout << "no estimand: the effect is not identified from this model's graph\n";
        return kExitUnknown;
    }

    bool exact = ms.family == ModelFamily::Discrete;
    EffectEstimate truth = nde ? true_nde(ms, q, args.n, args.seed + 1)
                               : true_cde(ms, q, {}, args.n, args.seed + 1);
    Dataset data = exact ? exact_joint(ms) : sample(ms, args.n, {}, args.seed);
    if (!args.dump_data.empty()) write_text_file(args.dump_data, data.to_csv());
    EstimandBindings bindings{q.time, q.x_from, q.x_to, {}};
    EffectEstimate plug = evaluate_estimand(*d.estimand, data, bindings);

    double diff = std::abs(truth.value - plug.value);
    double tolerance =
        exact ? 1e-9 : args.tolerance_se * std::sqrt(truth.se * truth.se + plug.se * plug.se);
    std::cout << "true effect: " << fmt(truth.value) << " +/- " << fmt(truth.se) << " ("
              << truth.method << (exact ? "" : ", n=" + std::to_string(args.n)) << ")\n";
    std::cout << "plug-in:     " << fmt(plug.value) << " +/- " << fmt(plug.se) << " ("
              << plug.method << ")\n";
    std::cout << "difference:  " << fmt(diff) << " (tolerance "
              << (exact ? std::string("exact, 1e-9")
                        : fmt(args.tolerance_se) + " combined standard errors = " + fmt(tolerance))
              << ")\n";
    bool ok = diff <= tolerance;
    std::cout << "agreement: " << (ok ? "OK" : "MISMATCH") << "\n";
    return ok ? kExitOk : kExitEstimateMismatch;
}

struct SampleArgs {
    std::string model;
    std::size_t n = 100;
    std::uint64_t seed = 0;
    std::string out;
    std::vector<std::string> dos;
};

int run_sample(const SampleArgs& args) {
    ModelSpec ms = load_model(args.model);
    DoAssignments dos;
    for (const auto& spec : args.dos) {
        auto eq = spec.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("--do expects SERIES@TIME=VALUE, got " + spec);
        dos[TemporalVertex::parse(spec.substr(0, eq))] = std::stod(spec.substr(eq + 1));
    }
    Dataset d = sample(ms, args.n, dos, args.seed);
    std::string csv = d.to_csv();
    if (args.out.empty())
        std::cout << csv;
    else
        write_text_file(args.out, csv);
    return kExitOk;
}

int run_export_dot(const std::string& graph, const std::string& out) {
    json doc = json::parse(read_text_file(graph));
    std::string dot = is_full_time_document(doc) ? to_dot(full_time_from_json(doc).graph(), graph)
                                                 : to_dot(scg_from_json(doc).base, graph);
    if (out.empty())
        std::cout << dot;
    else
        write_text_file(out, dot);
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"direct-effect identifiability from summary causal graphs"};
    app.require_subcommand(1);

    CheckArgs check;
    auto add_check = [&](CLI::App* sub, bool with_flag) {
        sub->add_option("--graph", check.graph, "summary graph JSON file")->required();
        sub->add_option("--treatment", check.treatment, "treatment series")->required();
        sub->add_option("--outcome", check.outcome, "outcome series")->required();
        sub->add_option("--lag", check.lag, "treatment lag (default: gamma_max)");
        if (with_flag)
            sub->add_flag("--assume-no-hidden-confounding", check.assume_no_hidden_confounding,
                          "treat the graph as free of hidden confounding");
    };
    CLI::App* cde = app.add_subcommand("check-cde", "decide the controlled direct effect");
    add_check(cde, true);
    CLI::App* nde = app.add_subcommand("check-nde", "decide the natural direct effect");
    add_check(nde, false);

    OracleArgs oracle;
    CLI::App* orc =
        app.add_subcommand("oracle", "verify a claim against every compatible full-time graph");
    orc->add_option("--graph", oracle.graph, "summary graph JSON file")->required();
    orc->add_option("--window", oracle.window_slices, "number of time slices")->required();
    orc->add_flag("--stationary", oracle.stationary, "restrict to time-invariant edge patterns");
    orc->add_option("--claim", oracle.claim, "thm1 | thm2 | r2r3")->required();
    orc->add_option("--treatment", oracle.treatment, "treatment series (thm2, r2r3)");
    orc->add_option("--outcome", oracle.outcome, "outcome series");
    orc->add_option("--lag", oracle.lag, "treatment lag (default: gamma_max)");
    orc->add_option("--cap", oracle.cap, "enumeration cap (default: SCGID_ORACLE_CAP or 1e7)");
    orc->add_option("--counterexample-out", oracle.counterexample_out,
                    "where to write a counterexample graph");

    EstimateArgs est;
    CLI::App* estc =
        app.add_subcommand("estimate", "compare the plug-in estimand against the simulated truth");
    estc->add_option("--model", est.model, "structural model JSON file")->required();
    estc->add_option("--effect", est.effect, "cde | nde")->required();
    estc->add_option("--treatment", est.treatment, "treatment series")->required();
    estc->add_option("--outcome", est.outcome, "outcome series")->required();
    estc->add_option("--lag", est.lag, "treatment lag (default: gamma_max)");
    estc->add_option("--x0", est.x0, "baseline treatment value");
    estc->add_option("--x1", est.x1, "contrast treatment value");
    estc->add_option("--n", est.n, "replicates for sampling (linear family)");
    estc->add_option("--seed", est.seed, "random seed");
    estc->add_option("--tolerance-se", est.tolerance_se,
                     "agreement tolerance in combined standard errors");
    estc->add_option("--dump-data", est.dump_data, "write the dataset used for the plug-in (CSV)");

    SampleArgs smp;
    CLI::App* smpc = app.add_subcommand("sample", "draw a dataset from a structural model");
    smpc->add_option("--model", smp.model, "structural model JSON file")->required();
    smpc->add_option("--n", smp.n, "number of rows");
    smpc->add_option("--seed", smp.seed, "random seed");
    smpc->add_option("--out", smp.out, "output CSV path (default: stdout)");
    smpc->add_option("--do", smp.dos, "intervention SERIES@TIME=VALUE (repeatable)");

    std::string dot_graph, dot_out;
    CLI::App* dotc = app.add_subcommand("export-dot", "render a graph file for graphviz");
    dotc->add_option("--graph", dot_graph, "graph JSON file")->required();
    dotc->add_option("--out", dot_out, "output path (default: stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (cde->parsed()) return run_check(check, false);
        if (nde->parsed()) return run_check(check, true);
        if (orc->parsed()) return run_oracle(oracle);
        if (estc->parsed()) return run_estimate(est);
        if (smpc->parsed()) return run_sample(smp);
        if (dotc->parsed()) return run_export_dot(dot_graph, dot_out);
    } catch (const CapExceeded& e) {
        std::cerr << "enumeration cap exceeded: " << e.what() << "\n";
        return kExitCapExceeded;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    return kExitUsage;
}
