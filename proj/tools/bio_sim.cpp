// bio_sim: experiments, custom runs, lower-bound constructions and audits.

#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bio/cli/commands.hpp"

namespace {

using namespace bio;

std::vector<harness::AlgorithmSpec> parse_roster(const std::string& list) {
    std::vector<harness::AlgorithmSpec> out;
    if (list.empty()) return out;
    std::stringstream ss(list);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        auto spec = harness::algorithm_preset(item);
        if (spec.kind == harness::AlgorithmKind::nsd_ucrl2) throw bio::cli::ConfigError("algorithms", "nsd-ucrl2 is not implemented");
        out.push_back(std::move(spec));
    }
    return out;
}

std::vector<int> parse_bits(const std::string& s) {
    std::vector<int> bits;
    for (char c : s) {
        if (c != '0' && c != '1') throw bio::cli::ConfigError("bits", "expected a string of 0/1 characters");
        bits.push_back(c - '0');
    }
    return bits;
}

struct Common {
    std::size_t reps = 20;
    std::uint64_t seed = 0;
    double delta = 0.1;
    std::string out = "results";
    bool audit = false;
    bool no_traces = false;
    std::string algorithms;

    void attach(CLI::App& app) {
        app.add_option("--reps", reps, "repetitions per algorithm")->check(CLI::PositiveNumber);
        app.add_option("--seed", seed, "base seed; episodes use seed+1..seed+reps");
        app.add_option("--delta", delta, "confidence parameter")->check(CLI::Range(0.0, 1.0));
        app.add_option("--out", out, "output directory");
        app.add_flag("--audit", audit, "audit every episode");
        app.add_flag("--no-traces", no_traces, "skip per-round trace CSVs");
        app.add_option("--algorithms", algorithms, "comma-separated algorithm presets");
    }
    cli::RunOptions options() const {
        cli::RunOptions o;
        o.reps = reps;
        o.seed = seed;
        o.delta = delta;
        o.out = out;
        o.audit = audit;
        o.write_traces = !no_traces;
        return o;
    }
};

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Delayed bandits with intermediate observations: simulation and audit tool"};
    app.require_subcommand(0, 1);

    // top level: --config / --experiment without a subcommand
    std::string top_config;
    int top_experiment = 0;
    std::string top_delay;
    Common top;
    app.add_option("--config", top_config, "JSON run configuration");
    app.add_option("--experiment", top_experiment, "experiment id (1-5)");
    app.add_option("--delay", top_delay, "fixed:<d> | laplace:<loc>:<scale> | file:<path>");
    top.attach(app);

    auto* run = app.add_subcommand("run", "run a JSON configuration");
    std::string run_config;
    run->add_option("--config", run_config, "JSON run configuration")->required();

    auto* audit = app.add_subcommand("audit", "run and audit a JSON configuration");
    std::string audit_config;
    audit->add_option("--config", audit_config, "JSON run configuration")->required();

    auto* exp = app.add_subcommand("experiment", "reproduce one of the built-in experiments");
    int exp_id = 0;
    std::string exp_delay;
    std::size_t exp_horizon = 10000;
    std::size_t exp_states = 0;
    std::size_t exp_phase = 100;
    Common exp_common;
    exp->add_option("--experiment,id", exp_id, "experiment id (1-5)")->required();
    exp->add_option("--delay", exp_delay, "fixed:<d> | laplace:<loc>:<scale> | file:<path>");
    exp->add_option("--horizon,-T", exp_horizon, "horizon T")->check(CLI::PositiveNumber);
    exp->add_option("--states", exp_states, "number of states (experiments 3 and 5)");
    exp->add_option("--phase-base", exp_phase, "experiment 2 first phase length")->check(CLI::PositiveNumber);
    exp_common.attach(*exp);

    auto* lb = app.add_subcommand("lowerbound", "run algorithms on a lower-bound construction");
    cli::LowerBoundParams lbp;
    double lb_eps = -1.0;
    std::string lb_bits;
    std::string lb_table;
    Common lb_common;
    lb_common.reps = 50;
    lb->add_option("--kind", lbp.kind, "kt | st | fixed | adv")->required();
    lb->add_option("-K", lbp.K, "number of actions");
    lb->add_option("-S", lbp.S, "number of states");
    lb->add_option("-d", lbp.d, "delay");
    lb->add_option("-T", lbp.T, "horizon")->check(CLI::PositiveNumber);
    lb->add_option("--epsilon", lb_eps, "gap override (kt)");
    lb->add_option("--bits", lb_bits, "block bit pattern, e.g. 0110 (fixed)");
    lb->add_option("--table", lb_table, "CSV loss table with T rows h1,h2 (adv)");
    lb_common.attach(*lb);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return cli::kExitUsage;
    }

    if (*run) return cli::cmd_run(run_config);
    if (*audit) return cli::cmd_audit(audit_config);
    if (*exp) {
        return cli::guarded(
            [&] {
                cli::ExperimentOverrides ov;
                if (!exp_delay.empty()) ov.delay = cli::parse_delay_string(exp_delay);
                ov.horizon = exp_horizon;
                if (exp_states) ov.states = exp_states;
                ov.phase_base = exp_phase;
                ov.algorithms = parse_roster(exp_common.algorithms);
                if (ov.delay) cli::check_explicit_delays(*ov.delay, exp_horizon, "delay");
                return cli::cmd_experiment(exp_id, ov, exp_common.options());
            },
            std::cerr);
    }
    if (*lb) {
        return cli::guarded(
            [&] {
                if (lb_eps >= 0.0) lbp.epsilon = lb_eps;
                lbp.bits = parse_bits(lb_bits);
                if (!lb_table.empty()) lbp.table_file = lb_table;
                lbp.algorithms = parse_roster(lb_common.algorithms);
                return cli::cmd_lowerbound(lbp, lb_common.options());
            },
            std::cerr);
    }

    if (!top_config.empty()) return top.audit ? cli::cmd_audit(top_config) : cli::cmd_run(top_config);
    if (top_experiment != 0) {
        return cli::guarded(
            [&] {
                cli::ExperimentOverrides ov;
                if (!top_delay.empty()) ov.delay = cli::parse_delay_string(top_delay);
                ov.algorithms = parse_roster(top.algorithms);
                return cli::cmd_experiment(top_experiment, ov, top.options());
            },
            std::cerr);
    }
    std::cerr << app.help();
    return cli::kExitUsage;
}
