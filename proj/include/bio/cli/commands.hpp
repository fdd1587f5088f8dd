#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "bio/cli/config.hpp"
#include "bio/cli/csv.hpp"
#include "bio/env/presets.hpp"
#include "bio/harness/episode.hpp"

namespace bio::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitInvariant = 3;

struct Job {
    std::string prefix;
    harness::EnvFactory make_env;
    std::vector<harness::AlgorithmSpec> roster;
};

struct RunOptions {
    std::size_t reps = 20;
    std::uint64_t seed = 0;
    double delta = 0.1;
    std::filesystem::path out = "results";
    bool audit = false;
    bool write_files = true;
    bool write_traces = true;
};

struct JobResult {
    std::string prefix;
    std::vector<harness::AggregateResult> results;
};

// Roster of experiment `id`; Exp. 4 runs MetaAdaBIO with the relaxed switching
// condition, Exp. 5 with the high-probability one.
inline std::vector<harness::AlgorithmSpec> experiment_roster(int id) {
    using harness::algorithm_preset;
    auto named = [](const std::string& preset, const std::string& label) {
        auto s = algorithm_preset(preset);
        s.label = label;
        return s;
    };
    switch (id) {
    case 1: return {algorithm_preset("metabio"), algorithm_preset("dadaexp3"), algorithm_preset("ucb1")};
    case 2:
        return {algorithm_preset("metabio"), algorithm_preset("dadaexp3"), algorithm_preset("ucb1"),
                algorithm_preset("metabio-skip")};
    case 3: return {algorithm_preset("metabio"), algorithm_preset("dadaexp3")};
    case 4: return {named("metaadabio-exp4", "metaadabio"), algorithm_preset("metabio"), algorithm_preset("dadaexp3")};
    case 5: return {named("metaadabio", "metaadabio"), algorithm_preset("metabio"), algorithm_preset("dadaexp3")};
    default: throw ArgumentError("experiment id must be in 1..5");
    }
}

struct ExperimentOverrides {
    std::optional<env::DelaySchedule> delay;
    std::optional<std::size_t> horizon;
    std::optional<std::size_t> states;
    std::size_t phase_base = 100;
    std::vector<harness::AlgorithmSpec> algorithms;
    std::string name;
};

inline std::vector<Job> experiment_jobs(int id, const ExperimentOverrides& ov) {
    if (id < 1 || id > 5) throw ArgumentError("experiment id must be in 1..5");
    const auto roster = ov.algorithms.empty() ? experiment_roster(id) : ov.algorithms;
    const auto delays = ov.delay ? std::vector<env::DelaySchedule>{*ov.delay} : env::default_delays(id);
    std::vector<std::size_t> grid{0};
    if (id == 3) grid = ov.states ? std::vector<std::size_t>{*ov.states} : env::exp3_state_grid();
    if (id == 5) grid = {ov.states.value_or(14)};

    std::vector<Job> jobs;
    for (const auto& d : delays) {
        for (std::size_t S : grid) {
            env::ExperimentOptions eo;
            eo.horizon = ov.horizon.value_or(10000);
            eo.states = S;
            eo.phase_base = ov.phase_base;
            std::string suffix = "_" + env::delay_tag(d);
            if (S) suffix += "_S" + std::to_string(S);
            Job j;
            j.prefix = (ov.name.empty() ? "exp" + std::to_string(id) : ov.name) + suffix;
            j.make_env = [id, d, eo](std::size_t, std::uint64_t seed) { return env::make_experiment_env(id, d, seed, eo); };
            j.roster = roster;
            jobs.push_back(std::move(j));
        }
    }
    return jobs;
}

inline std::vector<Job> config_jobs(const RunConfig& c) {
    if (c.experiment) {
        ExperimentOverrides ov;
        ov.delay = c.delay;
        ov.horizon = c.T;
        if (c.states) ov.states = c.states;
        ov.phase_base = c.phase_base;
        ov.algorithms = c.algorithms;
        ov.name = c.name;
        return experiment_jobs(*c.experiment, ov);
    }
    const CustomEnvironment custom = *c.custom;
    const env::DelaySchedule delay = *c.delay;
    const std::size_t T = c.T;
    Job j;
    j.prefix = c.name.empty() ? "custom" : c.name;
    j.make_env = [custom, delay, T](std::size_t, std::uint64_t seed) {
        return env::Environment("custom", T, env::MappingModel(custom.K, custom.S, custom.mapping),
                                env::LossModel(custom.S, custom.losses), delay, seed);
    };
    j.roster = c.algorithms;
    return {j};
}

inline RunOptions config_options(const RunConfig& c) {
    RunOptions o;
    o.reps = c.reps;
    o.seed = c.seed;
    o.delta = c.delta;
    o.out = c.out;
    o.audit = c.audit;
    o.write_traces = c.write_traces;
    return o;
}

// Frequency checks over audited reps: band violations at most delta and
// concentration failures at most delta / 2 of the episodes.
inline bool frequencies_ok(const harness::AggregateResult& agg, double delta, std::ostream& log) {
    const double n = static_cast<double>(agg.n_reps);
    const double band = static_cast<double>(agg.band_violations()) / n;
    bool ok = band <= delta;
    log << "  " << agg.algo << ": band violations " << agg.band_violations() << "/" << agg.n_reps;
    bool conc_checked = false;
    for (const auto& a : agg.audits) conc_checked |= a.concentration_checked && a.feeds_checked > 0;
    if (conc_checked) {
        const double conc = static_cast<double>(agg.concentration_violations()) / n;
        ok = ok && conc <= delta / 2.0;
        log << ", concentration failures " << agg.concentration_violations() << "/" << agg.n_reps;
    }
    log << (ok ? "" : "  [out of bounds]") << "\n";
    return ok;
}

// Runs every job; AuditError propagates to the caller.
inline std::vector<JobResult> run_jobs(const std::vector<Job>& jobs, const RunOptions& o, std::ostream& log,
                                       bool* frequencies_within = nullptr) {
    if (o.write_files) std::filesystem::create_directories(o.out);
    std::vector<JobResult> all;
    bool freq_ok = true;
    for (const auto& job : jobs) {
        JobResult jr;
        jr.prefix = job.prefix;
        for (const auto& spec : job.roster) {
            harness::ReplicateOptions ro;
            ro.audit = o.audit;
            ro.delta = o.delta;
            ro.keep_traces = o.write_files && o.write_traces;
            auto agg = harness::replicate(job.make_env, spec, o.reps, o.seed, ro);
            if (o.write_files && o.write_traces) write_trace_csv(o.out / (job.prefix + "_" + spec.label + ".csv"), agg);
            agg.traces.clear();
            log << job.prefix << " " << spec.label << ": final regret " << agg.final_mean() << " +- " << agg.final_std()
                << " (" << agg.n_reps << " reps)\n";
            if (o.audit) freq_ok = frequencies_ok(agg, o.delta, log) && freq_ok;
            jr.results.push_back(std::move(agg));
        }
        if (o.write_files) {
            write_summary_csv(o.out / (job.prefix + "_summary.csv"), jr.results);
            write_episode_csv(o.out / (job.prefix + "_episodes.csv"), jr.results);
        }
        all.push_back(std::move(jr));
    }
    if (frequencies_within) *frequencies_within = freq_ok;
    return all;
}

// Shared error mapping: config/usage errors -> 2, invariant failures -> 3.
template <class F>
int guarded(F&& body, std::ostream& err) {
    try {
        return body();
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const ArgumentError& e) {
        err << "invalid argument: " << e.what() << "\n";
        return kExitUsage;
    } catch (const AuditError& e) {
        err << "invariant failure [" << e.invariant() << "]: " << e.what() << "\n";
        return kExitInvariant;
    }
}

inline int cmd_run(const std::string& config_path, std::ostream& log = std::cout, std::ostream& err = std::cerr) {
    return guarded(
        [&] {
            const RunConfig c = load_config(config_path);
            bool freq = true;
            run_jobs(config_jobs(c), config_options(c), log, &freq);
            if (c.audit && !freq) {
                err << "invariant failure [frequency]: audit frequencies out of bounds\n";
                return kExitInvariant;
            }
            return kExitOk;
        },
        err);
}

inline int cmd_audit(const std::string& config_path, std::ostream& log = std::cout, std::ostream& err = std::cerr) {
    return guarded(
        [&] {
            const RunConfig c = load_config(config_path);
            RunOptions o = config_options(c);
            o.audit = true;
            o.write_files = false;
            bool freq = true;
            run_jobs(config_jobs(c), o, log, &freq);
            if (!freq) {
                err << "invariant failure [frequency]: audit frequencies out of bounds\n";
                return kExitInvariant;
            }
            log << "audit passed\n";
            return kExitOk;
        },
        err);
}

inline int cmd_experiment(int id, const ExperimentOverrides& ov, const RunOptions& o, std::ostream& log = std::cout,
                          std::ostream& err = std::cerr) {
    return guarded(
        [&] {
            if (id < 1 || id > 5) throw ConfigError("experiment", "must be in 1..5");
            bool freq = true;
            run_jobs(experiment_jobs(id, ov), o, log, &freq);
            if (o.audit && !freq) {
                err << "invariant failure [frequency]: audit frequencies out of bounds\n";
                return kExitInvariant;
            }
            return kExitOk;
        },
        err);
}

// ---------------------------------------------------------------------------
// Lower-bound constructions
// ---------------------------------------------------------------------------

struct LowerBoundParams {
    std::string kind; // kt | st | fixed | adv
    std::size_t K = 2;
    std::size_t S = 6;
    std::size_t d = 10;
    std::size_t T = 1000;
    std::optional<double> epsilon; // kt only
    std::vector<int> bits;         // fixed only; empty draws from the seed
    std::optional<std::string> table_file; // adv only: T rows of "h1,h2"; default h1 = 1, h2 = 0
    std::vector<harness::AlgorithmSpec> algorithms;
};

inline Matrix read_loss_table(const std::string& file, std::size_t T) {
    std::ifstream in(file);
    if (!in) throw ConfigError("table", "cannot read '" + file + "'");
    Matrix m;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string a, b;
        if (!std::getline(ss, a, ',') || !std::getline(ss, b))
            throw ConfigError("table", "row " + std::to_string(m.size() + 1) + " must hold two values");
        try {
            m.push_back({std::stod(a), std::stod(b)});
        } catch (const std::exception&) {
            throw ConfigError("table", "row " + std::to_string(m.size() + 1) + " is not numeric");
        }
    }
    if (m.size() < T) throw ConfigError("table", "loss table has fewer than T rows");
    return m;
}

inline int cmd_lowerbound(const LowerBoundParams& p, const RunOptions& o, std::ostream& log = std::cout,
                          std::ostream& err = std::cerr) {
    return guarded(
        [&] {
            std::vector<harness::AlgorithmSpec> roster = p.algorithms;
            if (roster.empty()) roster = {harness::algorithm_preset("metabio"), harness::algorithm_preset("dadaexp3")};

            nlohmann::ordered_json report;
            report["kind"] = p.kind;
            harness::EnvFactory factory;
            env::LowerBoundEnv probe = [&] {
                if (p.kind == "kt") {
                    factory = [p](std::size_t, std::uint64_t seed) {
                        return env::make_kt_lowerbound_env(p.K, p.T, seed, p.epsilon).env;
                    };
                    report["K"] = p.K;
                    return env::make_kt_lowerbound_env(p.K, p.T, o.seed + 1, p.epsilon);
                }
                if (p.kind == "st") {
                    // instances 1 and 2 alternate across reps
                    factory = [p](std::size_t rep, std::uint64_t seed) {
                        return env::make_st_lowerbound_env(p.S, p.d, p.T, rep % 2 ? 1 : 2, seed).env;
                    };
                    report["S"] = p.S;
                    report["d"] = p.d;
                    return env::make_st_lowerbound_env(p.S, p.d, p.T, 1, o.seed + 1);
                }
                if (p.kind == "fixed") {
                    factory = [p](std::size_t, std::uint64_t seed) {
                        return env::make_fixed_delay_lowerbound_env(p.S, p.d, p.T, p.bits, seed, p.K).env;
                    };
                    report["K"] = p.K;
                    report["S"] = p.S;
                    report["d"] = p.d;
                    return env::make_fixed_delay_lowerbound_env(p.S, p.d, p.T, p.bits, o.seed + 1, p.K);
                }
                if (p.kind == "adv") {
                    Matrix table = p.table_file ? read_loss_table(*p.table_file, p.T) : Matrix(p.T, {1.0, 0.0});
                    factory = [p, table](std::size_t, std::uint64_t seed) {
                        return env::make_adv_stoch_lowerbound_env(p.K, p.d, p.T, table, seed).env;
                    };
                    report["K"] = p.K;
                    report["d"] = p.d;
                    return env::make_adv_stoch_lowerbound_env(p.K, p.d, p.T, table, o.seed + 1);
                }
                throw ConfigError("kind", "expected kt, st, fixed or adv");
            }();
            report["T"] = p.T;
            report["epsilon"] = probe.epsilon;
            report["s_prime"] = probe.s_prime;
            report["blocks"] = probe.blocks;
            report["block_length"] = probe.block_length;
            report["reps"] = o.reps;
            report["seed"] = o.seed;
            log << "lb-" << p.kind << ": epsilon " << format_double(probe.epsilon) << ", S' " << probe.s_prime
                << ", blocks " << probe.blocks << "\n";

            Job job{"lb_" + p.kind, factory, roster};
            bool freq = true;
            const auto results = run_jobs({job}, o, log, &freq);
            for (const auto& agg : results.front().results) {
                nlohmann::ordered_json a;
                a["mean_final_regret"] = agg.final_mean();
                a["std_final_regret"] = agg.final_std();
                a["se_final_regret"] = agg.final_se();
                report["algorithms"][agg.algo] = a;
            }
            if (o.write_files) {
                std::ofstream out(o.out / ("lb_" + p.kind + "_report.json"), std::ios::binary);
                out << report.dump(2) << '\n';
            }
            if (o.audit && !freq) {
                err << "invariant failure [frequency]: audit frequencies out of bounds\n";
                return kExitInvariant;
            }
            return kExitOk;
        },
        err);
}

} // namespace bio::cli
