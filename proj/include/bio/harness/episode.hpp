#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <functional>
#include <limits>
#include <cmath>
#include <cstdlib>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "bio/env/environment.hpp"
#include "bio/harness/policy.hpp"
#include "bio/meta/ledger.hpp"

namespace bio::harness {

struct TraceRow {
    Round t = 0;
    ActionId action = 0;
    StateId state = 0;
    double loss = 0.0;
    std::size_t delay = 0;
    std::size_t actual_delay = 0;
    std::size_t sigma = 0;
    double cum_regret_mean = 0.0;
    double cum_regret_realized = 0.0;
};

struct Comparator {
    ActionId action = 0;
    double total = 0.0;
};

struct EpisodeTrace {
    std::string algo;
    std::uint64_t seed = 0;
    std::vector<TraceRow> rows;
    std::optional<Round> switch_round;
    std::size_t actual_delay_total = 0;
    std::size_t d_phi = 0;
    std::size_t phi_size = 0;
    std::size_t sigma_max = 0;
    Comparator mean_comparator;     // a* = argmin_a sum_t mu_t(a)
    Comparator realized_comparator; // argmin_a sum_t ell_t(s_t(a))
    std::size_t unfed_rounds = 0;
    std::shared_ptr<const Policy> policy; // kept for audits; released by replicate unless requested

    double final_regret_mean() const { return rows.empty() ? 0.0 : rows.back().cum_regret_mean; }
    double final_regret_realized() const { return rows.empty() ? 0.0 : rows.back().cum_regret_realized; }
};

// Best fixed action under the per-round benchmark mu_t(a) (mean notion) or the
// realised per-round loss ell_t(s_t(a)); ties to the lowest index.
inline Comparator comparator_loss(const env::Realization& r, bool realized) {
    Comparator best{0, std::numeric_limits<double>::infinity()};
    for (ActionId a = 0; a < r.K; ++a) {
        double total = 0.0;
        for (Round t = 1; t <= r.T; ++t) total += realized ? r.loss(t, r.state(t, a)) : r.expected_loss(t, a);
        if (total < best.total) best = {a, total};
    }
    return best;
}

inline Comparator comparator_loss(const env::Environment& env) {
    Comparator best{0, std::numeric_limits<double>::infinity()};
    for (ActionId a = 0; a < env.actions(); ++a) {
        double total = 0.0;
        for (Round t = 1; t <= env.horizon(); ++t) total += env.expected_loss(a, t);
        if (total < best.total) best = {a, total};
    }
    return best;
}

inline EpisodeTrace run_episode(const env::Realization& r, Policy& policy, std::uint64_t seed) {
    EpisodeTrace tr;
    tr.algo = policy.name();
    tr.seed = seed;
    tr.rows.resize(r.T);
    tr.mean_comparator = comparator_loss(r, false);
    tr.realized_comparator = comparator_loss(r, true);

    std::vector<std::vector<Arrival>> due(r.T + 1);
    double reg_mean = 0.0;
    double reg_real = 0.0;
    for (Round t = 1; t <= r.T; ++t) {
        const ActionId a = policy.choose(t);
        if (a >= r.K) throw InternalError("policy chose an action out of range");
        const StateId s = r.state(t, a);
        const double loss = r.loss(t, s);
        const std::size_t d = r.delay(t);
        due[t + d].push_back({t, loss});
        policy.observe(t, s, due[t]);
        due[t].clear();
        due[t].shrink_to_fit();

        reg_mean += r.expected_loss(t, a) - r.expected_loss(t, tr.mean_comparator.action);
        reg_real += loss - r.loss(t, r.state(t, tr.realized_comparator.action));
        TraceRow& row = tr.rows[t - 1];
        row.t = t;
        row.action = a;
        row.state = s;
        row.loss = loss;
        row.delay = d;
        row.cum_regret_mean = reg_mean;
        row.cum_regret_realized = reg_real;
    }

    const auto sigma = meta::outstanding_counts(r.delays);
    for (Round t = 1; t <= r.T; ++t) {
        TraceRow& row = tr.rows[t - 1];
        row.sigma = policy.sigma(t).value_or(sigma[t - 1]);
        row.actual_delay = policy.actual_delay(t).value_or(row.delay);
    }
    tr.switch_round = policy.switch_round();

    if (const auto* m = policy.metabio()) {
        const auto& L = m->ledger();
        const auto delays = L.revealed_delays();
        const auto budget = meta::d_phi(delays, m->states(), L.sigma_max());
        tr.actual_delay_total = m->actual_delay_total();
        tr.d_phi = budget.d_phi;
        tr.phi_size = budget.size;
        tr.sigma_max = L.sigma_max();
        tr.unfed_rounds = m->waiting().size();
    } else {
        std::size_t sigma_max = 0;
        for (auto v : sigma) sigma_max = std::max(sigma_max, v);
        const auto budget = meta::d_phi(r.delays, r.S, sigma_max);
        for (const auto& row : tr.rows) tr.actual_delay_total += row.actual_delay;
        tr.d_phi = budget.d_phi;
        tr.phi_size = budget.size;
        tr.sigma_max = sigma_max;
    }
    return tr;
}

inline EpisodeTrace run_episode(const env::Environment& env, const AlgorithmSpec& spec, std::size_t T,
                                std::uint64_t seed, double delta = 0.1) {
    if (T != env.horizon()) throw ArgumentError("run_episode: T differs from the environment horizon");
    const auto r = env.realize(seed);
    std::shared_ptr<Policy> policy = make_policy(spec, env, delta, seed);
    EpisodeTrace tr = run_episode(r, *policy, seed);
    tr.algo = spec.label;
    tr.policy = std::move(policy);
    return tr;
}

// ---------------------------------------------------------------------------
// Audits
// ---------------------------------------------------------------------------

struct AuditReport {
    bool band_violation = false;        // |R_T - realized R_T| above sqrt(2 T ln(2K / delta))
    double band_gap = 0.0;
    double band_width = 0.0;
    bool concentration_checked = false;
    bool concentration_violation = false; // some feed with |mean - theta| > eps / 2
    std::size_t feeds_checked = 0;
    std::size_t half_obs_checked = 0;
};

// Re-runs the environment from the trace seed and checks the hard invariants.
// Frequency-type properties (band, concentration) are reported, not thrown.
inline AuditReport audit_episode(const EpisodeTrace& tr, const env::Environment& env, double delta) {
    const auto r = env.realize(tr.seed);
    if (tr.rows.size() != r.T) throw AuditError("trace length", tr.rows.size(), "trace does not cover T rounds");
    AuditReport rep;

    // replay consistency and regret accounting
    double reg_real = 0.0;
    for (Round t = 1; t <= r.T; ++t) {
        const auto& row = tr.rows[t - 1];
        if (row.t != t || row.delay != r.delay(t) || row.state != r.state(t, row.action) ||
            row.loss != r.loss(t, row.state))
            throw AuditError("replay determinism", t, "trace disagrees with the environment");
        if (t + row.delay > r.T) throw AuditError("delay feasibility", t, "d_t exceeds T - t");
        reg_real += row.loss - r.loss(t, r.state(t, tr.realized_comparator.action));
        if (std::abs(reg_real - row.cum_regret_realized) > 1e-9)
            throw AuditError("regret accounting", t, "realized regret accumulator drifted");
        if (!std::isfinite(row.cum_regret_mean)) throw AuditError("regret accounting", t, "non-finite regret");
    }
    for (ActionId a = 0; a < r.K; ++a) {
        double total = 0.0;
        for (Round t = 1; t <= r.T; ++t) total += r.expected_loss(t, a);
        if (total < tr.mean_comparator.total - 1e-9) throw AuditError("comparator optimality", r.T, "better fixed action exists");
    }

    rep.band_width = std::sqrt(2.0 * static_cast<double>(r.T) * std::log(2.0 * static_cast<double>(r.K) / delta));
    rep.band_gap = std::abs(tr.final_regret_mean() - tr.final_regret_realized());
    rep.band_violation = rep.band_gap > rep.band_width;

    const meta::MetaBio* m = tr.policy ? tr.policy->metabio() : nullptr;
    if (!m) return rep;

    const Round first = m->first_round();
    const auto records = m->records();
    const std::size_t n = records.size();
    std::vector<std::size_t> sub(r.delays.begin() + static_cast<std::ptrdiff_t>(first - 1), r.delays.end());
    const auto sigma = meta::outstanding_counts(sub);
    for (std::size_t i = 0; i < n; ++i) {
        const Round t = first + i;
        std::size_t expected = sigma[i];
        if (m->config().sigma == meta::SigmaVariant::before_round && r.delay(t) > 0) --expected;
        if (records[i].sigma != expected) throw AuditError("sigma", t, "recorded sigma differs from the delay sequence");
        if (records[i].state != tr.rows[t - 1].state || records[i].action != tr.rows[t - 1].action)
            throw AuditError("replay determinism", t, "meta record disagrees with trace");
        if (records[i].delay && *records[i].delay != r.delay(t))
            throw AuditError("replay determinism", t, "meta record holds the wrong delay");
    }

    // feed exactness, feed time t + d~, d~ in {0, d_t}
    std::size_t total = 0;
    std::vector<int> fed(n, 0);
    for (const auto& e : m->feed_log()) {
        if (e.round < first || e.round >= first + n) throw AuditError("feed exactness", e.round, "unknown round fed");
        if (++fed[e.round - first] > 1) throw AuditError("feed exactness", e.round, "round fed twice");
    }
    for (std::size_t i = 0; i < n; ++i) {
        const Round t = first + i;
        const auto& rec = records[i];
        const std::size_t d = r.delay(t);
        if (!fed[i]) {
            if (rec.immediate || t + d <= r.T) throw AuditError("feed exactness", t, "round never fed");
            continue;
        }
        if (rec.fed_at != t + rec.actual_delay) throw AuditError("feed time", t, "feed time differs from t + d~_t");
        const std::size_t expected = rec.immediate ? 0 : d;
        if (rec.actual_delay != expected) throw AuditError("actual delay", t, "d~_t is not d_t * 1[deferred]");
        total += rec.actual_delay;
        if (rec.immediate && m->config().threshold == meta::Threshold::adaptive &&
            m->config().sigma == meta::SigmaVariant::through_round) {
            ++rep.half_obs_checked;
            if (2 * rec.pool_size < rec.visits) throw AuditError("half observations", t, "N_t(S_t) < visits / 2");
        }
    }
    if (total != m->actual_delay_total()) throw AuditError("actual delay", r.T, "D~ accumulator drifted");

    // delay budget on the MetaBIO rounds
    std::size_t sigma_max = 0;
    for (auto v : sigma) sigma_max = std::max(sigma_max, v);
    const auto budget = meta::d_phi(sub, m->states(), sigma_max);
    if (m->config().sigma == meta::SigmaVariant::through_round && total > budget.d_phi)
        throw AuditError("total actual delay", r.T,
                         "D~ = " + std::to_string(total) + " exceeds D_Phi = " + std::to_string(budget.d_phi));

    // feed order: non-decreasing (feed time, round)
    const auto feeds = m->feed_log();
    for (std::size_t i = 1; i < feeds.size(); ++i)
        if (feeds[i].time < feeds[i - 1].time ||
            (feeds[i].time == feeds[i - 1].time && feeds[i].round <= feeds[i - 1].round))
            throw AuditError("feed order", feeds[i].round, "feeds out of (time, round) order");

    // eligible sets recomputed from scratch; estimate range and concentration
    const auto theta = env.losses().stationary_means();
    rep.concentration_checked = theta.has_value();
    // per state: rounds of the sub-episode ordered by (arrival, round), with prefix sums
    struct Obs {
        Round arrival;
        Round round;
        double loss;
    };
    std::vector<std::vector<Obs>> by_state(m->states());
    for (Round j = first; j < first + n; ++j) {
        const StateId s = records[j - first].state;
        by_state[s].push_back({j + r.delay(j), j, r.loss(j, s)});
    }
    std::vector<std::vector<double>> prefix(m->states());
    for (StateId s = 0; s < m->states(); ++s) {
        auto& v = by_state[s];
        std::sort(v.begin(), v.end(), [](const Obs& a, const Obs& b) {
            return a.arrival != b.arrival ? a.arrival < b.arrival : a.round < b.round;
        });
        prefix[s].assign(v.size() + 1, 0.0);
        for (std::size_t i = 0; i < v.size(); ++i) prefix[s][i + 1] = prefix[s][i] + v[i].loss;
    }
    for (const auto& e : feeds) {
        const auto& v = by_state[e.state];
        const auto end = std::upper_bound(v.begin(), v.end(), e.time,
                                          [](Round tau, const Obs& o) { return tau < o.arrival; });
        std::size_t count = static_cast<std::size_t>(end - v.begin());
        double sum = prefix[e.state][count];
        const auto tied = std::lower_bound(v.begin(), end, e.time,
                                           [](const Obs& o, Round tau) { return o.arrival < tau; });
        for (auto it = tied; it != end; ++it) {
            if (it->round <= e.round) continue;
            if (records[it->round - first].fed_at != e.time) continue;
            --count;
            sum -= it->loss;
        }
        if (count != e.eligible || std::abs(sum / static_cast<double>(count) - e.mean) > 1e-9)
            throw AuditError("eligible set", e.round, "N' or mean differs from recomputation");
        if (!(e.estimate >= 0.0 && e.estimate <= 1.0)) throw AuditError("estimate range", e.round, "estimate outside [0, 1]");
        ++rep.feeds_checked;
        if (theta && std::abs(e.mean - (*theta)[e.state]) > e.width / 2.0) rep.concentration_violation = true;
    }
    if (theta && !rep.concentration_violation && m->config().estimator == meta::Estimator::lower_confidence) {
        for (const auto& e : feeds)
            if (e.estimate > (*theta)[e.state] + 1e-12)
                throw AuditError("lower confidence", e.round, "estimate above theta on the concentration event");
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Replication
// ---------------------------------------------------------------------------

struct ReplicateOptions {
    std::size_t threads = 0; // 0: BIO_THREADS or hardware concurrency
    bool keep_traces = true;
    bool keep_policies = false;
    bool audit = false;
    double delta = 0.1;
};

struct AggregateResult {
    std::string algo;
    std::string env;
    std::size_t n_reps = 0;
    double delta = 0.1;
    std::vector<double> mean; // per round, cumulative mean-loss regret
    std::vector<double> std;  // sample standard deviation; 0 when n_reps = 1
    std::vector<double> final_mean_regret;
    std::vector<double> final_realized_regret;
    std::vector<std::optional<Round>> switch_rounds;
    std::vector<std::size_t> actual_delay_totals;
    std::vector<std::size_t> d_phis;
    std::vector<std::size_t> sigma_maxes;
    std::vector<std::uint64_t> seeds;
    std::vector<EpisodeTrace> traces;
    std::vector<AuditReport> audits;

    double final_mean() const { return mean.empty() ? 0.0 : mean.back(); }
    double final_std() const { return std.empty() ? 0.0 : std.back(); }
    double final_se() const { return n_reps ? final_std() / std::sqrt(static_cast<double>(n_reps)) : 0.0; }
    std::size_t band_violations() const {
        std::size_t c = 0;
        for (const auto& a : audits) c += a.band_violation;
        return c;
    }
    std::size_t concentration_violations() const {
        std::size_t c = 0;
        for (const auto& a : audits) c += a.concentration_violation;
        return c;
    }
};

inline std::size_t default_threads() {
    if (const char* v = std::getenv("BIO_THREADS")) {
        const long n = std::strtol(v, nullptr, 10);
        if (n > 0) return static_cast<std::size_t>(n);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

// Builds the environment of repetition `rep` (1-based) from its episode seed.
using EnvFactory = std::function<env::Environment(std::size_t rep, std::uint64_t seed)>;

// Episodes use seeds base + 1 .. base + n_reps; results are reduced in rep order,
// so output does not depend on the thread count.
inline AggregateResult replicate(const EnvFactory& make_env, const AlgorithmSpec& spec, std::size_t n_reps,
                                 std::uint64_t base_seed, const ReplicateOptions& opts = {}) {
    if (n_reps < 1) throw ArgumentError("replicate: n_reps must be >= 1");
    const env::Environment first = make_env(1, base_seed + 1);
    std::vector<EpisodeTrace> slots(n_reps);
    std::vector<AuditReport> audits(opts.audit ? n_reps : 0);
    std::vector<std::exception_ptr> errors(n_reps);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < n_reps; i = next++) {
            try {
                const std::uint64_t seed = base_seed + i + 1;
                const env::Environment env = i == 0 ? first : make_env(i + 1, seed);
                if (env.horizon() != first.horizon()) throw ArgumentError("replicate: horizons differ across reps");
                EpisodeTrace tr = run_episode(env, spec, env.horizon(), seed, opts.delta);
                if (opts.audit) audits[i] = audit_episode(tr, env, opts.delta);
                if (!opts.keep_policies) tr.policy.reset();
                slots[i] = std::move(tr);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const std::size_t nthreads = std::min(n_reps, opts.threads ? opts.threads : default_threads());
    if (nthreads <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t k = 0; k < nthreads; ++k) pool.emplace_back(worker);
    }
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);

    AggregateResult agg;
    agg.algo = spec.label;
    agg.env = first.name();
    agg.n_reps = n_reps;
    agg.delta = opts.delta;
    const std::size_t T = first.horizon();
    agg.mean.assign(T, 0.0);
    agg.std.assign(T, 0.0);
    for (const auto& tr : slots)
        for (std::size_t i = 0; i < T; ++i) agg.mean[i] += tr.rows[i].cum_regret_mean;
    for (double& v : agg.mean) v /= static_cast<double>(n_reps);
    if (n_reps > 1) {
        for (const auto& tr : slots)
            for (std::size_t i = 0; i < T; ++i) {
                const double dev = tr.rows[i].cum_regret_mean - agg.mean[i];
                agg.std[i] += dev * dev;
            }
        for (double& v : agg.std) v = std::sqrt(v / static_cast<double>(n_reps - 1));
    }
    for (const auto& tr : slots) {
        agg.final_mean_regret.push_back(tr.final_regret_mean());
        agg.final_realized_regret.push_back(tr.final_regret_realized());
        agg.switch_rounds.push_back(tr.switch_round);
        agg.actual_delay_totals.push_back(tr.actual_delay_total);
        agg.d_phis.push_back(tr.d_phi);
        agg.sigma_maxes.push_back(tr.sigma_max);
        agg.seeds.push_back(tr.seed);
    }
    agg.audits = std::move(audits);
    if (opts.keep_traces) agg.traces = std::move(slots);
    return agg;
}

inline AggregateResult replicate(const env::Environment& env, const AlgorithmSpec& spec, std::size_t n_reps,
                                 std::uint64_t base_seed, const ReplicateOptions& opts = {}) {
    return replicate([&env](std::size_t, std::uint64_t) { return env; }, spec, n_reps, base_seed, opts);
}

} // namespace bio::harness
