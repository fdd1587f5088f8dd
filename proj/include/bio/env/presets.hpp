#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "bio/env/environment.hpp"

namespace bio::env {

// ---------------------------------------------------------------------------
// Built-in instances ("exp1", "exp2-env1", "exp2-env2")
// ---------------------------------------------------------------------------
namespace presets {

inline Matrix exp1_mapping() {
    return {{0.8, 0.1, 0.1}, {0.4, 0.5, 0.1}, {0.3, 0.7, 0.0}, {0.5, 0.3, 0.2}};
}
inline std::vector<double> exp1_theta() { return {0.2, 0.4, 0.8}; }

inline Matrix exp2_env1_mapping() {
    return {{0.06, 0.47, 0.47}, {0.0, 0.5, 0.5}, {0.0, 0.5, 0.5}, {0.0, 0.5, 0.5}};
}
inline Matrix exp2_env2_mapping() {
    return {{1.0, 0.0, 0.0}, {0.94, 0.03, 0.03}, {0.94, 0.03, 0.03}, {0.94, 0.03, 0.03}};
}
inline std::vector<double> exp2_theta() { return {0.0, 1.0, 1.0}; }

inline Matrix named_mapping(const std::string& name) {
    if (name == "exp1") return exp1_mapping();
    if (name == "exp2-env1") return exp2_env1_mapping();
    if (name == "exp2-env2") return exp2_env2_mapping();
    throw ArgumentError("unknown mapping preset '" + name + "'");
}

inline std::vector<double> named_theta(const std::string& name) {
    if (name == "exp1") return exp1_theta();
    if (name == "exp2-env1" || name == "exp2-env2" || name == "exp2") return exp2_theta();
    throw ArgumentError("unknown loss preset '" + name + "'");
}

// K = 8. The optimal action always lands in state 0 (mean 0.2); every other
// action lands there w.p. 0.6 and otherwise in a uniform suboptimal state (mean 1).
inline Matrix exp3_mapping(std::size_t S, std::size_t K = 8) {
    if (S < 2) throw ArgumentError("exp3 mapping: S must be >= 2");
    Matrix P(K, std::vector<double>(S, 0.0));
    P[0][0] = 1.0;
    for (ActionId a = 1; a < K; ++a) {
        P[a][0] = 0.6;
        for (StateId s = 1; s < S; ++s) P[a][s] = 0.4 / static_cast<double>(S - 1);
    }
    // pin the row sums exactly; 0.4/(S-1) summed S-1 times can be off by an ulp
    for (ActionId a = 1; a < K; ++a) {
        double rest = 0.0;
        for (StateId s = 0; s + 1 < S; ++s) rest += P[a][s];
        P[a][S - 1] = 1.0 - rest;
    }
    return P;
}

inline std::vector<double> exp3_theta(std::size_t S) {
    std::vector<double> theta(S, 1.0);
    theta[0] = 0.2;
    return theta;
}

} // namespace presets

// ---------------------------------------------------------------------------
// Experiments 1-5
// ---------------------------------------------------------------------------

struct ExperimentOptions {
    std::size_t horizon = 10000;
    std::size_t states = 0;       // Exp. 3/5 only; 0 picks the default (4 and 14)
    std::size_t phase_base = 100; // Exp. 2: phase i lasts phase_base * 2^(i-1) rounds
};

// Default delay settings per experiment.
inline std::vector<DelaySchedule> default_delays(int id) {
    switch (id) {
    case 1:
    case 2: return {FixedDelay{50}, FixedDelay{100}, FixedDelay{200}, LaplaceDelay{50.0, 25.0}};
    case 3: return {FixedDelay{100}};
    case 4: return {FixedDelay{20}};
    case 5: return {FixedDelay{4}};
    default: throw ArgumentError("experiment id must be in 1..5");
    }
}

inline std::vector<std::size_t> exp3_state_grid() { return {4, 6, 8, 10, 12}; }

// Alternates Exp.-2 environments 1 and 2 (starting with 1) with doubling phase lengths.
inline PhasedMapping exp2_schedule(std::size_t T, std::size_t base) {
    if (base == 0) throw ArgumentError("exp2: phase base must be positive");
    PhasedMapping m;
    std::size_t covered = 0;
    std::size_t length = base;
    bool first = true;
    while (covered < T) {
        const std::size_t len = std::min(length, T - covered);
        m.phases.push_back({len, first ? presets::exp2_env1_mapping() : presets::exp2_env2_mapping()});
        covered += len;
        length *= 2;
        first = !first;
    }
    return m;
}

inline Environment make_experiment_env(int id, DelaySchedule delays, std::uint64_t seed,
                                       ExperimentOptions opts = {}) {
    const std::size_t T = opts.horizon;
    switch (id) {
    case 1:
    case 4:
        return Environment("exp" + std::to_string(id), T,
                           MappingModel(4, 3, StochasticMapping{presets::exp1_mapping()}),
                           LossModel(3, BernoulliLosses{presets::exp1_theta()}), std::move(delays), seed);
    case 2:
        return Environment("exp2", T, MappingModel(4, 3, exp2_schedule(T, opts.phase_base)),
                           LossModel(3, BernoulliLosses{presets::exp2_theta()}), std::move(delays), seed);
    case 3:
    case 5: {
        const std::size_t S = opts.states ? opts.states : (id == 3 ? 4 : 14);
        return Environment("exp" + std::to_string(id), T,
                           MappingModel(8, S, StochasticMapping{presets::exp3_mapping(S)}),
                           LossModel(S, BernoulliLosses{presets::exp3_theta(S)}), std::move(delays), seed);
    }
    default: throw ArgumentError("experiment id must be in 1..5");
    }
}

// ---------------------------------------------------------------------------
// Lower-bound constructions
// ---------------------------------------------------------------------------

struct LowerBoundEnv {
    Environment env;
    double epsilon = 0.0;
    std::size_t s_prime = 0;
    std::size_t blocks = 0;
    std::size_t block_length = 0;
    ActionId best_action = 0;
};

inline double kt_epsilon(std::size_t K, std::size_t T) {
    return std::min(0.25, 0.25 * std::sqrt(static_cast<double>(K) / static_cast<double>(T)));
}

// Two states with ell(h1) = 1, ell(h2) = 0. Every arm reaches h1 w.p. 1/2 except a
// uniformly drawn best arm, which reaches it w.p. 1/2 - eps. Zero delay.
inline LowerBoundEnv make_kt_lowerbound_env(std::size_t K, std::size_t T, std::uint64_t seed,
                                            std::optional<double> epsilon = std::nullopt) {
    if (K < 2) throw ArgumentError("kt lower bound: K must be >= 2");
    if (T < 1) throw ArgumentError("kt lower bound: T must be >= 1");
    const double eps = epsilon.value_or(kt_epsilon(K, T));
    if (!(eps >= 0.0 && eps <= 0.5)) throw ArgumentError("kt lower bound: epsilon must lie in [0, 1/2]");
    Rng rng(derive_seed(seed, 0x6b74));
    const auto best = static_cast<ActionId>(rng() % K);
    Matrix P(K, {0.5, 0.5});
    P[best] = {0.5 - eps, 0.5 + eps};
    Environment env("lb-kt", T, MappingModel(K, 2, StochasticMapping{std::move(P)}),
                    LossModel(2, BernoulliLosses{{1.0, 0.0}}), FixedDelay{0}, seed);
    return {std::move(env), eps, 0, 0, 0, best};
}

inline double st_epsilon(std::size_t s_prime, std::size_t T) {
    return 0.25 * std::sqrt(static_cast<double>(s_prime) / (2.0 * static_cast<double>(T) * std::log(4.0 / 3.0)));
}

// K = 2. Rounds are split into blocks of S' = floor(min(S/2, d)); inside a block
// action A (0-based) visits states 2(t - b_i) + A, and all states of one action's
// chain share a single Bernoulli draw per block. Instance k in {1, 2} lowers the
// mean of action k by eps. Leftover rounds have zero loss.
inline LowerBoundEnv make_st_lowerbound_env(std::size_t S, std::size_t d, std::size_t T, int instance,
                                            std::uint64_t seed) {
    if (S < 2) throw ArgumentError("st lower bound: S must be >= 2");
    if (instance != 1 && instance != 2) throw ArgumentError("st lower bound: instance must be 1 or 2");
    const std::size_t s_prime = std::min(S / 2, d);
    if (s_prime == 0) throw ArgumentError("st lower bound: S' = floor(min(S/2, d)) is 0");
    if (T < std::min(S, d)) throw ArgumentError("st lower bound: requires T >= min(S, d)");
    const std::size_t blocks = T / s_prime;
    const double eps = st_epsilon(s_prime, T);

    TableMapping table;
    table.rounds.reserve(T);
    for (Round t = 1; t <= T; ++t) {
        const std::size_t offset = (t - 1) % s_prime;
        table.rounds.push_back({2 * offset, 2 * offset + 1});
    }
    BlockLosses losses;
    losses.block_length = s_prime;
    losses.blocks = blocks;
    losses.group_of_state.assign(S, std::nullopt);
    for (StateId s = 0; s < 2 * s_prime; ++s) losses.group_of_state[s] = s % 2;
    losses.group_mean = {0.5 - (instance == 1 ? eps : 0.0), 0.5 - (instance == 2 ? eps : 0.0)};

    Environment env("lb-st", T, MappingModel(2, S, std::move(table)), LossModel(S, std::move(losses)),
                    FixedDelay{d}, seed);
    return {std::move(env), eps, s_prime, blocks, s_prime, static_cast<ActionId>(instance - 1)};
}

// S' = min(floor(S/2), floor(T/(d+1))) blocks of length d+1. In block i action 0 sits
// in state 2i-2 and every other action in state 2i-1 (0-based states); losses are
// deterministic with theta(2i-2) = bit_i and theta(2i-1) = 1 - bit_i. Rounds after
// the last block put every action in state 0. Empty `bits` draws them from the seed.
inline LowerBoundEnv make_fixed_delay_lowerbound_env(std::size_t S, std::size_t d, std::size_t T,
                                                     std::vector<int> bits, std::uint64_t seed,
                                                     std::size_t K = 2) {
    if (S < 2) throw ArgumentError("fixed-delay lower bound: S must be >= 2");
    if (K < 2) throw ArgumentError("fixed-delay lower bound: K must be >= 2");
    if (T < d + 1) throw ArgumentError("fixed-delay lower bound: requires T >= d + 1");
    const std::size_t s_prime = std::min(S / 2, T / (d + 1));
    if (s_prime == 0) throw ArgumentError("fixed-delay lower bound: S' is 0");
    if (bits.empty()) {
        Rng rng(derive_seed(seed, 0x6669));
        for (std::size_t i = 0; i < s_prime; ++i) bits.push_back(static_cast<int>(rng() & 1U));
    }
    if (bits.size() < s_prime) throw ArgumentError("fixed-delay lower bound: need one bit per block");
    for (int b : bits)
        if (b != 0 && b != 1) throw ArgumentError("fixed-delay lower bound: bits must be 0 or 1");

    const std::size_t len = d + 1;
    TableMapping table;
    table.rounds.reserve(T);
    for (Round t = 1; t <= T; ++t) {
        const std::size_t block = (t - 1) / len; // 0-based
        StateAssignment row(K, 0);
        if (block < s_prime) {
            row.assign(K, 2 * block + 1);
            row[0] = 2 * block;
        }
        table.rounds.push_back(std::move(row));
    }
    std::vector<double> theta(S, 0.0);
    for (std::size_t i = 0; i < s_prime; ++i) {
        theta[2 * i] = bits[i];
        theta[2 * i + 1] = 1.0 - bits[i];
    }
    Environment env("lb-fixed", T, MappingModel(K, S, std::move(table)), LossModel(S, BernoulliLosses{theta}),
                    FixedDelay{d}, seed);
    return {std::move(env), 0.0, s_prime, s_prime, len, 0};
}

// Deterministic mapping: every action except `special` sits in h1 (state 0), `special`
// sits in h2 (state 1); losses come from the T x 2 table.
inline LowerBoundEnv make_adv_stoch_lowerbound_env(std::size_t K, std::size_t d, std::size_t T, Matrix table,
                                                   std::uint64_t seed,
                                                   std::optional<ActionId> special = std::nullopt) {
    if (K < 2) throw ArgumentError("adv lower bound: K must be >= 2");
    if (table.size() < T) throw ArgumentError("adv lower bound: loss table shorter than T");
    for (const auto& row : table)
        if (row.size() != 2) throw ArgumentError("adv lower bound: loss table must have 2 columns");
    Rng rng(derive_seed(seed, 0x6164));
    const ActionId star = special.value_or(static_cast<ActionId>(rng() % K));
    if (star >= K) throw ArgumentError("adv lower bound: special action out of range");
    StateAssignment row(K, 0);
    row[star] = 1;
    PhasedMapping mapping{{MappingPhase{T, row}}};
    Environment env("lb-adv", T, MappingModel(K, 2, std::move(mapping)), LossModel(2, TableLosses{std::move(table)}),
                    FixedDelay{d}, seed);
    return {std::move(env), 0.0, 0, 0, 0, star};
}

} // namespace bio::env
