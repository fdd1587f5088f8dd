#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "bio/core/types.hpp"

namespace bio::meta {

// ---------------------------------------------------------------------------
// Outstanding counts and delay budgets
// ---------------------------------------------------------------------------

// sigma_t = |{j <= t : j + d_j > t}| for every t, from a complete delay sequence
// (delays[t - 1] = d_t). Each round is outstanding at the end of rounds j .. j + d_j - 1.
inline std::vector<std::size_t> outstanding_counts(std::span<const std::size_t> delays) {
    const std::size_t T = delays.size();
    std::vector<long long> diff(T + 1, 0);
    for (std::size_t i = 0; i < T; ++i) {
        if (delays[i] == 0) continue;
        diff[i] += 1;
        diff[std::min(T, i + delays[i])] -= 1;
    }
    std::vector<std::size_t> sigma(T);
    long long run = 0;
    for (std::size_t i = 0; i < T; ++i) {
        run += diff[i];
        sigma[i] = static_cast<std::size_t>(run);
    }
    return sigma;
}

struct DelayBudget {
    std::size_t size = 0;     // |Phi| = min(2 S sigma_max, T)
    std::size_t d_phi = 0;    // sum of the |Phi| largest delays
};

inline DelayBudget d_phi(std::span<const std::size_t> delays, std::size_t S, std::size_t sigma_max) {
    DelayBudget out;
    out.size = std::min(2 * S * sigma_max, delays.size());
    if (out.size == 0) return out;
    std::vector<std::size_t> sorted(delays.begin(), delays.end());
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(out.size - 1), sorted.end(),
                     std::greater<>());
    for (std::size_t i = 0; i < out.size; ++i) out.d_phi += sorted[i];
    return out;
}

// Per-round outstanding bookkeeping driven online: rounds are played in order
// from `first_round`; arrivals reveal d_j. sigma is read after end_round(t).
class DelayLedger {
public:
    explicit DelayLedger(Round first_round = 1) : first_(first_round) {
        if (first_ == 0) throw ArgumentError("delay ledger: rounds are 1-based");
    }

    void begin_round(Round t) {
        if (t != first_ + played_) throw ContractViolation("delay ledger: round played out of order");
        ++played_;
        delays_.emplace_back();
    }

    void arrive(Round j, Round now) {
        if (j < first_ || j >= first_ + played_ || now < j)
            throw ContractViolation("delay ledger: arrival for unknown round " + std::to_string(j));
        auto& slot = delays_[j - first_];
        if (slot) throw ContractViolation("delay ledger: round " + std::to_string(j) + " arrived twice");
        slot = now - j;
        ++arrived_;
    }

    // Closes round t; returns sigma_t.
    std::size_t end_round(Round t) {
        if (t != first_ + played_ - 1) throw ContractViolation("delay ledger: end_round out of order");
        const std::size_t sigma = played_ - arrived_;
        sigma_.push_back(sigma);
        total_ += static_cast<double>(sigma);
        sigma_max_ = std::max(sigma_max_, sigma);
        return sigma;
    }

    Round first_round() const noexcept { return first_; }
    std::size_t played() const noexcept { return played_; }
    std::size_t arrived() const noexcept { return arrived_; }
    std::size_t sigma(Round t) const { return sigma_.at(t - first_); }
    std::span<const std::size_t> sigmas() const noexcept { return sigma_; }
    // Running sum of sigma_j over closed rounds.
    double sigma_total() const noexcept { return total_; }
    std::size_t sigma_max() const noexcept { return sigma_max_; }
    std::optional<std::size_t> delay(Round j) const { return delays_.at(j - first_); }
    bool arrived(Round j) const { return delays_.at(j - first_).has_value(); }

    // Revealed delays in round order; unarrived rounds are missing from the result.
    std::vector<std::size_t> revealed_delays() const {
        std::vector<std::size_t> out;
        out.reserve(delays_.size());
        for (const auto& d : delays_)
            if (d) out.push_back(*d);
        return out;
    }

private:
    Round first_;
    std::size_t played_ = 0;
    std::size_t arrived_ = 0;
    std::vector<std::optional<std::size_t>> delays_;
    std::vector<std::size_t> sigma_;
    double total_ = 0.0;
    std::size_t sigma_max_ = 0;
};

// ---------------------------------------------------------------------------
// State pools
// ---------------------------------------------------------------------------

struct PoolRecord {
    Round round = 0;
    double loss = 0.0;
    Round arrival = 0;
};

struct EligibleStats {
    std::size_t count = 0;
    double sum = 0.0;
};

// L(s): arrived (round, loss) records per state, in (arrival, round) order.
class StatePool {
public:
    explicit StatePool(std::size_t S) : records_(S), sums_(S, 0.0) {}

    std::size_t states() const noexcept { return records_.size(); }

    void add(StateId s, Round j, double loss, Round arrival) {
        if (s >= records_.size()) throw ArgumentError("state pool: state out of range");
        if (!(loss >= 0.0 && loss <= 1.0)) throw ArgumentError("state pool: loss must lie in [0, 1]");
        if (arrival < j) throw ContractViolation("state pool: arrival before the round was played");
        auto& list = records_[s];
        if (!list.empty()) {
            const auto& back = list.back();
            if (arrival < back.arrival || (arrival == back.arrival && j <= back.round))
                throw ContractViolation("state pool: records must be added in (arrival, round) order");
        }
        list.push_back({j, loss, arrival});
        sums_[s] += loss;
    }

    std::size_t count(StateId s) const { return records_.at(s).size(); }
    double sum(StateId s) const { return sums_.at(s); }
    std::span<const PoolRecord> records(StateId s) const { return records_.at(s); }

    // L'(s) for round j evaluated at time tau: the pool at tau without records
    // that arrive at tau, belong to a later round, and are themselves fed at tau.
    template <class FedAtTau>
    EligibleStats eligible(StateId s, Round j, Round tau, FedAtTau&& fed_at_tau) const {
        const auto& list = records_.at(s);
        EligibleStats out{list.size(), sums_[s]};
        for (auto it = list.rbegin(); it != list.rend() && it->arrival >= tau; ++it) {
            if (it->arrival == tau && it->round > j && fed_at_tau(it->round)) {
                --out.count;
                out.sum -= it->loss;
            }
        }
        return out;
    }

private:
    std::vector<std::vector<PoolRecord>> records_;
    std::vector<double> sums_;
};

// ---------------------------------------------------------------------------
// Estimates
// ---------------------------------------------------------------------------

enum class Estimator { lower_confidence, empirical_mean };

inline double empirical_mean(std::size_t n, double sum) {
    if (n == 0) throw ContractViolation("empirical mean: empty eligible set");
    return sum / static_cast<double>(n);
}

inline double empirical_mean(std::span<const double> losses) {
    double sum = 0.0;
    for (double v : losses) sum += v;
    return empirical_mean(losses.size(), sum);
}

// eps = sqrt((2 / N) ln(4 S T / delta)); a positive `anytime_round` t replaces T by t^2.
inline double confidence_width(std::size_t n, std::size_t S, std::size_t T, double delta, Round anytime_round = 0) {
    if (n == 0) throw ContractViolation("confidence width: N' must be >= 1");
    if (!(delta > 0.0 && delta < 1.0)) throw ArgumentError("confidence width: delta must lie in (0, 1)");
    const double horizon = anytime_round > 0 ? static_cast<double>(anytime_round) * static_cast<double>(anytime_round)
                                             : static_cast<double>(T);
    return std::sqrt(2.0 / static_cast<double>(n) * std::log(4.0 * static_cast<double>(S) * horizon / delta));
}

inline double lcb_estimate(double mean, double width, Estimator mode = Estimator::lower_confidence) {
    if (!std::isfinite(mean) || !std::isfinite(width)) throw ArgumentError("estimate: non-finite input");
    if (mode == Estimator::empirical_mean) return std::clamp(mean, 0.0, 1.0);
    return std::max(0.0, mean - width / 2.0);
}

// C_{K,delta} = 3 ln K + ln(12 / delta).
inline double c_k_delta(std::size_t K, double delta) {
    if (K < 2) throw ArgumentError("C_{K,delta}: K must be >= 2");
    if (!(delta > 0.0)) throw ArgumentError("C_{K,delta}: delta must be positive");
    return 3.0 * std::log(static_cast<double>(K)) + std::log(12.0 / delta);
}

} // namespace bio::meta
