#pragma once

#include <algorithm>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bio/bandit/learner.hpp"
#include "bio/meta/ledger.hpp"

namespace bio::meta {

enum class Threshold { fixed, adaptive };

// through_round: sigma_t counts j <= t. before_round: only j <= t - 1.
enum class SigmaVariant { through_round, before_round };

struct MetaBioConfig {
    double delta = 0.1;
    Threshold threshold = Threshold::adaptive;
    std::size_t fixed_delay = 0; // n_t for Threshold::fixed
    Estimator estimator = Estimator::lower_confidence;
    bool anytime = false;
    SigmaVariant sigma = SigmaVariant::through_round;
};

struct MetaRoundRecord {
    ActionId action = 0;
    StateId state = 0;
    bool immediate = false;
    Round fed_at = 0;                  // 0 while unfed
    std::optional<std::size_t> delay;  // d_t, known once the loss arrives
    std::size_t actual_delay = 0;      // feed time - t once fed
    std::size_t threshold = 0;         // n_t(S_t)
    std::size_t pool_size = 0;         // N_t(S_t)
    std::size_t visits = 0;            // rounds j <= t with S_j = S_t
    std::size_t sigma = 0;
};

struct FeedEntry {
    Round round = 0;
    Round time = 0;
    StateId state = 0;
    std::size_t eligible = 0; // N'
    double mean = 0.0;        // empirical mean over L'
    double width = 0.0;       // eps
    double estimate = 0.0;    // value handed to the base learner
};

// Wraps a base learner B. Each round either feeds B an estimate built from the
// pool of S_t right away (enough observations of S_t) or waits for round t's own loss.
class MetaBio {
public:
    MetaBio(bandit::BaseLearner& base, std::size_t S, std::size_t T, MetaBioConfig cfg, Round first_round = 1)
        : base_(&base), S_(S), T_(T), cfg_(cfg), first_(first_round), pool_(S), ledger_(first_round),
          visits_(S, 0) {
        if (S_ < 2) throw ArgumentError("metabio: S must be >= 2");
        if (T_ < 1) throw ArgumentError("metabio: T must be >= 1");
        if (first_ == 0 || first_ > T_) throw ArgumentError("metabio: first round must lie in [1, T]");
        if (!(cfg_.delta > 0.0 && cfg_.delta < 1.0)) throw ArgumentError("metabio: delta must lie in (0, 1)");
    }

    ActionId act(Round t) {
        if (t != first_ + records_.size()) throw ContractViolation("metabio: round played out of order");
        if (pending_) throw ContractViolation("metabio: previous round was not observed");
        const auto& snap = base_->next_action(t);
        records_.emplace_back();
        records_.back().action = snap.action;
        ledger_.begin_round(t);
        pending_ = true;
        return snap.action;
    }

    // One round of the meta protocol. `arrivals` are the losses of rounds j >= first_round
    // with j + d_j = t; any order.
    void observe(Round t, StateId s, std::span<const Arrival> arrivals) {
        if (!pending_ || t != first_ + records_.size() - 1) throw ContractViolation("metabio: observe before act");
        if (s >= S_) throw ArgumentError("metabio: state out of range");
        pending_ = false;
        MetaRoundRecord& rec = records_.back();
        rec.state = s;
        rec.visits = ++visits_[s];

        sorted_.assign(arrivals.begin(), arrivals.end());
        std::sort(sorted_.begin(), sorted_.end(), [](const Arrival& a, const Arrival& b) { return a.round < b.round; });
        for (const Arrival& a : sorted_) {
            if (a.round < first_ || a.round > t)
                throw ContractViolation("metabio: arrival for unknown round " + std::to_string(a.round));
            ledger_.arrive(a.round, t);
            auto& r = at(a.round);
            r.delay = t - a.round;
            pool_.add(r.state, a.round, a.loss, t);
        }

        std::size_t sigma = ledger_.end_round(t);
        if (cfg_.sigma == SigmaVariant::before_round && !ledger_.arrived(t)) --sigma;
        rec.sigma = sigma;
        rec.threshold = cfg_.threshold == Threshold::fixed ? cfg_.fixed_delay : sigma;
        rec.pool_size = pool_.count(s);

        feed_set_.clear();
        // with j = t counted in its own eligible set, L'_t(S_t) at tau = t is the whole pool
        if (rec.pool_size >= rec.threshold && rec.pool_size >= 1) {
            rec.immediate = true;
            feed_set_.push_back(t);
        } else {
            waiting_.push_back(t);
        }
        for (const Arrival& a : sorted_) {
            auto it = std::find(waiting_.begin(), waiting_.end(), a.round);
            if (it == waiting_.end()) continue;
            waiting_.erase(it);
            feed_set_.push_back(a.round);
        }
        std::sort(feed_set_.begin(), feed_set_.end());
        for (Round j : feed_set_) at(j).fed_at = t;

        for (Round j : feed_set_) {
            auto& r = at(j);
            const auto stats =
                pool_.eligible(r.state, j, t, [this, t](Round k) { return at(k).fed_at == t; });
            if (stats.count == 0) throw InternalError("metabio: empty eligible set at feed time");
            FeedEntry e;
            e.round = j;
            e.time = t;
            e.state = r.state;
            e.eligible = stats.count;
            e.mean = empirical_mean(stats.count, stats.sum);
            e.width = confidence_width(stats.count, S_, T_, cfg_.delta, cfg_.anytime ? t : 0);
            e.estimate = lcb_estimate(e.mean, e.width, cfg_.estimator);
            r.actual_delay = t - j;
#ifdef BIO_INJECT_FAULT
            r.actual_delay = 0;
#endif
            actual_total_ += r.actual_delay;
            base_->feed(j, r.action, e.estimate);
            feeds_.push_back(e);
        }
    }

    Round first_round() const noexcept { return first_; }
    std::size_t rounds() const noexcept { return records_.size(); }
    const MetaRoundRecord& record(Round t) const {
        if (t < first_ || t >= first_ + records_.size()) throw ArgumentError("metabio: round out of range");
        return records_[t - first_];
    }
    std::span<const MetaRoundRecord> records() const noexcept { return records_; }
    std::span<const FeedEntry> feed_log() const noexcept { return feeds_; }
    std::span<const Round> waiting() const noexcept { return waiting_; }
    const DelayLedger& ledger() const noexcept { return ledger_; }
    const StatePool& pool() const noexcept { return pool_; }
    const MetaBioConfig& config() const noexcept { return cfg_; }
    std::size_t states() const noexcept { return S_; }
    // D~ = sum of actual delays over fed rounds.
    std::size_t actual_delay_total() const noexcept { return actual_total_; }

private:
    MetaRoundRecord& at(Round j) { return records_[j - first_]; }
    const MetaRoundRecord& at(Round j) const { return records_[j - first_]; }

    bandit::BaseLearner* base_;
    std::size_t S_;
    std::size_t T_;
    MetaBioConfig cfg_;
    Round first_;
    StatePool pool_;
    DelayLedger ledger_;
    std::vector<std::size_t> visits_;
    std::vector<MetaRoundRecord> records_;
    std::vector<FeedEntry> feeds_;
    std::vector<Round> waiting_;
    std::vector<Round> feed_set_;
    std::vector<Arrival> sorted_;
    std::size_t actual_total_ = 0;
    bool pending_ = false;
};

// D~_T from per-round records: sum of d_t over deferred rounds.
inline std::size_t actual_delay_total(std::span<const MetaRoundRecord> records) {
    std::size_t total = 0;
    for (const auto& r : records)
        if (!r.immediate && r.fed_at) total += r.actual_delay;
    return total;
}

} // namespace bio::meta
