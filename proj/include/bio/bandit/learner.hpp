#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "bio/core/rng.hpp"
#include "bio/core/types.hpp"

namespace bio::bandit {

// Policy state frozen when A_t was drawn.
struct PolicySnapshot {
    Round round = 0;
    std::vector<double> p;
    double eta = 0.0;
    double gamma = 0.0;
    ActionId action = 0;
};

// Delayed-feedback learner without intermediate observations. Rounds are
// played contiguously starting at the first round passed to next_action;
// any played round may be fed once, in any order.
class BaseLearner {
public:
    virtual ~BaseLearner() = default;

    virtual const PolicySnapshot& next_action(Round t) = 0;
    virtual void feed(Round j, ActionId a, double loss) = 0;

    // Played rounds not yet fed, evaluated between rounds.
    virtual std::size_t outstanding() const = 0;
    virtual const PolicySnapshot& snapshot(Round j) const = 0;
    virtual std::size_t actions() const = 0;
    virtual std::string name() const = 0;
};

// Shared bookkeeping: contiguous round counter, snapshot store, fed flags.
class LearnerBase : public BaseLearner {
public:
    explicit LearnerBase(std::size_t K) : K_(K) {
        if (K_ < 2) throw ArgumentError("learner: K must be >= 2");
    }

    std::size_t outstanding() const override { return snapshots_.size() - fed_count_; }
    std::size_t actions() const override { return K_; }

    const PolicySnapshot& snapshot(Round j) const override { return snapshots_[index_of(j)]; }

    bool was_fed(Round j) const { return fed_[index_of(j)]; }
    std::size_t fed_count() const noexcept { return fed_count_; }
    // Most recent round passed to next_action; 0 before the first call.
    Round current_round() const noexcept { return snapshots_.empty() ? 0 : first_ + snapshots_.size() - 1; }
    // Rounds played so far (the learner's own clock).
    std::size_t local_round() const noexcept { return snapshots_.size(); }

protected:
    // Validates the round and reserves its snapshot slot.
    PolicySnapshot& begin_round(Round t) {
        if (t == 0) throw ArgumentError("learner: rounds are 1-based");
        if (snapshots_.empty()) first_ = t;
        else if (t != current_round() + 1)
            throw ContractViolation("learner: round " + std::to_string(t) + " played out of order");
        snapshots_.emplace_back();
        fed_.push_back(false);
        snapshots_.back().round = t;
        return snapshots_.back();
    }

    // Validates a feed and marks it; returns the round's snapshot.
    const PolicySnapshot& accept_feed(Round j, ActionId a, double loss) {
        const std::size_t i = index_of(j);
        if (fed_[i]) throw ContractViolation("learner: round " + std::to_string(j) + " fed twice");
        if (a != snapshots_[i].action)
            throw ContractViolation("learner: feed for round " + std::to_string(j) + " names the wrong action");
        if (!(loss >= 0.0 && loss <= 1.0)) throw ArgumentError("learner: loss must lie in [0, 1]");
        fed_[i] = true;
        ++fed_count_;
        return snapshots_[i];
    }

    std::size_t K_;

private:
    std::size_t index_of(Round j) const {
        if (snapshots_.empty() || j < first_ || j > current_round())
            throw ContractViolation("learner: round " + std::to_string(j) + " was never played");
        return j - first_;
    }

    Round first_ = 1;
    std::vector<PolicySnapshot> snapshots_;
    std::vector<bool> fed_;
    std::size_t fed_count_ = 0;
};

} // namespace bio::bandit
