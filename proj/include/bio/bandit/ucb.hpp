#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "bio/bandit/learner.hpp"

namespace bio::bandit {

// UCB1 on losses. Rounds 1..K pull arms in index order; afterwards
// argmin_a mean(a) - sqrt(2 ln t / n_a), ties to the lowest index. Arms whose
// pulls have not arrived yet count as n = 1 with mean 0.
class Ucb1 final : public LearnerBase {
public:
    explicit Ucb1(std::size_t K) : LearnerBase(K), count_(K, 0), sum_(K, 0.0) {}

    double index(ActionId a, Round t) const {
        const double n = static_cast<double>(std::max<std::size_t>(count_[a], 1));
        const double mean = count_[a] ? sum_[a] / static_cast<double>(count_[a]) : 0.0;
        return mean - std::sqrt(2.0 * std::log(static_cast<double>(t)) / n);
    }

    const PolicySnapshot& next_action(Round t) override {
        PolicySnapshot& snap = begin_round(t);
        const Round local = local_round();
        ActionId choice = 0;
        if (local <= K_) {
            choice = local - 1;
        } else {
            double best = index(0, local);
            for (ActionId a = 1; a < K_; ++a) {
                const double v = index(a, local);
                if (v < best) {
                    best = v;
                    choice = a;
                }
            }
        }
        snap.p.assign(K_, 0.0);
        snap.p[choice] = 1.0;
        snap.eta = 1.0;
        snap.gamma = 0.0;
        snap.action = choice;
        return snap;
    }

    void feed(Round j, ActionId a, double loss) override {
        accept_feed(j, a, loss);
        ++count_[a];
        sum_[a] += loss;
    }

    std::string name() const override { return "ucb1"; }

    std::size_t pulls_observed(ActionId a) const { return count_.at(a); }
    double mean_loss(ActionId a) const { return count_.at(a) ? sum_[a] / static_cast<double>(count_[a]) : 0.0; }

private:
    std::vector<std::size_t> count_;
    std::vector<double> sum_;
};

} // namespace bio::bandit
