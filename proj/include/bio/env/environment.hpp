#pragma once

#include <optional>
#include <string>
#include <type_traits>
#include <vector>

#include "bio/core/rng.hpp"
#include "bio/env/models.hpp"

namespace bio::env {

// One sampled episode, omniscient view. Only the harness reads this; learners
// see S_t = state(t, A_t) and delayed losses.
struct Realization {
    std::size_t K = 0;
    std::size_t S = 0;
    std::size_t T = 0;
    std::vector<StateId> states;   // T x K, row-major
    std::vector<double> losses;    // T x S
    std::vector<double> benchmark; // T x K, mean loss of action a at round t
    std::vector<std::size_t> delays;

    StateId state(Round t, ActionId a) const { return states[(t - 1) * K + a]; }
    double loss(Round t, StateId s) const { return losses[(t - 1) * S + s]; }
    double expected_loss(Round t, ActionId a) const { return benchmark[(t - 1) * K + a]; }
    std::size_t delay(Round t) const { return delays[t - 1]; }
};

class Environment {
public:
    Environment(std::string name, std::size_t horizon, MappingModel mapping, LossModel losses,
                DelaySchedule delays, std::uint64_t seed = 0)
        : name_(std::move(name)), T_(horizon), mapping_(std::move(mapping)), losses_(std::move(losses)),
          delays_(std::move(delays)), seed_(seed) {
        if (T_ < 1) throw ArgumentError("environment: T must be >= 1");
        if (losses_.states() != mapping_.states())
            throw ArgumentError("environment: mapping and loss model disagree on S");
        if (mapping_.coverage() < T_) throw ArgumentError("environment: mapping covers fewer than T rounds");
        if (losses_.coverage() < T_) throw ArgumentError("environment: loss table covers fewer than T rounds");
        if (const auto* e = std::get_if<ExplicitDelay>(&delays_); e && e->sequence.size() < T_)
            throw ArgumentError("environment: explicit delay sequence shorter than T");
    }

    const std::string& name() const noexcept { return name_; }
    std::size_t actions() const noexcept { return mapping_.actions(); }
    std::size_t states() const noexcept { return mapping_.states(); }
    std::size_t horizon() const noexcept { return T_; }
    std::uint64_t seed() const noexcept { return seed_; }
    const MappingModel& mapping() const noexcept { return mapping_; }
    const LossModel& losses() const noexcept { return losses_; }
    const DelaySchedule& delays() const noexcept { return delays_; }

    Environment with_delays(DelaySchedule delays) const {
        Environment copy = *this;
        copy.delays_ = std::move(delays);
        return copy;
    }

    // mu_t(a) = sum_s m_t(s) P_t(s | a); m_t = theta for stochastic losses, ell_t otherwise.
    double expected_loss(ActionId a, Round t) const {
        const auto row = mapping_.row_at(a, t);
        if (!row.probabilities) return losses_.mean(t, row.state);
        double mu = 0.0;
        for (StateId s = 0; s < mapping_.states(); ++s)
            if ((*row.probabilities)[s] > 0.0) mu += (*row.probabilities)[s] * losses_.mean(t, s);
        return mu;
    }

    Realization realize() const { return realize(seed_); }

    // Mapping, losses and delays use independent streams of `seed`, so changing
    // the delay schedule leaves states and losses untouched.
    Realization realize(std::uint64_t seed) const {
        const std::size_t K = actions();
        const std::size_t S = states();
        Realization r;
        r.K = K;
        r.S = S;
        r.T = T_;
        r.states.resize(T_ * K);
        r.losses.resize(T_ * S);
        r.benchmark.resize(T_ * K);
        r.delays.resize(T_);

        Rng mapping_rng(derive_seed(seed, 1));
        Rng loss_rng(derive_seed(seed, 2));
        Rng delay_rng(derive_seed(seed, 3));

        std::vector<double> group_draw;
        for (Round t = 1; t <= T_; ++t) {
            for (ActionId a = 0; a < K; ++a) {
                r.states[(t - 1) * K + a] = sample_state(mapping_, a, t, mapping_rng);
                r.benchmark[(t - 1) * K + a] = expected_loss(a, t);
            }
            draw_losses(t, loss_rng, group_draw, &r.losses[(t - 1) * S]);
            r.delays[t - 1] = sample_delay(delays_, t, T_, delay_rng);
        }
        return r;
    }

private:
    void draw_losses(Round t, Rng& rng, std::vector<double>& group_draw, double* out) const {
        const std::size_t S = states();
        std::visit(
            [&](const auto& m) {
                using M = std::decay_t<decltype(m)>;
                if constexpr (std::is_same_v<M, BernoulliLosses>) {
                    for (StateId s = 0; s < S; ++s) out[s] = bernoulli(m.theta[s], rng) ? 1.0 : 0.0;
                } else if constexpr (std::is_same_v<M, GeneralLosses>) {
                    for (StateId s = 0; s < S; ++s) {
                        const double v = m.draw(s, rng);
                        if (!(v >= 0.0 && v <= 1.0)) throw InternalError("general losses: draw outside [0, 1]");
                        out[s] = v;
                    }
                } else if constexpr (std::is_same_v<M, TableLosses>) {
                    for (StateId s = 0; s < S; ++s) out[s] = m.table[t - 1][s];
                } else {
                    const bool in_blocks = t <= m.blocks * m.block_length;
                    if (in_blocks && (t - 1) % m.block_length == 0) {
                        group_draw.resize(m.group_mean.size());
                        for (std::size_t g = 0; g < group_draw.size(); ++g)
                            group_draw[g] = bernoulli(m.group_mean[g], rng) ? 1.0 : 0.0;
                    }
                    for (StateId s = 0; s < S; ++s)
                        out[s] = (in_blocks && m.group_of_state[s]) ? group_draw[*m.group_of_state[s]] : 0.0;
                }
            },
            losses_.kind());
    }

    std::string name_;
    std::size_t T_;
    MappingModel mapping_;
    LossModel losses_;
    DelaySchedule delays_;
    std::uint64_t seed_;
};

} // namespace bio::env
