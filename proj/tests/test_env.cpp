#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "bio/env/presets.hpp"

using namespace bio;
using namespace bio::env;

namespace {

Environment table3_env(std::size_t T, std::uint64_t seed) {
    return make_experiment_env(1, FixedDelay{0}, seed, {.horizon = T});
}

} // namespace

TEST(Mapping, ZeroProbabilityStateIsNeverReached) {
    const auto r = table3_env(100000, 7).realize();
    for (Round t = 1; t <= r.T; ++t) EXPECT_NE(r.state(t, 2), 2u) << "round " << t;
}

TEST(Mapping, EmpiricalFrequenciesMatchRow) {
    const auto r = table3_env(100000, 11).realize();
    std::vector<double> freq(3, 0.0);
    for (Round t = 1; t <= r.T; ++t) freq[r.state(t, 0)] += 1.0;
    const std::vector<double> want = {0.8, 0.1, 0.1};
    for (StateId s = 0; s < 3; ++s) EXPECT_NEAR(freq[s] / 100000.0, want[s], 0.01);
}

TEST(Mapping, PointMassAlwaysHitsItsState) {
    MappingModel m(2, 3, StochasticMapping{{{0.0, 1.0, 0.0}, {1.0, 0.0, 0.0}}});
    Rng rng(3);
    for (Round t = 1; t <= 1000; ++t) {
        EXPECT_EQ(sample_state(m, 0, t, rng), 1u);
        EXPECT_EQ(sample_state(m, 1, t, rng), 0u);
    }
}

TEST(Mapping, RejectsNonStochasticRows) {
    EXPECT_THROW(MappingModel(2, 2, StochasticMapping{{{0.6, 0.6}, {0.5, 0.5}}}), ArgumentError);
    EXPECT_THROW(MappingModel(2, 2, StochasticMapping{{{-0.1, 1.1}, {0.5, 0.5}}}), ArgumentError);
    EXPECT_THROW(MappingModel(2, 2, StochasticMapping{{{1.0, 0.0}}}), ArgumentError);
}

TEST(Mapping, RejectsEmptyPhaseAndShortCoverage) {
    PhasedMapping zero{{MappingPhase{0, StateAssignment{0, 1}}}};
    EXPECT_THROW(MappingModel(2, 2, zero), ArgumentError);
    PhasedMapping shortm{{MappingPhase{5, StateAssignment{0, 1}}}};
    MappingModel m(2, 2, shortm);
    EXPECT_THROW(Environment("x", 10, m, LossModel(2, BernoulliLosses{{0.0, 1.0}}), FixedDelay{0}), ArgumentError);
}

TEST(Mapping, RejectsOutOfRangeAssignment) {
    EXPECT_THROW(MappingModel(2, 2, TableMapping{{{0, 2}}}), ArgumentError);
}

TEST(Losses, RejectsMeansOutsideUnitInterval) {
    EXPECT_THROW(LossModel(2, BernoulliLosses{{0.5, 1.5}}), ArgumentError);
    EXPECT_THROW(LossModel(2, BernoulliLosses{{0.5}}), ArgumentError);
    EXPECT_THROW(LossModel(1, TableLosses{{{2.0}}}), ArgumentError);
}

TEST(Losses, BernoulliFrequencies) {
    const auto r = table3_env(100000, 5).realize();
    std::vector<double> mean(3, 0.0);
    for (Round t = 1; t <= r.T; ++t)
        for (StateId s = 0; s < 3; ++s) mean[s] += r.loss(t, s);
    const auto theta = presets::exp1_theta();
    for (StateId s = 0; s < 3; ++s) EXPECT_NEAR(mean[s] / 100000.0, theta[s], 0.01);
}

TEST(Delays, FixedDelayIsClampedAtHorizon) {
    Rng rng(1);
    EXPECT_EQ(sample_delay(FixedDelay{50}, 1, 10000, rng), 50u);
    EXPECT_EQ(sample_delay(FixedDelay{50}, 9990, 10000, rng), 10u);
    EXPECT_EQ(sample_delay(FixedDelay{50}, 10000, 10000, rng), 0u);
}

TEST(Delays, ExplicitDelaysClampBothWays) {
    Rng rng(1);
    ExplicitDelay e{{-3, 100, 2, 0}};
    EXPECT_EQ(sample_delay(e, 1, 4, rng), 0u);
    EXPECT_EQ(sample_delay(e, 2, 4, rng), 2u);
    EXPECT_EQ(sample_delay(e, 3, 4, rng), 1u);
    EXPECT_EQ(sample_delay(e, 4, 4, rng), 0u);
    EXPECT_THROW(sample_delay(ExplicitDelay{{1}}, 1, 4, rng), ArgumentError);
}

TEST(Delays, LaplaceDrawsHaveTheRightLocation) {
    Rng rng(2024);
    double sum = 0.0;
    for (int i = 0; i < 100000; ++i) sum += static_cast<double>(std::llround(laplace(50.0, 25.0, rng)));
    EXPECT_NEAR(sum / 100000.0, 50.0, 1.0);
}

TEST(Delays, LaplaceDelaysAreRoundedAndClamped) {
    Rng a(9), b(9);
    const std::size_t T = 1000;
    for (Round t = 1; t <= T; ++t) {
        const long long raw = std::llround(laplace(50.0, 25.0, b));
        const long long want = std::clamp(raw, 0LL, static_cast<long long>(T - t));
        EXPECT_EQ(static_cast<long long>(sample_delay(LaplaceDelay{50.0, 25.0}, t, T, a)), want);
    }
}

TEST(Delays, RealizedDelaysStayFeasible) {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        Rng gen(seed);
        std::vector<long long> seq(300);
        for (auto& v : seq) v = static_cast<long long>(gen() % 400) - 50;
        const auto env = table3_env(300, seed).with_delays(ExplicitDelay{seq});
        const auto r = env.realize();
        for (Round t = 1; t <= r.T; ++t) EXPECT_LE(t + r.delay(t), r.T);
        const auto lap = table3_env(300, seed).with_delays(LaplaceDelay{50.0, 25.0}).realize();
        for (Round t = 1; t <= lap.T; ++t) EXPECT_LE(t + lap.delay(t), lap.T);
    }
}

TEST(Delays, FileTags) {
    EXPECT_EQ(delay_tag(FixedDelay{50}), "d50");
    EXPECT_EQ(delay_tag(LaplaceDelay{50.0, 25.0}), "laplace50_25");
    EXPECT_TRUE(is_fixed(FixedDelay{3}));
    EXPECT_FALSE(is_fixed(LaplaceDelay{}));
}

TEST(Environment, ReplayIsDeterministic) {
    const auto env = make_experiment_env(1, LaplaceDelay{50.0, 25.0}, 0, {.horizon = 2000});
    const auto a = env.realize(42);
    const auto b = env.realize(42);
    EXPECT_EQ(a.states, b.states);
    EXPECT_EQ(a.losses, b.losses);
    EXPECT_EQ(a.delays, b.delays);
    const auto c = env.realize(43);
    EXPECT_NE(a.states, c.states);
}

TEST(Environment, DelayScheduleDoesNotPerturbStatesOrLosses) {
    const auto env = make_experiment_env(1, FixedDelay{50}, 0, {.horizon = 2000});
    const auto a = env.realize(8);
    const auto b = env.with_delays(LaplaceDelay{50.0, 25.0}).realize(8);
    EXPECT_EQ(a.states, b.states);
    EXPECT_EQ(a.losses, b.losses);
    EXPECT_NE(a.delays, b.delays);
}

TEST(Experiments, TableThreeExpectedLosses) {
    const auto env = table3_env(10, 0);
    const std::vector<double> want = {0.28, 0.36, 0.34, 0.38};
    for (ActionId a = 0; a < 4; ++a) EXPECT_NEAR(env.expected_loss(a, 1), want[a], 1e-12);
}

TEST(Experiments, StationaryStateMeans) {
    EXPECT_EQ(presets::exp2_theta(), (std::vector<double>{0.0, 1.0, 1.0}));
    EXPECT_EQ(presets::exp1_theta(), (std::vector<double>{0.2, 0.4, 0.8}));
}

TEST(Experiments, ManyStatesSuboptimalArmsHaveEqualMeans) {
    for (std::size_t S = 4; S <= 14; ++S) {
        const auto env = make_experiment_env(3, FixedDelay{0}, 0, {.horizon = 10, .states = S});
        EXPECT_EQ(env.states(), S);
        EXPECT_EQ(env.actions(), 8u);
        EXPECT_NEAR(env.expected_loss(0, 1), 0.2, 1e-12);
        for (ActionId a = 1; a < 8; ++a) EXPECT_NEAR(env.expected_loss(a, 1), 0.52, 1e-12) << "S=" << S;
    }
}

TEST(Experiments, DefaultStateCounts) {
    EXPECT_EQ(make_experiment_env(3, FixedDelay{0}, 0, {.horizon = 10}).states(), 4u);
    EXPECT_EQ(make_experiment_env(5, FixedDelay{0}, 0, {.horizon = 10}).states(), 14u);
}

TEST(Experiments, PhasesAlternateWithDoublingLengths) {
    const auto m = exp2_schedule(1000, 100);
    ASSERT_EQ(m.phases.size(), 4u);
    EXPECT_EQ(m.phases[0].length, 100u);
    EXPECT_EQ(m.phases[1].length, 200u);
    EXPECT_EQ(m.phases[2].length, 400u);
    EXPECT_EQ(m.phases[3].length, 300u);
    const auto env = make_experiment_env(2, FixedDelay{0}, 0, {.horizon = 1000});
    EXPECT_NEAR(env.expected_loss(0, 1), 0.94, 1e-12);   // env 1: action 1 is the worst
    EXPECT_NEAR(env.expected_loss(1, 1), 1.0, 1e-12);
    EXPECT_NEAR(env.expected_loss(0, 101), 0.0, 1e-12);  // env 2: action 1 is the best
    EXPECT_NEAR(env.expected_loss(1, 101), 0.06, 1e-12);
    EXPECT_NEAR(env.expected_loss(0, 301), 0.94, 1e-12);
}

TEST(Experiments, UnknownIdIsRejected) {
    EXPECT_THROW(make_experiment_env(6, FixedDelay{0}, 0), ArgumentError);
    EXPECT_THROW(default_delays(0), ArgumentError);
}

TEST(LowerBound, KnownTransitionsGap) {
    EXPECT_DOUBLE_EQ(kt_epsilon(4, 400), 0.025);
    const auto lb = make_kt_lowerbound_env(4, 400, 3);
    EXPECT_EQ(lb.env.losses().mean(1, 0), 1.0);
    EXPECT_EQ(lb.env.losses().mean(1, 1), 0.0);
    for (ActionId a = 0; a < 4; ++a)
        EXPECT_NEAR(lb.env.expected_loss(a, 1), a == lb.best_action ? 0.475 : 0.5, 1e-12);
}

TEST(LowerBound, KnownTransitionsWithoutGapIsSymmetric) {
    const auto lb = make_kt_lowerbound_env(3, 100, 1, 0.0);
    for (ActionId a = 0; a < 3; ++a) EXPECT_DOUBLE_EQ(lb.env.expected_loss(a, 1), 0.5);
    EXPECT_THROW(make_kt_lowerbound_env(3, 100, 1, 0.7), ArgumentError);
}

TEST(LowerBound, StochasticTransitionsConstruction) {
    const auto lb = make_st_lowerbound_env(6, 10, 1000, 1, 5);
    EXPECT_EQ(lb.s_prime, 3u);
    const double eps = 0.25 * std::sqrt(3.0 / (2.0 * 1000.0 * std::log(4.0 / 3.0)));
    EXPECT_NEAR(lb.epsilon, eps, 1e-15);
    EXPECT_NEAR(lb.epsilon, 0.01805, 1e-5);
    const auto r = lb.env.realize();
    // first block: action 1 walks h1, h3, h5 and action 2 walks h2, h4, h6
    for (Round t = 1; t <= 3; ++t) {
        EXPECT_EQ(r.state(t, 0), 2 * (t - 1));
        EXPECT_EQ(r.state(t, 1), 2 * (t - 1) + 1);
    }
    // losses are constant along each chain within a block
    for (std::size_t b = 0; b < lb.blocks; ++b)
        for (Round t = b * 3 + 2; t <= b * 3 + 3; ++t)
            for (ActionId a = 0; a < 2; ++a)
                EXPECT_EQ(r.loss(t, r.state(t, a)), r.loss(b * 3 + 1, r.state(b * 3 + 1, a)));
    EXPECT_NEAR(lb.env.expected_loss(0, 1), 0.5 - eps, 1e-15);
    EXPECT_NEAR(lb.env.expected_loss(1, 1), 0.5, 1e-15);
    EXPECT_EQ(make_st_lowerbound_env(6, 10, 1000, 2, 5).best_action, 1u);
}

TEST(LowerBound, StochasticTransitionsRejectsEmptyBlocks) {
    EXPECT_THROW(make_st_lowerbound_env(6, 0, 1000, 1, 0), ArgumentError);
    EXPECT_THROW(make_st_lowerbound_env(6, 10, 1000, 3, 0), ArgumentError);
}

TEST(LowerBound, FixedDelayConstruction) {
    const auto lb = make_fixed_delay_lowerbound_env(8, 4, 100, {0, 1, 1, 0}, 0);
    EXPECT_EQ(lb.blocks, 4u);
    EXPECT_EQ(lb.block_length, 5u);
    const auto theta = *lb.env.losses().stationary_means();
    for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(theta[2 * i] + theta[2 * i + 1], 1.0);
    const auto r = lb.env.realize();
    for (Round t = 1; t <= 20; ++t) {
        const std::size_t block = (t - 1) / 5;
        EXPECT_EQ(r.state(t, 0), 2 * block);
        EXPECT_EQ(r.state(t, 1), 2 * block + 1);
    }
    EXPECT_THROW(make_fixed_delay_lowerbound_env(8, 4, 100, {0, 1}, 0), ArgumentError);
}

TEST(LowerBound, FixedDelayAllZeroBitsFavourFirstAction) {
    const auto lb = make_fixed_delay_lowerbound_env(8, 4, 100, {0, 0, 0, 0}, 0);
    const auto r = lb.env.realize();
    for (Round t = 1; t <= 20; ++t) {
        EXPECT_EQ(r.loss(t, r.state(t, 0)), 0.0);
        EXPECT_EQ(r.loss(t, r.state(t, 1)), 1.0);
    }
}

TEST(LowerBound, AdversarialTableActsLikeTwoArmedBandit) {
    Matrix table;
    Rng rng(77);
    for (int t = 0; t < 10; ++t) table.push_back({uniform01(rng), uniform01(rng)});
    const auto lb = make_adv_stoch_lowerbound_env(5, 2, 10, table, 4);
    const auto r = lb.env.realize();
    for (Round t = 1; t <= 10; ++t)
        for (ActionId a = 0; a < 5; ++a) {
            const std::size_t column = a == lb.best_action ? 1 : 0;
            EXPECT_EQ(r.loss(t, r.state(t, a)), table[t - 1][column]);
            EXPECT_EQ(lb.env.expected_loss(a, t), table[t - 1][column]);
        }
    EXPECT_EQ(make_adv_stoch_lowerbound_env(5, 2, 10, table, 4, 3).best_action, 3u);
}
