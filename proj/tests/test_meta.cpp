#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <numeric>

#include "bio/bandit/exp3.hpp"
#include "bio/meta/metaada.hpp"
#include "oracles.hpp"

using namespace bio;
using namespace bio::meta;

namespace {

// Deterministic base learner that logs every feed with the round it arrived in.
class RecordingLearner final : public bandit::LearnerBase {
public:
    struct Feed {
        Round round;
        ActionId action;
        double loss;
        Round now;
    };

    explicit RecordingLearner(std::size_t K) : LearnerBase(K) {}

    const bandit::PolicySnapshot& next_action(Round t) override {
        auto& snap = begin_round(t);
        snap.action = (t * 7 + 3) % K_;
        snap.p.assign(K_, 0.0);
        snap.p[snap.action] = 1.0;
        snap.eta = 1.0;
        return snap;
    }
    void feed(Round j, ActionId a, double loss) override {
        accept_feed(j, a, loss);
        feeds.push_back({j, a, loss, current_round()});
    }
    std::string name() const override { return "recording"; }

    std::vector<Feed> feeds;
};

struct Scenario {
    std::size_t S, T;
    std::vector<StateId> state;
    std::vector<double> loss;
    std::vector<std::size_t> delay; // clamped so that t + d_t <= T
};

Scenario random_scenario(std::uint64_t seed, std::size_t S, std::size_t T, std::size_t max_delay) {
    Rng gen(seed);
    Scenario sc{S, T, {}, {}, {}};
    for (Round t = 1; t <= T; ++t) {
        sc.state.push_back(gen() % S);
        sc.loss.push_back(static_cast<double>(gen() % 5) / 4.0);
        sc.delay.push_back(std::min<std::size_t>(gen() % (max_delay + 1), T - t));
    }
    return sc;
}

std::vector<std::vector<Arrival>> arrivals_by_round(const Scenario& sc) {
    std::vector<std::vector<Arrival>> due(sc.T + 1);
    for (Round t = 1; t <= sc.T; ++t) due[t + sc.delay[t - 1]].push_back({t, sc.loss[t - 1]});
    // deliver in a scrambled order; the meta step must sort them
    for (auto& d : due) std::reverse(d.begin(), d.end());
    return due;
}

} // namespace

// ---------------------------------------------------------------------------
// Outstanding counts and delay budgets
// ---------------------------------------------------------------------------

TEST(Outstanding, HandExample) {
    const std::vector<std::size_t> d = {2, 0, 3, 1};
    EXPECT_EQ(outstanding_counts(d), (std::vector<std::size_t>{1, 1, 1, 2}));
}

TEST(Outstanding, ZeroAndFixedDelays) {
    const std::vector<std::size_t> zero(20, 0);
    EXPECT_EQ(outstanding_counts(zero), std::vector<std::size_t>(20, 0));
    const std::vector<std::size_t> fixed(20, 3);
    const auto sigma = outstanding_counts(fixed);
    for (std::size_t t = 1; t <= 20; ++t) EXPECT_EQ(sigma[t - 1], std::min<std::size_t>(t, 3));
}

TEST(Outstanding, MatchesEnumeration) {
    Rng gen(12);
    for (int i = 0; i < 200; ++i) {
        std::vector<std::size_t> d(1 + gen() % 120);
        for (auto& v : d) v = gen() % 60;
        EXPECT_EQ(outstanding_counts(d), oracle::sigma_by_enumeration(d));
    }
}

TEST(DelayBudget, HandExample) {
    const std::vector<std::size_t> d = {5, 1, 0, 7, 2};
    const auto sigma = outstanding_counts(d);
    const std::size_t smax = *std::max_element(sigma.begin(), sigma.end());
    EXPECT_EQ(smax, 3u);
    const auto b = d_phi(d, 2, smax);
    EXPECT_EQ(b.size, 5u);
    EXPECT_EQ(b.d_phi, 15u);
}

TEST(DelayBudget, FixedDelayClosedForm) {
    const std::size_t S = 3, d = 10;
    const std::vector<std::size_t> delays(10000, d);
    const auto b = d_phi(delays, S, d);
    EXPECT_EQ(b.size, 2 * S * d);
    EXPECT_EQ(b.d_phi, 2 * S * d * d);
    EXPECT_EQ(d_phi(std::vector<std::size_t>(50, 0), S, 0).d_phi, 0u);
}

TEST(DelayBudget, MatchesFullSort) {
    Rng gen(13);
    for (int i = 0; i < 200; ++i) {
        std::vector<std::size_t> d(1 + gen() % 200);
        for (auto& v : d) v = gen() % 40;
        const std::size_t S = 2 + gen() % 6;
        const auto sigma = outstanding_counts(d);
        const auto b = d_phi(d, S, *std::max_element(sigma.begin(), sigma.end()));
        EXPECT_EQ(b.d_phi, oracle::d_phi_by_sort(d, S));
    }
}

TEST(DelayLedger, OnlineCountsMatchOffline) {
    const auto sc = random_scenario(5, 3, 300, 25);
    const auto due = arrivals_by_round(sc);
    DelayLedger ledger;
    double total = 0.0;
    const auto want = outstanding_counts(sc.delay);
    for (Round t = 1; t <= sc.T; ++t) {
        ledger.begin_round(t);
        for (const auto& a : due[t]) ledger.arrive(a.round, t);
        EXPECT_EQ(ledger.end_round(t), want[t - 1]);
        total += static_cast<double>(want[t - 1]);
    }
    EXPECT_DOUBLE_EQ(ledger.sigma_total(), total);
    EXPECT_EQ(ledger.revealed_delays(), sc.delay);
}

TEST(DelayLedger, RejectsBadArrivals) {
    DelayLedger ledger;
    ledger.begin_round(1);
    EXPECT_THROW(ledger.arrive(2, 1), ContractViolation);
    ledger.arrive(1, 1);
    EXPECT_THROW(ledger.arrive(1, 1), ContractViolation);
    EXPECT_THROW(ledger.begin_round(3), ContractViolation);
}

// ---------------------------------------------------------------------------
// Pools, estimates and widths
// ---------------------------------------------------------------------------

TEST(StatePool, EnforcesArrivalOrder) {
    StatePool pool(2);
    pool.add(0, 3, 0.5, 5);
    EXPECT_THROW(pool.add(0, 2, 0.5, 5), ContractViolation);
    EXPECT_THROW(pool.add(0, 1, 0.5, 4), ContractViolation);
    EXPECT_THROW(pool.add(1, 6, 0.5, 5), ContractViolation);
    EXPECT_THROW(pool.add(2, 1, 0.5, 5), ArgumentError);
}

TEST(StatePool, EligibleSetTieRules) {
    StatePool pool(1);
    pool.add(0, 1, 1.0, 2);
    pool.add(0, 2, 0.0, 5);
    pool.add(0, 3, 1.0, 5);
    pool.add(0, 4, 1.0, 5);
    auto all_fed = [](Round) { return true; };
    // later rounds arriving and fed at the same time are excluded
    auto e = pool.eligible(0, 3, 5, all_fed);
    EXPECT_EQ(e.count, 3u);
    EXPECT_DOUBLE_EQ(e.sum, 2.0);
    e = pool.eligible(0, 2, 5, all_fed);
    EXPECT_EQ(e.count, 2u);
    // the fed round itself stays in
    e = pool.eligible(0, 4, 5, all_fed);
    EXPECT_EQ(e.count, 4u);
    // a later round fed at another time is kept
    e = pool.eligible(0, 2, 5, [](Round k) { return k != 4; });
    EXPECT_EQ(e.count, 3u);
    // earlier arrivals are always kept
    e = pool.eligible(0, 0, 6, all_fed);
    EXPECT_EQ(e.count, 4u);
}

TEST(Estimates, EmpiricalMean) {
    const std::vector<double> l = {0, 1, 1, 0, 1};
    EXPECT_DOUBLE_EQ(empirical_mean(l), 0.6);
    EXPECT_THROW(empirical_mean(std::vector<double>{}), ContractViolation);
    Rng rng(1);
    std::vector<double> draws(1000);
    for (auto& v : draws) v = bernoulli(0.3, rng) ? 1.0 : 0.0;
    EXPECT_NEAR(empirical_mean(draws), 0.3, 0.05);
}

TEST(Estimates, ConfidenceWidth) {
    const double w = confidence_width(100, 3, 10000, 0.1);
    EXPECT_DOUBLE_EQ(w, std::sqrt(0.02 * std::log(4.0 * 3.0 * 10000.0 / 0.1)));
    EXPECT_NEAR(w, 0.5289, 5e-4);
    EXPECT_NEAR(confidence_width(400, 3, 10000, 0.1), w / 2.0, 1e-15);
    EXPECT_NEAR(confidence_width(1, 2, 2, 0.5), 2.633, 5e-4);
    EXPECT_DOUBLE_EQ(confidence_width(10, 3, 0, 0.1, 50), confidence_width(10, 3, 2500, 0.1));
    EXPECT_THROW(confidence_width(0, 3, 10, 0.1), ContractViolation);
}

TEST(Estimates, LowerConfidenceEstimate) {
    EXPECT_EQ(lcb_estimate(0.5289 / 2.0, 0.5289), 0.0);
    EXPECT_DOUBLE_EQ(lcb_estimate(0.9, 0.2), 0.8);
    EXPECT_EQ(lcb_estimate(0.05, 0.5), 0.0);
    EXPECT_DOUBLE_EQ(lcb_estimate(0.9, 0.2, Estimator::empirical_mean), 0.9);
    EXPECT_THROW(lcb_estimate(std::nan(""), 0.1), ArgumentError);
}

TEST(Estimates, CKDelta) {
    EXPECT_DOUBLE_EQ(c_k_delta(4, 0.2), 3.0 * std::log(4.0) + std::log(60.0));
    EXPECT_THROW(c_k_delta(1, 0.1), ArgumentError);
}

// ---------------------------------------------------------------------------
// MetaBIO
// ---------------------------------------------------------------------------

TEST(MetaBio, ZeroDelayFeedsEveryRoundImmediately) {
    const auto sc = random_scenario(3, 3, 200, 0);
    RecordingLearner base(4);
    MetaBio meta(base, sc.S, sc.T, {0.1, Threshold::adaptive, 0, Estimator::empirical_mean});
    std::map<StateId, std::vector<double>> seen;
    for (Round t = 1; t <= sc.T; ++t) {
        meta.act(t);
        const std::vector<Arrival> arr = {{t, sc.loss[t - 1]}};
        meta.observe(t, sc.state[t - 1], arr);
        seen[sc.state[t - 1]].push_back(sc.loss[t - 1]);
        const auto& rec = meta.record(t);
        EXPECT_TRUE(rec.immediate);
        EXPECT_EQ(rec.fed_at, t);
        EXPECT_EQ(rec.sigma, 0u);
        const auto& feed = base.feeds.back();
        EXPECT_EQ(feed.round, t);
        EXPECT_DOUBLE_EQ(feed.loss, empirical_mean(seen[sc.state[t - 1]]));
        if (seen[sc.state[t - 1]].size() == 1) {
            EXPECT_EQ(feed.loss, sc.loss[t - 1]);
        }
    }
    EXPECT_EQ(meta.actual_delay_total(), 0u);
}

TEST(MetaBio, FixedDelayDefersUntilThePoolFills) {
    const std::size_t d = 3, T = 40;
    RecordingLearner base(2);
    MetaBio meta(base, 2, T, {0.1, Threshold::fixed, d});
    for (Round t = 1; t <= T; ++t) {
        meta.act(t);
        std::vector<Arrival> arr;
        if (t > d) arr.push_back({t - d, 0.5});
        meta.observe(t, 0, arr);
    }
    // the pool of the only visited state holds t - d records at round t
    for (Round t = 1; t <= T; ++t) {
        const auto& rec = meta.record(t);
        EXPECT_EQ(rec.pool_size, t > d ? t - d : 0);
        EXPECT_EQ(rec.immediate, t >= 2 * d) << t;
        if (!rec.immediate) {
            EXPECT_EQ(rec.fed_at, t + d);
            EXPECT_EQ(rec.actual_delay, d);
        }
    }
    EXPECT_EQ(meta.actual_delay_total(), (2 * d - 1) * d);
    EXPECT_EQ(meta.actual_delay_total(), actual_delay_total(meta.records()));
}

// Replays random scenarios and recomputes every decision and feed value by enumeration.
TEST(MetaBio, MatchesBruteForceReplay) {
    for (std::uint64_t seed = 1; seed <= 30; ++seed) {
        const auto sc = random_scenario(seed, 2 + seed % 3, 150, 12);
        const auto due = arrivals_by_round(sc);
        const auto sigma = oracle::sigma_by_enumeration(sc.delay);
        RecordingLearner base(3);
        MetaBio meta(base, sc.S, sc.T, {0.1});
        for (Round t = 1; t <= sc.T; ++t) {
            meta.act(t);
            meta.observe(t, sc.state[t - 1], due[t]);
        }

        std::vector<bool> immediate(sc.T + 1);
        std::vector<Round> fed_at(sc.T + 1);
        for (Round t = 1; t <= sc.T; ++t) {
            std::size_t n = 0;
            for (Round j = 1; j <= t; ++j)
                if (sc.state[j - 1] == sc.state[t - 1] && j + sc.delay[j - 1] <= t) ++n;
            immediate[t] = n >= sigma[t - 1] && n >= 1;
            fed_at[t] = immediate[t] ? t : t + sc.delay[t - 1];
            const auto& rec = meta.record(t);
            ASSERT_EQ(rec.immediate, immediate[t]) << "seed " << seed << " round " << t;
            EXPECT_EQ(rec.pool_size, n);
            EXPECT_EQ(rec.sigma, sigma[t - 1]);
            EXPECT_EQ(rec.fed_at, fed_at[t]);
        }
        std::map<Round, RecordingLearner::Feed> by_round;
        for (const auto& f : base.feeds) by_round[f.round] = f;
        ASSERT_EQ(by_round.size(), sc.T);
        for (Round j = 1; j <= sc.T; ++j) {
            const Round tau = fed_at[j];
            const StateId s = sc.state[j - 1];
            std::size_t n = 0;
            double sum = 0.0;
            for (Round k = 1; k <= sc.T; ++k) {
                if (sc.state[k - 1] != s || k + sc.delay[k - 1] > tau) continue;
                if (k > j && k + sc.delay[k - 1] == tau && fed_at[k] == tau) continue;
                ++n;
                sum += sc.loss[k - 1];
            }
            const double eps = std::sqrt(2.0 / static_cast<double>(n) *
                                         std::log(4.0 * static_cast<double>(sc.S) * sc.T / 0.1));
            const double want = std::max(0.0, sum / static_cast<double>(n) - eps / 2.0);
            EXPECT_NEAR(by_round[j].loss, want, 1e-12) << "seed " << seed << " round " << j;
            EXPECT_EQ(by_round[j].now, tau);
        }
    }
}

TEST(MetaBio, BeforeRoundVariantDropsTheCurrentRound) {
    const auto sc = random_scenario(9, 3, 100, 8);
    const auto due = arrivals_by_round(sc);
    const auto sigma = oracle::sigma_by_enumeration(sc.delay);
    RecordingLearner base(2);
    MetaBioConfig cfg;
    cfg.sigma = SigmaVariant::before_round;
    MetaBio meta(base, sc.S, sc.T, cfg);
    for (Round t = 1; t <= sc.T; ++t) {
        meta.act(t);
        meta.observe(t, sc.state[t - 1], due[t]);
        EXPECT_EQ(meta.record(t).sigma, sigma[t - 1] - (sc.delay[t - 1] > 0 ? 1 : 0));
    }
}

TEST(MetaBio, ProtocolViolations) {
    RecordingLearner base(2);
    MetaBio meta(base, 2, 10, {});
    EXPECT_THROW(meta.observe(1, 0, {}), ContractViolation);
    meta.act(1);
    EXPECT_THROW(meta.act(2), ContractViolation);
    const std::vector<Arrival> future = {{2, 0.5}};
    EXPECT_THROW(meta.observe(1, 0, future), ContractViolation);
    EXPECT_THROW(MetaBio(base, 1, 10, {}), ArgumentError);
    EXPECT_THROW(MetaBio(base, 2, 10, {1.5}), ArgumentError);
}

// ---------------------------------------------------------------------------
// MetaAdaBIO
// ---------------------------------------------------------------------------

TEST(SwitchCheck, HighProbabilityThreshold) {
    const double st = 3.0 * 10000.0;
    const double star = 49.0 * st * std::log(8.0 * st / 0.1) / c_k_delta(4, 0.2);
    EXPECT_NEAR(star, 2.617e6, 1e3);
    EXPECT_FALSE(metaada_switch_check(star * 0.999, 4, 3, 10000, 0.1, SwitchMode::high_prob));
    EXPECT_TRUE(metaada_switch_check(star * 1.001, 4, 3, 10000, 0.1, SwitchMode::high_prob));
}

TEST(SwitchCheck, OtherModes) {
    const double d4 = 3.0 * 10000.0 / c_k_delta(4, 0.2);
    EXPECT_FALSE(metaada_switch_check(d4 * 0.999, 4, 3, 10000, 0.1, SwitchMode::experiment4));
    EXPECT_TRUE(metaada_switch_check(d4 * 1.001, 4, 3, 10000, 0.1, SwitchMode::experiment4));
    const double de = 36.0 * 3.0 * 10000.0 * std::log(2.0 * 3.0 * 10000.0) / (8.0 * std::log(4.0));
    EXPECT_FALSE(metaada_switch_check(de * 0.999, 4, 3, 10000, 0.1, SwitchMode::expectation));
    EXPECT_TRUE(metaada_switch_check(de * 1.001, 4, 3, 10000, 0.1, SwitchMode::expectation));
    for (auto m : {SwitchMode::high_prob, SwitchMode::expectation, SwitchMode::experiment4})
        EXPECT_FALSE(metaada_switch_check(0.0, 4, 3, 10000, 0.1, m));
}

TEST(SwitchCheck, ModeNames) {
    for (auto m : {SwitchMode::high_prob, SwitchMode::expectation, SwitchMode::experiment4})
        EXPECT_EQ(parse_switch_mode(to_string(m)), m);
    EXPECT_THROW(parse_switch_mode("sometimes"), ArgumentError);
}

TEST(SwitchCheck, FixedDelayExperimentSwitchRound) {
    // D_t = sum_j min(j, 20); first t with D_t C > S T for K = 4, S = 3, T = 1e4
    double D = 0.0;
    Round first = 0;
    for (Round t = 1; t <= 10000 && !first; ++t) {
        D += static_cast<double>(std::min<Round>(t, 20));
        if (metaada_switch_check(D, 4, 3, 10000, 0.1, SwitchMode::experiment4)) first = t;
    }
    EXPECT_EQ(first, 192u);
}

namespace {

std::vector<ActionId> run_raw(bandit::BaseLearner& base, const Scenario& sc) {
    const auto due = arrivals_by_round(sc);
    std::vector<ActionId> acts;
    for (Round t = 1; t <= sc.T; ++t) {
        acts.push_back(base.next_action(t).action);
        for (const auto& a : due[t]) base.feed(a.round, acts[a.round - 1], a.loss);
    }
    return acts;
}

std::vector<ActionId> run_ada(MetaAdaBio& ada, const Scenario& sc) {
    const auto due = arrivals_by_round(sc);
    std::vector<ActionId> acts;
    for (Round t = 1; t <= sc.T; ++t) {
        acts.push_back(ada.act(t));
        ada.observe(t, sc.state[t - 1], due[t]);
    }
    return acts;
}

} // namespace

TEST(MetaAdaBio, WithoutSwitchItIsTheBaseLearner) {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto sc = random_scenario(seed, 3, 500, 6);
        bandit::DadaExp3 raw(4, {}, seed);
        const auto want = run_raw(raw, sc);
        MetaAdaBio ada(std::make_unique<bandit::DadaExp3>(4, bandit::DadaExp3Config{}, seed), sc.S, sc.T,
                       {.delta = 0.1, .mode = SwitchMode::high_prob, .meta = {}});
        EXPECT_EQ(run_ada(ada, sc), want);
        EXPECT_FALSE(ada.switched());
        EXPECT_EQ(ada.metabio(), nullptr);
    }
}

TEST(MetaAdaBio, PreSwitchActionsMatchTheBaseLearner) {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto sc = random_scenario(seed, 3, 800, 40);
        bandit::DadaExp3 raw(4, {}, seed);
        const auto want = run_raw(raw, sc);
        MetaAdaBio ada(std::make_unique<bandit::DadaExp3>(4, bandit::DadaExp3Config{}, seed), sc.S, sc.T,
                       {.delta = 0.1, .mode = SwitchMode::experiment4, .meta = {}});
        const auto got = run_ada(ada, sc);
        ASSERT_TRUE(ada.switched());
        const Round star = *ada.switch_round();
        EXPECT_LT(star, sc.T);
        for (Round t = 1; t <= star + 1; ++t) EXPECT_EQ(got[t - 1], want[t - 1]) << "seed " << seed << " round " << t;
        EXPECT_EQ(ada.metabio()->first_round(), star + 1);
        EXPECT_DOUBLE_EQ(ada.metabio()->config().delta, 0.05);
    }
}

TEST(MetaAdaBio, StraddlingRoundsReachTheBaseRaw) {
    // K = 2, S = 2, T = 10, d = 3: D_3 = 6 first exceeds S T / C = 3.24
    Scenario sc{2, 10, {}, {}, {}};
    for (Round t = 1; t <= 10; ++t) {
        sc.state.push_back(t % 2);
        sc.loss.push_back(0.25 * static_cast<double>(t % 5));
        sc.delay.push_back(std::min<std::size_t>(3, 10 - t));
    }
    auto owned = std::make_unique<RecordingLearner>(2);
    RecordingLearner* base = owned.get();
    MetaAdaBio ada(std::move(owned), 2, 10, {.delta = 0.1, .mode = SwitchMode::experiment4, .meta = {}});
    run_ada(ada, sc);
    ASSERT_EQ(ada.switch_round(), std::optional<Round>(3));
    ASSERT_GE(base->feeds.size(), 3u);
    for (Round j = 1; j <= 3; ++j) {
        const auto& f = base->feeds[j - 1];
        EXPECT_EQ(f.round, j);
        EXPECT_EQ(f.loss, sc.loss[j - 1]);
        EXPECT_EQ(f.now, j + 3);
    }
    // rounds 4..10 go through the meta step and are all fed by the horizon
    const MetaBio* meta = ada.metabio();
    ASSERT_NE(meta, nullptr);
    EXPECT_EQ(meta->rounds(), 7u);
    EXPECT_EQ(base->feeds.size(), 10u);
    for (Round j = 4; j <= 10; ++j) EXPECT_NE(meta->record(j).fed_at, 0u);
    EXPECT_EQ(meta->ledger().sigmas()[0], 1u);
}

TEST(MetaAdaBio, FreshBaseMode) {
    const auto sc = random_scenario(4, 3, 600, 40);
    MetaAdaConfig cfg{.delta = 0.1, .mode = SwitchMode::experiment4, .meta = {}};
    cfg.fresh_base = true;
    MetaAdaBio ada(std::make_unique<bandit::DadaExp3>(4, bandit::DadaExp3Config{}, 1), sc.S, sc.T, cfg,
                   [] { return std::make_unique<bandit::DadaExp3>(4, bandit::DadaExp3Config{}, 2); });
    run_ada(ada, sc);
    ASSERT_TRUE(ada.switched());
    const Round star = *ada.switch_round();
    EXPECT_EQ(static_cast<const bandit::LearnerBase&>(ada.base()).current_round(), star);
    EXPECT_NE(&ada.active_base(), &ada.base());
    EXPECT_THROW(MetaAdaBio(std::make_unique<bandit::DadaExp3>(4, bandit::DadaExp3Config{}, 1), 3, 10, cfg),
                 ArgumentError);
}
