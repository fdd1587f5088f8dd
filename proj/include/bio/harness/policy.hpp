#pragma once

#include <algorithm>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bio/bandit/exp3.hpp"
#include "bio/bandit/tsallis.hpp"
#include "bio/bandit/ucb.hpp"
#include "bio/env/environment.hpp"
#include "bio/meta/metaada.hpp"
#include "bio/meta/metabio.hpp"

namespace bio::harness {

// Learner-facing side of the protocol: the chosen action goes out, and only
// S_t = s_t(A_t) and arrived losses (j, ell_j(S_j)) come back.
class Policy {
public:
    virtual ~Policy() = default;
    virtual ActionId choose(Round t) = 0;
    virtual void observe(Round t, StateId state, std::span<const Arrival> arrivals) = 0;
    virtual std::string name() const = 0;

    // Delay the base learner effectively waited for round t; nullopt means d_t.
    virtual std::optional<std::size_t> actual_delay(Round) const { return std::nullopt; }
    // Outstanding count as tracked by the policy; nullopt means the plain sigma_t.
    virtual std::optional<std::size_t> sigma(Round) const { return std::nullopt; }
    virtual std::optional<Round> switch_round() const { return std::nullopt; }
    // The MetaBIO instance driving the base learner, if any (post-switch for MetaAdaBIO).
    virtual const meta::MetaBio* metabio() const { return nullptr; }
    virtual const bandit::BaseLearner* learner() const { return nullptr; }
};

// Base learner on raw delayed losses; arrivals are fed in ascending round order.
class DelayedBanditPolicy final : public Policy {
public:
    explicit DelayedBanditPolicy(std::unique_ptr<bandit::BaseLearner> base) : base_(std::move(base)) {}

    ActionId choose(Round t) override {
        const ActionId a = base_->next_action(t).action;
        actions_.push_back(a);
        return a;
    }
    void observe(Round, StateId, std::span<const Arrival> arrivals) override {
        sorted_.assign(arrivals.begin(), arrivals.end());
        std::sort(sorted_.begin(), sorted_.end(), [](const Arrival& a, const Arrival& b) { return a.round < b.round; });
        for (const Arrival& a : sorted_) base_->feed(a.round, actions_.at(a.round - 1), a.loss);
    }
    std::string name() const override { return base_->name(); }
    const bandit::BaseLearner* learner() const override { return base_.get(); }

private:
    std::unique_ptr<bandit::BaseLearner> base_;
    std::vector<ActionId> actions_;
    std::vector<Arrival> sorted_;
};

class MetaBioPolicy final : public Policy {
public:
    MetaBioPolicy(std::unique_ptr<bandit::BaseLearner> base, std::size_t S, std::size_t T, meta::MetaBioConfig cfg,
                  std::string label)
        : base_(std::move(base)), meta_(*base_, S, T, cfg), label_(std::move(label)) {}

    ActionId choose(Round t) override { return meta_.act(t); }
    void observe(Round t, StateId s, std::span<const Arrival> arrivals) override { meta_.observe(t, s, arrivals); }
    std::string name() const override { return label_; }
    std::optional<std::size_t> actual_delay(Round t) const override {
        const auto& r = meta_.record(t);
        if (!r.fed_at) return r.delay.value_or(0);
        return r.actual_delay;
    }
    std::optional<std::size_t> sigma(Round t) const override { return meta_.record(t).sigma; }
    const meta::MetaBio* metabio() const override { return &meta_; }
    const bandit::BaseLearner* learner() const override { return base_.get(); }

private:
    std::unique_ptr<bandit::BaseLearner> base_;
    meta::MetaBio meta_;
    std::string label_;
};

class MetaAdaBioPolicy final : public Policy {
public:
    MetaAdaBioPolicy(std::unique_ptr<bandit::BaseLearner> base, std::size_t S, std::size_t T, meta::MetaAdaConfig cfg,
                     meta::MetaAdaBio::Factory factory, std::string label)
        : ada_(std::move(base), S, T, cfg, std::move(factory)), label_(std::move(label)) {}

    ActionId choose(Round t) override { return ada_.act(t); }
    void observe(Round t, StateId s, std::span<const Arrival> arrivals) override { ada_.observe(t, s, arrivals); }
    std::string name() const override { return label_; }
    std::optional<std::size_t> actual_delay(Round t) const override {
        const auto* m = ada_.metabio();
        if (!m || t < m->first_round()) return std::nullopt;
        const auto& r = m->record(t);
        if (!r.fed_at) return r.delay.value_or(0);
        return r.actual_delay;
    }
    std::optional<std::size_t> sigma(Round t) const override { return ada_.ledger().sigma(t); }
    std::optional<Round> switch_round() const override { return ada_.switch_round(); }
    const meta::MetaBio* metabio() const override { return ada_.metabio(); }
    const bandit::BaseLearner* learner() const override { return &ada_.active_base(); }
    const meta::MetaAdaBio& metaada() const noexcept { return ada_; }

private:
    meta::MetaAdaBio ada_;
    std::string label_;
};

// ---------------------------------------------------------------------------
// Algorithm specs
// ---------------------------------------------------------------------------

enum class AlgorithmKind { dadaexp3, tsallis, ucb1, uniform, metabio, metaadabio, nsd_ucrl2 };
enum class BaseKind { dadaexp3, tsallis, ucb1, uniform };
enum class ThresholdChoice { automatic, fixed, adaptive };

struct AlgorithmSpec {
    std::string label;
    AlgorithmKind kind = AlgorithmKind::dadaexp3;
    BaseKind base = BaseKind::dadaexp3;
    bool skipping = false;
    double c_skip = 1.0;
    std::optional<double> delta; // overrides the run-level delta
    ThresholdChoice threshold = ThresholdChoice::automatic;
    std::optional<std::size_t> fixed_delay;
    meta::Estimator estimator = meta::Estimator::lower_confidence;
    bool anytime = false;
    meta::SigmaVariant sigma = meta::SigmaVariant::through_round;
    meta::SwitchMode switch_mode = meta::SwitchMode::high_prob;
    bool fresh_base = false;
};

// Named presets: dadaexp3, dadaexp3-skip, tsallis, ucb1, uniform, metabio,
// metabio-skip, metabio-tsallis, metaadabio, metaadabio-exp4,
// metaadabio-expectation, nsd-ucrl2 (placeholder, rejected at construction).
inline AlgorithmSpec algorithm_preset(const std::string& name) {
    AlgorithmSpec s;
    s.label = name;
    if (name == "dadaexp3") s.kind = AlgorithmKind::dadaexp3;
    else if (name == "dadaexp3-skip") {
        s.kind = AlgorithmKind::dadaexp3;
        s.skipping = true;
    } else if (name == "tsallis") s.kind = AlgorithmKind::tsallis;
    else if (name == "ucb1") s.kind = AlgorithmKind::ucb1;
    else if (name == "uniform") s.kind = AlgorithmKind::uniform;
    else if (name == "metabio") s.kind = AlgorithmKind::metabio;
    else if (name == "metabio-skip") {
        s.kind = AlgorithmKind::metabio;
        s.skipping = true;
    } else if (name == "metabio-tsallis") {
        s.kind = AlgorithmKind::metabio;
        s.base = BaseKind::tsallis;
        s.estimator = meta::Estimator::empirical_mean;
    } else if (name == "metaadabio") s.kind = AlgorithmKind::metaadabio;
    else if (name == "metaadabio-exp4") {
        s.kind = AlgorithmKind::metaadabio;
        s.switch_mode = meta::SwitchMode::experiment4;
    } else if (name == "metaadabio-expectation") {
        s.kind = AlgorithmKind::metaadabio;
        s.base = BaseKind::tsallis;
        s.switch_mode = meta::SwitchMode::expectation;
        s.estimator = meta::Estimator::empirical_mean;
    } else if (name == "nsd-ucrl2") s.kind = AlgorithmKind::nsd_ucrl2;
    else throw ArgumentError("unknown algorithm '" + name + "'");
    return s;
}

inline std::uint64_t learner_seed(std::uint64_t episode_seed) { return derive_seed(episode_seed, 4); }

inline std::unique_ptr<bandit::BaseLearner> make_base(BaseKind kind, std::size_t K, const AlgorithmSpec& spec,
                                                      double delta, std::uint64_t seed) {
    switch (kind) {
    case BaseKind::dadaexp3:
        return std::make_unique<bandit::DadaExp3>(K, bandit::DadaExp3Config{delta, spec.skipping, spec.c_skip}, seed);
    case BaseKind::tsallis: return std::make_unique<bandit::TsallisInf>(K, seed);
    case BaseKind::ucb1: return std::make_unique<bandit::Ucb1>(K);
    case BaseKind::uniform: return std::make_unique<bandit::UniformLearner>(K, seed);
    }
    throw ArgumentError("unknown base learner");
}

inline meta::MetaBioConfig metabio_config(const AlgorithmSpec& spec, const env::Environment& env, double delta) {
    meta::MetaBioConfig c;
    c.delta = delta;
    c.estimator = spec.estimator;
    c.anytime = spec.anytime;
    c.sigma = spec.sigma;
    const auto* fixed = std::get_if<env::FixedDelay>(&env.delays());
    switch (spec.threshold) {
    case ThresholdChoice::automatic:
        c.threshold = fixed ? meta::Threshold::fixed : meta::Threshold::adaptive;
        c.fixed_delay = spec.fixed_delay.value_or(fixed ? fixed->d : 0);
        break;
    case ThresholdChoice::fixed:
        if (!spec.fixed_delay && !fixed) throw ArgumentError("metabio: fixed threshold needs a delay value");
        c.threshold = meta::Threshold::fixed;
        c.fixed_delay = spec.fixed_delay.value_or(fixed ? fixed->d : 0);
        break;
    case ThresholdChoice::adaptive: c.threshold = meta::Threshold::adaptive; break;
    }
    return c;
}

inline std::unique_ptr<Policy> make_policy(const AlgorithmSpec& spec, const env::Environment& env, double run_delta,
                                           std::uint64_t episode_seed) {
    const double delta = spec.delta.value_or(run_delta);
    const std::size_t K = env.actions();
    const std::uint64_t seed = learner_seed(episode_seed);
    switch (spec.kind) {
    case AlgorithmKind::dadaexp3:
        return std::make_unique<DelayedBanditPolicy>(make_base(BaseKind::dadaexp3, K, spec, delta, seed));
    case AlgorithmKind::tsallis:
        return std::make_unique<DelayedBanditPolicy>(make_base(BaseKind::tsallis, K, spec, delta, seed));
    case AlgorithmKind::ucb1:
        return std::make_unique<DelayedBanditPolicy>(make_base(BaseKind::ucb1, K, spec, delta, seed));
    case AlgorithmKind::uniform:
        return std::make_unique<DelayedBanditPolicy>(make_base(BaseKind::uniform, K, spec, delta, seed));
    case AlgorithmKind::metabio:
        return std::make_unique<MetaBioPolicy>(make_base(spec.base, K, spec, delta, seed), env.states(),
                                               env.horizon(), metabio_config(spec, env, delta), spec.label);
    case AlgorithmKind::metaadabio: {
        meta::MetaAdaConfig c;
        c.delta = delta;
        c.mode = spec.switch_mode;
        c.meta = metabio_config(spec, env, delta);
        c.fresh_base = spec.fresh_base;
        meta::MetaAdaBio::Factory factory;
        if (spec.fresh_base)
            factory = [=, kind = spec.base] { return make_base(kind, K, spec, delta, derive_seed(seed, 1)); };
        return std::make_unique<MetaAdaBioPolicy>(make_base(spec.base, K, spec, delta, seed), env.states(),
                                                  env.horizon(), c, std::move(factory), spec.label);
    }
    case AlgorithmKind::nsd_ucrl2: throw ArgumentError("nsd-ucrl2 is an external baseline and is not implemented");
    }
    throw ArgumentError("unknown algorithm kind");
}

} // namespace bio::harness
