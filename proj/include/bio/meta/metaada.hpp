#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bio/bandit/learner.hpp"
#include "bio/meta/ledger.hpp"
#include "bio/meta/metabio.hpp"

namespace bio::meta {

enum class SwitchMode { high_prob, expectation, experiment4 };

inline SwitchMode parse_switch_mode(const std::string& s) {
    if (s == "high-prob") return SwitchMode::high_prob;
    if (s == "expectation") return SwitchMode::expectation;
    if (s == "experiment4") return SwitchMode::experiment4;
    throw ArgumentError("unknown switching mode '" + s + "'");
}

inline std::string to_string(SwitchMode m) {
    switch (m) {
    case SwitchMode::high_prob: return "high-prob";
    case SwitchMode::expectation: return "expectation";
    case SwitchMode::experiment4: return "experiment4";
    }
    return "?";
}

// Whether the accumulated outstanding count D_t warrants switching to MetaBIO.
//   high-prob:   D (3 ln K + ln(6/delta)) > 49 S T ln(8 S T / delta)
//   expectation: sqrt(8 D ln K) > 6 sqrt(S T ln(2 S T))
//   experiment4: D (3 ln K + ln(6/delta)) > S T
inline bool metaada_switch_check(double D, std::size_t K, std::size_t S, std::size_t T, double delta, SwitchMode mode) {
    if (!(delta > 0.0 && delta < 1.0)) throw ArgumentError("switch check: delta must lie in (0, 1)");
    const double st = static_cast<double>(S) * static_cast<double>(T);
    switch (mode) {
    case SwitchMode::high_prob: return D * c_k_delta(K, 2.0 * delta) > 49.0 * st * std::log(8.0 * st / delta);
    case SwitchMode::expectation:
        return std::sqrt(8.0 * D * std::log(static_cast<double>(K))) > 6.0 * std::sqrt(st * std::log(2.0 * st));
    case SwitchMode::experiment4: return D * c_k_delta(K, 2.0 * delta) > st;
    }
    throw ArgumentError("switch check: unknown mode");
}

struct MetaAdaConfig {
    double delta = 0.1;
    SwitchMode mode = SwitchMode::high_prob;
    MetaBioConfig meta;      // delta is replaced by delta / 2 at the switch
    bool fresh_base = false; // ablation: hand MetaBIO a new base instance
};

// Runs the base learner on raw delayed losses until the switch check first holds
// at round t*, then MetaBIO(B, delta / 2) on rounds t* + 1 .. T. Losses of rounds
// <= t* keep reaching the base learner directly.
class MetaAdaBio {
public:
    using Factory = std::function<std::unique_ptr<bandit::BaseLearner>()>;

    MetaAdaBio(std::unique_ptr<bandit::BaseLearner> base, std::size_t S, std::size_t T, MetaAdaConfig cfg,
               Factory fresh_factory = {})
        : base_(std::move(base)), S_(S), T_(T), cfg_(cfg), factory_(std::move(fresh_factory)) {
        if (!base_) throw ArgumentError("metaada: base learner required");
        if (!(cfg_.delta > 0.0 && cfg_.delta < 1.0)) throw ArgumentError("metaada: delta must lie in (0, 1)");
        if (cfg_.fresh_base && !factory_) throw ArgumentError("metaada: fresh-base mode needs a factory");
        K_ = base_->actions();
    }

    ActionId act(Round t) {
        if (t != actions_.size() + 1) throw ContractViolation("metaada: round played out of order");
        ledger_.begin_round(t);
        const ActionId a = meta_ ? meta_->act(t) : base_->next_action(t).action;
        actions_.push_back(a);
        return a;
    }

    void observe(Round t, StateId s, std::span<const Arrival> arrivals) {
        if (t != actions_.size()) throw ContractViolation("metaada: observe before act");
        sorted_.assign(arrivals.begin(), arrivals.end());
        std::sort(sorted_.begin(), sorted_.end(), [](const Arrival& a, const Arrival& b) { return a.round < b.round; });
        post_.clear();
        for (const Arrival& a : sorted_) {
            ledger_.arrive(a.round, t);
            if (switch_round_ && a.round > *switch_round_) post_.push_back(a);
            else base_->feed(a.round, actions_[a.round - 1], a.loss);
        }
        ledger_.end_round(t);
        if (meta_) {
            meta_->observe(t, s, post_);
            return;
        }
        if (metaada_switch_check(ledger_.sigma_total(), K_, S_, T_, cfg_.delta, cfg_.mode)) {
            switch_round_ = t;
            if (t < T_) start_meta(t + 1);
        }
    }

    std::optional<Round> switch_round() const noexcept { return switch_round_; }
    bool switched() const noexcept { return switch_round_.has_value(); }
    const DelayLedger& ledger() const noexcept { return ledger_; }
    // Post-switch MetaBIO instance; null before the switch.
    const MetaBio* metabio() const noexcept { return meta_.get(); }
    const bandit::BaseLearner& base() const noexcept { return *base_; }
    const bandit::BaseLearner& active_base() const noexcept { return fresh_ ? *fresh_ : *base_; }
    const MetaAdaConfig& config() const noexcept { return cfg_; }

private:
    void start_meta(Round first) {
        MetaBioConfig mc = cfg_.meta;
        mc.delta = cfg_.delta / 2.0;
        bandit::BaseLearner* target = base_.get();
        if (cfg_.fresh_base) {
            fresh_ = factory_();
            target = fresh_.get();
        }
        meta_ = std::make_unique<MetaBio>(*target, S_, T_, mc, first);
    }

    std::unique_ptr<bandit::BaseLearner> base_;
    std::unique_ptr<bandit::BaseLearner> fresh_;
    std::size_t K_ = 0;
    std::size_t S_;
    std::size_t T_;
    MetaAdaConfig cfg_;
    Factory factory_;
    DelayLedger ledger_;
    std::vector<ActionId> actions_;
    std::optional<Round> switch_round_;
    std::unique_ptr<MetaBio> meta_;
    std::vector<Arrival> sorted_;
    std::vector<Arrival> post_;
};

} // namespace bio::meta
