#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "bio/bandit/learner.hpp"

namespace bio::bandit {

// eta_t = sqrt((2 ln K + ln(K / delta')) / (2 K t + cum)); gamma_t = eta_t.
inline double dadaexp3_learning_rate(Round t, std::size_t K, double cum_outstanding, double delta_prime) {
    if (K < 2) throw ArgumentError("dadaexp3 learning rate: K must be >= 2");
    if (t < 1) throw ArgumentError("dadaexp3 learning rate: t must be >= 1");
    if (!(cum_outstanding >= 0.0)) throw ArgumentError("dadaexp3 learning rate: cumulative count must be >= 0");
    if (!(delta_prime > 0.0 && delta_prime < 1.0)) throw ArgumentError("dadaexp3 learning rate: delta' must lie in (0, 1)");
    const double k = static_cast<double>(K);
    const double num = 2.0 * std::log(k) + std::log(k / delta_prime);
    return std::sqrt(num / (2.0 * k * static_cast<double>(t) + cum_outstanding));
}

// p(a) proportional to exp(-eta (L(a) - min L)).
inline std::vector<double> exp_weights_distribution(std::span<const double> cum_loss, double eta) {
    if (!(eta > 0.0)) throw ArgumentError("exp weights: eta must be positive");
    if (cum_loss.empty()) throw ArgumentError("exp weights: empty loss vector");
    double lo = std::numeric_limits<double>::infinity();
    for (double v : cum_loss) {
        if (!std::isfinite(v)) throw InternalError("exp weights: non-finite cumulative loss");
        lo = std::min(lo, v);
    }
    std::vector<double> p(cum_loss.size());
    double z = 0.0;
    for (std::size_t a = 0; a < p.size(); ++a) {
        p[a] = std::exp(-eta * (cum_loss[a] - lo));
        z += p[a];
    }
    for (double& v : p) v /= z;
    return p;
}

// Implicit-exploration estimate for the played action; zero elsewhere.
inline double ix_value(double loss, double p_action, double gamma) {
    const double denom = p_action + gamma;
    if (!(denom > 0.0)) throw InternalError("ix estimate: p(A) + gamma is zero");
    return loss / denom;
}

inline std::vector<double> ix_estimate(double loss, const PolicySnapshot& snap) {
    std::vector<double> est(snap.p.size(), 0.0);
    est[snap.action] = ix_value(loss, snap.p[snap.action], snap.gamma);
    return est;
}

// Skip iff delay > c_skip * sqrt(max(1, kept_delay_sum) / ln K).
inline bool skipping_filter(double delay, double kept_delay_sum, std::size_t K, double c_skip = 1.0) {
    if (K < 2) throw ArgumentError("skipping filter: K must be >= 2");
    if (std::isinf(c_skip)) return false;
    const double threshold = c_skip * std::sqrt(std::max(1.0, kept_delay_sum) / std::log(static_cast<double>(K)));
    return delay > threshold;
}

struct DadaExp3Config {
    double delta_prime = 0.1;
    bool skipping = false;
    double c_skip = 1.0;
};

// Exponential weights over cumulative IX estimates of the feeds received so far,
// with the delay-adaptive learning rate above. The cumulative count adds the
// begin-of-round outstanding count of every played round, including the current one.
class DadaExp3 final : public LearnerBase {
public:
    DadaExp3(std::size_t K, DadaExp3Config cfg, std::uint64_t seed)
        : LearnerBase(K), cfg_(cfg), rng_(seed), cum_loss_(K, 0.0) {
        if (!(cfg_.delta_prime > 0.0 && cfg_.delta_prime < 1.0))
            throw ArgumentError("dadaexp3: delta' must lie in (0, 1)");
        if (!(cfg_.c_skip >= 0.0)) throw ArgumentError("dadaexp3: c_skip must be >= 0");
    }

    const PolicySnapshot& next_action(Round t) override {
        const std::size_t begin_outstanding = outstanding();
        PolicySnapshot& snap = begin_round(t);
        cum_outstanding_ += static_cast<double>(begin_outstanding);
        snap.eta = dadaexp3_learning_rate(local_round(), K_, cum_outstanding_, cfg_.delta_prime);
        snap.gamma = snap.eta;
        snap.p = exp_weights_distribution(cum_loss_, snap.eta);
        snap.action = sample_index(snap.p, rng_);
        return snap;
    }

    void feed(Round j, ActionId a, double loss) override {
        const PolicySnapshot& snap = accept_feed(j, a, loss);
        const double delay = static_cast<double>(current_round() - j);
        if (cfg_.skipping && skipping_filter(delay, kept_delay_sum_, K_, cfg_.c_skip)) {
            skipped_.push_back(j);
            // a skipped round stops counting towards the rate: remove the
            // begin-of-round contributions it made while outstanding
            cum_outstanding_ = std::max(0.0, cum_outstanding_ - delay);
            return;
        }
        kept_delay_sum_ += delay;
        cum_loss_[a] += ix_value(loss, snap.p[a], snap.gamma);
    }

    std::string name() const override { return cfg_.skipping ? "dadaexp3-skip" : "dadaexp3"; }

    std::span<const double> cumulative_estimates() const noexcept { return cum_loss_; }
    double cumulative_outstanding() const noexcept { return cum_outstanding_; }
    double kept_delay_sum() const noexcept { return kept_delay_sum_; }
    const std::vector<Round>& skipped_rounds() const noexcept { return skipped_; }
    const DadaExp3Config& config() const noexcept { return cfg_; }

private:
    DadaExp3Config cfg_;
    Rng rng_;
    std::vector<double> cum_loss_;
    double cum_outstanding_ = 0.0;
    double kept_delay_sum_ = 0.0;
    std::vector<Round> skipped_;
};

// Uniform-random reference policy.
class UniformLearner final : public LearnerBase {
public:
    UniformLearner(std::size_t K, std::uint64_t seed) : LearnerBase(K), rng_(seed), p_(K, 1.0 / static_cast<double>(K)) {}

    const PolicySnapshot& next_action(Round t) override {
        PolicySnapshot& snap = begin_round(t);
        snap.p = p_;
        snap.eta = 1.0;
        snap.action = sample_index(p_, rng_);
        return snap;
    }
    void feed(Round j, ActionId a, double loss) override { accept_feed(j, a, loss); }
    std::string name() const override { return "uniform"; }

private:
    Rng rng_;
    std::vector<double> p_;
};

} // namespace bio::bandit
