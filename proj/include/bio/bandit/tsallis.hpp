#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "bio/bandit/learner.hpp"

namespace bio::bandit {

inline constexpr int kTsallisMaxIterations = 200;

// 1/2-Tsallis FTRL step: p(a) = 4 (eta (L(a) - z))^-2 with z chosen so that sum p = 1.
// f(z) = sum p - 1 is increasing and convex on z < min L, and the root lies in
// [min L - 2 sqrt(K) / eta, min L - 2 / eta]. At the right end f >= 0, so Newton
// started there decreases monotonically onto the root and never crosses the pole.
inline std::vector<double> tsallis_inf_distribution(std::span<const double> cum_loss, double eta,
                                                    double tol = 1e-12) {
    if (!(eta > 0.0)) throw ArgumentError("tsallis-inf: eta must be positive");
    if (!(tol > 0.0)) throw ArgumentError("tsallis-inf: tolerance must be positive");
    if (cum_loss.size() < 2) throw ArgumentError("tsallis-inf: need at least two actions");
    double lo = std::numeric_limits<double>::infinity();
    for (double v : cum_loss) {
        if (!std::isfinite(v)) throw InternalError("tsallis-inf: non-finite cumulative loss");
        lo = std::min(lo, v);
    }
    const std::size_t K = cum_loss.size();
    // shift so that min L = 0; p depends only on differences
    std::vector<double> x(K);
    for (std::size_t a = 0; a < K; ++a) x[a] = cum_loss[a] - lo;

    double z = -2.0 / eta;
    std::vector<double> p(K);
    for (int it = 0;; ++it) {
        double f = -1.0;
        double df = 0.0;
        for (std::size_t a = 0; a < K; ++a) {
            const double u = eta * (x[a] - z);
            p[a] = 4.0 / (u * u);
            f += p[a];
            df += 2.0 * eta * p[a] / u;
        }
        if (std::abs(f) <= tol) break;
        const double next = z - f / df;
        if (!(next < z)) break; // no progress left at double precision
        if (it + 1 >= kTsallisMaxIterations) throw InternalError("tsallis-inf: Newton iteration did not converge");
        z = next;
    }
    double total = 0.0;
    for (double v : p) total += v;
    for (double& v : p) v /= total;
    return p;
}

// Plain importance weighting with the snapshot p_j; eta_t = 1 / sqrt(t).
class TsallisInf final : public LearnerBase {
public:
    TsallisInf(std::size_t K, std::uint64_t seed, double tol = 1e-12) : LearnerBase(K), rng_(seed), tol_(tol), cum_loss_(K, 0.0) {}

    const PolicySnapshot& next_action(Round t) override {
        PolicySnapshot& snap = begin_round(t);
        snap.eta = 1.0 / std::sqrt(static_cast<double>(local_round()));
        snap.gamma = 0.0;
        snap.p = tsallis_inf_distribution(cum_loss_, snap.eta, tol_);
        snap.action = sample_index(snap.p, rng_);
        return snap;
    }

    void feed(Round j, ActionId a, double loss) override {
        const PolicySnapshot& snap = accept_feed(j, a, loss);
        cum_loss_[a] += importance_weight(loss, snap.p[a]);
    }

    std::string name() const override { return "tsallis"; }
    std::span<const double> cumulative_estimates() const noexcept { return cum_loss_; }

private:
    static double importance_weight(double loss, double p) {
        if (!(p > 0.0)) throw InternalError("tsallis-inf: zero probability for the played action");
        return loss / p;
    }

    Rng rng_;
    double tol_;
    std::vector<double> cum_loss_;
};

} // namespace bio::bandit
