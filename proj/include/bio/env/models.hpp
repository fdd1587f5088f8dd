#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "bio/core/rng.hpp"
#include "bio/core/types.hpp"

namespace bio::env {

inline constexpr double kRowSumTolerance = 1e-12;

// ---------------------------------------------------------------------------
// Action -> state mappings
// ---------------------------------------------------------------------------

// Fixed P(s | a), one K x S row-stochastic matrix for the whole episode.
struct StochasticMapping {
    Matrix probabilities;
};

// One state per action.
using StateAssignment = std::vector<StateId>;

struct MappingPhase {
    std::size_t length = 0;
    std::variant<Matrix, StateAssignment> rows;
};

// Piecewise-constant schedule; phase i covers `length` consecutive rounds.
struct PhasedMapping {
    std::vector<MappingPhase> phases;
};

// Explicit per-round assignment: rounds[t - 1][a] = s_t(a).
struct TableMapping {
    std::vector<StateAssignment> rounds;
};

namespace detail {

inline void check_row_stochastic(const Matrix& m, std::size_t K, std::size_t S, const char* what) {
    if (m.size() != K) throw ArgumentError(std::string(what) + ": expected " + std::to_string(K) + " rows");
    for (std::size_t a = 0; a < K; ++a) {
        if (m[a].size() != S)
            throw ArgumentError(std::string(what) + ": row " + std::to_string(a) + " must have " +
                                std::to_string(S) + " entries");
        double sum = 0.0;
        for (double p : m[a]) {
            if (!(p >= 0.0) || !std::isfinite(p))
                throw ArgumentError(std::string(what) + ": negative or non-finite probability in row " +
                                    std::to_string(a));
            sum += p;
        }
        if (std::abs(sum - 1.0) > kRowSumTolerance)
            throw ArgumentError(std::string(what) + ": row " + std::to_string(a) + " sums to " +
                                std::to_string(sum));
    }
}

inline void check_assignment(const StateAssignment& row, std::size_t K, std::size_t S, const char* what) {
    if (row.size() != K) throw ArgumentError(std::string(what) + ": expected one state per action");
    for (StateId s : row)
        if (s >= S) throw ArgumentError(std::string(what) + ": state index out of range");
}

} // namespace detail

class MappingModel {
public:
    using Kind = std::variant<StochasticMapping, PhasedMapping, TableMapping>;

    static constexpr std::size_t kUnbounded = std::numeric_limits<std::size_t>::max();

    MappingModel(std::size_t actions, std::size_t states, Kind kind)
        : K_(actions), S_(states), kind_(std::move(kind)) {
        if (K_ < 2) throw ArgumentError("mapping: K must be >= 2");
        if (S_ < 2) throw ArgumentError("mapping: S must be >= 2");
        std::visit([this](const auto& m) { validate(m); }, kind_);
    }

    std::size_t actions() const noexcept { return K_; }
    std::size_t states() const noexcept { return S_; }
    const Kind& kind() const noexcept { return kind_; }

    // Number of rounds the model defines.
    std::size_t coverage() const {
        if (std::holds_alternative<StochasticMapping>(kind_)) return kUnbounded;
        if (const auto* t = std::get_if<TableMapping>(&kind_)) return t->rounds.size();
        std::size_t total = 0;
        for (const auto& ph : std::get<PhasedMapping>(kind_).phases) total += ph.length;
        return total;
    }

    bool deterministic_at(Round t) const { return row_at(0, t).probabilities == nullptr; }

    // The active row for action a at round t: either a distribution or a single state.
    struct Row {
        const std::vector<double>* probabilities = nullptr;
        StateId state = 0;
    };

    Row row_at(ActionId a, Round t) const {
        if (a >= K_) throw ArgumentError("mapping: action out of range");
        if (t == 0 || t > coverage()) throw ArgumentError("mapping: round out of range");
        if (const auto* sm = std::get_if<StochasticMapping>(&kind_)) return {&sm->probabilities[a], 0};
        if (const auto* tm = std::get_if<TableMapping>(&kind_)) return {nullptr, tm->rounds[t - 1][a]};
        const auto& phases = std::get<PhasedMapping>(kind_).phases;
        std::size_t start = 1;
        for (const auto& ph : phases) {
            if (t < start + ph.length) {
                if (const auto* m = std::get_if<Matrix>(&ph.rows)) return {&(*m)[a], 0};
                return {nullptr, std::get<StateAssignment>(ph.rows)[a]};
            }
            start += ph.length;
        }
        throw InternalError("mapping: phase lookup fell through");
    }

    // P_t(. | a), a point mass for deterministic rows.
    std::vector<double> distribution(ActionId a, Round t) const {
        const Row row = row_at(a, t);
        if (row.probabilities) return *row.probabilities;
        std::vector<double> p(S_, 0.0);
        p[row.state] = 1.0;
        return p;
    }

private:
    void validate(const StochasticMapping& m) const {
        detail::check_row_stochastic(m.probabilities, K_, S_, "stochastic mapping");
    }
    void validate(const PhasedMapping& m) const {
        if (m.phases.empty()) throw ArgumentError("phased mapping: no phases");
        for (const auto& ph : m.phases) {
            if (ph.length == 0) throw ArgumentError("phased mapping: phase lengths must be positive");
            if (const auto* mat = std::get_if<Matrix>(&ph.rows))
                detail::check_row_stochastic(*mat, K_, S_, "phased mapping");
            else
                detail::check_assignment(std::get<StateAssignment>(ph.rows), K_, S_, "phased mapping");
        }
    }
    void validate(const TableMapping& m) const {
        for (const auto& row : m.rounds) detail::check_assignment(row, K_, S_, "table mapping");
    }

    std::size_t K_;
    std::size_t S_;
    Kind kind_;
};

inline StateId sample_state(const MappingModel& mapping, ActionId a, Round t, Rng& rng) {
    const auto row = mapping.row_at(a, t);
    if (!row.probabilities) return row.state;
    return sample_index(*row.probabilities, rng);
}

// ---------------------------------------------------------------------------
// State -> loss models
// ---------------------------------------------------------------------------

// ell_t(s) ~ Bernoulli(theta(s)), independent across states and rounds.
struct BernoulliLosses {
    std::vector<double> theta;
};

// Any bounded distribution with mean theta(s); draw(s, rng) must return a value in [0, 1].
struct GeneralLosses {
    std::vector<double> theta;
    std::function<double(StateId, Rng&)> draw;
};

// Oblivious adversary: table[t - 1][s] = ell_t(s).
struct TableLosses {
    Matrix table;
};

// Block-coupled Bernoulli losses: within block i every state of group g shares one
// draw X^g_i ~ Bernoulli(group_mean[g]). States without a group and rounds after the
// last full block have loss 0.
struct BlockLosses {
    std::size_t block_length = 1;
    std::size_t blocks = 0;
    std::vector<std::optional<std::size_t>> group_of_state;
    std::vector<double> group_mean;
};

class LossModel {
public:
    using Kind = std::variant<BernoulliLosses, GeneralLosses, TableLosses, BlockLosses>;

    LossModel(std::size_t states, Kind kind) : S_(states), kind_(std::move(kind)) {
        std::visit([this](const auto& m) { validate(m); }, kind_);
    }

    std::size_t states() const noexcept { return S_; }
    const Kind& kind() const noexcept { return kind_; }

    std::size_t coverage() const {
        if (const auto* t = std::get_if<TableLosses>(&kind_)) return t->table.size();
        return MappingModel::kUnbounded;
    }

    // Benchmark loss of state s at round t: theta(s) for stochastic models,
    // the realised value for adversarial tables.
    double mean(Round t, StateId s) const {
        if (s >= S_) throw ArgumentError("losses: state out of range");
        if (const auto* b = std::get_if<BernoulliLosses>(&kind_)) return b->theta[s];
        if (const auto* g = std::get_if<GeneralLosses>(&kind_)) return g->theta[s];
        if (const auto* tb = std::get_if<TableLosses>(&kind_)) return tb->table.at(t - 1)[s];
        const auto& bl = std::get<BlockLosses>(kind_);
        if (t > bl.blocks * bl.block_length || !bl.group_of_state[s]) return 0.0;
        return bl.group_mean[*bl.group_of_state[s]];
    }

    // theta when losses are i.i.d. per state across rounds.
    std::optional<std::vector<double>> stationary_means() const {
        if (const auto* b = std::get_if<BernoulliLosses>(&kind_)) return b->theta;
        if (const auto* g = std::get_if<GeneralLosses>(&kind_)) return g->theta;
        return std::nullopt;
    }

private:
    static void check_unit(double v, const char* what) {
        if (!(v >= 0.0 && v <= 1.0)) throw ArgumentError(std::string(what) + ": values must lie in [0, 1]");
    }
    void check_theta(const std::vector<double>& theta, const char* what) const {
        if (theta.size() != S_) throw ArgumentError(std::string(what) + ": theta must have S entries");
        for (double v : theta) check_unit(v, what);
    }
    void validate(const BernoulliLosses& m) const { check_theta(m.theta, "bernoulli losses"); }
    void validate(const GeneralLosses& m) const {
        check_theta(m.theta, "general losses");
        if (!m.draw) throw ArgumentError("general losses: missing draw function");
    }
    void validate(const TableLosses& m) const {
        for (const auto& row : m.table) {
            if (row.size() != S_) throw ArgumentError("loss table: rows must have S entries");
            for (double v : row) check_unit(v, "loss table");
        }
    }
    void validate(const BlockLosses& m) const {
        if (m.block_length == 0) throw ArgumentError("block losses: block length must be positive");
        if (m.group_of_state.size() != S_) throw ArgumentError("block losses: one group entry per state");
        for (const auto& g : m.group_of_state)
            if (g && *g >= m.group_mean.size()) throw ArgumentError("block losses: group out of range");
        for (double v : m.group_mean) check_unit(v, "block losses");
    }

    std::size_t S_;
    Kind kind_;
};

// ---------------------------------------------------------------------------
// Delays
// ---------------------------------------------------------------------------

struct FixedDelay {
    std::size_t d = 0;
};

// Real-valued Laplace draws rounded to the nearest integer.
struct LaplaceDelay {
    double location = 50.0;
    double scale = 25.0;
};

// sequence[t - 1] is the raw delay of round t; negative entries clamp to 0.
struct ExplicitDelay {
    std::vector<long long> sequence;
};

using DelaySchedule = std::variant<FixedDelay, LaplaceDelay, ExplicitDelay>;

// Realised d_t, always clamped into [0, T - t].
inline std::size_t sample_delay(const DelaySchedule& schedule, Round t, std::size_t T, Rng& rng) {
    if (t == 0 || t > T) throw ArgumentError("sample_delay: round out of range");
    const long long cap = static_cast<long long>(T - t);
    long long raw = 0;
    if (const auto* f = std::get_if<FixedDelay>(&schedule)) {
        raw = static_cast<long long>(f->d);
    } else if (const auto* l = std::get_if<LaplaceDelay>(&schedule)) {
        raw = std::llround(laplace(l->location, l->scale, rng));
    } else {
        const auto& seq = std::get<ExplicitDelay>(schedule).sequence;
        if (seq.size() < T) throw ArgumentError("explicit delays: sequence shorter than horizon");
        raw = seq[t - 1];
    }
    return static_cast<std::size_t>(std::clamp(raw, 0LL, cap));
}

inline bool is_fixed(const DelaySchedule& schedule) {
    return std::holds_alternative<FixedDelay>(schedule);
}

// Short tag used in output file names: d50, laplace50_25, explicit.
inline std::string delay_tag(const DelaySchedule& schedule) {
    auto num = [](double v) {
        if (v == std::floor(v)) return std::to_string(static_cast<long long>(v));
        std::string s = std::to_string(v);
        while (!s.empty() && s.back() == '0') s.pop_back();
        std::replace(s.begin(), s.end(), '.', 'p');
        return s;
    };
    if (const auto* f = std::get_if<FixedDelay>(&schedule)) return "d" + std::to_string(f->d);
    if (const auto* l = std::get_if<LaplaceDelay>(&schedule))
        return "laplace" + num(l->location) + "_" + num(l->scale);
    return "explicit";
}

} // namespace bio::env
