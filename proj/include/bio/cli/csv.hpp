#pragma once

#include <charconv>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "bio/harness/episode.hpp"

namespace bio::cli {

inline constexpr const char* kTraceHeader =
    "rep,t,algo,action,state,loss,delay,actual_delay,sigma,cum_regret_mean,cum_regret_realized";
inline constexpr const char* kSummaryHeader = "t,algo,mean,std,n_reps";
inline constexpr const char* kEpisodeHeader =
    "rep,algo,final_regret_mean,final_regret_realized,switch_round,actual_delay_total,d_phi,sigma_max,seed";

// Shortest decimal that parses back to the same double.
inline std::string format_double(double v) {
    if (v == 0.0) return "0"; // folds -0
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

class CsvWriter {
public:
    explicit CsvWriter(const std::filesystem::path& file) : out_(file, std::ios::binary) {
        if (!out_) throw std::runtime_error("cannot write '" + file.string() + "'");
    }
    template <class... Fields>
    void row(const Fields&... fields) {
        bool first = true;
        ((put(fields, first)), ...);
        out_ << '\n';
    }
    void line(const std::string& s) { out_ << s << '\n'; }

private:
    void sep(bool& first) {
        if (!first) out_ << ',';
        first = false;
    }
    void put(const std::string& s, bool& first) {
        sep(first);
        out_ << s;
    }
    void put(const char* s, bool& first) {
        sep(first);
        out_ << s;
    }
    void put(double v, bool& first) {
        sep(first);
        out_ << format_double(v);
    }
    template <class I>
        requires std::is_integral_v<I>
    void put(I v, bool& first) {
        sep(first);
        out_ << v;
    }

    std::ofstream out_;
};

// Actions and states are written 1-based.
inline void write_trace_csv(const std::filesystem::path& file, const harness::AggregateResult& agg) {
    CsvWriter w(file);
    w.line(kTraceHeader);
    for (std::size_t rep = 0; rep < agg.traces.size(); ++rep)
        for (const auto& r : agg.traces[rep].rows)
            w.row(rep + 1, r.t, agg.algo, r.action + 1, r.state + 1, r.loss, r.delay, r.actual_delay, r.sigma,
                  r.cum_regret_mean, r.cum_regret_realized);
}

inline void write_summary_csv(const std::filesystem::path& file, const std::vector<harness::AggregateResult>& results) {
    CsvWriter w(file);
    w.line(kSummaryHeader);
    for (const auto& agg : results)
        for (std::size_t i = 0; i < agg.mean.size(); ++i) w.row(i + 1, agg.algo, agg.mean[i], agg.std[i], agg.n_reps);
}

inline void write_episode_csv(const std::filesystem::path& file, const std::vector<harness::AggregateResult>& results) {
    CsvWriter w(file);
    w.line(kEpisodeHeader);
    for (const auto& agg : results)
        for (std::size_t i = 0; i < agg.n_reps; ++i)
            w.row(i + 1, agg.algo, agg.final_mean_regret[i], agg.final_realized_regret[i],
                  agg.switch_rounds[i] ? std::to_string(*agg.switch_rounds[i]) : std::string(),
                  agg.actual_delay_totals[i], agg.d_phis[i], agg.sigma_maxes[i], agg.seeds[i]);
}

} // namespace bio::cli
