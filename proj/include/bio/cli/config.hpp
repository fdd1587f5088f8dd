#pragma once

#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "bio/env/presets.hpp"
#include "bio/harness/policy.hpp"

namespace bio::cli {

using nlohmann::json;

// Schema violation; `path` names the offending field, e.g. "algorithms[1].delta".
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string path, const std::string& message)
        : std::runtime_error(path.empty() ? message : path + ": " + message), path_(std::move(path)) {}
    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

struct CustomEnvironment {
    std::size_t K = 0;
    std::size_t S = 0;
    env::MappingModel::Kind mapping;
    env::LossModel::Kind losses;
};

struct RunConfig {
    std::string name;                 // output prefix; derived from the experiment when empty
    std::optional<int> experiment;    // 1..5
    std::optional<CustomEnvironment> custom;
    std::size_t states = 0;           // Exp. 3 / 5 state count
    std::size_t phase_base = 100;     // Exp. 2
    std::size_t T = 10000;
    std::optional<env::DelaySchedule> delay;
    std::vector<harness::AlgorithmSpec> algorithms;
    std::size_t reps = 20;
    std::uint64_t seed = 0;
    double delta = 0.1;
    std::string out = "results";
    bool audit = false;
    bool write_traces = true;
};

namespace detail {

inline std::string join(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
}

inline void only_keys(const json& obj, const std::string& path, std::initializer_list<const char*> allowed) {
    if (!obj.is_object()) throw ConfigError(path, "expected an object");
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [k, v] : obj.items())
        if (!ok.count(k)) throw ConfigError(join(path, k), "unknown key");
}

inline double number(const json& v, const std::string& path) {
    if (!v.is_number()) throw ConfigError(path, "expected a number");
    return v.get<double>();
}

inline std::size_t count(const json& v, const std::string& path) {
    if (!v.is_number_integer() || v.get<long long>() < 0) throw ConfigError(path, "expected a non-negative integer");
    return v.get<std::size_t>();
}

inline bool boolean(const json& v, const std::string& path) {
    if (!v.is_boolean()) throw ConfigError(path, "expected true or false");
    return v.get<bool>();
}

inline std::string string(const json& v, const std::string& path) {
    if (!v.is_string()) throw ConfigError(path, "expected a string");
    return v.get<std::string>();
}

inline Matrix matrix(const json& v, const std::string& path) {
    if (!v.is_array()) throw ConfigError(path, "expected an array of rows");
    Matrix m;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const std::string p = path + "[" + std::to_string(i) + "]";
        if (!v[i].is_array()) throw ConfigError(p, "expected an array of numbers");
        std::vector<double> row;
        for (std::size_t j = 0; j < v[i].size(); ++j) row.push_back(number(v[i][j], p + "[" + std::to_string(j) + "]"));
        m.push_back(std::move(row));
    }
    return m;
}

inline std::vector<StateId> state_list(const json& v, const std::string& path) {
    if (!v.is_array()) throw ConfigError(path, "expected an array of 1-based state ids");
    std::vector<StateId> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const std::size_t s = count(v[i], path + "[" + std::to_string(i) + "]");
        if (s == 0) throw ConfigError(path + "[" + std::to_string(i) + "]", "state ids are 1-based");
        out.push_back(s - 1);
    }
    return out;
}

inline std::vector<long long> read_delay_file(const std::string& file, const std::string& path) {
    std::ifstream in(file);
    if (!in) throw ConfigError(path, "cannot read delay file '" + file + "'");
    std::vector<long long> out;
    std::string tok;
    while (in >> tok) {
        try {
            std::size_t used = 0;
            const long long v = std::stoll(tok, &used);
            if (used != tok.size()) throw std::invalid_argument(tok);
            out.push_back(v);
        } catch (const std::exception&) {
            throw ConfigError(path, "delay file '" + file + "' holds a non-integer token '" + tok + "'");
        }
    }
    return out;
}

} // namespace detail

// "fixed:50", "laplace:50:25" or "file:path".
inline env::DelaySchedule parse_delay_string(const std::string& text, const std::string& path = "delay") {
    auto fields = [&] {
        std::vector<std::string> f;
        std::stringstream ss(text);
        std::string item;
        while (std::getline(ss, item, ':')) f.push_back(item);
        return f;
    }();
    auto num = [&](const std::string& s) {
        try {
            std::size_t used = 0;
            const double v = std::stod(s, &used);
            if (used != s.size()) throw std::invalid_argument(s);
            return v;
        } catch (const std::exception&) {
            throw ConfigError(path, "'" + s + "' is not a number");
        }
    };
    if (fields.size() == 2 && fields[0] == "fixed") {
        const double d = num(fields[1]);
        if (d < 0 || d != std::floor(d)) throw ConfigError(path, "fixed delay must be a non-negative integer");
        return env::FixedDelay{static_cast<std::size_t>(d)};
    }
    if (fields.size() == 3 && fields[0] == "laplace") {
        const double scale = num(fields[2]);
        if (!(scale > 0.0)) throw ConfigError(path, "laplace scale must be positive");
        return env::LaplaceDelay{num(fields[1]), scale};
    }
    if (fields.size() >= 2 && fields[0] == "file") {
        const std::string file = text.substr(5);
        return env::ExplicitDelay{detail::read_delay_file(file, path)};
    }
    throw ConfigError(path, "expected fixed:<d>, laplace:<loc>:<scale> or file:<path>");
}

inline env::DelaySchedule parse_delay(const json& v, const std::string& path) {
    if (v.is_string()) return parse_delay_string(v.get<std::string>(), path);
    detail::only_keys(v, path, {"fixed", "laplace", "explicit", "file"});
    if (v.size() != 1) throw ConfigError(path, "exactly one delay kind expected");
    if (v.contains("fixed")) return env::FixedDelay{detail::count(v["fixed"], path + ".fixed")};
    if (v.contains("laplace")) {
        const auto& l = v["laplace"];
        if (!l.is_array() || l.size() != 2) throw ConfigError(path + ".laplace", "expected [location, scale]");
        const double scale = detail::number(l[1], path + ".laplace[1]");
        if (!(scale > 0.0)) throw ConfigError(path + ".laplace[1]", "scale must be positive");
        return env::LaplaceDelay{detail::number(l[0], path + ".laplace[0]"), scale};
    }
    if (v.contains("file"))
        return env::ExplicitDelay{detail::read_delay_file(detail::string(v["file"], path + ".file"), path + ".file")};
    const auto& e = v["explicit"];
    if (!e.is_array()) throw ConfigError(path + ".explicit", "expected an array of integers");
    std::vector<long long> seq;
    for (std::size_t i = 0; i < e.size(); ++i) {
        const std::string p = path + ".explicit[" + std::to_string(i) + "]";
        if (!e[i].is_number_integer()) throw ConfigError(p, "expected an integer");
        seq.push_back(e[i].get<long long>());
    }
    return env::ExplicitDelay{std::move(seq)};
}

inline harness::AlgorithmSpec parse_algorithm(const json& v, const std::string& path) {
    using namespace harness;
    if (v.is_string()) {
        try {
            return algorithm_preset(v.get<std::string>());
        } catch (const ArgumentError& e) {
            throw ConfigError(path, e.what());
        }
    }
    detail::only_keys(v, path,
                      {"name", "label", "base", "delta", "skipping", "c_skip", "threshold", "fixed_delay", "estimator",
                       "anytime", "sigma", "switching", "fresh_base"});
    if (!v.contains("name")) throw ConfigError(path + ".name", "required");
    AlgorithmSpec s;
    try {
        s = algorithm_preset(detail::string(v["name"], path + ".name"));
    } catch (const ArgumentError& e) {
        throw ConfigError(path + ".name", e.what());
    }
    if (v.contains("label")) s.label = detail::string(v["label"], path + ".label");
    if (v.contains("base")) {
        const auto b = detail::string(v["base"], path + ".base");
        if (b == "dadaexp3") s.base = BaseKind::dadaexp3;
        else if (b == "tsallis") s.base = BaseKind::tsallis;
        else if (b == "ucb1") s.base = BaseKind::ucb1;
        else if (b == "uniform") s.base = BaseKind::uniform;
        else throw ConfigError(path + ".base", "expected dadaexp3, tsallis, ucb1 or uniform");
    }
    if (v.contains("delta")) {
        const double d = detail::number(v["delta"], path + ".delta");
        if (!(d > 0.0 && d < 1.0)) throw ConfigError(path + ".delta", "must lie in (0, 1)");
        s.delta = d;
    }
    if (v.contains("skipping")) s.skipping = detail::boolean(v["skipping"], path + ".skipping");
    if (v.contains("c_skip")) {
        s.c_skip = detail::number(v["c_skip"], path + ".c_skip");
        if (!(s.c_skip >= 0.0)) throw ConfigError(path + ".c_skip", "must be >= 0");
    }
    if (v.contains("threshold")) {
        const auto t = detail::string(v["threshold"], path + ".threshold");
        if (t == "auto") s.threshold = ThresholdChoice::automatic;
        else if (t == "fixed") s.threshold = ThresholdChoice::fixed;
        else if (t == "adaptive") s.threshold = ThresholdChoice::adaptive;
        else throw ConfigError(path + ".threshold", "expected auto, fixed or adaptive");
    }
    if (v.contains("fixed_delay")) s.fixed_delay = detail::count(v["fixed_delay"], path + ".fixed_delay");
    if (v.contains("estimator")) {
        const auto e = detail::string(v["estimator"], path + ".estimator");
        if (e == "lower-confidence") s.estimator = meta::Estimator::lower_confidence;
        else if (e == "empirical-mean") s.estimator = meta::Estimator::empirical_mean;
        else throw ConfigError(path + ".estimator", "expected lower-confidence or empirical-mean");
    }
    if (v.contains("anytime")) s.anytime = detail::boolean(v["anytime"], path + ".anytime");
    if (v.contains("sigma")) {
        const auto e = detail::string(v["sigma"], path + ".sigma");
        if (e == "through-round") s.sigma = meta::SigmaVariant::through_round;
        else if (e == "before-round") s.sigma = meta::SigmaVariant::before_round;
        else throw ConfigError(path + ".sigma", "expected through-round or before-round");
    }
    if (v.contains("switching")) {
        try {
            s.switch_mode = meta::parse_switch_mode(detail::string(v["switching"], path + ".switching"));
        } catch (const ArgumentError& e) {
            throw ConfigError(path + ".switching", e.what());
        }
    }
    if (v.contains("fresh_base")) s.fresh_base = detail::boolean(v["fresh_base"], path + ".fresh_base");
    if (s.kind == AlgorithmKind::nsd_ucrl2) throw ConfigError(path + ".name", "nsd-ucrl2 is not implemented");
    return s;
}

inline CustomEnvironment parse_environment(const json& v, const std::string& path) {
    detail::only_keys(v, path, {"K", "S", "mapping", "losses"});
    for (const char* k : {"K", "S", "mapping", "losses"})
        if (!v.contains(k)) throw ConfigError(detail::join(path, k), "required");
    CustomEnvironment c;
    c.K = detail::count(v["K"], path + ".K");
    c.S = detail::count(v["S"], path + ".S");
    if (c.K < 2) throw ConfigError(path + ".K", "must be >= 2");
    if (c.S < 2) throw ConfigError(path + ".S", "must be >= 2");

    const std::string mp = path + ".mapping";
    const auto& m = v["mapping"];
    detail::only_keys(m, mp, {"preset", "matrix", "phases", "table"});
    if (m.size() != 1) throw ConfigError(mp, "exactly one mapping kind expected");
    try {
        if (m.contains("preset")) {
            c.mapping = env::StochasticMapping{env::presets::named_mapping(detail::string(m["preset"], mp + ".preset"))};
        } else if (m.contains("matrix")) {
            c.mapping = env::StochasticMapping{detail::matrix(m["matrix"], mp + ".matrix")};
        } else if (m.contains("table")) {
            env::TableMapping tm;
            const auto& rows = m["table"];
            if (!rows.is_array()) throw ConfigError(mp + ".table", "expected one row of states per round");
            for (std::size_t i = 0; i < rows.size(); ++i)
                tm.rounds.push_back(detail::state_list(rows[i], mp + ".table[" + std::to_string(i) + "]"));
            c.mapping = std::move(tm);
        } else {
            env::PhasedMapping pm;
            const auto& ph = m["phases"];
            if (!ph.is_array()) throw ConfigError(mp + ".phases", "expected an array of phases");
            for (std::size_t i = 0; i < ph.size(); ++i) {
                const std::string pp = mp + ".phases[" + std::to_string(i) + "]";
                detail::only_keys(ph[i], pp, {"length", "matrix", "preset", "states"});
                if (!ph[i].contains("length")) throw ConfigError(pp + ".length", "required");
                env::MappingPhase phase;
                phase.length = detail::count(ph[i]["length"], pp + ".length");
                if (ph[i].contains("matrix")) phase.rows = detail::matrix(ph[i]["matrix"], pp + ".matrix");
                else if (ph[i].contains("preset"))
                    phase.rows = env::presets::named_mapping(detail::string(ph[i]["preset"], pp + ".preset"));
                else if (ph[i].contains("states")) phase.rows = detail::state_list(ph[i]["states"], pp + ".states");
                else throw ConfigError(pp, "one of matrix, preset or states required");
                pm.phases.push_back(std::move(phase));
            }
            c.mapping = std::move(pm);
        }
    } catch (const ArgumentError& e) {
        throw ConfigError(mp, e.what());
    }

    const std::string lp = path + ".losses";
    const auto& l = v["losses"];
    detail::only_keys(l, lp, {"preset", "bernoulli", "table"});
    if (l.size() != 1) throw ConfigError(lp, "exactly one loss kind expected");
    try {
        if (l.contains("preset")) c.losses = env::BernoulliLosses{env::presets::named_theta(detail::string(l["preset"], lp + ".preset"))};
        else if (l.contains("bernoulli")) {
            const auto& b = l["bernoulli"];
            if (!b.is_array()) throw ConfigError(lp + ".bernoulli", "expected an array of means");
            std::vector<double> theta;
            for (std::size_t i = 0; i < b.size(); ++i)
                theta.push_back(detail::number(b[i], lp + ".bernoulli[" + std::to_string(i) + "]"));
            c.losses = env::BernoulliLosses{std::move(theta)};
        } else {
            c.losses = env::TableLosses{detail::matrix(l["table"], lp + ".table")};
        }
    } catch (const ArgumentError& e) {
        throw ConfigError(lp, e.what());
    }
    return c;
}

// Checks that every explicit raw delay already satisfies 0 <= d_t <= T - t.
inline void check_explicit_delays(const env::DelaySchedule& d, std::size_t T, const std::string& path) {
    const auto* e = std::get_if<env::ExplicitDelay>(&d);
    if (!e) return;
    if (e->sequence.size() < T)
        throw ConfigError(path, "explicit delay sequence has " + std::to_string(e->sequence.size()) +
                                    " entries, T = " + std::to_string(T));
    for (std::size_t i = 0; i < T; ++i) {
        const long long v = e->sequence[i];
        if (v < 0 || static_cast<std::size_t>(v) > T - (i + 1))
            throw ConfigError(path + "[" + std::to_string(i) + "]",
                              "d_" + std::to_string(i + 1) + " = " + std::to_string(v) + " violates 0 <= d_t <= T - t");
    }
}

inline RunConfig parse_config(const json& j) {
    detail::only_keys(j, "", {"name", "experiment", "states", "phase_base", "environment", "T", "delay", "algorithms",
                               "reps", "seed", "delta", "out", "audit", "write_traces"});
    RunConfig c;
    if (j.contains("name")) c.name = detail::string(j["name"], "name");
    if (j.contains("experiment")) {
        const std::size_t id = detail::count(j["experiment"], "experiment");
        if (id < 1 || id > 5) throw ConfigError("experiment", "must be in 1..5");
        c.experiment = static_cast<int>(id);
    }
    if (j.contains("environment")) c.custom = parse_environment(j["environment"], "environment");
    if (c.experiment.has_value() == c.custom.has_value())
        throw ConfigError("", "exactly one of 'experiment' and 'environment' is required");
    if (j.contains("states")) {
        c.states = detail::count(j["states"], "states");
        if (c.states < 2) throw ConfigError("states", "must be >= 2");
        if (!c.experiment || (*c.experiment != 3 && *c.experiment != 5))
            throw ConfigError("states", "only applies to experiments 3 and 5");
    }
    if (j.contains("phase_base")) {
        c.phase_base = detail::count(j["phase_base"], "phase_base");
        if (c.phase_base < 1) throw ConfigError("phase_base", "must be >= 1");
    }
    if (j.contains("T")) c.T = detail::count(j["T"], "T");
    if (c.T < 1) throw ConfigError("T", "must be >= 1");
    if (j.contains("delay")) {
        c.delay = parse_delay(j["delay"], "delay");
        check_explicit_delays(*c.delay, c.T, "delay");
    } else if (c.custom) {
        throw ConfigError("delay", "required for a custom environment");
    }
    if (j.contains("algorithms")) {
        const auto& a = j["algorithms"];
        if (!a.is_array() || a.empty()) throw ConfigError("algorithms", "expected a non-empty array");
        std::set<std::string> labels;
        for (std::size_t i = 0; i < a.size(); ++i) {
            const std::string p = "algorithms[" + std::to_string(i) + "]";
            auto spec = parse_algorithm(a[i], p);
            if (!labels.insert(spec.label).second) throw ConfigError(p, "duplicate label '" + spec.label + "'");
            c.algorithms.push_back(std::move(spec));
        }
    } else if (c.custom) {
        throw ConfigError("algorithms", "required for a custom environment");
    }
    if (j.contains("reps")) c.reps = detail::count(j["reps"], "reps");
    if (c.reps < 1) throw ConfigError("reps", "must be >= 1");
    if (j.contains("seed")) c.seed = detail::count(j["seed"], "seed");
    if (j.contains("delta")) c.delta = detail::number(j["delta"], "delta");
    if (!(c.delta > 0.0 && c.delta < 1.0)) throw ConfigError("delta", "must lie in (0, 1)");
    if (j.contains("out")) c.out = detail::string(j["out"], "out");
    if (j.contains("audit")) c.audit = detail::boolean(j["audit"], "audit");
    if (j.contains("write_traces")) c.write_traces = detail::boolean(j["write_traces"], "write_traces");

    if (c.custom) {
        // surface model errors (row sums, sizes, coverage) before any computation
        try {
            env::Environment probe("custom", c.T, env::MappingModel(c.custom->K, c.custom->S, c.custom->mapping),
                                   env::LossModel(c.custom->S, c.custom->losses), *c.delay);
        } catch (const ArgumentError& e) {
            throw ConfigError("environment", e.what());
        }
    }
    return c;
}

inline RunConfig load_config(const std::string& file) {
    std::ifstream in(file);
    if (!in) throw ConfigError("", "cannot open config '" + file + "'");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("", std::string("malformed JSON: ") + e.what());
    }
    return parse_config(j);
}

} // namespace bio::cli
