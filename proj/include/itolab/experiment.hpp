#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>  // vendored single-header nlohmann/json

#include "itolab/catalog.hpp"
#include "itolab/derivatives.hpp"
#include "itolab/itoverify.hpp"
#include "itolab/path_io.hpp"
#include "itolab/simulate.hpp"

namespace itolab {

/// A defect in the experiment description itself: unknown key, malformed
/// value, unknown functional id. Maps to exit code 2 at the command line.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Failure to read an input or write an artifact. Exit code 3.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Flat key-value experiment description. Section headers in the file form
/// become dotted prefixes ("[gen]" + "kind = bm" -> "gen.kind = bm"), so the
/// whole configuration is one sorted map and hashes canonically.
struct ExperimentConfig {
    std::map<std::string, std::string> entries;

    bool operator==(const ExperimentConfig&) const = default;

    bool has(const std::string& key) const { return entries.count(key) != 0; }

    std::string get(const std::string& key, const std::string& fallback) const {
        auto it = entries.find(key);
        return it == entries.end() ? fallback : it->second;
    }

    std::string require(const std::string& key) const {
        auto it = entries.find(key);
        if (it == entries.end()) throw ConfigError("missing required key '" + key + "'");
        return it->second;
    }

    double get_double(const std::string& key, double fallback) const {
        auto it = entries.find(key);
        if (it == entries.end()) return fallback;
        try {
            std::size_t used = 0;
            double v = std::stod(it->second, &used);
            if (used != it->second.size()) throw std::invalid_argument("trailing characters");
            return v;
        } catch (const std::exception&) {
            throw ConfigError("key '" + key + "' is not a number: '" + it->second + "'");
        }
    }

    long long get_int(const std::string& key, long long fallback) const {
        auto it = entries.find(key);
        if (it == entries.end()) return fallback;
        try {
            std::size_t used = 0;
            long long v = std::stoll(it->second, &used);
            if (used != it->second.size()) throw std::invalid_argument("trailing characters");
            return v;
        } catch (const std::exception&) {
            throw ConfigError("key '" + key + "' is not an integer: '" + it->second + "'");
        }
    }

    bool get_bool(const std::string& key, bool fallback) const {
        auto it = entries.find(key);
        if (it == entries.end()) return fallback;
        if (it->second == "true" || it->second == "1") return true;
        if (it->second == "false" || it->second == "0") return false;
        throw ConfigError("key '" + key + "' is not a boolean: '" + it->second + "'");
    }

    /// Comma-separated list of non-negative integers ("8,10,12").
    std::vector<long long> get_int_list(const std::string& key,
                                        std::vector<long long> fallback) const {
        auto it = entries.find(key);
        if (it == entries.end()) return fallback;
        std::vector<long long> out;
        std::stringstream ss(it->second);
        std::string item;
        while (std::getline(ss, item, ',')) {
            try {
                std::size_t used = 0;
                out.push_back(std::stoll(item, &used));
                if (used != item.size()) throw std::invalid_argument("trailing characters");
            } catch (const std::exception&) {
                throw ConfigError("key '" + key + "' is not an integer list: '" + it->second +
                                  "'");
            }
        }
        if (out.empty()) throw ConfigError("key '" + key + "' is an empty list");
        return out;
    }
};

namespace detail {

inline const std::vector<std::string>& known_config_keys() {
    static const std::vector<std::string> keys = {
        "command",    "csv",        "estimator", "functional", "gen.compensated",
        "gen.drift",  "gen.hi",     "gen.kind",  "gen.lambda", "gen.law",
        "gen.lo",     "gen.mu",     "gen.sigma", "grid",       "horizon",
        "levels",     "n",          "out",       "path",       "seed",
        "seeds",      "t",          "threads",   "tol",
    };
    return keys;
}

inline bool is_known_config_key(const std::string& key) {
    const auto& keys = known_config_keys();
    return std::find(keys.begin(), keys.end(), key) != keys.end();
}

inline std::string trim(std::string_view s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

}  // namespace detail

/// Parse the file form: one `key = value` per line, `[section]` headers
/// prefix the keys that follow, `#` starts a comment. Unknown or duplicate
/// keys are configuration errors so that typos surface loudly.
inline ExperimentConfig parse_config_text(const std::string& text) {
    ExperimentConfig cfg;
    std::stringstream ss(text);
    std::string line;
    std::string prefix;
    int lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        std::string t = detail::trim(line);
        if (t.empty()) continue;
        if (t.front() == '[') {
            if (t.back() != ']')
                throw ConfigError("line " + std::to_string(lineno) + ": unterminated section '" +
                                  t + "'");
            prefix = detail::trim(t.substr(1, t.size() - 2));
            if (prefix.empty())
                throw ConfigError("line " + std::to_string(lineno) + ": empty section name");
            continue;
        }
        auto eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value', got '" +
                              t + "'");
        std::string key = detail::trim(t.substr(0, eq));
        std::string value = detail::trim(t.substr(eq + 1));
        if (key.empty())
            throw ConfigError("line " + std::to_string(lineno) + ": empty key");
        if (!prefix.empty()) key = prefix + "." + key;
        if (!detail::is_known_config_key(key))
            throw ConfigError("line " + std::to_string(lineno) + ": unknown key '" + key + "'");
        if (!cfg.entries.emplace(key, value).second)
            throw ConfigError("line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
    }
    return cfg;
}

inline ExperimentConfig parse_config_file(const std::string& filename) {
    std::ifstream in(filename);
    if (!in) throw IoError("cannot open config file '" + filename + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str());
}

/// Canonical file form: sorted `key = value` lines. parse(canonical(c)) == c.
inline std::string canonical_config_text(const ExperimentConfig& cfg) {
    std::string out;
    for (const auto& [k, v] : cfg.entries) {
        out += k;
        out += " = ";
        out += v;
        out += '\n';
    }
    return out;
}

/// FNV-1a 64-bit over the canonical form, as 16 hex digits.
inline std::string config_hash(const ExperimentConfig& cfg) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : canonical_config_text(cfg)) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    static const char* hex = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = hex[h & 0xf];
        h >>= 4;
    }
    return out;
}

/// Generator description from the `gen.*` keys. Defaults to a standard
/// Brownian path; `gen.kind = jumpdiff` adds a compound-Poisson part.
inline GeneratorConfig generator_from(const ExperimentConfig& cfg) {
    GeneratorConfig gen;
    std::string kind = cfg.get("gen.kind", "bm");
    if (kind == "bm" || kind == "brownian") {
        gen.kind = GeneratorConfig::Kind::brownian;
        return gen;
    }
    if (kind != "jumpdiff" && kind != "jump_diffusion")
        throw ConfigError("unknown generator kind '" + kind + "' (want bm or jumpdiff)");
    gen.kind = GeneratorConfig::Kind::jump_diffusion;
    gen.drift = cfg.get_double("gen.drift", 0.0);
    gen.compensated = cfg.get_bool("gen.compensated", false);
    double lambda = cfg.get_double("gen.lambda", 2.0);
    std::string law = cfg.get("gen.law", "rademacher");
    try {
        if (law == "rademacher") {
            gen.jumps = JumpSpec::rademacher_pm1(lambda);
        } else if (law == "uniform") {
            gen.jumps = JumpSpec::uniform_on(lambda, cfg.get_double("gen.lo", -1.0),
                                             cfg.get_double("gen.hi", 1.0));
        } else if (law == "normal") {
            gen.jumps = JumpSpec::normal_of(lambda, cfg.get_double("gen.mu", 0.0),
                                            cfg.get_double("gen.sigma", 1.0));
        } else {
            throw ConfigError("unknown jump law '" + law +
                              "' (want rademacher, uniform or normal)");
        }
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("bad generator parameters: ") + e.what());
    }
    return gen;
}

inline Functional functional_from(const ExperimentConfig& cfg) {
    std::string id = cfg.require("functional");
    auto f = find_functional(id);
    if (!f) throw ConfigError("unknown functional id '" + id + "'");
    return std::move(*f);
}

/// Everything a run produces, before any file is written. Identical config
/// and seeds give identical numeric content (wall_seconds aside).
struct ExperimentReport {
    std::string command;
    std::string hash;
    std::vector<std::pair<double, double>> levels;  // (param, metric)
    double slope = std::numeric_limits<double>::quiet_NaN();
    bool pass = false;
    double wall_seconds = 0.0;
    std::map<std::string, double> extras;  // command-specific scalars
    std::string table_csv;                 // the full CSV artifact, header included
};

namespace detail {

inline std::string levels_csv(const std::vector<std::pair<double, double>>& levels) {
    std::string out = "level,metric\n";
    for (const auto& [param, metric] : levels) {
        out += format_double(param);
        out += ',';
        out += format_double(metric);
        out += '\n';
    }
    return out;
}

inline unsigned threads_from(const ExperimentConfig& cfg) {
    long long t = cfg.get_int("threads", 1);
    if (t < 1) throw ConfigError("threads must be at least 1");
    return static_cast<unsigned>(t);
}

inline TimeGrid grid_from(const ExperimentConfig& cfg, std::size_t default_steps,
                          double horizon) {
    long long steps = cfg.get_int("grid", static_cast<long long>(default_steps));
    if (steps < 2) throw ConfigError("grid must have at least 2 steps");
    return TimeGrid::uniform(static_cast<std::size_t>(steps), horizon);
}

inline std::vector<int> smoothing_levels(const ExperimentConfig& cfg) {
    std::vector<int> ns;
    for (long long v : cfg.get_int_list("n", {4, 16, 64, 256})) {
        if (v < 1) throw ConfigError("smoothing level n must be positive");
        ns.push_back(static_cast<int>(v));
    }
    return ns;
}

}  // namespace detail

/// Dispatch one experiment. Pure apart from the wall clock: no file I/O.
inline ExperimentReport run_experiment(const ExperimentConfig& cfg) {
    auto t0 = std::chrono::steady_clock::now();
    ExperimentReport rep;
    rep.command = cfg.require("command");
    rep.hash = config_hash(cfg);
    double horizon = cfg.get_double("horizon", 1.0);
    if (!(horizon > 0.0)) throw ConfigError("horizon must be positive");
    unsigned threads = detail::threads_from(cfg);

    if (rep.command == "verify-ito") {
        Functional f = functional_from(cfg);
        GeneratorConfig gen = generator_from(cfg);
        std::vector<std::size_t> sizes;
        for (long long e : cfg.get_int_list("levels", {8, 10, 12})) {
            if (e < 1 || e > 24) throw ConfigError("levels are log2 grid sizes in [1,24]");
            sizes.push_back(std::size_t{1} << e);
        }
        std::size_t seeds = static_cast<std::size_t>(cfg.get_int("seeds", 50));
        double tol = cfg.get_double("tol", 0.05);
        ConvergenceReport r;
        try {
            r = ito_convergence(f, gen, sizes, seeds, tol, horizon, threads);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(e.what());
        }
        rep.levels = r.levels;
        rep.slope = r.slope;
        rep.pass = r.pass;
    } else if (rep.command == "wong-zakai") {
        Functional f = functional_from(cfg);
        GeneratorConfig gen = generator_from(cfg);
        std::size_t grid = detail::grid_from(cfg, std::size_t{1} << 12, horizon).size() - 1;
        std::vector<int> ns = detail::smoothing_levels(cfg);
        std::size_t seeds = static_cast<std::size_t>(cfg.get_int("seeds", 100));
        double tol = cfg.get_double("tol", 0.02);
        ConvergenceReport r;
        try {
            r = wong_zakai_convergence(f, gen, grid, ns, seeds, tol, horizon, threads);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(e.what());
        }
        rep.levels = r.levels;
        rep.slope = r.slope;
        rep.pass = r.pass;
    } else if (rep.command == "smoother") {
        GeneratorConfig gen = generator_from(cfg);
        TimeGrid g = detail::grid_from(cfg, std::size_t{1} << 14, horizon);
        auto sample = gen.make(g, static_cast<Seed>(cfg.get_int("seed", 0)));
        std::vector<int> ns = detail::smoothing_levels(cfg);
        std::vector<std::pair<double, double>> levels;
        bool decreasing = true;
        double prev = std::numeric_limits<double>::infinity();
        for (int n : ns) {
            CadlagPath y = exp_smoother(sample.m_cont, sample.clock, n);
            double sup = 0.0;
            for (std::size_t i = 0; i < g.size(); ++i)
                sup = std::max(sup, std::abs(y.value_at(i) - sample.m_cont.value_at(i)));
            decreasing = decreasing && sup < prev;
            prev = sup;
            levels.emplace_back(static_cast<double>(n), sup);
        }
        ConvergenceReport r = detail::finish_report(std::move(levels), cfg.get_double("tol", 0.05));
        rep.levels = r.levels;
        rep.slope = r.slope;
        rep.pass = decreasing && r.pass;
    } else if (rep.command == "props") {
        Functional f = functional_from(cfg);
        ExperimentConfig defaulted = cfg;
        if (!defaulted.has("gen.kind")) {
            defaulted.entries["gen.kind"] = "jumpdiff";
            defaulted.entries["gen.law"] = "uniform";
            defaulted.entries["gen.lambda"] = "3";
            defaulted.entries["gen.lo"] = "-0.8";
            defaulted.entries["gen.hi"] = "0.8";
            defaulted.entries["gen.drift"] = "0.3";
        }
        GeneratorConfig gen = generator_from(defaulted);
        TimeGrid g = detail::grid_from(cfg, 64, horizon);
        std::size_t count = static_cast<std::size_t>(cfg.get_int("seeds", 50));
        if (count == 0) throw ConfigError("seeds must be positive");
        std::vector<std::pair<double, CadlagPath>> samples;
        samples.reserve(count);
        for (std::size_t k = 0; k < count; ++k) {
            double frac = count == 1 ? 0.5 : static_cast<double>(k) / (count - 1);
            samples.emplace_back(horizon * (0.1 + 0.7 * frac), gen.make(g, k).x);
        }
        PropReport r1 = prop1_check(f, samples);
        PropReport r3 = prop3_check(f, samples);
        rep.levels = {{1.0, r1.max_time_dev}, {2.0, r1.max_space_dev}, {3.0, r3.max_space_dev}};
        double tol = cfg.get_double("tol", 1e-6);
        rep.pass = r1.max_time_dev < tol && r1.max_space_dev < tol &&
                   (!r3.hypothesis_ok || r3.max_space_dev < tol);
        rep.extras["prop3_hypothesis_ok"] = r3.hypothesis_ok ? 1.0 : 0.0;
        rep.extras["prop3_samples_used"] = static_cast<double>(r3.used);
    } else if (rep.command == "simulate") {
        GeneratorConfig gen = generator_from(cfg);
        TimeGrid g = detail::grid_from(cfg, std::size_t{1} << 12, horizon);
        Seed seed = static_cast<Seed>(cfg.get_int("seed", 0));
        auto sample = gen.make(g, seed);
        std::ostringstream os;
        write_path_csv(os, sample.x);
        rep.table_csv = os.str();
        rep.levels = {{static_cast<double>(seed), sample.x.value(horizon)}};
        rep.extras["jump_count"] = static_cast<double>(sample.x.jumps().size());
        rep.extras["realized_qv"] = realized_qv_continuous(sample.m_cont, horizon);
        rep.pass = true;
    } else if (rep.command == "differentiate") {
        Functional f = functional_from(cfg);
        CadlagPath p = [&] {
            if (cfg.has("path")) {
                try {
                    return read_path_csv(cfg.require("path"));
                } catch (const std::exception& e) {
                    throw IoError("cannot read path file: " + std::string(e.what()));
                }
            }
            GeneratorConfig gen = generator_from(cfg);
            TimeGrid g = detail::grid_from(cfg, 256, horizon);
            return gen.make(g, static_cast<Seed>(cfg.get_int("seed", 0))).x;
        }();
        double t = cfg.get_double("t", horizon / 2.0);
        if (t < 0.0 || t > p.horizon()) throw ConfigError("t outside the path horizon");
        StepSchedule sched = StepSchedule::default_for(p.grid());
        std::string kind = cfg.get("estimator", "chit");
        DerivativeEstimate est;
        try {
            if (kind == "horizontal") est = horizontal(f, t, p, sched);
            else if (kind == "dupire") est = dupire_vertical(f, t, p, sched);
            else if (kind == "dupire2") est = dupire_second(f, t, p, sched);
            else if (kind == "chit") est = chitashvili_vertical(f, t, p, sched);
            else if (kind == "chit2") est = chitashvili_second(f, t, p, sched);
            else if (kind == "def4t") est = def4_time(f, t, p, sched);
            else if (kind == "def4x") est = def4_space(f, t, p, sched);
            else
                throw ConfigError("unknown estimator '" + kind +
                                  "' (want horizontal, dupire, dupire2, chit, chit2, def4t, "
                                  "def4x)");
        } catch (const std::domain_error& e) {
            throw ConfigError(e.what());
        }
        rep.levels = est.raw;  // (step, quotient) rows
        rep.pass = est.converged;
        rep.extras["value"] = est.value;
        rep.extras["error_indicator"] = est.error_indicator;
    } else {
        throw ConfigError("unknown command '" + rep.command +
                          "' (want simulate, differentiate, verify-ito, wong-zakai, smoother or "
                          "props)");
    }

    if (rep.table_csv.empty()) rep.table_csv = detail::levels_csv(rep.levels);
    rep.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rep;
}

/// Report JSON: {config, hash, command, levels:[{param, metric}], slope,
/// pass, extras, wall_seconds}. `slope` serializes as null when undefined
/// (nlohmann emits null for non-finite doubles).
inline std::string report_json(const ExperimentConfig& cfg, const ExperimentReport& rep) {
    nlohmann::ordered_json j;
    j["config"] = nlohmann::ordered_json::object();
    for (const auto& [k, v] : cfg.entries) j["config"][k] = v;
    j["hash"] = rep.hash;
    j["command"] = rep.command;
    j["levels"] = nlohmann::ordered_json::array();
    for (const auto& [param, metric] : rep.levels)
        j["levels"].push_back({{"param", param}, {"metric", metric}});
    j["slope"] = rep.slope;
    j["pass"] = rep.pass;
    j["extras"] = nlohmann::ordered_json::object();
    for (const auto& [k, v] : rep.extras) j["extras"][k] = v;
    j["wall_seconds"] = rep.wall_seconds;
    return j.dump(2) + "\n";
}

/// Artifact locations: `out` names the JSON report, the CSV table lands next
/// to it. Relative paths are resolved under $ITOLAB_OUT_DIR when that is set.
struct ArtifactPaths {
    std::string json;
    std::string csv;
};

inline ArtifactPaths artifact_paths(const ExperimentConfig& cfg) {
    std::string out = cfg.get("out", cfg.require("command") + ".json");
    std::string csv = cfg.get("csv", "");
    if (csv.empty()) {
        csv = out;
        if (csv.size() >= 5 && csv.substr(csv.size() - 5) == ".json")
            csv.resize(csv.size() - 5);
        csv += ".csv";
    }
    const char* dir = std::getenv("ITOLAB_OUT_DIR");
    auto resolve = [&](std::string p) {
        if (dir && *dir && !p.empty() && p.front() != '/')
            return std::string(dir) + "/" + p;
        return p;
    };
    return {resolve(out), resolve(csv)};
}

inline void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open '" + path + "' for writing");
    os << content;
    if (!os) throw IoError("write to '" + path + "' failed");
}

struct ExperimentOutcome {
    ExperimentReport report;
    ArtifactPaths paths;
};

/// Run one experiment and write both artifacts.
inline ExperimentOutcome run_and_write(const ExperimentConfig& cfg) {
    ExperimentOutcome out;
    out.paths = artifact_paths(cfg);  // validates command before any work
    out.report = run_experiment(cfg);
    write_text_file(out.paths.csv, out.report.table_csv);
    write_text_file(out.paths.json, report_json(cfg, out.report));
    return out;
}

}  // namespace itolab
