// Experiment configuration: a flat key = value format with [sections].
// Unknown sections or keys are hard errors, as are keys that do not apply to
// the configured kind; silent misconfiguration is the main reproducibility
// hazard this format guards against.
//
//   # comment
//   [experiment]
//   horizon = 100000
//   replications = 100
//   master_seed = 1
//
//   [process]
//   kind = logistic_wellspec        # logistic_switchmix, linear_subgaussian,
//   d = 11                          # logistic_isotropic
//   theta_star = setting2           # named, or a comma-separated list
//
//   [algorithm]                     # section repeats, one per algorithm
//   name = ekf
//   kind = ekf
#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ekfglm/datagen.hpp"

namespace ekfglm {

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

enum class AlgorithmKind { Ekf, EkfTruncated, EkfAveraged, Ons, OnsAveraged, Asgd, AsgdOracle };

inline std::string algorithm_kind_name(AlgorithmKind k) {
    switch (k) {
        case AlgorithmKind::Ekf: return "ekf";
        case AlgorithmKind::EkfTruncated: return "ekf_truncated";
        case AlgorithmKind::EkfAveraged: return "ekf_averaged";
        case AlgorithmKind::Ons: return "ons";
        case AlgorithmKind::OnsAveraged: return "ons_averaged";
        case AlgorithmKind::Asgd: return "asgd";
        case AlgorithmKind::AsgdOracle: return "asgd_oracle";
    }
    return "?";
}

enum class ExpConcavityRule { Analytic, Sampled, Explicit };

struct AlgorithmSpec {
    std::string name;
    AlgorithmKind kind;
    double p1_scale = 1.0;                      // ekf*/ons*
    double beta = 0.49;                         // ekf_truncated
    double threshold_scale = 1.0;               // ekf_truncated
    ExpConcavityRule exp_concavity = ExpConcavityRule::Analytic;  // ons*
    double exp_concavity_value = 0.0;           // ons*, Explicit rule
    std::size_t exp_concavity_samples = 1000;   // ons*, Sampled rule
    double ball_radius = 0.0;                   // ons*; 0 = auto (1.1 ||theta*||)
    double grad_bound = 0.0;                    // ons*; 0 = auto (D_X)
    double gamma = 0.0;                         // ons*; 0 = theorem step size

    bool is_ekf() const {
        return kind == AlgorithmKind::Ekf || kind == AlgorithmKind::EkfTruncated || kind == AlgorithmKind::EkfAveraged;
    }
    bool is_ons() const { return kind == AlgorithmKind::Ons || kind == AlgorithmKind::OnsAveraged; }
    bool is_asgd() const { return kind == AlgorithmKind::Asgd || kind == AlgorithmKind::AsgdOracle; }
};

struct ExperimentConfig {
    DataProcess process;
    std::string label;  // setting tag in result rows
    std::size_t horizon = 0;
    std::size_t replications = 0;
    std::uint64_t master_seed = 1;
    std::size_t grid_points_per_decade = 30;
    std::vector<std::size_t> eval_grid;         // explicit grid; empty = generated
    std::size_t reference_iters = 10'000'000;   // switch-mix reference length
    std::size_t density_samples = 1'000'000;    // Bernoulli-parameter diagnostics
    std::optional<std::string> output_dir;
    std::vector<AlgorithmSpec> algorithms;

    void validate() const {
        process.validate();
        if (horizon < 1) throw ConfigError("experiment.horizon must be >= 1");
        if (replications < 1) throw ConfigError("experiment.replications must be >= 1");
        if (grid_points_per_decade < 1) throw ConfigError("experiment.grid_points_per_decade must be >= 1");
        for (std::size_t t : eval_grid)
            if (t < 1 || t > horizon)
                throw ConfigError("experiment.eval_grid entries must lie in [1, horizon]");
        if (algorithms.empty()) throw ConfigError("at least one [algorithm] section is required");
        std::set<std::string> names;
        for (const AlgorithmSpec& a : algorithms) {
            if (a.name.empty()) throw ConfigError("algorithm.name must not be empty");
            if (!names.insert(a.name).second) throw ConfigError("duplicate algorithm name '" + a.name + "'");
            if (a.kind == AlgorithmKind::EkfTruncated) {
                if (!(a.beta > 0.0 && a.beta < 0.5))
                    throw ConfigError("algorithm '" + a.name + "': beta must lie in (0, 1/2)");
                if (!(a.threshold_scale > 0.0))
                    throw ConfigError("algorithm '" + a.name + "': threshold_scale must be > 0");
                if (!process.is_logistic())
                    throw ConfigError("algorithm '" + a.name + "': truncation needs a logistic process");
            }
            if (a.is_ekf() || a.is_ons()) {
                if (!(a.p1_scale > 0.0)) throw ConfigError("algorithm '" + a.name + "': p1_scale must be > 0");
            }
        }
    }
};

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

struct RawSection {
    std::string name;
    int line;
    std::vector<std::pair<std::string, std::string>> entries;  // key -> value, in order
    std::map<std::string, std::string> map;
};

inline std::vector<RawSection> parse_sections(std::istream& in, const std::string& origin) {
    std::vector<RawSection> sections;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const std::string t = trim(line);
        if (t.empty()) continue;
        if (t.front() == '[') {
            if (t.back() != ']') throw ConfigError(origin + ":" + std::to_string(lineno) + ": malformed section header");
            sections.push_back(RawSection{trim(t.substr(1, t.size() - 2)), lineno, {}, {}});
            continue;
        }
        const std::size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
        if (sections.empty())
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": entry outside of any [section]");
        const std::string key = trim(t.substr(0, eq));
        const std::string value = trim(t.substr(eq + 1));
        if (key.empty()) throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
        if (!sections.back().map.emplace(key, value).second)
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
        sections.back().entries.emplace_back(key, value);
    }
    return sections;
}

// Typed accessor over one section that records which keys were consumed, so
// leftovers can be reported as unknown.
class SectionReader {
public:
    SectionReader(const RawSection& raw, std::string origin) : raw_(raw), origin_(std::move(origin)) {}

    bool has(const std::string& key) const { return raw_.map.count(key) > 0; }

    std::string get_string(const std::string& key) {
        consumed_.insert(key);
        const auto it = raw_.map.find(key);
        if (it == raw_.map.end()) throw ConfigError(origin_ + ": [" + raw_.name + "] missing required key '" + key + "'");
        return it->second;
    }

    std::string get_string_or(const std::string& key, const std::string& fallback) {
        consumed_.insert(key);
        const auto it = raw_.map.find(key);
        return it == raw_.map.end() ? fallback : it->second;
    }

    double get_real(const std::string& key) { return parse_real(key, get_string(key)); }

    double get_real_or(const std::string& key, double fallback) {
        if (!has(key)) {
            consumed_.insert(key);
            return fallback;
        }
        return get_real(key);
    }

    std::int64_t get_int(const std::string& key) { return parse_int(key, get_string(key)); }

    std::int64_t get_int_or(const std::string& key, std::int64_t fallback) {
        if (!has(key)) {
            consumed_.insert(key);
            return fallback;
        }
        return get_int(key);
    }

    Vec get_real_list(const std::string& key) {
        const std::string raw = get_string(key);
        Vec out;
        std::stringstream ss(raw);
        std::string item;
        while (std::getline(ss, item, ',')) out.push_back(parse_real(key, trim(item)));
        if (out.empty()) throw ConfigError(origin_ + ": key '" + key + "' needs at least one value");
        return out;
    }

    void finish() const {
        for (const auto& [key, value] : raw_.entries)
            if (!consumed_.count(key))
                throw ConfigError(origin_ + ": [" + raw_.name + "] unknown key '" + key + "'");
    }

private:
    double parse_real(const std::string& key, const std::string& value) const {
        try {
            std::size_t pos = 0;
            const double v = std::stod(value, &pos);
            if (pos != value.size()) throw std::invalid_argument("trailing characters");
            return v;
        } catch (const std::exception&) {
            throw ConfigError(origin_ + ": key '" + key + "': cannot parse real from '" + value + "'");
        }
    }

    std::int64_t parse_int(const std::string& key, const std::string& value) const {
        try {
            std::size_t pos = 0;
            const std::int64_t v = std::stoll(value, &pos);
            if (pos != value.size()) throw std::invalid_argument("trailing characters");
            return v;
        } catch (const std::exception&) {
            throw ConfigError(origin_ + ": key '" + key + "': cannot parse integer from '" + value + "'");
        }
    }

    const RawSection& raw_;
    std::string origin_;
    std::set<std::string> consumed_;
};

inline Vec resolve_theta(const std::string& value, const std::string& key) {
    if (value.find(',') == std::string::npos && !value.empty() && !std::isdigit(static_cast<unsigned char>(value[0])) &&
        value[0] != '-' && value[0] != '+' && value[0] != '.') {
        return named_theta(value);
    }
    Vec out;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const std::string t = trim(item);
        try {
            std::size_t pos = 0;
            out.push_back(std::stod(t, &pos));
            if (pos != t.size()) throw std::invalid_argument("trailing characters");
        } catch (const std::exception&) {
            throw ConfigError("key '" + key + "': cannot parse real from '" + t + "'");
        }
    }
    return out;
}

} // namespace detail

inline AlgorithmKind parse_algorithm_kind(const std::string& s) {
    if (s == "ekf") return AlgorithmKind::Ekf;
    if (s == "ekf_truncated") return AlgorithmKind::EkfTruncated;
    if (s == "ekf_averaged") return AlgorithmKind::EkfAveraged;
    if (s == "ons") return AlgorithmKind::Ons;
    if (s == "ons_averaged") return AlgorithmKind::OnsAveraged;
    if (s == "asgd") return AlgorithmKind::Asgd;
    if (s == "asgd_oracle") return AlgorithmKind::AsgdOracle;
    throw ConfigError("unknown algorithm kind '" + s + "'");
}

inline std::string process_kind_name(ProcessKind k) {
    switch (k) {
        case ProcessKind::LogisticWellSpec: return "logistic_wellspec";
        case ProcessKind::LogisticSwitchMix: return "logistic_switchmix";
        case ProcessKind::LinearSubGaussian: return "linear_subgaussian";
        case ProcessKind::LogisticIsotropic: return "logistic_isotropic";
    }
    return "?";
}

inline ProcessKind parse_process_kind(const std::string& s) {
    if (s == "logistic_wellspec") return ProcessKind::LogisticWellSpec;
    if (s == "logistic_switchmix") return ProcessKind::LogisticSwitchMix;
    if (s == "linear_subgaussian") return ProcessKind::LinearSubGaussian;
    if (s == "logistic_isotropic") return ProcessKind::LogisticIsotropic;
    throw ConfigError("unknown process kind '" + s + "'");
}

inline ExperimentConfig parse_experiment_config(std::istream& in, const std::string& origin) {
    const auto sections = detail::parse_sections(in, origin);
    ExperimentConfig cfg;
    bool saw_experiment = false, saw_process = false;

    for (const auto& raw : sections) {
        const std::string where = origin + ":" + std::to_string(raw.line);
        detail::SectionReader reader(raw, where);
        if (raw.name == "experiment") {
            if (saw_experiment) throw ConfigError(where + ": duplicate [experiment] section");
            saw_experiment = true;
            cfg.horizon = static_cast<std::size_t>(reader.get_int("horizon"));
            cfg.replications = static_cast<std::size_t>(reader.get_int("replications"));
            cfg.master_seed = static_cast<std::uint64_t>(reader.get_int_or("master_seed", 1));
            cfg.grid_points_per_decade = static_cast<std::size_t>(reader.get_int_or("grid_points_per_decade", 30));
            if (reader.has("eval_grid")) {
                for (double v : reader.get_real_list("eval_grid"))
                    cfg.eval_grid.push_back(static_cast<std::size_t>(v));
                std::sort(cfg.eval_grid.begin(), cfg.eval_grid.end());
                cfg.eval_grid.erase(std::unique(cfg.eval_grid.begin(), cfg.eval_grid.end()), cfg.eval_grid.end());
            }
            cfg.reference_iters = static_cast<std::size_t>(reader.get_int_or("reference_iters", 10'000'000));
            cfg.density_samples = static_cast<std::size_t>(reader.get_int_or("density_samples", 1'000'000));
            if (reader.has("output_dir")) cfg.output_dir = reader.get_string("output_dir");
            reader.finish();
        } else if (raw.name == "process") {
            if (saw_process) throw ConfigError(where + ": duplicate [process] section");
            saw_process = true;
            const std::string kind_str = reader.get_string("kind");
            cfg.process.kind = parse_process_kind(kind_str);
            cfg.process.d = static_cast<std::size_t>(reader.get_int("d"));
            cfg.process.theta_star = detail::resolve_theta(reader.get_string("theta_star"), "theta_star");
            cfg.label = reader.get_string_or("label", kind_str);
            if (cfg.process.kind == ProcessKind::LogisticSwitchMix) {
                cfg.process.theta2 = detail::resolve_theta(reader.get_string("theta2"), "theta2");
            } else if (reader.has("theta2")) {
                throw ConfigError(where + ": key 'theta2' only applies to logistic_switchmix");
            }
            if (cfg.process.kind == ProcessKind::LinearSubGaussian) {
                cfg.process.sigma = reader.get_real_or("sigma", 0.0);
                cfg.process.d_app_bias = reader.get_real_or("d_app_bias", 0.0);
            } else {
                if (reader.has("sigma") || reader.has("d_app_bias"))
                    throw ConfigError(where + ": keys 'sigma'/'d_app_bias' only apply to linear_subgaussian");
            }
            reader.finish();
        } else if (raw.name == "algorithm") {
            AlgorithmSpec spec;
            spec.name = reader.get_string("name");
            spec.kind = parse_algorithm_kind(reader.get_string("kind"));
            if (spec.is_ekf() || spec.is_ons()) spec.p1_scale = reader.get_real_or("p1_scale", 1.0);
            if (spec.kind == AlgorithmKind::EkfTruncated) {
                spec.beta = reader.get_real_or("beta", 0.49);
                spec.threshold_scale = reader.get_real_or("threshold_scale", 1.0);
            } else if (reader.has("beta") || reader.has("threshold_scale")) {
                throw ConfigError(where + ": truncation keys only apply to kind = ekf_truncated");
            }
            if (spec.is_ons()) {
                const std::string ec = reader.get_string_or("exp_concavity", "analytic");
                if (ec == "analytic") {
                    spec.exp_concavity = ExpConcavityRule::Analytic;
                } else if (ec == "sampled") {
                    spec.exp_concavity = ExpConcavityRule::Sampled;
                } else {
                    spec.exp_concavity = ExpConcavityRule::Explicit;
                    try {
                        spec.exp_concavity_value = std::stod(ec);
                    } catch (const std::exception&) {
                        throw ConfigError(where + ": exp_concavity must be 'analytic', 'sampled' or a number");
                    }
                    if (!(spec.exp_concavity_value > 0.0))
                        throw ConfigError(where + ": explicit exp_concavity must be > 0");
                }
                spec.exp_concavity_samples = static_cast<std::size_t>(reader.get_int_or("exp_concavity_samples", 1000));
                spec.ball_radius = reader.get_real_or("ball_radius", 0.0);
                spec.grad_bound = reader.get_real_or("grad_bound", 0.0);
                spec.gamma = reader.get_real_or("gamma", 0.0);
            } else if (reader.has("exp_concavity") || reader.has("ball_radius") || reader.has("grad_bound") ||
                       reader.has("gamma") || reader.has("exp_concavity_samples")) {
                throw ConfigError(where + ": ONS keys only apply to kind = ons / ons_averaged");
            }
            reader.finish();
            cfg.algorithms.push_back(spec);
        } else {
            throw ConfigError(where + ": unknown section [" + raw.name + "]");
        }
    }

    if (!saw_experiment) throw ConfigError(origin + ": missing [experiment] section");
    if (!saw_process) throw ConfigError(origin + ": missing [process] section");
    if (cfg.label.empty()) cfg.label = "experiment";
    cfg.validate();
    return cfg;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    return parse_experiment_config(in, path);
}

// Flat key = value file (no sections), used by the bounds subcommand.
inline std::map<std::string, double> load_params_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open params file '" + path + "'");
    std::map<std::string, double> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const std::string t = detail::trim(line);
        if (t.empty()) continue;
        const std::size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError(path + ":" + std::to_string(lineno) + ": expected 'key = value'");
        const std::string key = detail::trim(t.substr(0, eq));
        const std::string value = detail::trim(t.substr(eq + 1));
        try {
            std::size_t pos = 0;
            const double v = std::stod(value, &pos);
            if (pos != value.size()) throw std::invalid_argument("trailing characters");
            if (!out.emplace(key, v).second)
                throw ConfigError(path + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception&) {
            throw ConfigError(path + ":" + std::to_string(lineno) + ": cannot parse real from '" + value + "'");
        }
    }
    return out;
}

} // namespace ekfglm
