#include "hydroneuro/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "hydroneuro/io.hpp"

namespace hydroneuro {

namespace pt = boost::property_tree;

namespace {

std::string summarize(const std::vector<std::string>& v) {
    std::string s = "invalid configuration (" + std::to_string(v.size()) + " problem" + (v.size() == 1 ? "" : "s") + "):";
    for (const auto& x : v) s += "\n  - " + x;
    return s;
}

bool is_integer_ratio(double num, double den) {
    if (!(num > 0.0) || !(den > 0.0)) return false;
    const double q = num / den;
    const double k = std::round(q);
    return k >= 1.0 && std::abs(k * den - num) <= 1e-9 * std::max(1.0, num);
}

const std::map<std::string, std::set<std::string>>& known_keys() {
    static const std::map<std::string, std::set<std::string>> keys = {
        {"model",
         {"epsilon", "alpha", "periodic", "a_shape", "a_scale", "a_width", "a_modulation", "b_shape", "b_scale",
          "b_width", "b_modulation", "rate_shape", "rate_gain", "rate_exponent", "rate_steepness", "rate_midpoint",
          "rate_clamp", "rate_spatial_amplitude", "psi0_shape", "psi0_support", "psi0_center", "psi0_halfwidth",
          "psi0_weight", "psi0_spatial_amplitude"}},
        {"run", {"horizon", "seed", "replicas", "substep", "snapshot_times", "epsilons"}},
        {"partition", {"delta", "ell", "ebin", "tau"}},
        {"pde", {"delta", "delta_levels", "ell", "ugrid", "birth_nodes", "dyadic_level"}},
        {"output", {"directory"}},
    };
    return keys;
}

class Reader {
public:
    Reader(const pt::ptree& tree, std::vector<std::string>& errors) : tree_(tree), errors_(errors) {}

    template <class T>
    void get(const std::string& key, T& out, bool required = false) {
        const auto node = tree_.get_child_optional(pt::ptree::path_type(key, '.'));
        if (!node) {
            if (required) errors_.push_back(key + ": required key is missing; add it to the [" + section(key) + "] section");
            return;
        }
        const std::string raw = node->get_value<std::string>();
        try {
            if constexpr (std::is_same_v<T, std::string>) {
                out = raw;
            } else if constexpr (std::is_same_v<T, bool>) {
                if (raw == "true" || raw == "1" || raw == "yes") out = true;
                else if (raw == "false" || raw == "0" || raw == "no") out = false;
                else throw std::invalid_argument(raw);
            } else if constexpr (std::is_same_v<T, std::vector<double>>) {
                out = parse_list(raw);
            } else if constexpr (std::is_integral_v<T>) {
                std::size_t pos = 0;
                const long long v = std::stoll(raw, &pos);
                if (pos != raw.size() || v < 0) throw std::invalid_argument(raw);
                out = static_cast<T>(v);
            } else {
                std::size_t pos = 0;
                const double v = std::stod(raw, &pos);
                if (pos != raw.size()) throw std::invalid_argument(raw);
                out = v;
            }
        } catch (const std::exception&) {
            errors_.push_back(key + ": cannot parse '" + raw + "'; expected " + expected<T>());
        }
    }

private:
    static std::string section(const std::string& key) { return key.substr(0, key.find('.')); }
    template <class T>
    static const char* expected() {
        if constexpr (std::is_same_v<T, bool>) return "true or false";
        else if constexpr (std::is_same_v<T, std::vector<double>>) return "a comma-separated list of numbers";
        else if constexpr (std::is_integral_v<T>) return "a nonnegative integer";
        else if constexpr (std::is_same_v<T, std::string>) return "text";
        else return "a number";
    }
    const pt::ptree& tree_;
    std::vector<std::string>& errors_;
};

template <class E>
void shape(std::vector<std::string>& errors, const std::string& key, const std::string& value, E& out,
           E (*parse)(const std::string&), const char* options) {
    if (value.empty()) return;
    try {
        out = parse(value);
    } catch (const std::exception&) {
        errors.push_back(key + ": unknown preset '" + value + "'; choose one of " + options);
    }
}

void check_positive(std::vector<std::string>& errors, const std::string& key, double v) {
    if (!(v > 0.0)) errors.push_back(key + " = " + format_double(v) + " must be positive");
}

ExperimentConfig from_tree(const pt::ptree& tree) {
    std::vector<std::string> errors;
    for (const auto& [sec, body] : tree) {
        const auto it = known_keys().find(sec);
        if (it == known_keys().end()) {
            errors.push_back("[" + sec + "]: unknown section; expected model, run, partition, pde or output");
            continue;
        }
        for (const auto& [key, value] : body) {
            (void)value;
            if (!it->second.count(key)) errors.push_back(sec + "." + key + ": unknown key; check the spelling");
        }
    }

    ExperimentConfig c;
    Reader r(tree, errors);
    auto& m = c.model;
    r.get("model.epsilon", m.epsilon, true);
    r.get("model.alpha", m.alpha);
    r.get("model.periodic", m.periodic);
    std::string a_shape, b_shape, rate_shape, psi_shape;
    r.get("model.a_shape", a_shape);
    r.get("model.a_scale", m.a.scale);
    r.get("model.a_width", m.a.width);
    r.get("model.a_modulation", m.a.modulation);
    r.get("model.b_shape", b_shape);
    r.get("model.b_scale", m.b.scale);
    r.get("model.b_width", m.b.width);
    r.get("model.b_modulation", m.b.modulation);
    r.get("model.rate_shape", rate_shape);
    r.get("model.rate_gain", m.rate.gain);
    r.get("model.rate_exponent", m.rate.exponent);
    r.get("model.rate_steepness", m.rate.steepness);
    r.get("model.rate_midpoint", m.rate.midpoint);
    r.get("model.rate_clamp", m.rate.clamp);
    r.get("model.rate_spatial_amplitude", m.rate.spatial_amplitude);
    r.get("model.psi0_shape", psi_shape);
    r.get("model.psi0_support", m.psi0.support);
    r.get("model.psi0_center", m.psi0.center);
    r.get("model.psi0_halfwidth", m.psi0.halfwidth);
    r.get("model.psi0_weight", m.psi0.weight);
    r.get("model.psi0_spatial_amplitude", m.psi0.spatial_amplitude);
    const char* kernels = "constant, gaussian, cosine";
    shape(errors, "model.a_shape", a_shape, m.a.shape, &parse_kernel_shape, kernels);
    shape(errors, "model.b_shape", b_shape, m.b.shape, &parse_kernel_shape, kernels);
    shape(errors, "model.rate_shape", rate_shape, m.rate.shape, &parse_rate_shape, "linear, sigmoid, power");
    shape(errors, "model.psi0_shape", psi_shape, m.psi0.shape, &parse_initial_shape,
          "uniform, narrow, decreasing, bump, mixture, compatible");

    r.get("run.horizon", c.run.horizon, true);
    r.get("run.seed", c.run.seed);
    r.get("run.replicas", c.run.replicas);
    r.get("run.substep", c.run.substep);
    r.get("run.snapshot_times", c.run.snapshot_times);
    r.get("run.epsilons", c.run.epsilons);

    r.get("partition.delta", c.partition.delta);
    r.get("partition.ell", c.partition.ell);
    r.get("partition.ebin", c.partition.ebin);
    r.get("partition.tau", c.partition.tau);

    r.get("pde.delta", c.pde.delta);
    r.get("pde.delta_levels", c.pde.delta_levels);
    r.get("pde.ell", c.pde.ell);
    r.get("pde.ugrid", c.pde.ugrid);
    r.get("pde.birth_nodes", c.pde.birth_nodes);
    r.get("pde.dyadic_level", c.pde.dyadic_level);
    r.get("output.directory", c.output.directory);

    // Structural checks, all reported together.
    if (!is_integer_ratio(1.0, m.epsilon))
        errors.push_back("model.epsilon = " + format_double(m.epsilon) + ": 1/epsilon must be an integer; try 0.2, 0.1 or 0.05");
    else if (m.epsilon >= 1.0)
        errors.push_back("model.epsilon = 1 leaves a single site with no gap-junction neighbour; use epsilon <= 0.5");
    if (m.alpha < 0.0) errors.push_back("model.alpha must be nonnegative");
    check_positive(errors, "model.psi0_support", m.psi0.support);
    check_positive(errors, "model.rate_clamp", m.rate.clamp);
    check_positive(errors, "run.horizon", c.run.horizon);
    if (c.run.substep < 0.0) errors.push_back("run.substep must be nonnegative (0 selects the default)");
    for (double t : c.run.snapshot_times)
        if (t < 0.0 || t > c.run.horizon)
            errors.push_back("run.snapshot_times: " + format_double(t) + " lies outside [0, run.horizon]");
    for (double e : c.run.epsilons)
        if (!is_integer_ratio(1.0, e))
            errors.push_back("run.epsilons: 1/" + format_double(e) + " is not an integer");

    for (const auto* list : {&c.partition.delta, &c.partition.ell, &c.partition.ebin, &c.partition.tau})
        if (list->empty()) errors.push_back("partition: sweep lists must not be empty");
    for (double l : c.partition.ell) {
        if (!is_integer_ratio(1.0, l))
            errors.push_back("partition.ell = " + format_double(l) + ": 1/ell must be an integer");
        if (is_integer_ratio(1.0, m.epsilon) && !is_integer_ratio(l, m.epsilon))
            errors.push_back("partition.ell = " + format_double(l) + " is not a multiple of model.epsilon = " +
                             format_double(m.epsilon) + "; squares must contain whole sites");
    }
    for (double d : c.partition.delta)
        for (double t : c.partition.tau)
            if (!is_integer_ratio(d, t))
                errors.push_back("partition.delta = " + format_double(d) + " and partition.tau = " + format_double(t) +
                                 ": delta/tau must be an integer; pick tau dividing delta");
    for (double e : c.partition.ebin)
        if (!is_integer_ratio(m.psi0.support, e))
            errors.push_back("partition.ebin = " + format_double(e) + " and model.psi0_support = " +
                             format_double(m.psi0.support) + ": R0/E must be an integer");

    check_positive(errors, "pde.delta", c.pde.delta);
    if (c.pde.delta_levels == 0) errors.push_back("pde.delta_levels must be at least 1");
    if (!is_integer_ratio(1.0, c.pde.ell)) errors.push_back("pde.ell: 1/ell must be an integer");
    if (c.pde.ugrid < 2) errors.push_back("pde.ugrid must be at least 2");
    if (c.pde.birth_nodes < 1) errors.push_back("pde.birth_nodes must be at least 1");
    if (c.pde.delta > 0.0 && !is_integer_ratio(c.run.horizon, c.pde.delta))
        errors.push_back("pde.delta = " + format_double(c.pde.delta) + " must divide run.horizon");

    if (errors.empty()) {
        try {
            (void)make_rate(m.rate);
        } catch (const std::exception& e) {
            errors.push_back(std::string("model.rate_*: ") + e.what());
        }
    }
    if (!errors.empty()) throw ConfigError(errors);
    return c;
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> violations)
    : std::runtime_error(summarize(violations)), violations_(std::move(violations)) {}

std::vector<PartitionConfig> ExperimentConfig::cells() const {
    std::vector<PartitionConfig> out;
    for (double d : partition.delta)
        for (double l : partition.ell)
            for (double e : partition.ebin)
                for (double t : partition.tau) out.push_back({d, l, e, t});
    return out;
}

std::vector<double> parse_list(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto b = item.find_first_not_of(" \t");
        if (b == std::string::npos) continue;
        const auto e = item.find_last_not_of(" \t");
        item = item.substr(b, e - b + 1);
        std::size_t pos = 0;
        const double v = std::stod(item, &pos);
        if (pos != item.size()) throw std::invalid_argument(item);
        out.push_back(v);
    }
    return out;
}

ExperimentConfig parse_config_text(const std::string& text) {
    pt::ptree tree;
    std::istringstream in(text);
    try {
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError({std::string("syntax: ") + e.message() + " at line " + std::to_string(e.line())});
    }
    return from_tree(tree);
}

ExperimentConfig parse_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError({path + ": cannot read the configuration file"});
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

std::string echo_config(const ExperimentConfig& c) {
    const auto& m = c.model;
    std::ostringstream o;
    auto kv = [&](const std::string& k, const std::string& v) { o << k << " = " << v << '\n'; };
    auto num = [&](const std::string& k, double v) { kv(k, format_double(v)); };
    o << "[model]\n";
    num("epsilon", m.epsilon);
    num("alpha", m.alpha);
    kv("periodic", m.periodic ? "true" : "false");
    kv("a_shape", to_string(m.a.shape));
    num("a_scale", m.a.scale);
    num("a_width", m.a.width);
    num("a_modulation", m.a.modulation);
    kv("b_shape", to_string(m.b.shape));
    num("b_scale", m.b.scale);
    num("b_width", m.b.width);
    num("b_modulation", m.b.modulation);
    kv("rate_shape", to_string(m.rate.shape));
    num("rate_gain", m.rate.gain);
    num("rate_exponent", m.rate.exponent);
    num("rate_steepness", m.rate.steepness);
    num("rate_midpoint", m.rate.midpoint);
    num("rate_clamp", m.rate.clamp);
    num("rate_spatial_amplitude", m.rate.spatial_amplitude);
    kv("psi0_shape", to_string(m.psi0.shape));
    num("psi0_support", m.psi0.support);
    num("psi0_center", m.psi0.center);
    num("psi0_halfwidth", m.psi0.halfwidth);
    num("psi0_weight", m.psi0.weight);
    num("psi0_spatial_amplitude", m.psi0.spatial_amplitude);
    o << "\n[run]\n";
    num("horizon", c.run.horizon);
    kv("seed", std::to_string(c.run.seed));
    kv("replicas", std::to_string(c.run.replicas));
    num("substep", c.run.substep);
    kv("snapshot_times", join(c.run.snapshot_times));
    kv("epsilons", join(c.run.epsilons));
    o << "\n[partition]\n";
    kv("delta", join(c.partition.delta));
    kv("ell", join(c.partition.ell));
    kv("ebin", join(c.partition.ebin));
    kv("tau", join(c.partition.tau));
    o << "\n[pde]\n";
    num("delta", c.pde.delta);
    kv("delta_levels", std::to_string(c.pde.delta_levels));
    num("ell", c.pde.ell);
    kv("ugrid", std::to_string(c.pde.ugrid));
    kv("birth_nodes", std::to_string(c.pde.birth_nodes));
    kv("dyadic_level", std::to_string(c.pde.dyadic_level));
    o << "\n[output]\n";
    kv("directory", c.output.directory);
    return o.str();
}

}  // namespace hydroneuro
