#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "hydroneuro/auxcouple.hpp"
#include "hydroneuro/model.hpp"

namespace hydroneuro {

struct RunSection {
    double horizon = 1.0;
    std::uint64_t seed = 1;
    std::size_t replicas = 10;
    double substep = 0.0;  // 0: min(0.01, 0.1/(α+λ*))
    std::vector<double> snapshot_times;
    std::vector<double> epsilons;  // converge sweep
};

/// Sweep lists; cells() expands them.
struct PartitionSection {
    std::vector<double> delta = {0.1};
    std::vector<double> ell = {0.5};
    std::vector<double> ebin = {0.1};
    std::vector<double> tau = {0.05};
};

struct PdeSection {
    double delta = 1.0 / 16.0;  // coarsest level
    std::size_t delta_levels = 3;
    double ell = 0.25;
    std::size_t ugrid = 2001;
    std::size_t birth_nodes = 4;
    std::size_t dyadic_level = 2;
};

struct OutputSection {
    std::string directory = "out";
};

struct ExperimentConfig {
    ModelConfig model;
    RunSection run;
    PartitionSection partition;
    PdeSection pde;
    OutputSection output;

    /// Cartesian product in the order delta, ell, ebin, tau (tau fastest).
    std::vector<PartitionConfig> cells() const;
};

class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(std::vector<std::string> violations);
    const std::vector<std::string>& violations() const { return violations_; }

private:
    std::vector<std::string> violations_;
};

/// INI sections [model], [run], [partition], [pde], [output]. Collects every
/// violation before throwing ConfigError.
ExperimentConfig parse_config(const std::string& path);
ExperimentConfig parse_config_text(const std::string& text);

/// Resolved configuration, every key present, in INI form.
std::string echo_config(const ExperimentConfig& cfg);

std::vector<double> parse_list(const std::string& text);

}  // namespace hydroneuro
