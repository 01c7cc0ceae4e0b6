#pragma once

// Hyperparameter presets, one per published experiment setting.

#include <string>
#include <vector>

#include "t2p/errors.hpp"
#include "t2p/model.hpp"

namespace t2p {

struct Preset {
    std::string name;
    double prior_location;
    double lambda1;
    double lambda2;
    std::size_t n_patterns;
    std::size_t pattern_length;
    std::size_t epochs;
    double learning_rate;
};

inline const std::vector<Preset>& presets() {
    // SY10 uses k = 10 so each of its ten generating patterns can get a kernel.
    static const std::vector<Preset> table{
        {"sy4", 0.80, 0.83, 0.21, 4, 100, 1000, 1e-3},
        {"sy10", 0.80, 0.83, 0.21, 10, 100, 1000, 1e-3},
        {"vital-sign", 0.80, 0.83, 0.23, 2, 850, 1000, 1e-3},
        {"audiomnist", 0.80, 0.83, 0.23, 2, 8000, 2000, 1e-4},
        {"ecg", 0.80, 0.91, 0.25, 2, 96, 2000, 1e-3},
        {"plane", 0.92, 0.90, 0.10, 7, 144, 4000, 1e-3},
    };
    return table;
}

inline std::string preset_names() {
    std::string out;
    for (const auto& p : presets()) out += (out.empty() ? "" : ", ") + p.name;
    return out;
}

inline const Preset& find_preset(const std::string& name) {
    for (const auto& p : presets())
        if (p.name == name) return p;
    throw ConfigError("unknown preset '" + name + "' (known: " + preset_names() + ")");
}

inline void apply_preset(T2PConfig& config, const Preset& p) {
    config.prior_location = p.prior_location;
    config.lambda1 = p.lambda1;
    config.lambda2 = p.lambda2;
    config.n_patterns = p.n_patterns;
    config.pattern_length = p.pattern_length;
    config.epochs = p.epochs;
    config.learning_rate = p.learning_rate;
}

}  // namespace t2p
