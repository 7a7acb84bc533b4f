#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "crowdtm/errors.hpp"

namespace crowdtm {

inline constexpr double kProbFloor = 1e-12;

struct CrossEntropyResult {
    double value = 0.0;
    std::vector<double> d_probs;
};

inline std::size_t onehot_index(std::span<const double> target) {
    std::size_t idx = target.size();
    for (std::size_t i = 0; i < target.size(); ++i) {
        if (target[i] == 1.0) {
            if (idx != target.size()) throw std::invalid_argument("target is not one-hot");
            idx = i;
        } else if (target[i] != 0.0) {
            throw std::invalid_argument("target is not one-hot");
        }
    }
    if (idx == target.size()) throw std::invalid_argument("target is not one-hot");
    return idx;
}

/// -log p_k for one-hot target at k, probabilities clamped at 1e-12 before log.
inline CrossEntropyResult cross_entropy(std::span<const double> target_onehot,
                                        std::span<const double> probs) {
    if (target_onehot.size() != probs.size())
        throw std::invalid_argument("cross_entropy: size mismatch");
    const std::size_t k = onehot_index(target_onehot);
    CrossEntropyResult res;
    res.d_probs.assign(probs.size(), 0.0);
    const double p = std::max(probs[k], kProbFloor);
    res.value = -std::log(p);
    res.d_probs[k] = -1.0 / p;
    return res;
}

inline double cross_entropy_value(std::size_t target_class, std::span<const double> probs) {
    return -std::log(std::max(probs[target_class], kProbFloor));
}

} // namespace crowdtm
