#pragma once

#include <span>
#include <stdexcept>
#include <vector>

#include "crowdtm/mlp.hpp"

namespace crowdtm {

struct SgdConfig {
    double learning_rate = 0.1;
    double momentum = 0.9;
    double weight_decay = 0.0;
};

/// v <- momentum*v + (grad + wd*param); param <- param - lr*v.
inline void sgd_step(std::span<double> params, std::span<const double> grads,
                     std::span<double> velocity, const SgdConfig& cfg) {
    if (params.size() != grads.size() || params.size() != velocity.size())
        throw std::invalid_argument("sgd_step: size mismatch");
    for (std::size_t i = 0; i < params.size(); ++i) {
        velocity[i] = cfg.momentum * velocity[i] + (grads[i] + cfg.weight_decay * params[i]);
        params[i] -= cfg.learning_rate * velocity[i];
    }
}

/// Velocity buffers mirroring an MlpNetwork's parameter shapes.
struct MlpVelocity {
    std::vector<DenseMatrix> weight;
    std::vector<std::vector<double>> bias;

    explicit MlpVelocity(const MlpNetwork& net) {
        for (const auto& l : net.layers) {
            weight.emplace_back(l.weight.rows(), l.weight.cols());
            bias.emplace_back(l.bias.size(), 0.0);
        }
    }
};

inline void sgd_step(MlpNetwork& net, const MlpGrads& grads, MlpVelocity& vel,
                     const SgdConfig& cfg) {
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        sgd_step(net.layers[l].weight.values(), grads.layers[l].d_weight.values(),
                 vel.weight[l].values(), cfg);
        sgd_step(net.layers[l].bias, grads.layers[l].d_bias, vel.bias[l], cfg);
    }
}

} // namespace crowdtm
