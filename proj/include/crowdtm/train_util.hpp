#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include "crowdtm/loss.hpp"
#include "crowdtm/mlp.hpp"
#include "crowdtm/sgd.hpp"

namespace crowdtm {

struct LabeledPair {
    std::size_t instance_id = 0;
    int label = 0;
};

inline DenseMatrix gather_rows(const std::vector<std::vector<double>>& features,
                               std::span<const std::size_t> ids) {
    DenseMatrix batch(ids.size(), features.empty() ? 0 : features[ids[0]].size());
    for (std::size_t r = 0; r < ids.size(); ++r)
        for (std::size_t c = 0; c < batch.cols(); ++c) batch(r, c) = features[ids[r]][c];
    return batch;
}

inline DenseMatrix single_row(std::span<const double> x) {
    DenseMatrix m(1, x.size());
    for (std::size_t i = 0; i < x.size(); ++i) m(0, i) = x[i];
    return m;
}

/// Minibatch SGD on mean cross-entropy of a softmax classifier over
/// (instance, label) pairs. Returns per-epoch mean losses.
inline std::vector<double> train_softmax_classifier(MlpNetwork& net,
                                                    const std::vector<std::vector<double>>& features,
                                                    const std::vector<LabeledPair>& pairs,
                                                    std::size_t epochs, std::size_t batch_size,
                                                    const SgdConfig& sgd, std::mt19937_64& rng) {
    if (pairs.empty()) throw ConfigError("train_softmax_classifier: empty training set");
    MlpVelocity vel(net);
    std::vector<std::size_t> order(pairs.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> epoch_losses;
    for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double total_loss = 0.0;
        for (std::size_t start = 0; start < order.size(); start += batch_size) {
            const std::size_t bsz = std::min(batch_size, order.size() - start);
            std::vector<std::size_t> ids(bsz);
            for (std::size_t b = 0; b < bsz; ++b) ids[b] = pairs[order[start + b]].instance_id;
            DenseMatrix batch = gather_rows(features, ids);
            MlpCache cache;
            DenseMatrix probs = forward(net, batch, &cache);
            // softmax + cross-entropy collapse: d logits = p - onehot; apply it
            // as d probs through the softmax backward for generality.
            DenseMatrix dprobs(probs.rows(), probs.cols());
            for (std::size_t b = 0; b < bsz; ++b) {
                const int y = pairs[order[start + b]].label;
                total_loss += cross_entropy_value(std::size_t(y), probs.row(b));
                dprobs(b, std::size_t(y)) =
                    -1.0 / (std::max(probs(b, std::size_t(y)), kProbFloor) * double(bsz));
            }
            MlpGrads grads = backward(net, cache, dprobs);
            sgd_step(net, grads, vel, sgd);
        }
        epoch_losses.push_back(total_loss / double(pairs.size()));
    }
    return epoch_losses;
}

} // namespace crowdtm
