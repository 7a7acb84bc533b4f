#pragma once

#include <cstdint>
#include <vector>

#include "crowdtm/distill.hpp"
#include "crowdtm/train_util.hpp"

namespace crowdtm {

/// Linear head mapping the latent representation g(x) (dim h) to C*C
/// transition logits.
struct TransitionHead {
    DenseMatrix weight;        // h x (C*C)
    std::vector<double> bias;  // C*C; frozen at zero during training so heads
                               // assembled from graph-convolution node features
                               // (which carry no bias) live in the same
                               // function class as fine-tuned heads
    bool fallback = false;     // annotator had too few distilled examples
};

/// Shared backbone g(.) plus a head emitting a row-stochastic CxC matrix
/// per instance.
struct TransitionNetwork {
    MlpNetwork backbone;  // features -> latent h
    TransitionHead head;
    std::size_t num_classes = 0;

    std::size_t latent_dim() const { return backbone.output_dim; }
};

struct IndividualHeads {
    std::vector<TransitionHead> heads;  // one per annotator
};

inline std::vector<double> head_logits(std::span<const double> latent, const TransitionHead& head) {
    std::vector<double> logits(head.bias);
    for (std::size_t i = 0; i < head.weight.rows(); ++i) {
        const double g = latent[i];
        if (g == 0.0) continue;
        for (std::size_t j = 0; j < head.weight.cols(); ++j) logits[j] += g * head.weight(i, j);
    }
    return logits;
}

/// T-hat = row-wise softmax of head logits reshaped CxC.
inline DenseMatrix transition_from_logits(std::span<const double> logits, std::size_t C) {
    require_shape(logits.size() == C * C, "transition logits must have C*C entries");
    DenseMatrix T(C, C);
    std::copy(logits.begin(), logits.end(), T.values().begin());
    softmax_rows_inplace(T);
    return T;
}

inline std::vector<double> latent_of(const MlpNetwork& backbone, std::span<const double> x) {
    return forward(backbone, single_row(x)).values();
}

inline DenseMatrix predict_transition(const MlpNetwork& backbone, const TransitionHead& head,
                                      std::span<const double> x, std::size_t C) {
    return transition_from_logits(head_logits(latent_of(backbone, x), head), C);
}

inline DenseMatrix predict_transition(const TransitionNetwork& net, std::span<const double> x) {
    return predict_transition(net.backbone, net.head, x, net.num_classes);
}

namespace detail {

/// One minibatch of the transition objective: mean cross-entropy of
/// the y*-th transition row against the noisy label. Accumulates head grads
/// and, when backbone_grads is wanted, the latent grads for backprop.
struct TransitionBatchGrads {
    DenseMatrix d_head_weight;
    std::vector<double> d_head_bias;
    DenseMatrix d_latent;  // b x h
    double mean_loss = 0.0;
};

inline TransitionBatchGrads transition_batch_pass(const DenseMatrix& latents,
                                                  const TransitionHead& head, std::size_t C,
                                                  std::span<const int> y_star,
                                                  std::span<const int> y_bar) {
    const std::size_t b = latents.rows();
    TransitionBatchGrads out;
    out.d_head_weight = DenseMatrix(head.weight.rows(), head.weight.cols());
    out.d_head_bias.assign(head.bias.size(), 0.0);
    out.d_latent = DenseMatrix(b, latents.cols());
    for (std::size_t s = 0; s < b; ++s) {
        auto logits = head_logits(latents.row(s), head);
        const std::size_t off = std::size_t(y_star[s]) * C;
        auto probs = softmax(std::span<const double>(logits).subspan(off, C));
        out.mean_loss += cross_entropy_value(std::size_t(y_bar[s]), probs);
        // d logits (row y* only) = (p - onehot)/b
        std::vector<double> dlog(C);
        for (std::size_t k = 0; k < C; ++k)
            dlog[k] = (probs[k] - (k == std::size_t(y_bar[s]) ? 1.0 : 0.0)) / double(b);
        for (std::size_t k = 0; k < C; ++k) {
            out.d_head_bias[off + k] += dlog[k];
            for (std::size_t i = 0; i < head.weight.rows(); ++i)
                out.d_head_weight(i, off + k) += latents(s, i) * dlog[k];
        }
        for (std::size_t i = 0; i < head.weight.rows(); ++i) {
            double acc = 0.0;
            for (std::size_t k = 0; k < C; ++k) acc += dlog[k] * head.weight(i, off + k);
            out.d_latent(s, i) = acc;
        }
    }
    out.mean_loss /= double(b);
    return out;
}

} // namespace detail

struct TransitionTrainConfig {
    std::vector<std::size_t> backbone_widths = {32, 32};
    std::size_t latent_dim = 16;
    std::size_t epochs = 20;
    std::size_t batch_size = 32;
    SgdConfig sgd;
};

/// Shared transition objective over the whole distilled set; both backbone
/// and head train.
inline TransitionNetwork train_global(const CrowdDataset& crowd, const DistilledSet& distilled,
                                      const TransitionTrainConfig& cfg, std::uint64_t seed) {
    if (distilled.examples.empty()) throw ConfigError("train_global: empty distilled set");
    const std::size_t C = crowd.base.num_classes;

    auto init_rng = make_stream(seed, "transition_init");
    TransitionNetwork net;
    net.num_classes = C;
    std::vector<std::size_t> widths = cfg.backbone_widths;
    widths.push_back(cfg.latent_dim);
    std::vector<Activation> acts(widths.size(), Activation::Relu);
    acts.back() = Activation::Identity;
    net.backbone = init_network(crowd.base.dim, widths, acts, init_rng);
    net.head.weight = DenseMatrix(cfg.latent_dim, C * C);
    const double bound = std::sqrt(6.0 / double(cfg.latent_dim + C * C));
    for (auto& w : net.head.weight.values()) w = uniform_real(init_rng, -bound, bound);
    net.head.bias.assign(C * C, 0.0);

    // flat list of (example, annotation-label) pairs
    struct Pair { std::size_t ex; int y_bar; };
    std::vector<Pair> pairs;
    for (std::size_t e = 0; e < distilled.examples.size(); ++e)
        for (std::size_t aid : distilled.examples[e].annotation_ids)
            pairs.push_back({e, crowd.annotations[aid].noisy_label});

    MlpVelocity backbone_vel(net.backbone);
    DenseMatrix head_w_vel(net.head.weight.rows(), net.head.weight.cols());

    auto rng = make_stream(seed, "transition_train");
    std::vector<std::size_t> order(pairs.size());
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t bsz = std::min(cfg.batch_size, order.size() - start);
            std::vector<std::size_t> ids(bsz);
            std::vector<int> y_star(bsz), y_bar(bsz);
            for (std::size_t s = 0; s < bsz; ++s) {
                const Pair& p = pairs[order[start + s]];
                ids[s] = distilled.examples[p.ex].instance_id;
                y_star[s] = distilled.examples[p.ex].y_star;
                y_bar[s] = p.y_bar;
            }
            DenseMatrix batch = gather_rows(crowd.base.instances, ids);
            MlpCache cache;
            DenseMatrix latents = forward(net.backbone, batch, &cache);
            auto bg = detail::transition_batch_pass(latents, net.head, C, y_star, y_bar);
            MlpGrads grads = backward(net.backbone, cache, bg.d_latent);
            sgd_step(net.backbone, grads, backbone_vel, cfg.sgd);
            sgd_step(net.head.weight.values(), bg.d_head_weight.values(), head_w_vel.values(),
                     cfg.sgd);
        }
    }
    return net;
}

/// Per-annotator fine-tuning of the last layer; the backbone is
/// frozen, the head starts from the global head. Annotators with fewer than
/// min_examples distilled pairs keep the global head (fallback flag).
inline TransitionHead finetune_individual(const TransitionNetwork& global,
                                          const CrowdDataset& crowd, const DistilledSet& distilled,
                                          std::size_t annotator, std::size_t min_examples,
                                          std::size_t epochs, std::size_t batch_size,
                                          const SgdConfig& sgd, std::uint64_t seed) {
    TransitionHead head = global.head;
    const auto& pairs = distilled.per_annotator[annotator];
    if (pairs.size() < min_examples) {
        head.fallback = true;
        return head;
    }
    const std::size_t C = global.num_classes;

    // backbone frozen: precompute latents once
    std::vector<std::size_t> ids(pairs.size());
    std::vector<int> y_star(pairs.size()), y_bar(pairs.size());
    for (std::size_t s = 0; s < pairs.size(); ++s) {
        const auto& ex = distilled.examples[pairs[s].first];
        ids[s] = ex.instance_id;
        y_star[s] = ex.y_star;
        y_bar[s] = pairs[s].second;
    }
    DenseMatrix latents = forward(global.backbone, gather_rows(crowd.base.instances, ids));

    DenseMatrix w_vel(head.weight.rows(), head.weight.cols());
    auto rng = make_stream(seed, "finetune", annotator);
    std::vector<std::size_t> order(pairs.size());
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t start = 0; start < order.size(); start += batch_size) {
            const std::size_t bsz = std::min(batch_size, order.size() - start);
            DenseMatrix lat(bsz, latents.cols());
            std::vector<int> ys(bsz), yb(bsz);
            for (std::size_t s = 0; s < bsz; ++s) {
                const std::size_t idx = order[start + s];
                for (std::size_t c = 0; c < latents.cols(); ++c) lat(s, c) = latents(idx, c);
                ys[s] = y_star[idx];
                yb[s] = y_bar[idx];
            }
            auto bg = detail::transition_batch_pass(lat, head, C, ys, yb);
            sgd_step(head.weight.values(), bg.d_head_weight.values(), w_vel.values(), sgd);
        }
    }
    return head;
}

inline IndividualHeads finetune_all(const TransitionNetwork& global, const CrowdDataset& crowd,
                                    const DistilledSet& distilled, std::size_t min_examples,
                                    std::size_t epochs, std::size_t batch_size,
                                    const SgdConfig& sgd, std::uint64_t seed) {
    IndividualHeads heads;
    heads.heads.reserve(crowd.pool.num_annotators);
    for (std::size_t j = 0; j < crowd.pool.num_annotators; ++j)
        heads.heads.push_back(finetune_individual(global, crowd, distilled, j, min_examples,
                                                  epochs, batch_size, sgd, seed));
    return heads;
}

/// Mean transition loss, re-evaluated independently of the training loop.
inline double transition_objective(const TransitionNetwork& net, const CrowdDataset& crowd,
                                   const DistilledSet& distilled) {
    double total = 0.0;
    std::size_t count = 0;
    for (const auto& ex : distilled.examples) {
        DenseMatrix T = predict_transition(net, crowd.base.instances[ex.instance_id]);
        for (std::size_t aid : ex.annotation_ids) {
            total += cross_entropy_value(std::size_t(crowd.annotations[aid].noisy_label),
                                         T.row(std::size_t(ex.y_star)));
            ++count;
        }
    }
    return count ? total / double(count) : 0.0;
}

} // namespace crowdtm
