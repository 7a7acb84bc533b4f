#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "crowdtm/aggregate.hpp"
#include "crowdtm/gcn.hpp"
#include "crowdtm/transition.hpp"

namespace crowdtm {

struct CorrectedLossResult {
    double value = 0.0;
    std::vector<double> d_f;  // gradient w.r.t. the classifier output
    DenseMatrix d_t;          // gradient w.r.t. the transition matrix entries
};

/// Forward-corrected loss: cross-entropy of the predicted noisy posterior
/// f(x) . T-hat against the noisy label.
inline CorrectedLossResult forward_corrected_loss(std::span<const double> f_out,
                                                  const DenseMatrix& t_hat, int y_bar) {
    const std::size_t C = f_out.size();
    require_shape(t_hat.rows() == C && t_hat.cols() == C, "forward_corrected_loss: T must be CxC");
    for (std::size_t p = 0; p < C; ++p) {
        double s = 0.0;
        for (std::size_t q = 0; q < C; ++q) {
            if (t_hat(p, q) < -1e-12)
                throw std::invalid_argument("forward_corrected_loss: negative transition entry");
            s += t_hat(p, q);
        }
        if (std::fabs(s - 1.0) > 1e-6)
            throw std::invalid_argument("forward_corrected_loss: transition row not stochastic");
    }
    std::vector<double> noisy(C, 0.0);
    for (std::size_t p = 0; p < C; ++p)
        for (std::size_t q = 0; q < C; ++q) noisy[q] += f_out[p] * t_hat(p, q);

    CorrectedLossResult res;
    const std::size_t y = std::size_t(y_bar);
    const double qy = std::max(noisy[y], kProbFloor);
    res.value = -std::log(qy);
    res.d_f.assign(C, 0.0);
    res.d_t = DenseMatrix(C, C);
    for (std::size_t p = 0; p < C; ++p) {
        res.d_f[p] = -t_hat(p, y) / qy;
        res.d_t(p, y) = -f_out[p] / qy;
    }
    return res;
}

enum class HeadSource { Global, Individual, Interdependent };

/// Bundle of the estimated transition model used during classifier training.
/// The GCN mapper is only mutated when joint revision is enabled.
struct TransitionModel {
    const TransitionNetwork* global = nullptr;
    const IndividualHeads* individual = nullptr;  // required for Individual source
    GcnMapper* gcn = nullptr;                     // required for Interdependent source
    const DenseMatrix* a_hat = nullptr;
    HeadSource source = HeadSource::Global;
};

struct ClassifierTrainConfig {
    std::vector<std::size_t> hidden_widths = {32, 32};
    std::size_t epochs = 30;
    std::size_t batch_size = 32;
    SgdConfig sgd;
    double lr_decay = 1.0;  // multiplicative, per epoch
    bool joint_revision = false;
    double revision_lr_scale = 0.1;
};

/// Classifier trained with forward loss correction over all
/// training annotation pairs. With joint revision on, GCN weights receive
/// gradients at revision_lr_scale times the classifier learning rate.
inline MlpNetwork train_classifier(const CrowdDataset& crowd, const TransitionModel& model,
                                   const ClassifierTrainConfig& cfg, std::uint64_t seed) {
    if (model.global == nullptr) throw ConfigError("train_classifier: missing global network");
    if (model.source == HeadSource::Individual && model.individual == nullptr)
        throw ConfigError("train_classifier: missing individual heads");
    if (model.source == HeadSource::Interdependent && (model.gcn == nullptr || model.a_hat == nullptr))
        throw ConfigError("train_classifier: missing GCN mapper or graph");
    const std::size_t C = crowd.base.num_classes;
    const std::size_t cc = C * C;
    const std::size_t h = model.global->latent_dim();

    std::vector<const Annotation*> pairs;
    for (const auto& a : crowd.annotations)
        if (crowd.base.splits[a.instance_id] == Split::Train) pairs.push_back(&a);
    if (pairs.empty()) throw ConfigError("train_classifier: no training annotations");

    // latents of annotated instances under the frozen backbone
    std::vector<std::size_t> instance_of;  // unique annotated instances
    std::vector<std::size_t> latent_row(crowd.base.size(), SIZE_MAX);
    for (const auto* a : pairs)
        if (latent_row[a->instance_id] == SIZE_MAX) {
            latent_row[a->instance_id] = instance_of.size();
            instance_of.push_back(a->instance_id);
        }
    DenseMatrix latents =
        forward(model.global->backbone, gather_rows(crowd.base.instances, instance_of));

    // Fixed-T fast path: precompute each pair's transition matrix.
    const bool revise = cfg.joint_revision && model.source == HeadSource::Interdependent;
    std::vector<DenseMatrix> fixed_t;
    std::vector<DenseMatrix> gcn_h;
    if (model.source == HeadSource::Interdependent)
        gcn_h = gcn_forward(*model.gcn, *model.a_hat);
    auto logits_for = [&](const Annotation& a) {
        std::vector<double> logits(cc, 0.0);
        const std::size_t row = latent_row[a.instance_id];
        if (model.source == HeadSource::Global) {
            logits = model.global->head.bias;
            for (std::size_t i = 0; i < h; ++i) {
                const double g = latents(row, i);
                for (std::size_t m = 0; m < cc; ++m)
                    logits[m] += g * model.global->head.weight(i, m);
            }
        } else if (model.source == HeadSource::Individual) {
            const auto& head = model.individual->heads[a.annotator_id];
            logits = head.bias;
            for (std::size_t i = 0; i < h; ++i) {
                const double g = latents(row, i);
                for (std::size_t m = 0; m < cc; ++m) logits[m] += g * head.weight(i, m);
            }
        } else {
            const DenseMatrix& hl = gcn_h.back();
            for (std::size_t i = 0; i < h; ++i) {
                const double g = latents(row, i);
                for (std::size_t m = 0; m < cc; ++m)
                    logits[m] += g * hl(a.annotator_id, i * cc + m);
            }
        }
        return logits;
    };
    if (!revise) {
        fixed_t.reserve(pairs.size());
        for (const auto* a : pairs) fixed_t.push_back(transition_from_logits(logits_for(*a), C));
    }

    auto init_rng = make_stream(seed, "classifier_init");
    std::vector<std::size_t> widths = cfg.hidden_widths;
    widths.push_back(C);
    std::vector<Activation> acts(cfg.hidden_widths.size(), Activation::Relu);
    acts.push_back(Activation::SoftmaxRows);
    MlpNetwork net = init_network(crowd.base.dim, widths, acts, init_rng);
    MlpVelocity vel(net);

    std::vector<DenseMatrix> gcn_vel;
    if (revise)
        for (const auto& w : model.gcn->weights) gcn_vel.emplace_back(w.rows(), w.cols());
    SgdConfig revision_sgd = cfg.sgd;
    revision_sgd.learning_rate *= cfg.revision_lr_scale;

    auto rng = make_stream(seed, "classifier_train");
    std::vector<std::size_t> order(pairs.size());
    std::iota(order.begin(), order.end(), 0);
    SgdConfig epoch_sgd = cfg.sgd;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t bsz = std::min(cfg.batch_size, order.size() - start);
            std::vector<std::size_t> ids(bsz);
            for (std::size_t s = 0; s < bsz; ++s) ids[s] = pairs[order[start + s]]->instance_id;
            DenseMatrix batch = gather_rows(crowd.base.instances, ids);
            MlpCache cache;
            DenseMatrix probs = forward(net, batch, &cache);
            DenseMatrix dprobs(probs.rows(), probs.cols());
            if (revise) gcn_h = gcn_forward(*model.gcn, *model.a_hat);
            DenseMatrix d_hl;
            if (revise) d_hl = DenseMatrix(gcn_h.back().rows(), gcn_h.back().cols());
            for (std::size_t s = 0; s < bsz; ++s) {
                const Annotation& a = *pairs[order[start + s]];
                DenseMatrix T = revise ? transition_from_logits(logits_for(a), C)
                                       : fixed_t[order[start + s]];
                auto res = forward_corrected_loss(probs.row(s), T, a.noisy_label);
                for (std::size_t c = 0; c < C; ++c) dprobs(s, c) = res.d_f[c] / double(bsz);
                if (revise) {
                    // d logits = softmax-rows backward of d_t, then into theta'
                    const std::size_t row = latent_row[a.instance_id];
                    for (std::size_t p = 0; p < C; ++p) {
                        double dotv = 0.0;
                        for (std::size_t q = 0; q < C; ++q) dotv += res.d_t(p, q) * T(p, q);
                        for (std::size_t q = 0; q < C; ++q) {
                            const double dlog =
                                T(p, q) * (res.d_t(p, q) - dotv) / double(bsz);
                            if (dlog == 0.0) continue;
                            for (std::size_t i = 0; i < h; ++i)
                                d_hl(a.annotator_id, i * cc + p * C + q) +=
                                    latents(row, i) * dlog;
                        }
                    }
                }
            }
            MlpGrads grads = backward(net, cache, dprobs);
            sgd_step(net, grads, vel, epoch_sgd);
            if (revise) {
                auto d_weights = detail::gcn_backward(*model.gcn, *model.a_hat, gcn_h,
                                                      std::move(d_hl));
                for (std::size_t l = 0; l < model.gcn->weights.size(); ++l)
                    sgd_step(model.gcn->weights[l].values(), d_weights[l].values(),
                             gcn_vel[l].values(), revision_sgd);
            }
        }
        epoch_sgd.learning_rate *= cfg.lr_decay;
        revision_sgd.learning_rate *= cfg.lr_decay;
    }
    return net;
}

/// Plain cross-entropy training on aggregated labels (MV / DS baselines).
inline MlpNetwork train_on_labels(const CrowdDataset& crowd, const AggregatedLabels& agg,
                                  const ClassifierTrainConfig& cfg, std::uint64_t seed) {
    std::vector<LabeledPair> pairs;
    for (const auto& [i, label] : agg.labels)
        if (crowd.base.splits[i] == Split::Train) pairs.push_back({i, label});
    auto init_rng = make_stream(seed, "classifier_init");
    std::vector<std::size_t> widths = cfg.hidden_widths;
    widths.push_back(crowd.base.num_classes);
    std::vector<Activation> acts(cfg.hidden_widths.size(), Activation::Relu);
    acts.push_back(Activation::SoftmaxRows);
    MlpNetwork net = init_network(crowd.base.dim, widths, acts, init_rng);
    auto rng = make_stream(seed, "classifier_train");
    train_softmax_classifier(net, crowd.base.instances, pairs, cfg.epochs, cfg.batch_size, cfg.sgd,
                             rng);
    return net;
}

/// Fraction of correct predictions on the clean test split.
inline double evaluate_accuracy(const MlpNetwork& classifier, const CleanDataset& ds) {
    auto test = split_indices(ds, Split::Test);
    if (test.empty()) throw DataError("evaluate_accuracy: empty test split");
    DenseMatrix probs = forward(classifier, gather_rows(ds.instances, test));
    std::size_t correct = 0;
    for (std::size_t r = 0; r < test.size(); ++r) {
        std::size_t best = 0;
        for (std::size_t c = 1; c < probs.cols(); ++c)
            if (probs(r, c) > probs(r, best)) best = c;
        if (int(best) == ds.true_labels[test[r]]) ++correct;
    }
    return double(correct) / double(test.size());
}

/// Mean per-row L1 distance between estimated and ground-truth transition
/// matrices over sampled (train instance, annotator) pairs.
inline double transition_error(
    const std::function<DenseMatrix(std::size_t instance, std::size_t annotator)>& estimate,
    const CrowdDataset& crowd, std::size_t num_samples, std::uint64_t seed) {
    auto train = split_indices(crowd.base, Split::Train);
    if (train.empty()) throw DataError("transition_error: empty train split");
    auto rng = make_stream(seed, "transition_error");
    std::uniform_int_distribution<std::size_t> pick_i(0, train.size() - 1);
    std::uniform_int_distribution<std::size_t> pick_j(0, crowd.pool.num_annotators - 1);
    const std::size_t C = crowd.base.num_classes;
    double total = 0.0;
    for (std::size_t s = 0; s < num_samples; ++s) {
        const std::size_t i = train[pick_i(rng)];
        const std::size_t j = pick_j(rng);
        DenseMatrix est = estimate(i, j);
        DenseMatrix truth = ground_truth_transition(crowd.pool, j, crowd.base.instances[i], C);
        double err = 0.0;
        for (std::size_t p = 0; p < C; ++p)
            for (std::size_t q = 0; q < C; ++q) err += std::fabs(est(p, q) - truth(p, q));
        total += err / double(C);
    }
    return total / double(num_samples);
}

} // namespace crowdtm
