#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "crowdtm/crowd.hpp"
#include "crowdtm/train_util.hpp"

namespace crowdtm {

struct DistilledExample {
    std::size_t instance_id = 0;
    int y_star = 0;
    std::vector<std::size_t> annotation_ids;  // indices into crowd.annotations
};

struct DistilledSet {
    std::vector<DistilledExample> examples;
    // annotator -> (example index, noisy label) pairs for that annotator
    std::vector<std::vector<std::pair<std::size_t, int>>> per_annotator;
    std::size_t total_pairs = 0;  // sum over j of m_j

    std::size_t m() const { return examples.size(); }
    std::size_t m_j(std::size_t annotator) const { return per_annotator[annotator].size(); }
};

struct WarmupResult {
    MlpNetwork net;
    std::vector<double> epoch_losses;
};

/// Warmup classifier trained on the pooled noisy annotation pairs
/// (the global noisy distribution).
inline WarmupResult train_warmup(const CrowdDataset& crowd,
                                 const std::vector<std::size_t>& hidden_widths,
                                 std::size_t epochs, std::size_t batch_size,
                                 const SgdConfig& sgd, std::uint64_t seed) {
    std::vector<LabeledPair> pairs;
    for (const auto& a : crowd.annotations)
        if (crowd.base.splits[a.instance_id] == Split::Train)
            pairs.push_back({a.instance_id, a.noisy_label});
    if (pairs.empty()) throw ConfigError("train_warmup: no training annotations");

    auto init_rng = make_stream(seed, "warmup_init");
    std::vector<std::size_t> widths = hidden_widths;
    widths.push_back(crowd.base.num_classes);
    std::vector<Activation> acts(hidden_widths.size(), Activation::Relu);
    acts.push_back(Activation::SoftmaxRows);
    WarmupResult res;
    res.net = init_network(crowd.base.dim, widths, acts, init_rng);
    if (epochs == 0) return res;
    auto rng = make_stream(seed, "warmup_train");
    res.epoch_losses =
        train_softmax_classifier(res.net, crowd.base.instances, pairs, epochs, batch_size, sgd, rng);
    return res;
}

/// Instance i is distilled iff max_k posterior(k|x_i) > tau (strict).
inline DistilledSet collect_distilled(const MlpNetwork& classifier, const CrowdDataset& crowd,
                                      double tau) {
    const double uniform = 1.0 / double(crowd.base.num_classes);
    if (tau <= uniform || tau > 1.0)
        throw ConfigError("collect_distilled: tau must lie in (1/C, 1]");
    DistilledSet set;
    set.per_annotator.resize(crowd.pool.num_annotators);
    for (std::size_t i = 0; i < crowd.base.size(); ++i) {
        if (crowd.base.splits[i] != Split::Train || crowd.annotations_of[i].empty()) continue;
        DenseMatrix probs = forward(classifier, single_row(crowd.base.instances[i]));
        std::size_t best = 0;
        for (std::size_t k = 1; k < probs.cols(); ++k)
            if (probs(0, k) > probs(0, best)) best = k;
        if (!(probs(0, best) > tau)) continue;
        DistilledExample ex;
        ex.instance_id = i;
        ex.y_star = int(best);
        ex.annotation_ids = crowd.annotations_of[i];
        const std::size_t ex_idx = set.examples.size();
        for (std::size_t aid : ex.annotation_ids) {
            const auto& a = crowd.annotations[aid];
            set.per_annotator[a.annotator_id].push_back({ex_idx, a.noisy_label});
            ++set.total_pairs;
        }
        set.examples.push_back(std::move(ex));
    }
    return set;
}

} // namespace crowdtm
