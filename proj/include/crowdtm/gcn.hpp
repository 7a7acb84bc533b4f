#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "crowdtm/graph.hpp"

namespace crowdtm {

/// Stacked graph-convolution weights mapping one-hot annotator nodes
/// (H^0 = identity) to per-annotator head parameters.
struct GcnMapper {
    std::vector<DenseMatrix> weights;  // W^l, Z^l x Z^{l+1}; Z^0 = R
    bool relu_final = false;           // default: identity final activation

    std::size_t num_layers() const { return weights.size(); }
};

inline GcnMapper init_gcn(std::size_t R, const std::vector<std::size_t>& layer_dims,
                          bool relu_final, std::mt19937_64& rng) {
    if (layer_dims.empty()) throw ConfigError("init_gcn: need at least one layer");
    GcnMapper m;
    m.relu_final = relu_final;
    std::size_t in = R;
    for (std::size_t z : layer_dims) {
        DenseMatrix w(in, z);
        const double bound = std::sqrt(6.0 / double(in + z));
        for (auto& v : w.values()) v = uniform_real(rng, -bound, bound);
        m.weights.push_back(std::move(w));
        in = z;
    }
    return m;
}

/// H^{l+1} = act(A-hat H^l W^l); returns H^0..H^L.
inline std::vector<DenseMatrix> gcn_forward(const GcnMapper& mapper, const DenseMatrix& a_hat) {
    std::vector<DenseMatrix> H;
    H.push_back(DenseMatrix::identity(a_hat.rows()));
    for (std::size_t l = 0; l < mapper.weights.size(); ++l) {
        DenseMatrix z = matmul(matmul(a_hat, H.back()), mapper.weights[l]);
        const bool relu = (l + 1 < mapper.weights.size()) || mapper.relu_final;
        if (relu)
            for (auto& v : z.values()) v = v > 0.0 ? v : 0.0;
        H.push_back(std::move(z));
    }
    return H;
}

/// Node j's final feature, reshaped h x (C*C), becomes annotator j's head
/// (no bias term).
inline IndividualHeads assemble_heads(const DenseMatrix& h_final, std::size_t latent_dim,
                                      std::size_t num_classes) {
    const std::size_t cc = num_classes * num_classes;
    if (h_final.cols() != latent_dim * cc)
        throw ConfigError("assemble_heads: final GCN width must equal h*C*C");
    IndividualHeads heads;
    for (std::size_t j = 0; j < h_final.rows(); ++j) {
        TransitionHead head;
        head.weight = DenseMatrix(latent_dim, cc);
        for (std::size_t a = 0; a < latent_dim; ++a)
            for (std::size_t m = 0; m < cc; ++m) head.weight(a, m) = h_final(j, a * cc + m);
        head.bias.assign(cc, 0.0);
        heads.heads.push_back(std::move(head));
    }
    return heads;
}

struct GcnTrainConfig {
    std::size_t epochs = 30;
    std::size_t batch_size = 64;
    SgdConfig sgd;
};

namespace detail {

/// Backward through the GCN stack given dL/dH^L; returns per-layer weight
/// gradients.
inline std::vector<DenseMatrix> gcn_backward(const GcnMapper& mapper, const DenseMatrix& a_hat,
                                             const std::vector<DenseMatrix>& H,
                                             DenseMatrix d_hl) {
    std::vector<DenseMatrix> d_weights(mapper.weights.size());
    DenseMatrix a_hat_t = transpose(a_hat);
    for (std::size_t l = mapper.weights.size(); l-- > 0;) {
        const bool relu = (l + 1 < mapper.weights.size()) || mapper.relu_final;
        DenseMatrix dz = std::move(d_hl);
        if (relu) {
            const DenseMatrix& out = H[l + 1];
            for (std::size_t i = 0; i < dz.size(); ++i)
                if (out.values()[i] <= 0.0) dz.values()[i] = 0.0;
        }
        DenseMatrix p = matmul(a_hat, H[l]);  // pre-weight aggregation
        d_weights[l] = matmul(transpose(p), dz);
        if (l > 0) d_hl = matmul(a_hat_t, matmul(dz, transpose(mapper.weights[l])));
    }
    return d_weights;
}

} // namespace detail

/// Graph-transfer objective: gradients flow through the head assembly and the GCN
/// stack into the weights only; backbone and graph stay fixed.
inline void train_gcn(GcnMapper& mapper, const DenseMatrix& a_hat, const CrowdDataset& crowd,
                      const DistilledSet& distilled, const MlpNetwork& frozen_backbone,
                      std::size_t num_classes, const GcnTrainConfig& cfg, std::uint64_t seed) {
    if (distilled.examples.empty()) throw ConfigError("train_gcn: empty distilled set");
    const std::size_t C = num_classes;
    const std::size_t cc = C * C;
    const std::size_t h = frozen_backbone.output_dim;
    if (mapper.weights.back().cols() != h * cc)
        throw ConfigError("train_gcn: final GCN width must equal h*C*C");

    // backbone frozen: latents per distilled example computed once
    std::vector<std::size_t> ids(distilled.examples.size());
    for (std::size_t e = 0; e < ids.size(); ++e) ids[e] = distilled.examples[e].instance_id;
    DenseMatrix latents = forward(frozen_backbone, gather_rows(crowd.base.instances, ids));

    struct Pair { std::size_t ex; std::size_t annotator; int y_bar; };
    std::vector<Pair> pairs;
    for (std::size_t e = 0; e < distilled.examples.size(); ++e)
        for (std::size_t aid : distilled.examples[e].annotation_ids)
            pairs.push_back({e, crowd.annotations[aid].annotator_id,
                             crowd.annotations[aid].noisy_label});

    std::vector<DenseMatrix> velocity;
    for (const auto& w : mapper.weights) velocity.emplace_back(w.rows(), w.cols());

    auto rng = make_stream(seed, "gcn_train");
    std::vector<std::size_t> order(pairs.size());
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t bsz = std::min(cfg.batch_size, order.size() - start);
            auto H = gcn_forward(mapper, a_hat);
            const DenseMatrix& hl = H.back();
            DenseMatrix d_hl(hl.rows(), hl.cols());
            for (std::size_t s = 0; s < bsz; ++s) {
                const Pair& p = pairs[order[start + s]];
                const auto& ex = distilled.examples[p.ex];
                const std::size_t off = std::size_t(ex.y_star) * C;
                // logits row y*: sum_a g_a * theta'(a, off+k)
                std::vector<double> logits(C, 0.0);
                for (std::size_t a = 0; a < h; ++a) {
                    const double g = latents(p.ex, a);
                    for (std::size_t k = 0; k < C; ++k)
                        logits[k] += g * hl(p.annotator, a * cc + off + k);
                }
                auto probs = softmax(logits);
                for (std::size_t k = 0; k < C; ++k) {
                    const double dlog =
                        (probs[k] - (k == std::size_t(p.y_bar) ? 1.0 : 0.0)) / double(bsz);
                    for (std::size_t a = 0; a < h; ++a)
                        d_hl(p.annotator, a * cc + off + k) += latents(p.ex, a) * dlog;
                }
            }
            auto d_weights = detail::gcn_backward(mapper, a_hat, H, std::move(d_hl));
            for (std::size_t l = 0; l < mapper.weights.size(); ++l)
                sgd_step(mapper.weights[l].values(), d_weights[l].values(), velocity[l].values(),
                         cfg.sgd);
        }
    }
}

struct ContractionPairResult {
    std::size_t i = 0, j = 0;
    double lhs = 0.0;
    double rhs = 0.0;
    bool premise_holds = false;  // i not in N_j and j not in N_i
    bool ok = false;
};

struct ContractionReport {
    bool skipped = false;
    std::string skip_reason;
    double spectral_norm_w = 0.0;
    std::vector<ContractionPairResult> pairs;

    bool all_ok(double slack = 1e-9) const {
        if (skipped) return false;
        for (const auto& p : pairs)
            if (p.lhs > p.rhs + slack) return false;
        return true;
    }
};

/// Numerical check of the one-layer contraction bound
/// ||h_i' - h_j'||_2 <= ||(h_i-h_j)/k + (Q_i-Q_j)/k||_2 * ||W||_2
/// on a uniform-degree binary adjacency (ReLU activation). Pairs that are
/// mutual neighbors violate the bound's decomposition premise and are
/// reported with premise_holds = false (evaluated with the exact aggregated
/// difference instead).
inline ContractionReport contraction_check(const DenseMatrix& weight, const DenseMatrix& adjacency,
                                           const DenseMatrix& h_l,
                                           const std::vector<std::pair<std::size_t, std::size_t>>& pairs) {
    ContractionReport report;
    const std::size_t R = adjacency.rows();
    double k = 0.0;
    for (std::size_t i = 0; i < R; ++i) {
        double deg = 0.0;
        for (std::size_t j = 0; j < R; ++j) deg += adjacency(i, j);
        if (i == 0) k = deg;
        if (deg != k || deg == 0.0) {
            report.skipped = true;
            report.skip_reason = "non-uniform node degree";
            return report;
        }
    }
    report.spectral_norm_w = spectral_norm(weight);

    // h'^ = ReLU((A/k) H W)
    DenseMatrix a_norm = adjacency;
    for (auto& v : a_norm.values()) v /= k;
    DenseMatrix h_next = matmul(matmul(a_norm, h_l), weight);
    for (auto& v : h_next.values()) v = v > 0.0 ? v : 0.0;

    const std::size_t dim = h_l.cols();
    for (auto [i, j] : pairs) {
        ContractionPairResult r;
        r.i = i;
        r.j = j;
        const bool i_in_nj = adjacency(j, i) != 0.0;
        const bool j_in_ni = adjacency(i, j) != 0.0;
        r.premise_holds = !i_in_nj && !j_in_ni;

        std::vector<double> diff(dim, 0.0);
        if (r.premise_holds) {
            // (h_i - h_j)/k + (Q_i - Q_j)/k with Q over non-common, non-self neighbors
            for (std::size_t c = 0; c < dim; ++c) diff[c] = (h_l(i, c) - h_l(j, c)) / k;
            for (std::size_t q = 0; q < R; ++q) {
                const bool in_i = adjacency(i, q) != 0.0;
                const bool in_j = adjacency(j, q) != 0.0;
                if (in_i && in_j) continue;  // common part cancels
                if (in_i && q != i)
                    for (std::size_t c = 0; c < dim; ++c) diff[c] += h_l(q, c) / k;
                if (in_j && q != j)
                    for (std::size_t c = 0; c < dim; ++c) diff[c] -= h_l(q, c) / k;
            }
        } else {
            for (std::size_t q = 0; q < R; ++q)
                for (std::size_t c = 0; c < dim; ++c)
                    diff[c] += (adjacency(i, q) - adjacency(j, q)) * h_l(q, c) / k;
        }

        std::vector<double> lhs_vec(weight.cols());
        for (std::size_t c = 0; c < weight.cols(); ++c)
            lhs_vec[c] = h_next(i, c) - h_next(j, c);
        r.lhs = norm_l2(lhs_vec);
        r.rhs = norm_l2(diff) * report.spectral_norm_w;
        r.ok = r.lhs <= r.rhs + 1e-9;
        report.pairs.push_back(r);
    }
    return report;
}

} // namespace crowdtm
