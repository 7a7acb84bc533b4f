#pragma once

#include <algorithm>
#include <numeric>
#include <vector>

#include "crowdtm/svd.hpp"
#include "crowdtm/transition.hpp"

namespace crowdtm {

enum class SimilarityNorm { L2, L1 };

struct SimilarityGraph {
    DenseMatrix similarity;  // S, R x R
    DenseMatrix adjacency;   // A, binary KNN
    DenseMatrix denoised;    // A*, binary after Graph-SVD
    DenseMatrix normalized;  // A-hat, row-stochastic
    std::size_t k = 0;
};

inline std::vector<double> flatten_head(const TransitionHead& head) {
    std::vector<double> v = head.weight.values();
    v.insert(v.end(), head.bias.begin(), head.bias.end());
    return v;
}

/// S_ij = (theta_i . theta_j) / (|theta_i| |theta_j|) under the selected norm.
inline DenseMatrix similarity(const std::vector<std::vector<double>>& thetas,
                              SimilarityNorm norm = SimilarityNorm::L2) {
    const std::size_t R = thetas.size();
    std::vector<double> norms(R);
    for (std::size_t i = 0; i < R; ++i) {
        norms[i] = norm == SimilarityNorm::L2 ? norm_l2(thetas[i]) : norm_l1(thetas[i]);
        if (norms[i] == 0.0) throw NumericError("similarity: zero-norm head");
    }
    DenseMatrix S(R, R);
    for (std::size_t i = 0; i < R; ++i) {
        for (std::size_t j = i; j < R; ++j) {
            const double s = dot(thetas[i], thetas[j]) / (norms[i] * norms[j]);
            S(i, j) = s;
            S(j, i) = s;
        }
    }
    return S;
}

inline DenseMatrix similarity(const IndividualHeads& heads,
                              SimilarityNorm norm = SimilarityNorm::L2) {
    std::vector<std::vector<double>> thetas;
    thetas.reserve(heads.heads.size());
    for (const auto& h : heads.heads) thetas.push_back(flatten_head(h));
    return similarity(thetas, norm);
}

/// Similarity of the per-annotator head deviations from the shared head.
/// All fine-tuned heads share the global head as their starting point, so the
/// cosine of the raw parameter vectors is dominated by that common component;
/// centering leaves only the annotator-specific deviation. A zero deviation
/// (annotator kept the shared head) gets a zero similarity row instead of a
/// division by zero.
inline DenseMatrix centered_similarity(const IndividualHeads& heads, const TransitionHead& shared,
                                       SimilarityNorm norm = SimilarityNorm::L2) {
    const std::vector<double> base = flatten_head(shared);
    const std::size_t R = heads.heads.size();
    std::vector<std::vector<double>> deltas(R);
    std::vector<double> norms(R);
    for (std::size_t i = 0; i < R; ++i) {
        deltas[i] = flatten_head(heads.heads[i]);
        for (std::size_t t = 0; t < base.size(); ++t) deltas[i][t] -= base[t];
        norms[i] = norm == SimilarityNorm::L2 ? norm_l2(deltas[i]) : norm_l1(deltas[i]);
    }
    DenseMatrix S(R, R);
    for (std::size_t i = 0; i < R; ++i) {
        S(i, i) = 1.0;
        for (std::size_t j = i + 1; j < R; ++j) {
            if (norms[i] == 0.0 || norms[j] == 0.0) continue;
            const double s = dot(deltas[i], deltas[j]) / (norms[i] * norms[j]);
            S(i, j) = s;
            S(j, i) = s;
        }
    }
    return S;
}

/// Row i keeps self plus the k-1 most similar other nodes; ties break toward
/// the lower index.
inline DenseMatrix knn_adjacency(const DenseMatrix& S, std::size_t k) {
    const std::size_t R = S.rows();
    if (k < 1 || k > R) throw ConfigError("knn_adjacency: need 1 <= k <= R");
    DenseMatrix A(R, R);
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < R; ++i) {
        A(i, i) = 1.0;
        idx.clear();
        for (std::size_t j = 0; j < R; ++j)
            if (j != i) idx.push_back(j);
        std::stable_sort(idx.begin(), idx.end(),
                         [&](std::size_t a, std::size_t b) { return S(i, a) > S(i, b); });
        for (std::size_t t = 0; t + 1 < k; ++t) A(i, idx[t]) = 1.0;
    }
    return A;
}

/// Graph-SVD purification: rank-r reconstruction, binarized at 0.5, diagonal
/// forced to one.
inline DenseMatrix graph_svd_denoise(const DenseMatrix& A, std::size_t rank) {
    if (rank < 1 || rank > A.rows()) throw ConfigError("graph_svd_denoise: need 1 <= rank <= R");
    DenseMatrix rec = truncated_reconstruction(jacobi_svd(A), rank);
    DenseMatrix out(A.rows(), A.cols());
    for (std::size_t i = 0; i < rec.size(); ++i)
        out.values()[i] = rec.values()[i] > 0.5 ? 1.0 : 0.0;
    for (std::size_t i = 0; i < out.rows(); ++i) out(i, i) = 1.0;
    return out;
}

/// Row-stochastic normalization A-hat_ij = A*_ij / degree(i).
inline DenseMatrix normalize_adjacency(const DenseMatrix& A_star) {
    DenseMatrix out = A_star;
    for (std::size_t i = 0; i < out.rows(); ++i) {
        double deg = 0.0;
        for (std::size_t j = 0; j < out.cols(); ++j) deg += out(i, j);
        if (deg == 0.0) throw NumericError("normalize_adjacency: empty row");
        for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) /= deg;
    }
    return out;
}

inline SimilarityGraph build_similarity_graph(const IndividualHeads& heads,
                                              const TransitionHead& shared, std::size_t k,
                                              std::size_t svd_rank,
                                              SimilarityNorm norm = SimilarityNorm::L2) {
    SimilarityGraph g;
    g.k = k;
    g.similarity = centered_similarity(heads, shared, norm);
    g.adjacency = knn_adjacency(g.similarity, k);
    g.denoised = graph_svd_denoise(g.adjacency, svd_rank);
    g.normalized = normalize_adjacency(g.denoised);
    return g;
}

} // namespace crowdtm
