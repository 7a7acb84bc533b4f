#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <set>
#include <vector>

#include "crowdtm/dataset.hpp"
#include "crowdtm/errors.hpp"
#include "crowdtm/matrix.hpp"
#include "crowdtm/mlp.hpp"
#include "crowdtm/rng.hpp"

namespace crowdtm {

struct AnnotatorPool {
    std::size_t num_annotators = 0;  // R
    std::size_t num_groups = 0;      // G
    double noise_rate = 0.0;         // rho
    double noise_rate_max = 0.0;     // rho_max
    std::vector<double> flip_rate;   // q_j per annotator
    // projections[g][c] is the d-dim projection vector d_c of group g.
    std::vector<std::vector<std::vector<double>>> projections;

    std::size_t group_of(std::size_t annotator) const {
        return annotator / (num_annotators / num_groups);
    }
};

struct Annotation {
    std::size_t instance_id = 0;
    std::size_t annotator_id = 0;
    int noisy_label = 0;
};

struct CrowdDataset {
    CleanDataset base;
    AnnotatorPool pool;  // retained for evaluation only
    std::vector<Annotation> annotations;
    std::vector<std::vector<std::size_t>> annotations_of;  // instance -> annotation indices
    double avg_annotations = 0.0;

    void rebuild_index() {
        annotations_of.assign(base.size(), {});
        for (std::size_t a = 0; a < annotations.size(); ++a) {
            if (annotations[a].instance_id >= base.size())
                throw DataError("annotation references unknown instance");
            annotations_of[annotations[a].instance_id].push_back(a);
        }
    }
};

/// q_j ~ N(rho, 0.1^2) truncated to [0, rho_max], by rejection sampling.
inline std::vector<double> sample_flip_rates(std::size_t R, double rho, double rho_max,
                                             std::uint64_t seed) {
    if (rho < 0.0 || rho > rho_max || rho_max > 1.0)
        throw ConfigError("sample_flip_rates: need 0 <= rho <= rho_max <= 1");
    if (rho_max == 0.0) return std::vector<double>(R, 0.0);
    auto rng = make_stream(seed, "flip_rates");
    std::normal_distribution<double> gauss(rho, 0.1);
    std::vector<double> q(R);
    for (std::size_t j = 0; j < R; ++j) {
        std::size_t attempts = 0;
        double x;
        do {
            if (++attempts > 1000000) throw NumericError("sample_flip_rates: rejection cap hit");
            x = gauss(rng);
        } while (x < 0.0 || x > rho_max);
        q[j] = x;
    }
    return q;
}

/// Per-group projections d_1..d_C drawn from the standard normal.
inline AnnotatorPool make_pool(std::size_t R, std::size_t G, double rho, double rho_max,
                               std::size_t num_classes, std::size_t dim, std::uint64_t seed) {
    if (G == 0 || R == 0 || R % G != 0)
        throw ConfigError("make_pool: R must be a positive multiple of G");
    AnnotatorPool pool;
    pool.num_annotators = R;
    pool.num_groups = G;
    pool.noise_rate = rho;
    pool.noise_rate_max = rho_max;
    pool.flip_rate = sample_flip_rates(R, rho, rho_max, seed);
    auto rng = make_stream(seed, "projections");
    std::normal_distribution<double> gauss(0.0, 1.0);
    pool.projections.resize(G);
    for (std::size_t g = 0; g < G; ++g) {
        pool.projections[g].assign(num_classes, std::vector<double>(dim));
        for (auto& proj : pool.projections[g])
            for (auto& v : proj) v = gauss(rng);
    }
    return pool;
}

/// Flip distribution for one (instance, annotator): p_y = 1-q exactly,
/// off-diagonal mass q spread by softmax of the projections' scores.
inline std::vector<double> instance_flip_distribution(std::span<const double> x, int y,
                                                      const std::vector<std::vector<double>>& proj,
                                                      double q) {
    const std::size_t C = proj.size();
    std::vector<double> scores(C);
    for (std::size_t k = 0; k < C; ++k) scores[k] = dot(x, proj[k]);
    scores[std::size_t(y)] = -std::numeric_limits<double>::infinity();

    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < C; ++k)
        if (k != std::size_t(y)) mx = std::max(mx, scores[k]);
    double sum = 0.0;
    std::vector<double> p(C, 0.0);
    for (std::size_t k = 0; k < C; ++k) {
        if (k == std::size_t(y)) continue;
        p[k] = std::exp(scores[k] - mx);
        sum += p[k];
    }
    for (std::size_t k = 0; k < C; ++k)
        if (k != std::size_t(y)) p[k] = q * p[k] / sum;
    p[std::size_t(y)] = 1.0 - q;
    return p;
}

/// Ground-truth transition matrix T^j(x): row p is the flip distribution
/// when the true label is p.
inline DenseMatrix ground_truth_transition(const AnnotatorPool& pool, std::size_t annotator,
                                           std::span<const double> x, std::size_t num_classes) {
    const auto& proj = pool.projections[pool.group_of(annotator)];
    DenseMatrix T(num_classes, num_classes);
    for (std::size_t p = 0; p < num_classes; ++p) {
        auto row = instance_flip_distribution(x, int(p), proj, pool.flip_rate[annotator]);
        for (std::size_t c = 0; c < num_classes; ++c) T(p, c) = row[c];
    }
    return T;
}

/// Phase 1: each instance gets one uniformly random annotator. Phase 2: each
/// annotator picks floor((r_bar-1)*n/R) additional distinct instances.
inline std::vector<std::set<std::size_t>> assign_annotators(std::size_t n, std::size_t R,
                                                            double r_bar, std::uint64_t seed) {
    if (r_bar < 1.0) throw ConfigError("assign_annotators: need r_bar >= 1");
    if (r_bar > double(R)) throw ConfigError("assign_annotators: r_bar cannot exceed R");
    auto rng = make_stream(seed, "assignment");
    std::vector<std::set<std::size_t>> who(n);
    std::uniform_int_distribution<std::size_t> pick_annotator(0, R - 1);
    for (std::size_t i = 0; i < n; ++i) who[i].insert(pick_annotator(rng));

    const std::size_t extra = std::size_t((r_bar - 1.0) * double(n) / double(R));
    if (extra == 0) return who;
    std::vector<std::size_t> order(n);
    for (std::size_t j = 0; j < R; ++j) {
        std::iota(order.begin(), order.end(), 0);
        // partial Fisher-Yates: first `extra` entries are a uniform sample
        for (std::size_t t = 0; t < extra; ++t) {
            std::uniform_int_distribution<std::size_t> pick(t, n - 1);
            std::swap(order[t], order[pick(rng)]);
            who[order[t]].insert(j);
        }
    }
    return who;
}

/// Draw noisy labels from each annotator's flip distribution; the test split
/// stays clean
/// (no annotations).
inline CrowdDataset corrupt(const CleanDataset& clean, const AnnotatorPool& pool,
                            const std::vector<std::set<std::size_t>>& assignment,
                            std::uint64_t seed) {
    if (assignment.size() != clean.size())
        throw DataError("corrupt: assignment size does not match dataset");
    CrowdDataset crowd;
    crowd.base = clean;
    crowd.pool = pool;
    auto rng = make_stream(seed, "corrupt");
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::size_t annotated = 0;
    for (std::size_t i = 0; i < clean.size(); ++i) {
        if (clean.splits[i] == Split::Test) continue;
        for (std::size_t j : assignment[i]) {
            if (j >= pool.num_annotators) throw DataError("corrupt: unknown annotator id");
            auto p = instance_flip_distribution(clean.instances[i], clean.true_labels[i],
                                                pool.projections[pool.group_of(j)],
                                                pool.flip_rate[j]);
            const double u = unit(rng);
            double acc = 0.0;
            int label = int(p.size()) - 1;
            for (std::size_t k = 0; k < p.size(); ++k) {
                acc += p[k];
                if (u < acc) {
                    label = int(k);
                    break;
                }
            }
            crowd.annotations.push_back({i, j, label});
        }
        ++annotated;
    }
    crowd.avg_annotations = annotated ? double(crowd.annotations.size()) / double(annotated) : 0.0;
    crowd.rebuild_index();
    return crowd;
}

} // namespace crowdtm
