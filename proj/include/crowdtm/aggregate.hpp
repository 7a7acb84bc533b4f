#pragma once

#include <cmath>
#include <map>
#include <vector>

#include "crowdtm/crowd.hpp"
#include "crowdtm/loss.hpp"

namespace crowdtm {

/// Most frequent label; ties break toward the lowest class index.
inline int majority_vote(std::span<const int> labels, std::size_t num_classes) {
    if (labels.empty()) throw DataError("majority_vote: no annotations");
    std::vector<std::size_t> counts(num_classes, 0);
    for (int l : labels) ++counts[std::size_t(l)];
    std::size_t best = 0;
    for (std::size_t c = 1; c < num_classes; ++c)
        if (counts[c] > counts[best]) best = c;
    return int(best);
}

struct AggregatedLabels {
    // instance id -> label, for every annotated instance
    std::map<std::size_t, int> labels;
};

inline AggregatedLabels majority_vote_all(const CrowdDataset& crowd) {
    AggregatedLabels out;
    for (std::size_t i = 0; i < crowd.base.size(); ++i) {
        if (crowd.annotations_of[i].empty()) continue;
        std::vector<int> ls;
        for (std::size_t aid : crowd.annotations_of[i])
            ls.push_back(crowd.annotations[aid].noisy_label);
        out.labels[i] = majority_vote(ls, crowd.base.num_classes);
    }
    return out;
}

struct DsModel {
    std::vector<double> prior;            // pi, length C
    std::vector<DenseMatrix> confusion;   // Pi^j, C x C row-stochastic
    // per annotated instance: posterior over classes
    std::map<std::size_t, std::vector<double>> posterior;
    std::vector<double> loglik_trace;     // smoothed objective per iteration
    std::size_t iterations = 0;
};

struct DsResult {
    DsModel model;
    AggregatedLabels labels;
};

namespace detail {

/// Smoothed (MAP) objective: observed-data log-likelihood plus the Dirichlet
/// log-prior terms induced by the additive smoothing alpha.
inline double ds_objective(const CrowdDataset& crowd, const std::vector<std::size_t>& items,
                           const std::vector<double>& prior,
                           const std::vector<DenseMatrix>& confusion, double alpha) {
    const std::size_t C = prior.size();
    double ll = 0.0;
    for (std::size_t i : items) {
        double best = -std::numeric_limits<double>::infinity();
        std::vector<double> logp(C);
        for (std::size_t c = 0; c < C; ++c) {
            double lp = std::log(std::max(prior[c], kProbFloor));
            for (std::size_t aid : crowd.annotations_of[i]) {
                const auto& a = crowd.annotations[aid];
                lp += std::log(std::max(confusion[a.annotator_id](c, std::size_t(a.noisy_label)),
                                        kProbFloor));
            }
            logp[c] = lp;
            best = std::max(best, lp);
        }
        double s = 0.0;
        for (double lp : logp) s += std::exp(lp - best);
        ll += best + std::log(s);
    }
    for (double p : prior) ll += alpha * std::log(std::max(p, kProbFloor));
    for (const auto& pi : confusion)
        for (double v : pi.values()) ll += alpha * std::log(std::max(v, kProbFloor));
    return ll;
}

} // namespace detail

/// Dawid-Skene EM with additive smoothing, initialized from majority vote.
inline DsResult dawid_skene_em(const CrowdDataset& crowd, std::size_t max_iters = 100,
                               double tol = 1e-6, double alpha = 0.01) {
    const std::size_t C = crowd.base.num_classes;
    const std::size_t R = crowd.pool.num_annotators;
    std::vector<std::size_t> items;
    for (std::size_t i = 0; i < crowd.base.size(); ++i)
        if (!crowd.annotations_of[i].empty()) items.push_back(i);
    if (items.empty()) throw DataError("dawid_skene_em: no annotated instances");

    DsResult res;
    auto mv = majority_vote_all(crowd);
    for (std::size_t i : items) {
        std::vector<double> post(C, 0.0);
        post[std::size_t(mv.labels.at(i))] = 1.0;
        res.model.posterior[i] = post;
    }

    res.model.prior.assign(C, 0.0);
    res.model.confusion.assign(R, DenseMatrix(C, C));

    auto m_step = [&]() {
        std::vector<double> prior(C, alpha);
        std::vector<DenseMatrix> conf(R, DenseMatrix(C, C, alpha));
        for (std::size_t i : items) {
            const auto& post = res.model.posterior[i];
            for (std::size_t c = 0; c < C; ++c) prior[c] += post[c];
            for (std::size_t aid : crowd.annotations_of[i]) {
                const auto& a = crowd.annotations[aid];
                for (std::size_t c = 0; c < C; ++c)
                    conf[a.annotator_id](c, std::size_t(a.noisy_label)) += post[c];
            }
        }
        double psum = 0.0;
        for (double p : prior) psum += p;
        for (auto& p : prior) p /= psum;
        for (auto& pi : conf) {
            for (std::size_t c = 0; c < C; ++c) {
                double s = 0.0;
                for (std::size_t l = 0; l < C; ++l) s += pi(c, l);
                for (std::size_t l = 0; l < C; ++l) pi(c, l) /= s;
            }
        }
        double max_change = 0.0;
        for (std::size_t c = 0; c < C; ++c)
            max_change = std::max(max_change, std::fabs(prior[c] - res.model.prior[c]));
        for (std::size_t j = 0; j < R; ++j)
            for (std::size_t t = 0; t < C * C; ++t)
                max_change = std::max(max_change, std::fabs(conf[j].values()[t] -
                                                            res.model.confusion[j].values()[t]));
        res.model.prior = std::move(prior);
        res.model.confusion = std::move(conf);
        return max_change;
    };

    auto e_step = [&]() {
        for (std::size_t i : items) {
            std::vector<double> logp(C);
            double best = -std::numeric_limits<double>::infinity();
            for (std::size_t c = 0; c < C; ++c) {
                double lp = std::log(std::max(res.model.prior[c], kProbFloor));
                for (std::size_t aid : crowd.annotations_of[i]) {
                    const auto& a = crowd.annotations[aid];
                    lp += std::log(std::max(
                        res.model.confusion[a.annotator_id](c, std::size_t(a.noisy_label)),
                        kProbFloor));
                }
                logp[c] = lp;
                best = std::max(best, lp);
            }
            double s = 0.0;
            for (std::size_t c = 0; c < C; ++c) {
                logp[c] = std::exp(logp[c] - best);
                s += logp[c];
            }
            for (std::size_t c = 0; c < C; ++c) logp[c] /= s;
            res.model.posterior[i] = std::move(logp);
        }
    };

    for (std::size_t it = 0; it < max_iters; ++it) {
        const double change = m_step();
        e_step();
        res.model.loglik_trace.push_back(
            detail::ds_objective(crowd, items, res.model.prior, res.model.confusion, alpha));
        res.model.iterations = it + 1;
        if (change < tol) break;
    }

    for (std::size_t i : items) {
        const auto& post = res.model.posterior[i];
        std::size_t best = 0;
        for (std::size_t c = 1; c < C; ++c)
            if (post[c] > post[best]) best = c;
        res.labels.labels[i] = int(best);
    }
    return res;
}

} // namespace crowdtm
