#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include "crowdtm/errors.hpp"
#include "crowdtm/matrix.hpp"
#include "crowdtm/rng.hpp"

namespace crowdtm {

enum class Split : std::uint8_t { Train, Val, Test };

inline const char* split_name(Split s) {
    switch (s) {
        case Split::Train: return "train";
        case Split::Val: return "val";
        case Split::Test: return "test";
    }
    return "?";
}

struct CleanDataset {
    std::size_t num_classes = 0;
    std::size_t dim = 0;
    std::vector<std::vector<double>> instances;
    std::vector<int> true_labels;
    std::vector<Split> splits;

    std::size_t size() const { return instances.size(); }
};

/// C Gaussian blobs with unit covariance and centers at pairwise distance
/// >= class_sep; balanced classes; 80/10/10 split.
inline CleanDataset make_blobs(std::size_t n, std::size_t d, std::size_t num_classes,
                               double class_sep, std::uint64_t seed) {
    if (num_classes < 1 || n < num_classes) throw ConfigError("make_blobs: need n >= C >= 1");
    if (d < 2) throw ConfigError("make_blobs: need d >= 2");

    // Centers on scaled coordinate axes: class k sits at
    // class_sep * (1 + k/d) * e_{k mod d}; any two centers are >= class_sep apart.
    std::vector<std::vector<double>> centers(num_classes, std::vector<double>(d, 0.0));
    for (std::size_t k = 0; k < num_classes; ++k)
        centers[k][k % d] = class_sep * double(1 + k / d);

    CleanDataset ds;
    ds.num_classes = num_classes;
    ds.dim = d;
    ds.instances.resize(n);
    ds.true_labels.resize(n);
    ds.splits.assign(n, Split::Train);

    auto rng = make_stream(seed, "blobs");
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t k = i % num_classes;
        ds.true_labels[i] = int(k);
        ds.instances[i].resize(d);
        for (std::size_t j = 0; j < d; ++j) ds.instances[i][j] = centers[k][j] + gauss(rng);
    }

    // Shuffled 80/10/10 split assignment.
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    const std::size_t n_train = (n * 8) / 10;
    const std::size_t n_val = n / 10;
    for (std::size_t pos = 0; pos < n; ++pos) {
        Split s = pos < n_train ? Split::Train : (pos < n_train + n_val ? Split::Val : Split::Test);
        ds.splits[order[pos]] = s;
    }
    return ds;
}

inline std::vector<std::size_t> split_indices(const CleanDataset& ds, Split s) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < ds.size(); ++i)
        if (ds.splits[i] == s) idx.push_back(i);
    return idx;
}

} // namespace crowdtm
