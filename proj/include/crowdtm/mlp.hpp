#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "crowdtm/matrix.hpp"
#include "crowdtm/rng.hpp"

namespace crowdtm {

enum class Activation { Relu, Identity, SoftmaxRows };

/// Numerically stabilized softmax over each row (row max subtracted).
inline void softmax_rows_inplace(DenseMatrix& m) {
    for (std::size_t i = 0; i < m.rows(); ++i) {
        auto r = m.row(i);
        double mx = r[0];
        for (double x : r) mx = std::max(mx, x);
        double sum = 0.0;
        for (auto& x : r) {
            x = std::exp(x - mx);
            sum += x;
        }
        for (auto& x : r) x /= sum;
    }
}

inline std::vector<double> softmax(std::span<const double> logits) {
    DenseMatrix m(1, logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) m(0, i) = logits[i];
    softmax_rows_inplace(m);
    return m.values();
}

struct MlpLayer {
    DenseMatrix weight;        // in x out
    std::vector<double> bias;  // out
    Activation act = Activation::Identity;
};

struct MlpNetwork {
    std::vector<MlpLayer> layers;
    std::size_t input_dim = 0;
    std::size_t output_dim = 0;
};

struct MlpCache {
    std::vector<DenseMatrix> inputs;   // input to each layer
    std::vector<DenseMatrix> outputs;  // post-activation output of each layer
};

struct LayerGrads {
    DenseMatrix d_weight;
    std::vector<double> d_bias;
};

struct MlpGrads {
    std::vector<LayerGrads> layers;
    DenseMatrix d_input;
};

/// Glorot-uniform weights, zero biases.
inline MlpNetwork init_network(std::size_t input_dim, const std::vector<std::size_t>& widths,
                               const std::vector<Activation>& acts, std::mt19937_64& rng) {
    if (widths.size() != acts.size())
        throw std::invalid_argument("init_network: widths/activations length mismatch");
    MlpNetwork net;
    net.input_dim = input_dim;
    std::size_t in = input_dim;
    for (std::size_t l = 0; l < widths.size(); ++l) {
        if (acts[l] == Activation::SoftmaxRows && l + 1 != widths.size())
            throw std::invalid_argument("softmax-rows only permitted as final activation");
        MlpLayer layer;
        layer.weight = DenseMatrix(in, widths[l]);
        const double bound = std::sqrt(6.0 / double(in + widths[l]));
        for (auto& w : layer.weight.values()) w = uniform_real(rng, -bound, bound);
        layer.bias.assign(widths[l], 0.0);
        layer.act = acts[l];
        net.layers.push_back(std::move(layer));
        in = widths[l];
    }
    net.output_dim = in;
    return net;
}

inline DenseMatrix forward(const MlpNetwork& net, const DenseMatrix& batch, MlpCache* cache = nullptr) {
    require_shape(batch.cols() == net.input_dim, "forward: batch cols vs input_dim");
    DenseMatrix x = batch;
    if (cache) {
        cache->inputs.clear();
        cache->outputs.clear();
    }
    for (const auto& layer : net.layers) {
        if (cache) cache->inputs.push_back(x);
        DenseMatrix z = matmul(x, layer.weight);
        for (std::size_t i = 0; i < z.rows(); ++i)
            for (std::size_t j = 0; j < z.cols(); ++j) z(i, j) += layer.bias[j];
        switch (layer.act) {
            case Activation::Relu:
                for (auto& v : z.values()) v = v > 0.0 ? v : 0.0;
                break;
            case Activation::SoftmaxRows:
                softmax_rows_inplace(z);
                break;
            case Activation::Identity:
                break;
        }
        if (cache) cache->outputs.push_back(z);
        x = std::move(z);
    }
    return x;
}

/// Backward pass from dL/d(output). Requires the cache from the matching forward.
inline MlpGrads backward(const MlpNetwork& net, const MlpCache& cache, const DenseMatrix& loss_grad) {
    if (cache.outputs.size() != net.layers.size())
        throw std::logic_error("backward: cache does not match network");
    require_shape(loss_grad.rows() == cache.outputs.back().rows() &&
                      loss_grad.cols() == cache.outputs.back().cols(),
                  "backward: loss_grad vs output");
    MlpGrads grads;
    grads.layers.resize(net.layers.size());
    DenseMatrix da = loss_grad;
    for (std::size_t li = net.layers.size(); li-- > 0;) {
        const auto& layer = net.layers[li];
        const DenseMatrix& out = cache.outputs[li];
        const DenseMatrix& in = cache.inputs[li];
        DenseMatrix dz = da;
        switch (layer.act) {
            case Activation::Relu:
                for (std::size_t i = 0; i < dz.size(); ++i)
                    if (out.values()[i] <= 0.0) dz.values()[i] = 0.0;
                break;
            case Activation::SoftmaxRows:
                for (std::size_t i = 0; i < dz.rows(); ++i) {
                    double s = 0.0;
                    for (std::size_t j = 0; j < dz.cols(); ++j) s += da(i, j) * out(i, j);
                    for (std::size_t j = 0; j < dz.cols(); ++j)
                        dz(i, j) = out(i, j) * (da(i, j) - s);
                }
                break;
            case Activation::Identity:
                break;
        }
        grads.layers[li].d_weight = matmul(transpose(in), dz);
        grads.layers[li].d_bias.assign(layer.weight.cols(), 0.0);
        for (std::size_t i = 0; i < dz.rows(); ++i)
            for (std::size_t j = 0; j < dz.cols(); ++j) grads.layers[li].d_bias[j] += dz(i, j);
        da = matmul(dz, transpose(layer.weight));
    }
    grads.d_input = std::move(da);
    return grads;
}

} // namespace crowdtm
