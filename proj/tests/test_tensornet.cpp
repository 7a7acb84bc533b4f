#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "crowdtm/gradcheck.hpp"
#include "crowdtm/loss.hpp"
#include "crowdtm/mlp.hpp"
#include "crowdtm/rng.hpp"
#include "crowdtm/sgd.hpp"

using namespace crowdtm;

namespace {

DenseMatrix random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng) {
    DenseMatrix m(r, c);
    for (auto& v : m.values()) v = uniform_real(rng, -1.0, 1.0);
    return m;
}

} // namespace

TEST_CASE("forward: all-zero logits with final softmax give uniform rows") {
    MlpNetwork net;
    net.input_dim = 3;
    net.output_dim = 4;
    MlpLayer l;
    l.weight = DenseMatrix(3, 4);  // all zeros
    l.bias.assign(4, 0.0);
    l.act = Activation::SoftmaxRows;
    net.layers.push_back(l);

    auto rng = make_stream(7, "test");
    DenseMatrix batch = random_matrix(5, 3, rng);
    DenseMatrix out = forward(net, batch);
    for (std::size_t i = 0; i < out.rows(); ++i)
        for (std::size_t j = 0; j < out.cols(); ++j)
            REQUIRE(out(i, j) == Catch::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("forward: identity weight, zero bias, identity activation is the identity map") {
    MlpNetwork net;
    net.input_dim = 4;
    net.output_dim = 4;
    MlpLayer l;
    l.weight = DenseMatrix::identity(4);
    l.bias.assign(4, 0.0);
    l.act = Activation::Identity;
    net.layers.push_back(l);

    auto rng = make_stream(11, "test");
    DenseMatrix batch = random_matrix(6, 4, rng);
    DenseMatrix out = forward(net, batch);
    REQUIRE(out == batch);
}

TEST_CASE("forward: random 2-layer net matches hand-composed matrix arithmetic") {
    auto rng = make_stream(13, "test");
    MlpNetwork net = init_network(3, {5, 2}, {Activation::Relu, Activation::Identity}, rng);
    DenseMatrix batch = random_matrix(4, 3, rng);

    DenseMatrix out = forward(net, batch);

    // independent re-implementation: batch*W0 + b0, relu, *W1 + b1
    DenseMatrix z = matmul(batch, net.layers[0].weight);
    for (std::size_t i = 0; i < z.rows(); ++i)
        for (std::size_t j = 0; j < z.cols(); ++j) {
            z(i, j) += net.layers[0].bias[j];
            if (z(i, j) < 0.0) z(i, j) = 0.0;
        }
    DenseMatrix y = matmul(z, net.layers[1].weight);
    for (std::size_t i = 0; i < y.rows(); ++i)
        for (std::size_t j = 0; j < y.cols(); ++j) y(i, j) += net.layers[1].bias[j];

    REQUIRE(out.rows() == y.rows());
    for (std::size_t i = 0; i < y.size(); ++i)
        REQUIRE(out.values()[i] == Catch::Approx(y.values()[i]).margin(1e-14));
}

TEST_CASE("forward: batch width mismatch raises a shape error") {
    auto rng = make_stream(1, "test");
    MlpNetwork net = init_network(3, {2}, {Activation::Identity}, rng);
    DenseMatrix bad(2, 5);
    REQUIRE_THROWS_AS(forward(net, bad), std::invalid_argument);
}

TEST_CASE("backward: linear layer with loss = sum of outputs gives grad_W = X^T 1") {
    MlpNetwork net;
    net.input_dim = 3;
    net.output_dim = 2;
    auto rng = make_stream(17, "test");
    MlpLayer l;
    l.weight = random_matrix(3, 2, rng);
    l.bias.assign(2, 0.0);
    l.act = Activation::Identity;
    net.layers.push_back(l);

    DenseMatrix batch = random_matrix(4, 3, rng);
    MlpCache cache;
    forward(net, batch, &cache);
    DenseMatrix ones(4, 2, 1.0);
    MlpGrads grads = backward(net, cache, ones);

    for (std::size_t i = 0; i < 3; ++i) {
        double col_sum = 0.0;
        for (std::size_t b = 0; b < 4; ++b) col_sum += batch(b, i);
        for (std::size_t j = 0; j < 2; ++j)
            REQUIRE(grads.layers[0].d_weight(i, j) == Catch::Approx(col_sum).margin(1e-12));
    }
    for (std::size_t j = 0; j < 2; ++j)
        REQUIRE(grads.layers[0].d_bias[j] == Catch::Approx(4.0).margin(1e-12));
}

TEST_CASE("backward: zero loss gradient gives all-zero parameter gradients") {
    auto rng = make_stream(19, "test");
    MlpNetwork net = init_network(3, {4, 2}, {Activation::Relu, Activation::SoftmaxRows}, rng);
    DenseMatrix batch = random_matrix(5, 3, rng);
    MlpCache cache;
    forward(net, batch, &cache);
    DenseMatrix zeros(5, 2);
    MlpGrads grads = backward(net, cache, zeros);
    for (const auto& lg : grads.layers) {
        for (double v : lg.d_weight.values()) REQUIRE(v == 0.0);
        for (double v : lg.d_bias) REQUIRE(v == 0.0);
    }
}

TEST_CASE("backward: gradients match central finite differences on a softmax classifier") {
    auto rng = make_stream(23, "test");
    MlpNetwork net = init_network(3, {4, 3}, {Activation::Relu, Activation::SoftmaxRows}, rng);
    DenseMatrix batch = random_matrix(6, 3, rng);
    std::vector<int> targets = {0, 1, 2, 1, 0, 2};

    auto loss_of = [&]() {
        DenseMatrix probs = forward(net, batch);
        double total = 0.0;
        for (std::size_t b = 0; b < probs.rows(); ++b)
            total += cross_entropy_value(std::size_t(targets[b]), probs.row(b));
        return total / double(probs.rows());
    };

    // analytic full-batch gradients
    MlpCache cache;
    DenseMatrix probs = forward(net, batch, &cache);
    DenseMatrix dprobs(probs.rows(), probs.cols());
    for (std::size_t b = 0; b < probs.rows(); ++b) {
        const std::size_t y = std::size_t(targets[b]);
        dprobs(b, y) = -1.0 / (std::max(probs(b, y), kProbFloor) * double(probs.rows()));
    }
    MlpGrads grads = backward(net, cache, dprobs);

    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        auto fn = [&](std::span<const double>) { return loss_of(); };
        auto wrep = finite_diff_check(fn, net.layers[l].weight.values(),
                                      grads.layers[l].d_weight.values(), 1e-5, 1e-4);
        INFO("layer " << l << " weight max rel err " << wrep.max_rel_err);
        REQUIRE(wrep.pass);
        auto brep = finite_diff_check(fn, net.layers[l].bias, grads.layers[l].d_bias, 1e-5, 1e-4);
        INFO("layer " << l << " bias max rel err " << brep.max_rel_err);
        REQUIRE(brep.pass);
    }
}

TEST_CASE("cross_entropy: perfect one-hot prediction gives zero loss") {
    std::vector<double> target = {0.0, 0.0, 1.0, 0.0};
    std::vector<double> probs = {0.0, 0.0, 1.0, 0.0};
    auto res = cross_entropy(target, probs);
    REQUIRE(res.value == Catch::Approx(0.0).margin(1e-15));
}

TEST_CASE("cross_entropy: uniform prediction over four classes gives log 4") {
    std::vector<double> target = {1.0, 0.0, 0.0, 0.0};
    std::vector<double> probs(4, 0.25);
    auto res = cross_entropy(target, probs);
    REQUIRE(res.value == Catch::Approx(std::log(4.0)).epsilon(1e-12));
}

TEST_CASE("cross_entropy: random probabilities match -log p_k and its gradient") {
    auto rng = make_stream(29, "test");
    std::vector<double> probs = {0.1, 0.2, 0.4, 0.3};
    for (std::size_t k = 0; k < 4; ++k) {
        std::vector<double> target(4, 0.0);
        target[k] = 1.0;
        auto res = cross_entropy(target, probs);
        REQUIRE(res.value == Catch::Approx(-std::log(probs[k])).epsilon(1e-12));
        for (std::size_t j = 0; j < 4; ++j) {
            const double expected = j == k ? -1.0 / probs[k] : 0.0;
            REQUIRE(res.d_probs[j] == Catch::Approx(expected).margin(1e-12));
        }
    }
    (void)rng;
}

TEST_CASE("cross_entropy: non-one-hot target is rejected") {
    std::vector<double> probs(3, 1.0 / 3.0);
    std::vector<double> two_hot = {1.0, 1.0, 0.0};
    std::vector<double> no_hot = {0.0, 0.0, 0.0};
    std::vector<double> fractional = {0.5, 0.5, 0.0};
    REQUIRE_THROWS_AS(cross_entropy(two_hot, probs), std::invalid_argument);
    REQUIRE_THROWS_AS(cross_entropy(no_hot, probs), std::invalid_argument);
    REQUIRE_THROWS_AS(cross_entropy(fractional, probs), std::invalid_argument);
}

TEST_CASE("sgd_step: zero learning rate leaves parameters but updates velocity") {
    std::vector<double> p = {1.0, -2.0};
    std::vector<double> g = {0.5, 0.25};
    std::vector<double> v = {0.0, 0.0};
    SgdConfig cfg;
    cfg.learning_rate = 0.0;
    cfg.momentum = 0.9;
    sgd_step(p, g, v, cfg);
    REQUIRE(p[0] == 1.0);
    REQUIRE(p[1] == -2.0);
    REQUIRE(v[0] == 0.5);
    REQUIRE(v[1] == 0.25);
}

TEST_CASE("sgd_step: no momentum and no decay is plain gradient descent") {
    std::vector<double> p = {1.0, -2.0};
    std::vector<double> g = {0.5, 0.25};
    std::vector<double> v = {0.0, 0.0};
    SgdConfig cfg;
    cfg.learning_rate = 0.1;
    cfg.momentum = 0.0;
    cfg.weight_decay = 0.0;
    sgd_step(p, g, v, cfg);
    REQUIRE(p[0] == Catch::Approx(1.0 - 0.1 * 0.5).margin(1e-15));
    REQUIRE(p[1] == Catch::Approx(-2.0 - 0.1 * 0.25).margin(1e-15));
}

TEST_CASE("sgd_step: second step with momentum 0.9 on a constant gradient moves lr*1.9*g") {
    std::vector<double> p = {3.0};
    std::vector<double> g = {0.4};
    std::vector<double> v = {0.0};
    SgdConfig cfg;
    cfg.learning_rate = 0.05;
    cfg.momentum = 0.9;
    sgd_step(p, g, v, cfg);
    const double after_first = p[0];
    sgd_step(p, g, v, cfg);
    // unrolled: v1 = g, v2 = 0.9 g + g = 1.9 g
    REQUIRE(after_first - p[0] == Catch::Approx(0.05 * 1.9 * 0.4).epsilon(1e-12));
}

TEST_CASE("sgd_step: identical inputs give bit-identical results") {
    auto run_once = [] {
        std::vector<double> p = {0.7, -0.3, 1.1};
        std::vector<double> v = {0.0, 0.0, 0.0};
        SgdConfig cfg;
        cfg.learning_rate = 0.03;
        auto rng = make_stream(5, "sgd_repro");
        for (int i = 0; i < 50; ++i) {
            std::vector<double> g = {uniform_real(rng, -1, 1), uniform_real(rng, -1, 1),
                                     uniform_real(rng, -1, 1)};
            sgd_step(p, g, v, cfg);
        }
        return p;
    };
    REQUIRE(run_once() == run_once());
}

TEST_CASE("finite_diff_check: quadratic loss matches its analytic gradient") {
    std::vector<double> theta = {0.3, -1.2, 2.5};
    std::vector<double> grad = theta;  // d(0.5 ||t||^2) = t
    auto fn = [](std::span<const double> t) {
        double s = 0.0;
        for (double x : t) s += x * x;
        return 0.5 * s;
    };
    auto rep = finite_diff_check(fn, theta, grad, 1e-5, 1e-6);
    REQUIRE(rep.pass);
}

TEST_CASE("finite_diff_check: zero step is rejected") {
    std::vector<double> theta = {1.0};
    std::vector<double> grad = {1.0};
    auto fn = [](std::span<const double> t) { return t[0]; };
    REQUIRE_THROWS_AS(finite_diff_check(fn, theta, grad, 0.0, 1e-4), ConfigError);
}

TEST_CASE("softmax rows: non-negative, sums to one, invariant to constant shifts") {
    auto rng = make_stream(31, "test");
    DenseMatrix logits = random_matrix(8, 5, rng);
    DenseMatrix shifted = logits;
    for (std::size_t i = 0; i < shifted.rows(); ++i)
        for (std::size_t j = 0; j < shifted.cols(); ++j) shifted(i, j) += 3.7;

    DenseMatrix a = logits, b = shifted;
    softmax_rows_inplace(a);
    softmax_rows_inplace(b);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double sum = 0.0;
        for (std::size_t j = 0; j < a.cols(); ++j) {
            REQUIRE(a(i, j) >= 0.0);
            sum += a(i, j);
            REQUIRE(a(i, j) == Catch::Approx(b(i, j)).margin(1e-9));
        }
        REQUIRE(sum == Catch::Approx(1.0).margin(1e-9));
    }
}
