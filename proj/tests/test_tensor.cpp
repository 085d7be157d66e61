#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "testutil.hpp"
#include "wmlab/checkpoint.hpp"
#include "wmlab/optim.hpp"
#include "wmlab/rng.hpp"
#include "wmlab/tensor.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>

using namespace wmlab;
using nn::Tensor;

TEST_CASE("conv2d identity kernel") {
    auto input = Tensor::from_data({1, 4, 4}, {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16});
    auto kernel = Tensor::from_data({1, 1, 1, 1}, {1.0f});
    auto out = nn::conv2d(input, kernel, 1, 0);
    REQUIRE(out.shape() == std::vector<int>{1, 4, 4});
    for (int i = 0; i < 16; ++i) CHECK(out.data()[i] == doctest::Approx(input.data()[i]));
}

TEST_CASE("conv2d averaging preserves constants") {
    auto input = Tensor::from_data({1, 5, 5}, std::vector<float>(25, 0.7f));
    auto kernel = Tensor::from_data({1, 1, 3, 3}, std::vector<float>(9, 1.0f / 9.0f));
    auto out = nn::conv2d(input, kernel, 1, 0);
    REQUIRE(out.shape() == std::vector<int>{1, 3, 3});
    for (float v : out.data()) CHECK(v == doctest::Approx(0.7f).epsilon(1e-6));
}

TEST_CASE("conv2d 2x2 example against the nested-loop oracle") {
    auto input = Tensor::from_data({1, 2, 2}, {1, 2, 3, 4});
    auto kernel = Tensor::from_data({1, 1, 2, 2}, {1, 0, 0, 1});
    auto out = nn::conv2d(input, kernel, 1, 0);
    REQUIRE(out.shape() == std::vector<int>{1, 1, 1});
    CHECK(out.data()[0] == doctest::Approx(5.0f));

    int oh, ow;
    const auto oracle = testutil::conv2d_oracle({1, 2, 3, 4}, 1, 2, 2, {1, 0, 0, 1}, 1, 2, 1, 0,
                                                oh, ow);
    CHECK(oracle[0] == doctest::Approx(5.0f));
}

TEST_CASE("conv2d rejects channel mismatch and bad geometry") {
    auto input = Tensor::from_data({2, 4, 4}, std::vector<float>(32, 0.0f));
    auto kernel = Tensor::from_data({1, 3, 3, 3}, std::vector<float>(27, 0.0f));
    CHECK_THROWS_AS((void)nn::conv2d(input, kernel, 1, 1), std::invalid_argument);
    auto k2 = Tensor::from_data({1, 2, 3, 3}, std::vector<float>(18, 0.0f));
    CHECK_THROWS_AS((void)nn::conv2d(input, k2, 0, 1), std::invalid_argument);
    auto big = Tensor::from_data({1, 2, 5, 5}, std::vector<float>(50, 0.0f));
    CHECK_THROWS_AS((void)nn::conv2d(input, big, 1, 0), std::invalid_argument);
}

TEST_CASE("conv2d strided shapes match the oracle") {
    Rng rng(11);
    for (int trial = 0; trial < 5; ++trial) {
        const int h = 5 + int(rng.below(4));
        const int w = 5 + int(rng.below(4));
        const int k = 3, stride = 2, pad = 1;
        std::vector<float> in(size_t(2) * h * w), ker(size_t(3) * 2 * k * k);
        for (auto& v : in) v = float(rng.uniform(-1, 1));
        for (auto& v : ker) v = float(rng.uniform(-1, 1));
        auto out = nn::conv2d(Tensor::from_data({2, h, w}, in),
                              Tensor::from_data({3, 2, k, k}, ker), stride, pad);
        int oh, ow;
        const auto oracle = testutil::conv2d_oracle(in, 2, h, w, ker, 3, k, stride, pad, oh, ow);
        REQUIRE(out.shape() == std::vector<int>{3, oh, ow});
        for (size_t i = 0; i < oracle.size(); ++i)
            CHECK(out.data()[i] == doctest::Approx(oracle[i]).epsilon(1e-4));
    }
}

TEST_CASE("conv2d linearity") {
    Rng rng(21);
    std::vector<float> a(size_t(3) * 6 * 6), b(a.size()), ker(size_t(2) * 3 * 9);
    for (auto& v : a) v = float(rng.uniform(-1, 1));
    for (auto& v : b) v = float(rng.uniform(-1, 1));
    for (auto& v : ker) v = float(rng.uniform(-1, 1));
    const float alpha = 0.7f, beta = -1.3f;
    std::vector<float> mix(a.size());
    for (size_t i = 0; i < a.size(); ++i) mix[i] = alpha * a[i] + beta * b[i];
    auto kt = Tensor::from_data({2, 3, 3, 3}, ker);
    auto out_mix = nn::conv2d(Tensor::from_data({3, 6, 6}, mix), kt, 1, 1);
    auto out_a = nn::conv2d(Tensor::from_data({3, 6, 6}, a), kt, 1, 1);
    auto out_b = nn::conv2d(Tensor::from_data({3, 6, 6}, b), kt, 1, 1);
    for (int i = 0; i < out_mix.numel(); ++i)
        CHECK(out_mix.data()[i] ==
              doctest::Approx(alpha * out_a.data()[i] + beta * out_b.data()[i]).epsilon(1e-5));
}

TEST_CASE("backward: polynomial derivative") {
    auto x = Tensor::from_data({1}, {3.0f}, true);
    auto loss = nn::mul(x, x);
    nn::backward(loss);
    CHECK(x.grad()[0] == doctest::Approx(6.0f));
}

TEST_CASE("backward: constant loss leaves grads zero") {
    auto x = Tensor::from_data({1}, {3.0f}, true);
    auto loss = Tensor::scalar(5.0f);
    nn::backward(loss);
    CHECK(x.grad()[0] == 0.0f);
}

TEST_CASE("backward rejects non-scalar loss") {
    auto x = Tensor::from_data({2}, {1.0f, 2.0f}, true);
    CHECK_THROWS_AS(nn::backward(x), std::invalid_argument);
}

TEST_CASE("backward: conv kernel gradient matches finite differences") {
    Rng rng(33);
    std::vector<float> in(size_t(1) * 6 * 6), ker(size_t(1) * 1 * 9);
    for (auto& v : in) v = float(rng.uniform(0, 1));
    for (auto& v : ker) v = float(rng.uniform(-0.5, 0.5));
    auto input = Tensor::from_data({1, 6, 6}, in);
    auto kernel = Tensor::from_data({1, 1, 3, 3}, ker, true);

    auto loss_fn = [&]() { return double(nn::sum(nn::conv2d(input, kernel, 1, 0)).item()); };
    const auto fd = testutil::finite_diff_grad(kernel, loss_fn);

    nn::backward(nn::sum(nn::conv2d(input, kernel, 1, 0)));
    for (size_t i = 0; i < fd.size(); ++i)
        CHECK(testutil::grad_close(kernel.grad()[i], fd[i]));
}

TEST_CASE("backward: gradients accumulate across calls") {
    auto x = Tensor::from_data({1}, {2.0f}, true);
    nn::backward(nn::mul(x, x));
    nn::backward(nn::mul(x, x));
    CHECK(x.grad()[0] == doctest::Approx(8.0f));
}

TEST_CASE("random small networks pass the finite-difference check") {
    // smaller cousin of the acceptance criterion: random conv stacks <= 3 layers
    for (uint64_t net = 0; net < 8; ++net) {
        Rng rng(1000 + net);
        const int size = 6 + int(rng.below(3));
        const int layers = 1 + int(rng.below(3));
        std::vector<float> in(size_t(2) * size * size);
        for (auto& v : in) v = float(rng.uniform(0, 1));
        auto input = Tensor::from_data({2, size, size}, in);

        testutil::DoubleConvNet oracle;
        oracle.in_channels = 2;
        oracle.size = size;
        const std::vector<double> input_d(in.begin(), in.end());

        std::vector<Tensor> weights, biases;
        int ch = 2;
        for (int l = 0; l < layers; ++l) {
            const int out_ch = 2 + int(rng.below(3));
            std::vector<float> w(size_t(out_ch) * ch * 9);
            for (auto& v : w) v = float(rng.uniform(-0.4, 0.4));
            weights.push_back(Tensor::from_data({out_ch, ch, 3, 3}, w, true));
            biases.push_back(Tensor::zeros({out_ch}, true));
            oracle.out_channels.push_back(out_ch);
            oracle.weights.emplace_back(w.begin(), w.end());
            oracle.biases.emplace_back(size_t(out_ch), 0.0);
            ch = out_ch;
        }
        Tensor h = input;
        for (size_t l = 0; l < weights.size(); ++l)
            h = nn::leaky_relu(nn::add_channel_bias(nn::conv2d(h, weights[l], 1, 1), biases[l]));
        nn::backward(nn::mean(nn::mul(h, h)));

        for (size_t l = 0; l < weights.size(); ++l) {
            const auto fd = testutil::finite_diff_grad_double(oracle, l, input_d);
            for (size_t i = 0; i < fd.size(); ++i) {
                CAPTURE(net);
                CHECK(testutil::grad_close(weights[l].grad()[i], fd[i]));
            }
        }
    }
}

TEST_CASE("adam: zero grads leave params unchanged") {
    auto p = Tensor::from_data({3}, {1.0f, -2.0f, 3.0f}, true);
    nn::Adam adam({p}, {.lr = 0.1f});
    adam.step();
    CHECK(p.data()[0] == 1.0f);
    CHECK(p.data()[1] == -2.0f);
    CHECK(p.data()[2] == 3.0f);
    CHECK(adam.step_count() == 1);
}

TEST_CASE("adam: first step is a bias-corrected sign step") {
    auto p = Tensor::from_data({1}, {0.5f}, true);
    p.grad()[0] = 1.0f;
    nn::Adam adam({p}, {.lr = 0.1f});
    adam.step();
    CHECK(std::abs(double(p.data()[0]) - 0.5 + 0.1) < 1e-6);
    CHECK(p.grad()[0] == 0.0f); // grads consumed
}

TEST_CASE("adam: zero learning rate never moves params") {
    auto p = Tensor::from_data({2}, {1.0f, 2.0f}, true);
    p.grad()[0] = 3.0f;
    p.grad()[1] = -4.0f;
    nn::Adam adam({p}, {.lr = 0.0f});
    adam.step();
    CHECK(p.data()[0] == 1.0f);
    CHECK(p.data()[1] == 2.0f);
}

TEST_CASE("adam: rejects parameters without gradient buffers") {
    auto p = Tensor::from_data({1}, {1.0f}, false);
    CHECK_THROWS_AS(nn::Adam({p}, {.lr = 0.1f}), std::invalid_argument);
}

TEST_CASE("adam: identical state gives bit-identical updates") {
    auto run = [] {
        auto p = Tensor::from_data({4}, {0.1f, -0.2f, 0.3f, -0.4f}, true);
        nn::Adam adam({p}, {.lr = 0.05f});
        Rng rng(99);
        for (int step = 0; step < 20; ++step) {
            for (auto& g : p.grad()) g = float(rng.uniform(-1, 1));
            adam.step();
        }
        return std::vector<float>(p.data().begin(), p.data().end());
    };
    const auto a = run();
    const auto b = run();
    CHECK(std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0);
}

TEST_CASE("bce_with_logits reference values") {
    auto l0 = Tensor::from_data({1}, {0.0f});
    CHECK(nn::bce_with_logits(l0, {1}).item() == doctest::Approx(std::log(2.0)).epsilon(1e-5));
    auto l20 = Tensor::from_data({1}, {20.0f});
    CHECK(nn::bce_with_logits(l20, {1}).item() < 1e-6);
    auto l1 = Tensor::from_data({1}, {1.0f});
    CHECK(nn::bce_with_logits(l1, {0}).item() == doctest::Approx(1.3132617).epsilon(1e-5));
}

TEST_CASE("bce_with_logits gradient matches finite differences") {
    auto logits = Tensor::from_data({4}, {0.3f, -1.2f, 2.0f, 0.0f}, true);
    const std::vector<uint8_t> targets{1, 0, 1, 0};
    nn::backward(nn::bce_with_logits(logits, targets));
    const auto fd = testutil::finite_diff_grad(
        logits, [&]() { return double(nn::bce_with_logits(logits, targets).item()); });
    for (size_t i = 0; i < fd.size(); ++i) CHECK(testutil::grad_close(logits.grad()[i], fd[i]));
}

TEST_CASE("checkpoint round trip is bit exact") {
    const auto path = std::filesystem::temp_directory_path() / "wmlab_ck_test.ck";
    Rng rng(7);
    std::vector<nn::NamedTensor> ts;
    std::vector<float> data(60);
    for (auto& v : data) v = float(rng.uniform(-10, 10));
    ts.push_back({"conv.w", Tensor::from_data({5, 3, 2, 2}, data)});
    ts.push_back({"bias", Tensor::from_data({5}, {1, 2, 3, 4, 5})});
    nn::save_checkpoint(path.string(), ts);
    const auto back = nn::load_checkpoint(path.string());
    REQUIRE(back.size() == 2);
    CHECK(back[0].name == "conv.w");
    CHECK(back[0].tensor.shape() == std::vector<int>{5, 3, 2, 2});
    CHECK(std::memcmp(back[0].tensor.data().data(), data.data(), data.size() * sizeof(float)) == 0);
    CHECK(back[1].name == "bias");

    const auto path2 = std::filesystem::temp_directory_path() / "wmlab_ck_test2.ck";
    nn::save_checkpoint(path2.string(), back);
    CHECK(nn::checkpoint_files_equal(path.string(), path2.string()));
    std::filesystem::remove(path);
    std::filesystem::remove(path2);
}

TEST_CASE("checkpoint rejects corrupt headers") {
    const auto path = std::filesystem::temp_directory_path() / "wmlab_ck_bad.ck";
    {
        std::FILE* f = std::fopen(path.string().c_str(), "wb");
        std::fputs("NOPE", f);
        std::fclose(f);
    }
    CHECK_THROWS_AS((void)nn::load_checkpoint(path.string()), std::runtime_error);
    std::filesystem::remove(path);
}
