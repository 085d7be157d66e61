#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "testutil.hpp"
#include "wmlab/genmodel.hpp"
#include "wmlab/rng.hpp"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

using namespace wmlab;
using gen::GenerationRequest;
using gen::GeneratorModel;

namespace {

double laplacian_energy(const img::Image& im) {
    double acc = 0.0;
    for (int y = 1; y + 1 < im.height; ++y)
        for (int x = 1; x + 1 < im.width; ++x) {
            const double l = img::luma(im, y, x);
            const double lap = 4.0 * l - img::luma(im, y - 1, x) - img::luma(im, y + 1, x) -
                               img::luma(im, y, x - 1) - img::luma(im, y, x + 1);
            acc += std::abs(lap);
        }
    return acc / double((im.height - 2) * (im.width - 2));
}

// double-precision replica of the generator residual for gradient checks
double generate_loss_oracle(const img::Image& base, const GeneratorModel& model,
                            const img::Image& target, size_t layer, size_t index, double bump) {
    const int s = model.image_size;
    auto grab = [&](const nn::Tensor& t) {
        return std::vector<double>(t.data().begin(), t.data().end());
    };
    std::vector<std::vector<double>> w = {grab(model.w1), grab(model.w2), grab(model.w3)};
    std::vector<std::vector<double>> b = {grab(model.b1), grab(model.b2), grab(model.b3)};
    if (layer % 2 == 0) w[layer / 2][index] += bump;
    else b[layer / 2][index] += bump;

    const int chs[4] = {3, 16, 16, 3};
    std::vector<double> h(size_t(3) * s * s);
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < s; ++y)
            for (int x = 0; x < s; ++x) h[(size_t(c) * s + y) * s + x] = base.at(y, x, c);
    std::vector<double> input = h;
    for (int l = 0; l < 3; ++l) {
        const int cin = chs[l], cout = chs[l + 1];
        std::vector<double> next(size_t(cout) * s * s, 0.0);
        for (int co = 0; co < cout; ++co)
            for (int y = 0; y < s; ++y)
                for (int x = 0; x < s; ++x) {
                    double acc = b[size_t(l)][size_t(co)];
                    for (int ci = 0; ci < cin; ++ci)
                        for (int ky = 0; ky < 3; ++ky)
                            for (int kx = 0; kx < 3; ++kx) {
                                const int yi = y + ky - 1, xi = x + kx - 1;
                                if (yi < 0 || yi >= s || xi < 0 || xi >= s) continue;
                                acc += h[(size_t(ci) * s + yi) * s + xi] *
                                       w[size_t(l)][((size_t(co) * cin + ci) * 3 + ky) * 3 + kx];
                            }
                    if (l < 2) acc = acc > 0 ? acc : 0.01 * acc;
                    next[(size_t(co) * s + y) * s + x] = acc;
                }
        h = std::move(next);
    }
    double loss = 0.0;
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < s; ++y)
            for (int x = 0; x < s; ++x) {
                double v = input[(size_t(c) * s + y) * s + x] +
                           double(model.blend_scale) * h[(size_t(c) * s + y) * s + x];
                v = std::clamp(v, 0.0, 1.0);
                const double d = v - target.at(y, x, c);
                loss += d * d;
            }
    return loss / double(3 * s * s);
}

} // namespace

TEST_CASE("render_base is bit-deterministic") {
    GenerationRequest req{"a stone archway at dusk", 99, 3};
    const auto a = gen::render_base(req);
    const auto b = gen::render_base(req);
    REQUIRE(a.pixels.size() == b.pixels.size());
    CHECK(std::memcmp(a.pixels.data(), b.pixels.data(),
                      a.pixels.size() * sizeof(float)) == 0);
}

TEST_CASE("render_base rejects empty prompts and bad steps") {
    CHECK_THROWS_AS((void)gen::render_base({"", 1, 1}), std::invalid_argument);
    CHECK_THROWS_AS((void)gen::render_base({"ok", 1, 0}), std::invalid_argument);
}

TEST_CASE("different seeds give visibly different content") {
    for (const char* prompt : {"drift ice at dawn", "copper pots on a shelf", "warm tide pools"}) {
        const auto a = gen::render_base({prompt, 1, 2});
        const auto b = gen::render_base({prompt, 2, 2});
        CHECK(img::psnr(a, b) < 25.0);
    }
}

TEST_CASE("more steps means a smoother image") {
    for (const char* prompt : {"gravel spiral", "tall grasses", "night market stalls"}) {
        const auto crisp = gen::render_base({prompt, 5, 1});
        const auto smooth = gen::render_base({prompt, 5, 10});
        CHECK(laplacian_energy(smooth) < laplacian_energy(crisp));
    }
}

TEST_CASE("render_base output distribution is not degenerate") {
    Rng rng(77);
    double channel_mean[3] = {0, 0, 0};
    for (int i = 0; i < 100; ++i) {
        GenerationRequest req{"survey prompt " + std::to_string(i), rng.next_u64(),
                              1 + int(rng.below(3))};
        const auto im = gen::render_base(req);
        for (int c = 0; c < 3; ++c) {
            double acc = 0.0;
            for (size_t p = c; p < im.pixels.size(); p += 3) acc += im.pixels[p];
            channel_mean[c] += acc / double(im.pixel_count());
        }
    }
    for (int c = 0; c < 3; ++c) {
        channel_mean[c] /= 100.0;
        CHECK(channel_mean[c] > 0.2);
        CHECK(channel_mean[c] < 0.8);
    }
}

TEST_CASE("zero residual and zero blend reproduce the base exactly") {
    GenerationRequest req{"a red kite over fields", 4, 2};
    const auto base = gen::render_base(req);
    auto zero = GeneratorModel::zeros();
    const auto out = gen::generate(req, zero);
    CHECK(std::memcmp(base.pixels.data(), out.pixels.data(),
                      base.pixels.size() * sizeof(float)) == 0);

    auto model = GeneratorModel::random_init(5);
    model.blend_scale = 0.0f;
    const auto out2 = gen::generate(req, model);
    CHECK(std::memcmp(base.pixels.data(), out2.pixels.data(),
                      base.pixels.size() * sizeof(float)) == 0);
}

TEST_CASE("generate is deterministic given request and weights") {
    GenerationRequest req{"lanterns on a pier", 11, 1};
    auto model = GeneratorModel::random_init(3);
    const auto a = gen::generate(req, model);
    const auto b = gen::generate(req, model);
    CHECK(std::memcmp(a.pixels.data(), b.pixels.data(), a.pixels.size() * sizeof(float)) == 0);
}

TEST_CASE("generator gradients match a double-precision finite-difference oracle") {
    GenerationRequest req{"gradient check scene", 21, 1};
    const auto base_img = gen::render_base(req);
    auto model = GeneratorModel::random_init(7);
    const auto target_img = gen::render_base({"gradient check target", 22, 1});

    auto base = gen::image_to_tensor(base_img);
    auto target = gen::image_to_tensor(target_img);
    auto loss = nn::mse_loss(gen::generate_tensor(base, model), target);
    nn::backward(loss);

    auto params = model.parameters();
    Rng pick(123);
    for (size_t layer = 0; layer < params.size(); ++layer) {
        for (int probe = 0; probe < 4; ++probe) {
            const size_t index = pick.below(uint64_t(params[layer].numel()));
            const double h = 1e-4;
            const double fp = generate_loss_oracle(base_img, model, target_img, layer, index, h);
            const double fm = generate_loss_oracle(base_img, model, target_img, layer, index, -h);
            const double fd = (fp - fm) / (2.0 * h);
            CAPTURE(layer);
            CAPTURE(index);
            CHECK(testutil::grad_close(params[layer].grad()[index], fd, 2e-3, 2e-5));
        }
    }
}

TEST_CASE("pair corpus sizes follow the cartesian product") {
    auto clean = GeneratorModel::zeros();
    auto wm = GeneratorModel::zeros();
    const auto small = gen::build_pair_corpus({"p1", "p2"}, {1, 2}, {1, 2}, clean, wm);
    CHECK(small.size() == 8);
    for (const auto& pair : small) {
        REQUIRE(pair.clean.pixels.size() == pair.watermarked.pixels.size());
        CHECK(std::memcmp(pair.clean.pixels.data(), pair.watermarked.pixels.data(),
                          pair.clean.pixels.size() * sizeof(float)) == 0);
    }
    CHECK_THROWS_AS((void)gen::build_pair_corpus({}, {1}, {1}, clean, wm),
                    std::invalid_argument);
}

TEST_CASE("10x10x10 grid yields 1000 pairs") {
    std::vector<std::string> prompts;
    std::vector<uint64_t> seeds;
    std::vector<int> steps;
    for (int i = 0; i < 10; ++i) {
        prompts.push_back("corpus prompt " + std::to_string(i));
        seeds.push_back(uint64_t(i) + 1);
        steps.push_back(i + 1);
    }
    auto clean = GeneratorModel::zeros(32);
    auto wm = GeneratorModel::zeros(32);
    const auto pairs = gen::build_pair_corpus(prompts, seeds, steps, clean, wm);
    CHECK(pairs.size() == 1000);
}

TEST_CASE("corpus manifest lists every pair with both paths") {
    auto clean = GeneratorModel::zeros(32);
    auto wm = GeneratorModel::random_init(9, 32);
    const auto pairs = gen::build_pair_corpus({"m1", "m2"}, {3}, {1}, clean, wm);
    const auto dir = (std::filesystem::temp_directory_path() / "wmlab_corpus").string();
    gen::save_pair_corpus(pairs, dir);
    std::ifstream is(std::filesystem::path(dir) / "manifest.json");
    REQUIRE(bool(is));
    std::string text((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    CHECK(text.find("\"prompt\": \"m1\"") != std::string::npos);
    CHECK(text.find("pair_1_wm.png") != std::string::npos);
    CHECK(std::filesystem::exists(std::filesystem::path(dir) / "pair_0_clean.png"));
    std::filesystem::remove_all(dir);
}

TEST_CASE("generator checkpoints round-trip exactly") {
    auto model = GeneratorModel::random_init(31);
    model.embedded_message = std::vector<uint8_t>{1, 0, 1, 1};
    const auto path = (std::filesystem::temp_directory_path() / "wmlab_gen.ck").string();
    model.save(path);
    auto back = GeneratorModel::load(path);
    CHECK(back.image_size == model.image_size);
    CHECK(back.blend_scale == model.blend_scale);
    REQUIRE(back.embedded_message.has_value());
    CHECK(*back.embedded_message == *model.embedded_message);
    auto pa = model.parameters();
    auto pb = back.parameters();
    for (size_t i = 0; i < pa.size(); ++i)
        CHECK(std::memcmp(pa[i].data().data(), pb[i].data().data(),
                          size_t(pa[i].numel()) * sizeof(float)) == 0);
    std::filesystem::remove(path);
}

TEST_CASE("cloning a model severs shared state") {
    auto a = GeneratorModel::random_init(17);
    auto b = a.clone();
    b.w1.data()[0] += 1.0f;
    CHECK(a.w1.data()[0] != b.w1.data()[0]);
}
