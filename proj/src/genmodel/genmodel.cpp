#include "wmlab/genmodel.hpp"

#include "wmlab/checkpoint.hpp"
#include "wmlab/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace wmlab::gen {

namespace {

struct Color {
    float r, g, b;
};

Color pick(Rng& rng) {
    // stay clear of 0/1 so smoothing and blending never saturate the base
    return {float(rng.uniform(0.08, 0.92)), float(rng.uniform(0.08, 0.92)),
            float(rng.uniform(0.08, 0.92))};
}

Color lerp(const Color& a, const Color& b, float t) {
    return {a.r + (b.r - a.r) * t, a.g + (b.g - a.g) * t, a.b + (b.b - a.b) * t};
}

void put(img::Image& im, int y, int x, const Color& c) {
    im.at(y, x, 0) = c.r;
    im.at(y, x, 1) = c.g;
    im.at(y, x, 2) = c.b;
}

void fill_gradient(img::Image& im, const Color& a, const Color& b, float angle) {
    const float dx = std::cos(angle), dy = std::sin(angle);
    const float diag = float(im.width + im.height);
    for (int y = 0; y < im.height; ++y)
        for (int x = 0; x < im.width; ++x) {
            float t = (float(x) * dx + float(y) * dy) / diag + 0.5f;
            put(im, y, x, lerp(a, b, std::clamp(t, 0.0f, 1.0f)));
        }
}

void draw_ellipse(img::Image& im, float cy, float cx, float ry, float rx, const Color& col) {
    const int y0 = std::max(0, int(cy - ry) - 1), y1 = std::min(im.height - 1, int(cy + ry) + 1);
    const int x0 = std::max(0, int(cx - rx) - 1), x1 = std::min(im.width - 1, int(cx + rx) + 1);
    for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) {
            const float u = (float(x) - cx) / rx;
            const float v = (float(y) - cy) / ry;
            if (u * u + v * v <= 1.0f) put(im, y, x, col);
        }
}

// bilinear value noise from a coarse random grid
std::vector<float> value_noise(Rng& rng, int size, int grid) {
    std::vector<float> cell(size_t(grid + 1) * (grid + 1));
    for (auto& v : cell) v = float(rng.uniform01());
    std::vector<float> field(size_t(size) * size);
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            const float fy = float(y) / float(size) * grid;
            const float fx = float(x) / float(size) * grid;
            const int gy = int(fy), gx = int(fx);
            const float ty = fy - gy, tx = fx - gx;
            const float v00 = cell[size_t(gy) * (grid + 1) + gx];
            const float v01 = cell[size_t(gy) * (grid + 1) + gx + 1];
            const float v10 = cell[size_t(gy + 1) * (grid + 1) + gx];
            const float v11 = cell[size_t(gy + 1) * (grid + 1) + gx + 1];
            field[size_t(y) * size + x] =
                (v00 * (1 - tx) + v01 * tx) * (1 - ty) + (v10 * (1 - tx) + v11 * tx) * ty;
        }
    return field;
}

} // namespace

img::Image render_base(const GenerationRequest& request, int image_size) {
    if (request.prompt.empty()) throw std::invalid_argument("render_base: empty prompt");
    if (request.steps < 1) throw std::invalid_argument("render_base: steps must be >= 1");

    const uint64_t prompt_hash = fnv1a64(request.prompt);
    Rng style(prompt_hash); // palette + pattern family come from the prompt alone
    Color palette[4];
    for (auto& c : palette) c = pick(style);
    const int family = int(style.next_u64() % 4);

    Rng rng(mix64(prompt_hash ^ mix64(request.seed))); // placement stream
    img::Image im(image_size, image_size, 3);

    switch (family) {
        case 0: { // layered gradients
            fill_gradient(im, palette[0], palette[1], float(rng.uniform(0.0, 2.0 * M_PI)));
            const float angle = float(rng.uniform(0.0, 2.0 * M_PI));
            const float alpha = 0.35f + 0.3f * float(rng.uniform01());
            img::Image overlay(image_size, image_size, 3);
            fill_gradient(overlay, palette[2], palette[3], angle);
            for (size_t i = 0; i < im.pixels.size(); ++i)
                im.pixels[i] = im.pixels[i] * (1.0f - alpha) + overlay.pixels[i] * alpha;
            // a couple of soft bands so gradients still carry edges
            for (int k = 0; k < 2; ++k) {
                const int row = int(rng.below(uint64_t(image_size)));
                const int thick = 2 + int(rng.below(4));
                const Color c = palette[rng.below(4)];
                for (int y = row; y < std::min(image_size, row + thick); ++y)
                    for (int x = 0; x < image_size; ++x) put(im, y, x, c);
            }
            break;
        }
        case 1: { // ellipses over a vertical gradient
            fill_gradient(im, palette[0], palette[1], float(M_PI / 2.0));
            const int count = 4 + int(rng.below(5));
            for (int k = 0; k < count; ++k) {
                const float cy = float(rng.uniform(0.1, 0.9)) * image_size;
                const float cx = float(rng.uniform(0.1, 0.9)) * image_size;
                const float ry = float(rng.uniform(0.06, 0.28)) * image_size;
                const float rx = float(rng.uniform(0.06, 0.28)) * image_size;
                draw_ellipse(im, cy, cx, ry, rx, palette[rng.below(4)]);
            }
            break;
        }
        case 2: { // stripes
            const float angle = float(rng.uniform(0.0, M_PI));
            const float period = float(rng.uniform(0.09, 0.25)) * image_size;
            const float phase = float(rng.uniform01()) * period;
            const Color a = palette[rng.below(4)];
            const Color b = palette[rng.below(4)];
            const Color bg = palette[rng.below(4)];
            const float dx = std::cos(angle), dy = std::sin(angle);
            for (int y = 0; y < image_size; ++y)
                for (int x = 0; x < image_size; ++x) {
                    const float t = std::fmod(float(x) * dx + float(y) * dy + phase, period);
                    const float u = (t < 0 ? t + period : t) / period;
                    put(im, y, x, u < 0.34f ? a : (u < 0.67f ? b : bg));
                }
            break;
        }
        default: { // value-noise blobs
            const int grid = 4 + int(rng.below(4));
            const auto f1 = value_noise(rng, image_size, grid);
            const auto f2 = value_noise(rng, image_size, grid + 2);
            for (int y = 0; y < image_size; ++y)
                for (int x = 0; x < image_size; ++x) {
                    const size_t i = size_t(y) * image_size + x;
                    Color c = lerp(palette[0], palette[1], f1[i]);
                    if (f2[i] > 0.62f) c = lerp(c, palette[2], 0.85f);
                    put(im, y, x, c);
                }
            break;
        }
    }

    // steps-1 smoothing passes: more steps, smoother output
    const auto box3 = img::box_kernel(3);
    for (int pass = 1; pass < request.steps; ++pass) im = img::convolve(im, box3);
    im.clamp();
    return im;
}

// ---- model -------------------------------------------------------------------

GeneratorModel GeneratorModel::zeros(int image_size, float blend_scale) {
    GeneratorModel m;
    m.image_size = image_size;
    m.blend_scale = blend_scale;
    m.w1 = nn::Tensor::zeros({16, 3, 3, 3}, true);
    m.b1 = nn::Tensor::zeros({16}, true);
    m.w2 = nn::Tensor::zeros({16, 16, 3, 3}, true);
    m.b2 = nn::Tensor::zeros({16}, true);
    m.w3 = nn::Tensor::zeros({3, 16, 3, 3}, true);
    m.b3 = nn::Tensor::zeros({3}, true);
    return m;
}

GeneratorModel GeneratorModel::random_init(uint64_t seed, int image_size, float blend_scale,
                                           float weight_scale) {
    GeneratorModel m = zeros(image_size, blend_scale);
    Rng rng(mix64(seed ^ fnv1a64("generator-init")));
    for (auto& t : m.parameters()) {
        if (t.shape().size() == 1) continue; // biases stay zero
        const float fan_in = float(t.shape()[1] * t.shape()[2] * t.shape()[3]);
        const float std_dev = weight_scale * std::sqrt(2.0f / fan_in);
        for (auto& v : t.data()) v = float(rng.normal()) * std_dev;
    }
    return m;
}

std::vector<nn::Tensor> GeneratorModel::parameters() { return {w1, b1, w2, b2, w3, b3}; }

GeneratorModel GeneratorModel::clone() const {
    GeneratorModel m;
    m.image_size = image_size;
    m.blend_scale = blend_scale;
    m.w1 = w1.clone(true);
    m.b1 = b1.clone(true);
    m.w2 = w2.clone(true);
    m.b2 = b2.clone(true);
    m.w3 = w3.clone(true);
    m.b3 = b3.clone(true);
    m.embedded_message = embedded_message;
    return m;
}

void GeneratorModel::save(const std::string& path) const {
    std::vector<nn::NamedTensor> ts;
    ts.push_back({"meta", nn::Tensor::from_data({2}, {float(image_size), blend_scale})});
    ts.push_back({"res.w1", w1});
    ts.push_back({"res.b1", b1});
    ts.push_back({"res.w2", w2});
    ts.push_back({"res.b2", b2});
    ts.push_back({"res.w3", w3});
    ts.push_back({"res.b3", b3});
    if (embedded_message) {
        std::vector<float> bits(embedded_message->begin(), embedded_message->end());
        ts.push_back({"embedded_message",
                      nn::Tensor::from_data({int(bits.size())}, std::move(bits))});
    }
    nn::save_checkpoint(path, ts);
}

GeneratorModel GeneratorModel::load(const std::string& path) {
    const auto ts = nn::load_checkpoint(path);
    const auto* meta = nn::find_tensor(ts, "meta");
    if (!meta || meta->numel() != 2)
        throw std::runtime_error("generator checkpoint: missing meta tensor");
    GeneratorModel m = zeros(int(meta->data()[0]), meta->data()[1]);
    auto grab = [&](const char* name, nn::Tensor& dst) {
        const auto* t = nn::find_tensor(ts, name);
        if (!t || t->shape() != dst.shape())
            throw std::runtime_error(std::string("generator checkpoint: bad tensor ") + name);
        std::copy(t->data().begin(), t->data().end(), dst.data().begin());
    };
    grab("res.w1", m.w1);
    grab("res.b1", m.b1);
    grab("res.w2", m.w2);
    grab("res.b2", m.b2);
    grab("res.w3", m.w3);
    grab("res.b3", m.b3);
    if (const auto* msg = nn::find_tensor(ts, "embedded_message")) {
        std::vector<uint8_t> bits;
        for (float v : msg->data()) bits.push_back(v != 0.0f ? 1 : 0);
        m.embedded_message = std::move(bits);
    }
    return m;
}

// ---- tensor bridge -------------------------------------------------------------

nn::Tensor image_to_tensor(const img::Image& image) {
    std::vector<float> chw(image.pixels.size());
    const int h = image.height, w = image.width, c = image.channels;
    for (int ch = 0; ch < c; ++ch)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                chw[(size_t(ch) * h + y) * w + x] = image.at(y, x, ch);
    return nn::Tensor::from_data({c, h, w}, std::move(chw));
}

img::Image tensor_to_image(const nn::Tensor& t) {
    const auto& s = t.shape();
    if (s.size() != 3) throw std::invalid_argument("tensor_to_image: want [C,H,W]");
    img::Image im(s[1], s[2], s[0]);
    for (int ch = 0; ch < s[0]; ++ch)
        for (int y = 0; y < s[1]; ++y)
            for (int x = 0; x < s[2]; ++x)
                im.at(y, x, ch) =
                    std::clamp(t.data()[(size_t(ch) * s[1] + y) * s[2] + x], 0.0f, 1.0f);
    return im;
}

nn::Tensor generate_tensor(const nn::Tensor& base, const GeneratorModel& model) {
    if (base.shape() != std::vector<int>{3, model.image_size, model.image_size})
        throw std::invalid_argument("generate: base does not match model image size");
    auto h1 = nn::leaky_relu(nn::add_channel_bias(nn::conv2d(base, model.w1, 1, 1), model.b1));
    auto h2 = nn::leaky_relu(nn::add_channel_bias(nn::conv2d(h1, model.w2, 1, 1), model.b2));
    auto res = nn::add_channel_bias(nn::conv2d(h2, model.w3, 1, 1), model.b3);
    return nn::clamp01(nn::add(base, nn::scale(res, model.blend_scale)));
}

img::Image generate(const GenerationRequest& request, const GeneratorModel& model) {
    const img::Image base = render_base(request, model.image_size);
    const auto out = generate_tensor(image_to_tensor(base), model);
    return tensor_to_image(out);
}

// ---- corpus --------------------------------------------------------------------

std::vector<Pair> build_pair_corpus(const std::vector<std::string>& prompts,
                                    const std::vector<uint64_t>& seeds,
                                    const std::vector<int>& steps_list,
                                    const GeneratorModel& clean,
                                    const GeneratorModel& watermarked) {
    if (prompts.empty() || seeds.empty() || steps_list.empty())
        throw std::invalid_argument("build_pair_corpus: all request lists must be non-empty");
    std::vector<Pair> pairs;
    pairs.reserve(prompts.size() * seeds.size() * steps_list.size());
    for (const auto& prompt : prompts)
        for (uint64_t seed : seeds)
            for (int steps : steps_list) {
                GenerationRequest req{prompt, seed, steps};
                pairs.push_back({req, generate(req, clean), generate(req, watermarked)});
            }
    return pairs;
}

void save_pair_corpus(const std::vector<Pair>& pairs, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    nlohmann::json manifest = nlohmann::json::array();
    for (size_t i = 0; i < pairs.size(); ++i) {
        const std::string clean_path = "pair_" + std::to_string(i) + "_clean.png";
        const std::string wm_path = "pair_" + std::to_string(i) + "_wm.png";
        img::save_image(pairs[i].clean, (fs::path(dir) / clean_path).string());
        img::save_image(pairs[i].watermarked, (fs::path(dir) / wm_path).string());
        manifest.push_back({{"prompt", pairs[i].request.prompt},
                            {"seed", pairs[i].request.seed},
                            {"steps", pairs[i].request.steps},
                            {"clean_path", clean_path},
                            {"wm_path", wm_path}});
    }
    std::ofstream os(fs::path(dir) / "manifest.json");
    os << manifest.dump(2) << "\n";
}

} // namespace wmlab::gen
