#include "wmlab/watermark.hpp"

#include "wmlab/checkpoint.hpp"
#include "wmlab/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace wmlab::wm {

namespace {

void he_init(nn::Tensor& t, Rng& rng) {
    const auto& s = t.shape();
    if (s.size() == 1) return; // biases stay zero
    const float fan_in = s.size() == 4 ? float(s[1] * s[2] * s[3]) : float(s[1]);
    const float std_dev = std::sqrt(2.0f / fan_in);
    for (auto& v : t.data()) v = float(rng.normal()) * std_dev;
}

} // namespace

// ---- decoder -------------------------------------------------------------------

WatermarkDecoder::WatermarkDecoder(DecoderConfig cfg, uint64_t init_seed) : cfg_(cfg) {
    if (cfg_.depth < 1) throw std::invalid_argument("decoder: depth must be >= 1");
    if (cfg_.message_length < 1) throw std::invalid_argument("decoder: message length must be >= 1");
    int spatial = cfg_.image_size;
    Rng rng(mix64(init_seed ^ fnv1a64("decoder-init")));
    int in_ch = 3;
    // the pooled feature rank must exceed the message length or the linear
    // head cannot separate L independent bits; only the last block widens
    const int head_ch = std::max(cfg_.channels, cfg_.message_length + 16);
    for (int i = 0; i < cfg_.depth; ++i) {
        const int stride = (i % 2 == 1) ? 2 : 1;
        if (stride == 2) spatial = (spatial + 1) / 2;
        if (spatial < 1)
            throw std::invalid_argument("decoder: depth too large for image size");
        const int out_ch = (i == cfg_.depth - 1) ? head_ch : cfg_.channels;
        conv_w_.push_back(nn::Tensor::zeros({out_ch, in_ch, 3, 3}, true));
        conv_b_.push_back(nn::Tensor::zeros({out_ch}, true));
        he_init(conv_w_.back(), rng);
        in_ch = out_ch;
    }
    head_w_ = nn::Tensor::zeros({cfg_.message_length, head_ch}, true);
    head_b_ = nn::Tensor::zeros({cfg_.message_length}, true);
    he_init(head_w_, rng);
}

nn::Tensor WatermarkDecoder::logits(const nn::Tensor& image_chw) const {
    const auto& s = image_chw.shape();
    if (s != std::vector<int>{3, cfg_.image_size, cfg_.image_size})
        throw std::invalid_argument("decoder: image does not match configured size");
    forward_count_.fetch_add(1, std::memory_order_relaxed);
    nn::Tensor h = image_chw;
    for (int i = 0; i < cfg_.depth; ++i) {
        const int stride = (i % 2 == 1) ? 2 : 1;
        h = nn::leaky_relu(nn::add_channel_bias(nn::conv2d(h, conv_w_[size_t(i)], stride, 1),
                                                conv_b_[size_t(i)]));
    }
    return nn::linear(nn::global_avg_pool(h), head_w_, head_b_);
}

Message bits_from_logits(const nn::Tensor& logits) {
    Message m;
    m.bits.reserve(size_t(logits.numel()));
    for (float v : logits.data()) m.bits.push_back(v > 0.0f ? 1 : 0); // tie -> 0
    return m;
}

Message WatermarkDecoder::decode_tensor(const nn::Tensor& image_chw) const {
    return bits_from_logits(logits(image_chw));
}

Message WatermarkDecoder::decode(const img::Image& image) const {
    if (image.height != cfg_.image_size || image.width != cfg_.image_size ||
        image.channels != 3)
        throw std::invalid_argument("decode: image does not match decoder size");
    return decode_tensor(gen::image_to_tensor(image));
}

std::vector<nn::Tensor> WatermarkDecoder::parameters() {
    std::vector<nn::Tensor> ps;
    for (size_t i = 0; i < conv_w_.size(); ++i) {
        ps.push_back(conv_w_[i]);
        ps.push_back(conv_b_[i]);
    }
    ps.push_back(head_w_);
    ps.push_back(head_b_);
    return ps;
}

void WatermarkDecoder::save(const std::string& path) const {
    std::vector<nn::NamedTensor> ts;
    ts.push_back({"meta", nn::Tensor::from_data(
                              {4}, {float(cfg_.depth), float(cfg_.channels),
                                    float(cfg_.message_length), float(cfg_.image_size)})});
    for (size_t i = 0; i < conv_w_.size(); ++i) {
        ts.push_back({"block" + std::to_string(i) + ".w", conv_w_[i]});
        ts.push_back({"block" + std::to_string(i) + ".b", conv_b_[i]});
    }
    ts.push_back({"head.w", head_w_});
    ts.push_back({"head.b", head_b_});
    nn::save_checkpoint(path, ts);
}

WatermarkDecoder WatermarkDecoder::load(const std::string& path) {
    const auto ts = nn::load_checkpoint(path);
    const auto* meta = nn::find_tensor(ts, "meta");
    if (!meta || meta->numel() != 4)
        throw std::runtime_error("decoder checkpoint: missing meta tensor");
    DecoderConfig cfg;
    cfg.depth = int(meta->data()[0]);
    cfg.channels = int(meta->data()[1]);
    cfg.message_length = int(meta->data()[2]);
    cfg.image_size = int(meta->data()[3]);
    WatermarkDecoder dec(cfg, 0);
    auto grab = [&](const std::string& name, nn::Tensor& dst) {
        const auto* t = nn::find_tensor(ts, name);
        if (!t || t->shape() != dst.shape())
            throw std::runtime_error("decoder checkpoint: bad tensor " + name);
        std::copy(t->data().begin(), t->data().end(), dst.data().begin());
    };
    for (size_t i = 0; i < dec.conv_w_.size(); ++i) {
        grab("block" + std::to_string(i) + ".w", dec.conv_w_[i]);
        grab("block" + std::to_string(i) + ".b", dec.conv_b_[i]);
    }
    grab("head.w", dec.head_w_);
    grab("head.b", dec.head_b_);
    return dec;
}

// ---- encoder -------------------------------------------------------------------

WatermarkEncoder::WatermarkEncoder(int message_length, int image_size, uint64_t init_seed,
                                   float alpha)
    : message_length_(message_length), image_size_(image_size), alpha_(alpha) {
    if (message_length < 1) throw std::invalid_argument("encoder: message length must be >= 1");
    grid_ = image_size / 2;
    if (grid_ * grid_ < message_length)
        throw std::invalid_argument("encoder: image too small for this message length");
    (void)init_seed; // layout is deterministic; nothing random to initialize
    gains_ = nn::Tensor::zeros({message_length}, true);
    for (auto& g : gains_.data()) g = 1.0f;
    mix_ = nn::Tensor::zeros({3, message_length, 1, 1});
    for (auto& v : mix_.data()) v = 1.0f;
}

nn::Tensor WatermarkEncoder::grating_basis(const Message& m) const {
    const int s = image_size_;
    const int tile = 2; // fine tiles: regional mean shifts a pooled readout can
                        // learn, small enough that a wide box blur cancels them
    const int per_side = s / tile;
    const int n_tiles = per_side * per_side;
    // deterministic scatter of tiles over bits, fixed per (length, size)
    Rng layout(mix64(fnv1a64("tile-layout") ^ mix64(uint64_t(message_length_) * 131 +
                                                    uint64_t(image_size_))));
    std::vector<int> owner(size_t(n_tiles), 0);
    for (int t = 0; t < n_tiles; ++t) owner[size_t(t)] = t % message_length_;
    for (size_t t = owner.size(); t > 1; --t)
        std::swap(owner[t - 1], owner[layout.below(t)]);

    std::vector<float> basis(size_t(message_length_) * s * s, 0.0f);
    for (int t = 0; t < n_tiles; ++t) {
        const int bit = owner[size_t(t)];
        const float sign = m.bits[size_t(bit)] ? 1.0f : -1.0f;
        const int by = (t / per_side) * tile;
        const int bx = (t % per_side) * tile;
        float* plane = basis.data() + size_t(bit) * s * s;
        for (int y = by; y < by + tile; ++y)
            for (int x = bx; x < bx + tile; ++x) plane[size_t(y) * s + x] = sign;
    }
    return nn::Tensor::from_data({message_length_, s, s}, std::move(basis));
}

nn::Tensor WatermarkEncoder::encode(const nn::Tensor& image_chw, const Message& m) const {
    if (int(m.size()) != message_length_)
        throw std::invalid_argument("encode: message length mismatch");
    if (image_chw.shape() != std::vector<int>{3, image_size_, image_size_})
        throw std::invalid_argument("encode: image does not match encoder size");
    auto scaled = nn::mul(grating_basis(m),
                          nn::broadcast_channels(gains_, image_size_, image_size_));
    auto res = nn::conv2d(scaled, mix_, 1, 0); // [3,H,W], same mark on each channel
    return nn::clamp01(nn::add(image_chw, nn::scale(res, alpha_)));
}

img::Image WatermarkEncoder::encode_image(const img::Image& image, const Message& m) const {
    return gen::tensor_to_image(encode(gen::image_to_tensor(image), m));
}

std::vector<nn::Tensor> WatermarkEncoder::parameters() { return {gains_}; }

void WatermarkEncoder::save(const std::string& path) const {
    std::vector<nn::NamedTensor> ts;
    ts.push_back({"meta", nn::Tensor::from_data(
                              {3}, {float(message_length_), float(image_size_), alpha_})});
    ts.push_back({"gains", gains_});
    nn::save_checkpoint(path, ts);
}

WatermarkEncoder WatermarkEncoder::load(const std::string& path) {
    const auto ts = nn::load_checkpoint(path);
    const auto* meta = nn::find_tensor(ts, "meta");
    if (!meta || meta->numel() != 3)
        throw std::runtime_error("encoder checkpoint: missing meta tensor");
    WatermarkEncoder enc(int(meta->data()[0]), int(meta->data()[1]), 0, meta->data()[2]);
    const auto* g = nn::find_tensor(ts, "gains");
    if (!g || g->shape() != enc.gains_.shape())
        throw std::runtime_error("encoder checkpoint: bad gains tensor");
    std::copy(g->data().begin(), g->data().end(), enc.gains_.data().begin());
    return enc;
}

} // namespace wmlab::wm
