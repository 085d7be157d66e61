#pragma once

#include "wmlab/genmodel.hpp"
#include "wmlab/image.hpp"
#include "wmlab/tensor.hpp"

#include <atomic>
#include <cstdint>
#include <string>
#include <vector>

namespace wmlab::wm {

// ---- messages ----------------------------------------------------------------

struct Message {
    std::vector<uint8_t> bits; // each exactly 0 or 1

    size_t size() const { return bits.size(); }
    bool operator==(const Message& o) const { return bits == o.bits; }
};

Message random_message(int length, uint64_t seed);
Message complement(const Message& m);
double bit_accuracy(const Message& a, const Message& b); // 1 - diff/len

// One line of '0'/'1' characters.
Message load_message(const std::string& path);
void save_message(const Message& m, const std::string& path);

// ---- verification --------------------------------------------------------------

struct VerificationPolicy {
    double tau_low = 0.23;
    double tau_high = 0.77;
};

struct Verdict {
    double acc = 0.0;
    bool watermarked = false;
};

// Double-sided band test: watermarked iff acc >= tau_high or acc <= tau_low.
bool is_watermarked_acc(double acc, const VerificationPolicy& policy);
std::string verdict_json(const Verdict& v);

// ---- decoder --------------------------------------------------------------------

struct DecoderConfig {
    int depth = 8;          // conv blocks; every second block downsamples by 2
    int channels = 32;
    int message_length = 48;
    int image_size = 64;
};

// Convolutional bit decoder: depth conv blocks (3x3, leaky relu, stride 2 on
// every second block), global average pool, linear head to L logits.
// decode() maps logit > 0 to bit 1, ties to 0.
//
// Every forward pass bumps an audit counter; attack code must leave the
// target decoder's counter untouched (the no-box contract).
class WatermarkDecoder {
public:
    WatermarkDecoder(DecoderConfig cfg, uint64_t init_seed);

    // moves carry the audit count along; copies are not allowed
    WatermarkDecoder(WatermarkDecoder&& o) noexcept
        : cfg_(o.cfg_), conv_w_(std::move(o.conv_w_)), conv_b_(std::move(o.conv_b_)),
          head_w_(std::move(o.head_w_)), head_b_(std::move(o.head_b_)),
          forward_count_(o.forward_count_.load()) {}
    WatermarkDecoder& operator=(WatermarkDecoder&& o) noexcept {
        cfg_ = o.cfg_;
        conv_w_ = std::move(o.conv_w_);
        conv_b_ = std::move(o.conv_b_);
        head_w_ = std::move(o.head_w_);
        head_b_ = std::move(o.head_b_);
        forward_count_.store(o.forward_count_.load());
        return *this;
    }
    WatermarkDecoder(const WatermarkDecoder&) = delete;
    WatermarkDecoder& operator=(const WatermarkDecoder&) = delete;

    nn::Tensor logits(const nn::Tensor& image_chw) const;
    Message decode(const img::Image& image) const;
    Message decode_tensor(const nn::Tensor& image_chw) const;

    uint64_t forward_count() const { return forward_count_.load(); }

    std::vector<nn::Tensor> parameters();
    const DecoderConfig& config() const { return cfg_; }

    void save(const std::string& path) const;
    static WatermarkDecoder load(const std::string& path);

private:
    DecoderConfig cfg_;
    std::vector<nn::Tensor> conv_w_, conv_b_;
    nn::Tensor head_w_, head_b_;
    mutable std::atomic<uint64_t> forward_count_{0};
};

Message bits_from_logits(const nn::Tensor& logits);

// ---- encoder ---------------------------------------------------------------------

// Light encoder used during pre-training: E(I,m) = clamp(I + alpha*R(m)).
// Each bit owns one block of a sqrt(L) x sqrt(L) grid and writes a period-2
// luminance grating there, vertical for 1, horizontal for 0, scaled by a
// trainable per-bit gain. Oriented micro-texture keeps the mark in the fine
// scales (fragile to blurring, as it should be) while staying readable
// through the decoder's pooled statistics.
class WatermarkEncoder {
public:
    WatermarkEncoder(int message_length, int image_size, uint64_t init_seed,
                     float alpha = 0.05f);

    nn::Tensor encode(const nn::Tensor& image_chw, const Message& m) const;
    img::Image encode_image(const img::Image& image, const Message& m) const;

    std::vector<nn::Tensor> parameters();
    int message_length() const { return message_length_; }

    void save(const std::string& path) const;
    static WatermarkEncoder load(const std::string& path);

private:
    // per-bit grating planes for the given message, zero outside the block
    nn::Tensor grating_basis(const Message& m) const;

    int message_length_;
    int image_size_;
    int grid_;  // blocks per side
    float alpha_;
    nn::Tensor gains_; // [L] trainable per-bit amplitudes
    nn::Tensor mix_;   // [3,L,1,1] fixed all-ones channel mixer
};

// ---- training ---------------------------------------------------------------------

struct EmbedTrainConfig {
    double decoder_lr = 0.02;     // joint encoder/decoder pre-training
    double generator_lr = 0.0005; // generator fine-tuning
    double image_weight = 1.0;    // lambda_img
    int epochs = 20;
    int batch_size = 8;
    double target_bit_acc = 0.95;
};

// Training shortfalls are results, not exceptions: desk-scale training is
// stochastic and callers decide whether to retry.
struct PretrainResult {
    WatermarkEncoder encoder;
    WatermarkDecoder decoder;
    double train_bit_acc = 0.0;
    bool reached_target = false;
};

PretrainResult pretrain_decoder(const std::vector<img::Image>& train_images, int length,
                                int depth, const EmbedTrainConfig& config, uint64_t seed);

struct EmbedResult {
    gen::GeneratorModel model;
    double val_bit_acc = 0.0;
    double mean_psnr_vs_base = 0.0;
    bool reached_target = false;
};

// Fine-tunes generator weights against the frozen decoder so that every
// generated image decodes to `message`; every fifth request is held out for
// validation.
EmbedResult embed_watermark_into_generator(const gen::GeneratorModel& model,
                                           const WatermarkDecoder& decoder,
                                           const Message& message,
                                           const std::vector<gen::GenerationRequest>& requests,
                                           const EmbedTrainConfig& config);

Message decode(const img::Image& image, const WatermarkDecoder& decoder);

Verdict verify(const img::Image& image, const WatermarkDecoder& decoder, const Message& message,
               const VerificationPolicy& policy);

} // namespace wmlab::wm
