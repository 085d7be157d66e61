#include "wmlab/watermark.hpp"

#include "wmlab/optim.hpp"
#include "wmlab/rng.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace wmlab::wm {

namespace {

std::vector<size_t> shuffled_indices(size_t n, Rng& rng) {
    std::vector<size_t> idx(n);
    for (size_t i = 0; i < n; ++i) idx[i] = i;
    for (size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);
    return idx;
}

} // namespace

PretrainResult pretrain_decoder(const std::vector<img::Image>& train_images, int length,
                                int depth, const EmbedTrainConfig& config, uint64_t seed) {
    if (train_images.size() < 16)
        throw std::invalid_argument("pretrain_decoder: need at least 16 training images");
    const int image_size = train_images.front().height;
    for (const auto& im : train_images)
        if (im.height != image_size || im.width != image_size || im.channels != 3)
            throw std::invalid_argument("pretrain_decoder: images must be square RGB of one size");

    DecoderConfig dcfg;
    dcfg.depth = depth;
    dcfg.message_length = length;
    dcfg.image_size = image_size;
    WatermarkEncoder encoder(length, image_size, derive_seed(seed, "pretrain/encoder"));
    WatermarkDecoder decoder(dcfg, derive_seed(seed, "pretrain/decoder"));

    std::vector<nn::Tensor> params = encoder.parameters();
    for (auto& p : decoder.parameters()) params.push_back(p);
    nn::AdamConfig acfg;
    acfg.lr = float(config.decoder_lr);
    nn::Adam adam(params, acfg);

    std::vector<nn::Tensor> inputs;
    inputs.reserve(train_images.size());
    for (const auto& im : train_images) inputs.push_back(gen::image_to_tensor(im));

    Rng order_rng(derive_seed(seed, "pretrain/order"));
    Rng msg_rng(derive_seed(seed, "pretrain/messages"));
    const int batch = std::max(1, config.batch_size);

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        const auto idx = shuffled_indices(inputs.size(), order_rng);
        for (size_t start = 0; start < idx.size(); start += size_t(batch)) {
            const size_t end = std::min(idx.size(), start + size_t(batch));
            const float inv = 1.0f / float(end - start);
            for (size_t i = start; i < end; ++i) {
                Message m = random_message(length, msg_rng.next_u64());
                auto encoded = encoder.encode(inputs[idx[i]], m);
                auto loss = nn::add(
                    nn::bce_with_logits(decoder.logits(encoded), m.bits),
                    nn::scale(nn::mse_loss(encoded, inputs[idx[i]]), float(config.image_weight)));
                nn::backward(nn::scale(loss, inv));
            }
            adam.step();
        }
    }

    // train accuracy with fresh deterministic messages
    Rng eval_rng(derive_seed(seed, "pretrain/eval"));
    double acc_sum = 0.0;
    for (const auto& input : inputs) {
        Message m = random_message(length, eval_rng.next_u64());
        const Message got = decoder.decode_tensor(encoder.encode(input, m));
        acc_sum += bit_accuracy(got, m);
    }
    PretrainResult result{std::move(encoder), std::move(decoder),
                          acc_sum / double(inputs.size()), false};
    result.reached_target = result.train_bit_acc >= config.target_bit_acc;
    return result;
}

EmbedResult embed_watermark_into_generator(const gen::GeneratorModel& model,
                                           const WatermarkDecoder& decoder,
                                           const Message& message,
                                           const std::vector<gen::GenerationRequest>& requests,
                                           const EmbedTrainConfig& config) {
    if (int(message.size()) != decoder.config().message_length)
        throw std::invalid_argument("embed: message length does not match decoder");
    if (requests.size() < 5)
        throw std::invalid_argument("embed: need at least 5 requests (1 in 5 held out)");

    gen::GeneratorModel tuned = model.clone();
    nn::AdamConfig acfg;
    acfg.lr = float(config.generator_lr);
    nn::Adam adam(tuned.parameters(), acfg);

    // every fifth request is validation
    std::vector<nn::Tensor> train_bases, val_bases;
    for (size_t i = 0; i < requests.size(); ++i) {
        auto base = gen::image_to_tensor(gen::render_base(requests[i], tuned.image_size));
        if (i % 5 == 4) val_bases.push_back(base);
        else train_bases.push_back(base);
    }

    const int batch = std::max(1, config.batch_size);
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        for (size_t start = 0; start < train_bases.size(); start += size_t(batch)) {
            const size_t end = std::min(train_bases.size(), start + size_t(batch));
            const float inv = 1.0f / float(end - start);
            for (size_t i = start; i < end; ++i) {
                auto out = gen::generate_tensor(train_bases[i], tuned);
                auto loss = nn::add(
                    nn::bce_with_logits(decoder.logits(out), message.bits),
                    nn::scale(nn::mse_loss(out, train_bases[i]), float(config.image_weight)));
                nn::backward(nn::scale(loss, inv));
            }
            adam.step();
        }
    }

    double acc_sum = 0.0, psnr_sum = 0.0;
    for (const auto& base : val_bases) {
        auto out = gen::generate_tensor(base, tuned);
        acc_sum += bit_accuracy(bits_from_logits(decoder.logits(out)), message);
        psnr_sum += img::psnr(gen::tensor_to_image(out), gen::tensor_to_image(base));
    }
    EmbedResult result{std::move(tuned), acc_sum / double(val_bases.size()),
                       psnr_sum / double(val_bases.size()), false};
    result.reached_target = result.val_bit_acc >= config.target_bit_acc;
    result.model.embedded_message = message.bits;
    return result;
}

Message decode(const img::Image& image, const WatermarkDecoder& decoder) {
    return decoder.decode(image);
}

Verdict verify(const img::Image& image, const WatermarkDecoder& decoder, const Message& message,
               const VerificationPolicy& policy) {
    const double acc = bit_accuracy(decoder.decode(image), message);
    return {acc, is_watermarked_acc(acc, policy)};
}

} // namespace wmlab::wm
