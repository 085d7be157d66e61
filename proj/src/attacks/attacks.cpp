#include "wmlab/attacks.hpp"

#include "wmlab/optim.hpp"
#include "wmlab/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace wmlab::attack {

img::Image edge_attack(const img::Image& image, const EdgeAttackConfig& config) {
    if (config.noise_scale < 0.0f)
        throw std::invalid_argument("edge_attack: noise_scale must be non-negative");
    const img::EdgeMap mask = img::sobel_edges(image, config.edge_threshold);
    img::Image out = image;
    if (config.noise_scale == 0.0f) return out;
    Rng rng(mix64(config.seed ^ fnv1a64("edge-attack")));
    for (int y = 0; y < image.height; ++y)
        for (int x = 0; x < image.width; ++x) {
            if (!mask.at(y, x)) continue;
            for (int c = 0; c < image.channels; ++c) {
                const float eps = float(rng.normal());
                out.at(y, x, c) =
                    std::clamp(out.at(y, x, c) + config.noise_scale * eps, 0.0f, 1.0f);
            }
        }
    return out;
}

// ---- blurring -----------------------------------------------------------------------

BlurMethod parse_blur_method(const std::string& name) {
    if (name == "box") return BlurMethod::box;
    if (name == "gaussian") return BlurMethod::gaussian;
    if (name == "motion") return BlurMethod::motion;
    if (name == "resize8") return BlurMethod::resize8;
    if (name == "resize16") return BlurMethod::resize16;
    if (name == "resize32") return BlurMethod::resize32;
    throw std::invalid_argument("blur_attack: unsupported method '" + name + "'");
}

std::string blur_method_name(BlurMethod m) {
    switch (m) {
        case BlurMethod::box: return "box";
        case BlurMethod::gaussian: return "gaussian";
        case BlurMethod::motion: return "motion";
        case BlurMethod::resize8: return "resize8";
        case BlurMethod::resize16: return "resize16";
        case BlurMethod::resize32: return "resize32";
    }
    throw std::invalid_argument("blur_attack: bad method enum");
}

img::BlurKernel gaussian_kernel(int n) {
    if (n < 1 || n % 2 == 0)
        throw std::invalid_argument("gaussian_kernel: size must be odd and positive");
    img::BlurKernel k;
    k.n = n;
    k.weights.assign(size_t(n) * n, 0.0f);
    const double sigma = std::max(double(n) / 3.0, 1e-6);
    const int c = n / 2;
    double total = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const double d2 = double((i - c) * (i - c) + (j - c) * (j - c));
            const double v = std::exp(-d2 / (2.0 * sigma * sigma));
            k.weights[size_t(i) * n + j] = float(v);
            total += v;
        }
    for (auto& w : k.weights) w = float(w / total);
    return k;
}

img::BlurKernel motion_kernel(int n) {
    if (n < 1 || n % 2 == 0)
        throw std::invalid_argument("motion_kernel: size must be odd and positive");
    img::BlurKernel k;
    k.n = n;
    k.weights.assign(size_t(n) * n, 0.0f);
    const int c = n / 2;
    for (int j = 0; j < n; ++j) k.weights[size_t(c) * n + j] = 1.0f / float(n);
    return k;
}

AttackOutput blur_attack(const img::Image& image, const BlurAttackConfig& config) {
    AttackOutput out;
    switch (config.method) {
        case BlurMethod::box:
        case BlurMethod::gaussian:
        case BlurMethod::motion: {
            img::BlurKernel kernel;
            if (config.method == BlurMethod::box) kernel = img::box_kernel(config.kernel_size);
            else if (config.method == BlurMethod::gaussian)
                kernel = gaussian_kernel(config.kernel_size);
            else kernel = motion_kernel(config.kernel_size);
            out.blurred = img::convolve(image, kernel);
            if (config.deblur)
                out.deblurred = img::wiener_deconvolve(out.blurred, kernel, config.snr);
            break;
        }
        case BlurMethod::resize8:
        case BlurMethod::resize16:
        case BlurMethod::resize32: {
            const int k = config.method == BlurMethod::resize8    ? 8
                          : config.method == BlurMethod::resize16 ? 16
                                                                  : 32;
            const img::Image small = img::resize_bilinear(image, k, k);
            out.blurred = img::resize_bilinear(small, image.height, image.width);
            // resampling kernel has no usable closed form; recover detail with
            // an unsharp pass instead of Wiener
            if (config.deblur) out.deblurred = img::sharpen(out.blurred, 1.0f);
            break;
        }
    }
    return out;
}

// ---- surrogate + fine-tune --------------------------------------------------------

wm::PretrainResult train_surrogate_decoder(const std::vector<img::Image>& attacker_images,
                                           int depth, int length,
                                           const wm::EmbedTrainConfig& config, uint64_t seed) {
    // identical recipe to the defender's pre-training, attacker's data and seed
    return wm::pretrain_decoder(attacker_images, length, depth, config,
                                derive_seed(seed, "surrogate"));
}

FinetuneResult finetune_attack(const gen::GeneratorModel& wm_model,
                               const SurrogateDecoder& surrogate, const wm::Message& m_hat,
                               const std::vector<gen::GenerationRequest>& requests,
                               const FinetuneAttackConfig& config) {
    if (int(m_hat.size()) != surrogate.config().message_length)
        throw std::invalid_argument("finetune_attack: m_hat length does not match surrogate");
    if (wm_model.embedded_message &&
        wm_model.embedded_message->size() == m_hat.bits.size() &&
        *wm_model.embedded_message == m_hat.bits)
        throw std::invalid_argument("finetune_attack: adversarial message equals embedded m0");
    if (requests.empty()) throw std::invalid_argument("finetune_attack: no requests");

    gen::GeneratorModel attacked = wm_model.clone();
    nn::AdamConfig acfg;
    acfg.lr = float(config.generator_lr);
    nn::Adam adam(attacked.parameters(), acfg);

    // the fidelity anchor is the pre-attack output, not the clean base
    std::vector<nn::Tensor> bases, anchors;
    bases.reserve(requests.size());
    anchors.reserve(requests.size());
    for (const auto& req : requests) {
        auto base = gen::image_to_tensor(gen::render_base(req, wm_model.image_size));
        auto pre = gen::generate_tensor(base, wm_model);
        bases.push_back(base);
        anchors.push_back(nn::Tensor::from_data(pre.shape(),
                                                {pre.data().begin(), pre.data().end()}));
    }

    std::vector<float> target_bits(m_hat.size());
    for (size_t i = 0; i < m_hat.size(); ++i) target_bits[i] = m_hat.bits[i] ? 1.0f : 0.0f;
    auto target = nn::Tensor::from_data({int(m_hat.size())}, std::move(target_bits));

    const int batch = std::max(1, config.batch_size);
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        for (size_t start = 0; start < bases.size(); start += size_t(batch)) {
            const size_t end = std::min(bases.size(), start + size_t(batch));
            const float inv = 1.0f / float(end - start);
            for (size_t i = start; i < end; ++i) {
                auto out = gen::generate_tensor(bases[i], attacked);
                auto probs = nn::sigmoid(surrogate.logits(out));
                auto loss = nn::add(
                    nn::mse_loss(probs, target),
                    nn::scale(nn::mse_loss(out, anchors[i]), float(config.image_weight)));
                nn::backward(nn::scale(loss, inv));
            }
            adam.step();
        }
    }

    double acc_sum = 0.0, psnr_sum = 0.0;
    for (size_t i = 0; i < bases.size(); ++i) {
        auto out = gen::generate_tensor(bases[i], attacked);
        acc_sum += wm::bit_accuracy(wm::bits_from_logits(surrogate.logits(out)), m_hat);
        psnr_sum += img::psnr(gen::tensor_to_image(out), gen::tensor_to_image(anchors[i]));
    }
    FinetuneResult result;
    result.model = std::move(attacked);
    result.model.embedded_message = wm_model.embedded_message; // m0 still the defender's reference
    result.surrogate_bit_acc = acc_sum / double(bases.size());
    result.mean_psnr_vs_preattack = psnr_sum / double(bases.size());
    return result;
}

// ---- evaluation ---------------------------------------------------------------------

EvalSummary evaluate_attack(const std::vector<img::Image>& attacked_images,
                            const std::vector<img::Image>& originals,
                            const wm::WatermarkDecoder& target_decoder, const wm::Message& m0,
                            const wm::VerificationPolicy& policy) {
    if (attacked_images.size() != originals.size() || attacked_images.empty())
        throw std::invalid_argument("evaluate_attack: image lists must align and be non-empty");
    EvalSummary s;
    s.rows.reserve(attacked_images.size());
    double acc_sum = 0.0, acc_sq = 0.0, psnr_sum = 0.0, ssim_sum = 0.0;
    size_t evaded = 0;
    for (size_t i = 0; i < attacked_images.size(); ++i) {
        EvalRow row;
        row.acc = wm::bit_accuracy(target_decoder.decode(attacked_images[i]), m0);
        row.watermarked = wm::is_watermarked_acc(row.acc, policy);
        row.psnr = img::psnr(attacked_images[i], originals[i]);
        row.ssim = img::ssim(attacked_images[i], originals[i]);
        acc_sum += row.acc;
        acc_sq += row.acc * row.acc;
        // identical images give +inf PSNR; cap for finite aggregates
        psnr_sum += std::min(row.psnr, 99.0);
        ssim_sum += row.ssim;
        if (!row.watermarked) ++evaded;
        s.rows.push_back(row);
    }
    const double n = double(s.rows.size());
    s.mean_acc = acc_sum / n;
    s.std_acc = std::sqrt(std::max(0.0, acc_sq / n - s.mean_acc * s.mean_acc));
    s.success_rate = double(evaded) / n;
    s.mean_psnr = psnr_sum / n;
    s.mean_ssim = ssim_sum / n;
    return s;
}

} // namespace wmlab::attack
