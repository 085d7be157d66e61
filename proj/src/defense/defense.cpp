#include "wmlab/defense.hpp"

#include "wmlab/rng.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace wmlab::defense {

SmoothingMode parse_smoothing_mode(const std::string& name) {
    if (name == "multiclass" || name == "class") return SmoothingMode::multiclass;
    if (name == "multilabel" || name == "label") return SmoothingMode::multilabel;
    if (name == "regression") return SmoothingMode::regression;
    throw std::invalid_argument("defense: unknown smoothing mode '" + name + "'");
}

std::string smoothing_mode_name(SmoothingMode m) {
    switch (m) {
        case SmoothingMode::multiclass: return "multiclass";
        case SmoothingMode::multilabel: return "multilabel";
        case SmoothingMode::regression: return "regression";
    }
    throw std::invalid_argument("defense: bad mode enum");
}

std::vector<img::Image> perturb_with_box_noise(const img::Image& image,
                                               const SmoothingConfig& config) {
    if (config.n_samples < 1)
        throw std::invalid_argument("perturb_with_box_noise: N must be >= 1");
    if (config.box_width < 1 || config.box_width > std::min(image.height, image.width))
        throw std::invalid_argument("perturb_with_box_noise: box width exceeds image side");
    if (!(config.noise_amplitude > 0.0f) && config.noise_amplitude != 0.0f)
        throw std::invalid_argument("perturb_with_box_noise: noise amplitude must be >= 0");

    std::vector<img::Image> out;
    out.reserve(size_t(config.n_samples));
    const int w = config.box_width;
    for (int i = 0; i < config.n_samples; ++i) {
        Rng rng(derive_seed(config.seed, "box-noise/" + std::to_string(i)));
        img::Image copy = image;
        const int y0 = int(rng.below(uint64_t(image.height - w + 1)));
        const int x0 = int(rng.below(uint64_t(image.width - w + 1)));
        const float beta = config.noise_amplitude;
        for (int y = y0; y < y0 + w; ++y)
            for (int x = x0; x < x0 + w; ++x)
                for (int c = 0; c < image.channels; ++c) {
                    const float u = float(rng.uniform(-double(beta), double(beta)));
                    copy.at(y, x, c) = std::clamp(copy.at(y, x, c) + u, 0.0f, 1.0f);
                }
        out.push_back(std::move(copy));
    }
    return out;
}

wm::Message smooth_multiclass(const std::vector<wm::Message>& messages) {
    if (messages.empty()) throw std::invalid_argument("smooth_multiclass: empty message list");
    const size_t len = messages.front().size();
    wm::Message out;
    out.bits.assign(len, 0);
    for (size_t i = 0; i < len; ++i) {
        size_t ones = 0, zeros = 0;
        for (const auto& m : messages) {
            if (m.size() != len)
                throw std::invalid_argument("smooth_multiclass: unequal message lengths");
            (m.bits[i] ? ones : zeros) += 1;
        }
        out.bits[i] = ones > zeros ? 1 : 0; // tie -> 0
    }
    return out;
}

wm::Message smooth_multilabel(const std::vector<wm::Message>& messages) {
    if (messages.empty()) throw std::invalid_argument("smooth_multilabel: empty message list");
    const size_t len = messages.front().size();
    const size_t n = messages.size();
    wm::Message out;
    out.bits.assign(len, 0);
    for (size_t i = 0; i < len; ++i) {
        size_t count = 0;
        for (const auto& m : messages) {
            if (m.size() != len)
                throw std::invalid_argument("smooth_multilabel: unequal message lengths");
            count += m.bits[i];
        }
        out.bits[i] = (2 * count > n) ? 1 : 0; // count > N/2, tie -> 0
    }
    return out;
}

double smooth_regression(const std::vector<wm::Message>& messages,
                         const wm::Message& ground_truth) {
    if (messages.empty()) throw std::invalid_argument("smooth_regression: empty message list");
    std::vector<double> accs;
    accs.reserve(messages.size());
    for (const auto& m : messages) accs.push_back(wm::bit_accuracy(m, ground_truth));
    std::sort(accs.begin(), accs.end());
    const size_t n = accs.size();
    if (n % 2 == 1) return accs[n / 2];
    return 0.5 * (accs[n / 2 - 1] + accs[n / 2]);
}

SmoothedResult defended_verify(const img::Image& image, const wm::WatermarkDecoder& decoder,
                               const wm::Message& message, const wm::VerificationPolicy& policy,
                               const SmoothingConfig& smoothing, SmoothingMode mode) {
    const auto perturbed = perturb_with_box_noise(image, smoothing);
    std::vector<wm::Message> decoded;
    decoded.reserve(perturbed.size());
    for (const auto& p : perturbed) decoded.push_back(decoder.decode(p));

    SmoothedResult result;
    result.mode = mode;
    switch (mode) {
        case SmoothingMode::multiclass:
            result.aggregated_message = smooth_multiclass(decoded);
            result.accuracy = wm::bit_accuracy(*result.aggregated_message, message);
            break;
        case SmoothingMode::multilabel:
            result.aggregated_message = smooth_multilabel(decoded);
            result.accuracy = wm::bit_accuracy(*result.aggregated_message, message);
            break;
        case SmoothingMode::regression:
            result.accuracy = smooth_regression(decoded, message);
            break;
    }
    result.verdict = {result.accuracy, wm::is_watermarked_acc(result.accuracy, policy)};
    return result;
}

} // namespace wmlab::defense
