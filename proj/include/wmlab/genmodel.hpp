#pragma once

#include "wmlab/image.hpp"
#include "wmlab/tensor.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace wmlab::gen {

struct GenerationRequest {
    std::string prompt;
    uint64_t seed = 0;
    int steps = 1;
};

// Procedural base renderer standing in for a text-to-image sampler.
// Pure function: identical requests give bit-identical images. The prompt
// hash picks palette and pattern family, the seed places content, and the
// step count applies smoothing passes.
img::Image render_base(const GenerationRequest& request, int image_size = 64);

// Base renderer composed with a small trainable residual network; the
// residual weights are what watermark embedding and the fine-tune attack
// optimize.
struct GeneratorModel {
    int image_size = 64;
    float blend_scale = 0.2f;
    // residual net: conv 3->16 -> lrelu -> conv 16->16 -> lrelu -> conv 16->3
    nn::Tensor w1, b1, w2, b2, w3, b3;
    // Defender-side bookkeeping set by watermark embedding; never used as a
    // gradient source by any attack.
    std::optional<std::vector<uint8_t>> embedded_message;

    static GeneratorModel zeros(int image_size = 64, float blend_scale = 0.2f);
    static GeneratorModel random_init(uint64_t seed, int image_size = 64,
                                      float blend_scale = 0.2f, float weight_scale = 0.05f);

    std::vector<nn::Tensor> parameters();
    GeneratorModel clone() const; // independent copy of all weights

    void save(const std::string& path) const;
    static GeneratorModel load(const std::string& path);
};

nn::Tensor image_to_tensor(const img::Image& image); // [C,H,W], constant leaf
img::Image tensor_to_image(const nn::Tensor& t);     // clamps into [0,1]

// Differentiable generator output: clamp(base + blend_scale * residual(base)).
// `base` must be image_to_tensor(render_base(request)).
nn::Tensor generate_tensor(const nn::Tensor& base, const GeneratorModel& model);

img::Image generate(const GenerationRequest& request, const GeneratorModel& model);

struct Pair {
    GenerationRequest request;
    img::Image clean;
    img::Image watermarked;
};

// Cartesian product of (prompt, seed, steps); each pair renders the same
// request through both models.
std::vector<Pair> build_pair_corpus(const std::vector<std::string>& prompts,
                                    const std::vector<uint64_t>& seeds,
                                    const std::vector<int>& steps_list,
                                    const GeneratorModel& clean,
                                    const GeneratorModel& watermarked);

// Writes PNGs plus a manifest.json array of
// {prompt, seed, steps, clean_path, wm_path} into `dir`.
void save_pair_corpus(const std::vector<Pair>& pairs, const std::string& dir);

} // namespace wmlab::gen
