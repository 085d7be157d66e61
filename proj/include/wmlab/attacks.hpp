#pragma once

#include "wmlab/genmodel.hpp"
#include "wmlab/image.hpp"
#include "wmlab/watermark.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace wmlab::attack {

// ---- edge-prediction noise -----------------------------------------------------

struct EdgeAttackConfig {
    float edge_threshold = 0.25f;
    float noise_scale = 1.0f; // multiplier on standard normal noise
    uint64_t seed = 0;
};

// clamp(I + noise_scale * eps (.) edge_mask); pixels off the mask are
// untouched, bit for bit.
img::Image edge_attack(const img::Image& image, const EdgeAttackConfig& config);

// ---- blurring ---------------------------------------------------------------------

enum class BlurMethod { box, gaussian, motion, resize8, resize16, resize32 };

BlurMethod parse_blur_method(const std::string& name);
std::string blur_method_name(BlurMethod m);

struct BlurAttackConfig {
    BlurMethod method = BlurMethod::box;
    int kernel_size = 9; // box/gaussian/motion
    double snr = 1e3;    // Wiener regularizer for the deblur pass
    bool deblur = true;
};

struct AttackOutput {
    img::Image blurred;
    std::optional<img::Image> deblurred;
};

// Discrete Gaussian, sigma = n/3, truncated to n x n and renormalized.
img::BlurKernel gaussian_kernel(int n);
// Horizontal 1 x n averaging kernel embedded in an n x n matrix.
img::BlurKernel motion_kernel(int n);

AttackOutput blur_attack(const img::Image& image, const BlurAttackConfig& config);

// ---- surrogate + fine-tune ----------------------------------------------------------

// The attacker's decoder has the same structure as the defender's; only its
// parameters and training provenance differ. Its training path never touches
// the target decoder.
using SurrogateDecoder = wm::WatermarkDecoder;

wm::PretrainResult train_surrogate_decoder(const std::vector<img::Image>& attacker_images,
                                           int depth, int length,
                                           const wm::EmbedTrainConfig& config, uint64_t seed);

struct FinetuneAttackConfig {
    int adversarial_length = 48;
    int surrogate_depth = 8;
    double generator_lr = 0.0005;
    double image_weight = 10.0; // fidelity anchor to the pre-attack output
    int epochs = 200;
    int batch_size = 8;
    uint64_t seed = 0;
};

struct FinetuneResult {
    gen::GeneratorModel model;
    double surrogate_bit_acc = 0.0; // accuracy of surrogate reads vs m_hat
    double mean_psnr_vs_preattack = 0.0;
};

// Retargets the generator residual at m_hat through the surrogate:
//   min ||sigmoid(FDec(G(req))) - m_hat||^2 + image_weight * MSE(out, pre-attack out)
FinetuneResult finetune_attack(const gen::GeneratorModel& wm_model,
                               const SurrogateDecoder& surrogate, const wm::Message& m_hat,
                               const std::vector<gen::GenerationRequest>& requests,
                               const FinetuneAttackConfig& config);

// ---- evaluation harness ----------------------------------------------------------

struct EvalRow {
    double acc = 0.0;
    bool watermarked = false;
    double psnr = 0.0;
    double ssim = 0.0;
};

struct EvalSummary {
    std::vector<EvalRow> rows;
    double mean_acc = 0.0;
    double std_acc = 0.0;
    double success_rate = 0.0; // fraction judged unwatermarked
    double mean_psnr = 0.0;
    double mean_ssim = 0.0;
};

EvalSummary evaluate_attack(const std::vector<img::Image>& attacked_images,
                            const std::vector<img::Image>& originals,
                            const wm::WatermarkDecoder& target_decoder, const wm::Message& m0,
                            const wm::VerificationPolicy& policy);

} // namespace wmlab::attack
