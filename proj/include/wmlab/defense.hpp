#pragma once

#include "wmlab/image.hpp"
#include "wmlab/watermark.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace wmlab::defense {

struct SmoothingConfig {
    int n_samples = 100;          // N perturbed copies
    int box_width = 8;            // w x w noise box
    float noise_amplitude = 0.3f; // beta: uniform noise in [-beta, beta]
    uint64_t seed = 0;
};

enum class SmoothingMode { multiclass, multilabel, regression };

SmoothingMode parse_smoothing_mode(const std::string& name);
std::string smoothing_mode_name(SmoothingMode m);

// N copies of `image`, each with uniform noise confined to one random
// box_width x box_width box; pixels outside the box are untouched.
std::vector<img::Image> perturb_with_box_noise(const img::Image& image,
                                               const SmoothingConfig& config);

// Per-bit majority vote; ties break toward 0.
wm::Message smooth_multiclass(const std::vector<wm::Message>& messages);

// Per-bit one-count threshold: bit = 1 iff count > N/2, ties toward 0.
// Coincides with the majority vote on hard bits; kept as a distinct path
// because it is reported separately and generalizes to soft inputs.
wm::Message smooth_multilabel(const std::vector<wm::Message>& messages);

// Median of per-message bit accuracies vs the ground truth; even counts
// average the two middle values.
double smooth_regression(const std::vector<wm::Message>& messages,
                         const wm::Message& ground_truth);

struct SmoothedResult {
    std::optional<wm::Message> aggregated_message; // class/label modes only
    double accuracy = 0.0;
    SmoothingMode mode = SmoothingMode::multiclass;
    wm::Verdict verdict;
};

// perturb -> decode each copy -> aggregate -> double-sided band verdict.
SmoothedResult defended_verify(const img::Image& image, const wm::WatermarkDecoder& decoder,
                               const wm::Message& message, const wm::VerificationPolicy& policy,
                               const SmoothingConfig& smoothing, SmoothingMode mode);

} // namespace wmlab::defense
