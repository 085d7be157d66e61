#pragma once

#include "wmlab/tensor.hpp"

#include <cstdint>
#include <vector>

namespace wmlab::nn {

struct AdamConfig {
    float lr = 1e-3f;
    float beta1 = 0.9f;
    float beta2 = 0.999f;
    float epsilon = 1e-8f;
};

// Adam with bias correction. step() consumes the accumulated gradients and
// zeroes them; step_count advances by exactly one per call.
class Adam {
public:
    Adam(std::vector<Tensor> params, AdamConfig cfg);

    void step();

    int64_t step_count() const { return step_count_; }
    const AdamConfig& config() const { return cfg_; }
    const std::vector<Tensor>& params() const { return params_; }

private:
    std::vector<Tensor> params_;
    std::vector<std::vector<float>> m_;
    std::vector<std::vector<float>> v_;
    int64_t step_count_ = 0;
    AdamConfig cfg_;
};

} // namespace wmlab::nn
