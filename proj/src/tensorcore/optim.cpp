#include "wmlab/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace wmlab::nn {

Adam::Adam(std::vector<Tensor> params, AdamConfig cfg)
    : params_(std::move(params)), cfg_(cfg) {
    if (!(cfg_.lr >= 0.0f)) throw std::invalid_argument("adam: lr must be non-negative");
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const auto& p : params_) {
        if (!p.requires_grad())
            throw std::invalid_argument("adam: parameter without gradient buffer");
        m_.emplace_back(p.numel(), 0.0f);
        v_.emplace_back(p.numel(), 0.0f);
    }
}

void Adam::step() {
    ++step_count_;
    const double bc1 = 1.0 - std::pow(double(cfg_.beta1), double(step_count_));
    const double bc2 = 1.0 - std::pow(double(cfg_.beta2), double(step_count_));
    for (size_t pi = 0; pi < params_.size(); ++pi) {
        auto& p = params_[pi];
        if (!p.has_grad())
            throw std::invalid_argument("adam: parameter gradient missing");
        auto val = p.data();
        auto g = p.grad();
        auto& m = m_[pi];
        auto& v = v_[pi];
        for (size_t i = 0; i < m.size(); ++i) {
            m[i] = cfg_.beta1 * m[i] + (1.0f - cfg_.beta1) * g[i];
            v[i] = cfg_.beta2 * v[i] + (1.0f - cfg_.beta2) * g[i] * g[i];
            const float mhat = float(m[i] / bc1);
            const float vhat = float(v[i] / bc2);
            val[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.epsilon);
            g[i] = 0.0f;
        }
    }
}

} // namespace wmlab::nn
