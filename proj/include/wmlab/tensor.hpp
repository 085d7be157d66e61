#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

namespace wmlab::nn {

class Tensor;

namespace detail {

struct Node {
    std::vector<int> shape;
    std::vector<float> value;
    std::vector<float> grad;      // allocated eagerly for trainable leaves, lazily otherwise
    bool requires_grad = false;   // trainable leaf
    bool needs_grad = false;      // participates in backprop (leaf flag or inherited)
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backprop; // scatters this->grad into the parents

    int64_t numel() const { return int64_t(value.size()); }
    void ensure_grad() {
        if (grad.size() != value.size()) grad.assign(value.size(), 0.0f);
    }
};

} // namespace detail

// Shared-ownership handle to a dense float32 tensor in an autograd graph.
// Copies alias the same storage; clone() makes an independent leaf.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::shared_ptr<detail::Node> n) : node_(std::move(n)) {}

    static Tensor zeros(std::vector<int> shape, bool requires_grad = false);
    static Tensor from_data(std::vector<int> shape, std::vector<float> data,
                            bool requires_grad = false);
    static Tensor scalar(float v);

    bool defined() const { return node_ != nullptr; }
    const std::vector<int>& shape() const { return node_->shape; }
    int64_t numel() const { return node_->numel(); }
    bool requires_grad() const { return node_->requires_grad; }

    std::span<float> data() { return node_->value; }
    std::span<const float> data() const { return node_->value; }

    // Gradient buffer; zeros if backward has not reached this tensor yet.
    std::span<float> grad();
    std::span<const float> grad() const;
    bool has_grad() const { return !node_->grad.empty(); }

    float item() const; // value of a single-element tensor

    Tensor clone(bool requires_grad) const; // deep copy of the value, fresh leaf

    const std::shared_ptr<detail::Node>& node() const { return node_; }

private:
    std::shared_ptr<detail::Node> node_;
};

// ---- graph-building operations -------------------------------------------

// input [C_in,H,W] * kernel [C_out,C_in,k,k] -> [C_out,H',W'], zero padding.
Tensor conv2d(const Tensor& input, const Tensor& kernel, int stride = 1, int padding = 0);

// out[c,y,x] = x[c,y,x] + bias[c]
Tensor add_channel_bias(const Tensor& x, const Tensor& bias);

// x [N] * weight [M,N] + bias [M] -> [M]
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);

Tensor add(const Tensor& a, const Tensor& b);      // elementwise, same shape
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, float s);
Tensor leaky_relu(const Tensor& x, float negative_slope = 0.01f);
Tensor sigmoid(const Tensor& x);
Tensor clamp01(const Tensor& x);                   // gradient passes where 0 < x < 1
Tensor concat_channels(const Tensor& a, const Tensor& b); // [Ca,H,W]+[Cb,H,W]
Tensor broadcast_channels(const Tensor& x, int h, int w);  // [C] -> [C,H,W] constant planes
Tensor upsample_nearest(const Tensor& x, int factor);      // [C,H,W] -> [C,fH,fW]
Tensor global_avg_pool(const Tensor& x);           // [C,H,W] -> [C]
Tensor reshape(const Tensor& x, std::vector<int> shape);
Tensor sum(const Tensor& x);                       // scalar
Tensor mean(const Tensor& x);                      // scalar
Tensor mse_loss(const Tensor& a, const Tensor& b); // scalar, mean squared error

// mean of the numerically stable binary cross entropy on raw logits
Tensor bce_with_logits(const Tensor& logits, const std::vector<uint8_t>& targets);

// Reverse-mode sweep from a scalar loss; accumulates into leaf .grad buffers.
void backward(const Tensor& loss);

} // namespace wmlab::nn
