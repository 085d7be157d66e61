#include "wmlab/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <unordered_set>

namespace wmlab::nn {

using detail::Node;

namespace {

int64_t shape_numel(const std::vector<int>& shape) {
    int64_t n = 1;
    for (int d : shape) {
        if (d <= 0) throw std::invalid_argument("tensor dimensions must be positive");
        n *= d;
    }
    return n;
}

std::shared_ptr<Node> make_node(std::vector<int> shape, std::vector<float> value) {
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->value = std::move(value);
    return n;
}

// Result node wired to its parents; needs_grad inherited.
Tensor make_op(std::vector<int> shape, std::vector<float> value,
               std::vector<Tensor> parents, std::function<void(Node&)> backprop) {
    auto n = make_node(std::move(shape), std::move(value));
    bool needs = false;
    for (const auto& p : parents) {
        needs = needs || p.node()->needs_grad;
        n->parents.push_back(p.node());
    }
    n->needs_grad = needs;
    if (needs) n->backprop = std::move(backprop);
    return Tensor(std::move(n));
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape())
        throw std::invalid_argument(std::string(op) + ": shape mismatch");
}

} // namespace

Tensor Tensor::zeros(std::vector<int> shape, bool requires_grad) {
    auto numel = shape_numel(shape);
    auto n = make_node(std::move(shape), std::vector<float>(size_t(numel), 0.0f));
    n->requires_grad = requires_grad;
    n->needs_grad = requires_grad;
    if (requires_grad) n->ensure_grad();
    return Tensor(std::move(n));
}

Tensor Tensor::from_data(std::vector<int> shape, std::vector<float> data, bool requires_grad) {
    if (shape_numel(shape) != int64_t(data.size()))
        throw std::invalid_argument("from_data: shape does not match data length");
    auto n = make_node(std::move(shape), std::move(data));
    n->requires_grad = requires_grad;
    n->needs_grad = requires_grad;
    if (requires_grad) n->ensure_grad();
    return Tensor(std::move(n));
}

Tensor Tensor::scalar(float v) { return from_data({1}, {v}); }

std::span<float> Tensor::grad() {
    node_->ensure_grad();
    return node_->grad;
}

std::span<const float> Tensor::grad() const {
    node_->ensure_grad();
    return node_->grad;
}

float Tensor::item() const {
    if (numel() != 1) throw std::invalid_argument("item: tensor is not a scalar");
    return node_->value[0];
}

Tensor Tensor::clone(bool requires_grad) const {
    return from_data(shape(), {node_->value.begin(), node_->value.end()}, requires_grad);
}

// ---- conv2d ----------------------------------------------------------------

namespace {

struct ConvDims {
    int cin, h, w;
    int cout, k;
    int stride, pad;
    int oh, ow;
};

ConvDims conv_dims(const Tensor& input, const Tensor& kernel, int stride, int padding) {
    const auto& is = input.shape();
    const auto& ks = kernel.shape();
    if (is.size() != 3) throw std::invalid_argument("conv2d: input must be [C,H,W]");
    if (ks.size() != 4 || ks[2] != ks[3])
        throw std::invalid_argument("conv2d: kernel must be [C_out,C_in,k,k]");
    if (ks[1] != is[0])
        throw std::invalid_argument("conv2d: kernel C_in " + std::to_string(ks[1]) +
                                    " does not match input channels " + std::to_string(is[0]));
    if (stride < 1) throw std::invalid_argument("conv2d: stride must be >= 1");
    if (padding < 0) throw std::invalid_argument("conv2d: padding must be >= 0");
    ConvDims d;
    d.cin = is[0]; d.h = is[1]; d.w = is[2];
    d.cout = ks[0]; d.k = ks[2];
    d.stride = stride; d.pad = padding;
    if (d.k > d.h + 2 * padding || d.k > d.w + 2 * padding)
        throw std::invalid_argument("conv2d: kernel larger than padded input");
    d.oh = (d.h + 2 * padding - d.k) / stride + 1;
    d.ow = (d.w + 2 * padding - d.k) / stride + 1;
    return d;
}

// Valid output range [lo,hi) so that o*stride + off stays inside [0,size_in).
inline void valid_range(int size_out, int size_in, int off, int stride, int& lo, int& hi) {
    lo = 0;
    if (off < 0) lo = (-off + stride - 1) / stride;
    hi = size_out;
    const int max_in = size_in - 1 - off;
    if (max_in < 0) { hi = lo; return; }
    hi = std::min(size_out, max_in / stride + 1);
    if (hi < lo) hi = lo;
}

// Stride-2 reads with even/odd column packing become unit-stride AXPY loops.
// packed has layout [2][h][wp]: parity plane, then row.
void pack_even_odd(const float* __restrict__ plane, int h, int w, int wp,
                   float* __restrict__ packed) {
    for (int y = 0; y < h; ++y) {
        const float* __restrict__ row = plane + size_t(y) * w;
        float* __restrict__ even = packed + size_t(y) * wp;
        float* __restrict__ odd = packed + size_t(h) * wp + size_t(y) * wp;
        for (int x2 = 0; x2 < wp; ++x2) {
            even[x2] = row[2 * x2];
            odd[x2] = (2 * x2 + 1 < w) ? row[2 * x2 + 1] : 0.0f;
        }
    }
}

void conv_forward(const ConvDims& d, const float* __restrict__ in,
                  const float* __restrict__ w, float* __restrict__ out) {
    const int oh = d.oh, ow = d.ow, k = d.k, s = d.stride;
    const int wp = (d.w + 1) / 2;
    std::vector<float> packed;
    if (s == 2) packed.assign(size_t(2) * d.h * wp, 0.0f);
    for (int ci = 0; ci < d.cin; ++ci) {
        const float* in_plane = in + size_t(ci) * d.h * d.w;
        if (s == 2) pack_even_odd(in_plane, d.h, d.w, wp, packed.data());
        for (int co = 0; co < d.cout; ++co) {
            float* out_plane = out + size_t(co) * oh * ow;
            const float* wk = w + (size_t(co) * d.cin + ci) * k * k;
            for (int ky = 0; ky < k; ++ky) {
                const int yoff = ky - d.pad;
                int ylo, yhi;
                valid_range(oh, d.h, yoff, s, ylo, yhi);
                for (int kx = 0; kx < k; ++kx) {
                    const float wv = wk[ky * k + kx];
                    const int xoff = kx - d.pad;
                    int xlo, xhi;
                    valid_range(ow, d.w, xoff, s, xlo, xhi);
                    if (s == 1) {
                        for (int yo = ylo; yo < yhi; ++yo) {
                            const float* __restrict__ irow =
                                in_plane + size_t(yo + yoff) * d.w + xoff;
                            float* __restrict__ orow = out_plane + size_t(yo) * ow;
                            for (int xo = xlo; xo < xhi; ++xo) orow[xo] += wv * irow[xo];
                        }
                    } else {
                        // xi = 2*xo + xoff lives in the parity plane of xoff
                        const int parity = xoff & 1;
                        const int shift = (xoff - parity) / 2;
                        const float* __restrict__ par =
                            packed.data() + size_t(parity) * d.h * wp;
                        for (int yo = ylo; yo < yhi; ++yo) {
                            const float* __restrict__ irow =
                                par + size_t(yo * 2 + yoff) * wp + shift;
                            float* __restrict__ orow = out_plane + size_t(yo) * ow;
                            for (int xo = xlo; xo < xhi; ++xo) orow[xo] += wv * irow[xo];
                        }
                    }
                }
            }
        }
    }
}

void conv_backward_input(const ConvDims& d, const float* __restrict__ gout,
                         const float* __restrict__ w, float* __restrict__ gin) {
    const int oh = d.oh, ow = d.ow, k = d.k, s = d.stride;
    const int wp = (d.w + 1) / 2;
    std::vector<float> packed;
    if (s == 2) packed.assign(size_t(2) * d.h * wp, 0.0f);
    for (int ci = 0; ci < d.cin; ++ci) {
        float* gin_plane = gin + size_t(ci) * d.h * d.w;
        if (s == 2) std::fill(packed.begin(), packed.end(), 0.0f);
        for (int co = 0; co < d.cout; ++co) {
            const float* gplane = gout + size_t(co) * oh * ow;
            const float* wk = w + (size_t(co) * d.cin + ci) * k * k;
            for (int ky = 0; ky < k; ++ky) {
                const int yoff = ky - d.pad;
                int ylo, yhi;
                valid_range(oh, d.h, yoff, s, ylo, yhi);
                for (int kx = 0; kx < k; ++kx) {
                    const float wv = wk[ky * k + kx];
                    const int xoff = kx - d.pad;
                    int xlo, xhi;
                    valid_range(ow, d.w, xoff, s, xlo, xhi);
                    if (s == 1) {
                        for (int yo = ylo; yo < yhi; ++yo) {
                            float* __restrict__ grow =
                                gin_plane + size_t(yo + yoff) * d.w + xoff;
                            const float* __restrict__ gorow = gplane + size_t(yo) * ow;
                            for (int xo = xlo; xo < xhi; ++xo) grow[xo] += wv * gorow[xo];
                        }
                    } else {
                        const int parity = xoff & 1;
                        const int shift = (xoff - parity) / 2;
                        float* __restrict__ par = packed.data() + size_t(parity) * d.h * wp;
                        for (int yo = ylo; yo < yhi; ++yo) {
                            float* __restrict__ grow = par + size_t(yo * 2 + yoff) * wp + shift;
                            const float* __restrict__ gorow = gplane + size_t(yo) * ow;
                            for (int xo = xlo; xo < xhi; ++xo) grow[xo] += wv * gorow[xo];
                        }
                    }
                }
            }
        }
        if (s == 2) { // merge parity planes back into the gradient image
            for (int y = 0; y < d.h; ++y) {
                const float* __restrict__ even = packed.data() + size_t(y) * wp;
                const float* __restrict__ odd =
                    packed.data() + size_t(d.h) * wp + size_t(y) * wp;
                float* __restrict__ row = gin_plane + size_t(y) * d.w;
                for (int x2 = 0; x2 < wp; ++x2) {
                    row[2 * x2] += even[x2];
                    if (2 * x2 + 1 < d.w) row[2 * x2 + 1] += odd[x2];
                }
            }
        }
    }
}

// 8-lane partial sums keep the reduction order fixed and vectorizable.
inline float dot_stride1(const float* a, const float* b, int n) {
    float lanes[8] = {0, 0, 0, 0, 0, 0, 0, 0};
    int i = 0;
    for (; i + 8 <= n; i += 8)
        for (int l = 0; l < 8; ++l) lanes[l] += a[i + l] * b[i + l];
    float tail = 0.0f;
    for (; i < n; ++i) tail += a[i] * b[i];
    return ((lanes[0] + lanes[1]) + (lanes[2] + lanes[3])) +
           ((lanes[4] + lanes[5]) + (lanes[6] + lanes[7])) + tail;
}

void conv_backward_kernel(const ConvDims& d, const float* __restrict__ gout,
                          const float* __restrict__ in, float* __restrict__ gw) {
    const int oh = d.oh, ow = d.ow, k = d.k, s = d.stride;
    // product rows accumulate into a scratch row first so the x loop stays a
    // plain vectorizable multiply-add; the scalar reduction happens once per tap
    std::vector<float> scratch(size_t(ow), 0.0f);
    for (int co = 0; co < d.cout; ++co) {
        const float* gplane = gout + size_t(co) * oh * ow;
        for (int ci = 0; ci < d.cin; ++ci) {
            const float* in_plane = in + size_t(ci) * d.h * d.w;
            float* gwk = gw + (size_t(co) * d.cin + ci) * k * k;
            for (int ky = 0; ky < k; ++ky) {
                const int yoff = ky - d.pad;
                int ylo, yhi;
                valid_range(oh, d.h, yoff, s, ylo, yhi);
                for (int kx = 0; kx < k; ++kx) {
                    const int xoff = kx - d.pad;
                    int xlo, xhi;
                    valid_range(ow, d.w, xoff, s, xlo, xhi);
                    float* __restrict__ acc = scratch.data();
                    std::fill(scratch.begin(), scratch.end(), 0.0f);
                    for (int yo = ylo; yo < yhi; ++yo) {
                        const float* __restrict__ irow =
                            in_plane + size_t(yo * s + yoff) * d.w + xoff;
                        const float* __restrict__ gorow = gplane + size_t(yo) * ow;
                        if (s == 1) {
                            for (int xo = xlo; xo < xhi; ++xo) acc[xo] += gorow[xo] * irow[xo];
                        } else {
                            for (int xo = xlo; xo < xhi; ++xo)
                                acc[xo] += gorow[xo] * irow[xo * s];
                        }
                    }
                    float total = 0.0f;
                    for (int xo = xlo; xo < xhi; ++xo) total += acc[xo];
                    gwk[ky * k + kx] += total;
                }
            }
        }
    }
}

} // namespace

Tensor conv2d(const Tensor& input, const Tensor& kernel, int stride, int padding) {
    const ConvDims d = conv_dims(input, kernel, stride, padding);
    std::vector<float> out(size_t(d.cout) * d.oh * d.ow, 0.0f);
    conv_forward(d, input.data().data(), kernel.data().data(), out.data());
    return make_op({d.cout, d.oh, d.ow}, std::move(out), {input, kernel},
                   [d, in = input.node(), kn = kernel.node()](Node& self) {
                       if (in->needs_grad) {
                           in->ensure_grad();
                           conv_backward_input(d, self.grad.data(), kn->value.data(),
                                               in->grad.data());
                       }
                       if (kn->needs_grad) {
                           kn->ensure_grad();
                           conv_backward_kernel(d, self.grad.data(), in->value.data(),
                                                kn->grad.data());
                       }
                   });
}

// ---- pointwise and shape ops -----------------------------------------------

Tensor add_channel_bias(const Tensor& x, const Tensor& bias) {
    const auto& xs = x.shape();
    if (xs.size() != 3 || bias.shape().size() != 1 || bias.shape()[0] != xs[0])
        throw std::invalid_argument("add_channel_bias: bias must be [C] matching input");
    const int c = xs[0], hw = xs[1] * xs[2];
    std::vector<float> out(x.data().begin(), x.data().end());
    for (int i = 0; i < c; ++i) {
        const float b = bias.data()[i];
        float* row = out.data() + size_t(i) * hw;
        for (int j = 0; j < hw; ++j) row[j] += b;
    }
    return make_op(xs, std::move(out), {x, bias},
                   [c, hw, xn = x.node(), bn = bias.node()](Node& self) {
                       if (xn->needs_grad) {
                           xn->ensure_grad();
                           for (size_t i = 0; i < self.grad.size(); ++i)
                               xn->grad[i] += self.grad[i];
                       }
                       if (bn->needs_grad) {
                           bn->ensure_grad();
                           for (int i = 0; i < c; ++i) {
                               float acc = 0.0f;
                               const float* g = self.grad.data() + size_t(i) * hw;
                               for (int j = 0; j < hw; ++j) acc += g[j];
                               bn->grad[i] += acc;
                           }
                       }
                   });
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
    const auto& ws = weight.shape();
    if (x.shape().size() != 1 || ws.size() != 2 || ws[1] != x.shape()[0])
        throw std::invalid_argument("linear: weight must be [M,N] with x [N]");
    if (bias.shape().size() != 1 || bias.shape()[0] != ws[0])
        throw std::invalid_argument("linear: bias must be [M]");
    const int m = ws[0], n = ws[1];
    std::vector<float> out(size_t(m), 0.0f);
    for (int i = 0; i < m; ++i)
        out[i] = bias.data()[i] + dot_stride1(weight.data().data() + size_t(i) * n,
                                              x.data().data(), n);
    return make_op({m}, std::move(out), {x, weight, bias},
                   [m, n, xn = x.node(), wn = weight.node(), bn = bias.node()](Node& self) {
                       if (xn->needs_grad) {
                           xn->ensure_grad();
                           for (int i = 0; i < m; ++i) {
                               const float g = self.grad[i];
                               const float* wrow = wn->value.data() + size_t(i) * n;
                               for (int j = 0; j < n; ++j) xn->grad[j] += g * wrow[j];
                           }
                       }
                       if (wn->needs_grad) {
                           wn->ensure_grad();
                           for (int i = 0; i < m; ++i) {
                               const float g = self.grad[i];
                               float* grow = wn->grad.data() + size_t(i) * n;
                               for (int j = 0; j < n; ++j) grow[j] += g * xn->value[j];
                           }
                       }
                       if (bn->needs_grad) {
                           bn->ensure_grad();
                           for (int i = 0; i < m; ++i) bn->grad[i] += self.grad[i];
                       }
                   });
}

Tensor add(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "add");
    std::vector<float> out(a.data().begin(), a.data().end());
    for (size_t i = 0; i < out.size(); ++i) out[i] += b.data()[i];
    return make_op(a.shape(), std::move(out), {a, b},
                   [an = a.node(), bn = b.node()](Node& self) {
                       for (auto* p : {an.get(), bn.get()}) {
                           if (!p->needs_grad) continue;
                           p->ensure_grad();
                           for (size_t i = 0; i < self.grad.size(); ++i)
                               p->grad[i] += self.grad[i];
                       }
                   });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "sub");
    std::vector<float> out(a.data().begin(), a.data().end());
    for (size_t i = 0; i < out.size(); ++i) out[i] -= b.data()[i];
    return make_op(a.shape(), std::move(out), {a, b},
                   [an = a.node(), bn = b.node()](Node& self) {
                       if (an->needs_grad) {
                           an->ensure_grad();
                           for (size_t i = 0; i < self.grad.size(); ++i)
                               an->grad[i] += self.grad[i];
                       }
                       if (bn->needs_grad) {
                           bn->ensure_grad();
                           for (size_t i = 0; i < self.grad.size(); ++i)
                               bn->grad[i] -= self.grad[i];
                       }
                   });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "mul");
    std::vector<float> out(a.data().begin(), a.data().end());
    for (size_t i = 0; i < out.size(); ++i) out[i] *= b.data()[i];
    return make_op(a.shape(), std::move(out), {a, b},
                   [an = a.node(), bn = b.node()](Node& self) {
                       if (an->needs_grad) {
                           an->ensure_grad();
                           for (size_t i = 0; i < self.grad.size(); ++i)
                               an->grad[i] += self.grad[i] * bn->value[i];
                       }
                       if (bn->needs_grad) {
                           bn->ensure_grad();
                           for (size_t i = 0; i < self.grad.size(); ++i)
                               bn->grad[i] += self.grad[i] * an->value[i];
                       }
                   });
}

Tensor scale(const Tensor& a, float s) {
    std::vector<float> out(a.data().begin(), a.data().end());
    for (auto& v : out) v *= s;
    return make_op(a.shape(), std::move(out), {a},
                   [s, an = a.node()](Node& self) {
                       if (!an->needs_grad) return;
                       an->ensure_grad();
                       for (size_t i = 0; i < self.grad.size(); ++i)
                           an->grad[i] += s * self.grad[i];
                   });
}

Tensor leaky_relu(const Tensor& x, float negative_slope) {
    std::vector<float> out(x.data().begin(), x.data().end());
    for (auto& v : out)
        if (v < 0.0f) v *= negative_slope;
    return make_op(x.shape(), std::move(out), {x},
                   [negative_slope, xn = x.node()](Node& self) {
                       if (!xn->needs_grad) return;
                       xn->ensure_grad();
                       for (size_t i = 0; i < self.grad.size(); ++i)
                           xn->grad[i] += self.grad[i] *
                                          (xn->value[i] > 0.0f ? 1.0f : negative_slope);
                   });
}

Tensor sigmoid(const Tensor& x) {
    std::vector<float> out(x.data().begin(), x.data().end());
    for (auto& v : out) v = 1.0f / (1.0f + std::exp(-v));
    return make_op(x.shape(), std::move(out), {x},
                   [xn = x.node()](Node& self) {
                       if (!xn->needs_grad) return;
                       xn->ensure_grad();
                       for (size_t i = 0; i < self.grad.size(); ++i) {
                           const float s = self.value[i];
                           xn->grad[i] += self.grad[i] * s * (1.0f - s);
                       }
                   });
}

Tensor clamp01(const Tensor& x) {
    std::vector<float> out(x.data().begin(), x.data().end());
    for (auto& v : out) v = std::clamp(v, 0.0f, 1.0f);
    return make_op(x.shape(), std::move(out), {x},
                   [xn = x.node()](Node& self) {
                       if (!xn->needs_grad) return;
                       xn->ensure_grad();
                       for (size_t i = 0; i < self.grad.size(); ++i) {
                           const float v = xn->value[i];
                           if (v > 0.0f && v < 1.0f) xn->grad[i] += self.grad[i];
                       }
                   });
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
    const auto& as = a.shape();
    const auto& bs = b.shape();
    if (as.size() != 3 || bs.size() != 3 || as[1] != bs[1] || as[2] != bs[2])
        throw std::invalid_argument("concat_channels: spatial shapes must match");
    std::vector<float> out;
    out.reserve(a.data().size() + b.data().size());
    out.insert(out.end(), a.data().begin(), a.data().end());
    out.insert(out.end(), b.data().begin(), b.data().end());
    const size_t na = a.data().size();
    return make_op({as[0] + bs[0], as[1], as[2]}, std::move(out), {a, b},
                   [na, an = a.node(), bn = b.node()](Node& self) {
                       if (an->needs_grad) {
                           an->ensure_grad();
                           for (size_t i = 0; i < na; ++i) an->grad[i] += self.grad[i];
                       }
                       if (bn->needs_grad) {
                           bn->ensure_grad();
                           for (size_t i = na; i < self.grad.size(); ++i)
                               bn->grad[i - na] += self.grad[i];
                       }
                   });
}

Tensor broadcast_channels(const Tensor& x, int h, int w) {
    if (x.shape().size() != 1)
        throw std::invalid_argument("broadcast_channels: input must be rank 1");
    if (h < 1 || w < 1) throw std::invalid_argument("broadcast_channels: bad spatial size");
    const int c = x.shape()[0];
    std::vector<float> out(size_t(c) * h * w);
    for (int i = 0; i < c; ++i)
        std::fill_n(out.begin() + size_t(i) * h * w, size_t(h) * w, x.data()[i]);
    return make_op({c, h, w}, std::move(out), {x},
                   [c, h, w, xn = x.node()](Node& self) {
                       if (!xn->needs_grad) return;
                       xn->ensure_grad();
                       const size_t hw = size_t(h) * w;
                       for (int i = 0; i < c; ++i) {
                           float acc = 0.0f;
                           const float* g = self.grad.data() + size_t(i) * hw;
                           for (size_t j = 0; j < hw; ++j) acc += g[j];
                           xn->grad[i] += acc;
                       }
                   });
}

Tensor upsample_nearest(const Tensor& x, int factor) {
    const auto& xs = x.shape();
    if (xs.size() != 3) throw std::invalid_argument("upsample_nearest: input must be [C,H,W]");
    if (factor < 1) throw std::invalid_argument("upsample_nearest: factor must be >= 1");
    const int c = xs[0], h = xs[1], w = xs[2];
    const int oh = h * factor, ow = w * factor;
    std::vector<float> out(size_t(c) * oh * ow);
    for (int ci = 0; ci < c; ++ci)
        for (int y = 0; y < oh; ++y) {
            const float* irow = x.data().data() + (size_t(ci) * h + y / factor) * w;
            float* orow = out.data() + (size_t(ci) * oh + y) * ow;
            for (int xo = 0; xo < ow; ++xo) orow[xo] = irow[xo / factor];
        }
    return make_op({c, oh, ow}, std::move(out), {x},
                   [c, h, w, oh, ow, factor, xn = x.node()](Node& self) {
                       if (!xn->needs_grad) return;
                       xn->ensure_grad();
                       for (int ci = 0; ci < c; ++ci)
                           for (int y = 0; y < oh; ++y) {
                               float* grow = xn->grad.data() + (size_t(ci) * h + y / factor) * w;
                               const float* g = self.grad.data() + (size_t(ci) * oh + y) * ow;
                               for (int xo = 0; xo < ow; ++xo) grow[xo / factor] += g[xo];
                           }
                   });
}

Tensor global_avg_pool(const Tensor& x) {
    const auto& xs = x.shape();
    if (xs.size() != 3) throw std::invalid_argument("global_avg_pool: input must be [C,H,W]");
    const int c = xs[0], hw = xs[1] * xs[2];
    std::vector<float> out(size_t(c), 0.0f);
    for (int i = 0; i < c; ++i) {
        const float* plane = x.data().data() + size_t(i) * hw;
        float lanes[8] = {0, 0, 0, 0, 0, 0, 0, 0};
        int j = 0;
        for (; j + 8 <= hw; j += 8)
            for (int l = 0; l < 8; ++l) lanes[l] += plane[j + l];
        float acc = 0.0f;
        for (; j < hw; ++j) acc += plane[j];
        for (float l : lanes) acc += l;
        out[i] = acc / float(hw);
    }
    return make_op({c}, std::move(out), {x},
                   [c, hw, xn = x.node()](Node& self) {
                       if (!xn->needs_grad) return;
                       xn->ensure_grad();
                       const float inv = 1.0f / float(hw);
                       for (int i = 0; i < c; ++i) {
                           const float g = self.grad[i] * inv;
                           float* plane = xn->grad.data() + size_t(i) * hw;
                           for (int j = 0; j < hw; ++j) plane[j] += g;
                       }
                   });
}

Tensor reshape(const Tensor& x, std::vector<int> shape) {
    if (shape_numel(shape) != x.numel())
        throw std::invalid_argument("reshape: element count mismatch");
    std::vector<float> out(x.data().begin(), x.data().end());
    return make_op(std::move(shape), std::move(out), {x},
                   [xn = x.node()](Node& self) {
                       if (!xn->needs_grad) return;
                       xn->ensure_grad();
                       for (size_t i = 0; i < self.grad.size(); ++i)
                           xn->grad[i] += self.grad[i];
                   });
}

Tensor sum(const Tensor& x) {
    double acc = 0.0;
    for (float v : x.data()) acc += v;
    return make_op({1}, {float(acc)}, {x},
                   [xn = x.node()](Node& self) {
                       if (!xn->needs_grad) return;
                       xn->ensure_grad();
                       const float g = self.grad[0];
                       for (auto& gv : xn->grad) gv += g;
                   });
}

Tensor mean(const Tensor& x) {
    double acc = 0.0;
    for (float v : x.data()) acc += v;
    const float inv = 1.0f / float(x.numel());
    return make_op({1}, {float(acc / double(x.numel()))}, {x},
                   [inv, xn = x.node()](Node& self) {
                       if (!xn->needs_grad) return;
                       xn->ensure_grad();
                       const float g = self.grad[0] * inv;
                       for (auto& gv : xn->grad) gv += g;
                   });
}

Tensor mse_loss(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "mse_loss");
    double acc = 0.0;
    for (size_t i = 0; i < a.data().size(); ++i) {
        const double d = double(a.data()[i]) - double(b.data()[i]);
        acc += d * d;
    }
    const float inv = 1.0f / float(a.numel());
    return make_op({1}, {float(acc / double(a.numel()))}, {a, b},
                   [inv, an = a.node(), bn = b.node()](Node& self) {
                       const float g = self.grad[0] * 2.0f * inv;
                       if (an->needs_grad) {
                           an->ensure_grad();
                           for (size_t i = 0; i < an->value.size(); ++i)
                               an->grad[i] += g * (an->value[i] - bn->value[i]);
                       }
                       if (bn->needs_grad) {
                           bn->ensure_grad();
                           for (size_t i = 0; i < bn->value.size(); ++i)
                               bn->grad[i] -= g * (an->value[i] - bn->value[i]);
                       }
                   });
}

Tensor bce_with_logits(const Tensor& logits, const std::vector<uint8_t>& targets) {
    if (logits.shape().size() != 1 || size_t(logits.numel()) != targets.size())
        throw std::invalid_argument("bce_with_logits: logits and targets must have equal length");
    double acc = 0.0;
    for (size_t i = 0; i < targets.size(); ++i) {
        const double z = logits.data()[i];
        const double t = targets[i] ? 1.0 : 0.0;
        // max(z,0) - z*t + log(1+exp(-|z|))
        acc += std::max(z, 0.0) - z * t + std::log1p(std::exp(-std::abs(z)));
    }
    const float inv = 1.0f / float(targets.size());
    return make_op({1}, {float(acc / double(targets.size()))}, {logits},
                   [inv, targets, ln = logits.node()](Node& self) {
                       if (!ln->needs_grad) return;
                       ln->ensure_grad();
                       const float g = self.grad[0] * inv;
                       for (size_t i = 0; i < targets.size(); ++i) {
                           const float s = 1.0f / (1.0f + std::exp(-ln->value[i]));
                           ln->grad[i] += g * (s - (targets[i] ? 1.0f : 0.0f));
                       }
                   });
}

// ---- backward sweep ---------------------------------------------------------

void backward(const Tensor& loss) {
    if (!loss.defined() || loss.numel() != 1)
        throw std::invalid_argument("backward: loss must be a scalar tensor");
    Node* root = loss.node().get();
    if (!root->needs_grad) return; // constant loss; nothing reachable to populate

    // iterative post-order DFS over needs_grad nodes
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, size_t>> stack;
    stack.emplace_back(root, 0);
    visited.insert(root);
    while (!stack.empty()) {
        auto& [node, idx] = stack.back();
        if (idx < node->parents.size()) {
            Node* p = node->parents[idx++].get();
            if (p->needs_grad && !visited.count(p)) {
                visited.insert(p);
                stack.emplace_back(p, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    root->ensure_grad();
    root->grad[0] += 1.0f;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->backprop && !n->grad.empty()) n->backprop(*n);
    }
}

} // namespace wmlab::nn
