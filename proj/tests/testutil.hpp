#pragma once

#include "wmlab/image.hpp"
#include "wmlab/rng.hpp"
#include "wmlab/tensor.hpp"

#include <cmath>
#include <complex>
#include <functional>
#include <vector>

// Independent oracles used across the test suites. Everything here is written
// the dumb, obviously-correct way and stays decoupled from the library paths
// it checks.
namespace testutil {

// Direct nested-loop convolution: input [Cin,H,W], kernel [Cout,Cin,k,k],
// zero padding.
inline std::vector<float> conv2d_oracle(const std::vector<float>& in, int cin, int h, int w,
                                        const std::vector<float>& ker, int cout, int k,
                                        int stride, int pad, int& oh, int& ow) {
    oh = (h + 2 * pad - k) / stride + 1;
    ow = (w + 2 * pad - k) / stride + 1;
    std::vector<float> out(size_t(cout) * oh * ow, 0.0f);
    for (int co = 0; co < cout; ++co)
        for (int yo = 0; yo < oh; ++yo)
            for (int xo = 0; xo < ow; ++xo) {
                float acc = 0.0f;
                for (int ci = 0; ci < cin; ++ci)
                    for (int ky = 0; ky < k; ++ky)
                        for (int kx = 0; kx < k; ++kx) {
                            const int yi = yo * stride + ky - pad;
                            const int xi = xo * stride + kx - pad;
                            if (yi < 0 || yi >= h || xi < 0 || xi >= w) continue;
                            acc += in[(size_t(ci) * h + yi) * w + xi] *
                                   ker[((size_t(co) * cin + ci) * k + ky) * k + kx];
                        }
                out[(size_t(co) * oh + yo) * ow + xo] = acc;
            }
    return out;
}

// Central finite differences of f with respect to the contents of `param`.
inline std::vector<double> finite_diff_grad(wmlab::nn::Tensor param,
                                            const std::function<double()>& f,
                                            double h = 1e-3) {
    std::vector<double> grad(size_t(param.numel()));
    auto data = param.data();
    for (size_t i = 0; i < grad.size(); ++i) {
        const float orig = data[i];
        data[i] = float(orig + h);
        const double fp = f();
        data[i] = float(orig - h);
        const double fm = f();
        data[i] = orig;
        grad[i] = (fp - fm) / (2.0 * h);
    }
    return grad;
}

// Double-precision re-implementation of the conv/leaky-relu stacks the
// gradient checks exercise. Finite differences through the float32 forward
// sit right at the rounding noise floor, so the oracle evaluates the same
// math in double instead.
struct DoubleConvNet {
    int in_channels = 0;
    int size = 0;                              // square spatial side
    std::vector<int> out_channels;             // per layer
    std::vector<std::vector<double>> weights;  // [L][out*in*3*3]
    std::vector<std::vector<double>> biases;   // [L][out]
    double leaky_slope = 0.01;

    // conv(3x3, stride 1, pad 1) + bias + leaky relu per layer, then mean(h^2)
    double mean_square_loss(const std::vector<double>& input) const {
        std::vector<double> h = input;
        int ch = in_channels;
        for (size_t l = 0; l < weights.size(); ++l) {
            const int oc = out_channels[l];
            std::vector<double> next(size_t(oc) * size * size, 0.0);
            for (int co = 0; co < oc; ++co)
                for (int y = 0; y < size; ++y)
                    for (int x = 0; x < size; ++x) {
                        double acc = biases[l][size_t(co)];
                        for (int ci = 0; ci < ch; ++ci)
                            for (int ky = 0; ky < 3; ++ky)
                                for (int kx = 0; kx < 3; ++kx) {
                                    const int yi = y + ky - 1, xi = x + kx - 1;
                                    if (yi < 0 || yi >= size || xi < 0 || xi >= size) continue;
                                    acc += h[(size_t(ci) * size + yi) * size + xi] *
                                           weights[l][((size_t(co) * ch + ci) * 3 + ky) * 3 + kx];
                                }
                        next[(size_t(co) * size + y) * size + x] =
                            acc > 0.0 ? acc : leaky_slope * acc;
                    }
            h = std::move(next);
            ch = oc;
        }
        double acc = 0.0;
        for (double v : h) acc += v * v;
        return acc / double(h.size());
    }
};

// FD in double through the oracle net, perturbing layer `layer`'s weights.
inline std::vector<double> finite_diff_grad_double(DoubleConvNet net, size_t layer,
                                                   const std::vector<double>& input,
                                                   double h = 1e-4) {
    std::vector<double> grad(net.weights[layer].size());
    for (size_t i = 0; i < grad.size(); ++i) {
        const double orig = net.weights[layer][i];
        net.weights[layer][i] = orig + h;
        const double fp = net.mean_square_loss(input);
        net.weights[layer][i] = orig - h;
        const double fm = net.mean_square_loss(input);
        net.weights[layer][i] = orig;
        grad[i] = (fp - fm) / (2.0 * h);
    }
    return grad;
}

inline bool grad_close(double analytic, double numeric, double rel_tol = 1e-3,
                       double abs_tol = 1e-5) {
    const double scale = std::max(std::abs(analytic), std::abs(numeric));
    return std::abs(analytic - numeric) <= std::max(rel_tol * scale, abs_tol);
}

// O(N^2) DFT of a real plane.
inline std::vector<std::complex<double>> dft2_oracle(const std::vector<double>& x, int h, int w) {
    std::vector<std::complex<double>> X(size_t(h) * w);
    for (int u = 0; u < h; ++u)
        for (int v = 0; v < w; ++v) {
            std::complex<double> acc{0.0, 0.0};
            for (int y = 0; y < h; ++y)
                for (int xx = 0; xx < w; ++xx) {
                    const double ang = -2.0 * M_PI * (double(u) * y / h + double(v) * xx / w);
                    acc += x[size_t(y) * w + xx] * std::complex<double>(std::cos(ang), std::sin(ang));
                }
            X[size_t(u) * w + v] = acc;
        }
    return X;
}

// Direct box-blur summation with half-sample mirrored borders (no kernel
// object); matches the library's documented border mode.
inline wmlab::img::Image box_blur_oracle(const wmlab::img::Image& im, int n) {
    wmlab::img::Image out(im.height, im.width, im.channels);
    const int c = n / 2;
    auto mirror = [](int v, int size) {
        if (v < 0) v = -v - 1;
        if (v >= size) v = 2 * size - 1 - v;
        return v;
    };
    for (int y = 0; y < im.height; ++y)
        for (int x = 0; x < im.width; ++x)
            for (int ch = 0; ch < im.channels; ++ch) {
                double acc = 0.0;
                for (int i = 0; i < n; ++i)
                    for (int j = 0; j < n; ++j)
                        acc += im.at(mirror(y + i - c, im.height), mirror(x + j - c, im.width),
                                     ch);
                out.at(y, x, ch) = float(acc / double(n * n));
            }
    out.clamp();
    return out;
}

inline double popcount_bit_accuracy(uint64_t a, uint64_t b, int len) {
    const uint64_t mask = len == 64 ? ~0ull : ((1ull << len) - 1);
    const int diff = __builtin_popcountll((a ^ b) & mask);
    return 1.0 - double(diff) / double(len);
}

inline wmlab::img::Image random_image(uint64_t seed, int h, int w, int c = 3) {
    wmlab::Rng rng(seed);
    wmlab::img::Image im(h, w, c);
    for (auto& v : im.pixels) v = float(rng.uniform01());
    return im;
}

} // namespace testutil
