#include "wmlab/image.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace wmlab::img {

namespace {

inline int reflect_clamp(int v, int n) { return std::clamp(v, 0, n - 1); } // replicate

// Half-sample mirror: ..., x[1], x[0] | x[0], x[1], ..., x[n-1] | x[n-1], ...
// Agrees with replicate one pixel out; further out it keeps the border
// invertible by the mirror-extended Wiener inverse.
inline int mirror_index(int v, int n) {
    if (v < 0) v = -v - 1;
    if (v >= n) v = 2 * n - 1 - v;
    return std::clamp(v, 0, n - 1);
}

// Largest possible response of one 3x3 Sobel axis on values in [0,1].
constexpr float kSobelAxisMax = 4.0f;

} // namespace

EdgeMap sobel_edges(const Image& image, float threshold) {
    if (!(threshold > 0.0f && threshold <= 1.0f))
        throw std::invalid_argument("sobel_edges: threshold must be in (0,1]");
    const int h = image.height, w = image.width;
    std::vector<float> lum(size_t(h) * w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) lum[size_t(y) * w + x] = luma(image, y, x);

    EdgeMap map;
    map.height = h;
    map.width = w;
    map.mask.assign(size_t(h) * w, 0);
    const float norm = 1.0f / (kSobelAxisMax * float(M_SQRT2));
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            auto at = [&](int yy, int xx) {
                return lum[size_t(reflect_clamp(yy, h)) * w + reflect_clamp(xx, w)];
            };
            const float gx = (at(y - 1, x + 1) + 2.0f * at(y, x + 1) + at(y + 1, x + 1)) -
                             (at(y - 1, x - 1) + 2.0f * at(y, x - 1) + at(y + 1, x - 1));
            const float gy = (at(y + 1, x - 1) + 2.0f * at(y + 1, x) + at(y + 1, x + 1)) -
                             (at(y - 1, x - 1) + 2.0f * at(y - 1, x) + at(y - 1, x + 1));
            const float mag = std::sqrt(gx * gx + gy * gy) * norm;
            if (mag >= threshold) map.mask[size_t(y) * w + x] = 1;
        }
    }
    return map;
}

BlurKernel box_kernel(int n) {
    if (n < 1 || n % 2 == 0)
        throw std::invalid_argument("box_kernel: size must be odd and positive, got " +
                                    std::to_string(n));
    BlurKernel k;
    k.n = n;
    k.weights.assign(size_t(n) * n, 1.0f / float(n * n));
    return k;
}

Image convolve(const Image& image, const BlurKernel& kernel) {
    const int n = kernel.n, c = kernel.n / 2;
    if (n > std::min(image.height, image.width))
        throw std::invalid_argument("convolve: kernel larger than image");
    Image out(image.height, image.width, image.channels);
    for (int y = 0; y < image.height; ++y) {
        for (int x = 0; x < image.width; ++x) {
            for (int ch = 0; ch < image.channels; ++ch) {
                float acc = 0.0f;
                for (int i = 0; i < n; ++i) {
                    const int yy = mirror_index(y + i - c, image.height);
                    for (int j = 0; j < n; ++j) {
                        const int xx = mirror_index(x + j - c, image.width);
                        acc += image.at(yy, xx, ch) * kernel.at(i, j);
                    }
                }
                out.at(y, x, ch) = std::clamp(acc, 0.0f, 1.0f);
            }
        }
    }
    return out;
}

Image wiener_deconvolve(const Image& blurred, const BlurKernel& kernel, double snr) {
    if (!(snr > 0.0)) throw std::invalid_argument("wiener_deconvolve: snr must be positive");
    const int h = blurred.height, w = blurred.width;
    const int n = kernel.n, c = kernel.n / 2;

    // Mirror-extend to 2h x 2w so the convolve() border model becomes exactly
    // circular on the extended plane (power-of-two sides make the FFT grid
    // match; other sizes wrap approximately at the outer seam).
    const int ph = 2 * h, pw = 2 * w;
    std::vector<double> kplane(size_t(ph) * pw, 0.0);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const int y = ((i - c) % ph + ph) % ph;
            const int x = ((j - c) % pw + pw) % pw;
            kplane[size_t(y) * pw + x] += kernel.at(i, j);
        }
    const ComplexPlane kf = fft2(kplane, ph, pw);

    Image out(h, w, blurred.channels);
    std::vector<double> chan(size_t(ph) * pw, 0.0);
    const double reg = 1.0 / snr;
    for (int ch = 0; ch < blurred.channels; ++ch) {
        for (int y = 0; y < ph; ++y) {
            const int sy = y < h ? y : 2 * h - 1 - y;
            for (int x = 0; x < pw; ++x) {
                const int sx = x < w ? x : 2 * w - 1 - x;
                chan[size_t(y) * pw + x] = blurred.at(sy, sx, ch);
            }
        }
        ComplexPlane bf = fft2(chan, ph, pw);
        for (size_t i = 0; i < bf.v.size(); ++i) {
            const auto k = kf.v[i];
            bf.v[i] = std::conj(k) * bf.v[i] / (std::norm(k) + reg);
        }
        const auto rec = ifft2(bf, ph, pw);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                out.at(y, x, ch) = std::clamp(float(rec[size_t(y) * pw + x]), 0.0f, 1.0f);
    }
    return out;
}

Image resize_bilinear(const Image& image, int out_height, int out_width) {
    if (out_height < 1 || out_width < 1)
        throw std::invalid_argument("resize_bilinear: output size must be positive");
    Image out(out_height, out_width, image.channels);
    const float sy = float(image.height) / float(out_height);
    const float sx = float(image.width) / float(out_width);
    for (int y = 0; y < out_height; ++y) {
        const float fy = (float(y) + 0.5f) * sy - 0.5f;
        const int y0 = reflect_clamp(int(std::floor(fy)), image.height);
        const int y1 = reflect_clamp(y0 + 1, image.height);
        const float wy = std::clamp(fy - std::floor(fy), 0.0f, 1.0f);
        for (int x = 0; x < out_width; ++x) {
            const float fx = (float(x) + 0.5f) * sx - 0.5f;
            const int x0 = reflect_clamp(int(std::floor(fx)), image.width);
            const int x1 = reflect_clamp(x0 + 1, image.width);
            const float wx = std::clamp(fx - std::floor(fx), 0.0f, 1.0f);
            for (int ch = 0; ch < image.channels; ++ch) {
                const float top = image.at(y0, x0, ch) * (1.0f - wx) + image.at(y0, x1, ch) * wx;
                const float bot = image.at(y1, x0, ch) * (1.0f - wx) + image.at(y1, x1, ch) * wx;
                out.at(y, x, ch) = std::clamp(top * (1.0f - wy) + bot * wy, 0.0f, 1.0f);
            }
        }
    }
    return out;
}

Image sharpen(const Image& image, float amount) {
    const Image soft = convolve(image, box_kernel(3));
    Image out(image.height, image.width, image.channels);
    for (size_t i = 0; i < out.pixels.size(); ++i) {
        const float v = image.pixels[i] + amount * (image.pixels[i] - soft.pixels[i]);
        out.pixels[i] = std::clamp(v, 0.0f, 1.0f);
    }
    return out;
}

} // namespace wmlab::img
