#include "wmlab/image.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace wmlab::img {

double psnr(const Image& a, const Image& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("psnr: image dimensions differ");
    double mse = 0.0;
    for (size_t i = 0; i < a.pixels.size(); ++i) {
        const double d = double(a.pixels[i]) - double(b.pixels[i]);
        mse += d * d;
    }
    mse /= double(a.pixels.size());
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(1.0 / mse);
}

double ssim(const Image& a, const Image& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("ssim: image dimensions differ");
    constexpr int kWin = 8;
    constexpr int kStride = 4;
    constexpr double c1 = 0.01 * 0.01;
    constexpr double c2 = 0.03 * 0.03;
    if (a.height < kWin || a.width < kWin)
        throw std::invalid_argument("ssim: image smaller than the 8x8 window");

    const int h = a.height, w = a.width;
    std::vector<double> la(size_t(h) * w), lb(size_t(h) * w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            la[size_t(y) * w + x] = luma(a, y, x);
            lb[size_t(y) * w + x] = luma(b, y, x);
        }

    double total = 0.0;
    int windows = 0;
    for (int y0 = 0; y0 + kWin <= h; y0 += kStride) {
        for (int x0 = 0; x0 + kWin <= w; x0 += kStride) {
            double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
            for (int y = y0; y < y0 + kWin; ++y)
                for (int x = x0; x < x0 + kWin; ++x) {
                    const double va = la[size_t(y) * w + x];
                    const double vb = lb[size_t(y) * w + x];
                    sa += va;
                    sb += vb;
                    saa += va * va;
                    sbb += vb * vb;
                    sab += va * vb;
                }
            constexpr double n = double(kWin * kWin);
            const double mu_a = sa / n, mu_b = sb / n;
            const double var_a = saa / n - mu_a * mu_a;
            const double var_b = sbb / n - mu_b * mu_b;
            const double cov = sab / n - mu_a * mu_b;
            total += ((2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)) /
                     ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2));
            ++windows;
        }
    }
    return total / double(windows);
}

} // namespace wmlab::img
