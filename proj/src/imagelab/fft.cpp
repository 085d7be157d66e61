#include "wmlab/image.hpp"

#include <cmath>
#include <stdexcept>

namespace wmlab::img {

namespace {

int next_pow2(int n) {
    int p = 1;
    while (p < n) p <<= 1;
    return p;
}

// In-place iterative radix-2 FFT on a length-n (power of two) line.
void fft1(std::complex<double>* a, int n, bool inverse) {
    for (int i = 1, j = 0; i < n; ++i) {
        int bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (int len = 2; len <= n; len <<= 1) {
        const double ang = (inverse ? 2.0 : -2.0) * M_PI / len;
        const std::complex<double> wl(std::cos(ang), std::sin(ang));
        for (int i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (int j = 0; j < len / 2; ++j) {
                const auto u = a[i + j];
                const auto v = a[i + j + len / 2] * w;
                a[i + j] = u + v;
                a[i + j + len / 2] = u - v;
                w *= wl;
            }
        }
    }
    if (inverse)
        for (int i = 0; i < n; ++i) a[i] /= double(n);
}

void fft2_inplace(ComplexPlane& p, bool inverse) {
    std::vector<std::complex<double>> line(size_t(std::max(p.height, p.width)));
    for (int y = 0; y < p.height; ++y) fft1(&p.v[size_t(y) * p.width], p.width, inverse);
    for (int x = 0; x < p.width; ++x) {
        for (int y = 0; y < p.height; ++y) line[size_t(y)] = p.at(y, x);
        fft1(line.data(), p.height, inverse);
        for (int y = 0; y < p.height; ++y) p.at(y, x) = line[size_t(y)];
    }
}

} // namespace

ComplexPlane fft2(const std::vector<double>& plane, int height, int width) {
    if (height <= 0 || width <= 0 || plane.size() != size_t(height) * width)
        throw std::invalid_argument("fft2: plane size mismatch");
    ComplexPlane p;
    p.height = next_pow2(height);
    p.width = next_pow2(width);
    p.v.assign(size_t(p.height) * p.width, {0.0, 0.0});
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) p.at(y, x) = plane[size_t(y) * width + x];
    fft2_inplace(p, false);
    return p;
}

std::vector<double> ifft2(const ComplexPlane& spectrum, int height, int width) {
    if (height > spectrum.height || width > spectrum.width)
        throw std::invalid_argument("ifft2: requested size exceeds spectrum size");
    ComplexPlane p = spectrum;
    fft2_inplace(p, true);
    std::vector<double> out(size_t(height) * width);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) out[size_t(y) * width + x] = p.at(y, x).real();
    return out;
}

} // namespace wmlab::img
