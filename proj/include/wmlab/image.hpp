#pragma once

#include <complex>
#include <cstdint>
#include <string>
#include <vector>

namespace wmlab::img {

// Raster in [0,1], row-major, channel-interleaved. Every public operation
// clamps its output back into [0,1].
struct Image {
    int height = 0;
    int width = 0;
    int channels = 0; // 1 or 3
    std::vector<float> pixels;

    Image() = default;
    Image(int h, int w, int c);

    float& at(int y, int x, int c) { return pixels[(size_t(y) * width + x) * channels + c]; }
    float at(int y, int x, int c) const { return pixels[(size_t(y) * width + x) * channels + c]; }
    size_t pixel_count() const { return size_t(height) * width; }
    bool same_shape(const Image& o) const {
        return height == o.height && width == o.width && channels == o.channels;
    }
    void clamp();
};

struct EdgeMap {
    int height = 0;
    int width = 0;
    std::vector<uint8_t> mask; // 0 or 1, row-major

    uint8_t at(int y, int x) const { return mask[size_t(y) * width + x]; }
};

struct BlurKernel {
    int n = 1;                  // odd side length
    std::vector<float> weights; // n*n, sums to 1

    float at(int i, int j) const { return weights[size_t(i) * n + j]; }
};

// ---- file I/O --------------------------------------------------------------
// Formats: 8-bit PNG (grayscale or RGB) and binary PPM (P6). Values map to
// [0,1] by /255 on load; save quantizes with round(v*255).

Image load_image(const std::string& path);
void save_image(const Image& image, const std::string& path);

Image decode_ppm(const std::vector<uint8_t>& bytes);
std::vector<uint8_t> encode_ppm(const Image& image);
Image decode_png(const std::vector<uint8_t>& bytes);
std::vector<uint8_t> encode_png(const Image& image);

// zlib stream (RFC 1950/1951) decoder used by the PNG reader; handles stored,
// fixed and dynamic Huffman blocks.
std::vector<uint8_t> zlib_decompress(const std::vector<uint8_t>& stream);

void save_edge_map_pgm(const EdgeMap& map, const std::string& path);

// ---- classical processing --------------------------------------------------

// Luminance from interleaved RGB (identity for single-channel).
float luma(const Image& im, int y, int x);

// Binary mask where the normalized Sobel gradient magnitude reaches
// `threshold` in (0,1]. Multi-channel input is reduced to luminance first.
EdgeMap sobel_edges(const Image& image, float threshold);

BlurKernel box_kernel(int n); // all weights 1/n^2; n odd

// Spatial convolution centered at n/2 with replicate padding, per channel.
Image convolve(const Image& image, const BlurKernel& kernel);

// Frequency-domain inverse filter: conj(K)*B / (|K|^2 + 1/snr) per channel.
// The kernel must be the one used to blur.
Image wiener_deconvolve(const Image& blurred, const BlurKernel& kernel, double snr);

Image resize_bilinear(const Image& image, int out_height, int out_width);

// Unsharp mask: clamp(image + amount * (image - box3(image))).
Image sharpen(const Image& image, float amount);

// ---- quality metrics --------------------------------------------------------

// 10*log10(1/MSE) in dB over all channels; +infinity for identical inputs.
double psnr(const Image& a, const Image& b);

// Mean SSIM on luminance, 8x8 windows, stride 4, C1=0.01^2, C2=0.03^2.
double ssim(const Image& a, const Image& b);

// ---- FFT --------------------------------------------------------------------
// Planes are zero-padded up to the next power of two in each dimension; the
// spectrum is returned at the padded size and ifft2 crops back.

struct ComplexPlane {
    int height = 0;
    int width = 0;
    std::vector<std::complex<double>> v;

    std::complex<double>& at(int y, int x) { return v[size_t(y) * width + x]; }
    const std::complex<double>& at(int y, int x) const { return v[size_t(y) * width + x]; }
};

ComplexPlane fft2(const std::vector<double>& plane, int height, int width);
std::vector<double> ifft2(const ComplexPlane& spectrum, int height, int width);

} // namespace wmlab::img
