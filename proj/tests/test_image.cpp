#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "testutil.hpp"
#include "wmlab/image.hpp"
#include "wmlab/rng.hpp"

#include <cmath>
#include <filesystem>

using namespace wmlab;
using img::Image;

namespace {
const std::filesystem::path kTmp = std::filesystem::temp_directory_path();
}

TEST_CASE("png round trip: quantization error at most 1/255") {
    for (int c : {1, 3}) {
        const Image im = c == 3 ? testutil::random_image(5, 13, 9, 3)
                                : testutil::random_image(6, 13, 9, 1);
        const auto path = (kTmp / ("wmlab_rt" + std::to_string(c) + ".png")).string();
        img::save_image(im, path);
        const Image back = img::load_image(path);
        REQUIRE(back.same_shape(im));
        float max_err = 0.0f;
        for (size_t i = 0; i < im.pixels.size(); ++i)
            max_err = std::max(max_err, std::abs(im.pixels[i] - back.pixels[i]));
        CHECK(max_err <= 1.0f / 255.0f + 1e-6f);
        std::filesystem::remove(path);
    }
}

TEST_CASE("ppm round trip and all-zero image exact") {
    Image zero(8, 8, 3);
    const auto path = (kTmp / "wmlab_zero.ppm").string();
    img::save_image(zero, path);
    const Image back = img::load_image(path);
    for (float v : back.pixels) CHECK(v == 0.0f);
    std::filesystem::remove(path);
}

TEST_CASE("hand-encoded P6 fixture decodes to expected pixels") {
    const std::string header = "P6\n2 1\n255\n";
    std::vector<uint8_t> bytes(header.begin(), header.end());
    const uint8_t raster[6] = {255, 0, 0, 0, 0, 255};
    bytes.insert(bytes.end(), raster, raster + 6);
    const Image im = img::decode_ppm(bytes);
    REQUIRE(im.width == 2);
    REQUIRE(im.height == 1);
    CHECK(im.at(0, 0, 0) == doctest::Approx(1.0f));
    CHECK(im.at(0, 0, 1) == doctest::Approx(0.0f));
    CHECK(im.at(0, 0, 2) == doctest::Approx(0.0f));
    CHECK(im.at(0, 1, 0) == doctest::Approx(0.0f));
    CHECK(im.at(0, 1, 2) == doctest::Approx(1.0f));
}

TEST_CASE("ppm with wrong maxval is rejected with the field named") {
    const std::string header = "P6\n2 1\n65535\n";
    std::vector<uint8_t> bytes(header.begin(), header.end());
    bytes.resize(bytes.size() + 12, 0);
    CHECK_THROWS_WITH_AS((void)img::decode_ppm(bytes),
                         doctest::Contains("maxval"), std::runtime_error);
}

// Frozen fixture written by an independent encoder (real zlib stream, filter
// types Sub/Up/None across rows).
TEST_CASE("foreign PNG with real deflate stream and filters decodes correctly") {
    const std::vector<uint8_t> png = {
        0x89, 0x50, 0x4E, 0x47, 0x0D, 0x0A, 0x1A, 0x0A, 0x00, 0x00, 0x00, 0x0D, 0x49, 0x48,
        0x44, 0x52, 0x00, 0x00, 0x00, 0x04, 0x00, 0x00, 0x00, 0x03, 0x08, 0x02, 0x00, 0x00,
        0x00, 0x3B, 0x96, 0x39, 0x91, 0x00, 0x00, 0x00, 0x2E, 0x49, 0x44, 0x41, 0x54, 0x78,
        0xDA, 0x63, 0xFC, 0xCF, 0xC0, 0xF0, 0x9F, 0x91, 0xE9, 0x0F, 0x0B, 0x87, 0x9E, 0x77,
        0x1E, 0x13, 0x03, 0x03, 0xC3, 0x29, 0x43, 0xF1, 0xAC, 0xF8, 0xA8, 0x1B, 0x1B, 0xDA,
        0x19, 0xB8, 0x44, 0xE4, 0x80, 0xE8, 0xC4, 0x89, 0x13, 0x8C, 0x4C, 0xCC, 0x00, 0xDE,
        0x80, 0x0B, 0x0E, 0x00, 0x4F, 0x6A, 0x2E, 0x00, 0x00, 0x00, 0x00, 0x49, 0x45, 0x4E,
        0x44, 0xAE, 0x42, 0x60, 0x82};
    const Image im = img::decode_png(png);
    REQUIRE(im.width == 4);
    REQUIRE(im.height == 3);
    REQUIRE(im.channels == 3);
    const uint8_t expect[3][4][3] = {
        {{255, 0, 0}, {254, 1, 2}, {250, 5, 10}, {40, 80, 120}},
        {{255, 0, 0}, {200, 50, 25}, {100, 100, 100}, {0, 0, 255}},
        {{10, 20, 30}, {10, 20, 30}, {200, 200, 200}, {1, 2, 3}}};
    for (int y = 0; y < 3; ++y)
        for (int x = 0; x < 4; ++x)
            for (int c = 0; c < 3; ++c)
                CHECK(im.at(y, x, c) == doctest::Approx(expect[y][x][c] / 255.0f).epsilon(1e-6));
}

TEST_CASE("zlib inflate handles dynamic huffman blocks") {
    // zlib-compressed 900 bytes of repeated text (LZ77 matches + fixed codes)
    const std::vector<uint8_t> zfixed = {
        0x78, 0xDA, 0x2B, 0xC9, 0x48, 0x55, 0x28, 0x2C, 0xCD, 0x4C, 0xCE, 0x56, 0x48,
        0x2A, 0xCA, 0x2F, 0xCF, 0x53, 0x48, 0xCB, 0xAF, 0x50, 0xC8, 0x2A, 0xCD, 0x2D,
        0x28, 0x56, 0xC8, 0x2F, 0x4B, 0x2D, 0x52, 0x28, 0x01, 0x4A, 0xE7, 0x24, 0x56,
        0x55, 0x2A, 0xA4, 0xE4, 0xA7, 0xEB, 0x81, 0x79, 0xA3, 0x8A, 0x47, 0x15, 0x8F,
        0x2A, 0xA6, 0xAA, 0x62, 0x00, 0xE5, 0x21, 0x45, 0x9C};
    const auto out = img::zlib_decompress(zfixed);
    REQUIRE(out.size() == 900);
    const std::string head(out.begin(), out.begin() + 45);
    CHECK(head == "the quick brown fox jumps over the lazy dog. ");
}

namespace {
uint32_t test_crc32(const uint8_t* data, size_t len) {
    uint32_t crc = ~0u;
    for (size_t i = 0; i < len; ++i) {
        crc ^= data[i];
        for (int k = 0; k < 8; ++k) crc = (crc & 1) ? 0xEDB88320u ^ (crc >> 1) : crc >> 1;
    }
    return ~crc;
}

// patch one IHDR byte and refresh the chunk CRC
std::vector<uint8_t> patched_ihdr(std::vector<uint8_t> png, size_t offset, uint8_t value) {
    png[offset] = value;
    const uint32_t crc = test_crc32(&png[12], 4 + 13); // type + payload
    for (int i = 0; i < 4; ++i) png[29 + size_t(i)] = uint8_t(crc >> (24 - 8 * i));
    return png;
}
} // namespace

TEST_CASE("png rejects unsupported variants with named fields") {
    Image im = testutil::random_image(1, 4, 4, 3);
    const auto bytes = img::encode_png(im);
    CHECK_THROWS_WITH_AS((void)img::decode_png(patched_ihdr(bytes, 24, 16)),
                         doctest::Contains("bit depth"), std::runtime_error);
    CHECK_THROWS_WITH_AS((void)img::decode_png(patched_ihdr(bytes, 25, 3)),
                         doctest::Contains("color type"), std::runtime_error);
    CHECK_THROWS_WITH_AS((void)img::decode_png(patched_ihdr(bytes, 28, 1)),
                         doctest::Contains("interlace"), std::runtime_error);
}

TEST_CASE("sobel: constant image has an empty mask") {
    Image im(16, 16, 3);
    for (auto& v : im.pixels) v = 0.42f;
    const auto mask = img::sobel_edges(im, 0.1f);
    for (uint8_t m : mask.mask) CHECK(m == 0);
}

TEST_CASE("sobel: vertical step marks exactly the adjacent columns") {
    Image im(12, 12, 1);
    for (int y = 0; y < 12; ++y)
        for (int x = 0; x < 12; ++x) im.at(y, x, 0) = x < 6 ? 0.0f : 1.0f;
    const auto mask = img::sobel_edges(im, 0.5f);
    for (int y = 0; y < 12; ++y)
        for (int x = 0; x < 12; ++x) {
            const bool adjacent = (x == 5 || x == 6);
            CHECK(mask.at(y, x) == (adjacent ? 1 : 0));
        }
}

TEST_CASE("sobel: threshold above the peak gradient gives an empty mask") {
    Image im = testutil::random_image(7, 16, 16, 3);
    const auto strong = img::sobel_edges(im, 1.0f);
    // max normalized magnitude of a step is 1/sqrt(2) ~ 0.707 for interleaved
    // random content it stays below 1
    size_t ones = 0;
    for (uint8_t m : strong.mask) ones += m;
    CHECK(ones == 0);
}

TEST_CASE("sobel mask is binary and threshold range is enforced") {
    Image im = testutil::random_image(8, 10, 10, 3);
    const auto mask = img::sobel_edges(im, 0.25f);
    for (uint8_t m : mask.mask) CHECK((m == 0 || m == 1));
    CHECK_THROWS_AS((void)img::sobel_edges(im, 0.0f), std::invalid_argument);
    CHECK_THROWS_AS((void)img::sobel_edges(im, 1.5f), std::invalid_argument);
}

TEST_CASE("box kernel values and validation") {
    const auto k1 = img::box_kernel(1);
    REQUIRE(k1.weights.size() == 1);
    CHECK(k1.weights[0] == doctest::Approx(1.0f));
    const auto k3 = img::box_kernel(3);
    for (float w : k3.weights) CHECK(w == doctest::Approx(1.0f / 9.0f));
    for (int n : {1, 3, 5, 7, 9, 11, 13, 15}) {
        double total = 0.0;
        for (float w : img::box_kernel(n).weights) total += w;
        CHECK(total == doctest::Approx(1.0).epsilon(1e-6));
    }
    CHECK_THROWS_AS((void)img::box_kernel(2), std::invalid_argument);
    CHECK_THROWS_AS((void)img::box_kernel(0), std::invalid_argument);
    CHECK_THROWS_AS((void)img::box_kernel(-3), std::invalid_argument);
}

TEST_CASE("convolve: identity, constants, and center impulse") {
    Image im = testutil::random_image(9, 12, 12, 3);
    const Image id = img::convolve(im, img::box_kernel(1));
    for (size_t i = 0; i < im.pixels.size(); ++i) CHECK(id.pixels[i] == im.pixels[i]);

    Image flat(8, 8, 3);
    for (auto& v : flat.pixels) v = 0.37f;
    const Image still_flat = img::convolve(flat, img::box_kernel(5));
    for (float v : still_flat.pixels) CHECK(v == doctest::Approx(0.37f).epsilon(1e-6));

    Image impulse(3, 3, 1);
    impulse.at(1, 1, 0) = 1.0f;
    const Image blurred = img::convolve(impulse, img::box_kernel(3));
    CHECK(blurred.at(1, 1, 0) == doctest::Approx(1.0f / 9.0f).epsilon(1e-6));
}

TEST_CASE("convolve matches the direct summation oracle with replicate borders") {
    for (int n : {1, 3, 5}) {
        for (uint64_t seed = 0; seed < 4; ++seed) {
            const Image im = testutil::random_image(100 + seed, 16, 16, 3);
            const Image got = img::convolve(im, img::box_kernel(n));
            const Image want = testutil::box_blur_oracle(im, n);
            for (size_t i = 0; i < got.pixels.size(); ++i)
                CHECK(std::abs(got.pixels[i] - want.pixels[i]) < 1e-5f);
        }
    }
}

TEST_CASE("convolve rejects kernels larger than the image") {
    Image im = testutil::random_image(1, 8, 8, 3);
    CHECK_THROWS_AS((void)img::convolve(im, img::box_kernel(9)), std::invalid_argument);
}

TEST_CASE("box blur never widens the value range") {
    const Image im = testutil::random_image(11, 24, 24, 3);
    const Image blurred = img::convolve(im, img::box_kernel(5));
    for (int c = 0; c < 3; ++c) {
        float in_min = 1.0f, in_max = 0.0f, out_min = 1.0f, out_max = 0.0f;
        for (int y = 0; y < im.height; ++y)
            for (int x = 0; x < im.width; ++x) {
                in_min = std::min(in_min, im.at(y, x, c));
                in_max = std::max(in_max, im.at(y, x, c));
                out_min = std::min(out_min, blurred.at(y, x, c));
                out_max = std::max(out_max, blurred.at(y, x, c));
            }
        CHECK(out_min >= in_min - 1e-6f);
        CHECK(out_max <= in_max + 1e-6f);
    }
}

TEST_CASE("wiener: identity kernel returns the input") {
    const Image im = testutil::random_image(13, 32, 32, 3);
    const Image rec = img::wiener_deconvolve(im, img::box_kernel(1), 1e6);
    for (size_t i = 0; i < im.pixels.size(); ++i)
        CHECK(std::abs(rec.pixels[i] - im.pixels[i]) < 1e-4f);
}

TEST_CASE("wiener deblur gains at least 3 dB over the blurred image") {
    const Image im = testutil::random_image(17, 64, 64, 3);
    const auto k = img::box_kernel(5);
    const Image blurred = img::convolve(im, k);
    const Image rec = img::wiener_deconvolve(blurred, k, 1e3);
    const double gain = img::psnr(rec, im) - img::psnr(blurred, im);
    CHECK(gain >= 3.0);
}

TEST_CASE("wiener at high snr nearly inverts small box blurs") {
    // smooth toy images; white noise puts too much energy on the kernel's
    // spectral nulls, which no inverse can restore
    auto smooth_image = [](uint64_t seed) {
        Rng rng(seed);
        Image coarse(8, 8, 3);
        for (auto& v : coarse.pixels) v = float(rng.uniform01());
        return img::resize_bilinear(coarse, 64, 64);
    };
    for (int n : {1, 3, 5}) {
        for (uint64_t s = 0; s < 4; ++s) {
            const Image im = smooth_image(100 + s);
            const auto k = img::box_kernel(n);
            const Image rec = img::wiener_deconvolve(img::convolve(im, k), k, 1e6);
            CHECK(img::psnr(rec, im) >= 30.0);
        }
    }
}

TEST_CASE("wiener with snr near zero drives the output toward black") {
    const Image im = testutil::random_image(23, 32, 32, 3);
    const Image rec = img::wiener_deconvolve(im, img::box_kernel(3), 1e-9);
    double mean = 0.0;
    for (float v : rec.pixels) mean += v;
    CHECK(mean / double(rec.pixels.size()) < 1e-3);
}

TEST_CASE("psnr reference points and symmetry") {
    const Image a = testutil::random_image(29, 16, 16, 3);
    CHECK(std::isinf(img::psnr(a, a)));
    CHECK(img::ssim(a, a) == doctest::Approx(1.0));

    Image zeros(16, 16, 3), ones(16, 16, 3), half(16, 16, 3);
    for (auto& v : ones.pixels) v = 1.0f;
    for (auto& v : half.pixels) v = 0.5f;
    CHECK(img::psnr(zeros, ones) == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(img::psnr(zeros, half) == doctest::Approx(10.0 * std::log10(4.0)).epsilon(1e-6));

    const Image b = testutil::random_image(31, 16, 16, 3);
    CHECK(img::psnr(a, b) == doctest::Approx(img::psnr(b, a)));
    Image c(8, 8, 3);
    CHECK_THROWS_AS((void)img::psnr(a, c), std::invalid_argument);
}

TEST_CASE("fft: delta impulse has a flat spectrum") {
    std::vector<double> plane(16 * 16, 0.0);
    plane[0] = 1.0;
    const auto spec = img::fft2(plane, 16, 16);
    for (const auto& v : spec.v) CHECK(std::abs(std::abs(v) - 1.0) < 1e-9);
}

TEST_CASE("fft: constant plane concentrates at DC") {
    std::vector<double> plane(8 * 8, 1.0);
    const auto spec = img::fft2(plane, 8, 8);
    CHECK(std::abs(spec.at(0, 0)) == doctest::Approx(64.0));
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x)
            if (y || x) CHECK(std::abs(spec.at(y, x)) < 1e-9);
}

TEST_CASE("fft round trip and Parseval") {
    Rng rng(37);
    std::vector<double> plane(16 * 16);
    for (auto& v : plane) v = rng.uniform(-1, 1);
    const auto spec = img::fft2(plane, 16, 16);
    const auto back = img::ifft2(spec, 16, 16);
    double max_err = 0.0, spatial = 0.0, freq = 0.0;
    for (size_t i = 0; i < plane.size(); ++i) {
        max_err = std::max(max_err, std::abs(plane[i] - back[i]));
        spatial += plane[i] * plane[i];
    }
    for (const auto& v : spec.v) freq += std::norm(v);
    freq /= double(spec.v.size());
    CHECK(max_err < 1e-4);
    CHECK(std::abs(spatial - freq) / spatial < 1e-3);
}

TEST_CASE("fft matches the direct DFT oracle on 8x8") {
    Rng rng(41);
    std::vector<double> plane(8 * 8);
    for (auto& v : plane) v = rng.uniform(0, 1);
    const auto fast = img::fft2(plane, 8, 8);
    const auto slow = testutil::dft2_oracle(plane, 8, 8);
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x)
            CHECK(std::abs(fast.at(y, x) - slow[size_t(y) * 8 + x]) < 1e-9);
}

TEST_CASE("fft pads non-power-of-two planes and still round-trips") {
    Rng rng(43);
    std::vector<double> plane(6 * 10);
    for (auto& v : plane) v = rng.uniform(-1, 1);
    const auto spec = img::fft2(plane, 6, 10);
    CHECK(spec.height == 8);
    CHECK(spec.width == 16);
    const auto back = img::ifft2(spec, 6, 10);
    for (size_t i = 0; i < plane.size(); ++i) CHECK(std::abs(plane[i] - back[i]) < 1e-4);
}

TEST_CASE("edge map exports as P5") {
    Image im(8, 8, 1);
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x) im.at(y, x, 0) = x < 4 ? 0.0f : 1.0f;
    const auto mask = img::sobel_edges(im, 0.5f);
    const auto path = (kTmp / "wmlab_edges.pgm").string();
    img::save_edge_map_pgm(mask, path);
    std::ifstream is(path, std::ios::binary);
    std::string magic(2, '\0');
    is.read(magic.data(), 2);
    CHECK(magic == "P5");
    std::filesystem::remove(path);
}

TEST_CASE("resize and sharpen keep values in range") {
    const Image im = testutil::random_image(47, 20, 20, 3);
    const Image small = img::resize_bilinear(im, 8, 8);
    REQUIRE(small.height == 8);
    const Image big = img::resize_bilinear(small, 20, 20);
    REQUIRE(big.width == 20);
    const Image sharp = img::sharpen(big, 1.0f);
    for (float v : sharp.pixels) {
        CHECK(v >= 0.0f);
        CHECK(v <= 1.0f);
    }
}
