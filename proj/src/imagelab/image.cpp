#include "wmlab/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace wmlab::img {

Image::Image(int h, int w, int c) : height(h), width(w), channels(c) {
    if (h <= 0 || w <= 0 || (c != 1 && c != 3))
        throw std::invalid_argument("image: dimensions must be positive, channels 1 or 3");
    pixels.assign(size_t(h) * w * c, 0.0f);
}

void Image::clamp() {
    for (auto& v : pixels) v = std::clamp(v, 0.0f, 1.0f);
}

namespace {

std::vector<uint8_t> read_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("image: cannot open file: " + path);
    return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

void write_file(const std::string& path, const std::vector<uint8_t>& bytes) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("image: cannot open file for writing: " + path);
    os.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
    if (!os) throw std::runtime_error("image: write failed: " + path);
}

bool has_suffix(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() &&
           std::equal(suffix.rbegin(), suffix.rend(), s.rbegin(),
                      [](char a, char b) { return std::tolower(a) == std::tolower(b); });
}

// PNM token reader: skips whitespace and '#' comments.
struct PnmReader {
    const std::vector<uint8_t>& bytes;
    size_t pos = 0;

    int next_int(const char* field) {
        skip();
        if (pos >= bytes.size())
            throw std::runtime_error(std::string("ppm: missing ") + field);
        int v = 0;
        bool any = false;
        while (pos < bytes.size() && std::isdigit(bytes[pos])) {
            v = v * 10 + (bytes[pos++] - '0');
            any = true;
        }
        if (!any) throw std::runtime_error(std::string("ppm: malformed ") + field);
        return v;
    }

    void skip() {
        while (pos < bytes.size()) {
            if (std::isspace(bytes[pos])) {
                ++pos;
            } else if (bytes[pos] == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
            } else {
                break;
            }
        }
    }
};

uint8_t quantize(float v) {
    return uint8_t(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
}

} // namespace

Image decode_ppm(const std::vector<uint8_t>& bytes) {
    if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '6')
        throw std::runtime_error("ppm: magic is not P6");
    PnmReader r{bytes, 2};
    const int w = r.next_int("width");
    const int h = r.next_int("height");
    const int maxval = r.next_int("maxval");
    if (maxval != 255)
        throw std::runtime_error("ppm: maxval " + std::to_string(maxval) + " unsupported (need 255)");
    ++r.pos; // exactly one whitespace byte before the raster
    const size_t need = size_t(w) * h * 3;
    if (bytes.size() - r.pos < need) throw std::runtime_error("ppm: truncated raster");
    Image im(h, w, 3);
    for (size_t i = 0; i < need; ++i) im.pixels[i] = float(bytes[r.pos + i]) / 255.0f;
    return im;
}

std::vector<uint8_t> encode_ppm(const Image& image) {
    if (image.channels != 3) throw std::invalid_argument("ppm: P6 requires 3 channels");
    std::string header = "P6\n" + std::to_string(image.width) + " " +
                         std::to_string(image.height) + "\n255\n";
    std::vector<uint8_t> out(header.begin(), header.end());
    out.reserve(out.size() + image.pixels.size());
    for (float v : image.pixels) out.push_back(quantize(v));
    return out;
}

Image load_image(const std::string& path) {
    const auto bytes = read_file(path);
    if (bytes.size() >= 8 && bytes[0] == 0x89 && bytes[1] == 'P' && bytes[2] == 'N')
        return decode_png(bytes);
    if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '6')
        return decode_ppm(bytes);
    throw std::runtime_error("image: unrecognized format (magic bytes): " + path);
}

void save_image(const Image& image, const std::string& path) {
    if (image.pixels.empty()) throw std::invalid_argument("image: empty image");
    if (has_suffix(path, ".ppm")) {
        write_file(path, encode_ppm(image));
    } else if (has_suffix(path, ".png")) {
        write_file(path, encode_png(image));
    } else {
        throw std::invalid_argument("image: unsupported extension (want .png or .ppm): " + path);
    }
}

void save_edge_map_pgm(const EdgeMap& map, const std::string& path) {
    std::string header = "P5\n" + std::to_string(map.width) + " " +
                         std::to_string(map.height) + "\n255\n";
    std::vector<uint8_t> out(header.begin(), header.end());
    out.reserve(out.size() + map.mask.size());
    for (uint8_t m : map.mask) out.push_back(m ? 255 : 0);
    write_file(path, out);
}

float luma(const Image& im, int y, int x) {
    if (im.channels == 1) return im.at(y, x, 0);
    return 0.299f * im.at(y, x, 0) + 0.587f * im.at(y, x, 1) + 0.114f * im.at(y, x, 2);
}

} // namespace wmlab::img
