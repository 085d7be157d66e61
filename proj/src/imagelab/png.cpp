#include "wmlab/image.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <stdexcept>
#include <string>

// Self-contained 8-bit PNG codec. The encoder emits stored (uncompressed)
// deflate blocks; the decoder handles stored, fixed and dynamic Huffman
// blocks, so files from other writers load too.

namespace wmlab::img {

namespace {

// ---- CRC-32 / Adler-32 ------------------------------------------------------

uint32_t crc32(const uint8_t* data, size_t len, uint32_t crc = 0) {
    static const auto table = [] {
        std::array<uint32_t, 256> t{};
        for (uint32_t i = 0; i < 256; ++i) {
            uint32_t c = i;
            for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
            t[i] = c;
        }
        return t;
    }();
    crc = ~crc;
    for (size_t i = 0; i < len; ++i) crc = table[(crc ^ data[i]) & 0xFF] ^ (crc >> 8);
    return ~crc;
}

uint32_t adler32(const uint8_t* data, size_t len) {
    uint32_t a = 1, b = 0;
    for (size_t i = 0; i < len; ++i) {
        a = (a + data[i]) % 65521;
        b = (b + a) % 65521;
    }
    return (b << 16) | a;
}

// ---- inflate ----------------------------------------------------------------

struct BitReader {
    const uint8_t* data;
    size_t size;
    size_t pos = 0;
    uint32_t bitbuf = 0;
    int bitcnt = 0;

    int bits(int need) {
        while (bitcnt < need) {
            if (pos >= size) throw std::runtime_error("png: deflate stream truncated");
            bitbuf |= uint32_t(data[pos++]) << bitcnt;
            bitcnt += 8;
        }
        const int v = int(bitbuf & ((1u << need) - 1));
        bitbuf >>= need;
        bitcnt -= need;
        return v;
    }

    void align_byte() {
        bitbuf = 0;
        bitcnt = 0;
    }
};

struct Huffman {
    std::array<uint16_t, 16> count{}; // codes per length
    std::vector<uint16_t> symbol;     // symbols ordered by (length, value)

    void build(const uint8_t* lengths, int n) {
        count.fill(0);
        for (int i = 0; i < n; ++i) ++count[lengths[i]];
        count[0] = 0;
        std::array<uint16_t, 16> offs{};
        for (int len = 1; len < 16; ++len) offs[len] = uint16_t(offs[len - 1] + count[len - 1]);
        symbol.assign(size_t(n), 0);
        for (int i = 0; i < n; ++i)
            if (lengths[i]) symbol[offs[lengths[i]]++] = uint16_t(i);
    }

    int decode(BitReader& br) const {
        int code = 0, first = 0, index = 0;
        for (int len = 1; len < 16; ++len) {
            code |= br.bits(1);
            const int cnt = count[len];
            if (code - first < cnt) return symbol[size_t(index + (code - first))];
            index += cnt;
            first = (first + cnt) << 1;
            code <<= 1;
        }
        throw std::runtime_error("png: invalid huffman code");
    }
};

constexpr uint16_t kLenBase[29] = {3,  4,  5,  6,  7,  8,  9,  10, 11,  13,  15,  17,  19, 23, 27,
                                   31, 35, 43, 51, 59, 67, 83, 99, 115, 131, 163, 195, 227, 258};
constexpr uint8_t kLenExtra[29] = {0, 0, 0, 0, 0, 0, 0, 0, 1, 1, 1, 1, 2, 2, 2,
                                   2, 3, 3, 3, 3, 4, 4, 4, 4, 5, 5, 5, 5, 0};
constexpr uint16_t kDistBase[30] = {1,    2,    3,    4,    5,    7,     9,     13,   17,   25,
                                    33,   49,   65,   97,   129,  193,   257,   385,  513,  769,
                                    1025, 1537, 2049, 3073, 4097, 6145,  8193,  12289, 16385, 24577};
constexpr uint8_t kDistExtra[30] = {0, 0, 0, 0, 1, 1, 2, 2,  3,  3,  4,  4,  5,  5,  6,
                                    6, 7, 7, 8, 8, 9, 9, 10, 10, 11, 11, 12, 12, 13, 13};

void inflate_block(BitReader& br, const Huffman& lit, const Huffman& dist,
                   std::vector<uint8_t>& out) {
    for (;;) {
        const int sym = lit.decode(br);
        if (sym < 256) {
            out.push_back(uint8_t(sym));
        } else if (sym == 256) {
            return;
        } else {
            if (sym > 285) throw std::runtime_error("png: invalid length symbol");
            const int li = sym - 257;
            const int len = kLenBase[li] + br.bits(kLenExtra[li]);
            const int dsym = dist.decode(br);
            if (dsym > 29) throw std::runtime_error("png: invalid distance symbol");
            const size_t d = size_t(kDistBase[dsym]) + size_t(br.bits(kDistExtra[dsym]));
            if (d > out.size()) throw std::runtime_error("png: distance past window start");
            for (int i = 0; i < len; ++i) out.push_back(out[out.size() - d]);
        }
    }
}

std::vector<uint8_t> inflate(const uint8_t* data, size_t size) {
    BitReader br{data, size};
    std::vector<uint8_t> out;
    for (;;) {
        const int bfinal = br.bits(1);
        const int btype = br.bits(2);
        if (btype == 0) {
            br.align_byte();
            if (br.pos + 4 > br.size) throw std::runtime_error("png: truncated stored block");
            const int len = br.data[br.pos] | (br.data[br.pos + 1] << 8);
            const int nlen = br.data[br.pos + 2] | (br.data[br.pos + 3] << 8);
            if ((len ^ 0xFFFF) != nlen) throw std::runtime_error("png: stored block LEN/NLEN mismatch");
            br.pos += 4;
            if (br.pos + size_t(len) > br.size)
                throw std::runtime_error("png: truncated stored block data");
            out.insert(out.end(), br.data + br.pos, br.data + br.pos + len);
            br.pos += size_t(len);
        } else if (btype == 1) {
            static const auto fixed = [] {
                std::array<uint8_t, 288> ll{};
                for (int i = 0; i < 144; ++i) ll[i] = 8;
                for (int i = 144; i < 256; ++i) ll[i] = 9;
                for (int i = 256; i < 280; ++i) ll[i] = 7;
                for (int i = 280; i < 288; ++i) ll[i] = 8;
                std::array<uint8_t, 30> dl{};
                dl.fill(5);
                std::pair<Huffman, Huffman> h;
                h.first.build(ll.data(), 288);
                h.second.build(dl.data(), 30);
                return h;
            }();
            inflate_block(br, fixed.first, fixed.second, out);
        } else if (btype == 2) {
            const int hlit = br.bits(5) + 257;
            const int hdist = br.bits(5) + 1;
            const int hclen = br.bits(4) + 4;
            static constexpr uint8_t order[19] = {16, 17, 18, 0, 8,  7, 9,  6, 10, 5,
                                                  11, 4,  12, 3, 13, 2, 14, 1, 15};
            uint8_t cl_lengths[19] = {0};
            for (int i = 0; i < hclen; ++i) cl_lengths[order[i]] = uint8_t(br.bits(3));
            Huffman cl;
            cl.build(cl_lengths, 19);
            std::vector<uint8_t> lengths(size_t(hlit + hdist), 0);
            for (int i = 0; i < hlit + hdist;) {
                const int sym = cl.decode(br);
                if (sym < 16) {
                    lengths[size_t(i++)] = uint8_t(sym);
                } else if (sym == 16) {
                    if (i == 0) throw std::runtime_error("png: repeat with no previous length");
                    const int rep = 3 + br.bits(2);
                    for (int r = 0; r < rep; ++r, ++i) lengths[size_t(i)] = lengths[size_t(i) - 1];
                } else if (sym == 17) {
                    i += 3 + br.bits(3);
                } else {
                    i += 11 + br.bits(7);
                }
                if (i > hlit + hdist) throw std::runtime_error("png: code length overflow");
            }
            Huffman lit, dist;
            lit.build(lengths.data(), hlit);
            dist.build(lengths.data() + hlit, hdist);
            inflate_block(br, lit, dist, out);
        } else {
            throw std::runtime_error("png: reserved deflate block type");
        }
        if (bfinal) break;
    }
    return out;
}

// ---- zlib wrappers -----------------------------------------------------------

std::vector<uint8_t> zlib_decompress_raw(const uint8_t* data, size_t size) {
    if (size < 6) throw std::runtime_error("png: zlib stream too short");
    if ((data[0] & 0x0F) != 8) throw std::runtime_error("png: zlib compression method != deflate");
    if (data[1] & 0x20) throw std::runtime_error("png: zlib preset dictionary unsupported");
    if (((data[0] << 8) | data[1]) % 31 != 0) throw std::runtime_error("png: zlib header check failed");
    auto out = inflate(data + 2, size - 2);
    const uint8_t* tail = data + size - 4;
    const uint32_t expect = (uint32_t(tail[0]) << 24) | (uint32_t(tail[1]) << 16) |
                            (uint32_t(tail[2]) << 8) | uint32_t(tail[3]);
    if (adler32(out.data(), out.size()) != expect)
        throw std::runtime_error("png: zlib adler32 mismatch");
    return out;
}

// Stored deflate blocks wrapped in a zlib stream.
std::vector<uint8_t> zlib_compress_stored(const uint8_t* data, size_t size) {
    std::vector<uint8_t> out{0x78, 0x01};
    size_t pos = 0;
    do {
        const size_t chunk = std::min(size - pos, size_t(65535));
        const bool final = pos + chunk == size;
        out.push_back(final ? 1 : 0);
        out.push_back(uint8_t(chunk & 0xFF));
        out.push_back(uint8_t(chunk >> 8));
        out.push_back(uint8_t(~chunk & 0xFF));
        out.push_back(uint8_t((~chunk >> 8) & 0xFF));
        out.insert(out.end(), data + pos, data + pos + chunk);
        pos += chunk;
    } while (pos < size);
    const uint32_t ad = adler32(data, size);
    out.push_back(uint8_t(ad >> 24));
    out.push_back(uint8_t(ad >> 16));
    out.push_back(uint8_t(ad >> 8));
    out.push_back(uint8_t(ad));
    return out;
}

// ---- PNG container -----------------------------------------------------------

constexpr uint8_t kPngSig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1A, '\n'};

uint32_t be32(const uint8_t* p) {
    return (uint32_t(p[0]) << 24) | (uint32_t(p[1]) << 16) | (uint32_t(p[2]) << 8) | uint32_t(p[3]);
}

void push_be32(std::vector<uint8_t>& v, uint32_t x) {
    v.push_back(uint8_t(x >> 24));
    v.push_back(uint8_t(x >> 16));
    v.push_back(uint8_t(x >> 8));
    v.push_back(uint8_t(x));
}

void push_chunk(std::vector<uint8_t>& out, const char* type, const std::vector<uint8_t>& payload) {
    push_be32(out, uint32_t(payload.size()));
    const size_t start = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), payload.begin(), payload.end());
    push_be32(out, crc32(out.data() + start, out.size() - start));
}

int paeth(int a, int b, int c) {
    const int p = a + b - c;
    const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
    if (pa <= pb && pa <= pc) return a;
    if (pb <= pc) return b;
    return c;
}

} // namespace

std::vector<uint8_t> zlib_decompress(const std::vector<uint8_t>& stream) {
    return zlib_decompress_raw(stream.data(), stream.size());
}

Image decode_png(const std::vector<uint8_t>& bytes) {
    if (bytes.size() < 8 || std::memcmp(bytes.data(), kPngSig, 8) != 0)
        throw std::runtime_error("png: bad signature");
    size_t pos = 8;
    int width = 0, height = 0, channels = 0;
    bool have_ihdr = false;
    std::vector<uint8_t> idat;
    while (pos + 8 <= bytes.size()) {
        const uint32_t len = be32(&bytes[pos]);
        if (pos + 12 + len > bytes.size()) throw std::runtime_error("png: truncated chunk");
        const char* type = reinterpret_cast<const char*>(&bytes[pos + 4]);
        const uint8_t* payload = &bytes[pos + 8];
        const uint32_t expect_crc = be32(&bytes[pos + 8 + len]);
        if (crc32(&bytes[pos + 4], 4 + len) != expect_crc)
            throw std::runtime_error(std::string("png: crc mismatch in chunk ") +
                                     std::string(type, 4));
        if (std::memcmp(type, "IHDR", 4) == 0) {
            if (len != 13) throw std::runtime_error("png: IHDR length invalid");
            width = int(be32(payload));
            height = int(be32(payload + 4));
            const int bit_depth = payload[8];
            const int color_type = payload[9];
            const int interlace = payload[12];
            if (bit_depth != 8)
                throw std::runtime_error("png: bit depth " + std::to_string(bit_depth) +
                                         " unsupported (need 8)");
            if (color_type == 0) channels = 1;
            else if (color_type == 2) channels = 3;
            else
                throw std::runtime_error("png: color type " + std::to_string(color_type) +
                                         " unsupported (need grayscale 0 or RGB 2)");
            if (interlace != 0) throw std::runtime_error("png: interlaced images unsupported");
            have_ihdr = true;
        } else if (std::memcmp(type, "IDAT", 4) == 0) {
            idat.insert(idat.end(), payload, payload + len);
        } else if (std::memcmp(type, "IEND", 4) == 0) {
            break;
        } // ancillary chunks ignored
        pos += 12 + len;
    }
    if (!have_ihdr || width <= 0 || height <= 0) throw std::runtime_error("png: missing IHDR");
    if (idat.empty()) throw std::runtime_error("png: missing IDAT");

    const auto raw = zlib_decompress_raw(idat.data(), idat.size());
    const size_t stride = size_t(width) * channels;
    if (raw.size() != (stride + 1) * size_t(height))
        throw std::runtime_error("png: decompressed size mismatch");

    std::vector<uint8_t> scan(stride * size_t(height));
    const int bpp = channels;
    for (int y = 0; y < height; ++y) {
        const uint8_t filter = raw[size_t(y) * (stride + 1)];
        const uint8_t* src = &raw[size_t(y) * (stride + 1) + 1];
        uint8_t* dst = &scan[size_t(y) * stride];
        const uint8_t* up = y > 0 ? &scan[size_t(y - 1) * stride] : nullptr;
        for (size_t x = 0; x < stride; ++x) {
            const int a = x >= size_t(bpp) ? dst[x - bpp] : 0;
            const int b = up ? up[x] : 0;
            const int c = (up && x >= size_t(bpp)) ? up[x - bpp] : 0;
            int v = src[x];
            switch (filter) {
                case 0: break;
                case 1: v += a; break;
                case 2: v += b; break;
                case 3: v += (a + b) / 2; break;
                case 4: v += paeth(a, b, c); break;
                default: throw std::runtime_error("png: unknown filter type");
            }
            dst[x] = uint8_t(v);
        }
    }

    Image im(height, width, channels);
    for (size_t i = 0; i < scan.size(); ++i) im.pixels[i] = float(scan[i]) / 255.0f;
    return im;
}

std::vector<uint8_t> encode_png(const Image& image) {
    if (image.channels != 1 && image.channels != 3)
        throw std::invalid_argument("png: channels must be 1 or 3");
    const size_t stride = size_t(image.width) * image.channels;
    std::vector<uint8_t> raw((stride + 1) * size_t(image.height));
    for (int y = 0; y < image.height; ++y) {
        raw[size_t(y) * (stride + 1)] = 0; // filter: none
        uint8_t* dst = &raw[size_t(y) * (stride + 1) + 1];
        const float* src = &image.pixels[size_t(y) * stride];
        for (size_t x = 0; x < stride; ++x)
            dst[x] = uint8_t(std::lround(std::clamp(src[x], 0.0f, 1.0f) * 255.0f));
    }

    std::vector<uint8_t> out(kPngSig, kPngSig + 8);
    std::vector<uint8_t> ihdr;
    push_be32(ihdr, uint32_t(image.width));
    push_be32(ihdr, uint32_t(image.height));
    ihdr.push_back(8);                                   // bit depth
    ihdr.push_back(image.channels == 3 ? 2 : 0);         // color type
    ihdr.push_back(0);                                   // compression
    ihdr.push_back(0);                                   // filter
    ihdr.push_back(0);                                   // interlace
    push_chunk(out, "IHDR", ihdr);
    push_chunk(out, "IDAT", zlib_compress_stored(raw.data(), raw.size()));
    push_chunk(out, "IEND", {});
    return out;
}

} // namespace wmlab::img
