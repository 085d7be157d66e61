#include "wmlab/watermark.hpp"

#include "wmlab/rng.hpp"

#include <json.hpp>

#include <fstream>
#include <stdexcept>

namespace wmlab::wm {

Message random_message(int length, uint64_t seed) {
    if (length < 1) throw std::invalid_argument("random_message: length must be >= 1");
    Rng rng(mix64(seed ^ fnv1a64("message")));
    Message m;
    m.bits.reserve(size_t(length));
    for (int i = 0; i < length; ++i) m.bits.push_back(rng.bit() ? 1 : 0);
    return m;
}

Message complement(const Message& m) {
    Message out;
    out.bits.reserve(m.bits.size());
    for (uint8_t b : m.bits) out.bits.push_back(b ? 0 : 1);
    return out;
}

double bit_accuracy(const Message& a, const Message& b) {
    if (a.size() != b.size() || a.size() == 0)
        throw std::invalid_argument("bit_accuracy: messages must have equal non-zero length");
    size_t diff = 0;
    for (size_t i = 0; i < a.size(); ++i)
        if (a.bits[i] != b.bits[i]) ++diff;
    return 1.0 - double(diff) / double(a.size());
}

Message load_message(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("message: cannot open " + path);
    std::string line;
    std::getline(is, line);
    Message m;
    for (char c : line) {
        if (c == '0') m.bits.push_back(0);
        else if (c == '1') m.bits.push_back(1);
        else if (c == '\r' || c == ' ') continue;
        else throw std::runtime_error(std::string("message: invalid character '") + c + "'");
    }
    if (m.bits.empty()) throw std::runtime_error("message: empty file " + path);
    return m;
}

void save_message(const Message& m, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("message: cannot write " + path);
    for (uint8_t b : m.bits) os << (b ? '1' : '0');
    os << "\n";
}

bool is_watermarked_acc(double acc, const VerificationPolicy& policy) {
    return acc >= policy.tau_high || acc <= policy.tau_low;
}

std::string verdict_json(const Verdict& v) {
    nlohmann::json j{{"acc", v.acc}, {"verdict", v.watermarked ? "watermarked" : "unwatermarked"}};
    return j.dump();
}

} // namespace wmlab::wm
