#include "wmlab/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

static_assert(std::endian::native == std::endian::little,
              "checkpoint container assumes a little-endian host");

namespace wmlab::nn {

namespace {

constexpr char kMagic[4] = {'M', 'F', 'C', 'K'};
constexpr uint32_t kVersion = 1;

void write_u32(std::ostream& os, uint32_t v) {
    os.write(reinterpret_cast<const char*>(&v), 4);
}

uint32_t read_u32(std::istream& is, const char* field) {
    uint32_t v = 0;
    if (!is.read(reinterpret_cast<char*>(&v), 4))
        throw std::runtime_error(std::string("checkpoint: truncated while reading ") + field);
    return v;
}

} // namespace

void save_checkpoint(const std::string& path, const std::vector<NamedTensor>& tensors) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("checkpoint: cannot open for writing: " + path);
    os.write(kMagic, 4);
    write_u32(os, kVersion);
    write_u32(os, uint32_t(tensors.size()));
    for (const auto& nt : tensors) {
        write_u32(os, uint32_t(nt.name.size()));
        os.write(nt.name.data(), std::streamsize(nt.name.size()));
        const auto& shape = nt.tensor.shape();
        write_u32(os, uint32_t(shape.size()));
        for (int d : shape) write_u32(os, uint32_t(d));
        auto data = nt.tensor.data();
        os.write(reinterpret_cast<const char*>(data.data()),
                 std::streamsize(data.size() * sizeof(float)));
    }
    if (!os) throw std::runtime_error("checkpoint: write failed: " + path);
}

std::vector<NamedTensor> load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("checkpoint: cannot open: " + path);
    char magic[4];
    if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error("checkpoint: bad magic in " + path);
    const uint32_t version = read_u32(is, "version");
    if (version != kVersion)
        throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
    const uint32_t count = read_u32(is, "tensor count");
    std::vector<NamedTensor> out;
    out.reserve(count);
    for (uint32_t t = 0; t < count; ++t) {
        const uint32_t name_len = read_u32(is, "name length");
        std::string name(name_len, '\0');
        if (!is.read(name.data(), name_len))
            throw std::runtime_error("checkpoint: truncated tensor name");
        const uint32_t rank = read_u32(is, "rank");
        std::vector<int> shape(rank);
        int64_t numel = 1;
        for (uint32_t i = 0; i < rank; ++i) {
            shape[i] = int(read_u32(is, "dim"));
            numel *= shape[i];
        }
        std::vector<float> data(size_t(numel), 0.0f);
        if (!is.read(reinterpret_cast<char*>(data.data()),
                     std::streamsize(data.size() * sizeof(float))))
            throw std::runtime_error("checkpoint: truncated tensor data for " + name);
        out.push_back({std::move(name), Tensor::from_data(std::move(shape), std::move(data))});
    }
    return out;
}

const Tensor* find_tensor(const std::vector<NamedTensor>& tensors, const std::string& name) {
    for (const auto& nt : tensors)
        if (nt.name == name) return &nt.tensor;
    return nullptr;
}

bool checkpoint_files_equal(const std::string& a, const std::string& b) {
    std::ifstream fa(a, std::ios::binary), fb(b, std::ios::binary);
    if (!fa || !fb) throw std::runtime_error("checkpoint: cannot open files for comparison");
    std::vector<char> ba((std::istreambuf_iterator<char>(fa)), std::istreambuf_iterator<char>());
    std::vector<char> bb((std::istreambuf_iterator<char>(fb)), std::istreambuf_iterator<char>());
    return ba == bb;
}

} // namespace wmlab::nn
