#include "vwapx/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace vwapx::nn {

namespace {

constexpr uint32_t kMagic = 0x58505756; // "VWPX" little-endian
constexpr uint32_t kVersion = 1;
constexpr uint8_t kKindTensor = 0;
constexpr uint8_t kKindBlob = 1;

template <typename T>
void write_pod(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw std::runtime_error("checkpoint: truncated file");
    return v;
}

void write_string(std::ostream& os, const std::string& s) {
    write_pod<uint32_t>(os, static_cast<uint32_t>(s.size()));
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& is) {
    const uint32_t len = read_pod<uint32_t>(is);
    std::string s(len, '\0');
    is.read(s.data(), len);
    if (!is) throw std::runtime_error("checkpoint: truncated string");
    return s;
}

} // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("checkpoint: cannot open for write: " + path);
    write_pod(os, kMagic);
    write_pod(os, kVersion);
    write_pod<uint64_t>(os, ckpt.tensors.size() + ckpt.blobs.size());
    for (const auto& [name, t] : ckpt.tensors) {
        write_pod(os, kKindTensor);
        write_string(os, name);
        write_pod<int64_t>(os, t.rows());
        write_pod<int64_t>(os, t.cols());
        os.write(reinterpret_cast<const char*>(t.data()),
                 static_cast<std::streamsize>(t.size() * sizeof(double)));
    }
    for (const auto& [name, b] : ckpt.blobs) {
        write_pod(os, kKindBlob);
        write_string(os, name);
        write_pod<uint64_t>(os, b.size());
        os.write(b.data(), static_cast<std::streamsize>(b.size()));
    }
    if (!os) throw std::runtime_error("checkpoint: write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("checkpoint: cannot open: " + path);
    if (read_pod<uint32_t>(is) != kMagic) throw std::runtime_error("checkpoint: bad magic");
    const uint32_t version = read_pod<uint32_t>(is);
    if (version != kVersion)
        throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
    const uint64_t count = read_pod<uint64_t>(is);
    Checkpoint ckpt;
    for (uint64_t r = 0; r < count; ++r) {
        const uint8_t kind = read_pod<uint8_t>(is);
        const std::string name = read_string(is);
        if (kind == kKindTensor) {
            const int64_t rows = read_pod<int64_t>(is);
            const int64_t cols = read_pod<int64_t>(is);
            if (rows < 0 || cols < 0) throw std::runtime_error("checkpoint: bad tensor shape");
            Tensor t(rows, cols);
            is.read(reinterpret_cast<char*>(t.data()),
                    static_cast<std::streamsize>(t.size() * sizeof(double)));
            if (!is) throw std::runtime_error("checkpoint: truncated tensor " + name);
            ckpt.tensors.emplace(name, std::move(t));
        } else if (kind == kKindBlob) {
            const uint64_t len = read_pod<uint64_t>(is);
            std::string b(len, '\0');
            is.read(b.data(), static_cast<std::streamsize>(len));
            if (!is) throw std::runtime_error("checkpoint: truncated blob " + name);
            ckpt.blobs.emplace(name, std::move(b));
        } else {
            throw std::runtime_error("checkpoint: unknown record kind");
        }
    }
    return ckpt;
}

void store_to_checkpoint(const ParamStore& store, const std::string& prefix, Checkpoint& ckpt) {
    for (const auto& [name, e] : store.entries) {
        ckpt.tensors[prefix + name] = e.value;
        ckpt.tensors[prefix + "adam_m/" + name] = e.m;
        ckpt.tensors[prefix + "adam_v/" + name] = e.v;
    }
    ckpt.put_scalar(prefix + "adam_step", static_cast<double>(store.adam_step_count));
}

void store_from_checkpoint(ParamStore& store, const std::string& prefix, const Checkpoint& ckpt) {
    for (auto& [name, e] : store.entries) {
        e.value = ckpt.tensors.at(prefix + name);
        e.m = ckpt.tensors.at(prefix + "adam_m/" + name);
        e.v = ckpt.tensors.at(prefix + "adam_v/" + name);
        e.grad = Tensor(e.value.rows(), e.value.cols(), 0.0);
    }
    store.adam_step_count = static_cast<int64_t>(ckpt.scalar(prefix + "adam_step"));
}

} // namespace vwapx::nn
