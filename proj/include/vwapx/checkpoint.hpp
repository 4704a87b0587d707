#pragma once

#include <map>
#include <string>

#include "vwapx/optim.hpp"
#include "vwapx/tensor.hpp"

namespace vwapx::nn {

// Named-tensor container with a versioned binary header. Tensor payloads are
// raw doubles, so round-trips are bit-exact. Blobs carry opaque byte state
// (RNG, mode strings). Host-endian.
struct Checkpoint {
    std::map<std::string, Tensor> tensors;
    std::map<std::string, std::string> blobs;

    void put_scalar(const std::string& name, double v) { tensors[name] = Tensor::scalar(v); }
    double scalar(const std::string& name) const { return tensors.at(name).item(); }
    bool has_tensor(const std::string& name) const { return tensors.count(name) != 0; }
    bool has_blob(const std::string& name) const { return blobs.count(name) != 0; }
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

// Store round-trip: value + Adam moments + step counter under "<prefix>/...".
void store_to_checkpoint(const ParamStore& store, const std::string& prefix, Checkpoint& ckpt);
void store_from_checkpoint(ParamStore& store, const std::string& prefix, const Checkpoint& ckpt);

} // namespace vwapx::nn
