#pragma once

#include <map>
#include <string>

#include "gridface/tensor.hpp"

namespace gridface {

// Binary checkpoint: magic "GFCK", version, config digest + canonical
// config text, training progress, RNG state, and a named tensor table with
// 64-bit little-endian values. save/load round-trips bitwise.
struct Checkpoint {
    static constexpr uint32_t kVersion = 1;

    std::string config_text;
    uint64_t rng_state = 0;
    uint64_t epoch = 0;
    double lr = 0.0;
    double best_val = 0.0;
    uint32_t plateau = 0;
    std::map<std::string, TensorPtr> tensors;

    // Deep-copies a store's tensors under its current names.
    void put_store(const ParameterStore& store);

    // Copies all tensors with the given prefix into the store (prefix kept).
    // Returns the number of tensors transferred.
    int fill_store(const std::string& prefix, ParameterStore& store) const;
};

void save_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace gridface
