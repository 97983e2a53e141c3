#pragma once

#include <cstdint>
#include <json.hpp>
#include <string>

#include "planoforge/denoiser.hpp"

namespace planoforge {

// Self-describing container: magic, version, flags, architecture JSON,
// little-endian tensor payloads (float32, or int8 plus a float32 scale per
// tensor), trailing CRC-32 over everything before it.
struct CheckpointInfo {
    std::uint32_t version = 0;
    bool quantized = false;
    DenoiserConfig arch;
    std::uint64_t file_bytes = 0;
};

void save_checkpoint(const DenoiserModel& model, const std::string& path, bool int8 = false);
DenoiserModel load_checkpoint(const std::string& path, CheckpointInfo* info = nullptr);

// Symmetric per-tensor weight quantization: scale = max|w|/127 (1.0 for
// all-zero tensors), stored beside the int8 payload.
struct QuantizationReport {
    std::uint64_t full_bytes = 0;
    std::uint64_t quant_bytes = 0;
    double size_ratio = 0.0;
    double max_abs_error = 0.0;  // worst |w - dequant(w)| over all weights

    nlohmann::json to_json() const;
};

QuantizationReport quantize_checkpoint(const DenoiserModel& model, const std::string& fp32_path,
                                       const std::string& int8_path);

}  // namespace planoforge
