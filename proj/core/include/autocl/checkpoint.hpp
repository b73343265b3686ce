#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "autocl/encoder.hpp"
#include "autocl/tensor.hpp"

namespace autocl {

struct NamedTensor {
  std::string name;
  Tensor value;
};

// Layout: 8-byte magic "AUTOCLCK", u64 little-endian header length, UTF-8 JSON
// header {kind, meta, arrays: [{name, shape, offset}]}, then the arrays as
// little-endian f64 at the listed byte offsets (relative to the data block).
void write_container(const std::filesystem::path& path, const std::string& kind, const nlohmann::json& meta,
                     const std::vector<NamedTensor>& arrays);

struct Container {
  std::string kind;
  nlohmann::json meta;
  std::vector<NamedTensor> arrays;
};
Container read_container(const std::filesystem::path& path);

void save_encoder(const std::filesystem::path& path, const EncoderParams& params);
EncoderParams load_encoder(const std::filesystem::path& path);

}  // namespace autocl
