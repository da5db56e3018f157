#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mitd/tensor.hpp"

namespace mitd {

/// On-disk layout (all integers little-endian):
///   "MITDMODL"  u32 version  u64 meta_len  meta bytes (JSON)
///   u64 count, then per tensor: u32 name_len, name, u32 rank, u64 dims[rank], f64 data[prod(dims)]
struct ModelFile {
    static constexpr std::uint32_t kVersion = 1;

    std::string metadata;
    std::vector<std::pair<std::string, Tensor>> tensors;

    const Tensor& find(const std::string& name) const;
};

std::string encode_model_file(const ModelFile& file);
ModelFile decode_model_file(const std::string& bytes);

void write_model_file(const std::filesystem::path& path, const ModelFile& file);
ModelFile read_model_file(const std::filesystem::path& path);

} // namespace mitd
