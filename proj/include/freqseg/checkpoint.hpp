#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "freqseg/network.hpp"

namespace freqseg::checkpoint {

/// Layout (all integers little-endian u32):
///   "M3FSEG1" + version byte 1
///   config length, config text (format_model_config)
///   entry count, then per entry: name length, name, rank (4), 4 dims,
///     float32 payload
///   CRC-32 over the concatenated payload bytes
/// Entries hold every parameter followed by batch-norm running statistics
/// (`<layer>.running_mean`, `<layer>.running_var`, shape 1x1x1xC).
inline constexpr char kMagic[7] = {'M', '3', 'F', 'S', 'E', 'G', '1'};
inline constexpr std::uint8_t kVersion = 1;

std::vector<std::uint8_t> serialize(net::Model& model);
/// Throws IntegrityError on framing or checksum problems.
net::Model deserialize(const std::vector<std::uint8_t>& bytes);

void save(const std::string& path, net::Model& model);
net::Model load(const std::string& path);

}  // namespace freqseg::checkpoint
