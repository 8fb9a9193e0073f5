#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace kappaforge {

// Lowercase hex SHA-256 digest of `data`.
std::string sha256_hex(std::string_view data);

// Small non-cryptographic 64-bit hash (FNV-1a), used for seed derivation.
uint64_t fnv1a64(std::string_view data);

// SplitMix64 step; used to derive independent per-task RNG seeds.
uint64_t splitmix64(uint64_t x);

} // namespace kappaforge
