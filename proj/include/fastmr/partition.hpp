#pragma once

#include <cstdint>
#include <string_view>

#include "fastmr/codec.hpp"
#include "fastmr/common.hpp"

namespace fastmr {

inline constexpr uint64_t kFnvOffsetBasis = 0xcbf29ce484222325ull;
inline constexpr uint64_t kFnvPrime = 0x100000001b3ull;

// FNV-1a, 64-bit. Also used for result digests.
constexpr uint64_t fnv1a64(std::string_view bytes,
                           uint64_t h = kFnvOffsetBasis) {
  for (char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= kFnvPrime;
  }
  return h;
}

// Owner of a key: FNV-1a of the canonical key bytes, mod worker count.
inline WorkerId partition(std::string_view key_bytes, int num_workers) {
  if (num_workers < 1) throw ContractError("num_workers must be >= 1");
  return static_cast<WorkerId>(fnv1a64(key_bytes) %
                               static_cast<uint64_t>(num_workers));
}

template <class K>
WorkerId partition_key(const K& key, int num_workers) {
  return partition(encode_one(key), num_workers);
}

}  // namespace fastmr
