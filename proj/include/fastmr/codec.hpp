#pragma once

#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>
#include <vector>

#include "fastmr/common.hpp"

namespace fastmr {

// Canonical byte encodings. Every key/value type that crosses the wire
// provides a Codec specialization; encodings are deterministic and, for
// key types, injective. Built-in codecs:
//   std::string          -> the bytes themselves (UTF-8 for text)
//   int64/uint64         -> 8 bytes little-endian
//   double               -> IEEE-754 binary64, little-endian
//   std::vector<double>  -> u32 LE element count, then LE binary64 elements
template <class T>
struct Codec;

namespace detail {

inline void put_u32_le(std::string& out, uint32_t v) {
  char b[4];
  b[0] = static_cast<char>(v & 0xff);
  b[1] = static_cast<char>((v >> 8) & 0xff);
  b[2] = static_cast<char>((v >> 16) & 0xff);
  b[3] = static_cast<char>((v >> 24) & 0xff);
  out.append(b, 4);
}

inline void put_u64_le(std::string& out, uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.append(b, 8);
}

inline uint32_t get_u32_le(const char* p) {
  return static_cast<uint32_t>(static_cast<unsigned char>(p[0])) |
         static_cast<uint32_t>(static_cast<unsigned char>(p[1])) << 8 |
         static_cast<uint32_t>(static_cast<unsigned char>(p[2])) << 16 |
         static_cast<uint32_t>(static_cast<unsigned char>(p[3])) << 24;
}

inline uint64_t get_u64_le(const char* p) {
  uint64_t v = 0;
  for (int i = 7; i >= 0; --i)
    v = (v << 8) | static_cast<unsigned char>(p[i]);
  return v;
}

}  // namespace detail

template <>
struct Codec<std::string> {
  static void encode(const std::string& v, std::string& out) { out += v; }
  static std::string decode(std::string_view bytes) {
    return std::string(bytes);
  }
};

template <>
struct Codec<int64_t> {
  static void encode(const int64_t& v, std::string& out) {
    detail::put_u64_le(out, static_cast<uint64_t>(v));
  }
  static int64_t decode(std::string_view bytes) {
    if (bytes.size() != 8) throw MalformedFrameError("int64 needs 8 bytes");
    return static_cast<int64_t>(detail::get_u64_le(bytes.data()));
  }
};

template <>
struct Codec<uint64_t> {
  static void encode(const uint64_t& v, std::string& out) {
    detail::put_u64_le(out, v);
  }
  static uint64_t decode(std::string_view bytes) {
    if (bytes.size() != 8) throw MalformedFrameError("uint64 needs 8 bytes");
    return detail::get_u64_le(bytes.data());
  }
};

template <>
struct Codec<double> {
  static void encode(const double& v, std::string& out) {
    uint64_t bits;
    std::memcpy(&bits, &v, 8);
    detail::put_u64_le(out, bits);
  }
  static double decode(std::string_view bytes) {
    if (bytes.size() != 8) throw MalformedFrameError("double needs 8 bytes");
    uint64_t bits = detail::get_u64_le(bytes.data());
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
};

template <>
struct Codec<std::vector<double>> {
  static void encode(const std::vector<double>& v, std::string& out) {
    if (v.size() > 0xffffffffu) throw OversizeError("vector too long");
    detail::put_u32_le(out, static_cast<uint32_t>(v.size()));
    for (double x : v) Codec<double>::encode(x, out);
  }
  static std::vector<double> decode(std::string_view bytes) {
    if (bytes.size() < 4) throw MalformedFrameError("truncated vector");
    uint32_t n = detail::get_u32_le(bytes.data());
    if (bytes.size() != 4 + 8ull * n)
      throw MalformedFrameError("vector length mismatch");
    std::vector<double> v(n);
    for (uint32_t i = 0; i < n; ++i)
      v[i] = Codec<double>::decode(bytes.substr(4 + 8ull * i, 8));
    return v;
  }
};

template <class T>
std::string encode_one(const T& v) {
  std::string out;
  Codec<T>::encode(v, out);
  return out;
}

// Normative shuffle wire format:
//   [u32 LE key length][key bytes][u32 LE value length][value bytes]
inline void encode_kv(std::string_view key_bytes, std::string_view value_bytes,
                      std::string& out) {
  if (key_bytes.size() > 0xffffffffu)
    throw OversizeError("key encoding exceeds 2^32-1 bytes");
  if (value_bytes.size() > 0xffffffffu)
    throw OversizeError("value encoding exceeds 2^32-1 bytes");
  detail::put_u32_le(out, static_cast<uint32_t>(key_bytes.size()));
  out.append(key_bytes);
  detail::put_u32_le(out, static_cast<uint32_t>(value_bytes.size()));
  out.append(value_bytes);
}

inline std::string encode_kv(std::string_view key_bytes,
                             std::string_view value_bytes) {
  std::string out;
  encode_kv(key_bytes, value_bytes, out);
  return out;
}

struct DecodedKV {
  std::string_view key;
  std::string_view value;
  size_t consumed;  // bytes consumed from the offset
};

// Decodes one pair starting at `offset`. Trailing bytes are not an error;
// `consumed` communicates the frame boundary.
inline DecodedKV decode_kv(std::string_view buf, size_t offset = 0) {
  std::string_view rest = buf.substr(offset);
  if (rest.size() < 4) throw MalformedFrameError("truncated key length");
  uint32_t klen = detail::get_u32_le(rest.data());
  if (rest.size() < 4ull + klen + 4)
    throw MalformedFrameError("truncated key or value length");
  std::string_view key = rest.substr(4, klen);
  uint32_t vlen = detail::get_u32_le(rest.data() + 4 + klen);
  if (rest.size() < 8ull + klen + vlen)
    throw MalformedFrameError("truncated value");
  std::string_view value = rest.substr(8 + klen, vlen);
  return DecodedKV{key, value, 8ull + klen + vlen};
}

template <class K, class V>
void encode_pair(const K& k, const V& v, std::string& out) {
  encode_kv(encode_one(k), encode_one(v), out);
}

template <class K, class V>
size_t decode_pair(std::string_view buf, size_t offset, K& k, V& v) {
  DecodedKV d = decode_kv(buf, offset);
  k = Codec<K>::decode(d.key);
  v = Codec<V>::decode(d.value);
  return d.consumed;
}

}  // namespace fastmr
