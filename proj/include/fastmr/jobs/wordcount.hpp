#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "fastmr/engine.hpp"

namespace fastmr::jobs {

// Token rule: runs of ASCII alphanumerics, ASCII letters lowercased,
// everything else a separator. Locale-independent and bit-reproducible.
inline std::vector<std::string> tokenize(std::string_view line) {
  std::vector<std::string> tokens;
  std::string cur;
  for (char c : line) {
    if ((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9')) {
      cur.push_back(c);
    } else if (c >= 'A' && c <= 'Z') {
      cur.push_back(static_cast<char>(c - 'A' + 'a'));
    } else if (!cur.empty()) {
      tokens.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

inline bool valid_utf8(std::string_view s) {
  size_t i = 0;
  while (i < s.size()) {
    unsigned char c = static_cast<unsigned char>(s[i]);
    int extra;
    unsigned cp_min;
    if (c < 0x80) {
      ++i;
      continue;
    } else if ((c & 0xE0) == 0xC0) {
      extra = 1;
      cp_min = 0x80;
    } else if ((c & 0xF0) == 0xE0) {
      extra = 2;
      cp_min = 0x800;
    } else if ((c & 0xF8) == 0xF0) {
      extra = 3;
      cp_min = 0x10000;
    } else {
      return false;
    }
    if (i + extra >= s.size()) return false;
    unsigned cp = c & (0x3F >> extra);
    for (int j = 1; j <= extra; ++j) {
      unsigned char cc = static_cast<unsigned char>(s[i + j]);
      if ((cc & 0xC0) != 0x80) return false;
      cp = (cp << 6) | (cc & 0x3F);
    }
    if (cp < cp_min || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF))
      return false;
    i += 1 + extra;
  }
  return true;
}

inline DistHashMap<std::string, int64_t> wordcount(
    const DistVector<std::string>& lines, JobMode mode,
    const EngineOptions& opts = {}, PhaseStats* stats = nullptr) {
  auto mapper = [](const std::string& line, auto emit) {
    if (!valid_utf8(line)) throw MalformedFrameError("line is not valid UTF-8");
    for (auto& tok : tokenize(line)) emit(tok, int64_t{1});
  };
  if (mode == JobMode::eager) {
    return map_reduce_eager<std::string, int64_t>(
        lines, mapper, [](int64_t a, int64_t b) { return a + b; }, opts,
        stats);
  }
  return map_reduce_delayed<std::string, int64_t>(
      lines, mapper,
      [](const std::string&, const std::vector<int64_t>& vs) {
        int64_t s = 0;
        for (int64_t v : vs) s += v;
        return s;
      },
      opts, stats);
}

}  // namespace fastmr::jobs
