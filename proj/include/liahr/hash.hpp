#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace liahr {

std::string sha256_hex(std::string_view data);
std::string sha1_hex(std::string_view data);
/// Same digest `git hash-object` prints for a blob with these bytes.
std::string git_blob_sha1(std::string_view data);

/// 64-bit FNV-1a; stable across platforms, used for stream ids.
constexpr std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace liahr
