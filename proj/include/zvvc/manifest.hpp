#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace zvvc {

// Version stamped into every artifact written by the pipeline.
inline constexpr std::string_view kToolVersion = "0.1.0";

// FNV-1a 64-bit hash of a byte string. Stable across platforms; used to
// fingerprint input files so downstream stages can refuse stale artifacts.
std::uint64_t fnv1a64(std::string_view bytes);

// fnv1a64 rendered as 16 lowercase hex digits.
std::string hash_hex(std::string_view bytes);

// hash_hex of a file's raw contents.
std::string hash_file(const std::string& path);

} // namespace zvvc
