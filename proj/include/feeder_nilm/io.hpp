#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace feeder_nilm {

/// Whole-file helpers; both throw IoError naming the path.
std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);

/// 64-bit FNV-1a, used for artifact fingerprints and content checks.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ull);
std::string hex64(std::uint64_t value);

}  // namespace feeder_nilm
