#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>

namespace dvforge {

// Raised for bad user input: flags, config keys, missing paths, malformed
// records. The CLI maps it to exit code 1; anything else exits 2.
struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::uint64_t fnv1a64(std::string_view bytes);
std::uint64_t fnv1a64(const void* data, std::size_t n, std::uint64_t seed = 1469598103934665603ULL);
std::uint64_t hash_file(const std::filesystem::path& path);
std::string to_hex(std::uint64_t v);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view content);

std::string trim(std::string_view s);
std::string lowercase(std::string_view s);

} // namespace dvforge
