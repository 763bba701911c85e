#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace dvforge {

// Deterministic greedy longest-match subword tokenizer. The vocabulary is a
// plain table of `token<TAB>id` lines, so a real model's vocabulary can be
// exported and dropped in. Bytes with no matching entry encode through an
// implicit byte fallback, which makes encode() total: decoding always
// reproduces the input byte-for-byte.
class Vocabulary {
public:
    static Vocabulary load(const std::filesystem::path& path);

    // 256 single-byte entries with id == byte value. The text side of the toy
    // model runs on this vocabulary plus BOS/EOS above it.
    static Vocabulary byte_level();

    std::vector<int> encode(std::string_view text) const;
    int token_len(std::string_view text) const;

    // Id of the first token of encode(text); the one-step target for a
    // vision label.
    int first_token(std::string_view text) const;

    std::string decode(std::span<const int> ids) const;

    std::optional<int> id_of(std::string_view token) const;
    std::size_t entry_count() const { return entries_.size(); }

    // Ids at and above this value are implicit single-byte fallback tokens:
    // byte b maps to byte_fallback_base() + b.
    int byte_fallback_base() const { return fallback_base_; }

    // Largest id any encode() output can contain, plus one.
    int id_bound() const { return fallback_base_ + 256; }

private:
    std::unordered_map<std::string, int> entries_;
    std::unordered_map<int, std::string> tokens_by_id_;
    std::size_t max_token_bytes_ = 1;
    int fallback_base_ = 0;
};

} // namespace dvforge
