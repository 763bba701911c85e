#include "dvforge/tokenizer.hpp"

#include "dvforge/util.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>

namespace dvforge {

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ValidationError("vocabulary file not found: " + path.string());
    }

    Vocabulary v;
    std::string line;
    int line_no = 0;
    int max_id = -1;
    std::unordered_map<int, std::string> seen_ids;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        auto where = [&] { return path.string() + ":" + std::to_string(line_no); };
        std::size_t tab = line.find('\t');
        if (tab == std::string::npos || tab == 0 || tab + 1 >= line.size()) {
            throw ValidationError("vocabulary parse error at " + where() +
                                  ": expected token<TAB>id");
        }
        std::string token = line.substr(0, tab);
        std::string id_text = line.substr(tab + 1);
        int id = 0;
        try {
            std::size_t used = 0;
            id = std::stoi(id_text, &used);
            if (used != id_text.size()) {
                throw std::invalid_argument(id_text);
            }
        } catch (const std::exception&) {
            throw ValidationError("vocabulary parse error at " + where() + ": bad id '" +
                                  id_text + "'");
        }
        if (id < 0) {
            throw ValidationError("vocabulary parse error at " + where() + ": negative id");
        }
        if (auto it = seen_ids.find(id); it != seen_ids.end()) {
            throw ValidationError("vocabulary parse error at " + where() + ": duplicate id " +
                                  std::to_string(id));
        }
        if (v.entries_.count(token) != 0) {
            throw ValidationError("vocabulary parse error at " + where() + ": duplicate token '" +
                                  token + "'");
        }
        seen_ids.emplace(id, token);
        v.entries_.emplace(token, id);
        v.tokens_by_id_.emplace(id, token);
        v.max_token_bytes_ = std::max(v.max_token_bytes_, token.size());
        max_id = std::max(max_id, id);
    }
    if (v.entries_.empty()) {
        throw ValidationError("vocabulary file is empty: " + path.string());
    }
    v.fallback_base_ = max_id + 1;
    return v;
}

Vocabulary Vocabulary::byte_level() {
    Vocabulary v;
    for (int b = 0; b < 256; ++b) {
        std::string token(1, static_cast<char>(b));
        v.entries_.emplace(token, b);
        v.tokens_by_id_.emplace(b, token);
    }
    v.max_token_bytes_ = 1;
    v.fallback_base_ = 256;
    return v;
}

std::vector<int> Vocabulary::encode(std::string_view text) const {
    if (text.empty()) {
        throw std::invalid_argument("encode: empty input");
    }
    std::vector<int> out;
    std::size_t pos = 0;
    std::string probe;
    while (pos < text.size()) {
        std::size_t longest = std::min(max_token_bytes_, text.size() - pos);
        bool matched = false;
        for (std::size_t len = longest; len >= 1; --len) {
            probe.assign(text.substr(pos, len));
            auto it = entries_.find(probe);
            if (it != entries_.end()) {
                out.push_back(it->second);
                pos += len;
                matched = true;
                break;
            }
        }
        if (!matched) {
            out.push_back(fallback_base_ + static_cast<unsigned char>(text[pos]));
            pos += 1;
        }
    }
    return out;
}

int Vocabulary::token_len(std::string_view text) const {
    return static_cast<int>(encode(text).size());
}

int Vocabulary::first_token(std::string_view text) const {
    return encode(text).front();
}

std::string Vocabulary::decode(std::span<const int> ids) const {
    std::string out;
    for (int id : ids) {
        if (auto it = tokens_by_id_.find(id); it != tokens_by_id_.end()) {
            out += it->second;
        } else if (id >= fallback_base_ && id < fallback_base_ + 256) {
            out += static_cast<char>(id - fallback_base_);
        } else {
            throw std::invalid_argument("decode: unknown id " + std::to_string(id));
        }
    }
    return out;
}

std::optional<int> Vocabulary::id_of(std::string_view token) const {
    auto it = entries_.find(std::string(token));
    if (it == entries_.end()) {
        return std::nullopt;
    }
    return it->second;
}

} // namespace dvforge
