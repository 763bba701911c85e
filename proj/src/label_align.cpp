#include "dvforge/label_align.hpp"

#include "dvforge/util.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <stdexcept>

namespace dvforge {

std::string_view to_string(SampleSource s) {
    return s == SampleSource::image_to_label ? "image_to_label" : "label_to_image";
}

SampleSource sample_source_from(std::string_view s) {
    if (s == "image_to_label") {
        return SampleSource::image_to_label;
    }
    if (s == "label_to_image") {
        return SampleSource::label_to_image;
    }
    throw ValidationError("unknown sample source: " + std::string(s));
}

std::string_view to_string(WordOutcome o) {
    switch (o) {
    case WordOutcome::labeled: return "labeled";
    case WordOutcome::too_many_tokens: return "too_many_tokens";
    case WordOutcome::too_tall: return "too_tall";
    case WordOutcome::out_of_bounds: return "out_of_bounds";
    case WordOutcome::conflict: return "conflict";
    }
    return "unknown";
}

std::optional<DiscardReason> filter_word(const WordBox& box, int cell, const Vocabulary& vocab,
                                         std::string_view label_prefix) {
    std::string labeled_text = std::string(label_prefix) + box.text;
    if (vocab.token_len(labeled_text) > 3) {
        return DiscardReason::too_many_tokens;
    }
    if (box.height() > 3.0 * cell) {
        return DiscardReason::too_tall;
    }
    return std::nullopt;
}

AlignResult align_words(const std::vector<WordBox>& words, const PatchGrid& grid, int orig_h,
                        int orig_w, const Vocabulary& vocab, std::string_view label_prefix) {
    if (orig_h <= 0 || orig_w <= 0) {
        throw std::invalid_argument("align_words: original dims must be positive");
    }

    AlignResult result;
    result.audit.reserve(words.size());

    // token index -> words that landed there (input order preserved)
    std::map<int, std::vector<std::size_t>> by_token;

    for (std::size_t i = 0; i < words.size(); ++i) {
        const WordBox& word = words[i];
        if (word.text.empty() || !(word.x0 < word.x1) || !(word.y0 < word.y1)) {
            throw std::invalid_argument("align_words: malformed word box '" + word.text + "'");
        }
        if (word.x0 < 0.0 || word.y0 < 0.0 || word.x1 > orig_w || word.y1 > orig_h) {
            result.audit.emplace_back(word, WordOutcome::out_of_bounds);
            continue;
        }

        WordBox scaled = scale_box(word, {orig_h, orig_w}, {grid.height(), grid.width()});
        // Scaling arithmetic can overshoot the edge by a rounding hair.
        scaled.x0 = std::clamp(scaled.x0, 0.0, static_cast<double>(grid.width()));
        scaled.x1 = std::clamp(scaled.x1, 0.0, static_cast<double>(grid.width()));
        scaled.y0 = std::clamp(scaled.y0, 0.0, static_cast<double>(grid.height()));
        scaled.y1 = std::clamp(scaled.y1, 0.0, static_cast<double>(grid.height()));

        if (auto reason = filter_word(scaled, grid.cell, vocab, label_prefix)) {
            result.audit.emplace_back(word, *reason == DiscardReason::too_many_tokens
                                                ? WordOutcome::too_many_tokens
                                                : WordOutcome::too_tall);
            continue;
        }

        int token = token_index(grid, scaled.x1, scaled.y1);
        by_token[token].push_back(i);
        result.audit.emplace_back(word, WordOutcome::labeled); // provisional
    }

    for (const auto& [token, indices] : by_token) {
        if (indices.size() >= 2) {
            for (std::size_t i : indices) {
                result.audit[i].second = WordOutcome::conflict;
            }
            continue;
        }
        const WordBox& word = words[indices.front()];
        std::string labeled_text = std::string(label_prefix) + word.text;
        result.labels.push_back(VisionLabel{token, word.text, vocab.first_token(labeled_text)});
    }
    // by_token is ordered, so labels already come out sorted by token_index.
    return result;
}

CorpusStats compute_stats(const std::vector<LabeledSample>& samples, const Vocabulary& vocab) {
    CorpusStats stats;
    stats.samples = static_cast<long long>(samples.size());

    struct ImageAccum {
        long long tokens = 0;
        std::set<int> labeled;
    };
    std::map<std::string, ImageAccum> images;

    for (const LabeledSample& s : samples) {
        if (s.response.empty()) {
            throw std::invalid_argument("compute_stats: sample '" + s.sample_id +
                                        "' has empty response");
        }
        stats.text_labels += vocab.token_len(s.response);
        stats.vision_labels += static_cast<long long>(s.vision_labels.size());

        std::string key = s.image_id.empty() ? s.image_ref : s.image_id;
        ImageAccum& acc = images[key];
        acc.tokens = s.grid.token_count();
        for (const VisionLabel& label : s.vision_labels) {
            acc.labeled.insert(label.token_index);
        }
    }

    stats.images = static_cast<long long>(images.size());
    long long total_tokens = 0;
    long long labeled_tokens = 0;
    for (const auto& [key, acc] : images) {
        total_tokens += acc.tokens;
        labeled_tokens += static_cast<long long>(acc.labeled.size());
    }
    stats.vision_coverage =
        total_tokens > 0 ? static_cast<double>(labeled_tokens) / static_cast<double>(total_tokens)
                         : 0.0;
    return stats;
}

} // namespace dvforge
