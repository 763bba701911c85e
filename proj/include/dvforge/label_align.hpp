#pragma once

#include "dvforge/patch_grid.hpp"
#include "dvforge/tokenizer.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace dvforge {

// Supervision unit for one visual token: the word under it and the id of the
// word's first subword token.
struct VisionLabel {
    int token_index = 0;
    std::string word;
    int first_token_id = 0;

    bool operator==(const VisionLabel&) const = default;
};

enum class SampleSource { image_to_label, label_to_image };

std::string_view to_string(SampleSource s);
SampleSource sample_source_from(std::string_view s);

// One training sample: an image (by reference), its grid, the text pair, and
// the vision labels for the image's visual tokens.
struct LabeledSample {
    std::string image_id;
    std::string sample_id;
    std::string image_ref;
    PatchGrid grid;
    std::string prompt;
    std::string response;
    std::vector<VisionLabel> vision_labels;
    SampleSource source = SampleSource::image_to_label;
};

// Why a word was dropped by the pre-alignment filters.
enum class DiscardReason { too_many_tokens, too_tall };

// Final per-word audit outcome of align_words.
enum class WordOutcome { labeled, too_many_tokens, too_tall, out_of_bounds, conflict };

std::string_view to_string(WordOutcome o);

// OCR-noise filters: a word is dropped when its tokenization length exceeds
// three (likely concatenation error) or its box height exceeds three cells.
// Returns the first matching reason, nullopt to keep. The box is expected in
// grid space; the caller scales before filtering.
std::optional<DiscardReason> filter_word(const WordBox& box, int cell, const Vocabulary& vocab,
                                         std::string_view label_prefix = {});

struct AlignResult {
    std::vector<VisionLabel> labels;                    // sorted by token_index
    std::vector<std::pair<WordBox, WordOutcome>> audit; // one entry per input word, input order
};

// The image-to-label pipeline for one image: scale word boxes from the
// original image into grid space, filter, map each survivor to the visual
// token under its bottom-right corner, then drop every word on a token that
// received more than one.
AlignResult align_words(const std::vector<WordBox>& words, const PatchGrid& grid, int orig_h,
                        int orig_w, const Vocabulary& vocab, std::string_view label_prefix = {});

struct CorpusStats {
    long long samples = 0;
    long long images = 0;
    long long text_labels = 0;   // response tokens under the vocabulary
    long long vision_labels = 0; // summed over samples
    double vision_coverage = 0.0;
};

// Coverage counts each distinct image's tokens once; the labeled set per
// image is the union over its samples.
CorpusStats compute_stats(const std::vector<LabeledSample>& samples, const Vocabulary& vocab);

} // namespace dvforge
