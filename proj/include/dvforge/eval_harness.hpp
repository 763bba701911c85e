#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "dvforge/doc_render.hpp"
#include "dvforge/tokenizer.hpp"

namespace dvforge {

// Levenshtein distance with unit costs.
int edit_distance(std::string_view a, std::string_view b);

// edit_distance / max(len); 0 when both strings are empty.
double ned(std::string_view pred, std::string_view truth);

struct WordFreqTable {
    std::vector<std::string> words;
    std::vector<double> weights;

    static WordFreqTable load(const std::filesystem::path& path);
    void validate() const;
};

// Words drawn i.i.d. proportional to frequency until the character count
// (single separators included) reaches min_chars; a word that would push the
// count past max_chars is dropped and generation stops.
std::vector<std::string> gen_noncontextual(const WordFreqTable& table, std::uint64_t seed,
                                           int min_chars = 200, int max_chars = 500);

// `count` distinct passages sampled from a line-delimited corpus.
std::vector<std::string> gen_contextual(const std::vector<std::string>& corpus_lines,
                                        std::uint64_t seed, std::size_t count);

enum class EvalTask { contextual, noncontextual, extraction };

std::string_view to_string(EvalTask t);
EvalTask eval_task_from(std::string_view s);

struct EvalRecord {
    EvalTask task = EvalTask::extraction;
    std::string sample_id;
    std::string prediction;
    std::string truth;
    double ned_value = 0.0;
    bool exact = false;
    int resolution = 0; // token count of the input grid
    bool skipped = false;
    std::string skip_reason;
};

struct ScorePolicy {
    bool lowercase = true;
    bool strip = true;
    // Count a prediction that contains the truth as an exact match; mirrors
    // single-word answer scoring where the model may echo context.
    bool contains = false;
};

struct ScoreSummary {
    double mean_ned = 0.0;
    double exact_rate = 0.0;
    long long scored = 0;
    long long skipped = 0;
};

// Fills ned_value/exact on each non-skipped record (NED on trimmed raw
// strings; exact under the policy) and aggregates.
ScoreSummary score_answers(std::vector<EvalRecord>& records, const ScorePolicy& policy);

// Re-renders one document at each target token count (exact-budget grids) and
// evaluates it; unrealizable counts come back as skipped records.
std::vector<EvalRecord> resolution_sweep(
    const std::vector<std::string>& doc_words, const RenderSpec& spec, const Vocabulary& vocab,
    const std::vector<int>& token_counts,
    const std::function<EvalRecord(const RenderedDoc&)>& eval_fn);

} // namespace dvforge
