#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "dvforge/doc_render.hpp"
#include "dvforge/dv_loss.hpp"
#include "dvforge/eval_harness.hpp"
#include "dvforge/patch_grid.hpp"
#include "dvforge/toy_model.hpp"

namespace dvforge {

// Synthetic document corpus: short words drawn from a frequency table,
// one extraction question per document.
struct SynthConfig {
    int docs = 400;
    int words_min = 4;
    int words_max = 6;
    std::string wordlist; // TSV path; empty selects the built-in list
    // Question mix, percentages summing to 100.
    int qa_first = 30;
    int qa_last = 20;
    int qa_after = 50;

    void validate() const;
};

struct AlignConfig {
    int qa_per_image = 0; // 0 keeps every question
    // "none", "random", or a decimal index into the instruction list.
    std::string instruction = "none";

    void validate() const;
};

struct EvalConfig {
    ScorePolicy policy;
    int min_chars = 200;
    int max_chars = 500;
    int count = 16;       // generated passages per eval run
    std::string tokens;   // sweep budgets, e.g. "12,20,30"

    void validate() const;
};

// Whole-tool configuration. Loaded from an INI file; unknown sections or
// keys are hard errors so typos cannot silently fall back to defaults.
struct ToolConfig {
    std::uint64_t seed = 1;
    int workers = 1;
    GridConfig grid;
    RenderSpec render;
    LossConfig loss;
    ToyConfig toy;
    double val_fraction = 0.15;
    SynthConfig synth;
    AlignConfig align;
    EvalConfig eval;

    static ToolConfig load(const std::string& path);
    static ToolConfig from_text(std::string_view text, const std::string& context);

    void validate() const;

    // Normalized dump of every key. Two configs hash equal iff they render
    // the same canonical text, independent of file formatting.
    std::string canonical_text() const;
    std::uint64_t hash() const;
};

// Instruction suffixes appended to prompts by the align pipeline.
const std::vector<std::string>& instruction_list();

} // namespace dvforge
