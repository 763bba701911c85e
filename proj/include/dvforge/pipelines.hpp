#pragma once

#include <filesystem>
#include <map>
#include <ostream>
#include <string>

#include "dvforge/config.hpp"
#include "dvforge/dataset_io.hpp"

namespace dvforge {

// Written next to every pipeline's outputs. Reruns with the same config and
// inputs produce byte-identical files, so manifests double as a determinism
// check: compare them across runs.
struct Manifest {
    std::uint64_t config_hash = 0;
    std::map<std::string, std::string> inputs;  // label -> content hash, hex
    std::map<std::string, std::string> outputs;
};

void write_manifest(const std::filesystem::path& dir, const Manifest& m);

std::string file_hash_hex(const std::filesystem::path& path);

// Built-in corpus of short words used when synth.wordlist is empty.
const WordFreqTable& builtin_wordlist();

// Synthetic documents with one extraction question each, per cfg.synth.
std::vector<DocRecord> synth_docs(const ToolConfig& cfg);

struct AlignArgs {
    std::string ocr;
    std::string qa;
    std::string vocab; // empty selects the byte-level vocabulary
    std::string out_dir;
};
void run_align(const ToolConfig& cfg, const AlignArgs& args);

struct RenderArgs {
    std::string docs;  // empty with synth=true generates a corpus
    std::string vocab;
    std::string out_dir;
    bool synth = false;
};
void run_render(const ToolConfig& cfg, const RenderArgs& args);

struct StatsArgs {
    std::string samples;
    std::string vocab;
    std::string out_dir; // optional; also writes stats.json + manifest
};
void run_stats(const ToolConfig& cfg, const StatsArgs& args, std::ostream& out);

// Self-checks of the loss definitions on synthetic batches. Returns the
// number of failed checks.
int run_losscheck(const ToolConfig& cfg, std::ostream& out);

struct TrainArgs {
    std::string data_dir; // samples.jsonl plus the referenced images
    std::string out_dir;
};
void run_train(const ToolConfig& cfg, const TrainArgs& args, std::ostream& out);

struct ProbeArgs {
    std::string params;
    std::string data_dir;
    std::string sample_id; // empty takes the first sample
    int top_k = 5;
};
void run_probe(const ToolConfig& cfg, const ProbeArgs& args, std::ostream& out);

struct EvalArgs {
    std::string params;
    std::string task;   // contextual | noncontextual | extraction
    std::string corpus; // docs jsonl, wordlist tsv, or line corpus per task
    std::string out_dir;
};
void run_eval(const ToolConfig& cfg, const EvalArgs& args, std::ostream& out);

struct SweepArgs {
    std::string params;
    std::string docs;
    std::string out_dir;
};
void run_sweep(const ToolConfig& cfg, const SweepArgs& args, std::ostream& out);

} // namespace dvforge
