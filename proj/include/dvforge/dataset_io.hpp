#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "dvforge/eval_harness.hpp"
#include "dvforge/label_align.hpp"
#include "dvforge/patch_grid.hpp"
#include "dvforge/toy_model.hpp"

namespace dvforge {

// One OCR-processed image: original dims plus recognized word boxes.
struct OcrImage {
    std::string image_id;
    int width = 0;
    int height = 0;
    std::vector<WordBox> words;
};

struct QaRecord {
    std::string image_id;
    std::string question;
    std::string answer;
};

// Input document for the label-to-image pipeline.
struct DocRecord {
    std::string doc_id;
    std::vector<std::string> words;
    std::string question;
    std::string answer;
};

std::vector<OcrImage> read_ocr_jsonl(const std::filesystem::path& path);
void write_ocr_jsonl(const std::filesystem::path& path, std::span<const OcrImage> images);

std::vector<QaRecord> read_qa_jsonl(const std::filesystem::path& path);
void write_qa_jsonl(const std::filesystem::path& path, std::span<const QaRecord> records);

std::vector<DocRecord> read_docs_jsonl(const std::filesystem::path& path);
void write_docs_jsonl(const std::filesystem::path& path, std::span<const DocRecord> docs);

std::vector<LabeledSample> read_samples_jsonl(const std::filesystem::path& path);
void write_samples_jsonl(const std::filesystem::path& path,
                         std::span<const LabeledSample> samples);

void write_eval_jsonl(const std::filesystem::path& path, std::span<const EvalRecord> records,
                      const ScoreSummary& summary);

void write_report_jsonl(const std::filesystem::path& path, const TrainReport& report,
                        std::uint64_t config_hash);
TrainReport read_report_jsonl(const std::filesystem::path& path);

} // namespace dvforge
