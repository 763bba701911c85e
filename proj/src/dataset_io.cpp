#include "dvforge/dataset_io.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "dvforge/util.hpp"

namespace dvforge {

namespace {

using nlohmann::json; // std::map-backed, so dumped keys are sorted

// Applies fn to each non-empty line, wrapping parse/shape failures with the
// file position.
template <typename Fn>
void for_each_record(const std::filesystem::path& path, Fn&& fn) {
    std::ifstream in(path);
    if (!in) {
        throw ValidationError("cannot open: " + path.string());
    }
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        try {
            fn(json::parse(line));
        } catch (const ValidationError&) {
            throw;
        } catch (const std::exception& e) {
            throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": " +
                                  e.what());
        }
    }
}

void write_lines(const std::filesystem::path& path, const std::vector<std::string>& lines) {
    std::ofstream out(path, std::ios::binary); // \n endings everywhere
    if (!out) {
        throw ValidationError("cannot open for write: " + path.string());
    }
    for (const std::string& l : lines) {
        out << l << '\n';
    }
    if (!out) {
        throw std::runtime_error("short write: " + path.string());
    }
}

} // namespace

std::vector<OcrImage> read_ocr_jsonl(const std::filesystem::path& path) {
    std::vector<OcrImage> images;
    for_each_record(path, [&](const json& j) {
        OcrImage img;
        img.image_id = j.at("image_id").get<std::string>();
        img.width = j.at("width").get<int>();
        img.height = j.at("height").get<int>();
        if (img.width < 1 || img.height < 1) {
            throw ValidationError("image " + img.image_id + ": dims must be positive");
        }
        for (const json& w : j.at("words")) {
            WordBox box;
            box.text = w.at("text").get<std::string>();
            const json& b = w.at("box");
            if (!b.is_array() || b.size() != 4) {
                throw ValidationError("image " + img.image_id +
                                      ": box must be [x0, y0, x1, y1]");
            }
            box.x0 = b[0].get<double>();
            box.y0 = b[1].get<double>();
            box.x1 = b[2].get<double>();
            box.y1 = b[3].get<double>();
            if (w.contains("confidence")) {
                box.confidence = w.at("confidence").get<double>();
            }
            img.words.push_back(std::move(box));
        }
        images.push_back(std::move(img));
    });
    return images;
}

void write_ocr_jsonl(const std::filesystem::path& path, std::span<const OcrImage> images) {
    std::vector<std::string> lines;
    lines.reserve(images.size());
    for (const OcrImage& img : images) {
        json words = json::array();
        for (const WordBox& b : img.words) {
            json w{{"text", b.text}, {"box", {b.x0, b.y0, b.x1, b.y1}}};
            if (b.has_confidence()) {
                w["confidence"] = b.confidence;
            }
            words.push_back(std::move(w));
        }
        json j{{"image_id", img.image_id},
               {"width", img.width},
               {"height", img.height},
               {"words", std::move(words)}};
        lines.push_back(j.dump());
    }
    write_lines(path, lines);
}

std::vector<QaRecord> read_qa_jsonl(const std::filesystem::path& path) {
    std::vector<QaRecord> records;
    for_each_record(path, [&](const json& j) {
        QaRecord rec;
        rec.image_id = j.at("image_id").get<std::string>();
        rec.question = j.at("question").get<std::string>();
        rec.answer = j.at("answer").get<std::string>();
        records.push_back(std::move(rec));
    });
    return records;
}

void write_qa_jsonl(const std::filesystem::path& path, std::span<const QaRecord> records) {
    std::vector<std::string> lines;
    lines.reserve(records.size());
    for (const QaRecord& r : records) {
        json j{{"image_id", r.image_id}, {"question", r.question}, {"answer", r.answer}};
        lines.push_back(j.dump());
    }
    write_lines(path, lines);
}

std::vector<DocRecord> read_docs_jsonl(const std::filesystem::path& path) {
    std::vector<DocRecord> docs;
    for_each_record(path, [&](const json& j) {
        DocRecord doc;
        doc.doc_id = j.at("doc_id").get<std::string>();
        std::istringstream text(j.at("text").get<std::string>());
        std::string word;
        while (text >> word) {
            doc.words.push_back(word);
        }
        if (doc.words.empty()) {
            throw ValidationError("doc " + doc.doc_id + " has no words");
        }
        if (j.contains("question")) {
            doc.question = j.at("question").get<std::string>();
            doc.answer = j.at("answer").get<std::string>();
        }
        docs.push_back(std::move(doc));
    });
    return docs;
}

void write_docs_jsonl(const std::filesystem::path& path, std::span<const DocRecord> docs) {
    std::vector<std::string> lines;
    lines.reserve(docs.size());
    for (const DocRecord& d : docs) {
        std::string text;
        for (std::size_t i = 0; i < d.words.size(); ++i) {
            if (i > 0) {
                text += ' ';
            }
            text += d.words[i];
        }
        json j{{"doc_id", d.doc_id}, {"text", text}};
        if (!d.question.empty() || !d.answer.empty()) {
            j["question"] = d.question;
            j["answer"] = d.answer;
        }
        lines.push_back(j.dump());
    }
    write_lines(path, lines);
}

std::vector<LabeledSample> read_samples_jsonl(const std::filesystem::path& path) {
    std::vector<LabeledSample> samples;
    for_each_record(path, [&](const json& j) {
        LabeledSample s;
        s.sample_id = j.at("sample_id").get<std::string>();
        s.image_id = j.at("image_id").get<std::string>();
        s.image_ref = j.at("image_ref").get<std::string>();
        const json& g = j.at("grid");
        s.grid.rows = g.at("rows").get<int>();
        s.grid.cols = g.at("cols").get<int>();
        s.grid.cell = g.at("cell").get<int>();
        s.prompt = j.at("prompt").get<std::string>();
        s.response = j.at("response").get<std::string>();
        s.source = sample_source_from(j.at("source").get<std::string>());
        for (const json& l : j.at("vision_labels")) {
            VisionLabel label;
            label.token_index = l.at("token").get<int>();
            label.word = l.at("word").get<std::string>();
            label.first_token_id = l.at("first_token_id").get<int>();
            if (label.token_index < 0 || label.token_index >= s.grid.token_count()) {
                throw ValidationError("sample " + s.sample_id +
                                      ": vision label token outside the grid");
            }
            s.vision_labels.push_back(std::move(label));
        }
        samples.push_back(std::move(s));
    });
    return samples;
}

void write_samples_jsonl(const std::filesystem::path& path,
                         std::span<const LabeledSample> samples) {
    std::vector<std::string> lines;
    lines.reserve(samples.size());
    for (const LabeledSample& s : samples) {
        json labels = json::array();
        for (const VisionLabel& l : s.vision_labels) {
            labels.push_back(json{{"token", l.token_index},
                                  {"word", l.word},
                                  {"first_token_id", l.first_token_id}});
        }
        json j{{"sample_id", s.sample_id},
               {"image_id", s.image_id},
               {"image_ref", s.image_ref},
               {"grid", {{"rows", s.grid.rows}, {"cols", s.grid.cols}, {"cell", s.grid.cell}}},
               {"prompt", s.prompt},
               {"response", s.response},
               {"source", std::string(to_string(s.source))},
               {"vision_labels", std::move(labels)}};
        lines.push_back(j.dump());
    }
    write_lines(path, lines);
}

void write_eval_jsonl(const std::filesystem::path& path, std::span<const EvalRecord> records,
                      const ScoreSummary& summary) {
    std::vector<std::string> lines;
    lines.reserve(records.size() + 1);
    for (const EvalRecord& r : records) {
        json j{{"type", "record"},
               {"task", std::string(to_string(r.task))},
               {"sample_id", r.sample_id},
               {"resolution", r.resolution}};
        if (r.skipped) {
            j["skipped"] = true;
            j["skip_reason"] = r.skip_reason;
        } else {
            j["prediction"] = r.prediction;
            j["truth"] = r.truth;
            j["ned"] = r.ned_value;
            j["exact"] = r.exact;
        }
        lines.push_back(j.dump());
    }
    json s{{"type", "summary"},
           {"mean_ned", summary.mean_ned},
           {"exact_rate", summary.exact_rate},
           {"scored", summary.scored},
           {"skipped", summary.skipped}};
    lines.push_back(s.dump());
    write_lines(path, lines);
}

void write_report_jsonl(const std::filesystem::path& path, const TrainReport& report,
                        std::uint64_t config_hash) {
    std::vector<std::string> lines;
    json header{{"type", "header"},
                {"config_hash", to_hex(config_hash)},
                {"note", "patch embedder is trained from scratch; no frozen pretrained "
                         "encoder exists at this scale"}};
    lines.push_back(header.dump());
    for (const CheckpointRecord& c : report.checkpoints) {
        json j{{"type", "checkpoint"},
               {"step", c.step},
               {"text_loss", c.text_loss},
               {"vision_loss", c.vision_loss},
               {"val_extraction", c.val_extraction},
               {"vision_top1", c.vision_top1}};
        lines.push_back(j.dump());
    }
    if (report.diverged) {
        json j{{"type", "diverged"}, {"step", report.diverged_step}};
        lines.push_back(j.dump());
    }
    write_lines(path, lines);
}

TrainReport read_report_jsonl(const std::filesystem::path& path) {
    TrainReport report;
    for_each_record(path, [&](const json& j) {
        std::string type = j.at("type").get<std::string>();
        if (type == "checkpoint") {
            CheckpointRecord c;
            c.step = j.at("step").get<int>();
            c.text_loss = j.at("text_loss").get<double>();
            c.vision_loss = j.at("vision_loss").get<double>();
            c.val_extraction = j.at("val_extraction").get<double>();
            c.vision_top1 = j.at("vision_top1").get<double>();
            report.checkpoints.push_back(c);
        } else if (type == "diverged") {
            report.diverged = true;
            report.diverged_step = j.at("step").get<int>();
        }
    });
    return report;
}

} // namespace dvforge
