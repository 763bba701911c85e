#include "dvforge/pipelines.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <thread>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "dvforge/rng.hpp"
#include "dvforge/util.hpp"
#include "dvforge/version.hpp"

namespace dvforge {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
        throw ValidationError("cannot create directory " + dir.string() + ": " + ec.message());
    }
}

void write_jsonl(const fs::path& path, const std::vector<json>& lines) {
    std::string out;
    for (const json& j : lines) {
        out += j.dump();
        out += '\n';
    }
    write_text_file(path, out);
}

std::string join_words(const std::vector<std::string>& words) {
    std::string out;
    for (std::size_t i = 0; i < words.size(); ++i) {
        if (i > 0) out += ' ';
        out += words[i];
    }
    return out;
}

// Per-purpose RNG streams are derived from tagged ids so no two pipelines
// share a stream by accident.
Rng tagged_rng(std::uint64_t seed, const std::string& tag) {
    return Rng::derive(seed, fnv1a64(tag));
}

std::string fold_hashes(const std::map<std::string, std::uint64_t>& named) {
    std::string acc;
    for (const auto& [name, h] : named) {
        acc += name;
        acc += '=';
        acc += to_hex(h);
        acc += '\n';
    }
    return to_hex(fnv1a64(acc.data(), acc.size()));
}

Vocabulary load_vocab(const std::string& path) {
    return path.empty() ? Vocabulary::byte_level() : Vocabulary::load(path);
}

std::string doc_name(std::string_view prefix, std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s%04zu", std::string(prefix).c_str(), i);
    return buf;
}

// prompt/truth convention shared by render, eval and sweep: documents without
// a question become full read-out tasks.
std::pair<std::string, std::string> doc_prompt_truth(const DocRecord& doc) {
    if (doc.question.empty() != doc.answer.empty()) {
        throw ValidationError(doc.doc_id + ": question and answer must be set together");
    }
    if (doc.question.empty()) {
        return {"read?", join_words(doc.words)};
    }
    return {doc.question, doc.answer};
}

std::string id_text(int id) {
    if (id == kByteBos) return "<bos>";
    if (id == kByteEos) return "<eos>";
    if (id >= 32 && id < 127) return std::string{'\'', static_cast<char>(id), '\''};
    char buf[8];
    std::snprintf(buf, sizeof buf, "\\x%02x", id);
    return buf;
}

ModelSample sample_from_doc(const RenderedDoc& doc, const std::string& id,
                            const std::string& prompt, const std::string& truth,
                            const NetDims& dims) {
    LabeledSample ls;
    ls.image_id = id;
    ls.sample_id = id;
    ls.image_ref = id;
    ls.grid = doc.grid;
    ls.prompt = prompt;
    ls.response = truth;
    ls.vision_labels = doc.labels;
    ls.source = SampleSource::label_to_image;
    return build_sample(ls, doc.image, dims);
}

} // namespace

void write_manifest(const fs::path& dir, const Manifest& m) {
    json j;
    j["config_hash"] = to_hex(m.config_hash);
    j["tool"] = std::string(kToolName);
    j["version"] = std::string(kToolVersion);
    j["inputs"] = json::object();
    for (const auto& [name, h] : m.inputs) j["inputs"][name] = h;
    j["outputs"] = json::object();
    for (const auto& [name, h] : m.outputs) j["outputs"][name] = h;
    write_text_file(dir / "manifest.json", j.dump(2) + "\n");
}

std::string file_hash_hex(const fs::path& path) {
    return to_hex(hash_file(path));
}

const WordFreqTable& builtin_wordlist() {
    static const WordFreqTable table = [] {
        WordFreqTable t;
        t.words = {"ant",  "bee",  "cat",  "dog",  "elk",  "fox",  "gem",  "hat",
                   "ice",  "jar",  "key",  "log",  "map",  "net",  "owl",  "pig",
                   "ram",  "sun",  "top",  "urn",  "vine", "wolf", "xray", "yarn",
                   "zinc", "arch", "bolt", "cave", "dusk", "echo", "fern", "gate",
                   "hill", "iron", "jade", "kite", "lamp", "moss", "nest", "opal"};
        t.weights.assign(t.words.size(), 1.0);
        return t;
    }();
    return table;
}

std::vector<DocRecord> synth_docs(const ToolConfig& cfg) {
    const WordFreqTable table = cfg.synth.wordlist.empty()
                                    ? builtin_wordlist()
                                    : WordFreqTable::load(cfg.synth.wordlist);
    table.validate();
    if (static_cast<std::size_t>(cfg.synth.words_max) > table.words.size()) {
        throw ValidationError("synth.words_max exceeds the wordlist size");
    }
    std::vector<double> cum(table.weights.size());
    std::partial_sum(table.weights.begin(), table.weights.end(), cum.begin());
    double total = cum.back();

    std::vector<DocRecord> docs;
    docs.reserve(static_cast<std::size_t>(cfg.synth.docs));
    for (int i = 0; i < cfg.synth.docs; ++i) {
        Rng rng = tagged_rng(cfg.seed, "synth:" + std::to_string(i));
        int n = rng.next_int(cfg.synth.words_min, cfg.synth.words_max);
        DocRecord doc;
        doc.doc_id = doc_name("doc_", static_cast<std::size_t>(i));
        std::unordered_set<std::size_t> used;
        while (static_cast<int>(doc.words.size()) < n) {
            double u = rng.next_unit() * total;
            std::size_t idx = static_cast<std::size_t>(
                std::upper_bound(cum.begin(), cum.end(), u) - cum.begin());
            if (idx >= table.words.size()) idx = table.words.size() - 1;
            if (used.insert(idx).second) {
                doc.words.push_back(table.words[idx]);
            }
        }
        int roll = static_cast<int>(rng.next_below(100));
        if (roll < cfg.synth.qa_first || n < 2) {
            doc.question = "first?";
            doc.answer = doc.words.front();
        } else if (roll < cfg.synth.qa_first + cfg.synth.qa_last) {
            doc.question = "last?";
            doc.answer = doc.words.back();
        } else {
            int j = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(n - 1)));
            doc.question = "after " + doc.words[j] + "?";
            doc.answer = doc.words[j + 1];
        }
        docs.push_back(std::move(doc));
    }
    return docs;
}

void run_align(const ToolConfig& cfg, const AlignArgs& args) {
    auto images = read_ocr_jsonl(args.ocr);
    auto qa = read_qa_jsonl(args.qa);
    Vocabulary vocab = load_vocab(args.vocab);

    std::unordered_map<std::string, std::vector<QaRecord>> qa_by_image;
    for (const QaRecord& rec : qa) {
        qa_by_image[rec.image_id].push_back(rec);
    }
    std::unordered_set<std::string> known;
    for (const OcrImage& img : images) {
        if (!known.insert(img.image_id).second) {
            throw ValidationError("duplicate image id " + img.image_id + " in " + args.ocr);
        }
    }
    for (const QaRecord& rec : qa) {
        if (!known.count(rec.image_id)) {
            throw ValidationError("question references unknown image " + rec.image_id);
        }
    }

    const auto& instructions = instruction_list();
    std::vector<LabeledSample> samples;
    std::vector<json> audit;
    for (const OcrImage& img : images) {
        auto [h, w] = smart_resize(img.height, img.width, cfg.grid);
        PatchGrid grid = grid_of(h, w, cfg.grid.cell);
        AlignResult res = align_words(img.words, grid, img.height, img.width, vocab);
        for (const auto& [box, outcome] : res.audit) {
            audit.push_back(json{{"image_id", img.image_id},
                                 {"outcome", std::string(to_string(outcome))},
                                 {"word", box.text}});
        }

        auto it = qa_by_image.find(img.image_id);
        if (it == qa_by_image.end()) continue;
        const std::vector<QaRecord>& recs = it->second;
        std::vector<std::size_t> keep(recs.size());
        std::iota(keep.begin(), keep.end(), 0);
        if (cfg.align.qa_per_image > 0 &&
            recs.size() > static_cast<std::size_t>(cfg.align.qa_per_image)) {
            Rng rng = tagged_rng(cfg.seed, "qa:" + img.image_id);
            for (std::size_t i = 0; i < static_cast<std::size_t>(cfg.align.qa_per_image); ++i) {
                std::size_t j = i + rng.next_below(keep.size() - i);
                std::swap(keep[i], keep[j]);
            }
            keep.resize(static_cast<std::size_t>(cfg.align.qa_per_image));
            std::sort(keep.begin(), keep.end());
        }
        for (std::size_t k = 0; k < keep.size(); ++k) {
            const QaRecord& rec = recs[keep[k]];
            LabeledSample s;
            s.image_id = img.image_id;
            s.sample_id = img.image_id + "#" + std::to_string(k);
            s.image_ref = img.image_id;
            s.grid = grid;
            s.prompt = rec.question;
            if (cfg.align.instruction == "random") {
                Rng rng = tagged_rng(cfg.seed, "instr:" + s.sample_id);
                s.prompt += " " + instructions[rng.next_below(instructions.size())];
            } else if (cfg.align.instruction != "none") {
                s.prompt += " " + instructions[std::stoul(cfg.align.instruction)];
            }
            s.response = rec.answer;
            s.vision_labels = res.labels;
            s.source = SampleSource::image_to_label;
            samples.push_back(std::move(s));
        }
    }
    std::stable_sort(samples.begin(), samples.end(),
                     [](const LabeledSample& a, const LabeledSample& b) {
                         return std::tie(a.image_id, a.sample_id) < std::tie(b.image_id, b.sample_id);
                     });

    fs::path out = args.out_dir;
    ensure_dir(out);
    write_samples_jsonl(out / "samples.jsonl", samples);
    write_jsonl(out / "audit.jsonl", audit);
    CorpusStats stats = compute_stats(samples, vocab);
    json stats_json{{"images", stats.images},
                    {"samples", stats.samples},
                    {"text_labels", stats.text_labels},
                    {"vision_coverage", stats.vision_coverage},
                    {"vision_labels", stats.vision_labels}};
    write_text_file(out / "stats.json", stats_json.dump(2) + "\n");

    Manifest m;
    m.config_hash = cfg.hash();
    m.inputs["ocr"] = file_hash_hex(args.ocr);
    m.inputs["qa"] = file_hash_hex(args.qa);
    if (!args.vocab.empty()) m.inputs["vocab"] = file_hash_hex(args.vocab);
    m.outputs["samples.jsonl"] = file_hash_hex(out / "samples.jsonl");
    m.outputs["audit.jsonl"] = file_hash_hex(out / "audit.jsonl");
    m.outputs["stats.json"] = file_hash_hex(out / "stats.json");
    write_manifest(out, m);
}

void run_render(const ToolConfig& cfg, const RenderArgs& args) {
    if (args.docs.empty() == !args.synth) {
        throw ValidationError("render needs exactly one of --docs or --synth");
    }
    std::vector<DocRecord> docs =
        args.synth ? synth_docs(cfg) : read_docs_jsonl(args.docs);
    if (docs.empty()) {
        throw ValidationError("no documents to render");
    }
    {
        std::unordered_set<std::string> ids;
        for (const DocRecord& d : docs) {
            if (!ids.insert(d.doc_id).second) {
                throw ValidationError("duplicate doc id " + d.doc_id);
            }
        }
    }
    Vocabulary vocab = load_vocab(args.vocab);

    struct Rendered {
        RenderedDoc doc;
        LabeledSample sample;
    };
    std::vector<Rendered> outs(docs.size());
    auto render_one = [&](std::size_t i) {
        const DocRecord& doc = docs[i];
        RenderSpec spec = cfg.render;
        spec.seed = tagged_rng(cfg.seed, "color:" + doc.doc_id).next_u64();
        auto [prompt, truth] = doc_prompt_truth(doc);
        Rendered r;
        try {
            r.doc = render_document(doc.words, spec, cfg.grid, vocab);
        } catch (const ValidationError& e) {
            throw ValidationError(doc.doc_id + ": " + e.what());
        }
        r.sample.image_id = doc.doc_id;
        r.sample.sample_id = doc.doc_id + "#0";
        r.sample.image_ref = doc.doc_id + ".ppm";
        r.sample.grid = r.doc.grid;
        r.sample.prompt = prompt;
        r.sample.response = truth;
        r.sample.vision_labels = r.doc.labels;
        r.sample.source = SampleSource::label_to_image;
        outs[i] = std::move(r);
    };

    int workers = std::min<int>(cfg.workers, static_cast<int>(docs.size()));
    if (workers <= 1) {
        for (std::size_t i = 0; i < docs.size(); ++i) render_one(i);
    } else {
        // Outputs land in per-document slots and are written in order below,
        // so the worker count never shows in the bytes.
        std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
        std::vector<std::thread> pool;
        for (int t = 0; t < workers; ++t) {
            pool.emplace_back([&, t] {
                try {
                    for (std::size_t i = static_cast<std::size_t>(t); i < docs.size();
                         i += static_cast<std::size_t>(workers)) {
                        render_one(i);
                    }
                } catch (...) {
                    errors[static_cast<std::size_t>(t)] = std::current_exception();
                }
            });
        }
        for (std::thread& th : pool) th.join();
        for (const std::exception_ptr& e : errors) {
            if (e) std::rethrow_exception(e);
        }
    }

    fs::path out = args.out_dir;
    ensure_dir(out);
    std::map<std::string, std::uint64_t> image_hashes;
    std::vector<LabeledSample> samples;
    samples.reserve(outs.size());
    for (const Rendered& r : outs) {
        fs::path img_path = out / r.sample.image_ref;
        write_ppm(img_path.string(), r.doc.image);
        image_hashes[r.sample.image_ref] = hash_file(img_path);
        samples.push_back(r.sample);
    }
    std::stable_sort(samples.begin(), samples.end(),
                     [](const LabeledSample& a, const LabeledSample& b) {
                         return std::tie(a.image_id, a.sample_id) < std::tie(b.image_id, b.sample_id);
                     });
    write_samples_jsonl(out / "samples.jsonl", samples);

    Manifest m;
    m.config_hash = cfg.hash();
    if (!args.docs.empty()) m.inputs["docs"] = file_hash_hex(args.docs);
    if (!args.vocab.empty()) m.inputs["vocab"] = file_hash_hex(args.vocab);
    if (args.synth) {
        // Keep the generated corpus next to its renders so eval and sweep can
        // reuse it without re-deriving the questions.
        write_docs_jsonl(out / "docs.jsonl", docs);
        m.outputs["docs.jsonl"] = file_hash_hex(out / "docs.jsonl");
        if (!cfg.synth.wordlist.empty()) {
            m.inputs["wordlist"] = file_hash_hex(cfg.synth.wordlist);
        }
    }
    m.outputs["samples.jsonl"] = file_hash_hex(out / "samples.jsonl");
    m.outputs["images"] = fold_hashes(image_hashes);
    write_manifest(out, m);
}

void run_stats(const ToolConfig& cfg, const StatsArgs& args, std::ostream& out) {
    auto samples = read_samples_jsonl(args.samples);
    Vocabulary vocab = load_vocab(args.vocab);
    CorpusStats stats = compute_stats(samples, vocab);
    char buf[64];
    auto line = [&](const char* name, long long v) {
        std::snprintf(buf, sizeof buf, "%-16s %10lld\n", name, v);
        out << buf;
    };
    line("samples", stats.samples);
    line("images", stats.images);
    line("text_labels", stats.text_labels);
    line("vision_labels", stats.vision_labels);
    std::snprintf(buf, sizeof buf, "%-16s %10.6f\n", "vision_coverage", stats.vision_coverage);
    out << buf;

    if (!args.out_dir.empty()) {
        fs::path dir = args.out_dir;
        ensure_dir(dir);
        json stats_json{{"images", stats.images},
                        {"samples", stats.samples},
                        {"text_labels", stats.text_labels},
                        {"vision_coverage", stats.vision_coverage},
                        {"vision_labels", stats.vision_labels}};
        write_text_file(dir / "stats.json", stats_json.dump(2) + "\n");
        Manifest m;
        m.config_hash = cfg.hash();
        m.inputs["samples"] = file_hash_hex(args.samples);
        if (!args.vocab.empty()) m.inputs["vocab"] = file_hash_hex(args.vocab);
        m.outputs["stats.json"] = file_hash_hex(dir / "stats.json");
        write_manifest(dir, m);
    }
}

namespace {

// Random but structurally valid supervision layout for the loss self-checks.
SequenceBatch random_batch(Rng& rng, int visual, int prompt, int response, int vocab,
                           double spread) {
    SequenceBatch batch;
    int total = visual + prompt + response;
    batch.logits = Matrix(total, vocab);
    for (double& v : batch.logits.data) v = spread * rng.next_normal();

    std::vector<int> label_set;
    while (label_set.size() < 4) {
        int id = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(vocab)));
        if (std::find(label_set.begin(), label_set.end(), id) == label_set.end()) {
            label_set.push_back(id);
        }
    }
    std::sort(label_set.begin(), label_set.end());
    batch.vision_label_set = label_set;

    for (int i = 0; i < visual; ++i) {
        batch.kinds.push_back(PositionKind::visual);
        bool labeled = rng.next_unit() < 0.7 || i == 0; // keep at least one label
        batch.targets.push_back(
            labeled ? label_set[rng.next_below(label_set.size())] : kNoTarget);
    }
    for (int i = 0; i < prompt; ++i) {
        batch.kinds.push_back(PositionKind::prompt);
        batch.targets.push_back(kNoTarget);
    }
    for (int i = 0; i < response; ++i) {
        batch.kinds.push_back(PositionKind::response);
        batch.targets.push_back(static_cast<int>(rng.next_below(static_cast<std::uint64_t>(vocab))));
    }
    batch.validate();
    return batch;
}

} // namespace

int run_losscheck(const ToolConfig& cfg, std::ostream& out) {
    int fails = 0;
    auto report = [&](bool ok, const std::string& name, const std::string& detail) {
        out << (ok ? "PASS " : "FAIL ") << name << " (" << detail << ")\n";
        if (!ok) ++fails;
    };
    char buf[96];
    Rng rng = tagged_rng(cfg.seed, "losscheck");

    {
        std::vector<int> set{3, 9, 17};
        double beta = cfg.loss.beta;
        auto w = smoothing_weights(9, set, beta);
        double sum = 0.0;
        bool ok = w.size() == set.size();
        for (const auto& [id, p] : w) {
            sum += p;
            if (id == 9) ok = ok && p == 1.0 - beta;
            else ok = ok && p == beta / 2.0;
        }
        ok = ok && std::abs(sum - 1.0) < 1e-15;
        std::snprintf(buf, sizeof buf, "own %.6f, cross %.6f, sum %.17g", 1.0 - beta, beta / 2.0, sum);
        report(ok, "smoothing_weights_exact", buf);
    }
    {
        SequenceBatch batch = random_batch(rng, 6, 3, 4, 24, 1.2);
        LossConfig lc = cfg.loss;
        lc.beta = 0.0;
        double got = vision_loss(batch, lc);
        double want = 0.0;
        int labeled = 0;
        for (std::size_t i = 0; i < batch.kinds.size(); ++i) {
            if (batch.kinds[i] != PositionKind::visual || batch.targets[i] == kNoTarget) continue;
            auto ls = log_softmax(batch.logits.row_span(static_cast<int>(i)));
            want -= ls[static_cast<std::size_t>(batch.targets[i])];
            ++labeled;
        }
        want /= labeled;
        double rel = std::abs(got - want) / std::max(1.0, std::abs(want));
        std::snprintf(buf, sizeof buf, "rel err %.3e", rel);
        report(rel < 1e-12, "beta_zero_is_first_token_ce", buf);
    }
    {
        SequenceBatch batch = random_batch(rng, 5, 2, 6, 24, 0.9);
        LossConfig lc = cfg.loss;
        lc.lambda = 0.0;
        LossBreakdown b = combined_loss(batch, lc);
        double diff = std::abs(b.total - b.text);
        std::snprintf(buf, sizeof buf, "|total - text| = %.3e", diff);
        report(diff <= 1e-15 * std::max(1.0, std::abs(b.text)), "lambda_zero_is_text_loss", buf);
    }
    {
        int vocab = 24;
        SequenceBatch batch = random_batch(rng, 4, 2, 5, vocab, 0.0);
        batch.logits.zero();
        double got = text_loss(batch);
        double want = std::log(static_cast<double>(vocab));
        double rel = std::abs(got - want) / want;
        std::snprintf(buf, sizeof buf, "ce %.12f vs ln(%d) %.12f", got, vocab, want);
        report(rel < 1e-12, "uniform_logits_ce_is_ln_vocab", buf);
    }
    {
        SequenceBatch batch = random_batch(rng, 6, 2, 4, 24, 1.1);
        LossBreakdown b = combined_loss(batch, cfg.loss);
        double want = b.text + cfg.loss.lambda * b.vision;
        double rel = std::abs(b.total - want) / std::max(1.0, std::abs(want));
        std::snprintf(buf, sizeof buf, "rel err %.3e", rel);
        report(rel < 1e-12, "total_is_text_plus_lambda_vision", buf);
    }
    {
        SequenceBatch batch = random_batch(rng, 5, 3, 4, 24, 0.8);
        Matrix grad = loss_gradient(batch, cfg.loss);
        // Central differences bottom out near 1e-11 absolute, so entries far
        // below the typical gradient scale are held to an absolute bar.
        double h = 1e-5;
        double worst = 0.0;
        for (std::size_t i = 0; i < batch.logits.data.size(); ++i) {
            double keep = batch.logits.data[i];
            batch.logits.data[i] = keep + h;
            double up = combined_loss(batch, cfg.loss).total;
            batch.logits.data[i] = keep - h;
            double down = combined_loss(batch, cfg.loss).total;
            batch.logits.data[i] = keep;
            double fd = (up - down) / (2.0 * h);
            double a = grad.data[i];
            double rel = std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), 1e-3});
            worst = std::max(worst, rel);
        }
        std::snprintf(buf, sizeof buf, "max rel err %.3e over %zu entries", worst,
                      batch.logits.data.size());
        report(worst < 1e-6, "gradient_matches_finite_difference", buf);
    }
    return fails;
}

void run_train(const ToolConfig& cfg, const TrainArgs& args, std::ostream& out) {
    fs::path data = args.data_dir;
    auto samples = read_samples_jsonl(data / "samples.jsonl");
    if (samples.size() < 2) {
        throw ValidationError("need at least 2 samples to split train/val");
    }
    NetDims dims = NetDims::of(cfg.toy);
    std::unordered_map<std::string, Image> image_cache;
    std::map<std::string, std::uint64_t> image_hashes;
    std::vector<ModelSample> all;
    all.reserve(samples.size());
    for (const LabeledSample& s : samples) {
        auto it = image_cache.find(s.image_ref);
        if (it == image_cache.end()) {
            fs::path img_path = data / s.image_ref;
            it = image_cache.emplace(s.image_ref, read_ppm(img_path.string())).first;
            image_hashes[s.image_ref] = hash_file(img_path);
        }
        try {
            all.push_back(build_sample(s, it->second, dims));
        } catch (const std::invalid_argument& e) {
            throw ValidationError(s.sample_id + ": " + e.what());
        }
    }

    std::vector<std::size_t> order(all.size());
    std::iota(order.begin(), order.end(), 0);
    Rng split_rng = Rng::derive(cfg.seed, 2);
    for (std::size_t i = order.size(); i > 1; --i) {
        std::swap(order[i - 1], order[split_rng.next_below(i)]);
    }
    auto n_val = static_cast<std::size_t>(std::llround(cfg.val_fraction * static_cast<double>(all.size())));
    n_val = std::clamp<std::size_t>(n_val, 1, all.size() - 1);
    std::vector<ModelSample> val_set, train_set;
    for (std::size_t i = 0; i < order.size(); ++i) {
        (i < n_val ? val_set : train_set).push_back(all[order[i]]);
    }

    TrainResult result = train(cfg.toy, cfg.loss, train_set, val_set);

    out << "train " << train_set.size() << " samples, val " << val_set.size() << "\n";
    char buf[96];
    std::snprintf(buf, sizeof buf, "%6s  %9s  %9s  %9s  %9s\n", "step", "text", "vision",
                  "val_extr", "vis_top1");
    out << buf;
    for (const CheckpointRecord& c : result.report.checkpoints) {
        std::snprintf(buf, sizeof buf, "%6d  %9.4f  %9.4f  %9.4f  %9.4f\n", c.step, c.text_loss,
                      c.vision_loss, c.val_extraction, c.vision_top1);
        out << buf;
    }
    if (result.report.diverged) {
        out << "diverged at step " << result.report.diverged_step << "\n";
    }

    fs::path dir = args.out_dir;
    ensure_dir(dir);
    save_params(dir / "params.bin", result.params, cfg.hash());
    write_report_jsonl(dir / "report.jsonl", result.report, cfg.hash());

    Manifest m;
    m.config_hash = cfg.hash();
    m.inputs["samples"] = file_hash_hex(data / "samples.jsonl");
    m.inputs["images"] = fold_hashes(image_hashes);
    m.outputs["params.bin"] = file_hash_hex(dir / "params.bin");
    m.outputs["report.jsonl"] = file_hash_hex(dir / "report.jsonl");
    write_manifest(dir, m);
}

void run_probe(const ToolConfig& cfg, const ProbeArgs& args, std::ostream& out) {
    (void)cfg;
    Parameters params = load_params(args.params);
    fs::path data = args.data_dir;
    auto samples = read_samples_jsonl(data / "samples.jsonl");
    if (samples.empty()) {
        throw ValidationError("no samples in " + data.string());
    }
    const LabeledSample* chosen = nullptr;
    if (args.sample_id.empty()) {
        chosen = &samples.front();
    } else {
        for (const LabeledSample& s : samples) {
            if (s.sample_id == args.sample_id) {
                chosen = &s;
                break;
            }
        }
        if (!chosen) {
            throw ValidationError("sample " + args.sample_id + " not found");
        }
    }
    Image img = read_ppm((data / chosen->image_ref).string());
    ModelSample ms;
    try {
        ms = build_sample(*chosen, img, params.dims);
    } catch (const std::invalid_argument& e) {
        throw ValidationError(chosen->sample_id + ": " + e.what());
    }
    int k = std::min(args.top_k, params.dims.vocab_size);
    if (k < 1) throw ValidationError("top_k must be at least 1");
    auto tops = probe_visual_logits(params, ms, k);

    std::unordered_map<int, const VisionLabel*> by_token;
    for (const VisionLabel& l : chosen->vision_labels) by_token[l.token_index] = &l;

    out << "sample " << chosen->sample_id << "  grid " << chosen->grid.rows << "x"
        << chosen->grid.cols << "  top-" << k << " ids per visual token\n";
    char buf[64];
    for (std::size_t t = 0; t < tops.size(); ++t) {
        int row = static_cast<int>(t) / chosen->grid.cols;
        int col = static_cast<int>(t) % chosen->grid.cols;
        const VisionLabel* label = by_token.count(static_cast<int>(t))
                                       ? by_token[static_cast<int>(t)]
                                       : nullptr;
        bool hit = label && !tops[t].empty() && tops[t][0] == label->first_token_id;
        std::snprintf(buf, sizeof buf, "tok %3zu (r%02d,c%02d) %-10s %c |", t, row, col,
                      label ? label->word.c_str() : "-", hit ? '*' : ' ');
        out << buf;
        for (int id : tops[t]) {
            out << " " << id << id_text(id);
        }
        out << "\n";
    }
}

void run_eval(const ToolConfig& cfg, const EvalArgs& args, std::ostream& out) {
    EvalTask task = eval_task_from(args.task);
    Parameters params = load_params(args.params);
    Vocabulary vocab = Vocabulary::byte_level();

    std::vector<EvalRecord> records;
    auto eval_doc = [&](const std::string& id, const std::vector<std::string>& words,
                        const std::string& prompt, const std::string& truth) {
        EvalRecord rec;
        rec.task = task;
        rec.sample_id = id;
        rec.truth = truth;
        RenderSpec spec = cfg.render;
        spec.seed = tagged_rng(cfg.seed, "color:" + id).next_u64();
        try {
            RenderedDoc doc = render_document(words, spec, cfg.grid, vocab);
            rec.resolution = doc.grid.token_count();
            ModelSample ms = sample_from_doc(doc, id, prompt, truth, params.dims);
            int cap = task == EvalTask::extraction ? cfg.toy.max_answer_len
                                                   : static_cast<int>(truth.size()) + 8;
            rec.prediction = greedy_decode(params, ms, cap);
        } catch (const std::exception& e) {
            rec.skipped = true;
            rec.skip_reason = e.what();
        }
        records.push_back(std::move(rec));
    };

    if (task == EvalTask::extraction) {
        auto docs = read_docs_jsonl(args.corpus);
        for (const DocRecord& doc : docs) {
            auto [prompt, truth] = doc_prompt_truth(doc);
            eval_doc(doc.doc_id, doc.words, prompt, truth);
        }
    } else if (task == EvalTask::noncontextual) {
        WordFreqTable table = WordFreqTable::load(args.corpus);
        for (int i = 0; i < cfg.eval.count; ++i) {
            std::uint64_t s = tagged_rng(cfg.seed, "nc:" + std::to_string(i)).next_u64();
            auto words = gen_noncontextual(table, s, cfg.eval.min_chars, cfg.eval.max_chars);
            eval_doc(doc_name("nc_", static_cast<std::size_t>(i)), words, "read?",
                     join_words(words));
        }
    } else {
        std::string text = read_text_file(args.corpus);
        std::vector<std::string> lines;
        std::size_t pos = 0;
        while (pos <= text.size()) {
            std::size_t nl = text.find('\n', pos);
            if (nl == std::string::npos) nl = text.size();
            std::string line = trim(text.substr(pos, nl - pos));
            if (!line.empty()) lines.push_back(std::move(line));
            pos = nl + 1;
        }
        std::uint64_t s = tagged_rng(cfg.seed, "ctx").next_u64();
        auto passages = gen_contextual(lines, s, static_cast<std::size_t>(cfg.eval.count));
        for (std::size_t i = 0; i < passages.size(); ++i) {
            std::vector<std::string> words;
            std::istringstream iss(passages[i]);
            std::string w;
            while (iss >> w) words.push_back(w);
            eval_doc(doc_name("ctx_", i), words, "read?", join_words(words));
        }
    }

    ScoreSummary summary = score_answers(records, cfg.eval.policy);
    fs::path dir = args.out_dir;
    ensure_dir(dir);
    write_eval_jsonl(dir / "eval.jsonl", records, summary);

    Manifest m;
    m.config_hash = cfg.hash();
    m.inputs["params"] = file_hash_hex(args.params);
    m.inputs["corpus"] = file_hash_hex(args.corpus);
    m.outputs["eval.jsonl"] = file_hash_hex(dir / "eval.jsonl");
    write_manifest(dir, m);

    char buf[128];
    std::snprintf(buf, sizeof buf,
                  "task=%s scored=%lld skipped=%lld exact=%.4f mean_ned=%.4f\n",
                  std::string(to_string(task)).c_str(), summary.scored, summary.skipped,
                  summary.exact_rate, summary.mean_ned);
    out << buf;
}

void run_sweep(const ToolConfig& cfg, const SweepArgs& args, std::ostream& out) {
    if (cfg.eval.tokens.empty()) {
        throw ValidationError("sweep needs eval.tokens, e.g. \"12,20,30\"");
    }
    std::vector<int> token_counts;
    {
        std::string item;
        std::istringstream iss(cfg.eval.tokens);
        while (std::getline(iss, item, ',')) {
            item = trim(item);
            if (item.empty()) continue;
            try {
                token_counts.push_back(std::stoi(item));
            } catch (const std::exception&) {
                throw ValidationError("bad token count '" + item + "' in eval.tokens");
            }
        }
        if (token_counts.empty()) {
            throw ValidationError("eval.tokens lists no counts");
        }
    }

    Parameters params = load_params(args.params);
    Vocabulary vocab = Vocabulary::byte_level();
    auto docs = read_docs_jsonl(args.docs);
    if (docs.empty()) throw ValidationError("no documents in " + args.docs);

    std::vector<EvalRecord> records;
    for (const DocRecord& doc : docs) {
        auto [prompt, truth] = doc_prompt_truth(doc);
        RenderSpec spec = cfg.render;
        spec.seed = tagged_rng(cfg.seed, "color:" + doc.doc_id).next_u64();
        auto eval_fn = [&](const RenderedDoc& rd) {
            EvalRecord rec;
            rec.task = EvalTask::extraction;
            rec.sample_id = doc.doc_id;
            rec.truth = truth;
            try {
                ModelSample ms = sample_from_doc(rd, doc.doc_id, prompt, truth, params.dims);
                rec.prediction = greedy_decode(params, ms, cfg.toy.max_answer_len);
            } catch (const std::exception& e) {
                rec.skipped = true;
                rec.skip_reason = e.what();
            }
            return rec;
        };
        auto recs = resolution_sweep(doc.words, spec, vocab, token_counts, eval_fn);
        for (EvalRecord& rec : recs) {
            if (rec.sample_id.empty()) { // render failed inside the sweep
                rec.task = EvalTask::extraction;
                rec.sample_id = doc.doc_id;
                rec.truth = truth;
            }
            records.push_back(std::move(rec));
        }
    }

    ScoreSummary pooled = score_answers(records, cfg.eval.policy);
    fs::path dir = args.out_dir;
    ensure_dir(dir);
    write_eval_jsonl(dir / "sweep.jsonl", records, pooled);

    Manifest m;
    m.config_hash = cfg.hash();
    m.inputs["params"] = file_hash_hex(args.params);
    m.inputs["docs"] = file_hash_hex(args.docs);
    m.outputs["sweep.jsonl"] = file_hash_hex(dir / "sweep.jsonl");
    write_manifest(dir, m);

    char buf[96];
    for (int t : token_counts) {
        long long scored = 0, skipped = 0, exact = 0;
        std::vector<double> neds;
        for (const EvalRecord& rec : records) {
            if (rec.resolution != t) continue;
            if (rec.skipped) {
                ++skipped;
                continue;
            }
            ++scored;
            exact += rec.exact ? 1 : 0;
            neds.push_back(rec.ned_value);
        }
        double mean_ned = neds.empty() ? 0.0 : pairwise_sum(neds) / static_cast<double>(neds.size());
        double exact_rate = scored ? static_cast<double>(exact) / static_cast<double>(scored) : 0.0;
        std::snprintf(buf, sizeof buf, "tokens %4d: scored %lld skipped %lld exact %.4f ned %.4f\n",
                      t, scored, skipped, exact_rate, mean_ned);
        out << buf;
    }
}

} // namespace dvforge
