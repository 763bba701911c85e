#include "dvforge/eval_harness.hpp"

#include <algorithm>
#include <sstream>

#include "dvforge/matrix.hpp"
#include "dvforge/rng.hpp"
#include "dvforge/util.hpp"

namespace dvforge {

int edit_distance(std::string_view a, std::string_view b) {
    if (a.size() > b.size()) {
        std::swap(a, b); // keep the rows short
    }
    std::vector<int> prev(a.size() + 1);
    std::vector<int> cur(a.size() + 1);
    for (std::size_t i = 0; i <= a.size(); ++i) {
        prev[i] = static_cast<int>(i);
    }
    for (std::size_t j = 1; j <= b.size(); ++j) {
        cur[0] = static_cast<int>(j);
        for (std::size_t i = 1; i <= a.size(); ++i) {
            int sub = prev[i - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            cur[i] = std::min({prev[i] + 1, cur[i - 1] + 1, sub});
        }
        std::swap(prev, cur);
    }
    return prev[a.size()];
}

double ned(std::string_view pred, std::string_view truth) {
    std::size_t denom = std::max(pred.size(), truth.size());
    if (denom == 0) {
        return 0.0;
    }
    return static_cast<double>(edit_distance(pred, truth)) / static_cast<double>(denom);
}

WordFreqTable WordFreqTable::load(const std::filesystem::path& path) {
    std::string text = read_text_file(path);
    WordFreqTable table;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty() || line[0] == '#') {
            continue;
        }
        auto tab = line.find('\t');
        if (tab == std::string::npos || tab == 0) {
            throw ValidationError(path.string() + ":" + std::to_string(line_no) +
                                  ": expected word<TAB>frequency");
        }
        std::string word = line.substr(0, tab);
        double freq = 0.0;
        try {
            std::size_t pos = 0;
            freq = std::stod(line.substr(tab + 1), &pos);
            if (pos != line.size() - tab - 1) {
                throw std::invalid_argument("trailing bytes");
            }
        } catch (const std::exception&) {
            throw ValidationError(path.string() + ":" + std::to_string(line_no) +
                                  ": bad frequency value");
        }
        if (!(freq > 0.0)) {
            throw ValidationError(path.string() + ":" + std::to_string(line_no) +
                                  ": frequency must be positive");
        }
        if (std::find(table.words.begin(), table.words.end(), word) != table.words.end()) {
            throw ValidationError(path.string() + ":" + std::to_string(line_no) +
                                  ": duplicate word \"" + word + "\"");
        }
        table.words.push_back(std::move(word));
        table.weights.push_back(freq);
    }
    table.validate();
    return table;
}

void WordFreqTable::validate() const {
    if (words.empty()) {
        throw ValidationError("word frequency table is empty");
    }
    if (words.size() != weights.size()) {
        throw ValidationError("word frequency table rows disagree");
    }
}

namespace {

std::size_t sample_index(const std::vector<double>& cumulative, double u) {
    double target = u * cumulative.back();
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), target);
    if (it == cumulative.end()) {
        --it;
    }
    return static_cast<std::size_t>(it - cumulative.begin());
}

} // namespace

std::vector<std::string> gen_noncontextual(const WordFreqTable& table, std::uint64_t seed,
                                           int min_chars, int max_chars) {
    table.validate();
    if (min_chars < 1 || max_chars < min_chars) {
        throw ValidationError("need 1 <= min_chars <= max_chars");
    }
    std::vector<double> cumulative(table.weights.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < table.weights.size(); ++i) {
        acc += table.weights[i];
        cumulative[i] = acc;
    }
    Rng rng(seed);
    std::vector<std::string> out;
    int chars = 0;
    while (chars < min_chars) {
        const std::string& word = table.words[sample_index(cumulative, rng.next_unit())];
        int need = static_cast<int>(word.size()) + (out.empty() ? 0 : 1);
        if (chars + need > max_chars) {
            break; // whole-word truncation at the cap
        }
        out.push_back(word);
        chars += need;
    }
    return out;
}

std::vector<std::string> gen_contextual(const std::vector<std::string>& corpus_lines,
                                        std::uint64_t seed, std::size_t count) {
    if (corpus_lines.empty()) {
        throw ValidationError("contextual corpus is empty");
    }
    if (count > corpus_lines.size()) {
        throw ValidationError("asked for " + std::to_string(count) + " passages but corpus has " +
                              std::to_string(corpus_lines.size()));
    }
    std::vector<std::size_t> order(corpus_lines.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        order[i] = i;
    }
    Rng rng(seed);
    for (std::size_t i = order.size(); i > 1; --i) {
        std::swap(order[i - 1], order[rng.next_below(i)]);
    }
    std::vector<std::string> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        out.push_back(corpus_lines[order[i]]);
    }
    return out;
}

std::string_view to_string(EvalTask t) {
    switch (t) {
    case EvalTask::contextual: return "contextual";
    case EvalTask::noncontextual: return "noncontextual";
    case EvalTask::extraction: return "extraction";
    }
    return "?";
}

EvalTask eval_task_from(std::string_view s) {
    if (s == "contextual") {
        return EvalTask::contextual;
    }
    if (s == "noncontextual") {
        return EvalTask::noncontextual;
    }
    if (s == "extraction") {
        return EvalTask::extraction;
    }
    throw ValidationError("unknown eval task \"" + std::string(s) +
                          "\"; expected contextual, noncontextual or extraction");
}

ScoreSummary score_answers(std::vector<EvalRecord>& records, const ScorePolicy& policy) {
    ScoreSummary summary;
    std::vector<double> neds;
    for (EvalRecord& rec : records) {
        if (rec.skipped) {
            ++summary.skipped;
            continue;
        }
        std::string pred = trim(rec.prediction);
        std::string truth = trim(rec.truth);
        rec.ned_value = ned(pred, truth);
        std::string np = policy.strip ? pred : rec.prediction;
        std::string nt = policy.strip ? truth : rec.truth;
        if (policy.lowercase) {
            np = lowercase(np);
            nt = lowercase(nt);
        }
        rec.exact = policy.contains ? (!nt.empty() && np.find(nt) != std::string::npos)
                                    : np == nt;
        neds.push_back(rec.ned_value);
        if (rec.exact) {
            summary.exact_rate += 1.0;
        }
        ++summary.scored;
    }
    if (summary.scored > 0) {
        summary.mean_ned = pairwise_sum(neds) / static_cast<double>(summary.scored);
        summary.exact_rate /= static_cast<double>(summary.scored);
    }
    return summary;
}

std::vector<EvalRecord> resolution_sweep(
    const std::vector<std::string>& doc_words, const RenderSpec& spec, const Vocabulary& vocab,
    const std::vector<int>& token_counts,
    const std::function<EvalRecord(const RenderedDoc&)>& eval_fn) {
    std::vector<EvalRecord> records;
    for (int tokens : token_counts) {
        if (tokens < 1) {
            throw ValidationError("token counts must be positive");
        }
        GridConfig budget;
        budget.cell = spec.cell;
        budget.min_pixels = static_cast<long long>(tokens) * spec.cell * spec.cell;
        budget.max_pixels = budget.min_pixels;
        RenderSpec at = spec;
        at.rows = 0;
        at.cols = 0;
        try {
            RenderedDoc doc = render_document(doc_words, at, budget, vocab);
            EvalRecord rec = eval_fn(doc);
            rec.resolution = tokens;
            records.push_back(std::move(rec));
        } catch (const std::exception& e) {
            EvalRecord rec;
            rec.resolution = tokens;
            rec.skipped = true;
            rec.skip_reason = e.what();
            records.push_back(std::move(rec));
        }
    }
    return records;
}

} // namespace dvforge
