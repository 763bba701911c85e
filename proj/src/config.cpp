#include "dvforge/config.hpp"

#include <cctype>
#include <charconv>
#include <cstdio>
#include <sstream>
#include <vector>

#include "dvforge/util.hpp"

namespace dvforge {
namespace {

struct KeyRef {
    std::string section;
    std::string key;
    std::string value;
    int line = 0;
};

[[noreturn]] void bad(const std::string& context, int line, const std::string& what) {
    throw ValidationError(context + ":" + std::to_string(line) + ": " + what);
}

std::vector<KeyRef> parse_ini(std::string_view text, const std::string& context) {
    std::vector<KeyRef> out;
    std::string section;
    int line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        std::string line = trim(std::string(text.substr(pos, nl - pos)));
        pos = nl + 1;
        ++line_no;
        if (line.empty() || line[0] == '#' || line[0] == ';') continue;
        if (line.front() == '[') {
            if (line.back() != ']' || line.size() < 3)
                bad(context, line_no, "malformed section header '" + line + "'");
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            bad(context, line_no, "expected key = value, got '" + line + "'");
        KeyRef ref;
        ref.section = section;
        ref.key = trim(line.substr(0, eq));
        ref.value = trim(line.substr(eq + 1));
        ref.line = line_no;
        if (ref.key.empty()) bad(context, line_no, "empty key");
        out.push_back(std::move(ref));
    }
    return out;
}

long long parse_int(const KeyRef& ref, const std::string& context) {
    long long v = 0;
    const char* first = ref.value.data();
    const char* last = first + ref.value.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last)
        bad(context, ref.line, "key '" + ref.key + "' expects an integer, got '" + ref.value + "'");
    return v;
}

double parse_double(const KeyRef& ref, const std::string& context) {
    try {
        std::size_t used = 0;
        double v = std::stod(ref.value, &used);
        if (used != ref.value.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        bad(context, ref.line, "key '" + ref.key + "' expects a number, got '" + ref.value + "'");
    }
}

bool parse_bool(const KeyRef& ref, const std::string& context) {
    if (ref.value == "true") return true;
    if (ref.value == "false") return false;
    bad(context, ref.line, "key '" + ref.key + "' expects true or false, got '" + ref.value + "'");
}

int hex_nibble(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
}

Rgb parse_color(const KeyRef& ref, const std::string& context) {
    const std::string& v = ref.value;
    if (v.size() != 7 || v[0] != '#')
        bad(context, ref.line, "key '" + ref.key + "' expects #rrggbb, got '" + v + "'");
    std::uint8_t ch[3];
    for (int i = 0; i < 3; ++i) {
        int hi = hex_nibble(v[1 + 2 * i]);
        int lo = hex_nibble(v[2 + 2 * i]);
        if (hi < 0 || lo < 0)
            bad(context, ref.line, "key '" + ref.key + "' expects #rrggbb, got '" + v + "'");
        ch[i] = static_cast<std::uint8_t>(hi * 16 + lo);
    }
    return Rgb{ch[0], ch[1], ch[2]};
}

std::string color_text(Rgb c) {
    char buf[8];
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", c.r, c.g, c.b);
    return buf;
}

std::string double_text(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace

void SynthConfig::validate() const {
    if (docs < 1) throw ValidationError("synth.docs must be at least 1");
    if (words_min < 1 || words_max < words_min)
        throw ValidationError("synth.words_min/words_max must satisfy 1 <= min <= max");
    if (qa_first < 0 || qa_last < 0 || qa_after < 0 || qa_first + qa_last + qa_after != 100)
        throw ValidationError("synth question percentages must be non-negative and sum to 100");
}

void AlignConfig::validate() const {
    if (qa_per_image < 0) throw ValidationError("align.qa_per_image must be non-negative");
    if (instruction == "none" || instruction == "random") return;
    for (char c : instruction)
        if (!std::isdigit(static_cast<unsigned char>(c)))
            throw ValidationError("align.instruction must be none, random, or a list index");
    std::size_t idx = std::stoul(instruction);
    if (idx >= instruction_list().size())
        throw ValidationError("align.instruction index " + instruction + " out of range");
}

void EvalConfig::validate() const {
    if (min_chars < 1 || max_chars < min_chars)
        throw ValidationError("eval.min_chars/max_chars must satisfy 1 <= min <= max");
    if (count < 1) throw ValidationError("eval.count must be at least 1");
}

ToolConfig ToolConfig::load(const std::string& path) {
    return from_text(read_text_file(path), path);
}

ToolConfig ToolConfig::from_text(std::string_view text, const std::string& context) {
    ToolConfig cfg;
    for (const KeyRef& ref : parse_ini(text, context)) {
        const std::string& s = ref.section;
        const std::string& k = ref.key;
        if (s == "run") {
            if (k == "seed") cfg.seed = static_cast<std::uint64_t>(parse_int(ref, context));
            else if (k == "workers") cfg.workers = static_cast<int>(parse_int(ref, context));
            else bad(context, ref.line, "unknown key 'run." + k + "'");
        } else if (s == "grid") {
            if (k == "cell") cfg.grid.cell = static_cast<int>(parse_int(ref, context));
            else if (k == "min_pixels") cfg.grid.min_pixels = parse_int(ref, context);
            else if (k == "max_pixels") cfg.grid.max_pixels = parse_int(ref, context);
            else bad(context, ref.line, "unknown key 'grid." + k + "'");
        } else if (s == "render") {
            if (k == "rows") cfg.render.rows = static_cast<int>(parse_int(ref, context));
            else if (k == "cols") cfg.render.cols = static_cast<int>(parse_int(ref, context));
            else if (k == "glyph_scale") cfg.render.glyph_scale = static_cast<int>(parse_int(ref, context));
            else if (k == "margin_cells") cfg.render.margin_cells = static_cast<int>(parse_int(ref, context));
            else if (k == "auto_colors") cfg.render.auto_colors = parse_bool(ref, context);
            else if (k == "fg") cfg.render.fg = parse_color(ref, context);
            else if (k == "bg") cfg.render.bg = parse_color(ref, context);
            else bad(context, ref.line, "unknown key 'render." + k + "'");
        } else if (s == "loss") {
            if (k == "beta") cfg.loss.beta = parse_double(ref, context);
            else if (k == "lambda") cfg.loss.lambda = parse_double(ref, context);
            else if (k == "vision_denominator") {
                if (ref.value == "labeled_count") cfg.loss.vision_denominator = LossConfig::VisionDenominator::labeled_count;
                else if (ref.value == "all_visual") cfg.loss.vision_denominator = LossConfig::VisionDenominator::all_visual;
                else bad(context, ref.line, "vision_denominator must be labeled_count or all_visual");
            } else bad(context, ref.line, "unknown key 'loss." + k + "'");
        } else if (s == "toy") {
            if (k == "d_model") cfg.toy.d_model = static_cast<int>(parse_int(ref, context));
            else if (k == "n_layers") cfg.toy.n_layers = static_cast<int>(parse_int(ref, context));
            else if (k == "n_heads") cfg.toy.n_heads = static_cast<int>(parse_int(ref, context));
            else if (k == "mixer_layers") cfg.toy.mixer_layers = static_cast<int>(parse_int(ref, context));
            else if (k == "vocab_size") cfg.toy.vocab_size = static_cast<int>(parse_int(ref, context));
            else if (k == "channels") cfg.toy.channels = static_cast<int>(parse_int(ref, context));
            else if (k == "max_seq") cfg.toy.max_seq = static_cast<int>(parse_int(ref, context));
            else if (k == "learning_rate") cfg.toy.learning_rate = parse_double(ref, context);
            else if (k == "steps") cfg.toy.steps = static_cast<int>(parse_int(ref, context));
            else if (k == "batch_size") cfg.toy.batch_size = static_cast<int>(parse_int(ref, context));
            else if (k == "checkpoint_every") cfg.toy.checkpoint_every = static_cast<int>(parse_int(ref, context));
            else if (k == "max_answer_len") cfg.toy.max_answer_len = static_cast<int>(parse_int(ref, context));
            else if (k == "val_fraction") cfg.val_fraction = parse_double(ref, context);
            else bad(context, ref.line, "unknown key 'toy." + k + "'");
        } else if (s == "synth") {
            if (k == "docs") cfg.synth.docs = static_cast<int>(parse_int(ref, context));
            else if (k == "words_min") cfg.synth.words_min = static_cast<int>(parse_int(ref, context));
            else if (k == "words_max") cfg.synth.words_max = static_cast<int>(parse_int(ref, context));
            else if (k == "wordlist") cfg.synth.wordlist = ref.value;
            else if (k == "qa_first") cfg.synth.qa_first = static_cast<int>(parse_int(ref, context));
            else if (k == "qa_last") cfg.synth.qa_last = static_cast<int>(parse_int(ref, context));
            else if (k == "qa_after") cfg.synth.qa_after = static_cast<int>(parse_int(ref, context));
            else bad(context, ref.line, "unknown key 'synth." + k + "'");
        } else if (s == "align") {
            if (k == "qa_per_image") cfg.align.qa_per_image = static_cast<int>(parse_int(ref, context));
            else if (k == "instruction") cfg.align.instruction = ref.value;
            else bad(context, ref.line, "unknown key 'align." + k + "'");
        } else if (s == "eval") {
            if (k == "lowercase") cfg.eval.policy.lowercase = parse_bool(ref, context);
            else if (k == "strip") cfg.eval.policy.strip = parse_bool(ref, context);
            else if (k == "contains") cfg.eval.policy.contains = parse_bool(ref, context);
            else if (k == "min_chars") cfg.eval.min_chars = static_cast<int>(parse_int(ref, context));
            else if (k == "max_chars") cfg.eval.max_chars = static_cast<int>(parse_int(ref, context));
            else if (k == "count") cfg.eval.count = static_cast<int>(parse_int(ref, context));
            else if (k == "tokens") cfg.eval.tokens = ref.value;
            else bad(context, ref.line, "unknown key 'eval." + k + "'");
        } else {
            bad(context, ref.line, "unknown section '[" + s + "]'");
        }
    }
    // The run seed drives every derived stream; components carry copies.
    cfg.render.cell = cfg.grid.cell;
    cfg.render.seed = cfg.seed;
    cfg.toy.cell = cfg.grid.cell;
    cfg.toy.seed = cfg.seed;
    cfg.validate();
    return cfg;
}

void ToolConfig::validate() const {
    if (workers < 1) throw ValidationError("run.workers must be at least 1");
    if (!(val_fraction > 0.0 && val_fraction < 1.0))
        throw ValidationError("toy.val_fraction must lie in (0, 1)");
    grid.validate();
    render.validate();
    try {
        loss.validate(); // throws invalid_argument; config typos are user errors
    } catch (const std::invalid_argument& e) {
        throw ValidationError(std::string("loss: ") + e.what());
    }
    toy.validate();
    synth.validate();
    align.validate();
    eval.validate();
}

std::string ToolConfig::canonical_text() const {
    std::ostringstream o;
    o << "[run]\n";
    o << "seed = " << seed << "\n";
    o << "workers = " << workers << "\n";
    o << "[grid]\n";
    o << "cell = " << grid.cell << "\n";
    o << "min_pixels = " << grid.min_pixels << "\n";
    o << "max_pixels = " << grid.max_pixels << "\n";
    o << "[render]\n";
    o << "rows = " << render.rows << "\n";
    o << "cols = " << render.cols << "\n";
    o << "glyph_scale = " << render.glyph_scale << "\n";
    o << "margin_cells = " << render.margin_cells << "\n";
    o << "auto_colors = " << (render.auto_colors ? "true" : "false") << "\n";
    o << "fg = " << color_text(render.fg) << "\n";
    o << "bg = " << color_text(render.bg) << "\n";
    o << "[loss]\n";
    o << "beta = " << double_text(loss.beta) << "\n";
    o << "lambda = " << double_text(loss.lambda) << "\n";
    o << "vision_denominator = "
      << (loss.vision_denominator == LossConfig::VisionDenominator::labeled_count ? "labeled_count" : "all_visual") << "\n";
    o << "[toy]\n";
    o << "d_model = " << toy.d_model << "\n";
    o << "n_layers = " << toy.n_layers << "\n";
    o << "n_heads = " << toy.n_heads << "\n";
    o << "mixer_layers = " << toy.mixer_layers << "\n";
    o << "vocab_size = " << toy.vocab_size << "\n";
    o << "channels = " << toy.channels << "\n";
    o << "max_seq = " << toy.max_seq << "\n";
    o << "learning_rate = " << double_text(toy.learning_rate) << "\n";
    o << "steps = " << toy.steps << "\n";
    o << "batch_size = " << toy.batch_size << "\n";
    o << "checkpoint_every = " << toy.checkpoint_every << "\n";
    o << "max_answer_len = " << toy.max_answer_len << "\n";
    o << "val_fraction = " << double_text(val_fraction) << "\n";
    o << "[synth]\n";
    o << "docs = " << synth.docs << "\n";
    o << "words_min = " << synth.words_min << "\n";
    o << "words_max = " << synth.words_max << "\n";
    o << "wordlist = " << synth.wordlist << "\n";
    o << "qa_first = " << synth.qa_first << "\n";
    o << "qa_last = " << synth.qa_last << "\n";
    o << "qa_after = " << synth.qa_after << "\n";
    o << "[align]\n";
    o << "qa_per_image = " << align.qa_per_image << "\n";
    o << "instruction = " << align.instruction << "\n";
    o << "[eval]\n";
    o << "lowercase = " << (eval.policy.lowercase ? "true" : "false") << "\n";
    o << "strip = " << (eval.policy.strip ? "true" : "false") << "\n";
    o << "contains = " << (eval.policy.contains ? "true" : "false") << "\n";
    o << "min_chars = " << eval.min_chars << "\n";
    o << "max_chars = " << eval.max_chars << "\n";
    o << "count = " << eval.count << "\n";
    o << "tokens = " << eval.tokens << "\n";
    return o.str();
}

std::uint64_t ToolConfig::hash() const {
    std::string text = canonical_text();
    return fnv1a64(text.data(), text.size());
}

const std::vector<std::string>& instruction_list() {
    static const std::vector<std::string> list = {
        "Answer the question using a single word or phrase.",
        "Reply with only the requested word.",
        "Give the shortest exact answer.",
        "Respond with the answer text alone.",
    };
    return list;
}

} // namespace dvforge
