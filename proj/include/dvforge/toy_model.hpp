#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dvforge/doc_render.hpp"
#include "dvforge/dv_loss.hpp"
#include "dvforge/label_align.hpp"
#include "dvforge/matrix.hpp"

namespace dvforge {

// Text side runs on raw bytes plus two specials.
inline constexpr int kByteBos = 256;
inline constexpr int kByteEos = 257;

struct ToyConfig {
    int d_model = 64;
    int n_layers = 2; // causal decoder blocks
    int n_heads = 4;
    int mixer_layers = 1; // bidirectional blocks over visual positions only
    int vocab_size = 258;
    int cell = 32;
    int channels = 1; // grayscale patches
    int max_seq = 128;
    std::uint64_t seed = 1;
    double learning_rate = 0.05;
    int steps = 2000;
    int batch_size = 8;
    int checkpoint_every = 50;
    int max_answer_len = 48;

    int patch_dim() const { return cell * cell * channels; }
    void validate() const;
};

// Everything the network shape depends on; persisted with the weights so a
// params file is self-describing.
struct NetDims {
    int d_model = 0;
    int n_layers = 0;
    int n_heads = 0;
    int mixer_layers = 0;
    int vocab_size = 0;
    int max_seq = 0;
    int cell = 0;
    int channels = 0;

    static NetDims of(const ToyConfig& cfg);
    int patch_dim() const { return cell * cell * channels; }
    int head_dim() const { return d_model / n_heads; }
    bool operator==(const NetDims&) const = default;
};

// One pre-norm transformer block: x += attn(norm(x)); x += mlp(norm(x)).
struct Block {
    Matrix ln1_gain; // 1 x d
    Matrix wq, wk, wv, wo; // d x d, bias-free
    Matrix ln2_gain; // 1 x d
    Matrix w1; // d x 4d
    Matrix w2; // 4d x d
};

struct Parameters {
    NetDims dims;
    Matrix token_embed; // vocab x d
    Matrix pos_embed;   // max_seq x d
    Matrix patch_w;     // patch_dim x d
    Matrix patch_b;     // 1 x d (the only bias in the net)
    std::vector<Block> mixer;
    std::vector<Block> decoder;
    Matrix final_gain; // 1 x d
    Matrix unembed;    // d x vocab

    static Parameters init(const ToyConfig& cfg);
    static Parameters zeros_like(const Parameters& p);

    // Fixed enumeration order; init, SGD, serialization and the
    // finite-difference walker all rely on it.
    template <typename Fn> void for_each_tensor(Fn&& fn) {
        fn("token_embed", token_embed);
        fn("pos_embed", pos_embed);
        fn("patch_w", patch_w);
        fn("patch_b", patch_b);
        auto blocks = [&](std::vector<Block>& bs, const std::string& prefix) {
            for (std::size_t i = 0; i < bs.size(); ++i) {
                std::string base = prefix + std::to_string(i) + ".";
                fn(base + "ln1_gain", bs[i].ln1_gain);
                fn(base + "wq", bs[i].wq);
                fn(base + "wk", bs[i].wk);
                fn(base + "wv", bs[i].wv);
                fn(base + "wo", bs[i].wo);
                fn(base + "ln2_gain", bs[i].ln2_gain);
                fn(base + "w1", bs[i].w1);
                fn(base + "w2", bs[i].w2);
            }
        };
        blocks(mixer, "mixer.");
        blocks(decoder, "decoder.");
        fn("final_gain", final_gain);
        fn("unembed", unembed);
    }
    template <typename Fn> void for_each_tensor(Fn&& fn) const {
        const_cast<Parameters*>(this)->for_each_tensor(
            [&](const std::string& name, Matrix& m) { fn(name, static_cast<const Matrix&>(m)); });
    }

    // w += factor * g over every tensor; the SGD step is factor = -lr.
    void scale_add(const Parameters& g, double factor);
    void zero_all();
    std::size_t scalar_count() const;
};

// One training/eval sample in network terms: patch vectors plus the byte-level
// text ids, with per-position supervision layout. Text input is
// [BOS, prompt bytes, answer bytes]; EOS appears only as the final target.
struct ModelSample {
    std::string sample_id;
    Matrix patches; // m x patch_dim, values in [0, 1]
    std::vector<int> text_ids;
    std::vector<PositionKind> kinds;   // length m + text_ids
    std::vector<int> targets;          // same length, kNoTarget where unsupervised
    std::vector<int> vision_label_set; // sorted distinct first-token ids
    int prompt_len = 0;                // bytes
    std::string answer;

    int visual_len() const { return patches.rows; }
    int total_len() const { return patches.rows + static_cast<int>(text_ids.size()); }
    // Positions the decoder sees when generating: visual + BOS + prompt.
    int context_len() const { return visual_len() + 1 + prompt_len; }
};

Matrix patches_of(const Image& img, const PatchGrid& grid, const NetDims& dims);
ModelSample build_sample(const LabeledSample& sample, const Image& img, const NetDims& dims);

struct BlockCache {
    Matrix x_in, n1, q, k, v;
    std::vector<double> inv1, inv2; // per-row 1/rms
    Matrix att;                     // (heads * T) x T softmax rows
    Matrix mix;                     // T x d concatenated head mixes
    Matrix x_mid, n2, h_pre, h_act;
};

struct ForwardCache {
    Matrix embedded; // T x d after patch/token embedding + positions
    std::vector<BlockCache> mixer, decoder;
    Matrix final_in, final_normed;
    std::vector<double> final_inv;
};

// Logits at every position. cache may be null when only logits are needed.
Matrix forward(const Parameters& p, const ModelSample& s, ForwardCache* cache);

// Accumulates parameter gradients for d(loss)/d(logits) into grad.
void backward(const Parameters& p, const ModelSample& s, const ForwardCache& cache,
              const Matrix& dlogits, Parameters& grad);

// Supervision view of a sample with its logits attached.
SequenceBatch batch_of(const ModelSample& s, Matrix logits);

struct CheckpointRecord {
    int step = 0;
    double text_loss = 0.0;
    double vision_loss = 0.0;
    double val_extraction = 0.0;
    double vision_top1 = 0.0;
};

struct TrainReport {
    std::vector<CheckpointRecord> checkpoints;
    bool diverged = false;
    int diverged_step = 0;
};

struct TrainResult {
    Parameters params;
    TrainReport report;
};

TrainResult train(const ToyConfig& cfg, const LossConfig& loss_cfg,
                  const std::vector<ModelSample>& train_set,
                  const std::vector<ModelSample>& val_set);

// Greedy byte-level decode from the sample's visual+prompt context.
std::string greedy_decode(const Parameters& p, const ModelSample& s, int max_len);

// Exact-match accuracy of greedy decodes against sample answers.
double evaluate_extraction(const Parameters& p, std::span<const ModelSample> samples,
                           int max_len);

// Fraction of labeled visual positions whose top-1 logit is the label id.
double vision_label_top1(const Parameters& p, std::span<const ModelSample> samples);

// Top-k ids per visual position, highest logit first (ties by id).
std::vector<std::vector<int>> probe_visual_logits(const Parameters& p, const ModelSample& s,
                                                  int k);

void save_params(const std::filesystem::path& path, const Parameters& p,
                 std::uint64_t config_hash);
Parameters load_params(const std::filesystem::path& path, std::uint64_t* config_hash = nullptr);

} // namespace dvforge
