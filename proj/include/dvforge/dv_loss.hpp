#pragma once

#include <span>
#include <utility>
#include <vector>

#include "dvforge/matrix.hpp"

namespace dvforge {

enum class PositionKind { visual, prompt, response };

inline constexpr int kNoTarget = -1;

// Per-position logits plus the supervision layout of one sample: response
// positions carry next-text-token targets, labeled visual positions carry the
// first token id of their vision label, everything else is unsupervised.
struct SequenceBatch {
    std::vector<PositionKind> kinds;
    std::vector<int> targets; // kNoTarget where unsupervised
    Matrix logits;            // one row per position
    std::vector<int> vision_label_set; // distinct first-token ids present in the image

    void validate() const;
    int count(PositionKind kind) const;
    int labeled_visual_count() const;
};

struct LossConfig {
    enum class VisionDenominator { labeled_count, all_visual };

    double beta = 0.3;
    double lambda = 2e-3;
    // labeled_count divides by the number of supervised visual positions;
    // all_visual divides by every visual position, so sparse labels shrink
    // the per-image loss with coverage.
    VisionDenominator vision_denominator = VisionDenominator::labeled_count;

    void validate() const;
};

std::vector<double> log_softmax(std::span<const double> logits);

// Mean CE over response positions.
double text_loss(const SequenceBatch& batch);

// Target distribution over the image's label set: 1-beta on the position's own
// label, beta/(|set|-1) on each other label. Returned in label-set order.
std::vector<std::pair<int, double>> smoothing_weights(int target_id,
                                                      const std::vector<int>& label_set,
                                                      double beta);

double vision_loss(const SequenceBatch& batch, const LossConfig& cfg);

struct LossBreakdown {
    double total = 0.0;
    double text = 0.0;
    double vision = 0.0;
    int response_positions = 0;
    int visual_positions = 0;
    int labeled_visual_positions = 0;
};

// total = text + lambda * vision; vision is 0 when no visual position is
// labeled.
LossBreakdown combined_loss(const SequenceBatch& batch, const LossConfig& cfg);

// d(total)/d(logits), same shape as batch.logits.
Matrix loss_gradient(const SequenceBatch& batch, const LossConfig& cfg);

} // namespace dvforge
