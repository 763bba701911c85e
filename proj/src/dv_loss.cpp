#include "dvforge/dv_loss.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace dvforge {

namespace {

bool is_labeled_visual(const SequenceBatch& batch, int i) {
    return batch.kinds[static_cast<std::size_t>(i)] == PositionKind::visual &&
           batch.targets[static_cast<std::size_t>(i)] != kNoTarget;
}

double vision_denominator(const SequenceBatch& batch, const LossConfig& cfg) {
    if (cfg.vision_denominator == LossConfig::VisionDenominator::all_visual) {
        return static_cast<double>(batch.count(PositionKind::visual));
    }
    return static_cast<double>(batch.labeled_visual_count());
}

} // namespace

void SequenceBatch::validate() const {
    auto n = kinds.size();
    if (targets.size() != n || static_cast<std::size_t>(logits.rows) != n) {
        throw std::invalid_argument("batch kinds/targets/logits lengths disagree");
    }
    if (logits.cols < 1) {
        throw std::invalid_argument("batch logits need at least one column");
    }
    bool any_visual_target = false;
    for (std::size_t i = 0; i < n; ++i) {
        int t = targets[i];
        switch (kinds[i]) {
        case PositionKind::prompt:
            if (t != kNoTarget) {
                throw std::invalid_argument("prompt position " + std::to_string(i) +
                                            " carries a target");
            }
            break;
        case PositionKind::response:
            if (t < 0 || t >= logits.cols) {
                throw std::invalid_argument("response position " + std::to_string(i) +
                                            " lacks a valid target");
            }
            break;
        case PositionKind::visual:
            if (t != kNoTarget) {
                if (t < 0 || t >= logits.cols) {
                    throw std::invalid_argument("visual target out of vocab range at position " +
                                                std::to_string(i));
                }
                if (std::find(vision_label_set.begin(), vision_label_set.end(), t) ==
                    vision_label_set.end()) {
                    throw std::invalid_argument("visual target at position " + std::to_string(i) +
                                                " missing from the label set");
                }
                any_visual_target = true;
            }
            break;
        }
    }
    if (any_visual_target && vision_label_set.empty()) {
        throw std::invalid_argument("labeled visual positions but empty label set");
    }
    for (std::size_t i = 0; i < vision_label_set.size(); ++i) {
        int id = vision_label_set[i];
        if (id < 0 || id >= logits.cols) {
            throw std::invalid_argument("label set id out of vocab range");
        }
        if (i > 0 && vision_label_set[i - 1] >= id) {
            throw std::invalid_argument("label set must be strictly increasing");
        }
    }
}

int SequenceBatch::count(PositionKind kind) const {
    int c = 0;
    for (PositionKind k : kinds) {
        if (k == kind) {
            ++c;
        }
    }
    return c;
}

int SequenceBatch::labeled_visual_count() const {
    int c = 0;
    for (std::size_t i = 0; i < kinds.size(); ++i) {
        if (kinds[i] == PositionKind::visual && targets[i] != kNoTarget) {
            ++c;
        }
    }
    return c;
}

void LossConfig::validate() const {
    if (!(beta >= 0.0 && beta < 1.0)) {
        throw std::invalid_argument("beta must lie in [0, 1)");
    }
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
        throw std::invalid_argument("lambda must be finite and >= 0");
    }
}

std::vector<double> log_softmax(std::span<const double> logits) {
    if (logits.empty()) {
        throw std::invalid_argument("log_softmax of empty vector");
    }
    double max = logits[0];
    for (double v : logits) {
        if (!std::isfinite(v)) {
            throw std::invalid_argument("log_softmax input must be finite");
        }
        max = std::max(max, v);
    }
    std::vector<double> shifted(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) {
        shifted[i] = std::exp(logits[i] - max);
    }
    double z = pairwise_sum(shifted);
    double log_z = std::log(z);
    std::vector<double> out(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = logits[i] - max - log_z;
    }
    return out;
}

double text_loss(const SequenceBatch& batch) {
    batch.validate();
    std::vector<double> terms;
    for (std::size_t i = 0; i < batch.kinds.size(); ++i) {
        if (batch.kinds[i] != PositionKind::response) {
            continue;
        }
        auto lsm = log_softmax(batch.logits.row_span(static_cast<int>(i)));
        terms.push_back(-lsm[static_cast<std::size_t>(batch.targets[i])]);
    }
    if (terms.empty()) {
        throw std::invalid_argument("text_loss needs at least one response position");
    }
    return pairwise_sum(terms) / static_cast<double>(terms.size());
}

std::vector<std::pair<int, double>> smoothing_weights(int target_id,
                                                      const std::vector<int>& label_set,
                                                      double beta) {
    if (!(beta >= 0.0 && beta < 1.0)) {
        throw std::invalid_argument("beta must lie in [0, 1)");
    }
    if (std::find(label_set.begin(), label_set.end(), target_id) == label_set.end()) {
        throw std::invalid_argument("smoothing target id " + std::to_string(target_id) +
                                    " is not in the label set");
    }
    std::vector<std::pair<int, double>> weights;
    weights.reserve(label_set.size());
    if (label_set.size() == 1) {
        weights.emplace_back(target_id, 1.0);
        return weights;
    }
    double other = beta / static_cast<double>(label_set.size() - 1);
    for (int id : label_set) {
        weights.emplace_back(id, id == target_id ? 1.0 - beta : other);
    }
    return weights;
}

double vision_loss(const SequenceBatch& batch, const LossConfig& cfg) {
    batch.validate();
    cfg.validate();
    std::vector<double> terms;
    for (std::size_t i = 0; i < batch.kinds.size(); ++i) {
        if (!is_labeled_visual(batch, static_cast<int>(i))) {
            continue;
        }
        auto lsm = log_softmax(batch.logits.row_span(static_cast<int>(i)));
        auto weights = smoothing_weights(batch.targets[i], batch.vision_label_set, cfg.beta);
        std::vector<double> parts;
        parts.reserve(weights.size());
        for (auto [id, w] : weights) {
            parts.push_back(-w * lsm[static_cast<std::size_t>(id)]);
        }
        terms.push_back(pairwise_sum(parts));
    }
    if (terms.empty()) {
        throw std::invalid_argument("vision_loss needs at least one labeled visual position");
    }
    return pairwise_sum(terms) / vision_denominator(batch, cfg);
}

LossBreakdown combined_loss(const SequenceBatch& batch, const LossConfig& cfg) {
    batch.validate();
    cfg.validate();
    LossBreakdown out;
    out.response_positions = batch.count(PositionKind::response);
    out.visual_positions = batch.count(PositionKind::visual);
    out.labeled_visual_positions = batch.labeled_visual_count();
    out.text = text_loss(batch);
    out.vision = out.labeled_visual_positions > 0 ? vision_loss(batch, cfg) : 0.0;
    out.total = out.text + cfg.lambda * out.vision;
    return out;
}

Matrix loss_gradient(const SequenceBatch& batch, const LossConfig& cfg) {
    batch.validate();
    cfg.validate();
    int n_response = batch.count(PositionKind::response);
    if (n_response == 0) {
        throw std::invalid_argument("loss gradient needs at least one response position");
    }
    int n_labeled = batch.labeled_visual_count();
    double vis_denom = n_labeled > 0 ? vision_denominator(batch, cfg) : 1.0;
    Matrix grad(batch.logits.rows, batch.logits.cols);
    for (int i = 0; i < batch.logits.rows; ++i) {
        bool response = batch.kinds[static_cast<std::size_t>(i)] == PositionKind::response;
        bool labeled = is_labeled_visual(batch, i);
        if (!response && !labeled) {
            continue;
        }
        auto lsm = log_softmax(batch.logits.row_span(i));
        double* g = grad.row(i);
        if (response) {
            double scale = 1.0 / static_cast<double>(n_response);
            for (int j = 0; j < grad.cols; ++j) {
                g[j] = scale * std::exp(lsm[static_cast<std::size_t>(j)]);
            }
            g[batch.targets[static_cast<std::size_t>(i)]] -= scale;
        } else {
            double scale = cfg.lambda / vis_denom;
            for (int j = 0; j < grad.cols; ++j) {
                g[j] = scale * std::exp(lsm[static_cast<std::size_t>(j)]);
            }
            auto weights = smoothing_weights(batch.targets[static_cast<std::size_t>(i)],
                                             batch.vision_label_set, cfg.beta);
            for (auto [id, w] : weights) {
                g[id] -= scale * w;
            }
        }
    }
    return grad;
}

} // namespace dvforge
