#pragma once
// Segmentation-side scoring: focal loss on probability maps against binary
// ground truth, thresholding, and the mIoU / mPA / overall-accuracy suite.

#include <cmath>
#include <stdexcept>

#include "rura/embedding.hpp"

namespace rura::segeval {

struct MaskPair {
    BinaryMask truth;
    ProbMap pred_prob;  // same shape as truth
};

struct FocalParams {
    double alpha = 0.25;  // weight on the positive class
    double gamma = 2.0;   // focusing exponent
    double clip = 1e-7;   // log-safety clamp on p
};

struct SegMetrics {
    double miou = 0.0;
    double mpa = 0.0;
    double overall_acc = 0.0;
};

// Mean over pixels of -alpha_t (1-p_t)^gamma log(p_t) with
// p_t = p on positives and 1-p on negatives, alpha_t likewise.
inline double focal_loss(const MaskPair& pair, const FocalParams& params = {}) {
    const auto& t = pair.truth;
    const auto& p = pair.pred_prob;
    if (t.height != p.height || t.width != p.width)
        throw std::invalid_argument("focal_loss: shape mismatch");
    if (!(params.alpha > 0.0 && params.alpha < 1.0))
        throw std::invalid_argument("focal_loss: alpha must be in (0,1)");
    if (!(params.gamma >= 0.0)) throw std::invalid_argument("focal_loss: gamma must be >= 0");

    const std::size_t n = t.pixels.size();
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double prob = std::min(1.0 - params.clip, std::max(params.clip, p.pixels[i]));
        const bool pos = t.pixels[i] != 0;
        const double p_t = pos ? prob : 1.0 - prob;
        const double a_t = pos ? params.alpha : 1.0 - params.alpha;
        acc += -a_t * std::pow(1.0 - p_t, params.gamma) * std::log(p_t);
    }
    return acc / static_cast<double>(n);
}

inline BinaryMask threshold(const ProbMap& pred_prob, double t = 0.5) {
    if (!(t >= 0.0 && t <= 1.0)) throw std::invalid_argument("threshold: t outside [0,1]");
    BinaryMask out;
    out.height = pred_prob.height;
    out.width = pred_prob.width;
    out.pixels.reserve(pred_prob.pixels.size());
    for (double p : pred_prob.pixels) out.pixels.push_back(p >= t ? 1 : 0);
    return out;
}

// Per-class IoU over {0,1}, averaged over classes present in the union of
// truth and pred supports; per-class pixel accuracy is class recall, averaged
// over classes present in truth.
inline SegMetrics seg_metrics(const BinaryMask& pred, const BinaryMask& truth) {
    if (pred.height != truth.height || pred.width != truth.width)
        throw std::invalid_argument("seg_metrics: shape mismatch");

    std::size_t inter[2] = {0, 0};
    std::size_t truth_count[2] = {0, 0};
    std::size_t pred_count[2] = {0, 0};
    std::size_t matches = 0;
    const std::size_t n = truth.pixels.size();
    for (std::size_t i = 0; i < n; ++i) {
        const int tc = truth.pixels[i] ? 1 : 0;
        const int pc = pred.pixels[i] ? 1 : 0;
        ++truth_count[tc];
        ++pred_count[pc];
        if (tc == pc) {
            ++inter[tc];
            ++matches;
        }
    }

    SegMetrics m;
    double iou_sum = 0.0;
    std::size_t iou_classes = 0;
    double pa_sum = 0.0;
    std::size_t pa_classes = 0;
    for (int c = 0; c < 2; ++c) {
        const std::size_t uni = truth_count[c] + pred_count[c] - inter[c];
        if (uni > 0) {
            iou_sum += static_cast<double>(inter[c]) / static_cast<double>(uni);
            ++iou_classes;
        }
        if (truth_count[c] > 0) {
            pa_sum += static_cast<double>(inter[c]) / static_cast<double>(truth_count[c]);
            ++pa_classes;
        }
    }
    m.miou = iou_sum / static_cast<double>(iou_classes);
    m.mpa = pa_sum / static_cast<double>(pa_classes);
    m.overall_acc = static_cast<double>(matches) / static_cast<double>(n);
    return m;
}

} // namespace rura::segeval
