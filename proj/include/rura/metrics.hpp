#pragma once
// Binary classification metrics: confusion counts, accuracy/precision/
// recall/F1 with an explicit zero-denominator convention, and tie-aware
// ROC AUC via the Mann-Whitney rank statistic.

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "rura/core.hpp"
#include "rura/embedding.hpp"

namespace rura::metrics {

struct ConfusionCounts {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
    std::size_t tn = 0;

    std::size_t total() const { return tp + fp + fn + tn; }

    friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

struct ScoredSample {
    double score = 0.0;  // higher = more positive
    int label = 0;       // 0 or 1
};

// Derived metrics plus the zero-denominator flags the report carries through.
struct PrfReport {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double accuracy = 0.0;
    std::vector<std::string> flags;
};

// Confusion counts plus the derived metric stack, as reports carry them.
struct EvalReport {
    ConfusionCounts counts;
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double auc = 0.0;
    std::vector<std::string> flags;
};

inline ConfusionCounts confusion(const std::vector<int>& y_true, const std::vector<int>& y_pred) {
    if (y_true.size() != y_pred.size()) throw std::invalid_argument("confusion: length mismatch");
    if (y_true.empty()) throw std::invalid_argument("confusion: empty input");
    ConfusionCounts c;
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        const bool t = y_true[i] != 0;
        const bool p = y_pred[i] != 0;
        if (t && p) ++c.tp;
        else if (!t && p) ++c.fp;
        else if (t && !p) ++c.fn;
        else ++c.tn;
    }
    return c;
}

// harmonic mean of precision and recall; 0 when both vanish
inline double f1_score(double precision, double recall) {
    if (precision + recall == 0.0) return 0.0;
    return 2.0 * precision * recall / (precision + recall);
}

// Zero denominators yield 0.0 with a flag instead of an exception, so
// near-degenerate confusion tables (all-negative predictions and the like)
// still produce a full report row.
inline PrfReport prf1(const ConfusionCounts& c) {
    PrfReport r;
    if (c.tp + c.fp == 0) {
        r.flags.push_back("precision: zero denominator");
    } else {
        r.precision = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
    }
    if (c.tp + c.fn == 0) {
        r.flags.push_back("recall: zero denominator");
    } else {
        r.recall = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
    }
    if (r.precision + r.recall == 0.0) {
        r.flags.push_back("f1: zero denominator");
    } else {
        r.f1 = f1_score(r.precision, r.recall);
    }
    if (c.total() == 0) {
        r.flags.push_back("accuracy: zero denominator");
    } else {
        r.accuracy = static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
    }
    return r;
}

// Mann-Whitney statistic: fraction of positive/negative pairs where the
// positive outscores the negative, ties at half credit. Rank-based, so the
// arithmetic stays exact (doubled ranks are integers) and matches O(n^2)
// pair counting bit for bit.
inline double roc_auc(const std::vector<ScoredSample>& samples) {
    std::size_t n_pos = 0, n_neg = 0;
    for (const auto& s : samples) {
        if (!std::isfinite(s.score)) throw std::invalid_argument("roc_auc: non-finite score");
        (s.label != 0 ? n_pos : n_neg)++;
    }
    if (n_pos == 0 || n_neg == 0)
        throw std::invalid_argument("roc_auc: need at least one positive and one negative");

    const std::size_t n = samples.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return samples[a].score < samples[b].score; });

    // doubled average ranks, 1-based: tie group spanning ranks [i+1, j] gets (i+1+j)
    std::vector<std::uint64_t> rank2(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && samples[order[j + 1]].score == samples[order[i]].score) ++j;
        const std::uint64_t r2 = static_cast<std::uint64_t>(i + 1 + j + 1);
        for (std::size_t k = i; k <= j; ++k) rank2[order[k]] = r2;
        i = j + 1;
    }

    std::uint64_t pos_rank2_sum = 0;
    for (std::size_t k = 0; k < n; ++k)
        if (samples[k].label != 0) pos_rank2_sum += rank2[k];

    const std::uint64_t u2 = pos_rank2_sum - static_cast<std::uint64_t>(n_pos) * (n_pos + 1);
    return static_cast<double>(u2) /
           (2.0 * static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

inline EvalReport eval_report(const ConfusionCounts& counts, double auc) {
    const PrfReport r = prf1(counts);
    EvalReport out;
    out.counts = counts;
    out.accuracy = r.accuracy;
    out.precision = r.precision;
    out.recall = r.recall;
    out.f1 = r.f1;
    out.auc = auc;
    out.flags = r.flags;
    return out;
}

// Distance-ratio score for a binary-mapped clustering: d0/(d0+d1) against the
// negative/positive cluster representatives. Bounded in [0,1] and monotone
// toward the positive representative. Equidistant (including the degenerate
// d0=d1=0 case) scores 0.5.
inline std::vector<ScoredSample> cluster_scores(const Points& points,
                                                const std::vector<double>& negative_center,
                                                const std::vector<double>& positive_center,
                                                const std::vector<int>& labels) {
    if (points.size() != labels.size())
        throw std::invalid_argument("cluster_scores: length mismatch");
    if (negative_center.size() != positive_center.size())
        throw std::invalid_argument("cluster_scores: center dimension mismatch");
    std::vector<ScoredSample> out;
    out.reserve(points.size());
    for (std::size_t k = 0; k < points.size(); ++k) {
        if (points[k].size() != negative_center.size())
            throw std::invalid_argument("cluster_scores: point dimension mismatch");
        const double d0 = std::sqrt(squared_l2(points[k], negative_center));
        const double d1 = std::sqrt(squared_l2(points[k], positive_center));
        const double score = (d0 + d1 > 0.0) ? d0 / (d0 + d1) : 0.5;
        out.push_back({score, labels[k]});
    }
    return out;
}

} // namespace rura::metrics
