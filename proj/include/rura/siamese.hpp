#pragma once
// Siamese similarity head: a linear projection trained with contrastive loss
// over balanced match/non-match pairs, then a logistic scorer fitted on the
// L1 difference of frozen projections. Scores feed the class-by-class
// similarity matrix and most-relevant-class selection.

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "rura/core.hpp"
#include "rura/embedding.hpp"

namespace rura::siamese {

struct LabeledPair {
    EmbeddingRecord a;
    EmbeddingRecord b;
    int match = 0;  // Y: 1 = same class, 0 = different
};

struct SiameseHead {
    Matrix projection;                   // p x d
    std::vector<double> scorer_weights;  // length p
    double scorer_bias = 0.0;
    double margin = 1.0;

    std::size_t input_dim() const { return projection.cols; }
    std::size_t projected_dim() const { return projection.rows; }

    friend bool operator==(const SiameseHead&, const SiameseHead&) = default;
};

struct TrainConfig {
    double margin = 1.0;
    double learning_rate = 0.05;
    std::size_t epochs = 40;
    std::size_t batch_size = 16;
    std::size_t projected_dim = 0;  // 0 = min(input dim, 32)
    std::uint64_t seed = 0;
};

struct SimilarityMatrix {
    std::vector<std::string> class_names;
    std::vector<std::vector<double>> values;  // K x K, symmetric
};

inline double l2_distance(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw std::invalid_argument("l2_distance: length mismatch");
    return std::sqrt(squared_l2(x, y));
}

// Eq-style contrastive objective over precomputed pair distances:
// (1/2N) * sum[ Y*d^2 + (1-Y)*max(m-d, 0)^2 ]
inline double contrastive_loss(const std::vector<std::pair<double, int>>& pairs, double margin) {
    if (pairs.empty()) throw std::invalid_argument("contrastive_loss: empty pair list");
    if (!(margin > 0.0)) throw std::invalid_argument("contrastive_loss: margin must be > 0");
    double acc = 0.0;
    for (const auto& [d, y] : pairs) {
        if (!(d >= 0.0)) throw std::invalid_argument("contrastive_loss: negative distance");
        if (y != 0) {
            acc += d * d;
        } else {
            const double h = std::max(margin - d, 0.0);
            acc += h * h;
        }
    }
    return acc / (2.0 * static_cast<double>(pairs.size()));
}

inline std::vector<double> project(const SiameseHead& head, const std::vector<double>& x) {
    return mat_vec(head.projection, x);
}

inline double pair_distance(const SiameseHead& head, const std::vector<double>& x,
                            const std::vector<double>& y) {
    return l2_distance(project(head, x), project(head, y));
}

namespace detail {

struct PairRef {
    const std::vector<double>* a;
    const std::vector<double>* b;
    int match;
};

// dL/dW for the batch. Per pair with u = a-b, v = W u, d = |v|:
// the Y=1 term contributes 2 v u^T, the hinge term -2(m-d)/d * v u^T while
// 0 < d < m. At d = m the hinge is treated as inactive, at d = 0 the norm's
// subgradient is taken as zero.
inline Matrix grad_impl(const SiameseHead& head, const std::vector<PairRef>& batch,
                        double margin) {
    const std::size_t p = head.projected_dim();
    const std::size_t d_in = head.input_dim();
    Matrix grad(p, d_in, 0.0);
    std::vector<double> u(d_in);
    for (const auto& pr : batch) {
        if (pr.a->size() != d_in || pr.b->size() != d_in)
            throw std::invalid_argument("contrastive_grad: dimension mismatch");
        for (std::size_t j = 0; j < d_in; ++j) u[j] = (*pr.a)[j] - (*pr.b)[j];
        const std::vector<double> v = mat_vec(head.projection, u);
        double sq = 0.0;
        for (double vi : v) sq += vi * vi;
        const double dist = std::sqrt(sq);
        double scale;
        if (pr.match != 0) {
            scale = 2.0;
        } else if (dist > 0.0 && dist < margin) {
            scale = -2.0 * (margin - dist) / dist;
        } else {
            scale = 0.0;
        }
        if (scale != 0.0) {
            for (std::size_t i = 0; i < p; ++i) {
                const double sv = scale * v[i];
                if (sv == 0.0) continue;
                double* row = grad.data.data() + i * d_in;
                for (std::size_t j = 0; j < d_in; ++j) row[j] += sv * u[j];
            }
        }
    }
    const double inv = 1.0 / (2.0 * static_cast<double>(batch.size()));
    for (double& g : grad.data) g *= inv;
    return grad;
}

// labeled records grouped by class, classes sorted
inline std::map<std::string, std::vector<std::size_t>> group_by_label(const EmbeddingSet& data) {
    std::map<std::string, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < data.records.size(); ++i)
        if (data.records[i].label) groups[*data.records[i].label].push_back(i);
    return groups;
}

// one balanced batch of index pairs: (count+1)/2 match pairs, rest non-match
inline std::vector<std::pair<std::pair<std::size_t, std::size_t>, int>> sample_batch(
    const std::vector<std::vector<std::size_t>>& classes, std::size_t count, Rng& rng) {
    std::vector<std::pair<std::pair<std::size_t, std::size_t>, int>> batch;
    batch.reserve(count);
    const std::size_t n_match = (count + 1) / 2;
    for (std::size_t t = 0; t < count; ++t) {
        if (t < n_match) {
            const auto& members = classes[rng.uniform_index(classes.size())];
            const std::size_t a = rng.uniform_index(members.size());
            const std::size_t b = (a + 1 + rng.uniform_index(members.size() - 1)) % members.size();
            batch.push_back({{members[a], members[b]}, 1});
        } else {
            const std::size_t ci = rng.uniform_index(classes.size());
            const std::size_t cj = (ci + 1 + rng.uniform_index(classes.size() - 1)) % classes.size();
            const std::size_t a = rng.uniform_index(classes[ci].size());
            const std::size_t b = rng.uniform_index(classes[cj].size());
            batch.push_back({{classes[ci][a], classes[cj][b]}, 0});
        }
    }
    return batch;
}

} // namespace detail

inline Matrix contrastive_grad(const SiameseHead& head, const std::vector<LabeledPair>& batch,
                               double margin) {
    if (batch.empty()) throw std::invalid_argument("contrastive_grad: empty batch");
    std::vector<detail::PairRef> refs;
    refs.reserve(batch.size());
    for (const auto& pr : batch) refs.push_back({&pr.a.vector, &pr.b.vector, pr.match});
    return detail::grad_impl(head, refs, margin);
}

inline double pair_score(const SiameseHead& head, const std::vector<double>& x,
                         const std::vector<double>& y) {
    const std::vector<double> px = project(head, x);
    const std::vector<double> py = project(head, y);
    double z = head.scorer_bias;
    for (std::size_t i = 0; i < px.size(); ++i)
        z += head.scorer_weights[i] * std::abs(px[i] - py[i]);
    return sigmoid(z);
}

// Contrastive training of the projection over balanced pair batches, then
// logistic regression of the scorer on |P(a)-P(b)| with the projection
// frozen. Fully deterministic for a given config.
inline SiameseHead train_head(const EmbeddingSet& data, const TrainConfig& config) {
    if (!(config.margin > 0.0)) throw std::invalid_argument("train_head: margin must be > 0");
    if (!(config.learning_rate > 0.0))
        throw std::invalid_argument("train_head: learning_rate must be > 0");
    if (config.batch_size < 1) throw std::invalid_argument("train_head: batch_size must be >= 1");
    data.validate();

    const auto groups = detail::group_by_label(data);
    if (groups.size() < 2) throw DataError("train_head: need at least 2 labeled classes");
    std::vector<std::vector<std::size_t>> classes;
    std::size_t n_labeled = 0;
    for (const auto& [name, members] : groups) {
        if (members.size() < 2)
            throw DataError("train_head: class '" + name + "' has a single record");
        n_labeled += members.size();
        classes.push_back(members);
    }

    const std::size_t d = data.dimension;
    const std::size_t p = config.projected_dim > 0 ? config.projected_dim : std::min<std::size_t>(d, 32);

    SiameseHead head;
    head.margin = config.margin;
    head.projection = Matrix(p, d);
    head.scorer_weights.assign(p, 0.0);
    head.scorer_bias = 0.0;

    Rng rng_init(derive_seed(config.seed, "siamese_init"));
    const double bound = 1.0 / std::sqrt(static_cast<double>(d));
    for (double& w : head.projection.data) w = rng_init.uniform(-bound, bound);

    const std::size_t batches_per_epoch = (n_labeled + config.batch_size - 1) / config.batch_size;
    const auto& points = data.records;

    Rng rng_pairs(derive_seed(config.seed, "siamese_pairs"));
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        for (std::size_t b = 0; b < batches_per_epoch; ++b) {
            const auto batch = detail::sample_batch(classes, config.batch_size, rng_pairs);
            std::vector<detail::PairRef> refs;
            refs.reserve(batch.size());
            for (const auto& [idx, y] : batch)
                refs.push_back({&points[idx.first].vector, &points[idx.second].vector, y});
            const Matrix grad = detail::grad_impl(head, refs, config.margin);
            for (std::size_t i = 0; i < grad.data.size(); ++i)
                head.projection.data[i] -= config.learning_rate * grad.data[i];
        }
    }

    // scorer: binary cross-entropy on |P(a)-P(b)|, match = 1
    Rng rng_scorer(derive_seed(config.seed, "siamese_scorer"));
    std::vector<double> feat(p);
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        for (std::size_t b = 0; b < batches_per_epoch; ++b) {
            const auto batch = detail::sample_batch(classes, config.batch_size, rng_scorer);
            std::vector<double> gw(p, 0.0);
            double gb = 0.0;
            for (const auto& [idx, y] : batch) {
                const auto pa = project(head, points[idx.first].vector);
                const auto pb = project(head, points[idx.second].vector);
                double z = head.scorer_bias;
                for (std::size_t i = 0; i < p; ++i) {
                    feat[i] = std::abs(pa[i] - pb[i]);
                    z += head.scorer_weights[i] * feat[i];
                }
                const double err = sigmoid(z) - static_cast<double>(y);
                for (std::size_t i = 0; i < p; ++i) gw[i] += err * feat[i];
                gb += err;
            }
            const double inv = 1.0 / static_cast<double>(batch.size());
            for (std::size_t i = 0; i < p; ++i)
                head.scorer_weights[i] -= config.learning_rate * gw[i] * inv;
            head.scorer_bias -= config.learning_rate * gb * inv;
        }
    }
    return head;
}

// Mean pair score over sampled record pairs per class cell, then symmetrized
// by averaging (i,j) with (j,i). `class_order` controls both the row order
// and the per-cell sampling streams; it defaults to sorted class names.
inline SimilarityMatrix similarity_matrix(const SiameseHead& head, const EmbeddingSet& data,
                                          std::size_t pairs_per_cell, std::uint64_t seed,
                                          std::vector<std::string> class_order = {}) {
    if (pairs_per_cell < 1)
        throw std::invalid_argument("similarity_matrix: pairs_per_cell must be >= 1");
    const auto groups = detail::group_by_label(data);
    if (class_order.empty())
        for (const auto& [name, members] : groups) class_order.push_back(name);
    if (class_order.size() < 2)
        throw DataError("similarity_matrix: need at least 2 classes");

    std::vector<const std::vector<std::size_t>*> members;
    for (const auto& name : class_order) {
        const auto it = groups.find(name);
        if (it == groups.end() || it->second.empty())
            throw DataError("similarity_matrix: class '" + name + "' has no records");
        members.push_back(&it->second);
    }

    const std::size_t k = class_order.size();
    const std::uint64_t base = derive_seed(seed, "similarity_matrix");
    std::vector<std::vector<double>> raw(k, std::vector<double>(k, 0.0));
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = 0; j < k; ++j) {
            Rng rng(derive_seed(derive_seed(base, i), j));
            const auto& mi = *members[i];
            const auto& mj = *members[j];
            double acc = 0.0;
            for (std::size_t t = 0; t < pairs_per_cell; ++t) {
                std::size_t a = rng.uniform_index(mi.size());
                std::size_t b;
                if (i == j && mi.size() >= 2) {
                    b = (a + 1 + rng.uniform_index(mi.size() - 1)) % mi.size();
                } else {
                    b = rng.uniform_index(mj.size());
                }
                acc += pair_score(head, data.records[mi[a]].vector, data.records[mj[b]].vector);
            }
            raw[i][j] = acc / static_cast<double>(pairs_per_cell);
        }
    }

    SimilarityMatrix out;
    out.class_names = std::move(class_order);
    out.values.assign(k, std::vector<double>(k, 0.0));
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = i; j < k; ++j) {
            const double v = 0.5 * (raw[i][j] + raw[j][i]);
            out.values[i][j] = v;
            out.values[j][i] = v;
        }
    }
    return out;
}

// argmax over the off-diagonal entries of the target's row, ties to the
// earliest class in class_names order
inline std::string most_similar(const SimilarityMatrix& matrix, const std::string& target) {
    const auto it = std::find(matrix.class_names.begin(), matrix.class_names.end(), target);
    if (it == matrix.class_names.end())
        throw std::invalid_argument("most_similar: unknown class '" + target + "'");
    if (matrix.class_names.size() < 2)
        throw std::invalid_argument("most_similar: need at least 2 classes");
    const std::size_t row = static_cast<std::size_t>(it - matrix.class_names.begin());
    std::size_t best = row == 0 ? 1 : 0;
    for (std::size_t j = 0; j < matrix.class_names.size(); ++j) {
        if (j == row) continue;
        if (matrix.values[row][j] > matrix.values[row][best]) best = j;
    }
    return matrix.class_names[best];
}

} // namespace rura::siamese
