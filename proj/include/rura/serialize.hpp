#pragma once
// JSON wire formats. nlohmann::json keeps object keys sorted and prints
// shortest round-trip decimals, so every serializer here is byte-stable for
// identical inputs.

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include <json.hpp>

#include "rura/cluster.hpp"
#include "rura/core.hpp"
#include "rura/metrics.hpp"
#include "rura/siamese.hpp"

namespace rura {

using json = nlohmann::json;

inline json json_of(const siamese::SiameseHead& head) {
    return json{{"projected_dim", head.projected_dim()},
                {"input_dim", head.input_dim()},
                {"projection", head.projection.data},
                {"scorer_weights", head.scorer_weights},
                {"scorer_bias", head.scorer_bias},
                {"margin", head.margin}};
}

inline siamese::SiameseHead head_from_json(const json& j) {
    siamese::SiameseHead head;
    const auto p = j.at("projected_dim").get<std::size_t>();
    const auto d = j.at("input_dim").get<std::size_t>();
    if (p < 1 || d < 1) throw DataError("head: dimensions must be >= 1");
    head.projection = Matrix(p, d);
    head.projection.data = j.at("projection").get<std::vector<double>>();
    if (head.projection.data.size() != p * d)
        throw DataError("head: projection size does not match dimensions");
    head.scorer_weights = j.at("scorer_weights").get<std::vector<double>>();
    if (head.scorer_weights.size() != p)
        throw DataError("head: scorer_weights size does not match projected_dim");
    head.scorer_bias = j.at("scorer_bias").get<double>();
    head.margin = j.at("margin").get<double>();
    for (double v : head.projection.data)
        if (!std::isfinite(v)) throw DataError("head: non-finite projection entry");
    for (double v : head.scorer_weights)
        if (!std::isfinite(v)) throw DataError("head: non-finite scorer weight");
    if (!std::isfinite(head.scorer_bias) || !std::isfinite(head.margin))
        throw DataError("head: non-finite scalar");
    return head;
}

inline json json_of(const siamese::SimilarityMatrix& m) {
    return json{{"class_names", m.class_names}, {"values", m.values}};
}

inline siamese::SimilarityMatrix similarity_from_json(const json& j) {
    siamese::SimilarityMatrix m;
    m.class_names = j.at("class_names").get<std::vector<std::string>>();
    m.values = j.at("values").get<std::vector<std::vector<double>>>();
    const std::size_t k = m.class_names.size();
    if (m.values.size() != k) throw DataError("similarity matrix: row count mismatch");
    for (const auto& row : m.values)
        if (row.size() != k) throw DataError("similarity matrix: column count mismatch");
    return m;
}

inline json json_of(const metrics::EvalReport& r) {
    return json{{"counts",
                 {{"tp", r.counts.tp}, {"fp", r.counts.fp}, {"fn", r.counts.fn}, {"tn", r.counts.tn}}},
                {"accuracy", r.accuracy},
                {"precision", r.precision},
                {"recall", r.recall},
                {"f1", r.f1},
                {"auc", r.auc},
                {"flags", r.flags}};
}

// {algorithm, params, seed, assignment, cost_or_loglik, centers_or_medoids}
struct ClusterRunRecord {
    std::string algorithm;
    json params;
    std::uint64_t seed = 0;
    std::vector<int> assignment;
    json cost_or_loglik;  // number or null
    json centers_or_medoids;
};

inline json json_of(const ClusterRunRecord& r) {
    return json{{"algorithm", r.algorithm},
                {"params", r.params},
                {"seed", r.seed},
                {"assignment", r.assignment},
                {"cost_or_loglik", r.cost_or_loglik},
                {"centers_or_medoids", r.centers_or_medoids}};
}

// hash of the exact bytes fed to a clustering algorithm; the comparison
// harness proves identical inputs across algorithms with it
inline std::string points_digest(const Points& points) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    const auto mix_bytes = [&h](const void* p, std::size_t len) {
        const auto* b = static_cast<const unsigned char*>(p);
        for (std::size_t i = 0; i < len; ++i) {
            h ^= b[i];
            h *= 0x100000001b3ULL;
        }
    };
    const std::uint64_t n = points.size();
    mix_bytes(&n, sizeof n);
    for (const auto& row : points) {
        const std::uint64_t d = row.size();
        mix_bytes(&d, sizeof d);
        mix_bytes(row.data(), row.size() * sizeof(double));
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

} // namespace rura
