#pragma once
// Domain carriers shared by every stage: labeled feature vectors and the
// mask/probability-map pair used for segmentation scoring.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include "rura/core.hpp"

namespace rura {

struct EmbeddingRecord {
    std::string id;                    // unique within its set
    std::optional<std::string> label;  // diagnosis class, absent = unlabeled
    std::vector<double> vector;

    friend bool operator==(const EmbeddingRecord&, const EmbeddingRecord&) = default;
};

struct EmbeddingSet {
    std::size_t dimension = 0;
    std::vector<EmbeddingRecord> records;

    friend bool operator==(const EmbeddingSet&, const EmbeddingSet&) = default;

    // Throws DataError on any invariant violation.
    void validate() const {
        if (dimension < 1) throw DataError("embedding set: dimension must be >= 1");
        std::unordered_set<std::string> seen;
        for (const auto& r : records) {
            if (r.id.empty()) throw DataError("embedding set: empty record id");
            if (!seen.insert(r.id).second)
                throw DataError("embedding set: duplicate id '" + r.id + "'");
            if (r.vector.size() != dimension)
                throw DataError("embedding set: record '" + r.id + "' has wrong dimension");
            for (double v : r.vector)
                if (!std::isfinite(v))
                    throw DataError("embedding set: non-finite value in record '" + r.id + "'");
        }
    }

    // Sorted distinct labels over the labeled records.
    std::vector<std::string> class_names() const {
        std::vector<std::string> out;
        for (const auto& r : records)
            if (r.label && std::find(out.begin(), out.end(), *r.label) == out.end())
                out.push_back(*r.label);
        std::sort(out.begin(), out.end());
        return out;
    }
};

// Raw point list, the clustering modules' working form.
using Points = std::vector<std::vector<double>>;

inline Points to_points(const EmbeddingSet& set) {
    Points out;
    out.reserve(set.records.size());
    for (const auto& r : set.records) out.push_back(r.vector);
    return out;
}

struct BinaryMask {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<std::uint8_t> pixels;  // row-major, each 0 or 1

    std::uint8_t at(std::size_t r, std::size_t c) const { return pixels[r * width + c]; }

    friend bool operator==(const BinaryMask&, const BinaryMask&) = default;
};

struct ProbMap {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<double> pixels;  // row-major, each in [0,1]

    double at(std::size_t r, std::size_t c) const { return pixels[r * width + c]; }

    friend bool operator==(const ProbMap&, const ProbMap&) = default;
};

} // namespace rura
