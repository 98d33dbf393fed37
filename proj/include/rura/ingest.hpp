#pragma once
// File formats and synthetic cohorts.
//
// Embedding CSV: header `id,label,f0,...,f{d-1}`, one record per line, empty
// label field = unlabeled. Masks are ASCII PGM (P2, maxval 255, pixels 0 or
// 255). Probability maps are plain CSV of decimals in [0,1]. All writers
// emit shortest round-trip decimals so save-then-load is the identity.

#include <fstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "rura/core.hpp"
#include "rura/embedding.hpp"

namespace rura::ingest {

namespace detail {

inline std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(',', start);
        if (pos == std::string::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return fields;
}

inline std::string strip_cr(std::string s) {
    if (!s.empty() && s.back() == '\r') s.pop_back();
    return s;
}

} // namespace detail

inline EmbeddingSet load_embeddings(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");

    std::string line;
    if (!std::getline(in, line)) throw DataError(path + ": missing header");
    line = detail::strip_cr(line);

    const auto header = detail::split_csv(line);
    if (header.size() < 3 || header[0] != "id" || header[1] != "label")
        throw DataError(path + ": header must start with id,label,f0,...");
    const std::size_t dim = header.size() - 2;
    for (std::size_t j = 0; j < dim; ++j)
        if (header[j + 2] != "f" + std::to_string(j))
            throw DataError(path + ": bad feature column '" + header[j + 2] + "' at position " +
                            std::to_string(j + 2));

    EmbeddingSet set;
    set.dimension = dim;
    std::unordered_set<std::string> ids;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        line = detail::strip_cr(line);
        if (line.empty()) continue;
        const auto fields = detail::split_csv(line);
        if (fields.size() != dim + 2)
            throw DataError(path + ": ragged row at line " + std::to_string(line_no) +
                            " (expected " + std::to_string(dim + 2) + " fields, got " +
                            std::to_string(fields.size()) + ")");
        EmbeddingRecord rec;
        rec.id = fields[0];
        if (rec.id.empty())
            throw DataError(path + ": empty id at line " + std::to_string(line_no));
        if (!ids.insert(rec.id).second)
            throw DataError(path + ": duplicate id '" + rec.id + "' at line " +
                            std::to_string(line_no));
        if (!fields[1].empty()) rec.label = fields[1];
        rec.vector.reserve(dim);
        for (std::size_t j = 0; j < dim; ++j) {
            double v;
            if (!parse_double(fields[j + 2], v))
                throw DataError(path + ": unparsable value '" + fields[j + 2] + "' at line " +
                                std::to_string(line_no));
            if (!std::isfinite(v))
                throw DataError(path + ": non-finite value at line " + std::to_string(line_no));
            rec.vector.push_back(v);
        }
        set.records.push_back(std::move(rec));
    }
    if (in.bad()) throw IoError("read failure on '" + path + "'");
    return set;
}

inline void save_embeddings(const EmbeddingSet& set, const std::string& path) {
    set.validate();
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path + "'");
    out << "id,label";
    for (std::size_t j = 0; j < set.dimension; ++j) out << ",f" << j;
    out << '\n';
    for (const auto& r : set.records) {
        out << r.id << ',' << (r.label ? *r.label : "");
        for (double v : r.vector) out << ',' << format_double(v);
        out << '\n';
    }
    if (!out) throw IoError("write failure on '" + path + "'");
}

inline BinaryMask load_mask(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::string magic;
    in >> magic;
    if (magic != "P2") throw DataError(path + ": expected P2 PGM header");
    long long w = 0, h = 0, maxval = 0;
    if (!(in >> w >> h >> maxval)) throw DataError(path + ": malformed PGM header");
    if (w < 1 || h < 1) throw DataError(path + ": non-positive mask dimensions");
    if (maxval != 255) throw DataError(path + ": maxval must be 255");
    BinaryMask mask;
    mask.width = static_cast<std::size_t>(w);
    mask.height = static_cast<std::size_t>(h);
    mask.pixels.reserve(mask.width * mask.height);
    for (std::size_t i = 0; i < mask.width * mask.height; ++i) {
        long long v;
        if (!(in >> v)) throw DataError(path + ": truncated pixel data");
        if (v != 0 && v != 255)
            throw DataError(path + ": non-binary pixel value " + std::to_string(v));
        mask.pixels.push_back(v == 255 ? 1 : 0);
    }
    return mask;
}

inline void save_mask(const BinaryMask& mask, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path + "'");
    out << "P2\n" << mask.width << ' ' << mask.height << "\n255\n";
    for (std::size_t r = 0; r < mask.height; ++r) {
        for (std::size_t c = 0; c < mask.width; ++c) {
            if (c) out << ' ';
            out << (mask.at(r, c) ? 255 : 0);
        }
        out << '\n';
    }
    if (!out) throw IoError("write failure on '" + path + "'");
}

inline ProbMap load_probmap(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");
    ProbMap map;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        line = detail::strip_cr(line);
        if (line.empty()) continue;
        const auto fields = detail::split_csv(line);
        if (map.width == 0) {
            map.width = fields.size();
        } else if (fields.size() != map.width) {
            throw DataError(path + ": ragged row at line " + std::to_string(line_no));
        }
        for (const auto& f : fields) {
            double v;
            if (!parse_double(f, v))
                throw DataError(path + ": unparsable value '" + f + "' at line " +
                                std::to_string(line_no));
            if (!(v >= 0.0 && v <= 1.0))
                throw DataError(path + ": probability outside [0,1] at line " +
                                std::to_string(line_no));
            map.pixels.push_back(v);
        }
        ++map.height;
    }
    if (in.bad()) throw IoError("read failure on '" + path + "'");
    if (map.height == 0 || map.width == 0) throw DataError(path + ": empty probability map");
    return map;
}

inline void save_probmap(const ProbMap& map, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path + "'");
    for (std::size_t r = 0; r < map.height; ++r) {
        for (std::size_t c = 0; c < map.width; ++c) {
            if (c) out << ',';
            out << format_double(map.at(r, c));
        }
        out << '\n';
    }
    if (!out) throw IoError("write failure on '" + path + "'");
}

// K*n labeled records, class c drawn from an isotropic unit-variance Gaussian
// centered at c*separation along the first axis, so `separation` reads
// directly in sigma units. Labels are c0..c{K-1}.
inline EmbeddingSet synth_cohort(std::size_t classes, std::size_t per_class, std::size_t dimension,
                                 double separation, std::uint64_t seed) {
    if (classes < 2) throw std::invalid_argument("synth_cohort: need at least 2 classes");
    if (per_class < 1) throw std::invalid_argument("synth_cohort: per_class must be >= 1");
    if (dimension < 1) throw std::invalid_argument("synth_cohort: dimension must be >= 1");
    if (!(separation >= 0.0)) throw std::invalid_argument("synth_cohort: separation must be >= 0");

    Rng rng(derive_seed(seed, "synth_cohort"));
    EmbeddingSet set;
    set.dimension = dimension;
    set.records.reserve(classes * per_class);
    for (std::size_t c = 0; c < classes; ++c) {
        const std::string label = "c" + std::to_string(c);
        for (std::size_t i = 0; i < per_class; ++i) {
            EmbeddingRecord rec;
            rec.id = label + "_" + std::to_string(i);
            rec.label = label;
            rec.vector.resize(dimension);
            for (std::size_t j = 0; j < dimension; ++j) rec.vector[j] = rng.normal();
            rec.vector[0] += static_cast<double>(c) * separation;
            set.records.push_back(std::move(rec));
        }
    }
    return set;
}

} // namespace rura::ingest
