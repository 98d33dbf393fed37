#pragma once
// Orchestration of the three-stage zero-shot run: train the similarity head
// with the target class held out, pick the proxy class from the similarity
// matrix, cluster proxy-vs-control records, then score held-out target and
// control records against the frozen cluster model. Also hosts the
// clustering-algorithm comparison harness and the ablation modes.

#include <chrono>
#include <numeric>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "rura/cluster.hpp"
#include "rura/core.hpp"
#include "rura/embedding.hpp"
#include "rura/ingest.hpp"
#include "rura/metrics.hpp"
#include "rura/serialize.hpp"
#include "rura/siamese.hpp"

namespace rura::pipeline {

enum class AblationMode { full, siamese_only, segmentation_only };

inline AblationMode mode_from_name(const std::string& name) {
    if (name == "full") return AblationMode::full;
    if (name == "siamese_only") return AblationMode::siamese_only;
    if (name == "segmentation_only") return AblationMode::segmentation_only;
    throw DataError("unknown ablation mode '" + name + "'");
}

inline std::string mode_name(AblationMode m) {
    switch (m) {
        case AblationMode::full: return "full";
        case AblationMode::siamese_only: return "siamese_only";
        case AblationMode::segmentation_only: return "segmentation_only";
    }
    return "?";
}

inline const std::vector<std::string>& known_algorithms() {
    static const std::vector<std::string> names = {"kmeans", "gmm", "agg",     "clara",
                                                   "kmodes", "pam", "kmedoids"};
    return names;
}

struct SimilarityConfig {
    siamese::TrainConfig train;
    std::size_t pairs_per_cell = 50;
};

struct ClusteringConfig {
    std::string algorithm = "agg";
    std::size_t k = 2;
    std::string linkage = "average";  // agg
    std::size_t max_iter = 300;
    double tol = 1e-8;
    std::size_t sample_size = 40;  // clara
    std::size_t n_samples = 5;     // clara
    std::uint64_t seed = 0;
};

struct PipelineConfig {
    std::string embeddings_path;
    std::string target_class;
    std::string control_class;
    std::string output_dir = ".";
    AblationMode ablation = AblationMode::full;
    // absent = use all coordinates; present but empty is rejected by modes
    // that cluster on the lesion subset
    std::optional<std::vector<std::size_t>> lesion_dims;
    SimilarityConfig similarity;
    ClusteringConfig clustering;
};

struct StageResult {
    std::string algorithm;
    metrics::EvalReport eval;
    std::string input_digest;  // digest of the exact points fed to the fit
};

struct RunReport {
    json config_echo;
    std::optional<siamese::SimilarityMatrix> similarity;
    std::string proxy_class;
    std::string control_class;
    std::string mode;
    std::vector<StageResult> results;
    std::vector<std::pair<std::string, double>> timings_ms;  // informational only
};

// ---------------------------------------------------------------------------
// Config JSON
// ---------------------------------------------------------------------------

namespace detail {

inline void reject_unknown_keys(const json& j, const std::set<std::string>& allowed,
                                const std::string& where) {
    for (const auto& [key, value] : j.items())
        if (!allowed.contains(key))
            throw DataError("config: unknown key '" + key + "' in " + where);
}

} // namespace detail

inline json json_of(const PipelineConfig& c) {
    json sim{{"margin", c.similarity.train.margin},
             {"learning_rate", c.similarity.train.learning_rate},
             {"epochs", c.similarity.train.epochs},
             {"batch_size", c.similarity.train.batch_size},
             {"projected_dim", c.similarity.train.projected_dim},
             {"seed", c.similarity.train.seed},
             {"pairs_per_cell", c.similarity.pairs_per_cell}};
    json clu{{"algorithm", c.clustering.algorithm},
             {"k", c.clustering.k},
             {"linkage", c.clustering.linkage},
             {"max_iter", c.clustering.max_iter},
             {"tol", c.clustering.tol},
             {"sample_size", c.clustering.sample_size},
             {"n_samples", c.clustering.n_samples},
             {"seed", c.clustering.seed}};
    json out{{"schema", 1},
             {"embeddings_path", c.embeddings_path},
             {"target_class", c.target_class},
             {"control_class", c.control_class},
             {"output_dir", c.output_dir},
             {"ablation", mode_name(c.ablation)},
             {"similarity", sim},
             {"clustering", clu}};
    if (c.lesion_dims) out["lesion_dims"] = *c.lesion_dims;
    return out;
}

inline PipelineConfig config_from_json(const json& j) {
    if (!j.is_object()) throw DataError("config: root must be a JSON object");
    detail::reject_unknown_keys(j,
                                {"schema", "embeddings_path", "target_class", "control_class",
                                 "output_dir", "ablation", "lesion_dims", "similarity",
                                 "clustering", "algorithms"},
                                "root");
    if (!j.contains("schema") || j.at("schema") != 1)
        throw DataError("config: schema field must be present and equal to 1");

    PipelineConfig c;
    if (j.contains("embeddings_path")) c.embeddings_path = j.at("embeddings_path").get<std::string>();
    if (j.contains("target_class")) c.target_class = j.at("target_class").get<std::string>();
    if (j.contains("control_class")) c.control_class = j.at("control_class").get<std::string>();
    if (j.contains("output_dir")) c.output_dir = j.at("output_dir").get<std::string>();
    if (j.contains("ablation")) c.ablation = mode_from_name(j.at("ablation").get<std::string>());
    if (j.contains("lesion_dims"))
        c.lesion_dims = j.at("lesion_dims").get<std::vector<std::size_t>>();

    if (j.contains("similarity")) {
        const json& s = j.at("similarity");
        detail::reject_unknown_keys(s,
                                    {"margin", "learning_rate", "epochs", "batch_size",
                                     "projected_dim", "seed", "pairs_per_cell"},
                                    "similarity");
        if (s.contains("margin")) c.similarity.train.margin = s.at("margin").get<double>();
        if (s.contains("learning_rate"))
            c.similarity.train.learning_rate = s.at("learning_rate").get<double>();
        if (s.contains("epochs")) c.similarity.train.epochs = s.at("epochs").get<std::size_t>();
        if (s.contains("batch_size"))
            c.similarity.train.batch_size = s.at("batch_size").get<std::size_t>();
        if (s.contains("projected_dim"))
            c.similarity.train.projected_dim = s.at("projected_dim").get<std::size_t>();
        if (s.contains("seed")) c.similarity.train.seed = s.at("seed").get<std::uint64_t>();
        if (s.contains("pairs_per_cell"))
            c.similarity.pairs_per_cell = s.at("pairs_per_cell").get<std::size_t>();
    }
    if (j.contains("clustering")) {
        const json& cl = j.at("clustering");
        detail::reject_unknown_keys(cl,
                                    {"algorithm", "k", "linkage", "max_iter", "tol",
                                     "sample_size", "n_samples", "seed"},
                                    "clustering");
        if (cl.contains("algorithm")) c.clustering.algorithm = cl.at("algorithm").get<std::string>();
        if (cl.contains("k")) c.clustering.k = cl.at("k").get<std::size_t>();
        if (cl.contains("linkage")) c.clustering.linkage = cl.at("linkage").get<std::string>();
        if (cl.contains("max_iter")) c.clustering.max_iter = cl.at("max_iter").get<std::size_t>();
        if (cl.contains("tol")) c.clustering.tol = cl.at("tol").get<double>();
        if (cl.contains("sample_size"))
            c.clustering.sample_size = cl.at("sample_size").get<std::size_t>();
        if (cl.contains("n_samples")) c.clustering.n_samples = cl.at("n_samples").get<std::size_t>();
        if (cl.contains("seed")) c.clustering.seed = cl.at("seed").get<std::uint64_t>();
    }
    if (std::find(known_algorithms().begin(), known_algorithms().end(),
                  c.clustering.algorithm) == known_algorithms().end())
        throw DataError("config: unknown clustering algorithm '" + c.clustering.algorithm + "'");
    return c;
}

// ---------------------------------------------------------------------------
// Fitting + out-of-sample assignment behind one interface
// ---------------------------------------------------------------------------

// representatives are what out-of-sample points are matched against:
// centroids/means for kmeans/gmm/agg, medoid points for the medoid family,
// binary modes (with the training thresholds) for kmodes
struct FittedClustering {
    std::string algorithm;
    cluster::ClusterAssignment assignment;
    Points representatives;
    std::vector<double> binarize_thresholds;  // kmodes only
    json cost_or_loglik;

    int assign_point(const std::vector<double>& x) const {
        if (!binarize_thresholds.empty())
            return cluster::nearest_mode(cluster::apply_thresholds(x, binarize_thresholds),
                                         representatives);
        return cluster::nearest_center(x, representatives);
    }
};

inline FittedClustering fit_clustering(const Points& points, const ClusteringConfig& cfg,
                                       std::uint64_t seed) {
    FittedClustering out;
    out.algorithm = cfg.algorithm;
    if (cfg.algorithm == "kmeans") {
        auto r = cluster::kmeans_fit(points, cfg.k, seed, cfg.max_iter, cfg.tol);
        out.assignment = std::move(r.assignment);
        out.representatives = std::move(r.centroids);
        out.cost_or_loglik = r.objective_trace.back();
    } else if (cfg.algorithm == "gmm") {
        auto r = cluster::gmm_fit(points, cfg.k, seed, cfg.max_iter, cfg.tol);
        out.assignment = std::move(r.assignment);
        out.representatives = std::move(r.model.means);
        out.cost_or_loglik = r.model.log_likelihood_trace.back();
    } else if (cfg.algorithm == "agg") {
        auto r = cluster::agg_fit(points, cfg.k, cluster::linkage_from_name(cfg.linkage));
        out.representatives = cluster::cluster_centroids(points, r.assignment);
        out.assignment = std::move(r.assignment);
        out.cost_or_loglik = nullptr;
    } else if (cfg.algorithm == "pam") {
        auto r = cluster::pam_fit(points, cfg.k, seed, cfg.max_iter);
        out.assignment = std::move(r.assignment);
        for (std::size_t m : r.medoids) out.representatives.push_back(points[m]);
        out.cost_or_loglik = r.cost;
    } else if (cfg.algorithm == "kmedoids") {
        auto r = cluster::kmedoids_fit(points, cfg.k, seed, cfg.max_iter);
        out.assignment = std::move(r.assignment);
        for (std::size_t m : r.medoids) out.representatives.push_back(points[m]);
        out.cost_or_loglik = r.cost;
    } else if (cfg.algorithm == "clara") {
        auto r = cluster::clara_fit(points, cfg.k, cfg.sample_size, cfg.n_samples, seed);
        out.assignment = std::move(r.assignment);
        for (std::size_t m : r.medoids) out.representatives.push_back(points[m]);
        out.cost_or_loglik = r.cost;
    } else if (cfg.algorithm == "kmodes") {
        out.binarize_thresholds = cluster::binarize_thresholds(points);
        Points binary;
        binary.reserve(points.size());
        for (const auto& p : points)
            binary.push_back(cluster::apply_thresholds(p, out.binarize_thresholds));
        auto r = cluster::kmodes_fit(binary, cfg.k, seed, cfg.max_iter);
        out.assignment = std::move(r.assignment);
        out.representatives = std::move(r.modes);
        out.cost_or_loglik = r.cost;
    } else {
        throw DataError("unknown clustering algorithm '" + cfg.algorithm + "'");
    }
    return out;
}

namespace detail {

template <typename F>
auto with_stage(const std::string& stage, F&& fn) {
    try {
        return fn();
    } catch (const DataError& e) {
        throw DataError("stage " + stage + ": " + e.what());
    } catch (const std::invalid_argument& e) {
        throw DataError("stage " + stage + ": " + e.what());
    }
}

inline std::vector<double> restrict_dims(const std::vector<double>& v,
                                         const std::vector<std::size_t>& dims) {
    std::vector<double> out;
    out.reserve(dims.size());
    for (std::size_t j : dims) out.push_back(v[j]);
    return out;
}

struct Timer {
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    double elapsed_ms() const {
        return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
            .count();
    }
};

} // namespace detail

// ---------------------------------------------------------------------------
// run_zsl
// ---------------------------------------------------------------------------

namespace detail {

// shared context so the comparison harness trains the head once
struct ZslContext {
    std::string proxy;
    std::optional<siamese::SimilarityMatrix> similarity;
    std::vector<std::size_t> active_dims;
    Points fit_points;                // proxy + control records, restricted dims
    std::vector<std::string> fit_labels;
    Points eval_points;               // target + control records, restricted dims
    std::vector<int> eval_truth;      // 1 = target
    std::vector<std::pair<std::string, double>> timings_ms;
};

inline ZslContext prepare_zsl(const EmbeddingSet& data, const PipelineConfig& config) {
    data.validate();
    if (data.records.empty()) throw DataError("run_zsl: empty embedding set");
    const auto classes = data.class_names();
    if (std::find(classes.begin(), classes.end(), config.target_class) == classes.end())
        throw DataError("run_zsl: target class '" + config.target_class + "' not present");
    if (config.control_class.empty())
        throw DataError("run_zsl: control_class must be set");
    if (config.control_class == config.target_class)
        throw DataError("run_zsl: control class must differ from the target class");
    if (std::find(classes.begin(), classes.end(), config.control_class) == classes.end())
        throw DataError("run_zsl: control class '" + config.control_class + "' not present");

    std::vector<std::string> others;
    for (const auto& c : classes)
        if (c != config.target_class) others.push_back(c);
    if (others.size() < 2)
        throw DataError("run_zsl: need at least 2 non-target classes");

    ZslContext ctx;

    // active coordinates for the clustering stage
    const bool restricted = config.ablation != AblationMode::siamese_only;
    if (restricted && config.lesion_dims) {
        if (config.lesion_dims->empty())
            throw DataError("run_zsl: lesion_dims is empty but mode '" +
                            mode_name(config.ablation) + "' clusters on the lesion subset");
        for (std::size_t jdim : *config.lesion_dims)
            if (jdim >= data.dimension)
                throw DataError("run_zsl: lesion dim out of range");
        ctx.active_dims = *config.lesion_dims;
    } else {
        ctx.active_dims.resize(data.dimension);
        std::iota(ctx.active_dims.begin(), ctx.active_dims.end(), 0);
    }

    if (config.ablation == AblationMode::segmentation_only) {
        // no similarity stage: seeded proxy pick among non-target, non-control
        std::vector<std::string> candidates;
        for (const auto& c : others)
            if (c != config.control_class) candidates.push_back(c);
        if (candidates.empty()) throw DataError("run_zsl: no proxy candidates");
        Rng rng(derive_seed(config.similarity.train.seed, "random_proxy"));
        ctx.proxy = candidates[rng.uniform_index(candidates.size())];
    } else {
        // zero-shot head: train with the target class excluded
        EmbeddingSet train_set;
        train_set.dimension = data.dimension;
        for (const auto& r : data.records)
            if (!(r.label && *r.label == config.target_class)) train_set.records.push_back(r);

        detail::Timer t_head;
        const siamese::SiameseHead head = with_stage(
            "train_head", [&] { return siamese::train_head(train_set, config.similarity.train); });
        ctx.timings_ms.emplace_back("train_head", t_head.elapsed_ms());

        // target row appended last so its name never shifts the other
        // classes' sampling streams (zero-shot contract)
        std::vector<std::string> order = others;
        order.push_back(config.target_class);
        detail::Timer t_sim;
        ctx.similarity = with_stage("similarity", [&] {
            return siamese::similarity_matrix(head, data, config.similarity.pairs_per_cell,
                                              config.similarity.train.seed, order);
        });
        ctx.timings_ms.emplace_back("similarity", t_sim.elapsed_ms());
        // argmax over the target's row, skipping the control class (the
        // downstream stages need proxy != control); ties to the earliest class
        const auto& row = ctx.similarity->values.back();
        std::size_t best = order.size();
        for (std::size_t j = 0; j + 1 < order.size(); ++j) {
            if (order[j] == config.control_class) continue;
            if (best == order.size() || row[j] > row[best]) best = j;
        }
        if (best == order.size())
            throw DataError("run_zsl: no proxy candidate besides the control class");
        ctx.proxy = order[best];
    }

    for (const auto& r : data.records) {
        if (!r.label) continue;
        const auto v = restrict_dims(r.vector, ctx.active_dims);
        if (*r.label == ctx.proxy) {
            ctx.fit_points.push_back(v);
            ctx.fit_labels.push_back(ctx.proxy);
        } else if (*r.label == config.control_class) {
            ctx.fit_points.push_back(v);
            ctx.fit_labels.push_back(config.control_class);
            ctx.eval_points.push_back(v);
            ctx.eval_truth.push_back(0);
        } else if (*r.label == config.target_class) {
            ctx.eval_points.push_back(v);
            ctx.eval_truth.push_back(1);
        }
    }
    return ctx;
}

inline StageResult evaluate_clustering(const ZslContext& ctx, const PipelineConfig& config,
                                       const std::string& algorithm) {
    if (config.clustering.k != 2)
        throw DataError("run_zsl: the zero-shot evaluation requires clustering k = 2");

    ClusteringConfig cfg = config.clustering;
    cfg.algorithm = algorithm;
    const std::uint64_t algo_seed = derive_seed(cfg.seed, algorithm);
    const FittedClustering fit = with_stage(
        "clustering", [&] { return fit_clustering(ctx.fit_points, cfg, algo_seed); });

    // which cluster plays the proxy role, via the accuracy-maximizing mapping
    // on the training points
    const cluster::MapResult mapping = cluster::map_clusters(fit.assignment, ctx.fit_labels);
    int proxy_cluster = -1;
    for (std::size_t c = 0; c < mapping.cluster_labels.size(); ++c)
        if (mapping.cluster_labels[c] == ctx.proxy) proxy_cluster = static_cast<int>(c);
    if (proxy_cluster < 0)
        throw DataError("stage evaluation: no cluster mapped to the proxy class");

    std::vector<int> y_pred;
    y_pred.reserve(ctx.eval_points.size());
    for (const auto& x : ctx.eval_points)
        y_pred.push_back(fit.assign_point(x) == proxy_cluster ? 1 : 0);

    const metrics::ConfusionCounts counts = metrics::confusion(ctx.eval_truth, y_pred);

    // distance-ratio scores against the negative/positive representatives
    Points eval_for_scores = ctx.eval_points;
    if (!fit.binarize_thresholds.empty())
        for (auto& x : eval_for_scores) x = cluster::apply_thresholds(x, fit.binarize_thresholds);
    const auto& rep_pos = fit.representatives[static_cast<std::size_t>(proxy_cluster)];
    const auto& rep_neg = fit.representatives[proxy_cluster == 0 ? 1 : 0];
    const auto scored = metrics::cluster_scores(eval_for_scores, rep_neg, rep_pos, ctx.eval_truth);
    const double auc = metrics::roc_auc(scored);

    StageResult out;
    out.algorithm = algorithm;
    out.eval = metrics::eval_report(counts, auc);
    out.input_digest = points_digest(ctx.fit_points);
    return out;
}

} // namespace detail

inline RunReport run_zsl(const EmbeddingSet& data, const PipelineConfig& config) {
    detail::ZslContext ctx = detail::prepare_zsl(data, config);
    RunReport report;
    report.config_echo = json_of(config);
    report.similarity = ctx.similarity;
    report.proxy_class = ctx.proxy;
    report.control_class = config.control_class;
    report.mode = mode_name(config.ablation);
    report.timings_ms = ctx.timings_ms;

    detail::Timer t;
    report.results.push_back(detail::evaluate_clustering(ctx, config, config.clustering.algorithm));
    report.timings_ms.emplace_back("clustering", t.elapsed_ms());
    return report;
}

// Identical data, head, proxy choice and seeds across all algorithms; one
// metric row per algorithm in the order given.
inline RunReport compare_clusterers(const EmbeddingSet& data, const PipelineConfig& config,
                                    const std::vector<std::string>& algorithms) {
    if (algorithms.empty()) throw DataError("compare_clusterers: empty algorithm list");
    for (const auto& a : algorithms)
        if (std::find(known_algorithms().begin(), known_algorithms().end(), a) ==
            known_algorithms().end())
            throw DataError("compare_clusterers: unknown algorithm '" + a + "'");

    detail::ZslContext ctx = detail::prepare_zsl(data, config);
    RunReport report;
    report.config_echo = json_of(config);
    report.similarity = ctx.similarity;
    report.proxy_class = ctx.proxy;
    report.control_class = config.control_class;
    report.mode = mode_name(config.ablation);
    report.timings_ms = ctx.timings_ms;

    for (const auto& algorithm : algorithms) {
        detail::Timer t;
        report.results.push_back(detail::evaluate_clustering(ctx, config, algorithm));
        report.timings_ms.emplace_back("clustering:" + algorithm, t.elapsed_ms());
    }
    return report;
}

// One report per ablation mode, all from the same config and seeds.
inline std::vector<RunReport> run_ablation(const EmbeddingSet& data,
                                           const PipelineConfig& config) {
    std::vector<RunReport> out;
    for (const AblationMode mode : {AblationMode::segmentation_only, AblationMode::siamese_only,
                                    AblationMode::full}) {
        PipelineConfig c = config;
        c.ablation = mode;
        out.push_back(run_zsl(data, c));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Report serialization
// ---------------------------------------------------------------------------

// Deterministic report body: no timings in here, so byte-identical reruns
// stay byte-identical. Timings go to a sidecar file.
inline json report_json(const RunReport& r) {
    json results = json::array();
    for (const auto& s : r.results)
        results.push_back(json{{"algorithm", s.algorithm},
                               {"eval", rura::json_of(s.eval)},
                               {"input_digest", s.input_digest}});
    return json{{"schema", 1},
                {"config", r.config_echo},
                {"similarity", r.similarity ? rura::json_of(*r.similarity) : json(nullptr)},
                {"proxy_class", r.proxy_class},
                {"control_class", r.control_class},
                {"mode", r.mode},
                {"results", results}};
}

inline json timings_json(const RunReport& r) {
    json out = json::object();
    for (const auto& [stage, ms] : r.timings_ms) out[stage] = ms;
    return out;
}

// algorithm,accuracy,precision,recall,f1,auc -- the flat CSV that mirrors the
// comparison-table column order
inline std::string report_csv(const RunReport& r) {
    std::string out = "algorithm,accuracy,precision,recall,f1,auc\n";
    for (const auto& s : r.results) {
        out += s.algorithm;
        out += ',' + format_double(s.eval.accuracy);
        out += ',' + format_double(s.eval.precision);
        out += ',' + format_double(s.eval.recall);
        out += ',' + format_double(s.eval.f1);
        out += ',' + format_double(s.eval.auc);
        out += '\n';
    }
    return out;
}

} // namespace rura::pipeline
