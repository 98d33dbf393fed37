#pragma once
// The `rura` command-line front end. Exit codes: 0 success, 1 usage error,
// 2 data/validation error.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rura/cluster.hpp"
#include "rura/core.hpp"
#include "rura/ingest.hpp"
#include "rura/metrics.hpp"
#include "rura/pipeline.hpp"
#include "rura/segeval.hpp"
#include "rura/serialize.hpp"
#include "rura/siamese.hpp"

namespace rura::cli {

namespace detail {

inline void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path + "'");
    out << text;
    if (!out) throw IoError("write failure on '" + path + "'");
}

inline json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw DataError(path + ": " + e.what());
    }
    return j;
}

inline std::vector<std::string> split_list(const std::string& csv) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= csv.size()) {
        const std::size_t pos = csv.find(',', start);
        if (pos == std::string::npos) {
            if (start < csv.size()) out.push_back(csv.substr(start));
            break;
        }
        if (pos > start) out.push_back(csv.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

inline void write_run_outputs(const pipeline::RunReport& report, const std::string& output_dir) {
    std::filesystem::create_directories(output_dir);
    const auto dir = std::filesystem::path(output_dir);
    write_text((dir / "report.json").string(), pipeline::report_json(report).dump(2) + "\n");
    write_text((dir / "report.csv").string(), pipeline::report_csv(report));
    write_text((dir / "timings.json").string(), pipeline::timings_json(report).dump(2) + "\n");
}

struct ConfigOverrides {
    std::string embeddings;
    std::string target;
    std::string control;
    std::string algorithm;
    std::string output_dir;
    std::int64_t seed = -1;  // -1 = keep config seeds

    void apply(pipeline::PipelineConfig& config) const {
        if (!embeddings.empty()) config.embeddings_path = embeddings;
        if (!target.empty()) config.target_class = target;
        if (!control.empty()) config.control_class = control;
        if (!algorithm.empty()) config.clustering.algorithm = algorithm;
        if (!output_dir.empty()) config.output_dir = output_dir;
        if (seed >= 0) {
            config.similarity.train.seed = static_cast<std::uint64_t>(seed);
            config.clustering.seed = static_cast<std::uint64_t>(seed);
        }
    }
};

} // namespace detail

inline int run(int argc, const char* const* argv) {
    CLI::App app{"RURA-Net zero-shot diagnosis pipeline on embedding space"};
    app.require_subcommand(1);

    // synth
    auto* synth = app.add_subcommand("synth", "Generate a seeded synthetic cohort CSV");
    std::size_t sy_classes = 2, sy_per_class = 50, sy_dim = 8;
    double sy_separation = 6.0;
    std::uint64_t sy_seed = 0;
    std::string sy_out;
    synth->add_option("--classes", sy_classes, "number of classes (>= 2)");
    synth->add_option("--per-class", sy_per_class, "records per class");
    synth->add_option("--dim", sy_dim, "embedding dimension");
    synth->add_option("--separation", sy_separation, "distance between adjacent class means");
    synth->add_option("--seed", sy_seed, "PRNG seed");
    synth->add_option("--out", sy_out, "output CSV path")->required();

    // train-head
    auto* train = app.add_subcommand("train-head", "Train the Siamese similarity head");
    std::string tr_in, tr_out;
    siamese::TrainConfig tr_cfg;
    train->add_option("--in", tr_in, "embedding CSV")->required();
    train->add_option("--out", tr_out, "output head JSON")->required();
    train->add_option("--margin", tr_cfg.margin, "contrastive margin");
    train->add_option("--learning-rate", tr_cfg.learning_rate, "gradient descent step size");
    train->add_option("--epochs", tr_cfg.epochs, "training epochs");
    train->add_option("--batch-size", tr_cfg.batch_size, "pairs per batch");
    train->add_option("--projected-dim", tr_cfg.projected_dim,
                      "projection rows (0 = min(dim, 32))");
    train->add_option("--seed", tr_cfg.seed, "PRNG seed");

    // similarity
    auto* sim = app.add_subcommand("similarity", "Build the class similarity matrix");
    std::string si_in, si_head, si_out;
    std::size_t si_pairs = 50;
    std::uint64_t si_seed = 0;
    sim->add_option("--in", si_in, "embedding CSV")->required();
    sim->add_option("--head", si_head, "trained head JSON")->required();
    sim->add_option("--pairs-per-cell", si_pairs, "sampled pairs per matrix cell");
    sim->add_option("--seed", si_seed, "PRNG seed");
    sim->add_option("--out", si_out, "output JSON path (default stdout)");

    // cluster
    auto* clu = app.add_subcommand("cluster", "Fit one clustering algorithm");
    std::string cl_in;
    pipeline::ClusteringConfig cl_cfg;
    clu->add_option("--algorithm", cl_cfg.algorithm, "kmeans|gmm|agg|clara|kmodes|pam|kmedoids")
        ->required();
    clu->add_option("--k", cl_cfg.k, "number of clusters");
    clu->add_option("--in", cl_in, "embedding CSV")->required();
    clu->add_option("--seed", cl_cfg.seed, "PRNG seed");
    clu->add_option("--linkage", cl_cfg.linkage, "agg linkage: single|complete|average|ward");
    clu->add_option("--max-iter", cl_cfg.max_iter, "iteration cap");
    clu->add_option("--tol", cl_cfg.tol, "convergence tolerance");
    clu->add_option("--sample-size", cl_cfg.sample_size, "CLARA subsample size");
    clu->add_option("--n-samples", cl_cfg.n_samples, "CLARA subsample count");

    // config-driven subcommands
    detail::ConfigOverrides overrides;
    std::string cfg_path, cmp_algorithms;

    auto* zsl = app.add_subcommand("zsl", "Run the full zero-shot pipeline");
    auto* cmp = app.add_subcommand("compare", "Compare clustering algorithms on one run");
    auto* abl = app.add_subcommand("ablate", "Run the three ablation modes");
    for (CLI::App* sub : {zsl, cmp, abl}) {
        sub->add_option("--config", cfg_path, "pipeline config JSON")->required();
        sub->add_option("--embeddings", overrides.embeddings, "override embeddings_path");
        sub->add_option("--target", overrides.target, "override target_class");
        sub->add_option("--control", overrides.control, "override control_class");
        sub->add_option("--seed", overrides.seed, "override similarity and clustering seeds");
        sub->add_option("--out-dir", overrides.output_dir, "override output_dir");
    }
    zsl->add_option("--algorithm", overrides.algorithm, "override clustering algorithm");
    cmp->add_option("--algorithms", cmp_algorithms, "comma-separated list (default: all)");

    // seg-eval
    auto* seg = app.add_subcommand("seg-eval", "Score predicted maps against truth masks");
    std::string se_manifest, se_out;
    double se_threshold = 0.5;
    segeval::FocalParams se_focal;
    seg->add_option("--manifest", se_manifest, "CSV of truth_path,pred_path pairs")->required();
    seg->add_option("--threshold", se_threshold, "binarization threshold");
    seg->add_option("--alpha", se_focal.alpha, "focal alpha");
    seg->add_option("--gamma", se_focal.gamma, "focal gamma");
    seg->add_option("--out", se_out, "output JSON path (default stdout)");

    // report
    auto* rep = app.add_subcommand("report", "Print the flat CSV for a report JSON");
    std::string re_in;
    rep->add_option("--in", re_in, "report.json path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n\n" << app.help() << std::flush;
        return 1;
    }

    try {
        if (*synth) {
            const EmbeddingSet set =
                ingest::synth_cohort(sy_classes, sy_per_class, sy_dim, sy_separation, sy_seed);
            ingest::save_embeddings(set, sy_out);
            std::cout << "wrote " << sy_out << " (" << set.records.size() << " records)\n";
        } else if (*train) {
            const EmbeddingSet set = ingest::load_embeddings(tr_in);
            const siamese::SiameseHead head = siamese::train_head(set, tr_cfg);
            detail::write_text(tr_out, json_of(head).dump(2) + "\n");
            std::cout << "wrote " << tr_out << "\n";
        } else if (*sim) {
            const EmbeddingSet set = ingest::load_embeddings(si_in);
            const siamese::SiameseHead head = head_from_json(detail::read_json_file(si_head));
            const auto matrix = siamese::similarity_matrix(head, set, si_pairs, si_seed);
            const std::string text = json_of(matrix).dump(2) + "\n";
            if (si_out.empty()) std::cout << text;
            else detail::write_text(si_out, text);
        } else if (*clu) {
            const EmbeddingSet set = ingest::load_embeddings(cl_in);
            const auto fit = pipeline::fit_clustering(to_points(set), cl_cfg,
                                                      derive_seed(cl_cfg.seed, cl_cfg.algorithm));
            ClusterRunRecord record;
            record.algorithm = cl_cfg.algorithm;
            record.params = json{{"k", cl_cfg.k},
                                 {"linkage", cl_cfg.linkage},
                                 {"max_iter", cl_cfg.max_iter},
                                 {"tol", cl_cfg.tol},
                                 {"sample_size", cl_cfg.sample_size},
                                 {"n_samples", cl_cfg.n_samples}};
            record.seed = cl_cfg.seed;
            record.assignment = fit.assignment.labels;
            record.cost_or_loglik = fit.cost_or_loglik;
            record.centers_or_medoids = fit.representatives;
            std::cout << json_of(record).dump(2) << "\n";
        } else if (*zsl || *cmp || *abl) {
            pipeline::PipelineConfig config =
                pipeline::config_from_json(detail::read_json_file(cfg_path));
            overrides.apply(config);
            const EmbeddingSet data = ingest::load_embeddings(config.embeddings_path);
            if (*zsl) {
                const pipeline::RunReport report = pipeline::run_zsl(data, config);
                detail::write_run_outputs(report, config.output_dir);
                std::cout << "proxy=" << report.proxy_class << " report written to "
                          << config.output_dir << "/report.json\n";
            } else if (*cmp) {
                std::vector<std::string> algorithms = detail::split_list(cmp_algorithms);
                if (algorithms.empty()) {
                    const json& cj = detail::read_json_file(cfg_path);
                    if (cj.contains("algorithms"))
                        algorithms = cj.at("algorithms").get<std::vector<std::string>>();
                }
                if (algorithms.empty()) algorithms = pipeline::known_algorithms();
                const pipeline::RunReport report =
                    pipeline::compare_clusterers(data, config, algorithms);
                detail::write_run_outputs(report, config.output_dir);
                std::cout << pipeline::report_csv(report);
            } else {
                const auto reports = pipeline::run_ablation(data, config);
                json modes = json::object();
                for (const auto& r : reports) modes[r.mode] = pipeline::report_json(r);
                std::filesystem::create_directories(config.output_dir);
                const auto dir = std::filesystem::path(config.output_dir);
                detail::write_text((dir / "ablation.json").string(),
                                   json{{"schema", 1}, {"modes", modes}}.dump(2) + "\n");
                for (const auto& r : reports)
                    std::cout << r.mode << ": accuracy="
                              << format_double(r.results.at(0).eval.accuracy) << "\n";
            }
        } else if (*seg) {
            std::ifstream in(se_manifest);
            if (!in) throw IoError("cannot open '" + se_manifest + "'");
            json images = json::array();
            double sum_focal = 0.0, sum_miou = 0.0, sum_mpa = 0.0, sum_acc = 0.0;
            std::string line;
            std::size_t count = 0;
            while (std::getline(in, line)) {
                if (!line.empty() && line.back() == '\r') line.pop_back();
                if (line.empty() || line == "truth_path,pred_path") continue;
                const std::size_t comma = line.find(',');
                if (comma == std::string::npos)
                    throw DataError(se_manifest + ": manifest line needs truth_path,pred_path");
                const std::string truth_path = line.substr(0, comma);
                const std::string pred_path = line.substr(comma + 1);
                segeval::MaskPair pair{ingest::load_mask(truth_path),
                                       ingest::load_probmap(pred_path)};
                const double focal = segeval::focal_loss(pair, se_focal);
                const auto m =
                    segeval::seg_metrics(segeval::threshold(pair.pred_prob, se_threshold),
                                         pair.truth);
                images.push_back(json{{"truth", truth_path},
                                      {"pred", pred_path},
                                      {"focal_loss", focal},
                                      {"miou", m.miou},
                                      {"mpa", m.mpa},
                                      {"overall_acc", m.overall_acc}});
                sum_focal += focal;
                sum_miou += m.miou;
                sum_mpa += m.mpa;
                sum_acc += m.overall_acc;
                ++count;
            }
            if (count == 0) throw DataError(se_manifest + ": empty manifest");
            const double inv = 1.0 / static_cast<double>(count);
            const json out{{"images", images},
                           {"aggregate",
                            {{"focal_loss", sum_focal * inv},
                             {"miou", sum_miou * inv},
                             {"mpa", sum_mpa * inv},
                             {"overall_acc", sum_acc * inv}}}};
            const std::string text = out.dump(2) + "\n";
            if (se_out.empty()) std::cout << text;
            else detail::write_text(se_out, text);
        } else if (*rep) {
            const json j = detail::read_json_file(re_in);
            std::string out = "algorithm,accuracy,precision,recall,f1,auc\n";
            for (const auto& s : j.at("results")) {
                const json& e = s.at("eval");
                out += s.at("algorithm").get<std::string>();
                for (const char* key : {"accuracy", "precision", "recall", "f1", "auc"})
                    out += ',' + format_double(e.at(key).get<double>());
                out += '\n';
            }
            std::cout << out;
        }
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const json::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}

} // namespace rura::cli
