#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <unistd.h>
#include <fstream>
#include <sstream>

#include "oracles.hpp"
#include "rura/cli.hpp"
#include "rura/ingest.hpp"
#include "rura/pipeline.hpp"
#include "rura/serialize.hpp"

using namespace rura;

namespace {

struct TempDir {
    static inline int counter = 0;
    std::filesystem::path path;
    TempDir() {
        path = std::filesystem::temp_directory_path() /
               ("rura_pipe_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

pipeline::PipelineConfig planted_config(std::uint64_t seed) {
    pipeline::PipelineConfig config;
    config.target_class = "c0";
    config.control_class = "c3";
    config.similarity.train.seed = seed;
    config.similarity.train.epochs = 40;
    config.similarity.pairs_per_cell = 40;
    config.clustering.seed = seed;
    config.clustering.algorithm = "agg";
    return config;
}

int run_cli(std::initializer_list<const char*> args) {
    std::vector<const char*> argv{"rura"};
    argv.insert(argv.end(), args.begin(), args.end());
    return cli::run(static_cast<int>(argv.size()), argv.data());
}

} // namespace

TEST_CASE("config JSON round-trip, schema and unknown-key handling") {
    pipeline::PipelineConfig config = planted_config(5);
    config.embeddings_path = "x.csv";
    config.lesion_dims = std::vector<std::size_t>{0, 2};
    const json echoed = pipeline::json_of(config);
    const pipeline::PipelineConfig back = pipeline::config_from_json(echoed);
    CHECK(pipeline::json_of(back) == echoed);

    json bad = echoed;
    bad["typo_key"] = 1;
    CHECK_THROWS_WITH_AS(pipeline::config_from_json(bad), doctest::Contains("typo_key"),
                         DataError);

    json bad_nested = echoed;
    bad_nested["clustering"]["mystery"] = 2;
    CHECK_THROWS_AS(pipeline::config_from_json(bad_nested), DataError);

    json no_schema = echoed;
    no_schema.erase("schema");
    CHECK_THROWS_AS(pipeline::config_from_json(no_schema), DataError);
    json wrong_schema = echoed;
    wrong_schema["schema"] = 2;
    CHECK_THROWS_AS(pipeline::config_from_json(wrong_schema), DataError);

    json bad_algo = echoed;
    bad_algo["clustering"]["algorithm"] = "dbscan";
    CHECK_THROWS_WITH_AS(pipeline::config_from_json(bad_algo), doctest::Contains("dbscan"),
                         DataError);

    json bad_mode = echoed;
    bad_mode["ablation"] = "everything";
    CHECK_THROWS_AS(pipeline::config_from_json(bad_mode), DataError);
}

TEST_CASE("run_zsl picks the planted proxy and classifies the held-out target") {
    for (std::uint64_t seed : {11ULL, 12ULL, 13ULL, 14ULL}) {
        const auto data = ingest::synth_cohort(4, 15, 8, 6.0, seed);
        const auto config = planted_config(seed);
        const auto report = pipeline::run_zsl(data, config);
        // c0 sits one lattice step from c1 and further from c2/c3
        CHECK(report.proxy_class == "c1");
        CHECK(report.results.at(0).eval.accuracy >= 0.95);
        CHECK(report.results.at(0).eval.auc >= 0.95);
        REQUIRE(report.similarity.has_value());
        // target row is appended last
        CHECK(report.similarity->class_names.back() == "c0");
    }
}

TEST_CASE("run_zsl validation errors carry stage context") {
    const auto data = ingest::synth_cohort(4, 10, 4, 5.0, 3);
    auto config = planted_config(3);

    config.target_class = "nope";
    CHECK_THROWS_AS(pipeline::run_zsl(data, config), DataError);

    config = planted_config(3);
    config.control_class = "c0";
    CHECK_THROWS_AS(pipeline::run_zsl(data, config), DataError);

    config = planted_config(3);
    config.clustering.k = 3;
    CHECK_THROWS_WITH_AS(pipeline::run_zsl(data, config), doctest::Contains("k = 2"), DataError);

    config = planted_config(3);
    config.lesion_dims = std::vector<std::size_t>{};
    CHECK_THROWS_WITH_AS(pipeline::run_zsl(data, config), doctest::Contains("lesion_dims"),
                         DataError);

    config = planted_config(3);
    config.lesion_dims = std::vector<std::size_t>{99};
    CHECK_THROWS_AS(pipeline::run_zsl(data, config), DataError);
}

TEST_CASE("zero-shot contract: renaming the target class changes nothing numeric") {
    const auto data = ingest::synth_cohort(4, 12, 8, 6.0, 21);
    const auto config = planted_config(21);
    const auto base = pipeline::run_zsl(data, config);

    // consistent rename of the target class, sorting it last instead of first
    EmbeddingSet renamed = data;
    for (auto& r : renamed.records)
        if (r.label && *r.label == "c0") r.label = "zz_target";
    auto renamed_config = config;
    renamed_config.target_class = "zz_target";
    const auto moved = pipeline::run_zsl(renamed, renamed_config);

    CHECK(moved.proxy_class == base.proxy_class);
    REQUIRE(base.similarity.has_value());
    REQUIRE(moved.similarity.has_value());
    CHECK(moved.similarity->values == base.similarity->values);
    CHECK(rura::json_of(base.results.at(0).eval) == rura::json_of(moved.results.at(0).eval));
}

TEST_CASE("run_zsl determinism: identical reports byte for byte") {
    const auto data = ingest::synth_cohort(4, 10, 6, 6.0, 33);
    const auto config = planted_config(33);
    const auto a = pipeline::run_zsl(data, config);
    const auto b = pipeline::run_zsl(data, config);
    CHECK(pipeline::report_json(a).dump(2) == pipeline::report_json(b).dump(2));
}

TEST_CASE("compare_clusterers keeps order, inputs and single-run consistency") {
    const auto data = ingest::synth_cohort(4, 20, 6, 8.0, 44);
    const auto config = planted_config(44);

    const std::vector<std::string> algos{"kmeans", "agg", "pam", "kmedoids", "clara"};
    const auto report = pipeline::compare_clusterers(data, config, algos);
    REQUIRE(report.results.size() == algos.size());
    for (std::size_t i = 0; i < algos.size(); ++i) {
        CHECK(report.results[i].algorithm == algos[i]);
        CHECK(report.results[i].eval.accuracy >= 0.95);
        // byte-identical clustering inputs across algorithms
        CHECK(report.results[i].input_digest == report.results[0].input_digest);
    }

    // a single-algorithm comparison equals the plain zero-shot run
    const auto single = pipeline::compare_clusterers(data, config, {"agg"});
    const auto direct = pipeline::run_zsl(data, config);
    CHECK(pipeline::report_json(single).at("results").at(0) ==
          pipeline::report_json(direct).at("results").at(0));

    CHECK_THROWS_AS(pipeline::compare_clusterers(data, config, {"dbscan"}), DataError);
    CHECK_THROWS_AS(pipeline::compare_clusterers(data, config, {}), DataError);
}

TEST_CASE("compare_clusterers lands in the chance band on a separation-0 cohort") {
    const auto data = ingest::synth_cohort(4, 60, 6, 0.0, 801);
    const auto config = planted_config(801);
    const auto report = pipeline::compare_clusterers(data, config, pipeline::known_algorithms());
    for (const auto& r : report.results) {
        CHECK(r.eval.accuracy >= 0.4);
        CHECK(r.eval.accuracy <= 0.6);
    }
}

TEST_CASE("run_ablation: three deterministic modes, full on top") {
    const auto data = oracles::ablation_cohort(101);
    pipeline::PipelineConfig config;
    config.target_class = "t";
    config.control_class = "h";
    config.lesion_dims = std::vector<std::size_t>{0, 1, 2, 3};
    config.similarity.train.seed = 101;
    config.similarity.train.epochs = 40;
    config.clustering.seed = 101;
    config.clustering.algorithm = "kmeans";

    const auto reports = pipeline::run_ablation(data, config);
    REQUIRE(reports.size() == 3);
    double seg = -1.0, siam = -1.0, full = -1.0;
    for (const auto& r : reports) {
        if (r.mode == "segmentation_only") {
            seg = r.results.at(0).eval.accuracy;
            CHECK(!r.similarity.has_value());  // no similarity stage in this mode
        } else if (r.mode == "siamese_only") {
            siam = r.results.at(0).eval.accuracy;
        } else if (r.mode == "full") {
            full = r.results.at(0).eval.accuracy;
        }
    }
    CHECK(full >= seg);
    CHECK(full >= siam);
    CHECK(siam < 0.8);  // the noise coordinates degrade full-width clustering
    CHECK(seg > siam);  // same qualitative ordering as the reference ablation

    const auto again = pipeline::run_ablation(data, config);
    for (std::size_t i = 0; i < 3; ++i)
        CHECK(pipeline::report_json(reports[i]).dump() == pipeline::report_json(again[i]).dump());
}

TEST_CASE("similarity matrix JSON round-trip") {
    siamese::SimilarityMatrix m;
    m.class_names = {"a", "b"};
    m.values = {{0.5, 0.25}, {0.25, 0.75}};
    const auto back = similarity_from_json(json_of(m));
    CHECK(back.class_names == m.class_names);
    CHECK(back.values == m.values);

    json bad = json_of(m);
    bad["values"] = std::vector<std::vector<double>>{{0.5}};
    CHECK_THROWS_AS(similarity_from_json(bad), DataError);
}

TEST_CASE("head JSON round-trip preserves scoring") {
    const auto data = ingest::synth_cohort(3, 8, 5, 5.0, 17);
    siamese::TrainConfig cfg;
    cfg.epochs = 8;
    cfg.seed = 17;
    const auto head = siamese::train_head(data, cfg);
    const auto back = head_from_json(json_of(head));
    CHECK(back == head);

    json broken = json_of(head);
    broken["scorer_weights"] = std::vector<double>{1.0};
    CHECK_THROWS_AS(head_from_json(broken), DataError);
}

TEST_CASE("CLI: synth, train-head, cluster, zsl, report flow") {
    TempDir dir;
    const auto emb = dir.file("emb.csv");
    CHECK(run_cli({"synth", "--classes", "4", "--per-class", "12", "--dim", "6",
                   "--separation", "6", "--seed", "5", "--out", emb.c_str()}) == 0);
    CHECK(std::filesystem::exists(emb));

    const auto head_path = dir.file("head.json");
    CHECK(run_cli({"train-head", "--in", emb.c_str(), "--out", head_path.c_str(), "--epochs",
                   "10", "--seed", "5"}) == 0);
    CHECK_NOTHROW(head_from_json(cli::detail::read_json_file(head_path)));

    // pipeline config + zsl run
    const auto out_dir = dir.file("out");
    json cfg{{"schema", 1},
             {"embeddings_path", emb},
             {"target_class", "c0"},
             {"control_class", "c3"},
             {"output_dir", out_dir},
             {"similarity", {{"epochs", 20}, {"seed", 5}}},
             {"clustering", {{"algorithm", "agg"}, {"seed", 5}}}};
    const auto cfg_path = dir.file("run.json");
    {
        std::ofstream out(cfg_path);
        out << cfg.dump(2);
    }
    CHECK(run_cli({"zsl", "--config", cfg_path.c_str()}) == 0);
    CHECK(std::filesystem::exists(out_dir + "/report.json"));
    CHECK(std::filesystem::exists(out_dir + "/report.csv"));
    CHECK(std::filesystem::exists(out_dir + "/timings.json"));

    const json report = cli::detail::read_json_file(out_dir + "/report.json");
    CHECK(report.at("proxy_class") == "c1");

    // a --seed override must flow into both stage seeds and change the report
    const auto out_dir2 = dir.file("out2");
    CHECK(run_cli({"zsl", "--config", cfg_path.c_str(), "--seed", "77", "--out-dir",
                   out_dir2.c_str()}) == 0);
    const json seeded = cli::detail::read_json_file(out_dir2 + "/report.json");
    CHECK(seeded.at("config").at("similarity").at("seed") == 77);
    CHECK(seeded.at("config").at("clustering").at("seed") == 77);
    CHECK(seeded.at("similarity") != report.at("similarity"));

    // flat CSV regenerated from the report JSON matches the written one
    std::ostringstream captured;
    auto* old = std::cout.rdbuf(captured.rdbuf());
    const int rc = run_cli({"report", "--in", (out_dir + "/report.json").c_str()});
    std::cout.rdbuf(old);
    CHECK(rc == 0);
    CHECK(captured.str() == read_file(out_dir + "/report.csv"));
}

TEST_CASE("CLI: cluster emits the documented JSON record") {
    TempDir dir;
    const auto emb = dir.file("emb.csv");
    REQUIRE(run_cli({"synth", "--classes", "2", "--per-class", "8", "--dim", "3",
                     "--separation", "9", "--seed", "3", "--out", emb.c_str()}) == 0);
    std::ostringstream captured;
    auto* old = std::cout.rdbuf(captured.rdbuf());
    const int rc = run_cli({"cluster", "--algorithm", "kmeans", "--k", "2", "--in", emb.c_str(),
                            "--seed", "3"});
    std::cout.rdbuf(old);
    REQUIRE(rc == 0);
    const json record = json::parse(captured.str());
    for (const char* key :
         {"algorithm", "params", "seed", "assignment", "cost_or_loglik", "centers_or_medoids"})
        CHECK(record.contains(key));
    CHECK(record.at("algorithm") == "kmeans");
    CHECK(record.at("assignment").size() == 16);
    CHECK(record.at("centers_or_medoids").size() == 2);
}

TEST_CASE("CLI: exit codes") {
    TempDir dir;
    // usage errors -> 1
    CHECK(run_cli({"frobnicate"}) == 1);
    CHECK(run_cli({"cluster", "--no-such-flag", "x"}) == 1);
    CHECK(run_cli({}) == 1);
    // data errors -> 2
    CHECK(run_cli({"cluster", "--algorithm", "kmeans", "--in", dir.file("missing.csv").c_str()}) ==
          2);
    const auto bad = dir.file("bad.csv");
    {
        std::ofstream out(bad);
        out << "id,label,f0\nx,c,respectfully_not_a_number\n";
    }
    CHECK(run_cli({"cluster", "--algorithm", "kmeans", "--in", bad.c_str()}) == 2);
}

TEST_CASE("CLI: compare writes the flat table") {
    TempDir dir;
    const auto emb = dir.file("emb.csv");
    REQUIRE(run_cli({"synth", "--classes", "4", "--per-class", "15", "--dim", "6",
                     "--separation", "8", "--seed", "9", "--out", emb.c_str()}) == 0);
    const auto out_dir = dir.file("cmp");
    json cfg{{"schema", 1},
             {"embeddings_path", emb},
             {"target_class", "c0"},
             {"control_class", "c3"},
             {"output_dir", out_dir},
             {"similarity", {{"epochs", 20}, {"seed", 9}}},
             {"clustering", {{"seed", 9}}}};
    const auto cfg_path = dir.file("cmp.json");
    {
        std::ofstream out(cfg_path);
        out << cfg.dump(2);
    }
    std::ostringstream captured;
    auto* old = std::cout.rdbuf(captured.rdbuf());
    const int rc = run_cli({"compare", "--config", cfg_path.c_str(), "--algorithms",
                            "kmeans,agg,pam"});
    std::cout.rdbuf(old);
    CHECK(rc == 0);
    const std::string csv = captured.str();
    CHECK(csv.rfind("algorithm,accuracy,precision,recall,f1,auc\n", 0) == 0);
    // rows come back in the order requested
    const auto pos_kmeans = csv.find("\nkmeans,");
    const auto pos_agg = csv.find("\nagg,");
    const auto pos_pam = csv.find("\npam,");
    REQUIRE(pos_kmeans != std::string::npos);
    REQUIRE(pos_agg != std::string::npos);
    REQUIRE(pos_pam != std::string::npos);
    CHECK(pos_kmeans < pos_agg);
    CHECK(pos_agg < pos_pam);
}

TEST_CASE("CLI: compare honors the config's algorithm list") {
    TempDir dir;
    const auto emb = dir.file("emb.csv");
    REQUIRE(run_cli({"synth", "--classes", "4", "--per-class", "10", "--dim", "5",
                     "--separation", "7", "--seed", "2", "--out", emb.c_str()}) == 0);
    json cfg{{"schema", 1},
             {"embeddings_path", emb},
             {"target_class", "c0"},
             {"control_class", "c3"},
             {"output_dir", dir.file("o")},
             {"algorithms", {"agg", "kmeans"}},
             {"similarity", {{"epochs", 15}, {"seed", 2}}},
             {"clustering", {{"seed", 2}}}};
    const auto cfg_path = dir.file("c.json");
    {
        std::ofstream out(cfg_path);
        out << cfg.dump(2);
    }
    std::ostringstream captured;
    auto* old = std::cout.rdbuf(captured.rdbuf());
    const int rc = run_cli({"compare", "--config", cfg_path.c_str()});
    std::cout.rdbuf(old);
    CHECK(rc == 0);
    const std::string csv = captured.str();
    const auto pos_agg = csv.find("\nagg,");
    const auto pos_kmeans = csv.find("\nkmeans,");
    REQUIRE(pos_agg != std::string::npos);
    REQUIRE(pos_kmeans != std::string::npos);
    CHECK(pos_agg < pos_kmeans);
}

TEST_CASE("CLI: seg-eval over a manifest") {
    TempDir dir;
    BinaryMask truth{2, 2, {1, 1, 0, 0}};
    ProbMap pred{2, 2, {0.9, 0.2, 0.1, 0.1}};
    const auto truth_path = dir.file("t.pgm");
    const auto pred_path = dir.file("p.csv");
    ingest::save_mask(truth, truth_path);
    ingest::save_probmap(pred, pred_path);
    const auto manifest = dir.file("manifest.csv");
    {
        std::ofstream out(manifest);
        out << "truth_path,pred_path\n" << truth_path << ',' << pred_path << "\n";
    }
    const auto out_path = dir.file("seg.json");
    CHECK(run_cli({"seg-eval", "--manifest", manifest.c_str(), "--out", out_path.c_str()}) == 0);
    const json out = cli::detail::read_json_file(out_path);
    REQUIRE(out.at("images").size() == 1);
    // pred thresholds to [[1,0],[0,0]]: the hand-counted 7/12 mIoU case
    CHECK(out.at("images").at(0).at("miou").get<double>() == doctest::Approx(7.0 / 12.0));
    CHECK(out.at("aggregate").at("overall_acc").get<double>() == doctest::Approx(0.75));
}
