#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "rura/ingest.hpp"
#include "rura/siamese.hpp"

using namespace rura;
using siamese::LabeledPair;
using siamese::SiameseHead;
using siamese::TrainConfig;

namespace {

SiameseHead random_head(Rng& rng, std::size_t p, std::size_t d) {
    SiameseHead head;
    head.projection = Matrix(p, d);
    for (double& w : head.projection.data) w = rng.normal();
    head.scorer_weights.assign(p, 0.0);
    return head;
}

LabeledPair make_pair(std::vector<double> a, std::vector<double> b, int match) {
    LabeledPair p;
    p.a.id = "a";
    p.a.vector = std::move(a);
    p.b.id = "b";
    p.b.vector = std::move(b);
    p.match = match;
    return p;
}

// full-dataset contrastive loss over all labeled record pairs
double dataset_loss(const SiameseHead& head, const EmbeddingSet& data, double margin) {
    std::vector<std::pair<double, int>> pairs;
    for (std::size_t i = 0; i < data.records.size(); ++i) {
        for (std::size_t j = i + 1; j < data.records.size(); ++j) {
            const auto& a = data.records[i];
            const auto& b = data.records[j];
            if (!a.label || !b.label) continue;
            const double d = siamese::l2_distance(siamese::project(head, a.vector),
                                                  siamese::project(head, b.vector));
            pairs.emplace_back(d, *a.label == *b.label ? 1 : 0);
        }
    }
    return siamese::contrastive_loss(pairs, margin);
}

} // namespace

TEST_CASE("l2_distance") {
    CHECK(siamese::l2_distance({3, 4}, {0, 0}) == doctest::Approx(5.0));
    CHECK(siamese::l2_distance({1.5, -2.0, 7.0}, {1.5, -2.0, 7.0}) == 0.0);
    CHECK(siamese::l2_distance({1, 2, 3}, {4, 6, 3}) == doctest::Approx(5.0));
    CHECK_THROWS_AS(siamese::l2_distance({1, 2}, {1, 2, 3}), std::invalid_argument);
}

TEST_CASE("contrastive_loss on the named cases") {
    CHECK(siamese::contrastive_loss({{0.0, 1}}, 1.0) == 0.0);
    CHECK(siamese::contrastive_loss({{0.0, 0}}, 1.0) == doctest::Approx(0.5));
    // (1/4)(2^2 + max(1-0.5,0)^2) = (1/4)(4 + 0.25)
    CHECK(siamese::contrastive_loss({{2.0, 1}, {0.5, 0}}, 1.0) == doctest::Approx(1.0625));
    CHECK_THROWS_AS(siamese::contrastive_loss({}, 1.0), std::invalid_argument);
}

TEST_CASE("contrastive_loss sign and zero conditions") {
    Rng rng(3);
    for (int t = 0; t < 100; ++t) {
        std::vector<std::pair<double, int>> pairs;
        for (int i = 0; i < 8; ++i)
            pairs.emplace_back(2.0 * rng.uniform01(), rng.uniform01() < 0.5 ? 1 : 0);
        CHECK(siamese::contrastive_loss(pairs, 1.0) >= 0.0);
    }
    // zero exactly when matched pairs sit at 0 and unmatched beyond the margin
    CHECK(siamese::contrastive_loss({{0.0, 1}, {1.0, 0}, {3.7, 0}}, 1.0) == 0.0);
    CHECK(siamese::contrastive_loss({{0.01, 1}}, 1.0) > 0.0);
    CHECK(siamese::contrastive_loss({{0.99, 0}}, 1.0) > 0.0);

    // and conversely: a zero loss implies every pair sits on its zero branch
    Rng gen(91);
    for (int t = 0; t < 200; ++t) {
        std::vector<std::pair<double, int>> pairs;
        for (int i = 0; i < 6; ++i) {
            const int y = gen.uniform01() < 0.5 ? 1 : 0;
            const double d = gen.uniform01() < 0.4 ? 0.0 : 2.5 * gen.uniform01();
            pairs.emplace_back(y == 1 && gen.uniform01() < 0.5 ? 0.0 : d, y);
        }
        if (siamese::contrastive_loss(pairs, 1.0) == 0.0)
            for (const auto& [d, y] : pairs) CHECK((y == 1 ? d == 0.0 : d >= 1.0));
    }
}

TEST_CASE("contrastive_loss monotonicity in d_w") {
    // non-increasing in d for Y=0, non-decreasing for Y=1
    double prev0 = siamese::contrastive_loss({{0.0, 0}}, 1.5);
    double prev1 = siamese::contrastive_loss({{0.0, 1}}, 1.5);
    for (double d = 0.05; d < 2.5; d += 0.05) {
        const double l0 = siamese::contrastive_loss({{d, 0}}, 1.5);
        const double l1 = siamese::contrastive_loss({{d, 1}}, 1.5);
        CHECK(l0 <= prev0 + 1e-15);
        CHECK(l1 >= prev1 - 1e-15);
        prev0 = l0;
        prev1 = l1;
    }
}

TEST_CASE("contrastive_grad trivial branches") {
    Rng rng(17);
    auto head = random_head(rng, 3, 4);

    // matched identical pairs: loss already at its minimum branch
    const std::vector<double> x{1.0, -2.0, 0.5, 3.0};
    const auto zero_grad = siamese::contrastive_grad(head, {make_pair(x, x, 1)}, 1.0);
    for (double g : zero_grad.data) CHECK(g == 0.0);

    // Y=0 pair beyond the margin contributes nothing
    SiameseHead identity;
    identity.projection = Matrix(2, 2);
    identity.projection(0, 0) = 1.0;
    identity.projection(1, 1) = 1.0;
    identity.scorer_weights.assign(2, 0.0);
    const auto far = siamese::contrastive_grad(
        identity, {make_pair({10.0, 0.0}, {0.0, 0.0}, 0)}, 1.0);
    for (double g : far.data) CHECK(g == 0.0);

    CHECK_THROWS_AS(siamese::contrastive_grad(head, {}, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(siamese::contrastive_grad(head, {make_pair({1.0}, {0.5}, 1)}, 1.0),
                    std::invalid_argument);
}

TEST_CASE("contrastive_grad matches central finite differences") {
    Rng rng(2024);
    int checked = 0;
    while (checked < 40) {
        const std::size_t d = 2 + rng.uniform_index(4);
        const std::size_t p = 1 + rng.uniform_index(3);
        auto head = random_head(rng, p, d);
        const double margin = 0.5 + rng.uniform01();

        std::vector<LabeledPair> batch;
        bool near_kink = false;
        for (int i = 0; i < 4; ++i) {
            std::vector<double> a(d), b(d);
            for (std::size_t j = 0; j < d; ++j) {
                a[j] = rng.normal();
                b[j] = rng.normal();
            }
            const int y = i % 2;
            batch.push_back(make_pair(a, b, y));
            const double dw = siamese::pair_distance(head, a, b);
            if (y == 0 && std::abs(dw - margin) < 1e-3) near_kink = true;
        }
        if (near_kink) continue;  // finite differences straddle the hinge kink

        const Matrix analytic = siamese::contrastive_grad(head, batch, margin);
        const Matrix numeric = oracles::finite_diff_grad(head, batch, margin);
        Matrix diff = analytic;
        for (std::size_t i = 0; i < diff.data.size(); ++i) diff.data[i] -= numeric.data[i];
        const double denom = std::max(oracles::frobenius(numeric), 1e-12);
        CHECK(oracles::frobenius(diff) / denom < 1e-4);
        ++checked;
    }
}

TEST_CASE("train_head separates match and non-match distances") {
    const auto data = ingest::synth_cohort(2, 20, 4, 8.0, 1);
    TrainConfig cfg;
    cfg.seed = 1;
    const auto head = siamese::train_head(data, cfg);

    double match_sum = 0.0, non_sum = 0.0;
    std::size_t match_n = 0, non_n = 0;
    for (std::size_t i = 0; i < data.records.size(); ++i)
        for (std::size_t j = i + 1; j < data.records.size(); ++j) {
            const double d = siamese::pair_distance(head, data.records[i].vector,
                                                    data.records[j].vector);
            if (*data.records[i].label == *data.records[j].label) {
                match_sum += d;
                ++match_n;
            } else {
                non_sum += d;
                ++non_n;
            }
        }
    CHECK(non_sum / static_cast<double>(non_n) > match_sum / static_cast<double>(match_n));
}

TEST_CASE("train_head with zero epochs returns the initialization") {
    const auto data = ingest::synth_cohort(2, 5, 4, 4.0, 3);
    TrainConfig cfg;
    cfg.epochs = 0;
    cfg.seed = 9;
    const auto head = siamese::train_head(data, cfg);
    for (double w : head.scorer_weights) CHECK(w == 0.0);
    CHECK(head.scorer_bias == 0.0);
    // init bound: entries within [-1/sqrt(d), 1/sqrt(d)]
    for (double w : head.projection.data) CHECK(std::abs(w) <= 0.5);
    CHECK(head.projected_dim() == 4);  // min(d, 32)
    CHECK(siamese::train_head(data, cfg) == head);
}

TEST_CASE("train_head determinism and config validation") {
    const auto data = ingest::synth_cohort(3, 6, 5, 5.0, 21);
    TrainConfig cfg;
    cfg.epochs = 5;
    cfg.seed = 77;
    CHECK(siamese::train_head(data, cfg) == siamese::train_head(data, cfg));

    TrainConfig other = cfg;
    other.seed = 78;
    CHECK(siamese::train_head(data, other) != siamese::train_head(data, cfg));

    // fewer than 2 classes
    auto one_class = oracles::make_set({{0.0}, {1.0}, {2.0}}, {"a", "a", "a"});
    CHECK_THROWS_AS(siamese::train_head(one_class, cfg), DataError);
    // class with a single record
    auto singleton = oracles::make_set({{0.0}, {1.0}, {2.0}}, {"a", "a", "b"});
    CHECK_THROWS_AS(siamese::train_head(singleton, cfg), DataError);

    TrainConfig bad = cfg;
    bad.margin = 0.0;
    CHECK_THROWS_AS(siamese::train_head(data, bad), std::invalid_argument);
}

TEST_CASE("train_head loss descent on separated cohorts") {
    for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
        const auto data = ingest::synth_cohort(2, 12, 4, 4.0, seed);
        TrainConfig cfg;
        cfg.seed = seed;
        TrainConfig init_cfg = cfg;
        init_cfg.epochs = 0;
        const auto init = siamese::train_head(data, init_cfg);
        const auto trained = siamese::train_head(data, cfg);
        CHECK(dataset_loss(trained, data, cfg.margin) <=
              dataset_loss(init, data, cfg.margin));
    }
}

TEST_CASE("pair_score basics") {
    SiameseHead head;
    head.projection = Matrix(2, 2);
    head.projection(0, 0) = 1.0;
    head.projection(1, 1) = 1.0;
    head.scorer_weights = {0.0, 0.0};
    head.scorer_bias = 0.0;

    // zero scorer: sigma(0) for any pair
    CHECK(siamese::pair_score(head, {1.0, 2.0}, {-3.0, 0.5}) == doctest::Approx(0.5));

    head.scorer_weights = {-1.5, 0.25};
    head.scorer_bias = 0.75;
    // x = y: sigma(bias) regardless of weights
    CHECK(siamese::pair_score(head, {2.0, 2.0}, {2.0, 2.0}) ==
          doctest::Approx(sigmoid(0.75)));

    // exact symmetry
    Rng rng(31);
    for (int t = 0; t < 50; ++t) {
        const std::vector<double> x{rng.normal(), rng.normal()};
        const std::vector<double> y{rng.normal(), rng.normal()};
        CHECK(siamese::pair_score(head, x, y) == siamese::pair_score(head, y, x));
    }

    CHECK_THROWS_AS(siamese::pair_score(head, {1.0}, {1.0, 2.0}), std::invalid_argument);
}

TEST_CASE("similarity_matrix on duplicated separated classes") {
    // two classes of identical duplicated vectors
    Points pts;
    std::vector<std::string> labels;
    for (int i = 0; i < 6; ++i) {
        pts.push_back({0.0, 0.0});
        labels.push_back("near");
        pts.push_back({6.0, -6.0});
        labels.push_back("far");
    }
    const auto data = oracles::make_set(pts, labels);
    TrainConfig cfg;
    cfg.seed = 4;
    const auto head = siamese::train_head(data, cfg);
    const auto m = siamese::similarity_matrix(head, data, 32, 11);

    REQUIRE(m.class_names.size() == 2);
    CHECK(m.values[0][1] < m.values[0][0]);
    CHECK(m.values[0][1] < m.values[1][1]);

    // exact symmetry and range
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 2; ++j) {
            CHECK(m.values[i][j] == m.values[j][i]);
            CHECK(m.values[i][j] >= 0.0);
            CHECK(m.values[i][j] <= 1.0);
        }
}

TEST_CASE("similarity_matrix determinism and errors") {
    const auto data = ingest::synth_cohort(3, 5, 3, 5.0, 8);
    TrainConfig cfg;
    cfg.epochs = 3;
    cfg.seed = 2;
    const auto head = siamese::train_head(data, cfg);
    const auto a = siamese::similarity_matrix(head, data, 10, 42);
    const auto b = siamese::similarity_matrix(head, data, 10, 42);
    CHECK(a.values == b.values);
    CHECK(a.class_names == std::vector<std::string>{"c0", "c1", "c2"});

    const auto single = oracles::make_set({{0.0}, {1.0}}, {"only", "only"});
    SiameseHead tiny;
    tiny.projection = Matrix(1, 1, 1.0);
    tiny.scorer_weights = {0.0};
    CHECK_THROWS_AS(siamese::similarity_matrix(tiny, single, 4, 0), DataError);

    // explicit class order with a class that has no records
    CHECK_THROWS_AS(siamese::similarity_matrix(head, data, 4, 0, {"c0", "zz"}), DataError);
}

TEST_CASE("most_similar selection and tie rule") {
    siamese::SimilarityMatrix m;
    m.class_names = {"AMD", "DM", "DR1"};
    m.values = {{0.7, 0.2, 0.3}, {0.2, 0.9, 0.8}, {0.3, 0.8, 0.9}};
    // row DR1: AMD 0.3, DM 0.8 -> DM
    CHECK(siamese::most_similar(m, "DR1") == "DM");

    // off-diagonal tie resolves to the earliest class position
    siamese::SimilarityMatrix tie;
    tie.class_names = {"a", "b", "c"};
    tie.values = {{0.9, 0.4, 0.4}, {0.4, 0.9, 0.1}, {0.4, 0.1, 0.9}};
    CHECK(siamese::most_similar(tie, "a") == "b");

    // K = 2 returns the only other class no matter the values
    siamese::SimilarityMatrix two;
    two.class_names = {"x", "y"};
    two.values = {{0.1, 0.0}, {0.0, 0.9}};
    CHECK(siamese::most_similar(two, "x") == "y");
    CHECK(siamese::most_similar(two, "y") == "x");

    CHECK_THROWS_AS(siamese::most_similar(m, "nope"), std::invalid_argument);
}

TEST_CASE("most_similar is invariant under monotone transforms of the row") {
    Rng rng(55);
    for (int t = 0; t < 50; ++t) {
        siamese::SimilarityMatrix m;
        m.class_names = {"a", "b", "c", "d"};
        m.values.assign(4, std::vector<double>(4, 0.0));
        for (std::size_t i = 0; i < 4; ++i)
            for (std::size_t j = 0; j < 4; ++j) m.values[i][j] = rng.uniform01();
        const auto before = siamese::most_similar(m, "b");
        for (std::size_t j = 0; j < 4; ++j)
            m.values[1][j] = 2.0 * std::atan(3.0 * m.values[1][j]) + 5.0;
        CHECK(siamese::most_similar(m, "b") == before);
    }
}
