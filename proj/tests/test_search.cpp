#include <gtest/gtest.h>

#include <Eigen/Dense>

#include "cxr/error.hpp"
#include "cxr/search.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace cxr;

namespace {

struct Archive {
    std::vector<std::string> ids;
    std::vector<Label> labels;
    std::vector<std::vector<float>> rows;

    SearchIndex index(bool normalize = false) const {
        std::vector<float> flat;
        for (const auto& r : rows) flat.insert(flat.end(), r.begin(), r.end());
        return SearchIndex(FeatureConfig::C1, rows.empty() ? 0 : rows[0].size(), ids, labels, flat, normalize);
    }
};

Archive random_archive(Rng& rng, std::size_t n, std::size_t dim, bool coarse = false) {
    Archive a;
    for (std::size_t i = 0; i < n; ++i) {
        a.ids.push_back(testutil::make_id(rng.next_u64() % 100000000));
        a.labels.push_back(rng.below(2) ? Label::Positive : Label::Negative);
        std::vector<float> row(dim);
        // Coarse grids force many exact distance ties.
        for (auto& x : row) x = coarse ? static_cast<float>(rng.below(3)) : static_cast<float>(rng.normal());
        a.rows.push_back(std::move(row));
    }
    std::sort(a.ids.begin(), a.ids.end());
    a.ids.erase(std::unique(a.ids.begin(), a.ids.end()), a.ids.end());
    a.rows.resize(a.ids.size());
    a.labels.resize(a.ids.size());
    return a;
}

void expect_matches_oracle(const NeighborSet& got, const std::vector<oracle::NaiveHit>& want) {
    ASSERT_EQ(got.hits.size(), want.size());
    for (std::size_t i = 0; i < want.size(); ++i) {
        EXPECT_EQ(got.hits[i].id, want[i].id) << "rank " << i;
        EXPECT_EQ(got.hits[i].distance, want[i].distance) << "rank " << i;
        EXPECT_EQ(got.hits[i].label, want[i].label);
    }
}

}  // namespace

TEST(Knn, ThreeFourFiveTriangle) {
    SearchIndex index(FeatureConfig::C1, 2, {"a", "b", "c"}, {Label::Negative, Label::Positive, Label::Positive},
                      {0, 0, 3, 4, 6, 8});
    const float q[2] = {0, 0};
    auto ns = knn(index, q, 2);
    ASSERT_EQ(ns.hits.size(), 2u);
    EXPECT_EQ(ns.hits[0].id, "a");
    EXPECT_EQ(ns.hits[0].distance, 0.0);
    EXPECT_EQ(ns.hits[1].id, "b");
    EXPECT_EQ(ns.hits[1].distance, 5.0);
    EXPECT_EQ(ns.vote_m, 1u);
    EXPECT_DOUBLE_EQ(ns.likelihood, 0.5);
}

TEST(Knn, SelfMatchAndExclusion) {
    Rng rng(1);
    auto a = random_archive(rng, 50, 6);
    auto index = a.index();
    auto ns = knn(index, a.rows[7], 3, "", {});
    EXPECT_EQ(ns.hits[0].id, a.ids[7]);
    EXPECT_EQ(ns.hits[0].distance, 0.0);
    auto loo = knn(index, a.rows[7], 3, a.ids[7]);
    for (const auto& h : loo.hits) EXPECT_NE(h.id, a.ids[7]);
    KnnOptions keep;
    keep.exclude_self = false;
    EXPECT_EQ(knn(index, a.rows[7], 3, a.ids[7], keep).hits[0].id, a.ids[7]);
}

TEST(Knn, MatchesNaiveOracle) {
    Rng rng(2);
    for (int t = 0; t < 10; ++t) {
        const bool coarse = t % 2 == 1;
        auto a = random_archive(rng, 100 + rng.below(500), 1 + rng.below(32), coarse);
        auto index = a.index();
        KnnOptions opts;
        opts.threads = 1 + static_cast<unsigned>(rng.below(4));
        opts.block_rows = 1 + rng.below(200);
        for (int q = 0; q < 5; ++q) {
            const std::size_t k = 1 + rng.below(a.ids.size());
            std::vector<float> query(a.rows[0].size());
            for (auto& x : query) x = coarse ? static_cast<float>(rng.below(3)) : static_cast<float>(rng.normal());
            expect_matches_oracle(knn(index, query, k, "", opts), oracle::knn(a.ids, a.labels, a.rows, query, k));
        }
    }
}

TEST(Knn, ResultsDoNotDependOnThreadsOrBlocks) {
    Rng rng(3);
    auto a = random_archive(rng, 700, 10, true);
    auto index = a.index();
    std::vector<float> q(10, 1.0f);
    KnnOptions base;
    auto want = knn(index, q, 25, "", base);
    for (unsigned threads : {2u, 3u, 8u})
        for (std::size_t block : {1u, 17u, 4096u}) {
            KnnOptions o;
            o.threads = threads;
            o.block_rows = block;
            EXPECT_EQ(knn(index, q, 25, "", o), want);
        }
}

TEST(Knn, PermutationInvariance) {
    Rng rng(4);
    auto a = random_archive(rng, 300, 5, true);
    auto shuffled = a;
    std::vector<std::size_t> order(a.ids.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(std::span(order));
    for (std::size_t i = 0; i < order.size(); ++i) {
        shuffled.ids[i] = a.ids[order[i]];
        shuffled.labels[i] = a.labels[order[i]];
        shuffled.rows[i] = a.rows[order[i]];
    }
    auto i1 = a.index(), i2 = shuffled.index();
    EXPECT_EQ(i1, i2);
    std::vector<float> q(5, 1.0f);
    EXPECT_EQ(knn(i1, q, 31), knn(i2, q, 31));
}

TEST(Knn, EnlargingArchiveNeverIncreasesDistances) {
    Rng rng(5);
    auto big = random_archive(rng, 400, 4);
    Archive small{std::vector<std::string>(big.ids.begin(), big.ids.begin() + 200),
                  std::vector<Label>(big.labels.begin(), big.labels.begin() + 200),
                  std::vector<std::vector<float>>(big.rows.begin(), big.rows.begin() + 200)};
    std::vector<float> q = {0.1f, -0.2f, 0.3f, 0.0f};
    auto s = knn(small.index(), q, 50), b = knn(big.index(), q, 50);
    for (std::size_t j = 0; j < 50; ++j) EXPECT_LE(b.hits[j].distance, s.hits[j].distance);
}

TEST(Knn, VoteInvariantUnderRigidMotion) {
    Rng rng(6);
    auto a = random_archive(rng, 200, 8);
    Eigen::MatrixXd g(8, 8);
    for (Eigen::Index i = 0; i < g.size(); ++i) g.data()[i] = rng.normal();
    const Eigen::MatrixXd rot = g.householderQr().householderQ();
    Eigen::VectorXd shift(8);
    for (Eigen::Index i = 0; i < 8; ++i) shift[i] = rng.uniform(-5, 5);
    auto move = [&](const std::vector<float>& v) {
        Eigen::VectorXd x(8);
        for (Eigen::Index i = 0; i < 8; ++i) x[i] = v[static_cast<std::size_t>(i)];
        const Eigen::VectorXd y = rot * x + shift;
        std::vector<float> out(8);
        for (Eigen::Index i = 0; i < 8; ++i) out[static_cast<std::size_t>(i)] = static_cast<float>(y[i]);
        return out;
    };
    auto moved = a;
    for (auto& r : moved.rows) r = move(r);
    auto i1 = a.index(), i2 = moved.index();
    for (int t = 0; t < 20; ++t) {
        std::vector<float> q(8);
        for (auto& x : q) x = static_cast<float>(rng.normal());
        EXPECT_EQ(knn(i1, q, 11).likelihood, knn(i2, move(q), 11).likelihood);
    }
}

TEST(Knn, Errors) {
    SearchIndex empty;
    const float q[2] = {0, 0};
    EXPECT_THROW(knn(empty, q, 1), ValidationError);
    SearchIndex index(FeatureConfig::C1, 2, {"a"}, {Label::Negative}, {1, 1});
    const float q3[3] = {0, 0, 0};
    EXPECT_THROW(knn(index, q3, 1), ShapeError);
    EXPECT_THROW(knn(index, q, 0), ValidationError);
    EXPECT_THROW(SearchIndex(FeatureConfig::C1, 1, {"a", "a"}, {Label::Negative, Label::Negative}, {0, 1}),
                 ValidationError);
    EXPECT_THROW(SearchIndex(FeatureConfig::C1, 2, {"a"}, {Label::Negative}, {0}), ShapeError);
}

TEST(Knn, TruncatedArchiveUsesHitCount) {
    SearchIndex index(FeatureConfig::C1, 1, {"a", "b", "c"}, {Label::Positive, Label::Positive, Label::Negative},
                      {0, 1, 2});
    const float q[1] = {0};
    auto ns = knn(index, q, 11);
    EXPECT_TRUE(ns.truncated);
    EXPECT_EQ(ns.hits.size(), 3u);
    EXPECT_DOUBLE_EQ(vote(ns), 2.0 / 3.0);
    EXPECT_DOUBLE_EQ(ns.likelihood, 2.0 / 3.0);
}

TEST(Knn, BatchMatchesSingleQueries) {
    Rng rng(7);
    auto a = random_archive(rng, 120, 4);
    auto index = a.index();
    std::vector<float> flat;
    for (std::size_t i = 0; i < 10; ++i) flat.insert(flat.end(), a.rows[i].begin(), a.rows[i].end());
    VectorStore queries(FeatureConfig::C1, 4, std::vector<std::string>(a.ids.begin(), a.ids.begin() + 10), flat);
    auto batch = knn_batch(index, queries, 7, 3);
    ASSERT_EQ(batch.size(), 10u);
    for (std::size_t i = 0; i < 10; ++i) EXPECT_EQ(batch[i], knn(index, a.rows[i], 7, a.ids[i]));
}

TEST(Vote, DefinitionAndPrefix) {
    NeighborSet ns;
    ns.k = 11;
    for (int i = 0; i < 11; ++i) ns.hits.push_back({"h" + std::to_string(i), 1.0 * i, i < 6 ? Label::Positive : Label::Negative});
    EXPECT_DOUBLE_EQ(vote(ns), 6.0 / 11.0);
    auto p = ns.prefix(5);
    EXPECT_EQ(p.k, 5u);
    EXPECT_EQ(p.vote_m, 5u);
    EXPECT_DOUBLE_EQ(p.likelihood, 1.0);
    EXPECT_THROW(ns.prefix(12), ValidationError);
    EXPECT_THROW(vote(NeighborSet{}), ValidationError);
}

TEST(Classify, InclusiveThreshold) {
    EXPECT_EQ(classify(0.55, 0.5), Label::Positive);
    EXPECT_EQ(classify(0.5, 0.5), Label::Positive);
    EXPECT_EQ(classify(6.0 / 11.0, 6.0 / 11.0), Label::Positive);
    EXPECT_EQ(classify(0.49, 0.5), Label::Negative);
}

TEST(BuildIndex, LabelsFromManifestAndMissingId) {
    DatasetManifest m(testutil::make_records(1, 2), DatasetMode::FullyAutomated);
    VectorStore store(FeatureConfig::C2, 1, {m.records()[2].id, m.records()[0].id, m.records()[1].id}, {2, 0, 1});
    auto index = build_index(store, m);
    EXPECT_EQ(index.size(), 3u);
    EXPECT_EQ(index.ids(), (std::vector<std::string>{m.records()[0].id, m.records()[1].id, m.records()[2].id}));
    EXPECT_EQ(index.labels()[0], Label::Positive);
    EXPECT_EQ(index.row(2)[0], 2.0f);
    EXPECT_EQ(build_index(store, m), index);

    VectorStore stray(FeatureConfig::C1, 1, {"ghost"}, {0});
    try {
        build_index(stray, m);
        FAIL();
    } catch (const LookupError& e) {
        EXPECT_NE(std::string(e.what()).find("ghost"), std::string::npos);
    }
}

TEST(BuildIndex, Normalization) {
    SearchIndex index(FeatureConfig::C1, 2, {"a", "b"}, {Label::Negative, Label::Positive}, {3, 4, 0, 0}, true);
    EXPECT_FLOAT_EQ(index.row(0)[0], 0.6f);
    EXPECT_FLOAT_EQ(index.row(0)[1], 0.8f);
    EXPECT_EQ(index.row(1)[0], 0.0f);
}

TEST(SearchJson, Shape) {
    SearchIndex index(FeatureConfig::C1, 2, {"a", "b", "c"}, {Label::Negative, Label::Positive, Label::Positive},
                      {0, 0, 3, 4, 6, 8});
    const float q[2] = {0, 0};
    auto j = to_json(knn(index, q, 2, "query-1"));
    EXPECT_EQ(j["query_id"], "query-1");
    EXPECT_EQ(j["k"], 2);
    EXPECT_EQ(j["hits"].size(), 2u);
    EXPECT_EQ(j["hits"][1]["id"], "b");
    EXPECT_EQ(j["hits"][1]["distance"], 5.0);
    EXPECT_EQ(j["hits"][1]["label"], "pneumothorax");
    EXPECT_EQ(j["likelihood"], 0.5);
}
