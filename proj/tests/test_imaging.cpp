#include <gtest/gtest.h>

#include <cmath>
#include <fstream>

#include "cxr/error.hpp"
#include "cxr/imaging.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace cxr;

namespace {

GrayImage random_image(Rng& rng, std::size_t w, std::size_t h) {
    return GrayImage(w, h, testutil::random_floats(rng, w * h, 0.0, 1.0));
}

GrayImage mirror_symmetric(Rng& rng, std::size_t w, std::size_t h) {
    GrayImage img(w, h);
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < (w + 1) / 2; ++x) {
            const auto v = static_cast<float>(rng.uniform());
            img.set(x, y, v);
            img.set(w - 1 - x, y, v);
        }
    return img;
}

}  // namespace

TEST(Resize, ConstantStaysConstant) {
    for (auto [w, h] : {std::pair<std::size_t, std::size_t>{1, 1}, {37, 500}, {1000, 3}}) {
        auto out = resize(GrayImage(w, h, 0.5f), 224, 224);
        ASSERT_EQ(out.width(), 224u);
        ASSERT_EQ(out.height(), 224u);
        for (float p : out.pixels()) ASSERT_EQ(p, 0.5f);
    }
}

TEST(Resize, UpscaleIsMonotone) {
    auto out = resize(GrayImage(2, 1, std::vector<float>{0.0f, 1.0f}), 4, 1);
    ASSERT_EQ(out.width(), 4u);
    for (std::size_t x = 1; x < 4; ++x) EXPECT_LE(out.at(x - 1, 0), out.at(x, 0));
    EXPECT_EQ(out.at(0, 0), 0.0f);
    EXPECT_EQ(out.at(3, 0), 1.0f);
}

TEST(Resize, CheckerboardHalvingKeepsMean) {
    GrayImage board(448, 448);
    for (std::size_t y = 0; y < 448; ++y)
        for (std::size_t x = 0; x < 448; ++x) board.set(x, y, ((x / 3 + y / 5) % 2) ? 1.0f : 0.0f);
    // Exact area average: every 2x2 block mean, averaged.
    double oracle = 0.0;
    for (float p : board.pixels()) oracle += p;
    oracle /= 448.0 * 448.0;
    auto out = resize(board, 224, 224);
    EXPECT_NEAR(out.mean(), oracle, 1e-6);
    for (std::size_t y = 0; y < 224; ++y)
        for (std::size_t x = 0; x < 224; ++x) {
            const double block = (board.at(2 * x, 2 * y) + board.at(2 * x + 1, 2 * y) + board.at(2 * x, 2 * y + 1) +
                                  board.at(2 * x + 1, 2 * y + 1)) / 4.0;
            ASSERT_NEAR(out.at(x, y), block, 1e-6);
        }
}

TEST(Resize, StaysInRangeAndRejectsEmpty) {
    Rng rng(1);
    auto out = resize(random_image(rng, 31, 17), 224, 100);
    for (float p : out.pixels()) ASSERT_TRUE(p >= 0.0f && p <= 1.0f);
    EXPECT_THROW(resize(GrayImage(), 4, 4), ValidationError);
    EXPECT_THROW(resize(GrayImage(2, 2), 0, 4), ValidationError);
}

TEST(GrayImageCheck, RejectsOutOfRange) {
    EXPECT_THROW(GrayImage(1, 1, std::vector<float>{1.5f}), ValidationError);
    EXPECT_THROW(GrayImage(2, 1, std::vector<float>{0.5f}), ShapeError);
}

TEST(Split, EvenAndOddWidths) {
    auto h4 = split_and_flip(GrayImage(4, 1, std::vector<float>{0.1f, 0.2f, 0.3f, 0.4f}));
    EXPECT_EQ(h4.left, GrayImage(2, 1, std::vector<float>{0.1f, 0.2f}));
    EXPECT_EQ(h4.right_flipped, GrayImage(2, 1, std::vector<float>{0.4f, 0.3f}));
    auto h5 = split_and_flip(GrayImage(5, 1, std::vector<float>{0.1f, 0.2f, 0.3f, 0.4f, 0.5f}));
    EXPECT_EQ(h5.left, GrayImage(2, 1, std::vector<float>{0.1f, 0.2f}));
    EXPECT_EQ(h5.right_flipped, GrayImage(2, 1, std::vector<float>{0.5f, 0.4f}));
    EXPECT_THROW(split_and_flip(GrayImage(1, 3)), ValidationError);
}

TEST(Split, MirrorSymmetricHalvesMatch) {
    Rng rng(5);
    for (std::size_t w : {10u, 11u}) {
        auto halves = split_and_flip(mirror_symmetric(rng, w, 6));
        EXPECT_EQ(halves.left, halves.right_flipped);
    }
}

TEST(BaselineExtract, ConstantAndHalves) {
    auto v = baseline_extract(GrayImage(224, 224, 0.25f));
    ASSERT_EQ(v.size(), 1024u);
    for (float x : v) ASSERT_FLOAT_EQ(x, 0.25f);

    GrayImage halves(224, 224);
    for (std::size_t y = 0; y < 224; ++y)
        for (std::size_t x = 112; x < 224; ++x) halves.set(x, y, 1.0f);
    auto h = baseline_extract(halves);
    for (std::size_t r = 0; r < 32; ++r)
        for (std::size_t c = 0; c < 32; ++c) EXPECT_NEAR(h[r * 32 + c], c < 16 ? 0.0 : 1.0, 1e-6);
}

TEST(BaselineExtract, MatchesPatchMeanOracle) {
    Rng rng(21);
    for (int t = 0; t < 5; ++t) {
        auto img = random_image(rng, 224, 224);
        auto got = baseline_extract(img);
        auto want = oracle::patch_means(std::vector<float>(img.pixels().begin(), img.pixels().end()));
        for (std::size_t i = 0; i < 1024; ++i) ASSERT_NEAR(got[i], want[i], 1e-6);
    }
}

TEST(BaselineExtract, OneLipschitzInMaxNorm) {
    Rng rng(22);
    const double eps = 0.05;
    for (int t = 0; t < 5; ++t) {
        auto img = random_image(rng, 300, 260);
        GrayImage moved(img.width(), img.height());
        for (std::size_t y = 0; y < img.height(); ++y)
            for (std::size_t x = 0; x < img.width(); ++x) {
                const double d = rng.uniform(-eps, eps);
                moved.set(x, y, static_cast<float>(std::clamp(img.at(x, y) + d, 0.0, 1.0)));
            }
        auto a = baseline_extract(img), b = baseline_extract(moved);
        for (std::size_t i = 0; i < a.size(); ++i) ASSERT_LE(std::abs(a[i] - b[i]), eps + 1e-6);
    }
}

TEST(ExtractConfig, DimensionsAndBlockConsistency) {
    Rng rng(9);
    BaselinePoolExtractor ex;
    auto img = random_image(rng, 257, 301);
    auto c1 = extract_config(img, FeatureConfig::C1, ex, "r");
    auto c2 = extract_config(img, FeatureConfig::C2, ex, "r");
    auto c3 = extract_config(img, FeatureConfig::C3, ex, "r");
    EXPECT_EQ(c1.dim(), 1024u);
    EXPECT_EQ(c2.dim(), 2048u);
    EXPECT_EQ(c3.dim(), 3072u);
    EXPECT_EQ(c3.extractor_id, "baseline-pool32");
    EXPECT_TRUE(std::equal(c2.values.begin(), c2.values.end(), c3.values.begin()));
    EXPECT_TRUE(std::equal(c1.values.begin(), c1.values.end(), c3.values.begin() + 2048));
    EXPECT_THROW(extract_config(img, FeatureConfig::Encoded, ex), ValidationError);
}

TEST(ExtractConfig, SymmetricImageGivesEqualHalves) {
    Rng rng(10);
    BaselinePoolExtractor ex;
    auto c2 = extract_config(mirror_symmetric(rng, 224, 224), FeatureConfig::C2, ex);
    EXPECT_TRUE(std::equal(c2.values.begin(), c2.values.begin() + 1024, c2.values.begin() + 1024));
}

TEST(ExternalSource, ServesSubsetsOfC3) {
    Rng rng(12);
    VectorStore store(FeatureConfig::C3, 6, {"b", "a"}, testutil::random_floats(rng, 12));
    ExternalFeatureSource src(store, "cnn");
    EXPECT_EQ(src.spec().base_dim, 2u);
    auto c1 = src.lookup("a", FeatureConfig::C1);
    EXPECT_EQ(c1.values, std::vector<float>(store.row(1).begin() + 4, store.row(1).end()));
    auto c2 = src.lookup("b", FeatureConfig::C2);
    EXPECT_EQ(c2.values, std::vector<float>(store.row(0).begin(), store.row(0).begin() + 4));
    EXPECT_THROW(src.lookup("zz", FeatureConfig::C1), LookupError);

    ExternalFeatureSource only_c1(VectorStore(FeatureConfig::C1, 2, {"a"}, {0.0f, 1.0f}), "cnn");
    EXPECT_FALSE(only_c1.can_serve(FeatureConfig::C3));
    EXPECT_THROW(only_c1.lookup("a", FeatureConfig::C2), LookupError);
}

TEST(ImageIo, PgmRoundTripAndColorPpm) {
    testutil::TempDir dir("img");
    GrayImage img(3, 2, std::vector<float>{0.0f, 1.0f, 128.0f / 255.0f, 1.0f / 255.0f, 0.5f, 0.25f});
    write_pgm(dir / "a.pgm", img);
    auto back = read_image(dir / "a.pgm");
    ASSERT_EQ(back.width(), 3u);
    for (std::size_t i = 0; i < 6; ++i) EXPECT_NEAR(back.pixels()[i], img.pixels()[i], 0.5 / 255.0 + 1e-7);

    {
        std::ofstream out(dir / "c.ppm", std::ios::binary);
        out << "P6\n1 1\n255\n";
        const unsigned char px[3] = {255, 0, 0};
        out.write(reinterpret_cast<const char*>(px), 3);
    }
    EXPECT_NEAR(read_image(dir / "c.ppm").at(0, 0), 0.299, 1e-6);
    {
        std::ofstream out(dir / "t.pgm", std::ios::binary);
        out << "P5\n4 4\n255\n" << "ab";
    }
    EXPECT_THROW(read_image(dir / "t.pgm"), FormatError);
    EXPECT_THROW(read_image(dir / "missing.pgm"), IoError);
}
