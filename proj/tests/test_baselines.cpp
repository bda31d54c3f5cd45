#include "ambiview/baselines.hpp"

#include "fixtures.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace ambiview;
using ambiview::testing::small_world;

TEST(Mse, KnownValuesAndSymmetry) {
    ViewEmbedding a(4), b(4);
    a << 1.0, 2.0, 3.0, 4.0;
    b << 1.0, 0.0, 3.0, 8.0;
    EXPECT_DOUBLE_EQ(mse_similarity(a, b), -(4.0 + 16.0) / 4.0);
    EXPECT_EQ(mse_similarity(a, b), mse_similarity(b, a));
    EXPECT_EQ(mse_similarity(a, a), 0.0);
    EXPECT_THROW(mse_similarity(a, ViewEmbedding::Ones(3)), std::invalid_argument);
}

TEST(BlobMatch, CountsSharedVisibleBlobs) {
    const auto& w = small_world();
    const Rotation r = from_euler(0.2, 0.4, -0.3);
    EXPECT_EQ(blob_match_similarity(w.pair.a, r, w.pair.a, r), 1.0);
    // A hidden patch leaves every visible blob matching.
    const Rotation away = look_at(-Vec3::UnitX());
    EXPECT_EQ(blob_match_similarity(w.pair.a, away, w.pair.b, away), 1.0);
    // Viewing the patch head-on: visible patch blobs are the mismatches.
    const Rotation head_on = look_at(Vec3::UnitX());
    std::size_t visible = 0, patch = 0;
    for (std::size_t m = 0; m < w.pair.a.blobs.size(); ++m) {
        if (Vec3::UnitX().dot(w.pair.a.blobs[m].position) > 0.0) {
            ++visible;
            patch += w.pair.differs[m] ? 1U : 0U;
        }
    }
    EXPECT_DOUBLE_EQ(blob_match_similarity(w.pair.a, head_on, w.pair.b, head_on),
                     static_cast<double>(visible - patch) / static_cast<double>(visible));
    // Opposite hemispheres share no visible blob.
    EXPECT_EQ(blob_match_similarity(w.pair.a, head_on, w.pair.a, away), 0.0);
}

TEST(BlobMatch, EmptyVisibilityGivesZero) {
    SynthObject one;
    one.blobs = {Blob{Vec3::UnitZ(), Eigen::VectorXd::Ones(2)}};
    const Rotation r = look_at(-Vec3::UnitZ());
    EXPECT_EQ(blob_match_similarity(one, r, one, r), 0.0);
}

TEST(RandomFeatures, DeterministicAndBounded) {
    const RandomFeatures f(32, 64, 5);
    const RandomFeatures g(32, 64, 5);
    const auto& w = small_world();
    const ViewEmbedding a = render_embedding(w.pair.a, from_euler(0.1, 0.2, 0.3));
    const ViewEmbedding b = render_embedding(w.pair.b, from_euler(1.1, -0.2, 0.3));
    EXPECT_EQ(f.features(a), g.features(a));
    EXPECT_NEAR(f.similarity(a, a), 1.0, 1e-12);
    const double s = f.similarity(a, b);
    EXPECT_GE(s, 0.0);
    EXPECT_LE(s, 1.0);
    EXPECT_EQ(s, f.similarity(b, a));
    // A feature map that zeroes everything yields 0, not NaN.
    EXPECT_EQ(f.similarity(ViewEmbedding::Zero(32), a), 0.0);
}

TEST(Correlation, AverageRanksWithTies) {
    EXPECT_EQ(average_ranks({10.0, 20.0, 20.0, 5.0}), (std::vector<double>{2.0, 3.5, 3.5, 1.0}));
}

TEST(Correlation, SpearmanMatchesReferenceValues) {
    // Reference values from scipy.stats.spearmanr.
    const std::vector<double> v1{17, 86, 60, 77, 47, 3, 70, 87, 88, 92};
    const std::vector<double> v2{70, 29, 85, 61, 80, 34, 60, 31, 73, 66};
    EXPECT_NEAR(spearman(v1, v2), -0.16363636363636364, 1e-12);
    std::vector<double> tied = v1;
    tied[7] = 47.0;
    EXPECT_NEAR(spearman(tied, v2), 0.024316221747202587, 1e-12);
}

TEST(Correlation, EdgeCases) {
    const std::vector<double> x{1.0, 2.0, 3.0, 4.0};
    EXPECT_NEAR(pearson(x, {2.0, 4.0, 6.0, 8.0}), 1.0, 1e-15);
    EXPECT_NEAR(spearman(x, {1.0, 10.0, 100.0, 1000.0}), 1.0, 1e-15);
    EXPECT_NEAR(spearman(x, {4.0, 3.0, 2.0, 1.0}), -1.0, 1e-15);
    EXPECT_EQ(spearman(x, {5.0, 5.0, 5.0, 5.0}), 0.0);
    EXPECT_THROW(pearson({}, {}), std::invalid_argument);
    EXPECT_THROW(pearson(x, {1.0}), std::invalid_argument);
}

TEST(Scaling, MinMaxIsAffineOntoUnitInterval) {
    const auto s = min_max_scale({3.0, -1.0, 1.0});
    EXPECT_EQ(s, (std::vector<double>{1.0, 0.0, 0.5}));
    EXPECT_EQ(min_max_scale({2.0, 2.0}), (std::vector<double>{0.0, 0.0}));
    EXPECT_TRUE(min_max_scale({}).empty());
}

TEST(Metrics, AllAreSymmetricInTheirViews) {
    const auto& w = small_world();
    const std::vector<NamedMetric> metrics{primary_metric(), mse_metric(), blob_match_metric(),
                                           random_features_metric(32, 128, 3)};
    Rng rng = make_rng(61, "test");
    std::normal_distribution<double> n(0.0, 1.0);
    for (int i = 0; i < 50; ++i) {
        const Rotation ra(n(rng), n(rng), n(rng), n(rng));
        const Rotation rb(n(rng), n(rng), n(rng), n(rng));
        for (const auto& m : metrics) {
            EXPECT_EQ(m.fn(w.pair.a, ra, w.pair.b, rb), m.fn(w.pair.b, rb, w.pair.a, ra)) << m.name;
        }
    }
}

TEST(Comparison, PrimaryAgainstItselfIsPerfectAndTableUntouched) {
    const auto& w = small_world();
    const AmbiguityTable before = w.tables[0];
    const auto report = metric_comparison(w.tables[0], w.objects(),
                                          {primary_metric(), mse_metric(), blob_match_metric(),
                                           random_features_metric(32, 128, 3)});
    ASSERT_EQ(report.names.size(), 4U);
    EXPECT_EQ(report.names[0], "primary");
    EXPECT_EQ(report.spearman[0], 1.0);
    EXPECT_NEAR(report.pearson[0], 1.0, 1e-12);
    EXPECT_EQ(report.values[0], report.primary);
    for (std::size_t m = 0; m < 4; ++m) {
        EXPECT_EQ(report.values[m].size(), w.tables[0].size());
        EXPECT_GE(report.spearman[m], -1.0);
        EXPECT_LE(report.spearman[m], 1.0);
    }
    EXPECT_EQ(to_json_value(w.tables[0]).dump(), to_json_value(before).dump());
    EXPECT_THROW(metric_comparison(AmbiguityTable{}, w.objects(), {primary_metric()}), std::invalid_argument);
}

TEST(Comparison, CsvOutputsAreScaledPerMetric) {
    const auto& w = small_world();
    const auto report = metric_comparison(w.tables[1], w.objects(), {primary_metric(), mse_metric()});
    const std::string csv = metric_values_csv(report);
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "pair_index,primary,mse");
    EXPECT_EQ(static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')), w.tables[1].size() + 1);
    // Table order is similarity-descending, so the primary column starts at 1.
    EXPECT_EQ(csv.substr(csv.find('\n') + 1, 4), "0,1,");
    const std::string corr = correlation_csv(report);
    EXPECT_EQ(corr.substr(0, corr.find('\n')), "metric,spearman,pearson");
    EXPECT_EQ(std::count(corr.begin(), corr.end(), '\n'), 3);
}

TEST(NoiseRobustness, CleanIsPerfectAndNoiseDegrades) {
    const auto& w = small_world();
    const double scale =
        0.5 * (mean_embedding_norm(w.pair.a, w.coarse.rotations) + mean_embedding_norm(w.pair.b, w.coarse.rotations));
    const auto rows = noise_robustness_sweep(w.tables[0], w.objects(), {0.0, 0.05 * scale, 10.0 * scale}, 8);
    ASSERT_EQ(rows.size(), 3U);
    EXPECT_EQ(rows[0].spearman, 1.0);
    EXPECT_GT(rows[1].spearman, rows[2].spearman);
    EXPECT_LT(std::abs(rows[2].spearman), 0.3);
    EXPECT_EQ(noise_robustness_sweep(w.tables[0], w.objects(), {0.05 * scale}, 8)[0].spearman, rows[1].spearman);
    EXPECT_THROW(noise_robustness_sweep(w.tables[0], w.objects(), {}, 8), std::invalid_argument);
    EXPECT_THROW(noise_robustness_sweep(w.tables[0], w.objects(), {-1.0}, 8), std::invalid_argument);
    EXPECT_EQ(noise_robustness_csv(rows).substr(0, 15), "sigma,spearman\n");
}

TEST(NoiseRobustness, NonIncreasingInSigma) {
    const auto& w = small_world();
    const double scale =
        0.5 * (mean_embedding_norm(w.pair.a, w.coarse.rotations) + mean_embedding_norm(w.pair.b, w.coarse.rotations));
    std::vector<double> sigmas;
    for (const double rel : {0.0, 0.05, 0.1, 0.5, 1.0, 10.0}) {
        sigmas.push_back(rel * scale);
    }
    const auto rows = noise_robustness_sweep(w.tables[1], w.objects(), sigmas, 21);
    for (std::size_t i = 1; i < rows.size(); ++i) {
        EXPECT_LE(rows[i].spearman, rows[i - 1].spearman + 0.05) << "sigma " << rows[i].sigma;
    }
}
