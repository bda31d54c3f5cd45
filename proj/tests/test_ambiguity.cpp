#include "ambiview/ambiguity.hpp"

#include "fixtures.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <set>

using namespace ambiview;
using ambiview::testing::small_world;

TEST(Normalize, MapsOntoUnitIntervalWithEndpoints) {
    const auto out = normalize_ambiguity({0.5, 0.9, 0.7, 0.5});
    ASSERT_EQ(out.size(), 4U);
    EXPECT_EQ(out[0], 0.0);
    EXPECT_EQ(out[1], 1.0);
    EXPECT_NEAR(out[2], 0.5, 1e-15);
    EXPECT_EQ(out[3], 0.0);
    EXPECT_TRUE(normalize_ambiguity({}).empty());
}

TEST(Normalize, AllEqualMapsToZero) {
    for (const double v : normalize_ambiguity({0.3, 0.3, 0.3})) {
        EXPECT_EQ(v, 0.0);
    }
}

TEST(Normalize, OrderInvariantUnderPositiveAffineMaps) {
    const auto& t = small_world().tables[0];
    std::vector<double> raw;
    for (const auto& p : t.pairs) {
        raw.push_back(p.similarity);
    }
    const auto base = normalize_ambiguity(raw);
    for (const auto& [scale, shift] : std::vector<std::pair<double, double>>{{2.0, -1.0}, {1e-3, 5.0}, {37.0, 0.25}}) {
        std::vector<double> moved;
        for (const double v : raw) {
            moved.push_back(scale * v + shift);
        }
        const auto n = normalize_ambiguity(moved);
        for (std::size_t i = 0; i < raw.size(); ++i) {
            EXPECT_NEAR(n[i], base[i], 1e-9);
            if (i > 0) {
                EXPECT_LE(n[i], n[i - 1]);
            }
        }
    }
}

TEST(RankObject, TableIsSortedNormalizedAndCoversGrid) {
    const auto& w = small_world();
    for (const auto& t : w.tables) {
        ASSERT_EQ(t.size(), w.coarse.size());
        ASSERT_EQ(t.ambiguity.size(), t.size());
        std::set<std::size_t> seen;
        for (std::size_t i = 0; i < t.size(); ++i) {
            const auto& p = t.pairs[i];
            seen.insert(p.grid_index);
            EXPECT_TRUE(p.r_a == w.coarse.rotations[p.grid_index]);
            EXPECT_GE(t.ambiguity[i], 0.0);
            EXPECT_LE(t.ambiguity[i], 1.0);
            EXPECT_LE(p.similarity, 1.0);
            EXPECT_NE(p.matched_class, t.object_class);
            if (i > 0) {
                EXPECT_LE(p.similarity, t.pairs[i - 1].similarity);
                EXPECT_LE(t.ambiguity[i], t.ambiguity[i - 1]);
            }
        }
        EXPECT_EQ(seen.size(), t.size());
        EXPECT_EQ(t.ambiguity.front(), 1.0);
        EXPECT_EQ(t.ambiguity.back(), 0.0);
    }
}

TEST(RankObject, IdenticalViewsScoreExactlyOne) {
    const auto& w = small_world();
    for (const auto& t : w.tables) {
        std::size_t hidden = 0;
        for (const auto& p : t.pairs) {
            const bool exact = std::abs(p.similarity - 1.0) <= 1e-12;
            EXPECT_EQ(exact, !patch_visible(w.pair, p.r_a)) << "grid index " << p.grid_index;
            hidden += exact ? 1U : 0U;
        }
        EXPECT_GT(hidden, 0U);
    }
}

TEST(RankObject, ExactOnesAgreeAcrossBothDirections) {
    // Which orientations are indistinguishable does not depend on which twin
    // is ranked, although the non-exact similarities may differ.
    const auto& w = small_world();
    std::array<std::set<std::size_t>, 2> ones;
    for (std::size_t k = 0; k < 2; ++k) {
        for (const auto& p : w.tables[k].pairs) {
            if (std::abs(p.similarity - 1.0) <= 1e-12) {
                ones[k].insert(p.grid_index);
            }
        }
    }
    EXPECT_EQ(ones[0], ones[1]);
}

TEST(RankObject, RawSimilarityBoundsEverySeedProbe) {
    const auto& w = small_world();
    const auto& t = w.tables[0];
    for (std::size_t i = 0; i < t.size(); i += 17) {
        const auto& p = t.pairs[i];
        const ViewEmbedding q = normalized_embedding(render_embedding(w.pair.a, p.r_a));
        EXPECT_GE(p.similarity, view_similarity(q, w.pair.b, p.r_a));
        EXPECT_GE(p.similarity, estimate_pose(w.codebooks[1], q).score - 1e-15);
        EXPECT_EQ(p.similarity, view_similarity(q, w.pair.b, p.r_b));
    }
}

TEST(RefineMatch, NonDecreasingInSteps) {
    const auto& w = small_world();
    const double step0 = default_initial_step(w.coarse.size());
    for (std::size_t i = 0; i < w.coarse.size(); i += 5) {
        const Rotation& r = w.coarse.rotations[i];
        const ViewEmbedding q = normalized_embedding(render_embedding(w.pair.a, r));
        double prev = -2.0;
        for (const std::size_t steps : {0U, 1U, 8U, 32U}) {
            const MatchResult m = most_similar_view(q, w.pair.b, w.codebooks[1], {steps, step0});
            EXPECT_GE(m.similarity, prev);
            EXPECT_EQ(m.similarity, view_similarity(q, w.pair.b, m.rotation));
            prev = m.similarity;
        }
    }
}

TEST(RefineMatch, RecoversAPerturbedSelfMatch) {
    const auto& w = small_world();
    const Rotation r = from_euler(0.4, -0.3, 1.2);
    const ViewEmbedding q = normalized_embedding(render_embedding(w.pair.a, r));
    const Rotation start = r * from_euler(0.05, -0.04, 0.03);
    const MatchResult m = refine_match(q, w.pair.a, {start, view_similarity(q, w.pair.a, start)}, {64, 0.1});
    EXPECT_GT(m.similarity, 1.0 - 1e-6);
    EXPECT_LT(geodesic_distance(m.rotation, r), 1e-2);
}

TEST(RankObject, RejectsMismatchedInputs) {
    const auto& w = small_world();
    EXPECT_THROW(rank_object(w.pair.a, {}, {}, w.coarse.rotations, {}), std::invalid_argument);
    EXPECT_THROW(rank_object(w.pair.a, {&w.pair.b}, {}, w.coarse.rotations, {}), std::invalid_argument);
}

TEST(Split, PartitionsAtThreshold) {
    const auto& t = small_world().tables[0];
    for (const double a : {0.0, 0.25, 0.5, 1.0}) {
        const ThresholdSplit s = split_by_threshold(t, a);
        EXPECT_EQ(s.train_rotations.size() + s.ambiguous_rotations.size(), t.size());
        EXPECT_EQ(s.train_indices.size(), s.train_rotations.size());
        std::size_t below = 0;
        for (const double v : t.ambiguity) {
            below += v < a ? 1U : 0U;
        }
        EXPECT_EQ(s.train_rotations.size(), below);
    }
    EXPECT_TRUE(split_by_threshold(t, 0.0).train_rotations.empty());
    EXPECT_FALSE(split_by_threshold(t, 1.0).ambiguous_rotations.empty());
    EXPECT_THROW(split_by_threshold(t, 1.5), std::invalid_argument);
    EXPECT_THROW(split_by_threshold(t, -0.1), std::invalid_argument);
}

TEST(BestOrientation, HasLowestAmbiguityAndBreaksTiesByIndex) {
    const auto& t = small_world().tables[1];
    EXPECT_TRUE(best_orientation(t) == t.pairs.back().r_a);
    AmbiguityTable tie;
    tie.pairs = {MatchedPair{0.5, Rotation::about_z(0.3), Rotation::identity(), 0, 9},
                 MatchedPair{0.5, Rotation::about_z(0.6), Rotation::identity(), 0, 2}};
    tie.ambiguity = {0.0, 0.0};
    EXPECT_TRUE(best_orientation(tie) == Rotation::about_z(0.6));
    EXPECT_THROW(best_orientation(AmbiguityTable{}), std::invalid_argument);
}

TEST(Serialization, SortedPairsCsvRoundTrip) {
    const auto& t = small_world().tables[1];
    const auto path = std::filesystem::temp_directory_path() / "ambiview_test_sorted_pairs.csv";
    export_sorted_pairs(t, path);
    const AmbiguityTable back = parse_sorted_pairs(path, 1, 0);
    std::filesystem::remove(path);
    ASSERT_EQ(back.size(), t.size());
    for (std::size_t i = 0; i < t.size(); ++i) {
        EXPECT_EQ(back.pairs[i].similarity, t.pairs[i].similarity);
        EXPECT_EQ(back.ambiguity[i], t.ambiguity[i]);
        EXPECT_EQ(back.pairs[i].grid_index, t.pairs[i].grid_index);
        EXPECT_TRUE(back.pairs[i].r_b == t.pairs[i].r_b);
        EXPECT_EQ(back.pairs[i].matched_class, 0);
    }
    EXPECT_EQ(sorted_pairs_csv(back), sorted_pairs_csv(t));
}

TEST(Serialization, TableJsonRoundTrip) {
    const auto& t = small_world().tables[0];
    const AmbiguityTable back = ambiguity_table_from_json(nlohmann::json::parse(to_json_value(t).dump()));
    EXPECT_EQ(back.object_class, t.object_class);
    EXPECT_EQ(back.ambiguity, t.ambiguity);
    EXPECT_EQ(to_json_value(back).dump(), to_json_value(t).dump());
}

TEST(RankObject, RawSimilarityMultisetsAgreeAcrossDirections) {
    const auto& w = small_world();
    std::array<std::vector<double>, 2> raw;
    for (std::size_t k = 0; k < 2; ++k) {
        for (const auto& p : w.tables[k].pairs) {
            raw[k].push_back(p.similarity);
        }
        std::sort(raw[k].begin(), raw[k].end());
    }
    double worst = 0.0;
    for (std::size_t i = 0; i < raw[0].size(); ++i) {
        worst = std::max(worst, std::abs(raw[0][i] - raw[1][i]));
    }
    EXPECT_LE(worst, 1e-9);
}
