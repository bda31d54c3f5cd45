#pragma once

// Ambiguity ranking of object orientations.
//
// For every orientation R of object A on a coarse direction grid, the raw
// ambiguity is the best similarity any view of another object of the group
// reaches against A's view at R. The most similar view is found by seeding
// from the target's codebook and refining with a derivative-free coordinate
// descent on local Euler angles. Raw values are then mapped linearly to
// [0, 1] once per ranked object.

#include "ambiview/codebook.hpp"
#include "ambiview/io.hpp"
#include "ambiview/parallel.hpp"
#include "ambiview/so3.hpp"
#include "ambiview/synthworld.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <cstddef>
#include <filesystem>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace ambiview {

struct MatchedPair {
    double similarity = 0.0;
    Rotation r_a;
    Rotation r_b;
    int matched_class = 0;
    std::size_t grid_index = 0; ///< index of r_a in the coarse grid
};

struct AmbiguityTable {
    int object_class = 0;
    int group_id = 0;
    std::vector<MatchedPair> pairs; ///< similarity non-increasing
    std::vector<double> ambiguity;  ///< normalized, aligned with pairs

    [[nodiscard]] std::size_t size() const { return pairs.size(); }
    [[nodiscard]] bool empty() const { return pairs.empty(); }
};

struct ThresholdSplit {
    double threshold = 0.0;
    std::vector<Rotation> train_rotations;     ///< ambiguity < threshold
    std::vector<Rotation> ambiguous_rotations; ///< ambiguity >= threshold
    std::vector<std::size_t> train_indices;     ///< grid indices, table order
    std::vector<std::size_t> ambiguous_indices;
};

struct MatchResult {
    Rotation rotation;
    double similarity = -1.0;
};

struct DescentOptions {
    std::size_t steps = 32;
    /// First step length in radians. Halved after every sweep that finds no improvement.
    double initial_step = 0.1;
};

/// Similarity of a unit query against the normalized noise-free view of `target` at r.
inline double view_similarity(const ViewEmbedding& unit_query, const SynthObject& target, const Rotation& r) {
    return std::clamp(unit_query.dot(normalized_embedding(render_embedding(target, r))), -1.0, 1.0);
}

/// Cyclic coordinate descent over the three local Euler angles (z, y, x)
/// around the current iterate. Each sweep tries +step then -step on each
/// axis and accepts only strict improvements, so the result never
/// decreases as `steps` grows.
inline MatchResult refine_match(const ViewEmbedding& unit_query, const SynthObject& target, MatchResult seed,
                                const DescentOptions& opts) {
    double step = opts.initial_step;
    MatchResult best = seed;
    for (std::size_t sweep = 0; sweep < opts.steps; ++sweep) {
        bool improved = false;
        for (int axis = 0; axis < 3; ++axis) {
            for (const double sign : {1.0, -1.0}) {
                const double angle = sign * step;
                const Rotation delta = axis == 0 ? Rotation::about_z(angle)
                                     : axis == 1 ? Rotation::about_y(angle)
                                                 : Rotation::about_x(angle);
                const Rotation candidate = best.rotation * delta;
                const double s = view_similarity(unit_query, target, candidate);
                if (s > best.similarity) {
                    best = {candidate, s};
                    improved = true;
                    break;
                }
            }
        }
        if (!improved) {
            step *= 0.5;
        }
    }
    return best;
}

/// Most similar view of `target` to a unit query embedding.
///
/// The seed is the best entry of the target's codebook. When the query's own
/// orientation is known (objects of a group share their object frame), that
/// orientation is also tried as a seed and wins when it scores higher.
inline MatchResult most_similar_view(const ViewEmbedding& unit_query, const SynthObject& target,
                                     const Codebook& target_codebook, const DescentOptions& opts,
                                     const std::optional<Rotation>& query_rotation = std::nullopt) {
    const PoseHypothesis h = estimate_pose(target_codebook, unit_query);
    // Re-score through view_similarity so stored similarities never depend on
    // how the codebook matrix product was summed.
    MatchResult seed{h.rotation, view_similarity(unit_query, target, h.rotation)};
    if (query_rotation) {
        const double s = view_similarity(unit_query, target, *query_rotation);
        if (s > seed.similarity) {
            seed = {*query_rotation, s};
        }
    }
    return refine_match(unit_query, target, seed, opts);
}

/// Linear map of raw values onto [0, 1]; all-equal input maps to all zeros.
inline std::vector<double> normalize_ambiguity(const std::vector<double>& raw) {
    if (raw.empty()) {
        return {};
    }
    const auto [lo, hi] = std::minmax_element(raw.begin(), raw.end());
    const double min = *lo;
    const double range = *hi - *lo;
    std::vector<double> out(raw.size(), 0.0);
    if (range > 0.0) {
        for (std::size_t i = 0; i < raw.size(); ++i) {
            out[i] = std::clamp((raw[i] - min) / range, 0.0, 1.0);
        }
    }
    return out;
}

struct RankOptions {
    DescentOptions descent;
    /// When false only the codebook seeds the search.
    bool co_registered_seed = true;
};

/// Default descent start: twice the spacing of the coarse direction grid.
inline double default_initial_step(std::size_t coarse_grid_size) { return 2.0 * uniform_sphere_spacing(coarse_grid_size); }

/// Ranks every coarse-grid orientation of `object` against the other objects
/// of its group. `others` and `other_codebooks` are parallel lists.
inline AmbiguityTable rank_object(const SynthObject& object, const std::vector<const SynthObject*>& others,
                                  const std::vector<const Codebook*>& other_codebooks,
                                  const std::vector<Rotation>& coarse_grid, const RankOptions& opts) {
    if (others.empty()) {
        throw std::invalid_argument("rank_object: at least one other object is required");
    }
    if (others.size() != other_codebooks.size()) {
        throw std::invalid_argument("rank_object: one codebook per other object is required");
    }
    std::vector<MatchedPair> pairs(coarse_grid.size());
    parallel_for(coarse_grid.size(), [&](std::size_t i) {
        const Rotation& r = coarse_grid[i];
        const ViewEmbedding q = normalized_embedding(render_embedding(object, r));
        MatchedPair best;
        best.similarity = -std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < others.size(); ++k) {
            const auto seed = opts.co_registered_seed ? std::optional<Rotation>(r) : std::nullopt;
            const MatchResult m = most_similar_view(q, *others[k], *other_codebooks[k], opts.descent, seed);
            if (m.similarity > best.similarity) {
                best.similarity = m.similarity;
                best.r_b = m.rotation;
                best.matched_class = others[k]->class_id;
            }
        }
        best.r_a = r;
        best.grid_index = i;
        pairs[i] = best;
    });
    std::stable_sort(pairs.begin(), pairs.end(), [](const auto& a, const auto& b) { return a.similarity > b.similarity; });

    AmbiguityTable table;
    table.object_class = object.class_id;
    table.group_id = object.group_id;
    std::vector<double> raw;
    raw.reserve(pairs.size());
    for (const auto& p : pairs) {
        raw.push_back(p.similarity);
    }
    table.ambiguity = normalize_ambiguity(raw);
    table.pairs = std::move(pairs);
    return table;
}

/// Ranks both members of a twin pair against each other with a shared coarse grid.
inline std::array<AmbiguityTable, 2> rank_pair(const TwinPair& pair, const Codebook& codebook_a, const Codebook& codebook_b,
                                               const std::vector<Rotation>& coarse_grid, const RankOptions& opts) {
    return {rank_object(pair.a, {&pair.b}, {&codebook_b}, coarse_grid, opts),
            rank_object(pair.b, {&pair.a}, {&codebook_a}, coarse_grid, opts)};
}

/// Orientations with ambiguity < a go to training, the rest are ambiguous.
inline ThresholdSplit split_by_threshold(const AmbiguityTable& table, double a) {
    if (!(a >= 0.0 && a <= 1.0)) {
        throw std::invalid_argument("split_by_threshold: threshold must lie in [0, 1]");
    }
    ThresholdSplit split;
    split.threshold = a;
    for (std::size_t i = 0; i < table.size(); ++i) {
        if (table.ambiguity[i] < a) {
            split.train_rotations.push_back(table.pairs[i].r_a);
            split.train_indices.push_back(table.pairs[i].grid_index);
        } else {
            split.ambiguous_rotations.push_back(table.pairs[i].r_a);
            split.ambiguous_indices.push_back(table.pairs[i].grid_index);
        }
    }
    return split;
}

/// Orientation with the lowest ambiguity; ties go to the lowest grid index.
inline Rotation best_orientation(const AmbiguityTable& table) {
    if (table.empty()) {
        throw std::invalid_argument("best_orientation: empty table");
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i < table.size(); ++i) {
        const bool lower = table.ambiguity[i] < table.ambiguity[best];
        const bool tie = table.ambiguity[i] == table.ambiguity[best] && table.pairs[i].grid_index < table.pairs[best].grid_index;
        if (lower || tie) {
            best = i;
        }
    }
    return table.pairs[best].r_a;
}

// Persistence. CSV columns, in order:
//   rank, grid_index, similarity, ambiguity, ra_w, ra_x, ra_y, ra_z,
//   rb_w, rb_x, rb_y, rb_z, matched_class
// Rows are in table order (similarity descending); rank starts at 0.

inline const std::vector<std::string>& sorted_pairs_header() {
    static const std::vector<std::string> header{"rank", "grid_index", "similarity", "ambiguity", "ra_w", "ra_x", "ra_y",
                                                 "ra_z",  "rb_w",       "rb_x",       "rb_y",      "rb_z", "matched_class"};
    return header;
}

inline std::string sorted_pairs_csv(const AmbiguityTable& table) {
    CsvWriter csv(sorted_pairs_header());
    for (std::size_t i = 0; i < table.size(); ++i) {
        const auto& p = table.pairs[i];
        csv.row_strings({std::to_string(i), std::to_string(p.grid_index), format_double(p.similarity),
                         format_double(table.ambiguity[i]), format_double(p.r_a.w()), format_double(p.r_a.x()),
                         format_double(p.r_a.y()), format_double(p.r_a.z()), format_double(p.r_b.w()),
                         format_double(p.r_b.x()), format_double(p.r_b.y()), format_double(p.r_b.z()),
                         std::to_string(p.matched_class)});
    }
    return csv.str();
}

inline void export_sorted_pairs(const AmbiguityTable& table, const std::filesystem::path& path) {
    write_file_atomic(path, sorted_pairs_csv(table));
}

inline AmbiguityTable parse_sorted_pairs(const std::filesystem::path& path, int object_class = 0, int group_id = 0) {
    const auto rows = read_csv(path);
    if (rows.empty() || rows.front() != sorted_pairs_header()) {
        throw std::runtime_error("unexpected sorted-pairs header in " + path.string());
    }
    AmbiguityTable table;
    table.object_class = object_class;
    table.group_id = group_id;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& c = rows[r];
        if (c.size() != sorted_pairs_header().size()) {
            throw std::runtime_error("malformed row " + std::to_string(r) + " in " + path.string());
        }
        MatchedPair p;
        p.grid_index = std::stoull(c[1]);
        p.similarity = std::stod(c[2]);
        p.r_a = Rotation(std::stod(c[4]), std::stod(c[5]), std::stod(c[6]), std::stod(c[7]));
        p.r_b = Rotation(std::stod(c[8]), std::stod(c[9]), std::stod(c[10]), std::stod(c[11]));
        p.matched_class = std::stoi(c[12]);
        table.pairs.push_back(p);
        table.ambiguity.push_back(std::stod(c[3]));
    }
    return table;
}

inline nlohmann::json to_json_value(const AmbiguityTable& table) {
    nlohmann::json pairs = nlohmann::json::array();
    for (std::size_t i = 0; i < table.size(); ++i) {
        const auto& p = table.pairs[i];
        pairs.push_back({{"grid_index", p.grid_index},
                         {"similarity", p.similarity},
                         {"ambiguity", table.ambiguity[i]},
                         {"r_a", rotation_to_json(p.r_a)},
                         {"r_b", rotation_to_json(p.r_b)},
                         {"matched_class", p.matched_class}});
    }
    return {{"object_class", table.object_class}, {"group_id", table.group_id}, {"pairs", pairs}};
}

inline AmbiguityTable ambiguity_table_from_json(const nlohmann::json& j) {
    AmbiguityTable table;
    table.object_class = j.at("object_class").get<int>();
    table.group_id = j.at("group_id").get<int>();
    for (const auto& jp : j.at("pairs")) {
        MatchedPair p;
        p.grid_index = jp.at("grid_index").get<std::size_t>();
        p.similarity = jp.at("similarity").get<double>();
        p.r_a = rotation_from_json(jp.at("r_a"));
        p.r_b = rotation_from_json(jp.at("r_b"));
        p.matched_class = jp.at("matched_class").get<int>();
        table.pairs.push_back(p);
        table.ambiguity.push_back(jp.at("ambiguity").get<double>());
    }
    return table;
}

} // namespace ambiview
