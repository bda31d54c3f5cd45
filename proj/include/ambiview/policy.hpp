#pragma once

// Next-best-view selection and the closed-loop active classification
// simulator.
//
// Frames: the object sits at the world origin with orientation O (object to
// world). A camera orientation C (camera to world) looks at the origin along
// its -z axis, so C * e_z points from the object toward the camera. The view
// the camera sees is the relative rotation R = O^T * C, the same
// camera-to-object convention used by the codebooks and tables.

#include "ambiview/ambiguity.hpp"
#include "ambiview/classify.hpp"
#include "ambiview/codebook.hpp"
#include "ambiview/parallel.hpp"
#include "ambiview/random.hpp"
#include "ambiview/so3.hpp"
#include "ambiview/synthworld.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace ambiview {

struct TrajectoryGrid {
    std::vector<double> circles; ///< polar angles theta in (0, pi)
    std::size_t steps = 32;      ///< azimuth samples per circle
    double radius = 1.0;         ///< meters, metadata only
};

/// `n_circles` parallel circles at theta = pi * (i + 0.5) / n_circles.
inline TrajectoryGrid make_trajectory_grid(std::size_t n_circles, std::size_t steps, double radius = 1.0) {
    if (n_circles == 0) {
        throw std::invalid_argument("trajectory grid needs at least one circle");
    }
    TrajectoryGrid g;
    for (std::size_t i = 0; i < n_circles; ++i) {
        g.circles.push_back(kPi * (static_cast<double>(i) + 0.5) / static_cast<double>(n_circles));
    }
    g.steps = steps;
    g.radius = radius;
    return g;
}

struct ReachableSet {
    std::vector<Rotation> rotations; ///< camera orientations in the world frame
    std::string generator;
};

inline ReachableSet build_trajectory_reachable(const TrajectoryGrid& grid) {
    if (grid.steps == 0 || grid.circles.empty()) {
        throw std::invalid_argument("trajectory grid needs >= 1 circle and >= 1 step");
    }
    ReachableSet set;
    set.generator = "trajectory";
    for (double theta : grid.circles) {
        if (!(theta > 0.0 && theta < kPi)) {
            throw std::invalid_argument("trajectory circle theta must lie in (0, pi)");
        }
        for (std::size_t s = 0; s < grid.steps; ++s) {
            const double phi = kTwoPi * static_cast<double>(s) / static_cast<double>(grid.steps);
            set.rotations.push_back(look_at(SphericalDirection{theta, phi}));
        }
    }
    return set;
}

/// Camera orientations looking at the origin from `n` Fibonacci directions.
inline ReachableSet build_sphere_reachable(std::size_t n) {
    ReachableSet set;
    set.generator = "sphere";
    for (const auto& d : fibonacci_directions(n)) {
        set.rotations.push_back(look_at(d));
    }
    return set;
}

/// Uniformly distributed rotation (normalized Gaussian quaternion).
inline Rotation random_rotation(Rng& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    for (;;) {
        const double w = normal(rng), x = normal(rng), y = normal(rng), z = normal(rng);
        if (w * w + x * x + y * y + z * z > 1e-12) {
            return {w, x, y, z};
        }
    }
}

/// Nearest-entry lookup into an ambiguity table. Ambiguity does not depend on
/// roll, so entries are matched by view direction; ties go to the lowest grid index.
class TableLookup {
public:
    TableLookup() = default;

    explicit TableLookup(const AmbiguityTable& table) : class_id_(table.object_class) {
        if (table.empty()) {
            throw std::invalid_argument("TableLookup: empty table");
        }
        std::vector<std::size_t> order(table.size());
        for (std::size_t i = 0; i < order.size(); ++i) {
            order[i] = i;
        }
        std::sort(order.begin(), order.end(),
                  [&](std::size_t a, std::size_t b) { return table.pairs[a].grid_index < table.pairs[b].grid_index; });
        directions_.resize(3, static_cast<Eigen::Index>(order.size()));
        for (std::size_t i = 0; i < order.size(); ++i) {
            directions_.col(static_cast<Eigen::Index>(i)) = table.pairs[order[i]].r_a.view_direction();
            ambiguity_.push_back(table.ambiguity[order[i]]);
            rotations_.push_back(table.pairs[order[i]].r_a);
        }
    }

    [[nodiscard]] std::size_t size() const { return ambiguity_.size(); }
    [[nodiscard]] int class_id() const { return class_id_; }

    [[nodiscard]] std::size_t nearest(const Vec3& direction) const {
        std::size_t best = 0;
        double best_dot = -std::numeric_limits<double>::infinity();
        for (Eigen::Index i = 0; i < directions_.cols(); ++i) {
            const double d = directions_.col(i).dot(direction);
            if (d > best_dot) {
                best_dot = d;
                best = static_cast<std::size_t>(i);
            }
        }
        return best;
    }

    [[nodiscard]] double ambiguity_at(const Rotation& view) const { return ambiguity_[nearest(view.view_direction())]; }
    [[nodiscard]] double ambiguity(std::size_t i) const { return ambiguity_[i]; }
    [[nodiscard]] const Rotation& rotation(std::size_t i) const { return rotations_[i]; }

private:
    int class_id_ = 0;
    Eigen::Matrix3Xd directions_;
    std::vector<double> ambiguity_;
    std::vector<Rotation> rotations_;
};

/// A class/pose hypothesis expressed as an object pose in the world.
struct WorldHypothesis {
    int class_id = 0;
    Rotation object_pose; ///< estimated O
    double score = 0.0;
};

/// Converts codebook hypotheses for a view seen from camera orientation C
/// into world poses: O = C * R^T.
inline std::vector<WorldHypothesis> to_world(const std::vector<PoseHypothesis>& hyps, const Rotation& camera) {
    std::vector<WorldHypothesis> out;
    out.reserve(hyps.size());
    for (const auto& h : hyps) {
        out.push_back({h.class_id, camera * h.rotation.inverse(), h.score});
    }
    return out;
}

/// Lookups indexed by class id.
using LookupSet = std::vector<TableLookup>;

inline const TableLookup& lookup_for(const LookupSet& lookups, int class_id) {
    if (class_id < 0 || static_cast<std::size_t>(class_id) >= lookups.size() ||
        lookups[static_cast<std::size_t>(class_id)].class_id() != class_id) {
        throw std::invalid_argument("no ambiguity table for class " + std::to_string(class_id));
    }
    return lookups[static_cast<std::size_t>(class_id)];
}

/// Mean table ambiguity over hypotheses of the view each one predicts from
/// camera orientation `camera`. With `weighted`, hypotheses are weighted by
/// their non-negative match score.
inline double expected_ambiguity(const Rotation& camera, const std::vector<WorldHypothesis>& hyps,
                                 const LookupSet& lookups, bool weighted = false) {
    if (hyps.empty()) {
        throw std::invalid_argument("expected_ambiguity: no hypotheses");
    }
    double sum = 0.0;
    double wsum = 0.0;
    for (const auto& h : hyps) {
        const double a = lookup_for(lookups, h.class_id).ambiguity_at(h.object_pose.inverse() * camera);
        const double w = weighted ? std::max(0.0, h.score) : 1.0;
        sum += w * a;
        wsum += w;
    }
    if (!(wsum > 0.0)) {
        return expected_ambiguity(camera, hyps, lookups, false);
    }
    return sum / wsum;
}

/// Index of the reachable orientation with the lowest expected ambiguity;
/// ties go to the lowest index.
inline std::size_t next_best_view_index(const std::vector<WorldHypothesis>& hyps, const LookupSet& lookups,
                                        const ReachableSet& reachable, bool weighted = false) {
    if (reachable.rotations.empty()) {
        throw std::invalid_argument("next_best_view: empty reachable set");
    }
    std::size_t best = 0;
    double best_value = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < reachable.rotations.size(); ++i) {
        const double v = expected_ambiguity(reachable.rotations[i], hyps, lookups, weighted);
        if (v < best_value) {
            best_value = v;
            best = i;
        }
    }
    return best;
}

inline Rotation next_best_view(const std::vector<WorldHypothesis>& hyps, const LookupSet& lookups,
                               const ReachableSet& reachable, bool weighted = false) {
    return reachable.rotations[next_best_view_index(hyps, lookups, reachable, weighted)];
}

// Episodes

enum class PolicyKind { next_best, random };

inline const char* to_string(PolicyKind p) { return p == PolicyKind::next_best ? "next_best" : "random"; }

inline PolicyKind policy_from_string(const std::string& s) {
    if (s == "next_best") {
        return PolicyKind::next_best;
    }
    if (s == "random") {
        return PolicyKind::random;
    }
    throw std::invalid_argument("unknown policy '" + s + "'");
}

enum class TerminationReason { below_threshold, local_optimum, move_budget };

inline const char* to_string(TerminationReason r) {
    switch (r) {
    case TerminationReason::below_threshold:
        return "below_threshold";
    case TerminationReason::local_optimum:
        return "local_optimum";
    case TerminationReason::move_budget:
        return "move_budget";
    }
    return "?";
}

/// Everything an episode needs about one ambiguous group. Vectors are indexed
/// by class id.
struct ActiveWorld {
    std::vector<const SynthObject*> objects;
    std::vector<const Codebook*> codebooks;
    LookupSet lookups;
    const CentroidClassifier* classifier = nullptr;

    void validate() const {
        if (objects.empty() || objects.size() != codebooks.size() || objects.size() != lookups.size() ||
            classifier == nullptr) {
            throw std::invalid_argument("ActiveWorld: objects, codebooks, tables and classifier must be set");
        }
        for (std::size_t k = 0; k < objects.size(); ++k) {
            const int id = static_cast<int>(k);
            if (objects[k]->class_id != id || codebooks[k]->class_id() != id || lookups[k].class_id() != id) {
                throw std::invalid_argument("ActiveWorld: entry " + std::to_string(k) + " must hold class " +
                                            std::to_string(k));
            }
        }
    }
};

struct EpisodeConfig {
    PolicyKind policy = PolicyKind::next_best;
    double threshold = 0.4;
    std::size_t max_moves = 3;
    double noise_sigma = 0.0;
    std::size_t hypotheses_per_class = 1;
    bool weighted_mean = false;
};

struct EpisodeResult {
    int true_class = 0;
    Rotation true_pose;                    ///< object orientation O
    std::vector<std::size_t> visited;      ///< reachable-set indices, start first
    std::vector<Rotation> visited_cameras; ///< camera orientations, start first
    std::vector<double> ambiguities;       ///< mean hypothesis ambiguity at each visited pose
    std::vector<std::uint64_t> noise_seeds;
    std::size_t moves_used = 0;
    TerminationReason reason = TerminationReason::move_budget;
    int predicted_class = 0;
    bool correct = false;
};

/// Observation noise seed for step `step` of an episode; shared by all policies.
inline std::uint64_t observation_seed(std::uint64_t episode_seed, std::size_t step) {
    return derive_seed(episode_seed, "observation", step);
}

/// Runs one episode from reachable index `start`. The classifier sees the
/// observation de-rolled by the top hypothesis' in-plane angle, matching the
/// roll-free views it was trained on.
inline EpisodeResult run_episode(const ActiveWorld& world, int true_class, const Rotation& true_pose,
                                 const ReachableSet& reachable, std::size_t start, const EpisodeConfig& cfg,
                                 std::uint64_t episode_seed) {
    if (!(cfg.threshold > 0.0 && cfg.threshold <= 1.0)) {
        throw std::invalid_argument("run_episode: threshold must lie in (0, 1]");
    }
    if (start >= reachable.rotations.size()) {
        throw std::invalid_argument("run_episode: start index outside the reachable set");
    }
    if (true_class < 0 || static_cast<std::size_t>(true_class) >= world.objects.size()) {
        throw std::invalid_argument("run_episode: unknown true class");
    }
    if (cfg.policy == PolicyKind::random && reachable.rotations.size() < 2 && cfg.max_moves > 0) {
        throw std::invalid_argument("run_episode: random policy needs at least two reachable poses");
    }
    const SynthObject& object = *world.objects[static_cast<std::size_t>(true_class)];
    Rng move_rng = make_rng(episode_seed, "random_moves");

    EpisodeResult res;
    res.true_class = true_class;
    res.true_pose = true_pose;
    std::size_t current = start;
    for (std::size_t step = 0;; ++step) {
        const Rotation& camera = reachable.rotations[current];
        const std::uint64_t noise_seed = observation_seed(episode_seed, step);
        const ViewEmbedding z = render_embedding(object, true_pose.inverse() * camera, cfg.noise_sigma, noise_seed);
        const auto hyps = hypotheses_for_group(world.codebooks, z, cfg.hypotheses_per_class);
        const auto world_hyps = to_world(hyps, camera);
        const double amb = expected_ambiguity(camera, world_hyps, world.lookups, cfg.weighted_mean);
        res.visited.push_back(current);
        res.visited_cameras.push_back(camera);
        res.ambiguities.push_back(amb);
        res.noise_seeds.push_back(noise_seed);

        auto classify_and_stop = [&](TerminationReason reason) {
            const ViewEmbedding derolled = apply_roll(z, -roll_angle(hyps.front().rotation));
            res.predicted_class = predict(*world.classifier, derolled).class_id;
            res.correct = res.predicted_class == true_class;
            res.reason = reason;
            res.moves_used = step;
            return res;
        };

        if (amb < cfg.threshold) {
            return classify_and_stop(TerminationReason::below_threshold);
        }
        std::size_t next = current;
        if (cfg.policy == PolicyKind::next_best) {
            next = next_best_view_index(world_hyps, world.lookups, reachable, cfg.weighted_mean);
            if (next == current) {
                return classify_and_stop(TerminationReason::local_optimum);
            }
        } else if (step < cfg.max_moves) {
            // Uniform over the reachable set without the current pose.
            std::uniform_int_distribution<std::size_t> pick(0, reachable.rotations.size() - 2);
            next = pick(move_rng);
            if (next >= current) {
                ++next;
            }
        }
        if (step == cfg.max_moves) {
            return classify_and_stop(TerminationReason::move_budget);
        }
        current = next;
    }
}

/// Start state of episode `index`, shared by all policies.
struct EpisodeStart {
    int true_class = 0;
    Rotation true_pose;
    std::size_t start = 0;
    std::uint64_t seed = 0;
};

inline EpisodeStart episode_start(std::uint64_t experiment_seed, std::size_t index, std::size_t n_classes,
                                  std::size_t reachable_size) {
    EpisodeStart s;
    s.seed = derive_seed(experiment_seed, "episode", index);
    Rng rng = make_rng(s.seed, "start");
    s.true_class = static_cast<int>(std::uniform_int_distribution<std::size_t>(0, n_classes - 1)(rng));
    s.true_pose = random_rotation(rng);
    s.start = std::uniform_int_distribution<std::size_t>(0, reachable_size - 1)(rng);
    return s;
}

struct ExperimentResult {
    PolicyKind policy = PolicyKind::next_best;
    std::vector<EpisodeResult> episodes;
    /// success[k]: fraction of episodes that terminated on their own
    /// (below threshold or at a local optimum) after at most k moves with a
    /// correct classification. Non-decreasing in k.
    std::vector<double> success;
    double accuracy = 0.0; ///< fraction classified correctly, any termination
};

inline bool succeeded_within(const EpisodeResult& e, std::size_t k) {
    return e.correct && e.reason != TerminationReason::move_budget && e.moves_used <= k;
}

inline ExperimentResult run_experiment(const ActiveWorld& world, const ReachableSet& reachable, std::size_t n_episodes,
                                       const EpisodeConfig& cfg, std::uint64_t seed) {
    if (n_episodes == 0) {
        throw std::invalid_argument("run_experiment: n_episodes must be >= 1");
    }
    if (reachable.rotations.empty()) {
        throw std::invalid_argument("run_experiment: empty reachable set");
    }
    world.validate();
    ExperimentResult out;
    out.policy = cfg.policy;
    out.episodes.resize(n_episodes);
    parallel_for(n_episodes, [&](std::size_t i) {
        const auto s = episode_start(seed, i, world.objects.size(), reachable.rotations.size());
        out.episodes[i] = run_episode(world, s.true_class, s.true_pose, reachable, s.start, cfg, s.seed);
    });
    out.success.assign(cfg.max_moves + 1, 0.0);
    std::size_t correct = 0;
    for (const auto& e : out.episodes) {
        correct += e.correct ? 1U : 0U;
        for (std::size_t k = 0; k <= cfg.max_moves; ++k) {
            out.success[k] += succeeded_within(e, k) ? 1.0 : 0.0;
        }
    }
    for (auto& s : out.success) {
        s /= static_cast<double>(n_episodes);
    }
    out.accuracy = static_cast<double>(correct) / static_cast<double>(n_episodes);
    return out;
}

// Serialization

inline nlohmann::json to_json_value(const EpisodeResult& e, std::size_t index, PolicyKind policy) {
    nlohmann::json cams = nlohmann::json::array();
    for (const auto& c : e.visited_cameras) {
        cams.push_back(rotation_to_json(c));
    }
    return {{"episode", index},
            {"policy", to_string(policy)},
            {"true_class", e.true_class},
            {"true_pose", rotation_to_json(e.true_pose)},
            {"start", rotation_to_json(e.visited_cameras.front())},
            {"visited", e.visited},
            {"visited_rotations", cams},
            {"ambiguities", e.ambiguities},
            {"noise_seeds", e.noise_seeds},
            {"moves_used", e.moves_used},
            {"terminated_reason", to_string(e.reason)},
            {"predicted_class", e.predicted_class},
            {"correct", e.correct}};
}

/// One JSON object per line.
inline std::string episodes_jsonl(const ExperimentResult& r) {
    std::string out;
    for (std::size_t i = 0; i < r.episodes.size(); ++i) {
        out += to_json_value(r.episodes[i], i, r.policy).dump();
        out += '\n';
    }
    return out;
}

/// Columns: budget, then one success-fraction column per experiment, named
/// after its policy.
inline std::string success_csv(const std::vector<const ExperimentResult*>& results) {
    if (results.empty()) {
        throw std::invalid_argument("success_csv: no results");
    }
    std::vector<std::string> header{"budget"};
    for (const auto* r : results) {
        if (r->success.size() != results.front()->success.size()) {
            throw std::invalid_argument("success_csv: experiments use different move budgets");
        }
        header.emplace_back(to_string(r->policy));
    }
    CsvWriter csv(header);
    for (std::size_t k = 0; k < results.front()->success.size(); ++k) {
        std::vector<std::string> row{std::to_string(k)};
        for (const auto* r : results) {
            row.push_back(format_double(r->success[k]));
        }
        csv.row_strings(row);
    }
    return csv.str();
}

} // namespace ambiview
