#pragma once

// The four experiment commands. Each returns its output files as
// (name, content) pairs; writing them is left to the caller.

#include "ambiview/ambiguity.hpp"
#include "ambiview/baselines.hpp"
#include "ambiview/classify.hpp"
#include "ambiview/codebook.hpp"
#include "ambiview/io.hpp"
#include "ambiview/manifest.hpp"
#include "ambiview/policy.hpp"
#include "ambiview/synthworld.hpp"

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <array>
#include <functional>
#include <string>
#include <vector>

namespace ambiview {

struct OutputFile {
    std::string name;
    std::string content;
};

using Logger = std::function<void(const std::string&)>;

/// World, codebooks and ambiguity tables shared by all commands.
struct Experiment {
    TwinPair pair;
    ViewGrid coarse;
    std::array<Codebook, 2> codebooks;
    std::array<AmbiguityTable, 2> tables;

    [[nodiscard]] std::vector<const SynthObject*> objects() const { return {&pair.a, &pair.b}; }
    [[nodiscard]] std::vector<const AmbiguityTable*> table_ptrs() const { return {&tables[0], &tables[1]}; }
    /// relative * mean noise-free embedding norm over the coarse grid.
    [[nodiscard]] double sigma(double relative) const {
        return default_noise_sigma(objects(), coarse.rotations, relative);
    }
};

inline Experiment build_experiment(const Manifest& m, const Logger& log = {}) {
    auto say = [&](const std::string& s) {
        if (log) {
            log(s);
        }
    };
    Experiment e;
    e.pair = make_ambiguous_pair(pair_params(m));
    const ViewGrid cb_grid = build_view_grid(m.grids.codebook_directions, m.grids.codebook_inplane);
    say(fmt::format("building codebooks ({} entries each)", cb_grid.size()));
    e.codebooks = {build_codebook(e.pair.a, cb_grid), build_codebook(e.pair.b, cb_grid)};
    e.coarse = build_view_grid(m.grids.coarse_directions, 1);
    RankOptions ro;
    ro.descent.steps = m.descent.steps;
    ro.descent.initial_step = m.descent.initial_step;
    ro.co_registered_seed = m.descent.co_registered_seed;
    say(fmt::format("ranking {} coarse orientations per object", e.coarse.size()));
    e.tables = rank_pair(e.pair, e.codebooks[0], e.codebooks[1], e.coarse.rotations, ro);
    return e;
}

inline std::string output_name(const Manifest& m, const std::string& base) { return m.outputs.prefix + base; }

inline std::vector<OutputFile> cmd_rank(const Manifest& m, const Logger& log = {}) {
    const Experiment e = build_experiment(m, log);
    std::vector<OutputFile> out;
    const nlohmann::json world = {{"objects", {to_json_value(e.pair.a), to_json_value(e.pair.b)}}};
    out.push_back({output_name(m, "world.json"), world.dump(1) + "\n"});
    for (const auto& t : e.tables) {
        out.push_back({output_name(m, fmt::format("ambiguity_class{}.json", t.object_class)),
                       to_json_value(t).dump(1) + "\n"});
        out.push_back({output_name(m, fmt::format("sorted_pairs_class{}.csv", t.object_class)), sorted_pairs_csv(t)});
    }
    return out;
}

inline std::vector<OutputFile> cmd_sweep(const Manifest& m, const Logger& log = {}) {
    const Experiment e = build_experiment(m, log);
    SweepOptions so;
    so.trials = m.sweep.trials;
    so.samples_per_rotation = m.sweep.samples_per_rotation;
    so.noise_sigma = e.sigma(m.sweep.relative_noise);
    so.seed = derive_seed(m.seed, "sweep");
    if (log) {
        log(fmt::format("sweeping {} thresholds x {} caps, {} trials", m.sweep.thresholds.size(), m.sweep.caps.size(),
                        so.trials));
    }
    const auto sweep = threshold_sweep(e.objects(), e.table_ptrs(), m.sweep.thresholds, m.sweep.caps, so);
    return {{output_name(m, "sweep.csv"), sweep_csv(sweep)}};
}

/// Classifier used by the simulator: trained on views below the manifest's
/// classifier threshold at the simulation noise level.
inline CentroidClassifier simulation_classifier(const Manifest& m, const Experiment& e, double sigma) {
    std::vector<ClassViews> views;
    for (std::size_t k = 0; k < 2; ++k) {
        views.push_back({e.objects()[k], split_by_threshold(e.tables[k], m.simulate.classifier_threshold).train_rotations});
    }
    return train(views, {m.simulate.classifier_threshold, 1, sigma, derive_seed(m.seed, "classifier")});
}

inline ReachableSet simulation_reachable(const Manifest& m) {
    if (m.simulate.reachable == "sphere") {
        return build_sphere_reachable(m.simulate.sphere_directions);
    }
    return build_trajectory_reachable(make_trajectory_grid(m.simulate.circles, m.simulate.steps_per_circle));
}

inline std::vector<OutputFile> cmd_simulate(const Manifest& m, const Logger& log = {}) {
    const Experiment e = build_experiment(m, log);
    const double sigma = e.sigma(m.simulate.relative_noise);
    const CentroidClassifier clf = simulation_classifier(m, e, sigma);
    ActiveWorld world{e.objects(),
                      {&e.codebooks[0], &e.codebooks[1]},
                      {TableLookup(e.tables[0]), TableLookup(e.tables[1])},
                      &clf};
    const ReachableSet reachable = simulation_reachable(m);
    const std::uint64_t seed = derive_seed(m.seed, "simulate");

    std::vector<ExperimentResult> results;
    for (const auto& name : m.simulate.policies) {
        EpisodeConfig cfg;
        cfg.policy = policy_from_string(name);
        cfg.threshold = m.simulate.threshold;
        cfg.max_moves = m.simulate.max_moves;
        cfg.noise_sigma = sigma;
        cfg.hypotheses_per_class = m.simulate.hypotheses_per_class;
        cfg.weighted_mean = m.simulate.weighted_mean;
        if (log) {
            log(fmt::format("running {} episodes with the {} policy", m.simulate.episodes, name));
        }
        results.push_back(run_experiment(world, reachable, m.simulate.episodes, cfg, seed));
    }

    std::vector<OutputFile> out;
    std::vector<const ExperimentResult*> ptrs;
    nlohmann::json summary = nlohmann::json::array();
    for (const auto& r : results) {
        ptrs.push_back(&r);
        out.push_back({output_name(m, fmt::format("episodes_{}.jsonl", to_string(r.policy))), episodes_jsonl(r)});
        summary.push_back({{"policy", to_string(r.policy)},
                           {"episodes", r.episodes.size()},
                           {"accuracy", r.accuracy},
                           {"success_by_budget", r.success}});
    }
    out.push_back({output_name(m, "success.csv"), success_csv(ptrs)});
    out.push_back({output_name(m, "simulate_summary.json"),
                   nlohmann::json{{"noise_sigma", sigma}, {"reachable_size", reachable.rotations.size()}, {"policies", summary}}
                           .dump(1) +
                       "\n"});
    return out;
}

inline NamedMetric metric_by_name(const std::string& name, const Manifest& m) {
    if (name == "primary") {
        return primary_metric();
    }
    if (name == "mse") {
        return mse_metric();
    }
    if (name == "blob_match") {
        return blob_match_metric();
    }
    if (name == "random_features") {
        return random_features_metric(m.world.dim, m.compare.random_features_dim, derive_seed(m.seed, "compare"));
    }
    throw ConfigError("unknown metric " + name);
}

inline std::vector<OutputFile> cmd_compare(const Manifest& m, const Logger& log = {}) {
    const Experiment e = build_experiment(m, log);
    std::vector<NamedMetric> metrics;
    for (const auto& name : m.compare.metrics) {
        metrics.push_back(metric_by_name(name, m));
    }
    std::vector<double> sigmas;
    for (double rel : m.compare.relative_noise) {
        sigmas.push_back(e.sigma(rel));
    }
    std::vector<OutputFile> out;
    for (const auto& t : e.tables) {
        if (log) {
            log(fmt::format("comparing metrics on class {}", t.object_class));
        }
        const auto report = metric_comparison(t, e.objects(), metrics);
        out.push_back({output_name(m, fmt::format("metrics_class{}.csv", t.object_class)), metric_values_csv(report)});
        out.push_back({output_name(m, fmt::format("correlations_class{}.csv", t.object_class)), correlation_csv(report)});
        const auto noise = noise_robustness_sweep(t, e.objects(), sigmas,
                                                  derive_seed(m.seed, "noise_robustness", static_cast<std::uint64_t>(t.object_class)));
        out.push_back({output_name(m, fmt::format("noise_robustness_class{}.csv", t.object_class)), noise_robustness_csv(noise)});
    }
    return out;
}

/// Resolved manifest and content hashes written next to a command's outputs.
inline std::vector<OutputFile> provenance_files(const Manifest& m, const std::string& command,
                                                const std::vector<OutputFile>& outputs) {
    const std::string manifest_name = output_name(m, command + ".manifest.json");
    const std::string manifest_text = to_json_value(m).dump(2) + "\n";
    nlohmann::json hashes = nlohmann::json::object();
    for (const auto& f : outputs) {
        hashes[f.name] = sha256_hex(f.content);
    }
    hashes[manifest_name] = sha256_hex(manifest_text);
    const nlohmann::json info = {{"command", command}, {"schema_version", m.schema_version}, {"sha256", hashes}};
    return {{manifest_name, manifest_text}, {output_name(m, command + ".run_info.json"), info.dump(2) + "\n"}};
}

inline std::vector<OutputFile> run_command(const std::string& command, const Manifest& m, const Logger& log = {}) {
    std::vector<OutputFile> out;
    if (command == "rank") {
        out = cmd_rank(m, log);
    } else if (command == "sweep") {
        out = cmd_sweep(m, log);
    } else if (command == "simulate") {
        out = cmd_simulate(m, log);
    } else if (command == "compare") {
        out = cmd_compare(m, log);
    } else {
        throw ConfigError("unknown command " + command);
    }
    for (auto& f : provenance_files(m, command, out)) {
        out.push_back(std::move(f));
    }
    return out;
}

} // namespace ambiview
