#pragma once

// Experiment manifest: every parameter and seed of a CLI run in one JSON
// document. Missing fields take defaults, unknown fields are rejected, and
// the resolved form has every default materialized.

#include "ambiview/ambiguity.hpp"
#include "ambiview/random.hpp"
#include "ambiview/so3.hpp"
#include "ambiview/synthworld.hpp"

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <cstdint>
#include <set>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

namespace ambiview {

inline constexpr int kManifestSchemaVersion = 1;

/// Invalid configuration; the message names the offending field.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Manifest {
    int schema_version = kManifestSchemaVersion;
    std::uint64_t seed = 1;

    struct World {
        std::size_t n_blobs = 512;
        std::size_t dim = 32;
        Vec3 patch_center = Vec3::UnitX();
        double patch_radius = kPi / 3.0;
        double visibility_exponent = 1.0;
    } world;

    struct Grids {
        std::size_t codebook_directions = 1024;
        std::size_t codebook_inplane = 36;
        std::size_t coarse_directions = 1024;
    } grids;

    struct Descent {
        std::size_t steps = 32;
        double initial_step = 0.0; ///< 0 before resolution means "twice the coarse spacing"
        bool co_registered_seed = true;
    } descent;

    struct Sweep {
        std::vector<double> thresholds{0.0, 0.25, 0.5, 0.75, 1.0};
        std::vector<double> caps{0.25, 0.5, 0.75, 1.0};
        std::size_t trials = 10;
        std::size_t samples_per_rotation = 1;
        double relative_noise = 0.1;
    } sweep;

    struct Simulate {
        std::size_t episodes = 230;
        std::vector<std::string> policies{"next_best", "random"};
        double threshold = 0.4;
        std::size_t max_moves = 3;
        std::string reachable = "trajectory"; ///< "trajectory" or "sphere"
        std::size_t circles = 5;
        std::size_t steps_per_circle = 32;
        std::size_t sphere_directions = 256;
        double classifier_threshold = 0.5;
        double relative_noise = 0.1;
        std::size_t hypotheses_per_class = 1;
        bool weighted_mean = false;
    } simulate;

    struct Compare {
        std::vector<std::string> metrics{"primary", "mse", "blob_match", "random_features"};
        std::size_t random_features_dim = 128;
        std::vector<double> relative_noise{0.0, 0.05, 0.1, 0.5, 1.0, 10.0};
    } compare;

    struct Outputs {
        std::string prefix; ///< prepended to every output file name
    } outputs;
};

/// World generation parameters implied by the manifest.
inline PairParams pair_params(const Manifest& m) {
    PairParams p;
    p.seed = derive_seed(m.seed, "world");
    p.n_blobs = m.world.n_blobs;
    p.dim = m.world.dim;
    p.patch_center = m.world.patch_center;
    p.patch_radius = m.world.patch_radius;
    p.visibility_exponent = m.world.visibility_exponent;
    return p;
}

namespace detail {

// Reads fields of one JSON object, remembering which keys were consumed so
// that leftovers can be reported as unknown.
class FieldReader {
public:
    FieldReader(const nlohmann::json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) {
            throw ConfigError(fmt::format("{}: expected an object", display()));
        }
    }

    template <typename T>
    void read(const char* key, T& out) {
        seen_.insert(key);
        if (!j_.contains(key)) {
            return;
        }
        const auto& v = j_.at(key);
        if (!kind_matches<T>(v)) {
            throw ConfigError(fmt::format("{}: wrong type", field(key)));
        }
        try {
            out = v.get<T>();
        } catch (const nlohmann::json::exception&) {
            throw ConfigError(fmt::format("{}: wrong type", field(key)));
        }
    }

    void read(const char* key, Vec3& out) {
        std::vector<double> v{out.x(), out.y(), out.z()};
        read(key, v);
        if (v.size() != 3) {
            throw ConfigError(fmt::format("{}: expected 3 numbers", field(key)));
        }
        out = Vec3(v[0], v[1], v[2]);
    }

    /// Reader for a nested object; an absent key yields an empty object.
    FieldReader child(const char* key) {
        seen_.insert(key);
        static const nlohmann::json empty = nlohmann::json::object();
        return {j_.contains(key) ? j_.at(key) : empty, field(key)};
    }

    void finish() const {
        for (const auto& item : j_.items()) {
            if (!seen_.count(item.key())) {
                throw ConfigError(fmt::format("{}: unknown field", field(item.key())));
            }
        }
    }

    [[nodiscard]] std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

private:
    // nlohmann converts freely between numbers and booleans; be strict.
    template <typename T>
    static bool kind_matches(const nlohmann::json& v) {
        if constexpr (std::is_same_v<T, bool>) {
            return v.is_boolean();
        } else if constexpr (std::is_integral_v<T>) {
            return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
        } else if constexpr (std::is_floating_point_v<T>) {
            return v.is_number();
        } else if constexpr (std::is_same_v<T, std::string>) {
            return v.is_string();
        } else {
            return true;
        }
    }

    [[nodiscard]] std::string display() const { return path_.empty() ? "manifest" : path_; }

    const nlohmann::json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

inline void require(bool ok, const std::string& field, const std::string& what) {
    if (!ok) {
        throw ConfigError(fmt::format("{}: {}", field, what));
    }
}

} // namespace detail

/// Checks ranges and fills in derived defaults.
inline void resolve(Manifest& m) {
    using detail::require;
    require(m.schema_version == kManifestSchemaVersion, "schema_version",
            fmt::format("unsupported version (expected {})", kManifestSchemaVersion));
    require(m.world.n_blobs >= 4, "world.n_blobs", "must be >= 4");
    require(m.world.dim >= 2 && m.world.dim % 2 == 0, "world.dim", "must be even and >= 2");
    require(m.world.patch_center.norm() > 1e-12, "world.patch_center", "must be nonzero");
    require(m.world.patch_radius > 0.0 && m.world.patch_radius < kPi / 2.0, "world.patch_radius", "must lie in (0, pi/2)");
    require(m.world.visibility_exponent > 0.0, "world.visibility_exponent", "must be > 0");
    require(m.grids.codebook_directions >= 1, "grids.codebook_directions", "must be >= 1");
    require(m.grids.codebook_inplane >= 1, "grids.codebook_inplane", "must be >= 1");
    require(m.grids.coarse_directions >= 2, "grids.coarse_directions", "must be >= 2");
    require(m.descent.initial_step >= 0.0, "descent.initial_step", "must be >= 0");
    if (m.descent.initial_step == 0.0) {
        m.descent.initial_step = default_initial_step(m.grids.coarse_directions);
    }
    require(!m.sweep.thresholds.empty(), "sweep.thresholds", "must be nonempty");
    for (double a : m.sweep.thresholds) {
        require(a >= 0.0 && a <= 1.0, "sweep.thresholds", "values must lie in [0, 1]");
    }
    require(!m.sweep.caps.empty(), "sweep.caps", "must be nonempty");
    for (double c : m.sweep.caps) {
        require(c >= 0.0 && c <= 1.0, "sweep.caps", "values must lie in [0, 1]");
    }
    require(m.sweep.trials >= 1, "sweep.trials", "must be >= 1");
    require(m.sweep.samples_per_rotation >= 1, "sweep.samples_per_rotation", "must be >= 1");
    require(m.sweep.relative_noise >= 0.0, "sweep.relative_noise", "must be >= 0");
    require(m.simulate.episodes >= 1, "simulate.episodes", "must be >= 1");
    require(!m.simulate.policies.empty(), "simulate.policies", "must be nonempty");
    for (const auto& p : m.simulate.policies) {
        require(p == "next_best" || p == "random", "simulate.policies", "entries must be \"next_best\" or \"random\"");
    }
    require(m.simulate.threshold > 0.0 && m.simulate.threshold <= 1.0, "simulate.threshold", "must lie in (0, 1]");
    require(m.simulate.reachable == "trajectory" || m.simulate.reachable == "sphere", "simulate.reachable",
            "must be \"trajectory\" or \"sphere\"");
    require(m.simulate.circles >= 1, "simulate.circles", "must be >= 1");
    require(m.simulate.steps_per_circle >= 1, "simulate.steps_per_circle", "must be >= 1");
    require(m.simulate.sphere_directions >= 1, "simulate.sphere_directions", "must be >= 1");
    require(m.simulate.classifier_threshold > 0.0 && m.simulate.classifier_threshold <= 1.0,
            "simulate.classifier_threshold", "must lie in (0, 1]");
    require(m.simulate.relative_noise >= 0.0, "simulate.relative_noise", "must be >= 0");
    require(m.simulate.hypotheses_per_class >= 1, "simulate.hypotheses_per_class", "must be >= 1");
    require(!m.compare.metrics.empty(), "compare.metrics", "must be nonempty");
    for (const auto& name : m.compare.metrics) {
        require(name == "primary" || name == "mse" || name == "blob_match" || name == "random_features",
                "compare.metrics", fmt::format("unknown metric \"{}\"", name));
    }
    require(m.compare.random_features_dim >= 1, "compare.random_features_dim", "must be >= 1");
    require(!m.compare.relative_noise.empty(), "compare.relative_noise", "must be nonempty");
    for (double s : m.compare.relative_noise) {
        require(s >= 0.0, "compare.relative_noise", "values must be >= 0");
    }
    require(m.outputs.prefix.find_first_of("/\\") == std::string::npos, "outputs.prefix",
            "must be a plain file-name prefix without directories");
}

/// Parses and resolves a manifest document.
inline Manifest manifest_from_json(const nlohmann::json& j) {
    Manifest m;
    detail::FieldReader root(j, "");
    root.read("schema_version", m.schema_version);
    root.read("seed", m.seed);
    {
        auto r = root.child("world");
        r.read("n_blobs", m.world.n_blobs);
        r.read("dim", m.world.dim);
        r.read("patch_center", m.world.patch_center);
        r.read("patch_radius", m.world.patch_radius);
        r.read("visibility_exponent", m.world.visibility_exponent);
        r.finish();
    }
    {
        auto r = root.child("grids");
        r.read("codebook_directions", m.grids.codebook_directions);
        r.read("codebook_inplane", m.grids.codebook_inplane);
        r.read("coarse_directions", m.grids.coarse_directions);
        r.finish();
    }
    {
        auto r = root.child("descent");
        r.read("steps", m.descent.steps);
        r.read("initial_step", m.descent.initial_step);
        r.read("co_registered_seed", m.descent.co_registered_seed);
        r.finish();
    }
    {
        auto r = root.child("sweep");
        r.read("thresholds", m.sweep.thresholds);
        r.read("caps", m.sweep.caps);
        r.read("trials", m.sweep.trials);
        r.read("samples_per_rotation", m.sweep.samples_per_rotation);
        r.read("relative_noise", m.sweep.relative_noise);
        r.finish();
    }
    {
        auto r = root.child("simulate");
        r.read("episodes", m.simulate.episodes);
        r.read("policies", m.simulate.policies);
        r.read("threshold", m.simulate.threshold);
        r.read("max_moves", m.simulate.max_moves);
        r.read("reachable", m.simulate.reachable);
        r.read("circles", m.simulate.circles);
        r.read("steps_per_circle", m.simulate.steps_per_circle);
        r.read("sphere_directions", m.simulate.sphere_directions);
        r.read("classifier_threshold", m.simulate.classifier_threshold);
        r.read("relative_noise", m.simulate.relative_noise);
        r.read("hypotheses_per_class", m.simulate.hypotheses_per_class);
        r.read("weighted_mean", m.simulate.weighted_mean);
        r.finish();
    }
    {
        auto r = root.child("compare");
        r.read("metrics", m.compare.metrics);
        r.read("random_features_dim", m.compare.random_features_dim);
        r.read("relative_noise", m.compare.relative_noise);
        r.finish();
    }
    {
        auto r = root.child("outputs");
        r.read("prefix", m.outputs.prefix);
        r.finish();
    }
    root.finish();
    resolve(m);
    return m;
}

inline Manifest parse_manifest(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(fmt::format("manifest is not valid JSON: {}", e.what()));
    }
    return manifest_from_json(j);
}

inline nlohmann::json to_json_value(const Manifest& m) {
    const auto& w = m.world;
    return {{"schema_version", m.schema_version},
            {"seed", m.seed},
            {"world",
             {{"n_blobs", w.n_blobs},
              {"dim", w.dim},
              {"patch_center", {w.patch_center.x(), w.patch_center.y(), w.patch_center.z()}},
              {"patch_radius", w.patch_radius},
              {"visibility_exponent", w.visibility_exponent}}},
            {"grids",
             {{"codebook_directions", m.grids.codebook_directions},
              {"codebook_inplane", m.grids.codebook_inplane},
              {"coarse_directions", m.grids.coarse_directions}}},
            {"descent",
             {{"steps", m.descent.steps},
              {"initial_step", m.descent.initial_step},
              {"co_registered_seed", m.descent.co_registered_seed}}},
            {"sweep",
             {{"thresholds", m.sweep.thresholds},
              {"caps", m.sweep.caps},
              {"trials", m.sweep.trials},
              {"samples_per_rotation", m.sweep.samples_per_rotation},
              {"relative_noise", m.sweep.relative_noise}}},
            {"simulate",
             {{"episodes", m.simulate.episodes},
              {"policies", m.simulate.policies},
              {"threshold", m.simulate.threshold},
              {"max_moves", m.simulate.max_moves},
              {"reachable", m.simulate.reachable},
              {"circles", m.simulate.circles},
              {"steps_per_circle", m.simulate.steps_per_circle},
              {"sphere_directions", m.simulate.sphere_directions},
              {"classifier_threshold", m.simulate.classifier_threshold},
              {"relative_noise", m.simulate.relative_noise},
              {"hypotheses_per_class", m.simulate.hypotheses_per_class},
              {"weighted_mean", m.simulate.weighted_mean}}},
            {"compare",
             {{"metrics", m.compare.metrics},
              {"random_features_dim", m.compare.random_features_dim},
              {"relative_noise", m.compare.relative_noise}}},
            {"outputs", {{"prefix", m.outputs.prefix}}}};
}

} // namespace ambiview
