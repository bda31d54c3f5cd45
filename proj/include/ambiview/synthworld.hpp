#pragma once

// Deterministic synthetic objects and their view embeddings.
//
// An object is a set of blobs on the unit sphere, each carrying a descriptor
// of even dimension d. The embedding of the view at rotation R is
//
//     z = M(roll) * sum_m w(v . p_m) * descriptor_m  (+ isotropic noise)
//
// with v the viewing direction of R, w(t) = max(0, t)^p (p = 1 by default)
// and M(roll) rotating each consecutive descriptor pair (2i, 2i+1) by the
// roll angle. Rolling the camera therefore changes the embedding only by M,
// the analog of an image that is identical up to an in-plane rotation.

#include "ambiview/random.hpp"
#include "ambiview/so3.hpp"

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace ambiview {

using ViewEmbedding = Eigen::VectorXd;

struct Blob {
    Vec3 position = Vec3::UnitZ();
    Eigen::VectorXd descriptor;
};

/// Parameters of make_ambiguous_pair; stored on each generated object so
/// that the pair can be regenerated.
struct PairParams {
    std::uint64_t seed = 1;
    std::size_t n_blobs = 512;
    std::size_t dim = 32;
    Vec3 patch_center = Vec3::UnitX();
    double patch_radius = kPi / 3.0;
    int group_id = 0;
    /// Exponent p of the visibility ramp w(t) = max(0, t)^p.
    double visibility_exponent = 1.0;
};

struct SynthObject {
    std::vector<Blob> blobs;
    int class_id = 0;
    int group_id = 0;
    PairParams generation;

    [[nodiscard]] std::size_t dim() const { return blobs.empty() ? 0 : static_cast<std::size_t>(blobs.front().descriptor.size()); }
};

inline void validate(const SynthObject& obj) {
    if (obj.blobs.empty()) {
        throw std::invalid_argument("SynthObject: at least one blob is required");
    }
    const auto d = obj.blobs.front().descriptor.size();
    if (d == 0 || d % 2 != 0) {
        throw std::invalid_argument("SynthObject: descriptor dimension must be even and positive");
    }
    for (const auto& b : obj.blobs) {
        if (b.descriptor.size() != d) {
            throw std::invalid_argument("SynthObject: all blobs must share the descriptor dimension");
        }
        if (std::abs(b.position.norm() - 1.0) > 1e-9) {
            throw std::invalid_argument("SynthObject: blob positions must be unit vectors");
        }
    }
}

inline double visibility_weight(double t, double exponent = 1.0) {
    if (!(t > 0.0)) {
        return 0.0;
    }
    return exponent == 1.0 ? t : exponent == 2.0 ? t * t : std::pow(t, exponent);
}

/// Rotates each consecutive component pair of z by `angle`.
inline ViewEmbedding apply_roll(const ViewEmbedding& z, double angle) {
    const double c = std::cos(angle);
    const double s = std::sin(angle);
    ViewEmbedding out(z.size());
    for (Eigen::Index i = 0; i + 1 < z.size(); i += 2) {
        out[i] = c * z[i] - s * z[i + 1];
        out[i + 1] = s * z[i] + c * z[i + 1];
    }
    return out;
}

/// Noise-free embedding before the roll mixing: sum of visible descriptors.
inline ViewEmbedding visible_sum(const SynthObject& obj, const Vec3& view_dir) {
    ViewEmbedding s = ViewEmbedding::Zero(static_cast<Eigen::Index>(obj.dim()));
    const double p = obj.generation.visibility_exponent;
    for (const auto& b : obj.blobs) {
        const double w = visibility_weight(view_dir.dot(b.position), p);
        if (w > 0.0) {
            s.noalias() += w * b.descriptor;
        }
    }
    return s;
}

inline ViewEmbedding render_embedding(const SynthObject& obj, const Rotation& r, double noise_sigma = 0.0,
                                      std::uint64_t noise_seed = 0) {
    if (noise_sigma < 0.0) {
        throw std::invalid_argument("render_embedding: noise_sigma must be >= 0");
    }
    ViewEmbedding z = apply_roll(visible_sum(obj, r.view_direction()), roll_angle(r));
    if (noise_sigma > 0.0) {
        Rng rng(noise_seed);
        std::normal_distribution<double> normal(0.0, noise_sigma);
        for (Eigen::Index i = 0; i < z.size(); ++i) {
            z[i] += normal(rng);
        }
    }
    return z;
}

/// Mean noise-free embedding norm over a set of rotations; the scale that
/// relative noise levels refer to.
inline double mean_embedding_norm(const SynthObject& obj, const std::vector<Rotation>& rotations) {
    if (rotations.empty()) {
        throw std::invalid_argument("mean_embedding_norm: no rotations");
    }
    double sum = 0.0;
    for (const auto& r : rotations) {
        sum += render_embedding(obj, r).norm();
    }
    return sum / static_cast<double>(rotations.size());
}

/// Two objects identical everywhere except for the blobs inside a spherical cap.
struct TwinPair {
    SynthObject a;
    SynthObject b;
    std::vector<bool> differs; ///< per blob: descriptors of a and b differ

    [[nodiscard]] std::size_t n_differing() const {
        std::size_t n = 0;
        for (const bool d : differs) {
            n += d ? 1 : 0;
        }
        return n;
    }
};

inline std::vector<bool> differing_blobs(const SynthObject& a, const SynthObject& b) {
    if (a.blobs.size() != b.blobs.size()) {
        throw std::invalid_argument("differing_blobs: objects must have the same blob count");
    }
    std::vector<bool> out(a.blobs.size());
    for (std::size_t m = 0; m < a.blobs.size(); ++m) {
        out[m] = a.blobs[m].position != b.blobs[m].position || a.blobs[m].descriptor != b.blobs[m].descriptor;
    }
    return out;
}

inline TwinPair make_twin(SynthObject a, SynthObject b) {
    TwinPair pair;
    pair.differs = differing_blobs(a, b);
    pair.a = std::move(a);
    pair.b = std::move(b);
    return pair;
}

namespace detail {

inline Vec3 random_unit_vector(Rng& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    for (;;) {
        Vec3 v(normal(rng), normal(rng), normal(rng));
        const double n = v.norm();
        if (n > 1e-12) {
            return v / n;
        }
    }
}

inline Eigen::VectorXd random_descriptor(Rng& rng, std::size_t dim) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::VectorXd d(static_cast<Eigen::Index>(dim));
    for (Eigen::Index i = 0; i < d.size(); ++i) {
        d[i] = normal(rng);
    }
    return d;
}

} // namespace detail

/// Object A gets class 0, object B class 1, both in params.group_id. B's
/// descriptors are redrawn for every blob within patch_radius of the patch
/// center. Placement is redrawn until at least one blob lands in the patch.
inline TwinPair make_ambiguous_pair(const PairParams& params) {
    if (!(params.patch_radius > 0.0 && params.patch_radius < kPi / 2.0)) {
        throw std::invalid_argument("make_ambiguous_pair: patch_radius must lie in (0, pi/2)");
    }
    if (params.n_blobs < 4) {
        throw std::invalid_argument("make_ambiguous_pair: n_blobs must be >= 4");
    }
    if (params.dim == 0 || params.dim % 2 != 0) {
        throw std::invalid_argument("make_ambiguous_pair: descriptor dimension must be even and positive");
    }
    if (!(params.visibility_exponent > 0.0)) {
        throw std::invalid_argument("make_ambiguous_pair: visibility_exponent must be > 0");
    }
    if (!(params.patch_center.norm() > 0.0)) {
        throw std::invalid_argument("make_ambiguous_pair: patch_center must be nonzero");
    }
    PairParams p = params;
    p.patch_center = params.patch_center.normalized();

    constexpr std::uint64_t kMaxPlacements = 100000;
    std::vector<Vec3> positions(p.n_blobs);
    std::vector<bool> inside(p.n_blobs);
    bool placed = false;
    for (std::uint64_t attempt = 0; attempt < kMaxPlacements && !placed; ++attempt) {
        Rng rng = make_rng(p.seed, "blob_positions", attempt);
        for (std::size_t m = 0; m < p.n_blobs; ++m) {
            positions[m] = detail::random_unit_vector(rng);
            inside[m] = angle_between(positions[m], p.patch_center) <= p.patch_radius;
            placed = placed || inside[m];
        }
    }
    if (!placed) {
        throw std::runtime_error("make_ambiguous_pair: could not place a blob inside the patch");
    }

    SynthObject a;
    a.class_id = 0;
    a.group_id = p.group_id;
    a.generation = p;
    Rng desc_rng = make_rng(p.seed, "descriptors_a");
    for (std::size_t m = 0; m < p.n_blobs; ++m) {
        a.blobs.push_back({positions[m], detail::random_descriptor(desc_rng, p.dim)});
    }

    SynthObject b = a;
    b.class_id = 1;
    Rng patch_rng = make_rng(p.seed, "descriptors_b");
    for (std::size_t m = 0; m < p.n_blobs; ++m) {
        if (inside[m]) {
            b.blobs[m].descriptor = detail::random_descriptor(patch_rng, p.dim);
        }
    }
    return make_twin(std::move(a), std::move(b));
}

inline TwinPair make_ambiguous_pair(std::uint64_t seed, std::size_t n_blobs, std::size_t dim, const Vec3& patch_center,
                                    double patch_radius) {
    PairParams p;
    p.seed = seed;
    p.n_blobs = n_blobs;
    p.dim = dim;
    p.patch_center = patch_center;
    p.patch_radius = patch_radius;
    return make_ambiguous_pair(p);
}

/// True iff some blob whose descriptors differ between the twins has positive visibility weight.
inline bool patch_visible(const TwinPair& pair, const Rotation& r) {
    const Vec3 v = r.view_direction();
    for (std::size_t m = 0; m < pair.differs.size(); ++m) {
        if (pair.differs[m] && visibility_weight(v.dot(pair.a.blobs[m].position), pair.a.generation.visibility_exponent) > 0.0) {
            return true;
        }
    }
    return false;
}

// JSON

inline nlohmann::json to_json_value(const PairParams& p) {
    return {{"seed", p.seed},
            {"n_blobs", p.n_blobs},
            {"dim", p.dim},
            {"patch_center", {p.patch_center.x(), p.patch_center.y(), p.patch_center.z()}},
            {"patch_radius", p.patch_radius},
            {"group_id", p.group_id},
            {"visibility_exponent", p.visibility_exponent}};
}

inline PairParams pair_params_from_json(const nlohmann::json& j) {
    PairParams p;
    p.seed = j.at("seed").get<std::uint64_t>();
    p.n_blobs = j.at("n_blobs").get<std::size_t>();
    p.dim = j.at("dim").get<std::size_t>();
    const auto& c = j.at("patch_center");
    p.patch_center = Vec3(c.at(0).get<double>(), c.at(1).get<double>(), c.at(2).get<double>());
    p.patch_radius = j.at("patch_radius").get<double>();
    p.group_id = j.at("group_id").get<int>();
    p.visibility_exponent = j.at("visibility_exponent").get<double>();
    return p;
}

inline nlohmann::json to_json_value(const SynthObject& obj) {
    nlohmann::json blobs = nlohmann::json::array();
    for (const auto& b : obj.blobs) {
        blobs.push_back({{"position", {b.position.x(), b.position.y(), b.position.z()}},
                         {"descriptor", std::vector<double>(b.descriptor.data(), b.descriptor.data() + b.descriptor.size())}});
    }
    return {{"class_id", obj.class_id}, {"group_id", obj.group_id}, {"generation", to_json_value(obj.generation)}, {"blobs", blobs}};
}

inline SynthObject synth_object_from_json(const nlohmann::json& j) {
    SynthObject obj;
    obj.class_id = j.at("class_id").get<int>();
    obj.group_id = j.at("group_id").get<int>();
    obj.generation = pair_params_from_json(j.at("generation"));
    for (const auto& jb : j.at("blobs")) {
        Blob b;
        const auto& p = jb.at("position");
        b.position = Vec3(p.at(0).get<double>(), p.at(1).get<double>(), p.at(2).get<double>());
        const auto d = jb.at("descriptor").get<std::vector<double>>();
        b.descriptor = Eigen::Map<const Eigen::VectorXd>(d.data(), static_cast<Eigen::Index>(d.size()));
        obj.blobs.push_back(std::move(b));
    }
    validate(obj);
    return obj;
}

} // namespace ambiview
