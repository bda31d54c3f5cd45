#pragma once

// Per-object embedding codebooks and nearest-entry queries.

#include "ambiview/io.hpp"
#include "ambiview/parallel.hpp"
#include "ambiview/so3.hpp"
#include "ambiview/synthworld.hpp"

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <vector>

namespace ambiview {

/// Cosine similarity clamped to [-1, 1], computed as the dot product of the
/// normalized inputs so it agrees bit for bit with codebook and table scores.
/// Zero-norm input is a contract violation and throws instead of returning NaN.
inline double cossim(const ViewEmbedding& a, const ViewEmbedding& b) {
    if (a.size() != b.size()) {
        throw std::invalid_argument("cossim: dimension mismatch");
    }
    const double na = a.norm();
    const double nb = b.norm();
    if (!(na > 0.0) || !(nb > 0.0)) {
        throw std::invalid_argument("cossim: zero-norm embedding");
    }
    const ViewEmbedding ua = a / na;
    const ViewEmbedding ub = b / nb;
    return std::clamp(ua.dot(ub), -1.0, 1.0);
}

inline ViewEmbedding normalized_embedding(const ViewEmbedding& z) {
    const double n = z.norm();
    if (!(n > 0.0)) {
        throw std::invalid_argument("zero-norm embedding cannot be normalized");
    }
    return z / n;
}

struct PoseHypothesis {
    int class_id = 0;
    int group_id = 0;
    Rotation rotation;
    double score = -1.0;
    std::size_t entry = 0; ///< codebook index of the match
};

class Codebook {
public:
    Codebook() = default;

    Codebook(std::vector<Rotation> rotations, Eigen::MatrixXd unit_embeddings, int class_id, int group_id,
             std::size_t n_dirs, std::size_t n_inplane)
        : rotations_(std::move(rotations)), embeddings_(std::move(unit_embeddings)), class_id_(class_id),
          group_id_(group_id), n_dirs_(n_dirs), n_inplane_(n_inplane) {
        if (static_cast<Eigen::Index>(rotations_.size()) != embeddings_.cols()) {
            throw std::invalid_argument("Codebook: rotation and embedding counts differ");
        }
        for (Eigen::Index k = 0; k < embeddings_.cols(); ++k) {
            if (std::abs(embeddings_.col(k).norm() - 1.0) > 1e-9) {
                throw std::invalid_argument("Codebook: embeddings must be unit-norm");
            }
        }
    }

    [[nodiscard]] std::size_t size() const { return rotations_.size(); }
    [[nodiscard]] bool empty() const { return rotations_.empty(); }
    [[nodiscard]] std::size_t dim() const { return static_cast<std::size_t>(embeddings_.rows()); }
    [[nodiscard]] const Rotation& rotation(std::size_t k) const { return rotations_[k]; }
    [[nodiscard]] const std::vector<Rotation>& rotations() const { return rotations_; }
    [[nodiscard]] auto embedding(std::size_t k) const { return embeddings_.col(static_cast<Eigen::Index>(k)); }
    [[nodiscard]] const Eigen::MatrixXd& embeddings() const { return embeddings_; }
    [[nodiscard]] int class_id() const { return class_id_; }
    [[nodiscard]] int group_id() const { return group_id_; }
    [[nodiscard]] std::size_t n_dirs() const { return n_dirs_; }
    [[nodiscard]] std::size_t n_inplane() const { return n_inplane_; }

private:
    std::vector<Rotation> rotations_;
    Eigen::MatrixXd embeddings_; // dim x size, unit columns
    int class_id_ = 0;
    int group_id_ = 0;
    std::size_t n_dirs_ = 0;
    std::size_t n_inplane_ = 0;
};

inline Codebook build_codebook(const SynthObject& obj, const ViewGrid& grid) {
    if (grid.rotations.empty()) {
        throw std::invalid_argument("build_codebook: empty grid");
    }
    Eigen::MatrixXd emb(static_cast<Eigen::Index>(obj.dim()), static_cast<Eigen::Index>(grid.size()));
    parallel_for(grid.size(), [&](std::size_t k) {
        emb.col(static_cast<Eigen::Index>(k)) = normalized_embedding(render_embedding(obj, grid.rotations[k]));
    });
    return {grid.rotations, std::move(emb), obj.class_id, obj.group_id, grid.n_dirs, grid.n_inplane};
}

/// Scores of every codebook entry against a query, as used by all queries:
/// dot(entry_k, z / |z|), clamped to [-1, 1].
inline double entry_score(const Codebook& cb, std::size_t k, const ViewEmbedding& unit_query) {
    return std::clamp(cb.embedding(k).dot(unit_query), -1.0, 1.0);
}

namespace detail {

struct ScoredEntry {
    double score = -std::numeric_limits<double>::infinity();
    std::size_t index = 0;
};

// Exhaustive scan; strict '>' keeps the lowest index on ties. Serial on
// purpose: callers parallelize over queries.
inline ScoredEntry best_entry(const Codebook& cb, const ViewEmbedding& unit_query) {
    ScoredEntry best;
    for (std::size_t k = 0; k < cb.size(); ++k) {
        const double s = entry_score(cb, k, unit_query);
        if (s > best.score) {
            best = {s, k};
        }
    }
    return best;
}

} // namespace detail

/// Entry maximizing cosine similarity with z; ties go to the lowest index.
inline PoseHypothesis estimate_pose(const Codebook& cb, const ViewEmbedding& z) {
    if (cb.empty()) {
        throw std::invalid_argument("estimate_pose: empty codebook");
    }
    if (static_cast<std::size_t>(z.size()) != cb.dim()) {
        throw std::invalid_argument("estimate_pose: query dimension does not match codebook");
    }
    const auto best = detail::best_entry(cb, normalized_embedding(z));
    return {cb.class_id(), cb.group_id(), cb.rotation(best.index), best.score, best.index};
}

/// Top-k entries of each in-group codebook, merged and sorted by score
/// (descending; ties keep codebook order, then entry order).
inline std::vector<PoseHypothesis> hypotheses_for_group(const std::vector<const Codebook*>& codebooks,
                                                        const ViewEmbedding& z, std::size_t k = 1) {
    if (codebooks.empty()) {
        throw std::invalid_argument("hypotheses_for_group: no codebooks");
    }
    if (k == 0) {
        throw std::invalid_argument("hypotheses_for_group: k must be >= 1");
    }
    const ViewEmbedding q = normalized_embedding(z);
    std::vector<PoseHypothesis> out;
    for (const Codebook* cb : codebooks) {
        if (k == 1) {
            auto best = detail::best_entry(*cb, q);
            out.push_back({cb->class_id(), cb->group_id(), cb->rotation(best.index), best.score, best.index});
            continue;
        }
        std::vector<detail::ScoredEntry> scored(cb->size());
        for (std::size_t i = 0; i < cb->size(); ++i) {
            scored[i] = {entry_score(*cb, i, q), i};
        }
        const std::size_t take = std::min(k, scored.size());
        std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(take), scored.end(),
                          [](const auto& a, const auto& b) { return a.score > b.score || (a.score == b.score && a.index < b.index); });
        for (std::size_t i = 0; i < take; ++i) {
            out.push_back({cb->class_id(), cb->group_id(), cb->rotation(scored[i].index), scored[i].score, scored[i].index});
        }
    }
    std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.score > b.score; });
    return out;
}

inline std::vector<PoseHypothesis> hypotheses_for_group(const std::vector<Codebook>& codebooks, const ViewEmbedding& z,
                                                        std::size_t k = 1) {
    std::vector<const Codebook*> ptrs;
    for (const auto& cb : codebooks) {
        ptrs.push_back(&cb);
    }
    return hypotheses_for_group(ptrs, z, k);
}

/// Group of the codebook holding the globally best entry; ties go to the lowest group id.
inline int identify_group(const std::vector<Codebook>& codebooks, const ViewEmbedding& z) {
    if (codebooks.empty()) {
        throw std::invalid_argument("identify_group: no codebooks");
    }
    const ViewEmbedding q = normalized_embedding(z);
    double best_score = -std::numeric_limits<double>::infinity();
    int best_group = codebooks.front().group_id();
    for (const auto& cb : codebooks) {
        const double s = detail::best_entry(cb, q).score;
        if (s > best_score || (s == best_score && cb.group_id() < best_group)) {
            best_score = s;
            best_group = cb.group_id();
        }
    }
    return best_group;
}

// JSON persistence

inline nlohmann::json to_json_value(const Codebook& cb) {
    nlohmann::json entries = nlohmann::json::array();
    for (std::size_t k = 0; k < cb.size(); ++k) {
        const auto col = cb.embedding(k);
        entries.push_back({{"rotation", rotation_to_json(cb.rotation(k))},
                           {"embedding", std::vector<double>(col.data(), col.data() + col.size())}});
    }
    return {{"class_id", cb.class_id()},
            {"group_id", cb.group_id()},
            {"grid", {{"n_dirs", cb.n_dirs()}, {"n_inplane", cb.n_inplane()}}},
            {"entries", entries}};
}

inline Codebook codebook_from_json(const nlohmann::json& j) {
    const auto& entries = j.at("entries");
    std::vector<Rotation> rotations;
    Eigen::MatrixXd emb;
    for (std::size_t k = 0; k < entries.size(); ++k) {
        rotations.push_back(rotation_from_json(entries[k].at("rotation")));
        const auto e = entries[k].at("embedding").get<std::vector<double>>();
        if (k == 0) {
            emb.resize(static_cast<Eigen::Index>(e.size()), static_cast<Eigen::Index>(entries.size()));
        }
        if (static_cast<Eigen::Index>(e.size()) != emb.rows()) {
            throw std::invalid_argument("codebook: inconsistent embedding dimension");
        }
        emb.col(static_cast<Eigen::Index>(k)) = Eigen::Map<const Eigen::VectorXd>(e.data(), emb.rows());
    }
    return {std::move(rotations), std::move(emb), j.at("class_id").get<int>(), j.at("group_id").get<int>(),
            j.at("grid").at("n_dirs").get<std::size_t>(), j.at("grid").at("n_inplane").get<std::size_t>()};
}

} // namespace ambiview
