#pragma once

// In-group classification on ambiguity-filtered views: a nearest-centroid
// classifier and the training-threshold sweep.

#include "ambiview/ambiguity.hpp"
#include "ambiview/codebook.hpp"
#include "ambiview/io.hpp"
#include "ambiview/parallel.hpp"
#include "ambiview/random.hpp"
#include "ambiview/synthworld.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace ambiview {

/// Thrown when some class has no training view below the threshold.
class EmptyTrainingSet : public std::runtime_error {
public:
    EmptyTrainingSet(int class_id, double threshold)
        : std::runtime_error(fmt::format("no training views for class {} at ambiguity threshold {}", class_id, threshold)),
          class_id_(class_id), threshold_(threshold) {}
    [[nodiscard]] int class_id() const { return class_id_; }
    [[nodiscard]] double threshold() const { return threshold_; }

private:
    int class_id_;
    double threshold_;
};

struct CentroidClassifier {
    std::vector<int> class_ids;
    std::vector<ViewEmbedding> centroids; ///< unit norm, parallel to class_ids
    double threshold = 1.0;
    double noise_sigma = 0.0;
};

struct Prediction {
    int class_id = 0;
    double margin = 0.0; ///< best minus second-best cosine similarity
};

/// Views of one class used for training or evaluation.
struct ClassViews {
    const SynthObject* object = nullptr;
    std::vector<Rotation> rotations;
};

struct TrainOptions {
    double threshold = 1.0; ///< recorded in the classifier and in error messages
    std::size_t samples_per_rotation = 1;
    double noise_sigma = 0.0;
    std::uint64_t seed = 0;
};

/// Default noise level: `relative` times the mean noise-free embedding norm
/// over the given objects and rotations.
inline double default_noise_sigma(const std::vector<const SynthObject*>& objects, const std::vector<Rotation>& rotations,
                                  double relative = 0.1) {
    if (objects.empty()) {
        throw std::invalid_argument("default_noise_sigma: no objects");
    }
    double sum = 0.0;
    for (const auto* obj : objects) {
        sum += mean_embedding_norm(*obj, rotations);
    }
    return relative * sum / static_cast<double>(objects.size());
}

/// Centroid of each class: normalized mean of its noisy training embeddings.
inline CentroidClassifier train(const std::vector<ClassViews>& classes, const TrainOptions& opts) {
    if (classes.empty()) {
        throw std::invalid_argument("train: no classes");
    }
    if (opts.samples_per_rotation == 0) {
        throw std::invalid_argument("train: samples_per_rotation must be >= 1");
    }
    CentroidClassifier clf;
    clf.threshold = opts.threshold;
    clf.noise_sigma = opts.noise_sigma;
    for (std::size_t k = 0; k < classes.size(); ++k) {
        const auto& cv = classes[k];
        if (cv.object == nullptr) {
            throw std::invalid_argument("train: missing object");
        }
        if (cv.rotations.empty()) {
            throw EmptyTrainingSet(cv.object->class_id, opts.threshold);
        }
        const std::uint64_t class_seed = derive_seed(opts.seed, "train_noise", k);
        ViewEmbedding sum = ViewEmbedding::Zero(static_cast<Eigen::Index>(cv.object->dim()));
        for (std::size_t i = 0; i < cv.rotations.size(); ++i) {
            for (std::size_t j = 0; j < opts.samples_per_rotation; ++j) {
                const auto noise_seed = derive_seed(class_seed, "sample", i * opts.samples_per_rotation + j);
                sum += render_embedding(*cv.object, cv.rotations[i], opts.noise_sigma, noise_seed);
            }
        }
        clf.class_ids.push_back(cv.object->class_id);
        clf.centroids.push_back(normalized_embedding(sum));
    }
    return clf;
}

/// Nearest centroid by cosine similarity; ties go to the first class.
inline Prediction predict(const CentroidClassifier& clf, const ViewEmbedding& z) {
    if (clf.centroids.empty()) {
        throw std::invalid_argument("predict: untrained classifier");
    }
    const ViewEmbedding q = normalized_embedding(z);
    double best = -std::numeric_limits<double>::infinity();
    double second = -std::numeric_limits<double>::infinity();
    std::size_t best_k = 0;
    for (std::size_t k = 0; k < clf.centroids.size(); ++k) {
        const double s = std::clamp(clf.centroids[k].dot(q), -1.0, 1.0);
        if (s > best) {
            second = best;
            best = s;
            best_k = k;
        } else if (s > second) {
            second = s;
        }
    }
    // A single class has nothing to compete with; cosine bounds give the margin.
    const double margin = std::isfinite(second) ? best - second : best + 1.0;
    return {clf.class_ids[best_k], margin};
}

struct EvalResult {
    std::size_t correct = 0;
    std::size_t n_samples = 0;
    [[nodiscard]] double accuracy() const {
        return n_samples == 0 ? std::numeric_limits<double>::quiet_NaN()
                              : static_cast<double>(correct) / static_cast<double>(n_samples);
    }
};

/// Classifies one noisy rendering of every listed view. The noise of view i of
/// class k depends only on (seed, k, i), so two classifiers evaluated with the
/// same seed see the same samples.
inline EvalResult evaluate(const CentroidClassifier& clf, const std::vector<ClassViews>& classes, double noise_sigma,
                           std::uint64_t seed) {
    EvalResult r;
    for (std::size_t k = 0; k < classes.size(); ++k) {
        const auto& cv = classes[k];
        const std::uint64_t class_seed = derive_seed(seed, "eval_noise", k);
        for (std::size_t i = 0; i < cv.rotations.size(); ++i) {
            const auto z = render_embedding(*cv.object, cv.rotations[i], noise_sigma, derive_seed(class_seed, "sample", i));
            r.correct += predict(clf, z).class_id == cv.object->class_id ? 1U : 0U;
            ++r.n_samples;
        }
    }
    return r;
}

// Threshold sweep

enum class SweepStatus { ok, empty_train, empty_eval };

inline const char* to_string(SweepStatus s) {
    switch (s) {
    case SweepStatus::ok:
        return "ok";
    case SweepStatus::empty_train:
        return "empty_train";
    case SweepStatus::empty_eval:
        return "empty_eval";
    }
    return "?";
}

struct SweepRow {
    double train_threshold = 0.0;
    double eval_cap = 0.0;
    double accuracy = std::numeric_limits<double>::quiet_NaN(); ///< mean over trials; NaN unless ok
    std::size_t n_samples = 0;                                  ///< evaluated samples summed over trials
    SweepStatus status = SweepStatus::ok;
};

struct SweepResult {
    std::vector<SweepRow> rows; ///< threshold-major, caps in input order
};

struct SweepOptions {
    std::size_t trials = 10;
    std::size_t samples_per_rotation = 1;
    double noise_sigma = 0.0;
    std::uint64_t seed = 0;
};

/// Views of a table whose ambiguity is at most `cap`; a cap of 1 keeps all.
inline std::vector<Rotation> views_up_to(const AmbiguityTable& table, double cap) {
    std::vector<Rotation> out;
    for (std::size_t i = 0; i < table.size(); ++i) {
        if (table.ambiguity[i] <= cap) {
            out.push_back(table.pairs[i].r_a);
        }
    }
    return out;
}

/// For each training threshold a, trains on views with ambiguity < a and
/// evaluates on fresh noisy views with ambiguity <= cap. Evaluation noise is
/// shared across thresholds within a trial.
inline SweepResult threshold_sweep(const std::vector<const SynthObject*>& objects,
                                   const std::vector<const AmbiguityTable*>& tables, const std::vector<double>& thresholds,
                                   const std::vector<double>& caps, const SweepOptions& opts) {
    if (objects.empty() || objects.size() != tables.size()) {
        throw std::invalid_argument("threshold_sweep: one table per object is required");
    }
    if (opts.trials == 0) {
        throw std::invalid_argument("threshold_sweep: trials must be >= 1");
    }
    for (double a : thresholds) {
        if (!(a >= 0.0 && a <= 1.0)) {
            throw std::invalid_argument("threshold_sweep: thresholds must lie in [0, 1]");
        }
    }
    for (double c : caps) {
        if (!(c >= 0.0 && c <= 1.0)) {
            throw std::invalid_argument("threshold_sweep: caps must lie in [0, 1]");
        }
    }

    std::vector<std::vector<ClassViews>> eval_sets(caps.size());
    for (std::size_t c = 0; c < caps.size(); ++c) {
        for (std::size_t k = 0; k < objects.size(); ++k) {
            eval_sets[c].push_back({objects[k], views_up_to(*tables[k], caps[c])});
        }
    }
    std::vector<std::vector<ClassViews>> train_sets(thresholds.size());
    for (std::size_t t = 0; t < thresholds.size(); ++t) {
        for (std::size_t k = 0; k < objects.size(); ++k) {
            train_sets[t].push_back({objects[k], split_by_threshold(*tables[k], thresholds[t]).train_rotations});
        }
    }

    // One cell per (threshold, trial); each cell evaluates every cap.
    const std::size_t n_cells = thresholds.size() * opts.trials;
    std::vector<std::vector<EvalResult>> cell_results(n_cells, std::vector<EvalResult>(caps.size()));
    std::vector<char> trained(n_cells, 0);
    parallel_for(n_cells, [&](std::size_t cell) {
        const std::size_t t = cell / opts.trials;
        const std::size_t trial = cell % opts.trials;
        CentroidClassifier clf;
        try {
            clf = train(train_sets[t], {thresholds[t], opts.samples_per_rotation, opts.noise_sigma,
                                        derive_seed(opts.seed, "sweep_train", cell)});
        } catch (const EmptyTrainingSet&) {
            return;
        }
        trained[cell] = 1;
        const std::uint64_t eval_seed = derive_seed(opts.seed, "sweep_eval", trial);
        for (std::size_t c = 0; c < caps.size(); ++c) {
            cell_results[cell][c] = evaluate(clf, eval_sets[c], opts.noise_sigma, eval_seed);
        }
    });

    SweepResult result;
    for (std::size_t t = 0; t < thresholds.size(); ++t) {
        for (std::size_t c = 0; c < caps.size(); ++c) {
            SweepRow row;
            row.train_threshold = thresholds[t];
            row.eval_cap = caps[c];
            if (!trained[t * opts.trials]) {
                row.status = SweepStatus::empty_train;
            } else {
                double acc_sum = 0.0;
                for (std::size_t trial = 0; trial < opts.trials; ++trial) {
                    const auto& er = cell_results[t * opts.trials + trial][c];
                    row.n_samples += er.n_samples;
                    acc_sum += er.accuracy();
                }
                if (row.n_samples == 0) {
                    row.status = SweepStatus::empty_eval;
                } else {
                    row.accuracy = acc_sum / static_cast<double>(opts.trials);
                }
            }
            result.rows.push_back(row);
        }
    }
    return result;
}

/// Columns: train_threshold, eval_cap, accuracy, n_samples, status.
/// Rows that could not be evaluated leave accuracy empty.
inline std::string sweep_csv(const SweepResult& sweep) {
    CsvWriter csv({"train_threshold", "eval_cap", "accuracy", "n_samples", "status"});
    for (const auto& r : sweep.rows) {
        csv.row_strings({format_double(r.train_threshold), format_double(r.eval_cap),
                         r.status == SweepStatus::ok ? format_double(r.accuracy) : std::string(),
                         std::to_string(r.n_samples), to_string(r.status)});
    }
    return csv.str();
}

} // namespace ambiview
