#pragma once

// Alternative view-similarity metrics and the harness that correlates them
// with the embedding cosine similarity on matched view pairs.

#include "ambiview/ambiguity.hpp"
#include "ambiview/codebook.hpp"
#include "ambiview/io.hpp"
#include "ambiview/parallel.hpp"
#include "ambiview/random.hpp"
#include "ambiview/synthworld.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace ambiview {

/// Negated mean squared difference of raw (unnormalized) embeddings.
inline double mse_similarity(const ViewEmbedding& a, const ViewEmbedding& b) {
    if (a.size() != b.size() || a.size() == 0) {
        throw std::invalid_argument("mse_similarity: dimension mismatch");
    }
    return -(a - b).squaredNorm() / static_cast<double>(a.size());
}

/// Fraction of blobs visible in either view that are visible in both and
/// carry matching descriptors. Blobs correspond by index. Returns 0 when no
/// blob is visible in either view.
inline double blob_match_similarity(const SynthObject& a, const Rotation& ra, const SynthObject& b, const Rotation& rb,
                                    double tau = 1e-6) {
    if (a.blobs.size() != b.blobs.size() || a.dim() != b.dim()) {
        throw std::invalid_argument("blob_match_similarity: objects must share blob count and descriptor dimension");
    }
    const Vec3 va = ra.view_direction();
    const Vec3 vb = rb.view_direction();
    const double pa = a.generation.visibility_exponent;
    const double pb = b.generation.visibility_exponent;
    std::size_t matched = 0;
    std::size_t either = 0;
    for (std::size_t m = 0; m < a.blobs.size(); ++m) {
        const bool vis_a = visibility_weight(va.dot(a.blobs[m].position), pa) > 0.0;
        const bool vis_b = visibility_weight(vb.dot(b.blobs[m].position), pb) > 0.0;
        if (vis_a || vis_b) {
            ++either;
            if (vis_a && vis_b && (a.blobs[m].descriptor - b.blobs[m].descriptor).norm() < tau) {
                ++matched;
            }
        }
    }
    return either == 0 ? 0.0 : static_cast<double>(matched) / static_cast<double>(either);
}

/// Fixed random ReLU feature map, a stand-in for a generic pretrained
/// feature extractor: f(z) = max(0, W z) with Gaussian W.
class RandomFeatures {
public:
    RandomFeatures(std::size_t in_dim, std::size_t out_dim, std::uint64_t seed) : w_(out_dim, in_dim) {
        Rng rng = make_rng(seed, "random_features");
        std::normal_distribution<double> normal(0.0, 1.0);
        for (Eigen::Index i = 0; i < w_.rows(); ++i) {
            for (Eigen::Index j = 0; j < w_.cols(); ++j) {
                w_(i, j) = normal(rng);
            }
        }
    }

    [[nodiscard]] Eigen::VectorXd features(const ViewEmbedding& z) const { return (w_ * z).cwiseMax(0.0); }

    /// Cosine similarity of the feature vectors; 0 when either is all zero.
    [[nodiscard]] double similarity(const ViewEmbedding& a, const ViewEmbedding& b) const {
        const Eigen::VectorXd fa = features(a);
        const Eigen::VectorXd fb = features(b);
        const double n = fa.norm() * fb.norm();
        return n > 0.0 ? std::clamp(fa.dot(fb) / n, -1.0, 1.0) : 0.0;
    }

private:
    Eigen::MatrixXd w_;
};

// Correlations

/// Ranks starting at 1; tied values share the average of their ranks.
inline std::vector<double> average_ranks(const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> ranks(v.size());
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i;
        while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) {
            ++j;
        }
        const double r = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) {
            ranks[idx[k]] = r;
        }
        i = j + 1;
    }
    return ranks;
}

/// Pearson correlation; 0 when either series is constant.
inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.empty()) {
        throw std::invalid_argument("pearson: series must be nonempty and of equal length");
    }
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (!(sxx > 0.0) || !(syy > 0.0)) {
        return 0.0;
    }
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

/// Spearman correlation with average ranks for ties; 0 when either series is constant.
inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
    return pearson(average_ranks(x), average_ranks(y));
}

/// Affine map of the series onto [0, 1]; a constant series maps to zeros.
inline std::vector<double> min_max_scale(const std::vector<double>& v) {
    if (v.empty()) {
        return {};
    }
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    const double range = *hi - *lo;
    std::vector<double> out(v.size(), 0.0);
    if (range > 0.0) {
        for (std::size_t i = 0; i < v.size(); ++i) {
            out[i] = (v[i] - *lo) / range;
        }
    }
    return out;
}

// Metric comparison

/// A similarity between view r_a of one object and view r_b of another.
struct NamedMetric {
    std::string name;
    std::function<double(const SynthObject&, const Rotation&, const SynthObject&, const Rotation&)> fn;
};

inline NamedMetric primary_metric() {
    return {"primary", [](const SynthObject& a, const Rotation& ra, const SynthObject& b, const Rotation& rb) {
                return cossim(render_embedding(a, ra), render_embedding(b, rb));
            }};
}

inline NamedMetric mse_metric() {
    return {"mse", [](const SynthObject& a, const Rotation& ra, const SynthObject& b, const Rotation& rb) {
                return mse_similarity(render_embedding(a, ra), render_embedding(b, rb));
            }};
}

inline NamedMetric blob_match_metric(double tau = 1e-6) {
    return {"blob_match", [tau](const SynthObject& a, const Rotation& ra, const SynthObject& b, const Rotation& rb) {
                return blob_match_similarity(a, ra, b, rb, tau);
            }};
}

inline NamedMetric random_features_metric(std::size_t in_dim, std::size_t out_dim, std::uint64_t seed) {
    auto rf = std::make_shared<RandomFeatures>(in_dim, out_dim, seed);
    return {"random_features", [rf](const SynthObject& a, const Rotation& ra, const SynthObject& b, const Rotation& rb) {
                return rf->similarity(render_embedding(a, ra), render_embedding(b, rb));
            }};
}

struct MetricReport {
    std::vector<double> primary;            ///< table similarity, in table (descending) order
    std::vector<std::string> names;
    std::vector<std::vector<double>> values; ///< values[m][i] for metric m on pair i
    std::vector<double> spearman;
    std::vector<double> pearson;
};

/// Evaluates every metric on every matched pair of the table, in table order.
/// `objects` is indexed by class id.
inline MetricReport metric_comparison(const AmbiguityTable& table, const std::vector<const SynthObject*>& objects,
                                      const std::vector<NamedMetric>& metrics) {
    if (table.empty()) {
        throw std::invalid_argument("metric_comparison: empty table");
    }
    auto object = [&](int class_id) -> const SynthObject& {
        if (class_id < 0 || static_cast<std::size_t>(class_id) >= objects.size()) {
            throw std::invalid_argument("metric_comparison: no object for class " + std::to_string(class_id));
        }
        return *objects[static_cast<std::size_t>(class_id)];
    };
    MetricReport report;
    for (const auto& p : table.pairs) {
        report.primary.push_back(p.similarity);
    }
    const SynthObject& a = object(table.object_class);
    for (const auto& m : metrics) {
        std::vector<double> vals(table.size());
        parallel_for(table.size(), [&](std::size_t i) {
            const auto& p = table.pairs[i];
            vals[i] = m.fn(a, p.r_a, object(p.matched_class), p.r_b);
        });
        report.names.push_back(m.name);
        report.spearman.push_back(spearman(vals, report.primary));
        report.pearson.push_back(pearson(vals, report.primary));
        report.values.push_back(std::move(vals));
    }
    return report;
}

/// Columns: pair_index, then one min-max scaled column per metric. Rows
/// follow the table's similarity order.
inline std::string metric_values_csv(const MetricReport& r) {
    std::vector<std::string> header{"pair_index"};
    std::vector<std::vector<double>> scaled;
    for (std::size_t m = 0; m < r.names.size(); ++m) {
        header.push_back(r.names[m]);
        scaled.push_back(min_max_scale(r.values[m]));
    }
    CsvWriter csv(header);
    for (std::size_t i = 0; i < r.primary.size(); ++i) {
        std::vector<std::string> row{std::to_string(i)};
        for (const auto& s : scaled) {
            row.push_back(format_double(s[i]));
        }
        csv.row_strings(row);
    }
    return csv.str();
}

/// Columns: metric, spearman, pearson.
inline std::string correlation_csv(const MetricReport& r) {
    CsvWriter csv({"metric", "spearman", "pearson"});
    for (std::size_t m = 0; m < r.names.size(); ++m) {
        csv.row_strings({r.names[m], format_double(r.spearman[m]), format_double(r.pearson[m])});
    }
    return csv.str();
}

struct NoiseRobustnessRow {
    double sigma = 0.0;
    double spearman = 0.0;
};

/// For each sigma, recomputes every pair's similarity from noisy renderings
/// of both views and rank-correlates it with the noise-free similarities.
/// Pair i uses the same noise seeds at every sigma.
inline std::vector<NoiseRobustnessRow> noise_robustness_sweep(const AmbiguityTable& table,
                                                              const std::vector<const SynthObject*>& objects,
                                                              const std::vector<double>& sigmas, std::uint64_t seed) {
    if (sigmas.empty()) {
        throw std::invalid_argument("noise_robustness_sweep: no sigmas");
    }
    if (table.empty()) {
        throw std::invalid_argument("noise_robustness_sweep: empty table");
    }
    std::vector<double> clean;
    for (const auto& p : table.pairs) {
        clean.push_back(p.similarity);
    }
    const SynthObject& a = *objects.at(static_cast<std::size_t>(table.object_class));
    std::vector<NoiseRobustnessRow> out;
    for (double sigma : sigmas) {
        if (!(sigma >= 0.0)) {
            throw std::invalid_argument("noise_robustness_sweep: sigma must be >= 0");
        }
        std::vector<double> noisy(table.size());
        parallel_for(table.size(), [&](std::size_t i) {
            const auto& p = table.pairs[i];
            const SynthObject& b = *objects.at(static_cast<std::size_t>(p.matched_class));
            const auto za = render_embedding(a, p.r_a, sigma, derive_seed(seed, "noise_a", i));
            const auto zb = render_embedding(b, p.r_b, sigma, derive_seed(seed, "noise_b", i));
            noisy[i] = cossim(za, zb);
        });
        out.push_back({sigma, spearman(noisy, clean)});
    }
    return out;
}

inline std::string noise_robustness_csv(const std::vector<NoiseRobustnessRow>& rows) {
    CsvWriter csv({"sigma", "spearman"});
    for (const auto& r : rows) {
        csv.row_strings({format_double(r.sigma), format_double(r.spearman)});
    }
    return csv.str();
}

} // namespace ambiview
