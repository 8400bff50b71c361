#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <cstdint>
#include <functional>
#include <iomanip>
#include <json.hpp>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "hoikit/geom/point_cloud.hpp"
#include "hoikit/geom/voxel.hpp"
#include "hoikit/geom/winding.hpp"
#include "hoikit/hand/kinematics.hpp"
#include "hoikit/hand/labels.hpp"
#include "hoikit/rng.hpp"

namespace hoikit::metrics {

/// Mean per-vertex position error in mm between two meshes of the same
/// topology.
inline double mpvpe(const std::vector<geom::Vec3>& pred, const std::vector<geom::Vec3>& gt) {
    if (pred.size() != gt.size()) throw Error("vertex counts differ");
    if (pred.empty()) throw Error("mpvpe on empty vertex sets");
    double total = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) total += geom::distance(pred[i], gt[i]);
    return total / double(pred.size());
}

/// Maximum depth of hand vertices penetrating the object surface, in cm.
/// Zero when no vertex lies inside.
inline double penetration_depth(const geom::TriMesh& hand, const geom::TriMesh& obj) {
    obj.require_watertight();
    const geom::Aabb box = obj.bounds();
    double deepest = 0.0;
    for (const geom::Vec3& v : hand.vertices) {
        if (!box.contains(v)) continue;
        if (geom::winding_number(obj, v) <= 0.5) continue;
        deepest = std::max(deepest, geom::distance_to_surface(obj, v));
    }
    return deepest / 10.0;
}

/// Volumetric hand-object intersection in cm^3 via solid voxelization of
/// the object.
inline double penetration_volume(const geom::TriMesh& hand, const geom::TriMesh& obj,
                                 double voxel_size,
                                 std::size_t cell_budget = geom::kDefaultVoxelBudget) {
    return geom::voxelize_and_inside_volume(obj, hand, voxel_size, cell_budget);
}

/// Set IoU and F1 over bitmask-coded part sets. Two empty sets agree
/// perfectly; one empty side scores zero.
inline std::pair<double, double> set_iou_f1(std::uint32_t pred, std::uint32_t gt) {
    const int np = __builtin_popcount(pred), ng = __builtin_popcount(gt);
    if (np == 0 && ng == 0) return {1.0, 1.0};
    if (np == 0 || ng == 0) return {0.0, 0.0};
    const int inter = __builtin_popcount(pred & gt);
    if (inter == 0) return {0.0, 0.0};
    const int uni = __builtin_popcount(pred | gt);
    const double iou = double(inter) / double(uni);
    const double precision = double(inter) / double(np);
    const double recall = double(inter) / double(ng);
    return {iou, 2.0 * precision * recall / (precision + recall)};
}

/// IoU/F1 over the 7 contact categories.
inline std::pair<double, double> part_iou_f1(hand::ContactLabel7 pred, hand::ContactLabel7 gt) {
    return set_iou_f1(pred.bits, gt.bits);
}

using Feature = std::vector<double>;

namespace detail {

inline double feature_sq_dist(const Feature& a, const Feature& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

}  // namespace detail

struct KmeansResult {
    std::vector<int> assignments;
    std::vector<Feature> centroids;
};

/// Lloyd's algorithm with seeded k-means++ initialization. Empty clusters
/// are re-seeded from the point farthest from its assigned centroid. All
/// ties resolve to the lowest index, so runs are reproducible.
inline KmeansResult kmeans(const std::vector<Feature>& features, int k, std::uint64_t seed,
                           int max_iter = 100) {
    if (k < 1) throw Error("k must be >= 1");
    if (features.size() < std::size_t(k)) throw Error("fewer samples than clusters");
    const std::size_t n = features.size();
    const std::size_t dim = features[0].size();
    for (const Feature& f : features)
        if (f.size() != dim) throw Error("feature dimensions differ");

    Rng rng = Rng::substream(seed, "k-means");
    std::vector<Feature> centroids;
    centroids.reserve(k);
    centroids.push_back(features[rng.uniform_index(n)]);
    std::vector<double> min_d2(n);
    while (int(centroids.size()) < k) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double best = detail::feature_sq_dist(features[i], centroids[0]);
            for (std::size_t c = 1; c < centroids.size(); ++c)
                best = std::min(best, detail::feature_sq_dist(features[i], centroids[c]));
            min_d2[i] = best;
            total += best;
        }
        std::size_t pick = 0;
        if (total > 0.0) {
            const double u = rng.uniform() * total;
            double cum = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                cum += min_d2[i];
                if (cum > u) { pick = i; break; }
                pick = i;
            }
        } else {
            pick = rng.uniform_index(n);
        }
        centroids.push_back(features[pick]);
    }

    std::vector<int> assignments(n, 0), previous(n, -1);
    for (int iter = 0; iter < max_iter; ++iter) {
        for (std::size_t i = 0; i < n; ++i) {
            int best = 0;
            double best_d2 = detail::feature_sq_dist(features[i], centroids[0]);
            for (int c = 1; c < k; ++c) {
                const double d2 = detail::feature_sq_dist(features[i], centroids[c]);
                if (d2 < best_d2) { best_d2 = d2; best = c; }
            }
            assignments[i] = best;
        }
        std::vector<std::size_t> counts(k, 0);
        for (int a : assignments) ++counts[a];
        for (int c = 0; c < k; ++c) {
            if (counts[c] != 0) continue;
            // re-seed from the farthest point; if every point sits on its
            // centroid there is nothing to gain, leave the cluster empty
            std::size_t far_i = 0;
            double far_d2 = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double d2 = detail::feature_sq_dist(features[i], centroids[assignments[i]]);
                if (d2 > far_d2 && counts[assignments[i]] > 1) { far_d2 = d2; far_i = i; }
            }
            if (far_d2 == 0.0) continue;
            --counts[assignments[far_i]];
            centroids[c] = features[far_i];
            assignments[far_i] = c;
            counts[c] = 1;
        }
        if (assignments == previous) break;
        previous = assignments;
        std::vector<Feature> sums(k, Feature(dim, 0.0));
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t d = 0; d < dim; ++d) sums[assignments[i]][d] += features[i][d];
        for (int c = 0; c < k; ++c)
            if (counts[c] > 0)
                for (std::size_t d = 0; d < dim; ++d) centroids[c][d] = sums[c][d] / double(counts[c]);
    }
    return {std::move(assignments), std::move(centroids)};
}

/// Shannon entropy in nats of the cluster assignment frequencies.
inline double assignment_entropy(const std::vector<int>& assignments, int k) {
    if (assignments.empty()) throw Error("entropy of empty assignment");
    std::vector<std::size_t> counts(k, 0);
    for (int a : assignments) {
        if (a < 0 || a >= k) throw Error("assignment out of range");
        ++counts[a];
    }
    double h = 0.0;
    for (std::size_t c : counts) {
        if (c == 0) continue;
        const double p = double(c) / double(assignments.size());
        h -= p * std::log(p);
    }
    return h;
}

struct Diversity {
    double entropy = 0.0;       // nats
    double cluster_size = 0.0;  // cm
};

/// Clusters sample features and reports assignment entropy plus the mean
/// distance of samples to their assigned centroid (converted mm -> cm).
inline Diversity diversity(const std::vector<Feature>& features, int k = 20,
                           std::uint64_t seed = 0, int max_iter = 100) {
    const KmeansResult km = kmeans(features, k, seed, max_iter);
    Diversity out;
    out.entropy = assignment_entropy(km.assignments, k);
    double total = 0.0;
    for (std::size_t i = 0; i < features.size(); ++i)
        total += std::sqrt(detail::feature_sq_dist(features[i], km.centroids[km.assignments[i]]));
    out.cluster_size = total / double(features.size()) / 10.0;
    return out;
}

/// Per-sample diversity feature: posed hand vertices re-centered on the
/// wrist joint so placement does not masquerade as pose diversity.
inline Feature hand_diversity_feature(const hand::PosedHand& posed) {
    Feature f;
    f.reserve(posed.vertices.size() * 3);
    const geom::Vec3 wrist = posed.joints[0];
    for (const geom::Vec3& v : posed.vertices) {
        f.push_back(v.x - wrist.x);
        f.push_back(v.y - wrist.y);
        f.push_back(v.z - wrist.z);
    }
    return f;
}

/// Fréchet distance between two Gaussians:
/// ||muA-muB||^2 + tr(covA + covB - 2 (covA covB)^{1/2}), the matrix root
/// taken by symmetric eigendecomposition of the symmetrized product with
/// negative eigenvalues clamped to zero.
inline double frechet_distance(const Eigen::VectorXd& mu_a, const Eigen::MatrixXd& cov_a,
                               const Eigen::VectorXd& mu_b, const Eigen::MatrixXd& cov_b) {
    const auto dim = mu_a.size();
    if (mu_b.size() != dim || cov_a.rows() != dim || cov_a.cols() != dim ||
        cov_b.rows() != dim || cov_b.cols() != dim)
        throw Error("dimension mismatch");
    if ((cov_a - cov_a.transpose()).cwiseAbs().maxCoeff() > 1e-8 ||
        (cov_b - cov_b.transpose()).cwiseAbs().maxCoeff() > 1e-8)
        throw Error("covariance is not symmetric");

    const Eigen::MatrixXd product = cov_a * cov_b;
    const Eigen::MatrixXd sym = 0.5 * (product + product.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
    if (eig.info() != Eigen::Success) throw Error("eigendecomposition failed");
    double sqrt_trace = 0.0;
    for (Eigen::Index i = 0; i < dim; ++i)
        sqrt_trace += std::sqrt(std::max(0.0, eig.eigenvalues()[i]));

    const double mean_term = (mu_a - mu_b).squaredNorm();
    const double value = mean_term + cov_a.trace() + cov_b.trace() - 2.0 * sqrt_trace;
    return std::max(0.0, value);
}

/// Named deterministic point-cloud feature map.
struct FeatureExtractor {
    std::string name;
    std::size_t dim = 0;
    std::function<Feature(const geom::PointCloud&)> extract;
};

/// Default extractor: centroid-relative second (6) and third (10) moments,
/// a 16-bin normalized pairwise-distance histogram, RMS radius, mean
/// pairwise distance and centered bbox diagonal. 35 dims, translation
/// invariant, scale sensitive.
inline FeatureExtractor moments_v1_extractor() {
    FeatureExtractor ex;
    ex.name = "moments-v1";
    ex.dim = 35;
    ex.extract = [](const geom::PointCloud& cloud) {
        cloud.validate();
        const std::size_t n = cloud.size();
        geom::Vec3 mean{0, 0, 0};
        for (const geom::Vec3& p : cloud.points) mean += p;
        mean = mean / double(n);

        Feature f(35, 0.0);
        for (const geom::Vec3& p : cloud.points) {
            const geom::Vec3 q = p - mean;
            f[0] += q.x * q.x; f[1] += q.y * q.y; f[2] += q.z * q.z;
            f[3] += q.x * q.y; f[4] += q.x * q.z; f[5] += q.y * q.z;
            f[6] += q.x * q.x * q.x;
            f[7] += q.x * q.x * q.y;
            f[8] += q.x * q.x * q.z;
            f[9] += q.x * q.y * q.y;
            f[10] += q.x * q.y * q.z;
            f[11] += q.x * q.z * q.z;
            f[12] += q.y * q.y * q.y;
            f[13] += q.y * q.y * q.z;
            f[14] += q.y * q.z * q.z;
            f[15] += q.z * q.z * q.z;
        }
        for (int i = 0; i < 16; ++i) f[i] /= double(n);

        // deterministic pair subsample for the distance histogram
        std::vector<std::uint32_t> idx;
        if (n <= 512) {
            idx.resize(n);
            std::iota(idx.begin(), idx.end(), 0u);
        } else {
            idx.resize(512);
            for (std::size_t i = 0; i < 512; ++i) idx[i] = std::uint32_t(i * n / 512);
        }
        std::vector<double> dists;
        dists.reserve(idx.size() * (idx.size() - 1) / 2);
        double d_max = 0.0, d_sum = 0.0;
        for (std::size_t a = 0; a < idx.size(); ++a)
            for (std::size_t b = a + 1; b < idx.size(); ++b) {
                const double d = geom::distance(cloud[idx[a]], cloud[idx[b]]);
                dists.push_back(d);
                d_max = std::max(d_max, d);
                d_sum += d;
            }
        if (!dists.empty() && d_max > 0.0) {
            for (double d : dists) {
                const int bin = std::min(15, int(d / d_max * 16.0));
                f[16 + bin] += 1.0;
            }
            for (int b = 0; b < 16; ++b) f[16 + b] /= double(dists.size());
        } else {
            f[16] = 1.0;
        }

        double r2 = 0.0;
        geom::Aabb centered;
        for (const geom::Vec3& p : cloud.points) {
            const geom::Vec3 q = p - mean;
            r2 += q.squared_norm();
            centered.expand(q);
        }
        f[32] = std::sqrt(r2 / double(n));
        f[33] = dists.empty() ? 0.0 : d_sum / double(dists.size());
        f[34] = centered.diagonal();
        return f;
    };
    return ex;
}

/// Fits a Gaussian to each feature set and returns the Fréchet distance.
/// Sets smaller than dim+1 get ridge shrinkage (1e-6 I) so covariances stay
/// well defined.
inline double p_fid(const std::vector<geom::PointCloud>& set_a,
                    const std::vector<geom::PointCloud>& set_b, const FeatureExtractor& extractor) {
    auto fit = [&](const std::vector<geom::PointCloud>& set) {
        if (set.empty()) throw Error("p_fid on an empty set");
        const auto n = Eigen::Index(set.size());
        const auto dim = Eigen::Index(extractor.dim);
        Eigen::MatrixXd feats(n, dim);
        for (Eigen::Index i = 0; i < n; ++i) {
            const Feature f = extractor.extract(set[i]);
            if (Eigen::Index(f.size()) != dim) throw Error("extractor returned a wrong dimension");
            for (Eigen::Index d = 0; d < dim; ++d) feats(i, d) = f[d];
        }
        const Eigen::VectorXd mu = feats.colwise().mean();
        Eigen::MatrixXd centered = feats.rowwise() - mu.transpose();
        Eigen::MatrixXd cov = n > 1
            ? Eigen::MatrixXd((centered.transpose() * centered) / double(n - 1))
            : Eigen::MatrixXd(Eigen::MatrixXd::Zero(dim, dim));
        if (n < dim + 1) cov += 1e-6 * Eigen::MatrixXd::Identity(dim, dim);
        return std::make_pair(mu, cov);
    };
    const auto [mu_a, cov_a] = fit(set_a);
    const auto [mu_b, cov_b] = fit(set_b);
    return frechet_distance(mu_a, cov_a, mu_b, cov_b);
}

struct SampleMetrics {
    std::string id;
    double mpvpe = 0.0;  // mm
    double pd = 0.0;     // cm
    double pv = 0.0;     // cm^3
    double p_iou = 0.0;
    double p_f1 = 0.0;
};

/// Full evaluation report. Aggregates are arithmetic means of the
/// per-sample records.
struct MetricReport {
    std::vector<SampleMetrics> samples;
    double entropy = 0.0;
    double cluster_size = 0.0;
    double p_fid = 0.0;
    std::string extractor;
    int kmeans_k = 20;

    SampleMetrics aggregate() const {
        SampleMetrics mean;
        mean.id = "mean";
        if (samples.empty()) return mean;
        for (const auto& s : samples) {
            mean.mpvpe += s.mpvpe;
            mean.pd += s.pd;
            mean.pv += s.pv;
            mean.p_iou += s.p_iou;
            mean.p_f1 += s.p_f1;
        }
        const double n = double(samples.size());
        mean.mpvpe /= n; mean.pd /= n; mean.pv /= n; mean.p_iou /= n; mean.p_f1 /= n;
        return mean;
    }
};

inline nlohmann::ordered_json to_json(const MetricReport& report) {
    nlohmann::ordered_json j;
    auto& samples = j["samples"] = nlohmann::ordered_json::array();
    for (const auto& s : report.samples)
        samples.push_back({{"id", s.id}, {"mpvpe", s.mpvpe}, {"pd", s.pd}, {"pv", s.pv},
                           {"p_iou", s.p_iou}, {"p_f1", s.p_f1}});
    const SampleMetrics mean = report.aggregate();
    j["aggregate"] = {{"mpvpe", mean.mpvpe}, {"pd", mean.pd}, {"pv", mean.pv},
                      {"p_iou", mean.p_iou}, {"p_f1", mean.p_f1}};
    j["diversity"] = {{"entropy", report.entropy}, {"cluster_size", report.cluster_size},
                      {"kmeans_k", report.kmeans_k}};
    j["p_fid"] = {{"value", report.p_fid}, {"extractor", report.extractor}};
    return j;
}

/// Aligned plain-text table: P-IoU, P-F1, MPVPE, PD, PV, Ent., CS, P-FID.
inline std::string to_table(const MetricReport& report) {
    std::ostringstream out;
    auto row = [&](const std::string& id, const std::vector<std::string>& cells) {
        out << std::left << std::setw(16) << id;
        for (const auto& c : cells) out << std::right << std::setw(10) << c;
        out << '\n';
    };
    auto num = [](double v) {
        std::ostringstream s;
        s << std::fixed << std::setprecision(3) << v;
        return s.str();
    };
    row("sample", {"P-IoU", "P-F1", "MPVPE", "PD", "PV", "Ent.", "CS", "P-FID"});
    for (const auto& s : report.samples)
        row(s.id, {num(s.p_iou), num(s.p_f1), num(s.mpvpe), num(s.pd), num(s.pv), "-", "-", "-"});
    const SampleMetrics mean = report.aggregate();
    row("mean", {num(mean.p_iou), num(mean.p_f1), num(mean.mpvpe), num(mean.pd), num(mean.pv),
                 num(report.entropy), num(report.cluster_size), num(report.p_fid)});
    return out.str();
}

}  // namespace hoikit::metrics
