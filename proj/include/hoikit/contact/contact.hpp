#pragma once

#include <cstdint>
#include <json.hpp>
#include <utility>
#include <vector>

#include "hoikit/geom/kdtree.hpp"
#include "hoikit/geom/stats.hpp"
#include "hoikit/hand/labels.hpp"

namespace hoikit::contact {

/// Thresholds of the four-stage contact extraction. alpha picks the upper
/// vote quantile for candidates, beta and eps gate candidate distances, and
/// the core set grows by gamma times the mean k-NN spacing of the cloud.
struct ContactParams {
    double alpha = 0.10;
    double beta = 0.50;
    double eps = 5.0;    // mm
    double gamma = 2.0;
    int k = 8;

    void validate() const {
        if (!(alpha > 0.0 && alpha < 1.0)) throw Error("alpha must be in (0,1)");
        if (!(beta > 0.0 && beta < 1.0)) throw Error("beta must be in (0,1)");
        if (!(eps > 0.0)) throw Error("eps must be positive");
        if (!(gamma >= 0.0)) throw Error("gamma must be nonnegative");
        if (k < 1) throw Error("k must be >= 1");
    }
};

inline nlohmann::ordered_json to_json(const ContactParams& p) {
    return {{"alpha", p.alpha}, {"beta", p.beta}, {"eps", p.eps}, {"gamma", p.gamma}, {"k", p.k}};
}

inline ContactParams contact_params_from_json(const nlohmann::json& j) {
    ContactParams p;
    if (j.contains("alpha")) p.alpha = j.at("alpha").get<double>();
    if (j.contains("beta")) p.beta = j.at("beta").get<double>();
    if (j.contains("eps")) p.eps = j.at("eps").get<double>();
    if (j.contains("gamma")) p.gamma = j.at("gamma").get<double>();
    if (j.contains("k")) p.k = j.at("k").get<int>();
    p.validate();
    return p;
}

/// Binary contact indicator over a point cloud.
struct ContactMap {
    std::vector<std::uint8_t> bits;

    std::size_t size() const { return bits.size(); }
    std::size_t count() const {
        std::size_t c = 0;
        for (auto b : bits) c += b != 0;
        return c;
    }
    std::vector<std::uint32_t> indices() const {
        std::vector<std::uint32_t> out;
        for (std::uint32_t i = 0; i < bits.size(); ++i)
            if (bits[i]) out.push_back(i);
        return out;
    }
    bool operator==(const ContactMap&) const = default;
};

/// 21 x N matrix of joint-to-point distances in mm.
struct DistanceMap {
    std::size_t cols = 0;
    std::vector<double> values;  // row-major, 21 rows

    double at(int joint, std::size_t point) const { return values[joint * cols + point]; }
};

/// Stage 1: each point votes for its nearest neighbor in the opposite
/// cloud; vote_o sums to the hand point count and vice versa.
inline std::pair<std::vector<int>, std::vector<int>> bidirectional_votes(
    const geom::PointCloud& obj, const geom::PointCloud& hand) {
    const geom::SpatialIndex obj_index(obj);
    const geom::SpatialIndex hand_index(hand);
    std::vector<int> vote_o(obj.size(), 0), vote_h(hand.size(), 0);
    for (const geom::Vec3& h : hand.points) ++vote_o[obj_index.nearest(h).index];
    for (const geom::Vec3& o : obj.points) ++vote_h[hand_index.nearest(o).index];
    return {std::move(vote_o), std::move(vote_h)};
}

namespace detail {

/// Mean k-NN distance within a cloud: per point, the mean distance to its k
/// nearest neighbors (self excluded), averaged over all points.
inline double mean_knn_distance(const geom::PointCloud& cloud, const geom::SpatialIndex& index,
                                int k) {
    if (cloud.size() < 2) return 0.0;
    double total = 0.0;
    for (std::uint32_t i = 0; i < cloud.size(); ++i) {
        const auto neighbors = index.knn(cloud[i], std::size_t(k) + 1);
        double sum = 0.0;
        int used = 0;
        for (const auto& nb : neighbors) {
            if (nb.index == i) continue;
            sum += nb.distance;
            if (++used == k) break;
        }
        total += sum / double(used);
    }
    return total / double(cloud.size());
}

/// Stages 2-4 for one side, given the cross-cloud NN distances and votes.
inline ContactMap contact_side(const geom::PointCloud& cloud, const geom::SpatialIndex& self_index,
                               const std::vector<int>& votes, const std::vector<double>& nn_dist,
                               const ContactParams& p) {
    std::vector<double> vote_values(votes.begin(), votes.end());
    const double vote_threshold = geom::quantile(vote_values, 1.0 - p.alpha);

    std::vector<std::uint32_t> candidates;
    std::vector<double> candidate_dist;
    for (std::uint32_t i = 0; i < cloud.size(); ++i) {
        if (double(votes[i]) >= vote_threshold) {
            candidates.push_back(i);
            candidate_dist.push_back(nn_dist[i]);
        }
    }

    ContactMap map;
    map.bits.assign(cloud.size(), 0);
    if (candidates.empty()) return map;

    const double dist_threshold = std::min(geom::quantile(candidate_dist, p.beta), p.eps);
    std::vector<std::uint32_t> core;
    for (std::size_t c = 0; c < candidates.size(); ++c)
        if (candidate_dist[c] < dist_threshold) core.push_back(candidates[c]);
    if (core.empty()) return map;  // no contact on this side

    const double radius = p.gamma * mean_knn_distance(cloud, self_index, p.k);
    const double r2 = radius * radius;
    for (std::uint32_t s : core)
        for (std::uint32_t i : self_index.radius_search_sq(cloud[s], r2)) map.bits[i] = 1;
    return map;
}

}  // namespace detail

/// Full four-stage contact extraction, returning the object-side and
/// hand-side maps. An empty core set yields an all-zero map: "no contact"
/// is a valid frame state.
inline std::pair<ContactMap, ContactMap> compute_contact_maps(const geom::PointCloud& obj,
                                                              const geom::PointCloud& hand,
                                                              const ContactParams& p = {}) {
    p.validate();
    const geom::SpatialIndex obj_index(obj);
    const geom::SpatialIndex hand_index(hand);

    std::vector<int> vote_o(obj.size(), 0), vote_h(hand.size(), 0);
    std::vector<double> dist_h(hand.size());  // hand point -> nearest object point
    std::vector<double> dist_o(obj.size());   // object point -> nearest hand point
    for (std::uint32_t j = 0; j < hand.size(); ++j) {
        const auto nn = obj_index.nearest(hand[j]);
        ++vote_o[nn.index];
        dist_h[j] = nn.distance;
    }
    for (std::uint32_t i = 0; i < obj.size(); ++i) {
        const auto nn = hand_index.nearest(obj[i]);
        ++vote_h[nn.index];
        dist_o[i] = nn.distance;
    }

    ContactMap c_o = detail::contact_side(obj, obj_index, vote_o, dist_o, p);
    ContactMap c_h = detail::contact_side(hand, hand_index, vote_h, dist_h, p);
    return {std::move(c_o), std::move(c_h)};
}

/// Joint-to-object distance matrix used to supervise spatial layout.
inline DistanceMap distance_map(const std::array<geom::Vec3, hand::kNumJoints>& joints,
                                const geom::PointCloud& obj) {
    obj.validate();
    DistanceMap map;
    map.cols = obj.size();
    map.values.resize(std::size_t(hand::kNumJoints) * obj.size());
    for (int j = 0; j < hand::kNumJoints; ++j)
        for (std::size_t i = 0; i < obj.size(); ++i)
            map.values[j * map.cols + i] = geom::distance(joints[j], obj[i]);
    return map;
}

struct ContactAnnotation {
    ContactMap hand_map;
    ContactMap obj_map;
    hand::ContactLabel7 label;
};

/// Dataset-style annotation: contact maps from the posed hand vertices, then
/// the 7-bit part-contact label via the template's 17-part vertex labels.
inline ContactAnnotation dataset_contact_annotation(const geom::PointCloud& hand_vertices,
                                                    const geom::PointCloud& obj,
                                                    std::span<const hand::PartLabel17> part_labels,
                                                    const ContactParams& p = {},
                                                    int min_hits = 3) {
    if (hand_vertices.size() != part_labels.size())
        throw Error("hand vertices and part labels differ in length");
    auto [c_o, c_h] = compute_contact_maps(obj, hand_vertices, p);
    ContactAnnotation out;
    out.label = hand::contact_label7(c_h.bits, part_labels, min_hits);
    out.hand_map = std::move(c_h);
    out.obj_map = std::move(c_o);
    return out;
}

inline nlohmann::ordered_json to_json(const ContactMap& map) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (auto b : map.bits) arr.push_back(int(b));
    return arr;
}

inline ContactMap contact_map_from_json(const nlohmann::json& j) {
    ContactMap map;
    for (const auto& v : j) map.bits.push_back(v.get<int>() != 0 ? 1 : 0);
    return map;
}

}  // namespace hoikit::contact
