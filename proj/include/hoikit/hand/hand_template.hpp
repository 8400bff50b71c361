#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <json.hpp>
#include <vector>

#include "hoikit/geom/shapes.hpp"
#include "hoikit/geom/trimesh.hpp"
#include "hoikit/hand/labels.hpp"
#include "hoikit/hand/skeleton.hpp"

namespace hoikit::hand {

/// Canonical skinned hand: watertight zero-pose mesh, 21-joint tree,
/// per-vertex skinning weights over 16 bones, and 17-part labels.
struct HandTemplate {
    geom::TriMesh mesh;
    std::array<geom::Vec3, kNumJoints> joints0{};
    std::array<int, kNumJoints> parent = joint_parents();
    std::vector<std::array<double, kNumBones>> weights;
    std::vector<PartLabel17> part_label;

    std::size_t vertex_count() const { return mesh.vertices.size(); }

    void validate() const {
        mesh.validate();
        if (!mesh.is_watertight()) throw Error("hand template mesh is not watertight");
        if (weights.size() != mesh.vertices.size() || part_label.size() != mesh.vertices.size())
            throw Error("hand template attribute counts do not match the mesh");
        if (parent[0] != -1) throw Error("joint 0 must be the root");
        for (int j = 1; j < kNumJoints; ++j)
            if (parent[j] < 0 || parent[j] >= j)
                throw Error("joint parents must form a single rooted tree");
        std::array<bool, kNumParts> seen{};
        for (PartLabel17 label : part_label) {
            if (int(label) >= kNumParts) throw Error("part label out of range");
            seen[int(label)] = true;
        }
        for (bool s : seen)
            if (!s) throw Error("hand template is missing a part label");
        for (const auto& row : weights) {
            double sum = 0.0;
            for (double w : row) {
                if (w < 0.0) throw Error("negative skinning weight");
                sum += w;
            }
            if (std::abs(sum - 1.0) > 1e-6) throw Error("skinning weights must sum to 1");
        }
    }
};

/// Geometry recipe for the generated template. Lengths and radii in mm.
struct HandTemplateConfig {
    geom::Vec3 palm_min{-36.0, 3.0, -11.0};
    geom::Vec3 palm_max{36.0, 86.0, 11.0};
    std::array<std::uint32_t, 3> palm_divisions{6, 7, 2};

    std::array<geom::Vec3, kNumFingers> mcp{{{34.0, 20.0, -4.0},
                                             {27.0, 86.0, 0.0},
                                             {9.0, 86.0, 0.0},
                                             {-9.0, 86.0, 0.0},
                                             {-27.0, 86.0, 0.0}}};
    std::array<geom::Vec3, kNumFingers> direction{{{0.75, 0.60, -0.25},
                                                   {0.08, 1.0, 0.0},
                                                   {0.0, 1.0, 0.0},
                                                   {-0.06, 1.0, 0.0},
                                                   {-0.14, 1.0, 0.0}}};
    std::array<std::array<double, 3>, kNumFingers> segment_lengths{{{40.0, 32.0, 26.0},
                                                                    {42.0, 26.0, 22.0},
                                                                    {46.0, 30.0, 24.0},
                                                                    {42.0, 28.0, 23.0},
                                                                    {34.0, 22.0, 20.0}}};
    std::array<std::array<double, 3>, kNumFingers> segment_radii{{{10.5, 9.5, 9.0},
                                                                  {8.5, 7.8, 7.2},
                                                                  {8.8, 8.0, 7.4},
                                                                  {8.3, 7.6, 7.0},
                                                                  {7.2, 6.6, 6.2}}};
    std::uint32_t ring_segments = 10;

    void validate() const {
        for (int f = 0; f < kNumFingers; ++f)
            for (int s = 0; s < 3; ++s) {
                if (!(segment_lengths[f][s] > 0.0)) throw Error("segment length must be positive");
                if (!(segment_radii[f][s] > 0.0)) throw Error("segment radius must be positive");
            }
        if (ring_segments < 4) throw Error("ring resolution must be >= 4");
    }
};

namespace detail {

inline double point_segment_distance(const geom::Vec3& p, const geom::Vec3& a,
                                     const geom::Vec3& b) {
    const geom::Vec3 d = b - a;
    const double len2 = d.squared_norm();
    if (len2 == 0.0) return geom::distance(p, a);
    const double t = std::clamp((p - a).dot(d) / len2, 0.0, 1.0);
    return geom::distance(p, a + d * t);
}

}  // namespace detail

/// Builds the canonical hand template: a subdivided palm box plus three
/// capsule phalanges per finger, each a closed component. Skinning weights
/// come from inverse distance to the two nearest bone segments; part labels
/// are assigned geometrically (palmar/dorsal split along -z). Generation is
/// deterministic; the seed is reserved for optional jitter, which is off.
inline HandTemplate generate_capsule_hand_template(const HandTemplateConfig& config = {},
                                                   std::uint64_t seed = 0) {
    (void)seed;
    config.validate();

    HandTemplate tpl;
    tpl.joints0[0] = {0.0, 0.0, 0.0};
    for (int f = 0; f < kNumFingers; ++f) {
        geom::Vec3 dir = config.direction[f];
        dir = dir / dir.norm();
        geom::Vec3 at = config.mcp[f];
        tpl.joints0[joint_index(f, 0)] = at;
        for (int s = 0; s < 3; ++s) {
            at += dir * config.segment_lengths[f][s];
            tpl.joints0[joint_index(f, s + 1)] = at;
        }
    }

    std::vector<geom::Vec3> vertices;
    std::vector<std::array<std::uint32_t, 3>> faces;
    std::vector<PartLabel17> labels;

    const geom::Vec3 palmar{0.0, 0.0, -1.0};
    auto append = [&](const geom::TriMesh& part,
                      const std::function<PartLabel17(const geom::Vec3&)>& label_of) {
        const auto base = std::uint32_t(vertices.size());
        for (const geom::Vec3& v : part.vertices) {
            vertices.push_back(v);
            labels.push_back(label_of(v));
        }
        for (const auto& f : part.faces)
            faces.push_back({f[0] + base, f[1] + base, f[2] + base});
    };

    append(geom::make_box_grid(config.palm_min, config.palm_max, config.palm_divisions[0],
                               config.palm_divisions[1], config.palm_divisions[2]),
           [&](const geom::Vec3& v) {
               return v.z < 0.0 ? PartLabel17::palm : PartLabel17::back_of_palm;
           });

    for (int f = 0; f < kNumFingers; ++f) {
        for (int s = 0; s < 3; ++s) {
            const geom::Vec3 a = tpl.joints0[joint_index(f, s)];
            const geom::Vec3 b = tpl.joints0[joint_index(f, s + 1)];
            const geom::TriMesh capsule =
                geom::make_capsule(a, b, config.segment_radii[f][s], config.ring_segments);
            if (s < 2) {
                append(capsule, [&](const geom::Vec3&) { return part_label(f, 2); });
            } else {
                const geom::Vec3 axis = b - a;
                const double len2 = axis.squared_norm();
                append(capsule, [&, a, axis, len2](const geom::Vec3& v) {
                    const double t = std::clamp((v - a).dot(axis) / len2, 0.0, 1.0);
                    const geom::Vec3 radial = v - (a + axis * t);
                    return radial.dot(palmar) > 1e-9 ? part_label(f, 0) : part_label(f, 1);
                });
            }
        }
    }

    tpl.mesh = geom::TriMesh(std::move(vertices), std::move(faces));
    tpl.part_label = std::move(labels);
    if (!tpl.mesh.is_watertight()) throw Error("template generation failed");

    // Bone segments for weight assignment: the root spans the palm, each
    // phalanx spans its two joints.
    std::array<std::pair<geom::Vec3, geom::Vec3>, kNumBones> segments;
    segments[0] = {tpl.joints0[0], geom::Vec3{0.0, config.palm_max.y - 4.0, 0.0}};
    for (int b = 1; b < kNumBones; ++b) {
        const int f = bone_finger(b), s = (b - 1) % 3;
        segments[b] = {tpl.joints0[joint_index(f, s)], tpl.joints0[joint_index(f, s + 1)]};
    }

    tpl.weights.resize(tpl.mesh.vertices.size());
    for (std::size_t vi = 0; vi < tpl.mesh.vertices.size(); ++vi) {
        const geom::Vec3& v = tpl.mesh.vertices[vi];
        int best = 0, second = -1;
        double best_d = std::numeric_limits<double>::infinity();
        double second_d = std::numeric_limits<double>::infinity();
        for (int b = 0; b < kNumBones; ++b) {
            const double d = detail::point_segment_distance(v, segments[b].first, segments[b].second);
            if (d < best_d) {
                second = best; second_d = best_d;
                best = b; best_d = d;
            } else if (d < second_d) {
                second = b; second_d = d;
            }
        }
        auto& row = tpl.weights[vi];
        row.fill(0.0);
        const double w1 = 1.0 / (best_d + 1e-6);
        const double w2 = 1.0 / (second_d + 1e-6);
        row[best] = w1 / (w1 + w2);
        row[second] = w2 / (w1 + w2);
    }

    tpl.validate();
    return tpl;
}

inline nlohmann::ordered_json to_json(const HandTemplate& tpl) {
    nlohmann::ordered_json j;
    auto& verts = j["vertices"] = nlohmann::ordered_json::array();
    for (const auto& v : tpl.mesh.vertices) verts.push_back({v.x, v.y, v.z});
    auto& faces = j["faces"] = nlohmann::ordered_json::array();
    for (const auto& f : tpl.mesh.faces) faces.push_back({f[0], f[1], f[2]});
    auto& joints = j["joints"] = nlohmann::ordered_json::array();
    for (const auto& p : tpl.joints0) joints.push_back({p.x, p.y, p.z});
    j["parents"] = tpl.parent;
    auto& weights = j["weights"] = nlohmann::ordered_json::array();
    for (const auto& row : tpl.weights) weights.push_back(row);
    auto& labels = j["part_label"] = nlohmann::ordered_json::array();
    for (PartLabel17 label : tpl.part_label) labels.push_back(int(label));
    return j;
}

inline HandTemplate hand_template_from_json(const nlohmann::json& j) {
    HandTemplate tpl;
    std::vector<geom::Vec3> verts;
    for (const auto& v : j.at("vertices"))
        verts.push_back({v[0].get<double>(), v[1].get<double>(), v[2].get<double>()});
    std::vector<std::array<std::uint32_t, 3>> faces;
    for (const auto& f : j.at("faces"))
        faces.push_back({f[0].get<std::uint32_t>(), f[1].get<std::uint32_t>(),
                         f[2].get<std::uint32_t>()});
    tpl.mesh = geom::TriMesh(std::move(verts), std::move(faces));
    const auto& joints = j.at("joints");
    if (joints.size() != kNumJoints) throw Error("template must have 21 joints");
    for (int i = 0; i < kNumJoints; ++i)
        tpl.joints0[i] = {joints[i][0].get<double>(), joints[i][1].get<double>(),
                          joints[i][2].get<double>()};
    const auto& parents = j.at("parents");
    for (int i = 0; i < kNumJoints; ++i) tpl.parent[i] = parents[i].get<int>();
    for (const auto& row : j.at("weights")) {
        std::array<double, kNumBones> w{};
        if (row.size() != kNumBones) throw Error("weight rows must have 16 entries");
        for (int b = 0; b < kNumBones; ++b) w[b] = row[b].get<double>();
        tpl.weights.push_back(w);
    }
    for (const auto& label : j.at("part_label"))
        tpl.part_label.push_back(PartLabel17(label.get<int>()));
    tpl.validate();
    return tpl;
}

}  // namespace hoikit::hand
