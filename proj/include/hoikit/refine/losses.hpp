#pragma once

#include <algorithm>
#include <json.hpp>
#include <queue>
#include <span>
#include <vector>

#include "hoikit/contact/contact.hpp"
#include "hoikit/geom/kdtree.hpp"
#include "hoikit/geom/winding.hpp"
#include "hoikit/hand/kinematics.hpp"

namespace hoikit::refine {

/// Loss weights of the refinement stage. lambda_simple and lambda_global
/// only apply when training a refiner network; they are carried for
/// provenance and do not enter the test-time objective.
struct RefineWeights {
    double lambda_simple = 5.0;
    double lambda_global = 0.1;
    double lambda_pene = 100.0;
    double lambda_contact = 100.0;
    double lambda_cyc = 10.0;
    double lambda_self = 10000.0;
    double lambda_anatomy = 0.1;

    void validate() const {
        for (double w : {lambda_simple, lambda_global, lambda_pene, lambda_contact, lambda_cyc,
                         lambda_self, lambda_anatomy})
            if (!(w >= 0.0)) throw Error("loss weights must be nonnegative");
    }
};

inline nlohmann::ordered_json to_json(const RefineWeights& w) {
    return {{"lambda_simple", w.lambda_simple}, {"lambda_global", w.lambda_global},
            {"lambda_pene", w.lambda_pene},     {"lambda_contact", w.lambda_contact},
            {"lambda_cyc", w.lambda_cyc},       {"lambda_self", w.lambda_self},
            {"lambda_anatomy", w.lambda_anatomy}};
}

inline RefineWeights refine_weights_from_json(const nlohmann::json& j) {
    RefineWeights w;
    auto get = [&](const char* key, double& out) {
        if (j.contains(key)) out = j.at(key).get<double>();
    };
    get("lambda_simple", w.lambda_simple);
    get("lambda_global", w.lambda_global);
    get("lambda_pene", w.lambda_pene);
    get("lambda_contact", w.lambda_contact);
    get("lambda_cyc", w.lambda_cyc);
    get("lambda_self", w.lambda_self);
    get("lambda_anatomy", w.lambda_anatomy);
    w.validate();
    return w;
}

/// Per-DOF angle bounds over the 45 articulated pose components. Component
/// x of each axis-angle is flexion, y twist, z abduction.
struct JointLimits {
    std::array<double, hand::kPoseDof> lo{};
    std::array<double, hand::kPoseDof> hi{};

    static JointLimits defaults() {
        JointLimits limits;
        for (int b = 0; b < hand::kNumArticulated; ++b) {
            limits.lo[b * 3 + 0] = -0.3;  limits.hi[b * 3 + 0] = 1.6;   // flexion
            limits.lo[b * 3 + 1] = -0.15; limits.hi[b * 3 + 1] = 0.15;  // twist
            limits.lo[b * 3 + 2] = -0.35; limits.hi[b * 3 + 2] = 0.35;  // abduction
        }
        return limits;
    }
};

struct LossBreakdown {
    double contact = 0.0;
    double pene = 0.0;
    double anatomy = 0.0;
    double self = 0.0;
    double cyc = 0.0;
    double total = 0.0;
};

/// Mean distance (mm) from contact-marked hand vertices to their nearest
/// object point; zero when the contact map is empty.
inline double loss_contact(const std::vector<geom::Vec3>& hand_verts,
                           std::span<const std::uint8_t> contact_bits,
                           const geom::SpatialIndex& obj_index) {
    if (hand_verts.size() != contact_bits.size())
        throw Error("contact map length does not match vertex count");
    double total = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < hand_verts.size(); ++i) {
        if (!contact_bits[i]) continue;
        total += obj_index.nearest(hand_verts[i]).distance;
        ++count;
    }
    return count == 0 ? 0.0 : total / double(count);
}

/// Sum (mm) of the surface distances of hand vertices that lie inside the
/// object.
inline double loss_penetration(const std::vector<geom::Vec3>& hand_verts,
                               const geom::TriMesh& obj) {
    obj.require_watertight();
    const geom::Aabb box = obj.bounds();
    double total = 0.0;
    for (const geom::Vec3& v : hand_verts) {
        if (!box.contains(v)) continue;
        if (geom::winding_number(obj, v) <= 0.5) continue;
        total += geom::distance_to_surface(obj, v);
    }
    return total;
}

/// Quadratic hinge on the 45 pose components against the bounds table.
inline double loss_anatomy(const hand::HandParams& params, const JointLimits& limits) {
    double total = 0.0;
    for (int b = 0; b < hand::kNumArticulated; ++b) {
        const double comps[3] = {params.pose[b].x, params.pose[b].y, params.pose[b].z};
        for (int c = 0; c < 3; ++c) {
            const int dof = b * 3 + c;
            const double over = std::max(0.0, comps[c] - limits.hi[dof]);
            const double under = std::max(0.0, limits.lo[dof] - comps[c]);
            total += over * over + under * under;
        }
    }
    return total;
}

/// Exclusion sets for self-penetration: for every vertex, the vertices
/// within three hops on the template graph. The graph is the mesh edge
/// graph augmented with proximity edges between vertices closer than
/// weld_radius in the canonical pose, which welds the template's closed
/// components where they overlap by construction.
inline std::vector<std::vector<std::uint32_t>> build_self_exclusion(const geom::TriMesh& mesh,
                                                                    double weld_radius) {
    const std::size_t n = mesh.vertices.size();
    std::vector<std::vector<std::uint32_t>> graph(n);
    for (const auto& f : mesh.faces) {
        for (int k = 0; k < 3; ++k) {
            graph[f[k]].push_back(f[(k + 1) % 3]);
            graph[f[(k + 1) % 3]].push_back(f[k]);
        }
    }
    const geom::SpatialIndex index(geom::PointCloud(mesh.vertices));
    for (std::uint32_t i = 0; i < n; ++i)
        for (std::uint32_t j : index.radius_search(mesh.vertices[i], weld_radius))
            if (j != i) graph[i].push_back(j);
    for (auto& adj : graph) {
        std::sort(adj.begin(), adj.end());
        adj.erase(std::unique(adj.begin(), adj.end()), adj.end());
    }

    std::vector<std::vector<std::uint32_t>> exclusion(n);
    std::vector<int> depth(n, -1);
    std::vector<std::uint32_t> touched;
    for (std::uint32_t start = 0; start < n; ++start) {
        touched.clear();
        std::queue<std::uint32_t> frontier;
        frontier.push(start);
        depth[start] = 0;
        touched.push_back(start);
        while (!frontier.empty()) {
            const std::uint32_t v = frontier.front();
            frontier.pop();
            if (depth[v] == 3) continue;
            for (std::uint32_t nb : graph[v]) {
                if (depth[nb] != -1) continue;
                depth[nb] = depth[v] + 1;
                touched.push_back(nb);
                frontier.push(nb);
            }
        }
        exclusion[start] = touched;
        std::sort(exclusion[start].begin(), exclusion[start].end());
        for (std::uint32_t v : touched) depth[v] = -1;
    }
    return exclusion;
}

/// Vertex pairs beyond graph distance 3 that come closer than the margin
/// are penalized quadratically; exact-margin pairs contribute zero.
inline double loss_self_penetration(const std::vector<geom::Vec3>& posed_verts,
                                    const std::vector<std::vector<std::uint32_t>>& exclusion,
                                    double margin) {
    if (!(margin > 0.0)) throw Error("self-penetration margin must be positive");
    if (posed_verts.size() != exclusion.size())
        throw Error("exclusion table does not match vertex count");
    const geom::SpatialIndex index((geom::PointCloud(posed_verts)));
    double total = 0.0;
    for (std::uint32_t a = 0; a < posed_verts.size(); ++a) {
        for (std::uint32_t b : index.radius_search(posed_verts[a], margin)) {
            if (b <= a) continue;
            const auto& skip = exclusion[a];
            if (std::binary_search(skip.begin(), skip.end(), b)) continue;
            const double d = geom::distance(posed_verts[a], posed_verts[b]);
            if (d < margin) {
                const double pen = margin - d;
                total += pen * pen;
            }
        }
    }
    return total;
}

/// Cycle consistency across the contact sets: nearest-neighbor round trips
/// hand -> object -> hand and object -> hand -> object, mean L1 error each,
/// summed. Zero when either contact set is empty.
inline double loss_cycle(const std::vector<geom::Vec3>& hand_contact,
                         const std::vector<geom::Vec3>& obj_contact) {
    if (hand_contact.empty() || obj_contact.empty()) return 0.0;
    auto nearest_in = [](const std::vector<geom::Vec3>& set, const geom::Vec3& q) {
        std::size_t best = 0;
        double best_d2 = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < set.size(); ++i) {
            const double d2 = geom::squared_distance(set[i], q);
            if (d2 < best_d2) { best_d2 = d2; best = i; }
        }
        return best;
    };
    auto l1 = [](const geom::Vec3& a, const geom::Vec3& b) {
        return std::abs(a.x - b.x) + std::abs(a.y - b.y) + std::abs(a.z - b.z);
    };
    double hand_term = 0.0;
    for (const geom::Vec3& h : hand_contact) {
        const geom::Vec3& via = obj_contact[nearest_in(obj_contact, h)];
        hand_term += l1(hand_contact[nearest_in(hand_contact, via)], h);
    }
    double obj_term = 0.0;
    for (const geom::Vec3& o : obj_contact) {
        const geom::Vec3& via = hand_contact[nearest_in(hand_contact, o)];
        obj_term += l1(obj_contact[nearest_in(obj_contact, via)], o);
    }
    return hand_term / double(hand_contact.size()) + obj_term / double(obj_contact.size());
}

}  // namespace hoikit::refine
