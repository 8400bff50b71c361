#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "hoikit/geom/trimesh.hpp"

namespace hoikit::geom {

namespace detail {

/// Appends a triangle wound so its normal points along `outward`.
inline void push_oriented(std::vector<std::array<std::uint32_t, 3>>& faces,
                          const std::vector<Vec3>& verts, std::uint32_t a, std::uint32_t b,
                          std::uint32_t c, const Vec3& outward) {
    const Vec3 n = (verts[b] - verts[a]).cross(verts[c] - verts[a]);
    if (n.dot(outward) >= 0.0)
        faces.push_back({a, b, c});
    else
        faces.push_back({a, c, b});
}

}  // namespace detail

/// Axis-aligned box subdivided into a surface grid; watertight.
inline TriMesh make_box_grid(const Vec3& lo, const Vec3& hi, std::uint32_t nx, std::uint32_t ny,
                             std::uint32_t nz) {
    if (nx == 0 || ny == 0 || nz == 0) throw Error("box grid needs positive divisions");
    std::vector<Vec3> verts;
    std::map<std::array<std::uint32_t, 3>, std::uint32_t> lattice;
    const std::uint32_t n[3] = {nx, ny, nz};
    auto vertex_at = [&](std::uint32_t i, std::uint32_t j, std::uint32_t k) {
        const std::array<std::uint32_t, 3> key{i, j, k};
        auto it = lattice.find(key);
        if (it != lattice.end()) return it->second;
        const Vec3 p{lo.x + (hi.x - lo.x) * double(i) / nx,
                     lo.y + (hi.y - lo.y) * double(j) / ny,
                     lo.z + (hi.z - lo.z) * double(k) / nz};
        verts.push_back(p);
        const auto idx = std::uint32_t(verts.size() - 1);
        lattice.emplace(key, idx);
        return idx;
    };

    std::vector<std::array<std::uint32_t, 3>> faces;
    // axis = the fixed coordinate of the side, side = 0 (low) or 1 (high)
    for (int axis = 0; axis < 3; ++axis) {
        const int ua = (axis + 1) % 3, va = (axis + 2) % 3;
        for (int side = 0; side < 2; ++side) {
            const std::uint32_t fixed = side == 0 ? 0 : n[axis];
            Vec3 outward{0, 0, 0};
            (axis == 0 ? outward.x : axis == 1 ? outward.y : outward.z) = side == 0 ? -1.0 : 1.0;
            for (std::uint32_t u = 0; u < n[ua]; ++u) {
                for (std::uint32_t v = 0; v < n[va]; ++v) {
                    auto corner = [&](std::uint32_t du, std::uint32_t dv) {
                        std::uint32_t ijk[3];
                        ijk[axis] = fixed;
                        ijk[ua] = u + du;
                        ijk[va] = v + dv;
                        return vertex_at(ijk[0], ijk[1], ijk[2]);
                    };
                    const std::uint32_t c00 = corner(0, 0), c10 = corner(1, 0);
                    const std::uint32_t c11 = corner(1, 1), c01 = corner(0, 1);
                    detail::push_oriented(faces, verts, c00, c10, c11, outward);
                    detail::push_oriented(faces, verts, c00, c11, c01, outward);
                }
            }
        }
    }
    return TriMesh(std::move(verts), std::move(faces));
}

/// Closed capsule around segment [a, b] with hemispherical caps.
inline TriMesh make_capsule(const Vec3& a, const Vec3& b, double radius, std::uint32_t segments,
                            std::uint32_t cap_stacks = 2, std::uint32_t side_stacks = 2) {
    if (!(radius > 0.0)) throw Error("capsule radius must be positive");
    if (segments < 3) throw Error("capsule needs >= 3 ring segments");
    Vec3 axis = b - a;
    const double len = axis.norm();
    if (!(len > 0.0)) throw Error("capsule endpoints coincide");
    const Vec3 d = axis / len;
    // orthonormal frame around d
    Vec3 ref = std::abs(d.x) < 0.9 ? Vec3{1, 0, 0} : Vec3{0, 1, 0};
    const Vec3 e1_dir = d.cross(ref);
    const Vec3 e1 = e1_dir / e1_dir.norm();
    const Vec3 e2 = d.cross(e1);

    std::vector<Vec3> verts;
    std::vector<std::vector<std::uint32_t>> rings;
    auto add_ring = [&](const Vec3& center, double r) {
        std::vector<std::uint32_t> ring(segments);
        for (std::uint32_t s = 0; s < segments; ++s) {
            const double t = 2.0 * kPi * double(s) / segments;
            verts.push_back(center + e1 * (r * std::cos(t)) + e2 * (r * std::sin(t)));
            ring[s] = std::uint32_t(verts.size() - 1);
        }
        rings.push_back(std::move(ring));
    };

    verts.push_back(b + d * radius);  // top pole
    const std::uint32_t top_pole = 0;
    for (std::uint32_t i = 1; i <= cap_stacks; ++i) {
        const double phi = 0.5 * kPi * double(i) / cap_stacks;
        add_ring(b + d * (radius * std::cos(phi)), radius * std::sin(phi));
    }
    for (std::uint32_t j = 1; j <= side_stacks; ++j)
        add_ring(b + (a - b) * (double(j) / side_stacks), radius);
    for (std::uint32_t i = 1; i < cap_stacks; ++i) {
        const double phi = 0.5 * kPi + 0.5 * kPi * double(i) / cap_stacks;
        add_ring(a + d * (radius * std::cos(phi)), radius * std::sin(phi));
    }
    verts.push_back(a - d * radius);  // bottom pole
    const auto bottom_pole = std::uint32_t(verts.size() - 1);

    auto seg_point = [&](const Vec3& p) {  // closest point on the core segment
        const double t = std::clamp((p - a).dot(d), 0.0, len);
        return a + d * t;
    };

    std::vector<std::array<std::uint32_t, 3>> faces;
    auto outward_of = [&](std::uint32_t ia, std::uint32_t ib, std::uint32_t ic) {
        const Vec3 centroid = (verts[ia] + verts[ib] + verts[ic]) / 3.0;
        return centroid - seg_point(centroid);
    };
    for (std::uint32_t s = 0; s < segments; ++s) {
        const std::uint32_t sn = (s + 1) % segments;
        detail::push_oriented(faces, verts, top_pole, rings.front()[s], rings.front()[sn],
                              outward_of(top_pole, rings.front()[s], rings.front()[sn]));
        detail::push_oriented(faces, verts, bottom_pole, rings.back()[s], rings.back()[sn],
                              outward_of(bottom_pole, rings.back()[s], rings.back()[sn]));
    }
    for (std::size_t r = 0; r + 1 < rings.size(); ++r) {
        for (std::uint32_t s = 0; s < segments; ++s) {
            const std::uint32_t sn = (s + 1) % segments;
            const std::uint32_t a0 = rings[r][s], a1 = rings[r][sn];
            const std::uint32_t b0 = rings[r + 1][s], b1 = rings[r + 1][sn];
            detail::push_oriented(faces, verts, a0, a1, b1, outward_of(a0, a1, b1));
            detail::push_oriented(faces, verts, a0, b1, b0, outward_of(a0, b1, b0));
        }
    }
    return TriMesh(std::move(verts), std::move(faces));
}

/// Icosphere of the given radius about a center.
inline TriMesh make_icosphere(const Vec3& center, double radius, std::uint32_t subdivisions) {
    if (!(radius > 0.0)) throw Error("sphere radius must be positive");
    const double t = (1.0 + std::sqrt(5.0)) / 2.0;
    std::vector<Vec3> verts = {
        {-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
        {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
    std::vector<std::array<std::uint32_t, 3>> faces = {
        {0, 11, 5}, {0, 5, 1}, {0, 1, 7}, {0, 7, 10}, {0, 10, 11},
        {1, 5, 9}, {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
        {3, 9, 4}, {3, 4, 2}, {3, 2, 6}, {3, 6, 8}, {3, 8, 9},
        {4, 9, 5}, {2, 4, 11}, {6, 2, 10}, {8, 6, 7}, {9, 8, 1}};
    for (Vec3& v : verts) v = v / v.norm();

    for (std::uint32_t level = 0; level < subdivisions; ++level) {
        std::map<std::uint64_t, std::uint32_t> midpoint;
        auto mid = [&](std::uint32_t i, std::uint32_t j) {
            const std::uint64_t key =
                (std::uint64_t(std::min(i, j)) << 32) | std::uint64_t(std::max(i, j));
            auto it = midpoint.find(key);
            if (it != midpoint.end()) return it->second;
            Vec3 m = (verts[i] + verts[j]) * 0.5;
            m = m / m.norm();
            verts.push_back(m);
            const auto idx = std::uint32_t(verts.size() - 1);
            midpoint.emplace(key, idx);
            return idx;
        };
        std::vector<std::array<std::uint32_t, 3>> next;
        next.reserve(faces.size() * 4);
        for (const auto& f : faces) {
            const std::uint32_t m01 = mid(f[0], f[1]);
            const std::uint32_t m12 = mid(f[1], f[2]);
            const std::uint32_t m20 = mid(f[2], f[0]);
            next.push_back({f[0], m01, m20});
            next.push_back({f[1], m12, m01});
            next.push_back({f[2], m20, m12});
            next.push_back({m01, m12, m20});
        }
        faces = std::move(next);
    }
    for (Vec3& v : verts) v = center + v * radius;
    return TriMesh(std::move(verts), std::move(faces));
}

}  // namespace hoikit::geom
