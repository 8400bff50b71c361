#pragma once

#include <cmath>

#include "hoikit/geom/trimesh.hpp"

namespace hoikit::geom {

/// Solid angle subtended by triangle (a,b,c) at the origin-shifted point p,
/// via the van Oosterom-Strackee formula.
inline double triangle_solid_angle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
    const Vec3 u = a - p, v = b - p, w = c - p;
    const double lu = u.norm(), lv = v.norm(), lw = w.norm();
    const double det = u.dot(v.cross(w));
    const double denom = lu * lv * lw + u.dot(v) * lw + v.dot(w) * lu + w.dot(u) * lv;
    return 2.0 * std::atan2(det, denom);
}

/// Generalized winding number of the mesh around p (1 inside a closed
/// surface, 0 outside; fractional near open boundaries).
inline double winding_number(const TriMesh& mesh, const Vec3& p) {
    double total = 0.0;
    for (const auto& f : mesh.faces)
        total += triangle_solid_angle(p, mesh.vertices[f[0]], mesh.vertices[f[1]],
                                      mesh.vertices[f[2]]);
    return total / (4.0 * kPi);
}

/// Inside test for a watertight mesh: winding number above 1/2.
inline bool point_inside_mesh(const TriMesh& mesh, const Vec3& p) {
    mesh.require_watertight();
    return winding_number(mesh, p) > 0.5;
}

/// Closest point on triangle (a,b,c) to p (Ericson, Real-Time Collision
/// Detection, 5.1.5).
inline Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
    const Vec3 ab = b - a, ac = c - a, ap = p - a;
    const double d1 = ab.dot(ap), d2 = ac.dot(ap);
    if (d1 <= 0.0 && d2 <= 0.0) return a;

    const Vec3 bp = p - b;
    const double d3 = ab.dot(bp), d4 = ac.dot(bp);
    if (d3 >= 0.0 && d4 <= d3) return b;

    const double vc = d1 * d4 - d3 * d2;
    if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) return a + ab * (d1 / (d1 - d3));

    const Vec3 cp = p - c;
    const double d5 = ab.dot(cp), d6 = ac.dot(cp);
    if (d6 >= 0.0 && d5 <= d6) return c;

    const double vb = d5 * d2 - d1 * d6;
    if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) return a + ac * (d2 / (d2 - d6));

    const double va = d3 * d6 - d5 * d4;
    if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0)
        return b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6)));

    const double denom = 1.0 / (va + vb + vc);
    return a + ab * (vb * denom) + ac * (vc * denom);
}

struct SurfacePoint {
    Vec3 point{};
    std::uint32_t face = 0;
};

/// Closest point on the mesh surface to p, by exhaustive face scan.
inline SurfacePoint closest_surface_point_ex(const TriMesh& mesh, const Vec3& p) {
    if (mesh.faces.empty()) throw Error("closest_surface_point on empty mesh");
    SurfacePoint best;
    double best_d2 = std::numeric_limits<double>::infinity();
    for (std::uint32_t fi = 0; fi < mesh.faces.size(); ++fi) {
        const auto& f = mesh.faces[fi];
        const Vec3 q = closest_point_on_triangle(p, mesh.vertices[f[0]], mesh.vertices[f[1]],
                                                 mesh.vertices[f[2]]);
        const double d2 = squared_distance(p, q);
        if (d2 < best_d2) {
            best_d2 = d2;
            best = {q, fi};
        }
    }
    return best;
}

inline Vec3 closest_surface_point(const TriMesh& mesh, const Vec3& p) {
    return closest_surface_point_ex(mesh, p).point;
}

inline double distance_to_surface(const TriMesh& mesh, const Vec3& p) {
    return distance(p, closest_surface_point(mesh, p));
}

}  // namespace hoikit::geom
