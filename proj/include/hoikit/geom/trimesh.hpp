#pragma once

#include <array>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "hoikit/geom/core.hpp"
#include "hoikit/geom/point_cloud.hpp"
#include "hoikit/rng.hpp"

namespace hoikit::geom {

/// Triangle mesh, vertices in millimeters. A mesh may consist of several
/// closed components; it counts as watertight when every undirected edge is
/// shared by exactly two faces with opposite orientation.
struct TriMesh {
    std::vector<Vec3> vertices;
    std::vector<std::array<std::uint32_t, 3>> faces;

    TriMesh() = default;
    TriMesh(std::vector<Vec3> verts, std::vector<std::array<std::uint32_t, 3>> tris)
        : vertices(std::move(verts)), faces(std::move(tris)) {
        validate();
    }

    void validate() const {
        for (const auto& f : faces) {
            for (auto idx : f)
                if (idx >= vertices.size()) throw Error("face index out of range");
            if (f[0] == f[1] || f[1] == f[2] || f[0] == f[2])
                throw Error("degenerate face");
        }
        for (const Vec3& v : vertices)
            if (!is_finite(v)) throw Error("mesh has non-finite coordinates");
    }

    bool is_watertight() const {
        if (!watertight_) watertight_ = compute_watertight();
        return *watertight_;
    }

    void require_watertight(const char* what = "open surface") const {
        if (!is_watertight()) throw Error(what);
    }

    Aabb bounds() const {
        Aabb box;
        for (const Vec3& v : vertices) box.expand(v);
        return box;
    }

    double surface_area() const {
        double area = 0.0;
        for (const auto& f : faces) {
            const Vec3 e1 = vertices[f[1]] - vertices[f[0]];
            const Vec3 e2 = vertices[f[2]] - vertices[f[0]];
            area += 0.5 * e1.cross(e2).norm();
        }
        return area;
    }

private:
    bool compute_watertight() const {
        if (faces.empty()) return false;
        // key = undirected edge, value = (forward count, backward count)
        std::unordered_map<std::uint64_t, std::pair<int, int>> edges;
        edges.reserve(faces.size() * 3);
        for (const auto& f : faces) {
            for (int k = 0; k < 3; ++k) {
                const std::uint32_t a = f[k], b = f[(k + 1) % 3];
                const std::uint64_t key =
                    (std::uint64_t(std::min(a, b)) << 32) | std::uint64_t(std::max(a, b));
                auto& [fwd, bwd] = edges[key];
                (a < b ? fwd : bwd)++;
            }
        }
        for (const auto& [key, counts] : edges)
            if (counts.first != 1 || counts.second != 1) return false;
        return true;
    }

    mutable std::optional<bool> watertight_;
};

/// Area-weighted uniform surface sampling.
inline PointCloud sample_surface(const TriMesh& mesh, std::size_t n, Rng& rng) {
    if (n == 0) throw Error("surface sample count must be >= 1");
    if (mesh.faces.empty()) throw Error("cannot sample an empty mesh");
    std::vector<double> cum(mesh.faces.size());
    double total = 0.0;
    for (std::size_t i = 0; i < mesh.faces.size(); ++i) {
        const auto& f = mesh.faces[i];
        const Vec3 e1 = mesh.vertices[f[1]] - mesh.vertices[f[0]];
        const Vec3 e2 = mesh.vertices[f[2]] - mesh.vertices[f[0]];
        total += 0.5 * e1.cross(e2).norm();
        cum[i] = total;
    }
    if (total <= 0.0) throw Error("cannot sample a zero-area mesh");
    std::vector<Vec3> pts;
    pts.reserve(n);
    for (std::size_t s = 0; s < n; ++s) {
        const double r = rng.uniform() * total;
        const auto it = std::lower_bound(cum.begin(), cum.end(), r);
        const std::size_t fi = std::min<std::size_t>(it - cum.begin(), mesh.faces.size() - 1);
        const auto& f = mesh.faces[fi];
        double u = rng.uniform(), v = rng.uniform();
        if (u + v > 1.0) { u = 1.0 - u; v = 1.0 - v; }
        const Vec3 p = mesh.vertices[f[0]] * (1.0 - u - v) + mesh.vertices[f[1]] * u +
                       mesh.vertices[f[2]] * v;
        pts.push_back(p);
    }
    return PointCloud(std::move(pts));
}

/// Wavefront OBJ, triangles only. Face entries may carry /vt/vn suffixes,
/// which are ignored. Negative indices follow the OBJ convention.
inline TriMesh read_obj(std::istream& in) {
    std::vector<Vec3> verts;
    std::vector<std::array<std::uint32_t, 3>> faces;
    std::string line;
    while (std::getline(in, line)) {
        std::istringstream row(line);
        std::string tag;
        if (!(row >> tag)) continue;
        if (tag == "v") {
            double x, y, z;
            if (!(row >> x >> y >> z)) throw Error("malformed OBJ vertex line");
            verts.push_back({x, y, z});
        } else if (tag == "f") {
            std::array<std::uint32_t, 3> tri{};
            std::string entry;
            int k = 0;
            while (row >> entry) {
                if (k >= 3) throw Error("OBJ face is not a triangle");
                const long raw = std::stol(entry.substr(0, entry.find('/')));
                const long resolved = raw > 0 ? raw - 1 : long(verts.size()) + raw;
                if (resolved < 0) throw Error("OBJ face index out of range");
                tri[k++] = std::uint32_t(resolved);
            }
            if (k != 3) throw Error("OBJ face is not a triangle");
            faces.push_back(tri);
        }
    }
    return TriMesh(std::move(verts), std::move(faces));
}

inline TriMesh read_obj_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open mesh file: " + path);
    return read_obj(in);
}

inline void write_obj(std::ostream& out, const TriMesh& mesh) {
    out.precision(17);
    for (const Vec3& v : mesh.vertices) out << "v " << v.x << ' ' << v.y << ' ' << v.z << '\n';
    for (const auto& f : mesh.faces)
        out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
}

inline void write_obj_file(const std::string& path, const TriMesh& mesh) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write mesh file: " + path);
    write_obj(out, mesh);
}

}  // namespace hoikit::geom
