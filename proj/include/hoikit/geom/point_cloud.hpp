#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "hoikit/geom/core.hpp"

namespace hoikit::geom {

/// A nonempty set of 3D points, coordinates in millimeters.
struct PointCloud {
    std::vector<Vec3> points;

    PointCloud() = default;
    explicit PointCloud(std::vector<Vec3> pts) : points(std::move(pts)) { validate(); }

    std::size_t size() const { return points.size(); }
    const Vec3& operator[](std::size_t i) const { return points[i]; }

    void validate() const {
        if (points.empty()) throw Error("point cloud is empty");
        for (const Vec3& p : points)
            if (!is_finite(p)) throw Error("point cloud has non-finite coordinates");
    }

    Aabb bounds() const {
        Aabb box;
        for (const Vec3& p : points) box.expand(p);
        return box;
    }
};

/// Whitespace-separated XYZ text, one point per line.
inline PointCloud read_xyz(std::istream& in) {
    std::vector<Vec3> pts;
    std::string line;
    while (std::getline(in, line)) {
        std::istringstream row(line);
        double x, y, z;
        if (row >> x >> y >> z) pts.push_back({x, y, z});
    }
    return PointCloud(std::move(pts));
}

inline PointCloud read_xyz_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open point cloud file: " + path);
    return read_xyz(in);
}

inline void write_xyz(std::ostream& out, const PointCloud& cloud) {
    out.precision(17);
    for (const Vec3& p : cloud.points)
        out << p.x << ' ' << p.y << ' ' << p.z << '\n';
}

inline void write_xyz_file(const std::string& path, const PointCloud& cloud) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write point cloud file: " + path);
    write_xyz(out, cloud);
}

}  // namespace hoikit::geom
