#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <array>
#include <cmath>
#include <vector>

#include "hoikit/geom/core.hpp"
#include "hoikit/rng.hpp"

namespace hoikit::geom {

struct Vec2 {
    double x = 0.0, y = 0.0;
};

/// 2x3 affine map from source pixel coordinates to destination pixel
/// coordinates, row-major.
struct Affine2 {
    // [ a b c ]   maps (x, y) -> (a x + b y + c, d x + e y + f)
    // [ d e f ]
    std::array<std::array<double, 3>, 2> m{{{1, 0, 0}, {0, 1, 0}}};

    static Affine2 identity() { return {}; }
    static Affine2 translation(double tx, double ty) {
        Affine2 a;
        a.m[0][2] = tx;
        a.m[1][2] = ty;
        return a;
    }
    static Affine2 rotation_deg(double deg) {
        const double r = deg * kPi / 180.0;
        Affine2 a;
        a.m[0][0] = std::cos(r); a.m[0][1] = -std::sin(r);
        a.m[1][0] = std::sin(r); a.m[1][1] = std::cos(r);
        return a;
    }

    Vec2 apply(const Vec2& p) const {
        return {m[0][0] * p.x + m[0][1] * p.y + m[0][2],
                m[1][0] * p.x + m[1][1] * p.y + m[1][2]};
    }

    double det_linear() const { return m[0][0] * m[1][1] - m[0][1] * m[1][0]; }

    Affine2 compose(const Affine2& inner) const {  // this ∘ inner
        Affine2 r;
        for (int i = 0; i < 2; ++i) {
            r.m[i][0] = m[i][0] * inner.m[0][0] + m[i][1] * inner.m[1][0];
            r.m[i][1] = m[i][0] * inner.m[0][1] + m[i][1] * inner.m[1][1];
            r.m[i][2] = m[i][0] * inner.m[0][2] + m[i][1] * inner.m[1][2] + m[i][2];
        }
        return r;
    }

    Affine2 inverse() const {
        const double det = det_linear();
        if (det == 0.0) throw Error("singular linear part");
        const double ia = m[1][1] / det, ib = -m[0][1] / det;
        const double id = -m[1][0] / det, ie = m[0][0] / det;
        Affine2 r;
        r.m[0][0] = ia; r.m[0][1] = ib; r.m[0][2] = -(ia * m[0][2] + ib * m[1][2]);
        r.m[1][0] = id; r.m[1][1] = ie; r.m[1][2] = -(id * m[0][2] + ie * m[1][2]);
        return r;
    }

    void validate() const {
        for (const auto& row : m)
            for (double v : row)
                if (!std::isfinite(v)) throw Error("affine has non-finite entries");
        if (det_linear() == 0.0) throw Error("singular linear part");
    }
};

namespace detail {

/// Exact affine through three correspondences; solves the two 3x3 systems.
inline bool solve_affine_3pt(const std::array<Vec2, 3>& src, const std::array<Vec2, 3>& dst,
                             Affine2& out) {
    Eigen::Matrix3d M;
    for (int i = 0; i < 3; ++i) M.row(i) << src[i].x, src[i].y, 1.0;
    Eigen::FullPivLU<Eigen::Matrix3d> lu(M);
    if (!lu.isInvertible()) return false;
    const Eigen::Vector3d bx(dst[0].x, dst[1].x, dst[2].x);
    const Eigen::Vector3d by(dst[0].y, dst[1].y, dst[2].y);
    const Eigen::Vector3d rx = lu.solve(bx);
    const Eigen::Vector3d ry = lu.solve(by);
    out.m[0] = {rx[0], rx[1], rx[2]};
    out.m[1] = {ry[0], ry[1], ry[2]};
    return true;
}

/// Least-squares affine over a point subset via normal equations.
inline bool fit_affine_lsq(const std::vector<Vec2>& src, const std::vector<Vec2>& dst,
                           const std::vector<std::uint32_t>& subset, Affine2& out) {
    Eigen::Matrix3d ata = Eigen::Matrix3d::Zero();
    Eigen::Vector3d atx = Eigen::Vector3d::Zero();
    Eigen::Vector3d aty = Eigen::Vector3d::Zero();
    for (std::uint32_t i : subset) {
        const Eigen::Vector3d row(src[i].x, src[i].y, 1.0);
        ata += row * row.transpose();
        atx += row * dst[i].x;
        aty += row * dst[i].y;
    }
    Eigen::FullPivLU<Eigen::Matrix3d> lu(ata);
    if (!lu.isInvertible()) return false;
    const Eigen::Vector3d rx = lu.solve(atx);
    const Eigen::Vector3d ry = lu.solve(aty);
    out.m[0] = {rx[0], rx[1], rx[2]};
    out.m[1] = {ry[0], ry[1], ry[2]};
    return true;
}

}  // namespace detail

struct RansacResult {
    Affine2 affine;
    std::uint32_t inliers = 0;
};

/// RANSAC affine estimation over 2D correspondences. Minimal samples of
/// three points are rejected when near-collinear (triangle height below
/// 1e-6 of the source bounding-box diagonal); the winner is refit by least
/// squares on its inliers and inliers are recounted against the refit model.
inline RansacResult estimate_affine_ransac(const std::vector<Vec2>& src,
                                           const std::vector<Vec2>& dst, int iterations,
                                           double inlier_tol, std::uint64_t seed) {
    if (src.size() != dst.size()) throw Error("correspondence lists differ in length");
    if (src.size() < 3) throw Error("underdetermined");
    if (iterations < 1) throw Error("ransac iterations must be >= 1");

    double lo_x = src[0].x, hi_x = src[0].x, lo_y = src[0].y, hi_y = src[0].y;
    for (const Vec2& p : src) {
        lo_x = std::min(lo_x, p.x); hi_x = std::max(hi_x, p.x);
        lo_y = std::min(lo_y, p.y); hi_y = std::max(hi_y, p.y);
    }
    const double diag = std::hypot(hi_x - lo_x, hi_y - lo_y);
    const double n = double(src.size());

    Rng rng = Rng::substream(seed, "ransac");
    const double tol2 = inlier_tol * inlier_tol;

    auto count_inliers = [&](const Affine2& a, std::vector<std::uint32_t>* keep) {
        std::uint32_t count = 0;
        for (std::uint32_t i = 0; i < src.size(); ++i) {
            const Vec2 p = a.apply(src[i]);
            const double dx = p.x - dst[i].x, dy = p.y - dst[i].y;
            if (dx * dx + dy * dy < tol2) {
                ++count;
                if (keep) keep->push_back(i);
            }
        }
        return count;
    };

    bool found = false;
    Affine2 best;
    std::uint32_t best_inliers = 0;
    for (int it = 0; it < iterations; ++it) {
        std::uint32_t ia = std::uint32_t(rng.uniform_index(std::uint64_t(n)));
        std::uint32_t ib, ic;
        do { ib = std::uint32_t(rng.uniform_index(std::uint64_t(n))); } while (ib == ia);
        do { ic = std::uint32_t(rng.uniform_index(std::uint64_t(n))); } while (ic == ia || ic == ib);
        const std::array<Vec2, 3> s{src[ia], src[ib], src[ic]};
        const std::array<Vec2, 3> d{dst[ia], dst[ib], dst[ic]};

        const double ux = s[1].x - s[0].x, uy = s[1].y - s[0].y;
        const double vx = s[2].x - s[0].x, wy = s[2].y - s[0].y;
        const double cross = std::abs(ux * wy - uy * vx);
        const double max_edge =
            std::max({std::hypot(ux, uy), std::hypot(vx, wy),
                      std::hypot(s[2].x - s[1].x, s[2].y - s[1].y)});
        if (cross <= 1e-6 * diag * max_edge) continue;  // collinear sample

        Affine2 candidate;
        if (!detail::solve_affine_3pt(s, d, candidate)) continue;
        const std::uint32_t inl = count_inliers(candidate, nullptr);
        if (!found || inl > best_inliers) {
            found = true;
            best = candidate;
            best_inliers = inl;
        }
    }
    if (!found) throw Error("degenerate correspondences");

    std::vector<std::uint32_t> inlier_set;
    count_inliers(best, &inlier_set);
    if (inlier_set.size() >= 3) {
        Affine2 refit;
        if (detail::fit_affine_lsq(src, dst, inlier_set, refit)) best = refit;
    }
    return {best, count_inliers(best, nullptr)};
}

/// Rotation angle of the affine's linear block in degrees, in (-180, 180]:
/// polar factor via SVD (R = U V^T), then atan2 of the first column.
inline double rotation_angle_from_affine(const Affine2& a) {
    Eigen::Matrix2d linear;
    linear << a.m[0][0], a.m[0][1], a.m[1][0], a.m[1][1];
    const double det = linear.determinant();
    const double scale = linear.cwiseAbs().maxCoeff();
    if (!(std::abs(det) > 1e-14 * std::max(1.0, scale * scale)))
        throw Error("singular linear part");
    Eigen::JacobiSVD<Eigen::Matrix2d> svd(linear, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Eigen::Matrix2d rot = svd.matrixU() * svd.matrixV().transpose();
    return std::atan2(rot(1, 0), rot(0, 0)) * 180.0 / kPi;
}

}  // namespace hoikit::geom
