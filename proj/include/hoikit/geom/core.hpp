#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>

namespace hoikit {

/// Base error type for all operations in this library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

inline constexpr double kPi = 3.14159265358979323846;

namespace geom {

/// 3-vector templated on scalar type so kinematics and losses can run on
/// plain doubles or on forward-mode dual numbers.
template <class S>
struct Vec3T {
    S x{}, y{}, z{};

    Vec3T() = default;
    Vec3T(S x_, S y_, S z_) : x(x_), y(y_), z(z_) {}

    Vec3T operator+(const Vec3T& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3T operator-(const Vec3T& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3T operator-() const { return {-x, -y, -z}; }
    Vec3T& operator+=(const Vec3T& o) { x += o.x; y += o.y; z += o.z; return *this; }
    Vec3T& operator-=(const Vec3T& o) { x -= o.x; y -= o.y; z -= o.z; return *this; }

    template <class T>
    Vec3T operator*(T s) const { return {x * s, y * s, z * s}; }
    template <class T>
    Vec3T operator/(T s) const { return {x / s, y / s, z / s}; }

    S dot(const Vec3T& o) const { return x * o.x + y * o.y + z * o.z; }
    Vec3T cross(const Vec3T& o) const {
        return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
    }
    S squared_norm() const { return x * x + y * y + z * z; }
    S norm() const { using std::sqrt; return sqrt(squared_norm()); }
};

template <class S, class T>
Vec3T<S> operator*(T s, const Vec3T<S>& v) { return v * s; }

using Vec3 = Vec3T<double>;

inline bool is_finite(const Vec3& v) {
    return std::isfinite(v.x) && std::isfinite(v.y) && std::isfinite(v.z);
}

template <class S>
S squared_distance(const Vec3T<S>& a, const Vec3T<S>& b) {
    const S dx = a.x - b.x, dy = a.y - b.y, dz = a.z - b.z;
    return dx * dx + dy * dy + dz * dz;
}

template <class S>
S distance(const Vec3T<S>& a, const Vec3T<S>& b) {
    using std::sqrt;
    return sqrt(squared_distance(a, b));
}

/// Row-major 3x3 matrix over scalar S.
template <class S>
struct Mat3T {
    std::array<std::array<S, 3>, 3> m{};

    static Mat3T identity() {
        Mat3T r;
        r.m[0][0] = S(1); r.m[1][1] = S(1); r.m[2][2] = S(1);
        return r;
    }

    Vec3T<S> operator*(const Vec3T<S>& v) const {
        return {m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
                m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
                m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z};
    }

    Mat3T operator*(const Mat3T& o) const {
        Mat3T r;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                r.m[i][j] = m[i][0] * o.m[0][j] + m[i][1] * o.m[1][j] + m[i][2] * o.m[2][j];
        return r;
    }

    Mat3T transposed() const {
        Mat3T r;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                r.m[i][j] = m[j][i];
        return r;
    }
};

using Mat3 = Mat3T<double>;

/// value_of extracts the double value of a scalar; the dual-number overload
/// lives next to the dual type.
inline double value_of(double s) { return s; }

/// Rodrigues rotation from an axis-angle vector, with a series expansion
/// near zero so the result stays smooth for derivative propagation.
template <class S>
Mat3T<S> rotation_from_axis_angle(const Vec3T<S>& aa) {
    using std::sqrt; using std::sin; using std::cos;
    const S theta2 = aa.squared_norm();
    S a;  // sin(t)/t
    S b;  // (1-cos(t))/t^2
    if (value_of(theta2) < 1e-12) {
        a = S(1) - theta2 / S(6);
        b = S(0.5) - theta2 / S(24);
    } else {
        const S theta = sqrt(theta2);
        a = sin(theta) / theta;
        b = (S(1) - cos(theta)) / theta2;
    }
    const S kx = aa.x, ky = aa.y, kz = aa.z;
    Mat3T<S> r;
    r.m[0][0] = S(1) + b * (-kz * kz - ky * ky);
    r.m[0][1] = -a * kz + b * kx * ky;
    r.m[0][2] = a * ky + b * kx * kz;
    r.m[1][0] = a * kz + b * kx * ky;
    r.m[1][1] = S(1) + b * (-kz * kz - kx * kx);
    r.m[1][2] = -a * kx + b * ky * kz;
    r.m[2][0] = -a * ky + b * kx * kz;
    r.m[2][1] = a * kx + b * ky * kz;
    r.m[2][2] = S(1) + b * (-ky * ky - kx * kx);
    return r;
}

/// Axis-aligned bounding box.
struct Aabb {
    Vec3 lo{std::numeric_limits<double>::infinity(),
            std::numeric_limits<double>::infinity(),
            std::numeric_limits<double>::infinity()};
    Vec3 hi{-std::numeric_limits<double>::infinity(),
            -std::numeric_limits<double>::infinity(),
            -std::numeric_limits<double>::infinity()};

    void expand(const Vec3& p) {
        lo.x = std::min(lo.x, p.x); lo.y = std::min(lo.y, p.y); lo.z = std::min(lo.z, p.z);
        hi.x = std::max(hi.x, p.x); hi.y = std::max(hi.y, p.y); hi.z = std::max(hi.z, p.z);
    }
    bool contains(const Vec3& p) const {
        return p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y &&
               p.z >= lo.z && p.z <= hi.z;
    }
    Vec3 extent() const { return hi - lo; }
    double diagonal() const { return extent().norm(); }
};

}  // namespace geom
}  // namespace hoikit
