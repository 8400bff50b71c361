#pragma once

#include <array>
#include <cmath>
#include <cstddef>

namespace hoikit {

/// Forward-mode dual number carrying N partial derivatives. Arithmetic is
/// overloaded just far enough for the kinematics and loss expressions;
/// branching (abs, comparisons) keys off the value, which matches the
/// fixed-structure treatment of the losses.
template <std::size_t N>
struct Dual {
    double v = 0.0;
    std::array<double, N> d{};

    Dual() = default;
    Dual(double value) : v(value) {}
    Dual(int value) : v(double(value)) {}

    static Dual seed(double value, std::size_t index) {
        Dual out(value);
        out.d[index] = 1.0;
        return out;
    }

    Dual operator-() const {
        Dual out(-v);
        for (std::size_t i = 0; i < N; ++i) out.d[i] = -d[i];
        return out;
    }

    Dual& operator+=(const Dual& o) {
        v += o.v;
        for (std::size_t i = 0; i < N; ++i) d[i] += o.d[i];
        return *this;
    }
    Dual& operator-=(const Dual& o) {
        v -= o.v;
        for (std::size_t i = 0; i < N; ++i) d[i] -= o.d[i];
        return *this;
    }

    friend Dual operator+(Dual a, const Dual& b) { return a += b; }
    friend Dual operator-(Dual a, const Dual& b) { return a -= b; }

    friend Dual operator*(const Dual& a, const Dual& b) {
        Dual out(a.v * b.v);
        for (std::size_t i = 0; i < N; ++i) out.d[i] = a.d[i] * b.v + a.v * b.d[i];
        return out;
    }
    friend Dual operator*(const Dual& a, double s) {
        Dual out(a.v * s);
        for (std::size_t i = 0; i < N; ++i) out.d[i] = a.d[i] * s;
        return out;
    }
    friend Dual operator*(double s, const Dual& a) { return a * s; }

    friend Dual operator/(const Dual& a, const Dual& b) {
        Dual out(a.v / b.v);
        const double inv = 1.0 / (b.v * b.v);
        for (std::size_t i = 0; i < N; ++i) out.d[i] = (a.d[i] * b.v - a.v * b.d[i]) * inv;
        return out;
    }
    friend Dual operator/(const Dual& a, double s) { return a * (1.0 / s); }
    friend Dual operator/(double s, const Dual& b) { return Dual(s) / b; }

    friend bool operator<(const Dual& a, const Dual& b) { return a.v < b.v; }
    friend bool operator>(const Dual& a, const Dual& b) { return a.v > b.v; }
    friend bool operator<=(const Dual& a, const Dual& b) { return a.v <= b.v; }
    friend bool operator>=(const Dual& a, const Dual& b) { return a.v >= b.v; }
};

template <std::size_t N>
double value_of(const Dual<N>& s) { return s.v; }

template <std::size_t N>
Dual<N> sqrt(const Dual<N>& a) {
    Dual<N> out(std::sqrt(a.v));
    const double scale = a.v > 0.0 ? 0.5 / out.v : 0.0;  // flat subgradient at 0
    for (std::size_t i = 0; i < N; ++i) out.d[i] = a.d[i] * scale;
    return out;
}

template <std::size_t N>
Dual<N> sin(const Dual<N>& a) {
    Dual<N> out(std::sin(a.v));
    const double c = std::cos(a.v);
    for (std::size_t i = 0; i < N; ++i) out.d[i] = a.d[i] * c;
    return out;
}

template <std::size_t N>
Dual<N> cos(const Dual<N>& a) {
    Dual<N> out(std::cos(a.v));
    const double s = -std::sin(a.v);
    for (std::size_t i = 0; i < N; ++i) out.d[i] = a.d[i] * s;
    return out;
}

template <std::size_t N>
Dual<N> abs(const Dual<N>& a) {
    if (a.v > 0.0) return a;
    if (a.v < 0.0) return -a;
    return Dual<N>(0.0);  // subgradient 0 at the kink
}

}  // namespace hoikit
