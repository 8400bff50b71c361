#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "hoikit/geom/affine2.hpp"

namespace hoikit::geom {

/// Dense binary raster. Pixel (x, y) lives at bits[y*width + x].
struct BinaryMask {
    std::uint32_t width = 0, height = 0;
    std::vector<std::uint8_t> bits;

    BinaryMask() = default;
    BinaryMask(std::uint32_t w, std::uint32_t h) : width(w), height(h), bits(w * h, 0) {}

    std::uint8_t at(std::uint32_t x, std::uint32_t y) const { return bits[y * width + x]; }
    void set(std::uint32_t x, std::uint32_t y, bool v = true) { bits[y * width + x] = v ? 1 : 0; }

    std::size_t count() const {
        std::size_t c = 0;
        for (auto b : bits) c += b != 0;
        return c;
    }
    bool empty_mask() const { return count() == 0; }

    bool operator==(const BinaryMask& o) const {
        return width == o.width && height == o.height && bits == o.bits;
    }
};

/// |a ∩ b| / |a ∪ b|; both-empty counts as perfect agreement.
inline double mask_iou(const BinaryMask& a, const BinaryMask& b) {
    if (a.width != b.width || a.height != b.height)
        throw Error("mask dimensions differ");
    std::size_t inter = 0, uni = 0;
    for (std::size_t i = 0; i < a.bits.size(); ++i) {
        const bool pa = a.bits[i] != 0, pb = b.bits[i] != 0;
        inter += pa && pb;
        uni += pa || pb;
    }
    if (uni == 0) return 1.0;
    return double(inter) / double(uni);
}

/// Nearest-neighbor warp of a mask by an affine (source -> destination
/// pixels). Destination pixels whose preimage falls outside the source are 0.
inline BinaryMask warp_mask(const BinaryMask& mask, const Affine2& a, std::uint32_t out_w,
                            std::uint32_t out_h) {
    a.validate();
    const Affine2 inv = a.inverse();
    BinaryMask out(out_w, out_h);
    for (std::uint32_t y = 0; y < out_h; ++y) {
        for (std::uint32_t x = 0; x < out_w; ++x) {
            const Vec2 s = inv.apply({double(x), double(y)});
            const long sx = std::lround(s.x), sy = std::lround(s.y);
            if (sx < 0 || sy < 0 || sx >= long(mask.width) || sy >= long(mask.height)) continue;
            if (mask.at(std::uint32_t(sx), std::uint32_t(sy))) out.set(x, y);
        }
    }
    return out;
}

/// Binary dilation with a square structuring element of the given radius,
/// done as separable horizontal+vertical passes.
inline BinaryMask dilate(const BinaryMask& mask, std::uint32_t radius) {
    if (radius == 0) return mask;
    const int r = int(radius);
    BinaryMask horiz(mask.width, mask.height);
    for (std::uint32_t y = 0; y < mask.height; ++y)
        for (std::uint32_t x = 0; x < mask.width; ++x) {
            bool hit = false;
            for (int dx = -r; dx <= r && !hit; ++dx) {
                const long sx = long(x) + dx;
                if (sx >= 0 && sx < long(mask.width)) hit = mask.at(std::uint32_t(sx), y) != 0;
            }
            if (hit) horiz.set(x, y);
        }
    BinaryMask out(mask.width, mask.height);
    for (std::uint32_t y = 0; y < mask.height; ++y)
        for (std::uint32_t x = 0; x < mask.width; ++x) {
            bool hit = false;
            for (int dy = -r; dy <= r && !hit; ++dy) {
                const long sy = long(y) + dy;
                if (sy >= 0 && sy < long(mask.height)) hit = horiz.at(x, std::uint32_t(sy)) != 0;
            }
            if (hit) out.set(x, y);
        }
    return out;
}

/// Binary PGM (P5): any nonzero sample reads as set; set pixels write 255.
inline BinaryMask read_pgm(std::istream& in) {
    auto next_token = [&]() -> std::string {
        std::string tok;
        int c;
        while ((c = in.get()) != EOF) {
            if (c == '#') {
                while ((c = in.get()) != EOF && c != '\n') {}
                continue;
            }
            if (std::isspace(c)) {
                if (!tok.empty()) break;
                continue;
            }
            tok.push_back(char(c));
        }
        return tok;
    };
    if (next_token() != "P5") throw Error("not a P5 PGM stream");
    const std::string ws = next_token(), hs = next_token(), ms = next_token();
    if (ws.empty() || hs.empty() || ms.empty()) throw Error("truncated PGM header");
    const long w = std::stol(ws), h = std::stol(hs), maxval = std::stol(ms);
    if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 255) throw Error("unsupported PGM header");
    BinaryMask mask{std::uint32_t(w), std::uint32_t(h)};
    std::vector<char> row(static_cast<std::size_t>(w));
    for (long y = 0; y < h; ++y) {
        in.read(row.data(), w);
        if (in.gcount() != w) throw Error("truncated PGM payload");
        for (long x = 0; x < w; ++x)
            if (row[std::size_t(x)] != 0) mask.set(std::uint32_t(x), std::uint32_t(y));
    }
    return mask;
}

inline BinaryMask read_pgm_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open mask file: " + path);
    return read_pgm(in);
}

inline void write_pgm(std::ostream& out, const BinaryMask& mask) {
    out << "P5\n" << mask.width << ' ' << mask.height << "\n255\n";
    std::vector<char> row(mask.width);
    for (std::uint32_t y = 0; y < mask.height; ++y) {
        for (std::uint32_t x = 0; x < mask.width; ++x)
            row[x] = mask.at(x, y) ? char(255) : char(0);
        out.write(row.data(), mask.width);
    }
}

inline void write_pgm_file(const std::string& path, const BinaryMask& mask) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write mask file: " + path);
    write_pgm(out, mask);
}

}  // namespace hoikit::geom
