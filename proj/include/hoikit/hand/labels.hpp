#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "hoikit/hand/skeleton.hpp"
#include "hoikit/geom/core.hpp"
#include "hoikit/rng.hpp"

namespace hoikit::hand {

/// Fine-grained hand part: per finger a pad, nail and knuckle region, plus
/// the palmar and dorsal faces of the palm. Values 0..16.
enum class PartLabel17 : std::uint8_t {
    thumb_pad = 0, thumb_nail, thumb_knuckle,
    index_pad, index_nail, index_knuckle,
    middle_pad, middle_nail, middle_knuckle,
    ring_pad, ring_nail, ring_knuckle,
    pinky_pad, pinky_nail, pinky_knuckle,
    palm,
    back_of_palm,
};

inline constexpr int kNumParts = 17;

inline constexpr PartLabel17 part_label(int finger, int kind) {  // kind: 0 pad, 1 nail, 2 knuckle
    return PartLabel17(finger * 3 + kind);
}

/// Coarse 7-category contact label: bits 0..4 are the five finger
/// categories (thumb..pinky), bit 5 palmar, bit 6 dorsal.
struct ContactLabel7 {
    std::uint8_t bits = 0;

    static constexpr int kPalmarBit = 5;
    static constexpr int kDorsalBit = 6;

    bool test(int bit) const { return (bits >> bit) & 1; }
    void set(int bit) { bits |= std::uint8_t(1u << bit); }
    int count() const { return __builtin_popcount(bits); }

    bool operator==(const ContactLabel7&) const = default;
    bool operator<(const ContactLabel7& o) const { return bits < o.bits; }

    std::string to_string() const {  // bit 0 first
        std::string s(7, '0');
        for (int b = 0; b < 7; ++b)
            if (test(b)) s[b] = '1';
        return s;
    }
};

/// Aggregation from the 17 parts to the 7 categories: finger pads and nails
/// collapse onto their finger, knuckles and the back of the palm count as
/// dorsal contact, the palm as palmar.
inline constexpr int aggregate_part(PartLabel17 part) {
    const int raw = int(part);
    if (raw < 15) {
        const int finger = raw / 3, kind = raw % 3;
        return kind == 2 ? ContactLabel7::kDorsalBit : finger;
    }
    return part == PartLabel17::palm ? ContactLabel7::kPalmarBit : ContactLabel7::kDorsalBit;
}

/// Collapses per-vertex contact into the 7-bit label. A category bit fires
/// only once at least min_hits contact vertices map onto it, which filters
/// single-vertex sensing noise.
inline ContactLabel7 contact_label7(std::span<const std::uint8_t> hand_contact,
                                    std::span<const PartLabel17> part_labels, int min_hits = 3) {
    if (hand_contact.size() != part_labels.size())
        throw Error("contact map and part labels differ in length");
    std::array<int, 7> hits{};
    for (std::size_t i = 0; i < hand_contact.size(); ++i)
        if (hand_contact[i]) ++hits[aggregate_part(part_labels[i])];
    ContactLabel7 label;
    for (int b = 0; b < 7; ++b)
        if (hits[b] >= min_hits) label.set(b);
    return label;
}

/// Fine-grained variant: bitmask over the 17 parts, same min_hits rule.
inline std::uint32_t contact_parts17(std::span<const std::uint8_t> hand_contact,
                                     std::span<const PartLabel17> part_labels, int min_hits = 3) {
    if (hand_contact.size() != part_labels.size())
        throw Error("contact map and part labels differ in length");
    std::array<int, kNumParts> hits{};
    for (std::size_t i = 0; i < hand_contact.size(); ++i)
        if (hand_contact[i]) ++hits[int(part_labels[i])];
    std::uint32_t mask = 0;
    for (int p = 0; p < kNumParts; ++p)
        if (hits[p] >= min_hits) mask |= 1u << p;
    return mask;
}

/// With-replacement resampling to a uniform histogram over the distinct
/// label values present: all original indices are kept once (in order), then
/// each class is topped up to the largest class count with seeded draws.
inline std::vector<std::size_t> balance_resample(const std::vector<ContactLabel7>& labels,
                                                 std::uint64_t seed) {
    if (labels.empty()) throw Error("balance_resample on empty label list");
    std::map<std::uint8_t, std::vector<std::size_t>> classes;
    for (std::size_t i = 0; i < labels.size(); ++i) classes[labels[i].bits].push_back(i);
    std::size_t target = 0;
    for (const auto& [bits, members] : classes) target = std::max(target, members.size());

    std::vector<std::size_t> out(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) out[i] = i;
    Rng rng = Rng::substream(seed, "resampling");
    for (const auto& [bits, members] : classes)
        for (std::size_t extra = members.size(); extra < target; ++extra)
            out.push_back(members[rng.uniform_index(members.size())]);
    return out;
}

}  // namespace hoikit::hand
