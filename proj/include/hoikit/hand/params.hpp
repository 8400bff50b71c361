#pragma once

#include <array>
#include <json.hpp>

#include "hoikit/geom/core.hpp"
#include "hoikit/hand/skeleton.hpp"

namespace hoikit::hand {

/// Pose and shape of the parametric hand: global rigid placement, one
/// axis-angle per articulated bone, and six length scales (global plus one
/// per finger).
struct HandParams {
    geom::Vec3 global_rot{0, 0, 0};               // axis-angle, radians
    geom::Vec3 trans{0, 0, 0};                    // mm
    std::array<geom::Vec3, kNumArticulated> pose{};  // axis-angle per bone, radians
    std::array<double, 6> shape{1, 1, 1, 1, 1, 1};

    void validate() const {
        if (!geom::is_finite(global_rot) || !geom::is_finite(trans))
            throw Error("hand params have non-finite entries");
        for (const auto& p : pose)
            if (!geom::is_finite(p)) throw Error("hand params have non-finite entries");
        for (double s : shape) {
            if (!std::isfinite(s)) throw Error("hand params have non-finite entries");
            if (s < 0.5 || s > 2.0) throw Error("shape scale outside [0.5, 2.0]");
        }
    }
};

inline nlohmann::ordered_json to_json(const HandParams& p) {
    nlohmann::ordered_json j;
    j["global_rot"] = {p.global_rot.x, p.global_rot.y, p.global_rot.z};
    j["trans"] = {p.trans.x, p.trans.y, p.trans.z};
    auto& pose = j["pose"] = nlohmann::ordered_json::array();
    for (const auto& aa : p.pose) pose.push_back({aa.x, aa.y, aa.z});
    j["shape"] = p.shape;
    return j;
}

inline HandParams hand_params_from_json(const nlohmann::json& j) {
    HandParams p;
    auto vec3 = [](const nlohmann::json& a) {
        if (!a.is_array() || a.size() != 3) throw Error("expected a 3-vector");
        return geom::Vec3{a[0].get<double>(), a[1].get<double>(), a[2].get<double>()};
    };
    p.global_rot = vec3(j.at("global_rot"));
    p.trans = vec3(j.at("trans"));
    const auto& pose = j.at("pose");
    if (!pose.is_array() || pose.size() != kNumArticulated)
        throw Error("pose must have 15 axis-angle entries");
    for (int b = 0; b < kNumArticulated; ++b) p.pose[b] = vec3(pose[b]);
    const auto& shape = j.at("shape");
    if (!shape.is_array() || shape.size() != 6) throw Error("shape must have 6 scales");
    for (int i = 0; i < 6; ++i) p.shape[i] = shape[i].get<double>();
    p.validate();
    return p;
}

}  // namespace hoikit::hand
