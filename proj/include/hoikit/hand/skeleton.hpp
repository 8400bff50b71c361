#pragma once

#include <array>
#include <cstdint>

namespace hoikit::hand {

// 21-joint convention: wrist, then per finger (thumb, index, middle, ring,
// pinky) the chain mcp -> pip -> dip -> tip. Sixteen skinned bones: the
// wrist/palm root plus three phalanges per finger; fingertips are terminal
// joints without degrees of freedom.
inline constexpr int kNumJoints = 21;
inline constexpr int kNumFingers = 5;
inline constexpr int kNumBones = 16;
inline constexpr int kNumArticulated = 15;
inline constexpr int kPoseDof = kNumArticulated * 3;

inline constexpr int joint_index(int finger, int along) {  // along: 0=mcp..3=tip
    return 1 + finger * 4 + along;
}
inline constexpr int bone_index(int finger, int phalanx) {  // phalanx: 0..2
    return 1 + finger * 3 + phalanx;
}
inline constexpr int bone_joint(int bone) {  // joint the bone articulates at
    return bone == 0 ? 0 : joint_index((bone - 1) / 3, (bone - 1) % 3);
}
inline constexpr int bone_parent(int bone) {
    return bone == 0 ? -1 : ((bone - 1) % 3 == 0 ? 0 : bone - 1);
}
inline constexpr int bone_finger(int bone) { return bone == 0 ? -1 : (bone - 1) / 3; }

inline constexpr std::array<int, kNumJoints> joint_parents() {
    std::array<int, kNumJoints> p{};
    p[0] = -1;
    for (int f = 0; f < kNumFingers; ++f)
        for (int s = 0; s < 4; ++s)
            p[joint_index(f, s)] = s == 0 ? 0 : joint_index(f, s - 1);
    return p;
}

}  // namespace hoikit::hand
