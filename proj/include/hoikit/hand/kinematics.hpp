#pragma once

#include <array>
#include <vector>

#include "hoikit/hand/hand_template.hpp"
#include "hoikit/hand/params.hpp"

namespace hoikit::hand {

/// Pose parameters over an arbitrary scalar so the same kinematics code
/// serves plain evaluation and derivative propagation. Shape scales stay
/// double: they are frozen during optimization.
template <class S>
struct PoseParamsT {
    geom::Vec3T<S> global_rot{};
    geom::Vec3T<S> trans{};
    std::array<geom::Vec3T<S>, kNumArticulated> pose{};
    std::array<double, 6> shape{1, 1, 1, 1, 1, 1};
};

template <class S>
PoseParamsT<S> lift_params(const HandParams& p) {
    PoseParamsT<S> out;
    out.global_rot = {S(p.global_rot.x), S(p.global_rot.y), S(p.global_rot.z)};
    out.trans = {S(p.trans.x), S(p.trans.y), S(p.trans.z)};
    for (int b = 0; b < kNumArticulated; ++b)
        out.pose[b] = {S(p.pose[b].x), S(p.pose[b].y), S(p.pose[b].z)};
    out.shape = p.shape;
    return out;
}

/// Cumulative bone transforms plus posed joints, already carried into the
/// global frame.
template <class S>
struct BoneTransformsT {
    std::array<geom::Mat3T<S>, kNumBones> rot;
    std::array<geom::Vec3T<S>, kNumBones> pos;
    std::array<geom::Vec3T<S>, kNumJoints> joints;
};

/// Forward kinematics: shape scales stretch the canonical bone offsets, each
/// articulated bone rotates about its proximal joint, and the global rigid
/// motion applies last. Finger scales act within the finger chain; the mcp
/// offsets scale with the global factor only.
template <class S>
BoneTransformsT<S> forward_kinematics(const HandTemplate& tpl, const PoseParamsT<S>& params) {
    BoneTransformsT<S> out;
    auto scaled_offset = [&](int joint) {
        const geom::Vec3 off = tpl.joints0[joint] - tpl.joints0[tpl.parent[joint]];
        double scale = params.shape[0];
        const int within = (joint - 1) % 4;
        if (within > 0) scale *= params.shape[1 + (joint - 1) / 4];
        return geom::Vec3T<S>{S(off.x * scale), S(off.y * scale), S(off.z * scale)};
    };

    out.rot[0] = geom::Mat3T<S>::identity();
    out.pos[0] = {S(tpl.joints0[0].x), S(tpl.joints0[0].y), S(tpl.joints0[0].z)};
    out.joints[0] = out.pos[0];
    for (int b = 1; b < kNumBones; ++b) {
        const int p = bone_parent(b);
        const int joint = bone_joint(b);
        out.rot[b] = out.rot[p] * geom::rotation_from_axis_angle(params.pose[b - 1]);
        out.pos[b] = out.pos[p] + out.rot[p] * scaled_offset(joint);
        out.joints[joint] = out.pos[b];
    }
    for (int f = 0; f < kNumFingers; ++f) {
        const int distal = bone_index(f, 2);
        const int tip = joint_index(f, 3);
        out.joints[tip] = out.pos[distal] + out.rot[distal] * scaled_offset(tip);
    }

    const geom::Mat3T<S> global = geom::rotation_from_axis_angle(params.global_rot);
    for (int b = 0; b < kNumBones; ++b) {
        out.rot[b] = global * out.rot[b];
        out.pos[b] = global * out.pos[b] + params.trans;
    }
    for (int j = 0; j < kNumJoints; ++j)
        out.joints[j] = global * out.joints[j] + params.trans;
    return out;
}

/// Linear blend skinning of one template vertex.
template <class S>
geom::Vec3T<S> skin_vertex(const HandTemplate& tpl, const BoneTransformsT<S>& bones,
                           std::size_t vertex) {
    const geom::Vec3& v0 = tpl.mesh.vertices[vertex];
    const auto& row = tpl.weights[vertex];
    geom::Vec3T<S> out{S(0), S(0), S(0)};
    for (int b = 0; b < kNumBones; ++b) {
        const double w = row[b];
        if (w == 0.0) continue;
        const geom::Vec3 rest = v0 - tpl.joints0[bone_joint(b)];
        const geom::Vec3T<S> local{S(rest.x), S(rest.y), S(rest.z)};
        out += (bones.rot[b] * local + bones.pos[b]) * w;
    }
    return out;
}

/// Skinned mesh vertices plus posed joints.
struct PosedHand {
    std::vector<geom::Vec3> vertices;
    std::array<geom::Vec3, kNumJoints> joints{};
};

inline PosedHand pose_hand(const HandTemplate& tpl, const HandParams& params) {
    params.validate();
    const auto bones = forward_kinematics(tpl, lift_params<double>(params));
    PosedHand out;
    out.joints = bones.joints;
    out.vertices.resize(tpl.mesh.vertices.size());
    for (std::size_t i = 0; i < out.vertices.size(); ++i)
        out.vertices[i] = skin_vertex(tpl, bones, i);
    return out;
}

inline geom::TriMesh posed_mesh(const HandTemplate& tpl, const PosedHand& posed) {
    return geom::TriMesh(posed.vertices, tpl.mesh.faces);
}

}  // namespace hoikit::hand
