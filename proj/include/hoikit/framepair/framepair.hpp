#pragma once

#include <filesystem>
#include <json.hpp>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hoikit/geom/affine2.hpp"
#include "hoikit/geom/mask.hpp"

namespace hoikit::framepair {

/// Thresholds of the interaction-frame selection rule. Angles in degrees.
struct SelectionThresholds {
    double max_min_angle = 1.0;
    double min_max_angle = 5.0;
    double dt_iou_thres = 0.02;
    std::uint32_t dilation_px = 5;
    double period_iou_thres = 0.01;

    void validate() const {
        if (!(max_min_angle > 0.0 && min_max_angle > 0.0 && dt_iou_thres > 0.0 &&
              period_iou_thres > 0.0))
            throw Error("selection thresholds must be positive");
    }
};

inline nlohmann::ordered_json to_json(const SelectionThresholds& t) {
    return {{"max_min_angle", t.max_min_angle},
            {"min_max_angle", t.min_max_angle},
            {"dt_iou_thres", t.dt_iou_thres},
            {"dilation_px", t.dilation_px},
            {"period_iou_thres", t.period_iou_thres}};
}

inline SelectionThresholds selection_thresholds_from_json(const nlohmann::json& j) {
    SelectionThresholds t;
    if (j.contains("max_min_angle")) t.max_min_angle = j.at("max_min_angle").get<double>();
    if (j.contains("min_max_angle")) t.min_max_angle = j.at("min_max_angle").get<double>();
    if (j.contains("dt_iou_thres")) t.dt_iou_thres = j.at("dt_iou_thres").get<double>();
    if (j.contains("dilation_px")) t.dilation_px = j.at("dilation_px").get<std::uint32_t>();
    if (j.contains("period_iou_thres"))
        t.period_iou_thres = j.at("period_iou_thres").get<double>();
    t.validate();
    return t;
}

struct Correspondences {
    std::vector<geom::Vec2> src;  // points in the reference frame
    std::vector<geom::Vec2> dst;  // matched points in frame t
};

/// Per-frame hand/object masks plus optional reference-frame
/// correspondences inside the object masks.
struct MaskSequence {
    struct Frame {
        geom::BinaryMask hand;
        geom::BinaryMask obj;
    };
    std::vector<Frame> frames;
    std::map<int, Correspondences> correspondences;
    int declared_ref = -1;  // reference frame the correspondences were matched against

    void validate() const {
        if (frames.empty()) throw Error("mask sequence is empty");
        const auto w = frames.front().hand.width, h = frames.front().hand.height;
        for (const Frame& f : frames)
            if (f.hand.width != w || f.hand.height != h || f.obj.width != w || f.obj.height != h)
                throw Error("mask dimensions differ across the sequence");
        for (const auto& [t, c] : correspondences)
            if (c.src.size() != c.dst.size()) throw Error("correspondence lists are not paired");
    }
};

/// Per-frame hand-object overlap after dilating both masks.
inline std::vector<double> interaction_signal(const MaskSequence& seq,
                                              const SelectionThresholds& th) {
    std::vector<double> iou;
    iou.reserve(seq.frames.size());
    for (const auto& f : seq.frames)
        iou.push_back(geom::mask_iou(geom::dilate(f.hand, th.dilation_px),
                                     geom::dilate(f.obj, th.dilation_px)));
    return iou;
}

/// Longest contiguous block of frames whose dilated hand/object IoU exceeds
/// the period threshold; earliest block wins ties.
inline std::pair<int, int> detect_interaction_period(const MaskSequence& seq,
                                                     const SelectionThresholds& th) {
    seq.validate();
    th.validate();
    const std::vector<double> iou = interaction_signal(seq, th);
    int best_first = -1, best_len = 0;
    int run_first = -1, run_len = 0;
    for (int t = 0; t < int(iou.size()); ++t) {
        if (iou[t] > th.period_iou_thres) {
            if (run_len == 0) run_first = t;
            ++run_len;
            if (run_len > best_len) {
                best_len = run_len;
                best_first = run_first;
            }
        } else {
            run_len = 0;
        }
    }
    if (best_len == 0) throw Error("no interaction detected");
    return {best_first, best_first + best_len - 1};
}

/// Object-only frame nearest to the interaction period: dilated overlap must
/// be exactly zero; distance ties resolve to the earlier frame.
inline int select_reference_frame(const MaskSequence& seq, std::pair<int, int> period,
                                  const SelectionThresholds& th) {
    const std::vector<double> iou = interaction_signal(seq, th);
    int best = -1;
    long best_dist = std::numeric_limits<long>::max();
    for (int t = 0; t < int(seq.frames.size()); ++t) {
        if (t >= period.first && t <= period.second) continue;
        if (iou[t] != 0.0) continue;
        const long dist = t < period.first ? long(period.first - t) : long(t - period.second);
        if (dist < best_dist) {
            best_dist = dist;
            best = t;
        }
    }
    if (best < 0) throw Error("no object-only reference frame found");
    return best;
}

/// Per-frame pose signals over the interaction period, indexed relative to
/// period.first. Frames without usable correspondences (or where RANSAC
/// fails) are flagged invalid and excluded from selection.
struct FrameSignals {
    std::vector<double> theta;  // degrees
    std::vector<double> iou;
    std::vector<geom::Affine2> affine;
    std::vector<bool> valid;
};

inline FrameSignals frame_pose_signals(const MaskSequence& seq, int i_ref,
                                       std::pair<int, int> period, const SelectionThresholds& th,
                                       int ransac_iterations = 200, double inlier_tol = 2.0,
                                       std::uint64_t seed = 0) {
    (void)th;
    if (i_ref < 0 || i_ref >= int(seq.frames.size())) throw Error("reference frame out of range");
    FrameSignals out;
    const int count = period.second - period.first + 1;
    out.theta.assign(count, 0.0);
    out.iou.assign(count, 0.0);
    out.affine.assign(count, geom::Affine2::identity());
    out.valid.assign(count, false);
    const geom::BinaryMask& ref_obj = seq.frames[i_ref].obj;
    for (int t = period.first; t <= period.second; ++t) {
        const int rel = t - period.first;
        const auto it = seq.correspondences.find(t);
        if (it == seq.correspondences.end() || it->second.src.size() < 3) continue;
        try {
            const auto fit = geom::estimate_affine_ransac(it->second.src, it->second.dst,
                                                          ransac_iterations, inlier_tol, seed);
            out.affine[rel] = fit.affine;
            out.theta[rel] = geom::rotation_angle_from_affine(fit.affine);
            const geom::BinaryMask warped =
                geom::warp_mask(ref_obj, fit.affine, ref_obj.width, ref_obj.height);
            out.iou[rel] = geom::mask_iou(warped, seq.frames[t].obj);
            out.valid[rel] = true;
        } catch (const Error&) {
            out.valid[rel] = false;
        }
    }
    return out;
}

enum class SelectionCase { min_angle, stable_near_max, constrained_near_max };

inline const char* to_string(SelectionCase c) {
    switch (c) {
        case SelectionCase::min_angle: return "min-angle";
        case SelectionCase::stable_near_max: return "stable-near-max";
        default: return "constrained-near-max";
    }
}

/// Three-case interaction-frame selection over per-frame rotation and IoU
/// signals. Returns the index within the signal vectors plus the rule case
/// that fired.
///
/// (a) every frame rotated more than max_min_angle: take the least-rotated
///     frame. (b) no frame rotated past min_max_angle: among frames whose
///     IoU change into the frame stays under dt_iou_thres, take the one
///     nearest the IoU peak. (c) otherwise: among frames with rotation under
///     max_min_angle, take the one nearest the IoU peak. Distance and value
///     ties resolve to the earlier frame; an empty stable or candidate set
///     falls back to (a).
inline std::pair<std::size_t, SelectionCase> select_hoi_frame(
    const std::vector<double>& theta, const std::vector<double>& iou,
    const SelectionThresholds& th, const std::vector<bool>& valid = {}) {
    if (theta.size() != iou.size()) throw Error("signal lengths differ");
    if (!valid.empty() && valid.size() != theta.size()) throw Error("validity length differs");
    std::vector<std::size_t> frames;
    for (std::size_t t = 0; t < theta.size(); ++t)
        if (valid.empty() || valid[t]) frames.push_back(t);
    if (frames.empty()) throw Error("no valid frames");

    auto argmin_abs_theta = [&]() {
        std::size_t best = frames[0];
        for (std::size_t t : frames)
            if (std::abs(theta[t]) < std::abs(theta[best])) best = t;
        return best;
    };

    double min_abs = std::numeric_limits<double>::infinity();
    double max_abs = 0.0;
    for (std::size_t t : frames) {
        min_abs = std::min(min_abs, std::abs(theta[t]));
        max_abs = std::max(max_abs, std::abs(theta[t]));
    }

    if (min_abs > th.max_min_angle) return {argmin_abs_theta(), SelectionCase::min_angle};

    std::size_t i_max = frames[0];
    for (std::size_t t : frames)
        if (iou[t] > iou[i_max]) i_max = t;

    auto nearest_to_peak = [&](const std::vector<std::size_t>& candidates) {
        std::size_t best = candidates[0];
        auto dist = [&](std::size_t t) {
            return t > i_max ? t - i_max : i_max - t;
        };
        for (std::size_t t : candidates)
            if (dist(t) < dist(best)) best = t;
        return best;
    };

    if (max_abs < th.min_max_angle) {
        // IoU change into each valid frame; the first one inherits the
        // change out of it.
        std::vector<std::size_t> stable;
        for (std::size_t j = 0; j < frames.size(); ++j) {
            double delta = 0.0;
            if (frames.size() > 1)
                delta = j == 0 ? iou[frames[1]] - iou[frames[0]]
                               : iou[frames[j]] - iou[frames[j - 1]];
            if (std::abs(delta) < th.dt_iou_thres) stable.push_back(frames[j]);
        }
        if (stable.empty()) return {argmin_abs_theta(), SelectionCase::min_angle};
        return {nearest_to_peak(stable), SelectionCase::stable_near_max};
    }

    std::vector<std::size_t> candidates;
    for (std::size_t t : frames)
        if (std::abs(theta[t]) < th.max_min_angle) candidates.push_back(t);
    if (candidates.empty()) return {argmin_abs_theta(), SelectionCase::min_angle};
    return {nearest_to_peak(candidates), SelectionCase::constrained_near_max};
}

/// Reference object mask carried into the interaction frame.
inline geom::BinaryMask make_inpaint_mask(const geom::BinaryMask& ref_obj_mask,
                                          const geom::Affine2& a_hoi) {
    return geom::warp_mask(ref_obj_mask, a_hoi, ref_obj_mask.width, ref_obj_mask.height);
}

struct FramePairResult {
    int i_ref = -1;
    int i_hoi = -1;
    double theta = 0.0;  // degrees at i_hoi
    geom::Affine2 affine;
    geom::BinaryMask inpaint_mask;
    SelectionCase case_taken = SelectionCase::min_angle;
    std::pair<int, int> period{-1, -1};
};

/// Full clip pipeline: interaction period, reference frame, per-frame
/// signals, the selection rule, and the inpaint mask.
inline FramePairResult process_clip(const MaskSequence& seq, const SelectionThresholds& th,
                                    int ransac_iterations = 200, double inlier_tol = 2.0,
                                    std::uint64_t seed = 0) {
    const auto period = detect_interaction_period(seq, th);
    const int i_ref = select_reference_frame(seq, period, th);
    if (seq.declared_ref >= 0 && seq.declared_ref != i_ref)
        throw Error("correspondences were matched against a different reference frame");
    const FrameSignals signals =
        frame_pose_signals(seq, i_ref, period, th, ransac_iterations, inlier_tol, seed);
    const auto [rel, case_taken] = select_hoi_frame(signals.theta, signals.iou, th, signals.valid);
    FramePairResult out;
    out.period = period;
    out.i_ref = i_ref;
    out.i_hoi = period.first + int(rel);
    out.theta = signals.theta[rel];
    out.affine = signals.affine[rel];
    out.case_taken = case_taken;
    out.inpaint_mask = make_inpaint_mask(seq.frames[i_ref].obj, out.affine);
    return out;
}

/// Clip directory: hand_%04d.pgm / obj_%04d.pgm pairs numbered from 0 plus
/// an optional correspondences.json
/// {"ref_frame": r, "frames": [{"frame": t, "src": [[x,y]..], "dst": [[x,y]..]}]}.
inline MaskSequence load_clip_directory(const std::string& dir) {
    namespace fs = std::filesystem;
    MaskSequence seq;
    for (int t = 0;; ++t) {
        char hand_name[32], obj_name[32];
        std::snprintf(hand_name, sizeof hand_name, "hand_%04d.pgm", t);
        std::snprintf(obj_name, sizeof obj_name, "obj_%04d.pgm", t);
        const fs::path hand_path = fs::path(dir) / hand_name;
        const fs::path obj_path = fs::path(dir) / obj_name;
        if (!fs::exists(hand_path) || !fs::exists(obj_path)) break;
        MaskSequence::Frame frame;
        frame.hand = geom::read_pgm_file(hand_path.string());
        frame.obj = geom::read_pgm_file(obj_path.string());
        seq.frames.push_back(std::move(frame));
    }
    if (seq.frames.empty()) throw Error("no mask frames found in " + dir);

    const fs::path corr_path = fs::path(dir) / "correspondences.json";
    if (fs::exists(corr_path)) {
        std::ifstream in(corr_path);
        nlohmann::json j;
        in >> j;
        if (j.contains("ref_frame")) seq.declared_ref = j.at("ref_frame").get<int>();
        for (const auto& entry : j.at("frames")) {
            Correspondences c;
            for (const auto& p : entry.at("src")) c.src.push_back({p[0].get<double>(), p[1].get<double>()});
            for (const auto& p : entry.at("dst")) c.dst.push_back({p[0].get<double>(), p[1].get<double>()});
            seq.correspondences[entry.at("frame").get<int>()] = std::move(c);
        }
    }
    seq.validate();
    return seq;
}

inline nlohmann::ordered_json to_json(const FramePairResult& r) {
    nlohmann::ordered_json j;
    j["i_ref"] = r.i_ref;
    j["i_hoi"] = r.i_hoi;
    j["theta_deg"] = r.theta;
    j["affine"] = {{r.affine.m[0][0], r.affine.m[0][1], r.affine.m[0][2]},
                   {r.affine.m[1][0], r.affine.m[1][1], r.affine.m[1][2]}};
    j["case_taken"] = to_string(r.case_taken);
    j["period"] = {r.period.first, r.period.second};
    return j;
}

}  // namespace hoikit::framepair
