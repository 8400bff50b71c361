#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

#include "clip_fixtures.hpp"
#include "hoikit/framepair/framepair.hpp"

using namespace hoikit;
using framepair::SelectionCase;
using framepair::SelectionThresholds;

namespace {

geom::BinaryMask blob(std::uint32_t size, std::uint32_t x0, std::uint32_t y0, std::uint32_t side) {
    geom::BinaryMask m{size, size};
    for (std::uint32_t y = y0; y < std::min(size, y0 + side); ++y)
        for (std::uint32_t x = x0; x < std::min(size, x0 + side); ++x) m.set(x, y);
    return m;
}

framepair::MaskSequence overlap_sequence(const std::vector<bool>& overlapping,
                                         std::uint32_t size = 64) {
    framepair::MaskSequence seq;
    for (bool on : overlapping) {
        framepair::MaskSequence::Frame frame;
        frame.obj = blob(size, 30, 30, 12);
        frame.hand = on ? blob(size, 34, 34, 12) : blob(size, 2, 2, 6);
        seq.frames.push_back(std::move(frame));
    }
    return seq;
}

}  // namespace

TEST_CASE("interaction period detection") {
    SelectionThresholds th;

    // always disjoint by more than twice the dilation: error
    framepair::MaskSequence apart;
    for (int t = 0; t < 6; ++t) {
        framepair::MaskSequence::Frame frame;
        frame.obj = blob(64, 40, 40, 10);
        frame.hand = blob(64, 2, 2, 10);
        apart.frames.push_back(std::move(frame));
    }
    CHECK_THROWS_WITH(framepair::detect_interaction_period(apart, th),
                      "no interaction detected");

    // overlap exactly on frames 3..7
    std::vector<bool> block(10, false);
    for (int t = 3; t <= 7; ++t) block[t] = true;
    CHECK(framepair::detect_interaction_period(overlap_sequence(block), th) ==
          std::pair<int, int>{3, 7});

    // two blocks: 2..4 and 8..15, longest wins
    std::vector<bool> two(17, false);
    for (int t = 2; t <= 4; ++t) two[t] = true;
    for (int t = 8; t <= 15; ++t) two[t] = true;
    CHECK(framepair::detect_interaction_period(overlap_sequence(two), th) ==
          std::pair<int, int>{8, 15});
}

TEST_CASE("reference frame is the nearest non-interacting frame") {
    SelectionThresholds th;
    std::vector<bool> block(10, false);
    for (int t = 4; t <= 7; ++t) block[t] = true;
    const auto seq = overlap_sequence(block);
    const auto period = framepair::detect_interaction_period(seq, th);
    CHECK(framepair::select_reference_frame(seq, period, th) == 3);
}

TEST_CASE("pose signals on a static object") {
    fixtures::ClipSpec spec;
    spec.rotation_per_frame = 0.0;
    const auto seq = fixtures::build_clip(spec);
    const auto period = framepair::detect_interaction_period(seq, SelectionThresholds{});
    CHECK(period == std::pair<int, int>{spec.overlap_first, spec.overlap_last});
    const int i_ref = framepair::select_reference_frame(seq, period, SelectionThresholds{});
    CHECK(i_ref == spec.overlap_first - 1);

    const auto signals =
        framepair::frame_pose_signals(seq, i_ref, period, SelectionThresholds{}, 200, 2.0, 1);
    for (std::size_t rel = 0; rel < signals.theta.size(); ++rel) {
        REQUIRE(signals.valid[rel]);
        REQUIRE(std::abs(signals.theta[rel]) < 0.5);
        REQUIRE(signals.iou[rel] >= 0.95);
    }
}

TEST_CASE("pose signals recover a 2 degree per frame rotation") {
    fixtures::ClipSpec spec;
    const auto seq = fixtures::build_clip(spec);
    const auto period = framepair::detect_interaction_period(seq, SelectionThresholds{});
    const int i_ref = framepair::select_reference_frame(seq, period, SelectionThresholds{});

    const auto signals =
        framepair::frame_pose_signals(seq, i_ref, period, SelectionThresholds{}, 200, 2.0, 1);
    for (std::size_t rel = 0; rel < signals.theta.size(); ++rel) {
        REQUIRE(signals.valid[rel]);
        const double expected = spec.rotation_per_frame * double(rel + 1);
        REQUIRE(signals.theta[rel] == Catch::Approx(expected).margin(0.5));
    }
}

TEST_CASE("identity frame gives zero rotation and unit iou") {
    fixtures::ClipSpec spec;
    spec.rotation_per_frame = 0.0;
    auto seq = fixtures::build_clip(spec);
    const int i_ref = spec.overlap_first - 1;
    const auto signals = framepair::frame_pose_signals(
        seq, i_ref, {spec.overlap_first, spec.overlap_first}, SelectionThresholds{}, 200, 2.0, 1);
    REQUIRE(signals.valid[0]);
    CHECK(std::abs(signals.theta[0]) < 1e-6);
    CHECK(signals.iou[0] == 1.0);
}

TEST_CASE("selection rule case traces") {
    SelectionThresholds th;  // MAX_MIN_ANGLE=1, MIN_MAX_ANGLE=5, DT=0.02

    // (a) every frame rotated: least-rotated frame wins
    {
        const auto [idx, which] = framepair::select_hoi_frame({3, 2, 6}, {0.5, 0.6, 0.7}, th);
        CHECK(idx == 1);
        CHECK(which == SelectionCase::min_angle);
    }
    // (b) nothing rotated much: stable frame nearest the IoU peak
    {
        const auto [idx, which] =
            framepair::select_hoi_frame({0.2, 0.5, 0.3}, {0.90, 0.98, 0.97}, th);
        CHECK(idx == 2);
        CHECK(which == SelectionCase::stable_near_max);
    }
    // (c) mixed: small-rotation frames compete by distance to the peak,
    // ties to the earlier frame
    {
        const auto [idx, which] =
            framepair::select_hoi_frame({0.5, 8, 0.9}, {0.9, 0.99, 0.8}, th);
        CHECK(idx == 0);
        CHECK(which == SelectionCase::constrained_near_max);
    }
}

TEST_CASE("selection rule degenerate inputs") {
    SelectionThresholds th;
    CHECK_THROWS(framepair::select_hoi_frame({}, {}, th));

    // static object: all stable, earliest peak wins
    std::vector<double> theta(6, 0.0), iou(6, 1.0);
    const auto [idx, which] = framepair::select_hoi_frame(theta, iou, th);
    CHECK(idx == 0);
    CHECK(which == SelectionCase::stable_near_max);

    // invalid frames are skipped
    std::vector<bool> valid{false, true, true};
    const auto [idx2, which2] = framepair::select_hoi_frame({0.1, 3, 2}, {1, 1, 1}, th, valid);
    CHECK(idx2 == 2);
    CHECK(which2 == SelectionCase::min_angle);
}

TEST_CASE("selection is deterministic") {
    SelectionThresholds th;
    const std::vector<double> theta{0.3, 0.9, 0.2, 4.0};
    const std::vector<double> iou{0.91, 0.94, 0.93, 0.5};
    const auto a = framepair::select_hoi_frame(theta, iou, th);
    const auto b = framepair::select_hoi_frame(theta, iou, th);
    CHECK(a == b);
}

TEST_CASE("full clip pipeline on a rotating clip") {
    fixtures::ClipSpec spec;
    const auto seq = fixtures::build_clip(spec);
    const auto result = framepair::process_clip(seq, SelectionThresholds{}, 200, 2.0, 1);
    CHECK(result.i_ref == spec.overlap_first - 1);
    CHECK(result.i_hoi == spec.overlap_first);  // min |theta| = 2 deg > 1: case (a)
    CHECK(result.case_taken == SelectionCase::min_angle);
    CHECK(result.theta == Catch::Approx(2.0).margin(0.5));
    CHECK(result.i_hoi >= result.period.first);
    CHECK(result.i_hoi <= result.period.second);
    // the inpaint mask lands on the rotated object with high overlap
    CHECK(geom::mask_iou(result.inpaint_mask, seq.frames[result.i_hoi].obj) > 0.9);
}

TEST_CASE("clip directory round trip") {
    fixtures::ClipSpec spec;
    spec.frames = 12;
    spec.overlap_first = 4;
    spec.overlap_last = 8;
    spec.hand_absent_from = 10;
    const auto seq = fixtures::build_clip(spec);
    const auto dir =
        std::filesystem::temp_directory_path() / "hoikit_clip_roundtrip";
    std::filesystem::remove_all(dir);
    fixtures::write_clip(seq, dir.string());
    const auto loaded = framepair::load_clip_directory(dir.string());
    REQUIRE(loaded.frames.size() == seq.frames.size());
    for (std::size_t t = 0; t < seq.frames.size(); ++t) {
        REQUIRE(loaded.frames[t].hand == seq.frames[t].hand);
        REQUIRE(loaded.frames[t].obj == seq.frames[t].obj);
    }
    REQUIRE(loaded.declared_ref == seq.declared_ref);
    REQUIRE(loaded.correspondences.size() == seq.correspondences.size());
    const auto result = framepair::process_clip(loaded, SelectionThresholds{}, 200, 2.0, 1);
    const auto direct = framepair::process_clip(seq, SelectionThresholds{}, 200, 2.0, 1);
    CHECK(result.i_ref == direct.i_ref);
    CHECK(result.i_hoi == direct.i_hoi);
    std::filesystem::remove_all(dir);
}
