#include <catch2/catch_amalgamated.hpp>

#include "contact_oracle.hpp"
#include "hoikit/contact/contact.hpp"
#include "hoikit/geom/shapes.hpp"
#include "hoikit/hand/hand_template.hpp"
#include "hoikit/hand/kinematics.hpp"
#include "hoikit/rng.hpp"

using namespace hoikit;
using contact::ContactParams;
using geom::PointCloud;
using geom::Vec3;

namespace {

PointCloud sphere_cloud(const Vec3& center, double radius, std::size_t n, Rng& rng) {
    std::vector<Vec3> pts;
    pts.reserve(n);
    for (std::size_t i = 0; i < n; ++i) pts.push_back(center + rng.unit_vector() * radius);
    return PointCloud(std::move(pts));
}

PointCloud grid_cloud(const Vec3& origin, int nx, int ny, double spacing, double z) {
    std::vector<Vec3> pts;
    for (int y = 0; y < ny; ++y)
        for (int x = 0; x < nx; ++x)
            pts.push_back({origin.x + x * spacing, origin.y + y * spacing, origin.z + z});
    return PointCloud(std::move(pts));
}

const hand::HandTemplate& shared_template() {
    static const hand::HandTemplate tpl = hand::generate_capsule_hand_template();
    return tpl;
}

}  // namespace

TEST_CASE("bidirectional votes concentrate on a single target") {
    PointCloud obj({{0, 0, 0}});
    PointCloud hand_pts({{1, 0, 0}, {0, 1, 0}, {2, 2, 2}, {-1, 0, 0}, {5, 5, 5}});
    const auto [vote_o, vote_h] = contact::bidirectional_votes(obj, hand_pts);
    REQUIRE(vote_o.size() == 1);
    CHECK(vote_o[0] == 5);
    int total_h = 0;
    for (int v : vote_h) total_h += v;
    CHECK(total_h == 1);
}

TEST_CASE("coincident clouds vote one-to-one") {
    Rng rng(19);
    std::vector<Vec3> pts;
    for (int i = 0; i < 50; ++i)
        pts.push_back({rng.uniform(-40, 40), rng.uniform(-40, 40), rng.uniform(-40, 40)});
    PointCloud cloud(pts);
    const auto [vote_o, vote_h] = contact::bidirectional_votes(cloud, cloud);
    for (int v : vote_o) CHECK(v == 1);
    for (int v : vote_h) CHECK(v == 1);
}

TEST_CASE("vote sums conserve the opposite cloud size") {
    Rng rng(29);
    for (int trial = 0; trial < 5; ++trial) {
        const auto obj = sphere_cloud({0, 0, 0}, 30, 120, rng);
        const auto hand_pts = sphere_cloud({20, 0, 0}, 25, 80, rng);
        const auto [vote_o, vote_h] = contact::bidirectional_votes(obj, hand_pts);
        long sum_o = 0, sum_h = 0;
        for (int v : vote_o) sum_o += v;
        for (int v : vote_h) sum_h += v;
        REQUIRE(sum_o == long(hand_pts.size()));
        REQUIRE(sum_h == long(obj.size()));
    }
}

TEST_CASE("far-separated clouds produce empty contact maps") {
    Rng rng(31);
    const auto obj = sphere_cloud({0, 0, 0}, 30, 200, rng);
    const auto hand_pts = sphere_cloud({500, 0, 0}, 30, 200, rng);
    const auto [c_o, c_h] = contact::compute_contact_maps(obj, hand_pts, {});
    CHECK(c_o.count() == 0);
    CHECK(c_h.count() == 0);
}

TEST_CASE("interpenetrating spheres agree with the brute-force oracle") {
    Rng rng(37);
    const Vec3 center_a{0, 0, 0}, center_b{45, 0, 0};
    const double radius = 30.0;
    const auto obj = sphere_cloud(center_a, radius, 1000, rng);
    const auto hand_pts = sphere_cloud(center_b, radius, 1000, rng);
    ContactParams params;
    const auto [c_o, c_h] = contact::compute_contact_maps(obj, hand_pts, params);
    const oracle::Maps want = oracle::contact_maps_ref(obj, hand_pts, params);
    REQUIRE(c_o.bits == want.c_o);
    REQUIRE(c_h.bits == want.c_h);

    CHECK(c_o.count() > 0);
    CHECK(c_h.count() > 0);
    // contact stays inside the overlap lens (with slack for the expansion)
    for (std::uint32_t i : c_o.indices())
        CHECK(geom::distance(obj[i], center_b) < radius + 12.0);
    for (std::uint32_t i : c_h.indices())
        CHECK(geom::distance(hand_pts[i], center_a) < radius + 12.0);
}

TEST_CASE("single touching pair marks only its neighborhood") {
    auto obj = grid_cloud({-10, -10, 0}, 11, 11, 2.0, 0.0);   // includes (0,0,0)
    auto far_obj = grid_cloud({500, -10, 0}, 4, 4, 2.0, 0.0);
    for (const Vec3& p : far_obj.points) obj.points.push_back(p);

    auto hand_pts = grid_cloud({-10, -10, 0}, 11, 11, 2.0, 30.0);
    hand_pts.points.push_back({0, 0, 0});  // the one touching point

    ContactParams params;
    const auto [c_o, c_h] = contact::compute_contact_maps(obj, hand_pts, params);
    const oracle::Maps want = oracle::contact_maps_ref(obj, hand_pts, params);
    REQUIRE(c_o.bits == want.c_o);
    REQUIRE(c_h.bits == want.c_h);

    // hand side: exactly the touching point
    REQUIRE(c_h.count() == 1);
    CHECK(c_h.bits.back() == 1);

    // object side: the touched point plus its expansion neighborhood only
    CHECK(c_o.count() >= 1);
    for (std::uint32_t i : c_o.indices()) {
        CHECK(geom::distance(obj[i], {0, 0, 0}) < 10.0);
    }
}

TEST_CASE("random scenes match the brute-force oracle bit-exactly") {
    Rng rng(41);
    for (int scene = 0; scene < 30; ++scene) {
        const std::size_t n_o = 50 + rng.uniform_index(250);
        const std::size_t n_h = 50 + rng.uniform_index(250);
        const double gap = rng.uniform(0, 60);
        const auto obj = sphere_cloud({0, 0, 0}, rng.uniform(10, 40), n_o, rng);
        const auto hand_pts = sphere_cloud({gap, 0, 0}, rng.uniform(10, 40), n_h, rng);
        ContactParams params;
        params.alpha = rng.uniform(0.05, 0.4);
        params.beta = rng.uniform(0.3, 0.8);
        params.eps = rng.uniform(1.0, 10.0);
        params.gamma = rng.uniform(0.0, 3.0);
        params.k = 4 + int(rng.uniform_index(8));
        const auto [c_o, c_h] = contact::compute_contact_maps(obj, hand_pts, params);
        const oracle::Maps want = oracle::contact_maps_ref(obj, hand_pts, params);
        REQUIRE(c_o.bits == want.c_o);
        REQUIRE(c_h.bits == want.c_h);
    }
}

TEST_CASE("contact maps scale covariantly") {
    Rng rng(43);
    const auto obj = sphere_cloud({0, 0, 0}, 30, 300, rng);
    const auto hand_pts = sphere_cloud({40, 0, 0}, 30, 300, rng);
    ContactParams params;
    const auto [c_o, c_h] = contact::compute_contact_maps(obj, hand_pts, params);

    const double s = 2.5;
    auto scale_cloud = [&](const PointCloud& cloud) {
        std::vector<Vec3> pts;
        for (const Vec3& p : cloud.points) pts.push_back(p * s);
        return PointCloud(std::move(pts));
    };
    ContactParams scaled = params;
    scaled.eps = params.eps * s;
    const auto [s_o, s_h] =
        contact::compute_contact_maps(scale_cloud(obj), scale_cloud(hand_pts), scaled);
    CHECK(s_o.bits == c_o.bits);
    CHECK(s_h.bits == c_h.bits);
}

TEST_CASE("contact maps are deterministic") {
    Rng rng(47);
    const auto obj = sphere_cloud({0, 0, 0}, 25, 400, rng);
    const auto hand_pts = sphere_cloud({30, 5, 0}, 25, 400, rng);
    const auto first = contact::compute_contact_maps(obj, hand_pts, {});
    const auto second = contact::compute_contact_maps(obj, hand_pts, {});
    CHECK(first.first.bits == second.first.bits);
    CHECK(first.second.bits == second.second.bits);
}

TEST_CASE("stage monotonicity: cores are contained in the final maps") {
    // gamma = 0 shrinks the expansion to radius zero, so M == S; any larger
    // gamma grows M around the same cores.
    Rng rng(53);
    const auto obj = sphere_cloud({0, 0, 0}, 30, 400, rng);
    const auto hand_pts = sphere_cloud({35, 0, 0}, 30, 400, rng);
    ContactParams tight;
    tight.gamma = 0.0;
    ContactParams wide;
    wide.gamma = 2.0;
    const auto [core_o, core_h] = contact::compute_contact_maps(obj, hand_pts, tight);
    const auto [wide_o, wide_h] = contact::compute_contact_maps(obj, hand_pts, wide);
    for (std::size_t i = 0; i < core_o.size(); ++i)
        if (core_o.bits[i]) REQUIRE(wide_o.bits[i]);
    for (std::size_t i = 0; i < core_h.size(); ++i)
        if (core_h.bits[i]) REQUIRE(wide_h.bits[i]);
}

TEST_CASE("distance map") {
    std::array<Vec3, hand::kNumJoints> joints{};
    for (int j = 0; j < hand::kNumJoints; ++j) joints[j] = {double(j), 0, 0};
    PointCloud obj({{0, 0, 0}, {0, 3, 4}, {10, 0, 0}});

    const auto map = contact::distance_map(joints, obj);
    REQUIRE(map.cols == 3);
    CHECK(map.at(0, 0) == 0.0);                    // joint on an object point
    CHECK(map.at(0, 1) == Catch::Approx(5.0));
    CHECK(map.at(10, 2) == 0.0);

    // direct recomputation
    for (int j = 0; j < hand::kNumJoints; ++j)
        for (std::size_t i = 0; i < obj.size(); ++i)
            REQUIRE(map.at(j, i) == geom::distance(joints[j], obj[i]));

    // homogeneity: scaling both sides doubles every entry
    std::array<Vec3, hand::kNumJoints> joints2{};
    for (int j = 0; j < hand::kNumJoints; ++j) joints2[j] = joints[j] * 2.0;
    PointCloud obj2({{0, 0, 0}, {0, 6, 8}, {20, 0, 0}});
    const auto map2 = contact::distance_map(joints2, obj2);
    for (int j = 0; j < hand::kNumJoints; ++j)
        for (std::size_t i = 0; i < obj.size(); ++i)
            REQUIRE(map2.at(j, i) == Catch::Approx(2.0 * map.at(j, i)));
}

TEST_CASE("dataset annotation: hand far from object") {
    const auto& tpl = shared_template();
    hand::HandParams params;
    params.trans = {1000, 0, 0};
    const auto posed = hand::pose_hand(tpl, params);
    Rng rng(59);
    geom::TriMesh box = geom::make_box_grid({0, 0, 0}, {40, 40, 40}, 2, 2, 2);
    const auto cloud = geom::sample_surface(box, 1200, rng);
    const auto ann = contact::dataset_contact_annotation(PointCloud(posed.vertices), cloud,
                                                         tpl.part_label);
    CHECK(ann.hand_map.count() == 0);
    CHECK(ann.obj_map.count() == 0);
    CHECK(ann.label.bits == 0);
}

TEST_CASE("dataset annotation: index fingertip touching a box face") {
    const auto& tpl = shared_template();
    const auto posed = hand::pose_hand(tpl, hand::HandParams{});
    const Vec3 tip = posed.joints[hand::joint_index(1, 3)];

    // box face 1 mm beyond the fingertip cap (distal radius 7.2)
    const double face_y = tip.y + 7.2 + 1.0;
    geom::TriMesh box = geom::make_box_grid({tip.x - 10, face_y, tip.z - 10},
                                            {tip.x + 10, face_y + 20, tip.z + 10}, 2, 2, 2);
    Rng rng(61);
    const auto cloud = geom::sample_surface(box, 1500, rng);
    const auto ann = contact::dataset_contact_annotation(PointCloud(posed.vertices), cloud,
                                                         tpl.part_label);
    CHECK(ann.label.test(1));                                 // index
    CHECK_FALSE(ann.label.test(0));                           // thumb
    CHECK_FALSE(ann.label.test(4));                           // pinky
    CHECK_FALSE(ann.label.test(hand::ContactLabel7::kPalmarBit));
}

TEST_CASE("dataset annotation: palm press on a slab") {
    const auto& tpl = shared_template();
    const auto posed = hand::pose_hand(tpl, hand::HandParams{});
    geom::TriMesh slab = geom::make_box_grid({-60, -20, -32}, {55, 200, -12}, 4, 6, 1);
    Rng rng(67);
    const auto cloud = geom::sample_surface(slab, 2500, rng);
    const auto ann = contact::dataset_contact_annotation(PointCloud(posed.vertices), cloud,
                                                         tpl.part_label);
    CHECK(ann.label.test(hand::ContactLabel7::kPalmarBit));
    int finger_bits = 0;
    for (int f = 0; f < 5; ++f) finger_bits += ann.label.test(f);
    CHECK(finger_bits >= 2);
}
