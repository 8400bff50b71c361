#include <catch2/catch_amalgamated.hpp>

#include "refine_fixtures.hpp"
#include "hoikit/refine/losses.hpp"
#include "hoikit/refine/tta.hpp"

using namespace hoikit;
using geom::PointCloud;
using geom::Vec3;

namespace {

const hand::HandTemplate& shared_template() {
    static const hand::HandTemplate tpl = hand::generate_capsule_hand_template();
    return tpl;
}

refine::Scene empty_far_scene(const hand::HandTemplate& tpl) {
    refine::Scene scene;
    scene.obj_mesh = geom::make_box_grid({1000, 0, 0}, {1040, 40, 40}, 1, 1, 1);
    Rng rng(7);
    scene.obj_points = geom::sample_surface(scene.obj_mesh, 500, rng);
    scene.hand_map.bits.assign(tpl.vertex_count(), 0);
    scene.obj_map.bits.assign(scene.obj_points.size(), 0);
    return scene;
}

geom::Mat3 axis_angle_matrix(const Vec3& aa) { return geom::rotation_from_axis_angle(aa); }

Vec3 matrix_to_axis_angle(const geom::Mat3& r) {
    const double tr = r.m[0][0] + r.m[1][1] + r.m[2][2];
    const double angle = std::acos(std::clamp((tr - 1.0) / 2.0, -1.0, 1.0));
    if (angle < 1e-12) return {0, 0, 0};
    const double s = 2.0 * std::sin(angle);
    return Vec3{(r.m[2][1] - r.m[1][2]) / s, (r.m[0][2] - r.m[2][0]) / s,
                (r.m[1][0] - r.m[0][1]) / s} *
           angle;
}

}  // namespace

TEST_CASE("loss_contact") {
    PointCloud obj({{0, 0, 0}, {10, 0, 0}});
    geom::SpatialIndex obj_index(obj);
    std::vector<Vec3> verts{{0, 0, 0}, {5, 0, 0}, {100, 100, 100}};

    std::vector<std::uint8_t> empty(3, 0);
    CHECK(refine::loss_contact(verts, empty, obj_index) == 0.0);

    std::vector<std::uint8_t> on_point{1, 0, 0};
    CHECK(refine::loss_contact(verts, on_point, obj_index) == 0.0);

    std::vector<std::uint8_t> off_point{0, 1, 0};
    CHECK(refine::loss_contact(verts, off_point, obj_index) == Catch::Approx(5.0));
}

TEST_CASE("loss_penetration") {
    const geom::TriMesh cube = geom::make_box_grid({0, 0, 0}, {20, 20, 20}, 1, 1, 1);

    std::vector<Vec3> outside{{-5, -5, -5}, {30, 10, 10}};
    CHECK(refine::loss_penetration(outside, cube) == 0.0);

    std::vector<Vec3> one_inside{{10, 10, 3}};  // 3 mm above the z=0 face
    CHECK(refine::loss_penetration(one_inside, cube) == Catch::Approx(3.0));

    std::vector<Vec3> two_inside{{10, 10, 1}, {10, 10, 2}};
    CHECK(refine::loss_penetration(two_inside, cube) == Catch::Approx(3.0));

    const geom::TriMesh open_obj({{0, 0, 0}, {1, 0, 0}, {0, 1, 0}}, {{0, 1, 2}});
    CHECK_THROWS_WITH(refine::loss_penetration(one_inside, open_obj), "open surface");
}

TEST_CASE("loss_anatomy") {
    const auto limits = refine::JointLimits::defaults();
    hand::HandParams params;
    CHECK(refine::loss_anatomy(params, limits) == 0.0);

    params.pose[0].x = 1.7;  // 0.1 rad past the 1.6 flexion bound
    CHECK(refine::loss_anatomy(params, limits) == Catch::Approx(0.01));

    params.pose[3].z = -0.55;  // 0.2 past the -0.35 abduction bound
    CHECK(refine::loss_anatomy(params, limits) == Catch::Approx(0.05));
}

TEST_CASE("loss_self_penetration") {
    const auto& tpl = shared_template();
    const double margin = 2.0;
    const auto exclusion = refine::build_self_exclusion(tpl.mesh, margin);

    const hand::PosedHand rest = hand::pose_hand(tpl, hand::HandParams{});
    CHECK(refine::loss_self_penetration(rest.vertices, exclusion, margin) == 0.0);

    // collapse a pinky-tip vertex onto a thumb-tip vertex
    const Vec3 thumb_tip = tpl.joints0[hand::joint_index(0, 3)];
    const Vec3 pinky_tip = tpl.joints0[hand::joint_index(4, 3)];
    std::size_t a = 0, b = 0;
    for (std::size_t i = 0; i < tpl.vertex_count(); ++i) {
        if (geom::distance(tpl.mesh.vertices[i], thumb_tip) <
            geom::distance(tpl.mesh.vertices[a], thumb_tip))
            a = i;
        if (geom::distance(tpl.mesh.vertices[i], pinky_tip) <
            geom::distance(tpl.mesh.vertices[b], pinky_tip))
            b = i;
    }
    std::vector<Vec3> verts = rest.vertices;
    verts[b] = verts[a];
    CHECK(refine::loss_self_penetration(verts, exclusion, margin) ==
          Catch::Approx(margin * margin));

    // exactly at the margin: no penalty
    verts[b] = verts[a] + Vec3{margin, 0, 0};
    const double at_margin = refine::loss_self_penetration(verts, exclusion, margin);
    CHECK(at_margin == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("loss_cycle") {
    std::vector<Vec3> coincident{{0, 0, 0}, {5, 5, 5}, {-3, 2, 1}};
    CHECK(refine::loss_cycle(coincident, coincident) == 0.0);

    CHECK(refine::loss_cycle({}, coincident) == 0.0);
    CHECK(refine::loss_cycle(coincident, {}) == 0.0);

    // h1 round-trips onto h0, which is 4 mm away in L1
    std::vector<Vec3> hand_pts{{0, 0, 0}, {1, 0, 3}};
    std::vector<Vec3> obj_pts{{0.4, 0, 0}};
    CHECK(refine::loss_cycle(hand_pts, obj_pts) == Catch::Approx((0.0 + 4.0) / 2.0));
}

TEST_CASE("total loss is zero for a far hand with empty maps") {
    const auto& tpl = shared_template();
    const refine::Scene scene = empty_far_scene(tpl);
    const auto breakdown = refine::total_refine_loss(tpl, hand::HandParams{}, scene);
    CHECK(breakdown.contact == 0.0);
    CHECK(breakdown.pene == 0.0);
    CHECK(breakdown.anatomy == 0.0);
    CHECK(breakdown.self == 0.0);
    CHECK(breakdown.cyc == 0.0);
    CHECK(breakdown.total == 0.0);
}

TEST_CASE("total loss recomposes from the individual terms") {
    const auto& tpl = shared_template();
    Rng rng(113);
    const auto fixture = fixtures::make_touch_scene(tpl, rng);
    const hand::HandParams params = fixtures::perturb(fixture.gt, rng);

    const refine::RefineWeights weights;
    const double margin = 2.0;
    const auto breakdown = refine::total_refine_loss(tpl, params, fixture.scene, weights,
                                                     refine::JointLimits::defaults(), margin);

    const hand::PosedHand posed = hand::pose_hand(tpl, params);
    const geom::SpatialIndex obj_index(fixture.scene.obj_points);
    const double contact =
        refine::loss_contact(posed.vertices, fixture.scene.hand_map.bits, obj_index);
    const double pene = refine::loss_penetration(posed.vertices, fixture.scene.obj_mesh);
    const double anatomy = refine::loss_anatomy(params, refine::JointLimits::defaults());
    const auto exclusion = refine::build_self_exclusion(tpl.mesh, margin);
    const double self = refine::loss_self_penetration(posed.vertices, exclusion, margin);
    std::vector<Vec3> hand_contact, obj_contact;
    for (std::uint32_t i : fixture.scene.hand_map.indices())
        hand_contact.push_back(posed.vertices[i]);
    for (std::uint32_t i : fixture.scene.obj_map.indices())
        obj_contact.push_back(fixture.scene.obj_points[i]);
    const double cyc = refine::loss_cycle(hand_contact, obj_contact);

    CHECK(breakdown.contact == Catch::Approx(contact).margin(1e-9));
    CHECK(breakdown.pene == Catch::Approx(pene).margin(1e-9));
    CHECK(breakdown.anatomy == Catch::Approx(anatomy).margin(1e-9));
    CHECK(breakdown.self == Catch::Approx(self).margin(1e-9));
    CHECK(breakdown.cyc == Catch::Approx(cyc).margin(1e-9));
    const double total = weights.lambda_contact * contact + weights.lambda_pene * pene +
                         weights.lambda_anatomy * anatomy + weights.lambda_self * self +
                         weights.lambda_cyc * cyc;
    CHECK(breakdown.total == Catch::Approx(total).margin(1e-9));
}

TEST_CASE("penetrating pose is dominated by the weighted penetration term") {
    const auto& tpl = shared_template();
    Rng rng(127);
    auto fixture = fixtures::make_touch_scene(tpl, rng);
    hand::HandParams pressed = fixture.gt;
    pressed.trans.z -= 12.0;  // push the hand into the slab
    const refine::RefineWeights weights;
    const auto breakdown = refine::total_refine_loss(tpl, pressed, fixture.scene, weights);
    CHECK(breakdown.pene > 0.0);
    CHECK(breakdown.total >= weights.lambda_pene * breakdown.pene);
}

TEST_CASE("loss terms are invariant under a shared rigid motion") {
    // The cycle term uses L1 round-trip errors, so only translations leave
    // it untouched; the L2-based terms are invariant under full rigid
    // motions.
    const auto& tpl = shared_template();
    Rng rng(131);
    const auto fixture = fixtures::make_touch_scene(tpl, rng);
    const hand::HandParams params = fixtures::perturb(fixture.gt, rng);
    const auto before = refine::total_refine_loss(tpl, params, fixture.scene);
    const double tol = 1e-9 * std::max(1.0, before.total);

    SECTION("rotation plus translation") {
        const Vec3 rot_aa{0.4, -0.2, 0.7};
        const Vec3 shift{31.0, -17.0, 23.0};
        const geom::Mat3 rot = axis_angle_matrix(rot_aa);

        refine::Scene moved = fixture.scene;
        for (auto& v : moved.obj_mesh.vertices) v = rot * v + shift;
        for (auto& p : moved.obj_points.points) p = rot * p + shift;

        hand::HandParams moved_params = params;
        moved_params.global_rot =
            matrix_to_axis_angle(rot * axis_angle_matrix(params.global_rot));
        moved_params.trans = rot * params.trans + shift;

        const auto after = refine::total_refine_loss(tpl, moved_params, moved);
        CHECK(std::abs(after.contact - before.contact) <= tol);
        CHECK(std::abs(after.pene - before.pene) <= tol);
        CHECK(std::abs(after.self - before.self) <= tol);
        CHECK(std::abs(after.anatomy - before.anatomy) <= tol);
    }

    SECTION("pure translation") {
        const Vec3 shift{-24.0, 13.0, 41.0};
        refine::Scene moved = fixture.scene;
        for (auto& v : moved.obj_mesh.vertices) v += shift;
        for (auto& p : moved.obj_points.points) p += shift;
        hand::HandParams moved_params = params;
        moved_params.trans += shift;

        const auto after = refine::total_refine_loss(tpl, moved_params, moved);
        CHECK(std::abs(after.contact - before.contact) <= tol);
        CHECK(std::abs(after.pene - before.pene) <= tol);
        CHECK(std::abs(after.self - before.self) <= tol);
        CHECK(std::abs(after.cyc - before.cyc) <= tol);
        CHECK(std::abs(after.total - before.total) <= tol);
    }
}

TEST_CASE("tta from a stationary zero-loss start stays put") {
    const auto& tpl = shared_template();
    const refine::Scene scene = empty_far_scene(tpl);
    hand::HandParams init;
    refine::TtaConfig cfg;
    cfg.iterations = 20;
    const auto result = refine::tta_refine(tpl, init, scene, {}, cfg);
    REQUIRE(result.trace.size() == 21);
    for (const auto& step : result.trace) CHECK(step.total == 0.0);
    CHECK(geom::distance(result.params.trans, init.trans) == 0.0);
    CHECK(geom::distance(result.params.global_rot, init.global_rot) == 0.0);
}

TEST_CASE("tta reduces the loss of a perturbed pose") {
    const auto& tpl = shared_template();
    Rng rng(137);
    const auto fixture = fixtures::make_touch_scene(tpl, rng);
    hand::HandParams init = fixture.gt;
    init.trans.z -= 10.0;  // into the slab

    refine::TtaConfig cfg;
    cfg.iterations = 150;
    const auto result = refine::tta_refine(tpl, init, fixture.scene, {}, cfg);
    const auto& first = result.trace.front();
    double best_total = first.total, best_pene = first.pene;
    for (const auto& step : result.trace) {
        if (step.total < best_total) {
            best_total = step.total;
            best_pene = step.pene;
        }
    }
    CHECK(first.pene > 0.0);
    CHECK(best_total < first.total);
    CHECK(best_pene < first.pene);
}

TEST_CASE("tta closes a 30 mm gap against a full-palm contact map") {
    const auto& tpl = shared_template();
    Rng rng(139);
    const auto fixture = fixtures::make_touch_scene(tpl, rng);
    hand::HandParams init = fixture.gt;
    init.trans.z += 30.0;  // straight up, away from the slab

    refine::TtaConfig cfg;  // full 500-iteration schedule
    const auto result = refine::tta_refine(tpl, init, fixture.scene, {}, cfg);
    const double initial_contact = result.trace.front().contact;
    const double final_contact = result.trace.back().contact;
    REQUIRE(initial_contact > 20.0);
    CHECK(final_contact < 0.2 * initial_contact);
    CHECK(result.trace.back().total < result.trace.front().total);
}

TEST_CASE("tta returns the best iterate seen") {
    const auto& tpl = shared_template();
    Rng rng(149);
    const auto fixture = fixtures::make_touch_scene(tpl, rng);
    const hand::HandParams init = fixtures::perturb(fixture.gt, rng);
    refine::TtaConfig cfg;
    cfg.iterations = 60;
    const auto result = refine::tta_refine(tpl, init, fixture.scene, {}, cfg);
    double best = std::numeric_limits<double>::infinity();
    for (const auto& step : result.trace) best = std::min(best, step.total);
    const auto at_returned = refine::total_refine_loss(tpl, result.params, fixture.scene);
    CHECK(at_returned.total == Catch::Approx(best).margin(1e-9));
}

TEST_CASE("tta throws diverged with the trace attached") {
    const auto& tpl = shared_template();
    Rng rng(151);
    const auto fixture = fixtures::make_touch_scene(tpl, rng);
    const hand::HandParams init = fixtures::perturb(fixture.gt, rng);
    refine::TtaConfig cfg;
    cfg.iterations = 10;
    cfg.learning_rate = 1e305;  // first step leaves the finite domain
    try {
        refine::tta_refine(tpl, init, fixture.scene, {}, cfg);
        FAIL("expected divergence");
    } catch (const refine::DivergedError& e) {
        CHECK(std::string(e.what()) == "diverged");
        CHECK(e.trace().size() >= 1);
    }
}

TEST_CASE("gradient check on smooth configurations") {
    const auto& tpl = shared_template();
    Rng rng(157);
    for (int trial = 0; trial < 4; ++trial) {
        const auto [fixture, params] = fixtures::smooth_gradient_config(tpl, rng, 1200);
        const double err = refine::check_gradients(tpl, params, fixture.scene);
        REQUIRE(err < 1e-3);
    }
}

TEST_CASE("translation gradient of the contact loss matches the closed form") {
    const auto& tpl = shared_template();
    refine::Scene scene;
    scene.obj_mesh = geom::make_box_grid({200, 0, 0}, {240, 40, 40}, 1, 1, 1);
    Rng rng(163);
    scene.obj_points = geom::sample_surface(scene.obj_mesh, 400, rng);
    scene.hand_map.bits.assign(tpl.vertex_count(), 0);
    scene.hand_map.bits[0] = 1;  // a single contact vertex
    scene.obj_map.bits.assign(scene.obj_points.size(), 0);

    refine::RefineWeights weights;
    weights.lambda_pene = 0.0;
    weights.lambda_self = 0.0;
    weights.lambda_cyc = 0.0;
    weights.lambda_anatomy = 0.0;
    weights.lambda_contact = 1.0;

    const hand::HandParams params;
    CHECK(refine::check_gradients(tpl, params, scene, weights) < 1e-3);

    // central differences against the unit direction away from the nearest
    // object point
    const hand::PosedHand posed = hand::pose_hand(tpl, params);
    const geom::SpatialIndex index(scene.obj_points);
    const auto nn = index.nearest(posed.vertices[0]);
    const Vec3 direction =
        (posed.vertices[0] - scene.obj_points[nn.index]) * (1.0 / nn.distance);

    const double h = 1e-3;
    for (int axis = 0; axis < 3; ++axis) {
        hand::HandParams hi = params, lo = params;
        (axis == 0 ? hi.trans.x : axis == 1 ? hi.trans.y : hi.trans.z) += h;
        (axis == 0 ? lo.trans.x : axis == 1 ? lo.trans.y : lo.trans.z) -= h;
        const double fd = (refine::total_refine_loss(tpl, hi, scene, weights).total -
                           refine::total_refine_loss(tpl, lo, scene, weights).total) /
                          (2.0 * h);
        const double want = axis == 0 ? direction.x : axis == 1 ? direction.y : direction.z;
        REQUIRE(fd == Catch::Approx(want).margin(1e-5));
    }
}

TEST_CASE("zero-loss region has zero gradient") {
    const auto& tpl = shared_template();
    const refine::Scene scene = empty_far_scene(tpl);
    CHECK(refine::check_gradients(tpl, hand::HandParams{}, scene) == 0.0);
}

TEST_CASE("finite-difference mode takes the same first step as forward mode") {
    const auto& tpl = shared_template();
    Rng rng(167);
    const auto fixture = fixtures::make_touch_scene(tpl, rng, 1200);
    hand::HandParams init = fixture.gt;
    init.trans.z += 12.0;

    refine::TtaConfig forward_cfg;
    forward_cfg.iterations = 1;
    refine::TtaConfig fd_cfg = forward_cfg;
    fd_cfg.gradient_mode = refine::TtaConfig::GradientMode::finite_difference;

    const auto a = refine::tta_refine(tpl, init, fixture.scene, {}, forward_cfg);
    const auto b = refine::tta_refine(tpl, init, fixture.scene, {}, fd_cfg);
    REQUIRE(a.trace.size() == b.trace.size());
    CHECK(a.trace.front().total == b.trace.front().total);
    CHECK(geom::distance(a.params.trans, b.params.trans) < 1e-6);
    CHECK(geom::distance(a.params.global_rot, b.params.global_rot) < 1e-9);
    CHECK(a.trace.back().total == Catch::Approx(b.trace.back().total).epsilon(1e-6));
}
