#pragma once

#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <memory>
#include <string>
#include <vector>

#include "hoikit/refine/dual.hpp"
#include "hoikit/refine/losses.hpp"

namespace hoikit::refine {

/// Optimization variables: global rotation, translation, and the 45 pose
/// components. Shape stays frozen during refinement.
inline constexpr std::size_t kFreeParams = 6 + hand::kPoseDof;

/// Test-time optimization settings. Parameter scales express the natural
/// magnitude of each block (mm for translation, radians elsewhere); the
/// optimizer steps in scale-normalized space and finite differencing uses
/// h = fd_step_rel * scale.
struct TtaConfig {
    int iterations = 500;
    double learning_rate = 1e-2;
    enum class GradientMode { forward_exact, finite_difference };
    GradientMode gradient_mode = GradientMode::forward_exact;
    double rot_scale = 1.0;
    double trans_scale = 100.0;
    double pose_scale = 1.0;
    double fd_step_rel = 1e-4;
    double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
    double self_margin = 2.0;  // mm

    void validate() const {
        if (iterations < 1) throw Error("iterations must be >= 1");
        if (!(learning_rate > 0.0)) throw Error("learning rate must be positive");
        if (!(rot_scale > 0.0 && trans_scale > 0.0 && pose_scale > 0.0))
            throw Error("parameter scales must be positive");
        if (!(fd_step_rel > 0.0)) throw Error("fd step must be positive");
        if (!(self_margin > 0.0)) throw Error("self margin must be positive");
    }

    std::array<double, kFreeParams> scales() const {
        std::array<double, kFreeParams> s{};
        for (std::size_t i = 0; i < 3; ++i) s[i] = rot_scale;
        for (std::size_t i = 3; i < 6; ++i) s[i] = trans_scale;
        for (std::size_t i = 6; i < kFreeParams; ++i) s[i] = pose_scale;
        return s;
    }
};

inline nlohmann::ordered_json to_json(const TtaConfig& c) {
    return {{"iterations", c.iterations},
            {"learning_rate", c.learning_rate},
            {"gradient_mode",
             c.gradient_mode == TtaConfig::GradientMode::forward_exact ? "forward"
                                                                       : "finite_difference"},
            {"rot_scale", c.rot_scale},
            {"trans_scale", c.trans_scale},
            {"pose_scale", c.pose_scale},
            {"fd_step_rel", c.fd_step_rel},
            {"self_margin", c.self_margin}};
}

inline TtaConfig tta_config_from_json(const nlohmann::json& j) {
    TtaConfig c;
    if (j.contains("iterations")) c.iterations = j.at("iterations").get<int>();
    if (j.contains("learning_rate")) c.learning_rate = j.at("learning_rate").get<double>();
    if (j.contains("gradient_mode")) {
        const std::string mode = j.at("gradient_mode").get<std::string>();
        if (mode == "forward")
            c.gradient_mode = TtaConfig::GradientMode::forward_exact;
        else if (mode == "finite_difference")
            c.gradient_mode = TtaConfig::GradientMode::finite_difference;
        else
            throw Error("unknown gradient mode: " + mode);
    }
    if (j.contains("rot_scale")) c.rot_scale = j.at("rot_scale").get<double>();
    if (j.contains("trans_scale")) c.trans_scale = j.at("trans_scale").get<double>();
    if (j.contains("pose_scale")) c.pose_scale = j.at("pose_scale").get<double>();
    if (j.contains("fd_step_rel")) c.fd_step_rel = j.at("fd_step_rel").get<double>();
    if (j.contains("self_margin")) c.self_margin = j.at("self_margin").get<double>();
    c.validate();
    return c;
}

/// One refinement problem: the object geometry plus the contact maps the
/// optimization should realize.
struct Scene {
    geom::TriMesh obj_mesh;
    geom::PointCloud obj_points;
    contact::ContactMap hand_map;  // over template vertices
    contact::ContactMap obj_map;   // over object points
};

/// Error carrying the partial trace when the optimization left the finite
/// domain.
class DivergedError : public Error {
public:
    explicit DivergedError(std::vector<LossBreakdown> trace)
        : Error("diverged"), trace_(std::move(trace)) {}
    const std::vector<LossBreakdown>& trace() const { return trace_; }

private:
    std::vector<LossBreakdown> trace_;
};

namespace detail {

/// Immutable per-scene state shared by every loss evaluation.
struct EvalContext {
    const hand::HandTemplate& tpl;
    const Scene& scene;
    RefineWeights weights;
    JointLimits limits;
    double margin;
    geom::SpatialIndex obj_index;                       // full object cloud
    std::vector<std::uint32_t> hand_contact_idx;        // template vertex ids
    std::vector<geom::Vec3> obj_contact_pts;            // static coordinates
    std::unique_ptr<geom::SpatialIndex> obj_contact_index;
    std::vector<std::vector<std::uint32_t>> exclusion;
    geom::Aabb obj_box;

    EvalContext(const hand::HandTemplate& tpl_, const Scene& scene_, const RefineWeights& w,
                const JointLimits& limits_, double margin_)
        : tpl(tpl_), scene(scene_), weights(w), limits(limits_), margin(margin_),
          obj_index(scene_.obj_points) {
        weights.validate();
        if (scene.hand_map.size() != tpl.vertex_count())
            throw Error("hand contact map length does not match the template");
        if (scene.obj_map.size() != scene.obj_points.size())
            throw Error("object contact map length does not match the point cloud");
        scene.obj_mesh.require_watertight();
        hand_contact_idx = scene.hand_map.indices();
        for (std::uint32_t i : scene.obj_map.indices())
            obj_contact_pts.push_back(scene.obj_points[i]);
        if (!obj_contact_pts.empty())
            obj_contact_index = std::make_unique<geom::SpatialIndex>(geom::PointCloud(obj_contact_pts));
        exclusion = build_self_exclusion(tpl.mesh, margin);
        obj_box = scene.obj_mesh.bounds();
    }
};

template <class S>
struct EvalResult {
    S contact{}, pene{}, anatomy{}, self{}, cyc{}, total{};
};

/// The discrete decisions a loss evaluation makes. Two evaluations with
/// equal structures differ only through smooth distance terms, which is the
/// premise of the fixed-structure gradient.
struct LossStructure {
    std::vector<std::uint32_t> contact_nn;   // per contact vertex: object NN
    std::vector<std::uint32_t> inside;       // vertices inside the object
    std::vector<std::uint32_t> nearest_face; // per inside vertex: surface face
    std::vector<std::uint64_t> self_pairs;   // close non-adjacent vertex pairs
    std::vector<std::uint32_t> phi;          // hand contact -> object contact
    std::vector<std::uint32_t> psi_of_phi;   // round trip back to hand contact
    std::vector<std::uint32_t> psi;          // object contact -> hand contact
    std::vector<std::uint32_t> phi_of_psi;   // round trip back to object contact
    std::vector<std::int8_t> l1_signs;       // per hand-pair coordinate sign

    bool operator==(const LossStructure&) const = default;
};

template <class S>
geom::Vec3 values(const geom::Vec3T<S>& v) {
    using geom::value_of;
    using hoikit::value_of;
    return {value_of(v.x), value_of(v.y), value_of(v.z)};
}

template <class S>
S l1_distance(const geom::Vec3T<S>& a, const geom::Vec3T<S>& b) {
    using std::abs;
    return abs(a.x - b.x) + abs(a.y - b.y) + abs(a.z - b.z);
}

/// Single evaluation of the refinement objective. Discrete structure
/// (nearest neighbors, inside sets, close pairs) is decided on values and
/// held fixed, so derivatives flow only through the continuous distances.
template <class S>
EvalResult<S> evaluate_loss(const EvalContext& ctx, const hand::PoseParamsT<S>& params,
                            LossStructure* capture = nullptr) {
    using geom::value_of;
    using hoikit::value_of;
    const auto bones = hand::forward_kinematics(ctx.tpl, params);
    const std::size_t n = ctx.tpl.vertex_count();
    std::vector<geom::Vec3T<S>> verts(n);
    std::vector<geom::Vec3> vals(n);
    bool finite = true;
    for (std::size_t i = 0; i < n; ++i) {
        verts[i] = hand::skin_vertex(ctx.tpl, bones, i);
        vals[i] = values(verts[i]);
        finite = finite && geom::is_finite(vals[i]);
    }

    using std::sqrt;
    EvalResult<S> out;
    if (!finite) {  // divergence surfaces through the total
        out.total = S(std::numeric_limits<double>::infinity());
        return out;
    }

    if (!ctx.hand_contact_idx.empty()) {
        S sum{};
        for (std::uint32_t i : ctx.hand_contact_idx) {
            const auto nn = ctx.obj_index.nearest(vals[i]);
            if (capture) capture->contact_nn.push_back(nn.index);
            const geom::Vec3& target = ctx.scene.obj_points[nn.index];
            sum += geom::distance(verts[i], geom::Vec3T<S>{S(target.x), S(target.y), S(target.z)});
        }
        out.contact = sum / double(ctx.hand_contact_idx.size());
    }

    for (std::size_t i = 0; i < n; ++i) {
        if (!ctx.obj_box.contains(vals[i])) continue;
        if (geom::winding_number(ctx.scene.obj_mesh, vals[i]) <= 0.5) continue;
        if (capture) capture->inside.push_back(std::uint32_t(i));
        const geom::SurfacePoint sp = geom::closest_surface_point_ex(ctx.scene.obj_mesh, vals[i]);
        if (capture) capture->nearest_face.push_back(sp.face);
        const geom::Vec3& q = sp.point;
        out.pene += geom::distance(verts[i], geom::Vec3T<S>{S(q.x), S(q.y), S(q.z)});
    }

    for (int b = 0; b < hand::kNumArticulated; ++b) {
        const S comps[3] = {params.pose[b].x, params.pose[b].y, params.pose[b].z};
        for (int c = 0; c < 3; ++c) {
            const int dof = b * 3 + c;
            if (value_of(comps[c]) > ctx.limits.hi[dof]) {
                const S over = comps[c] - S(ctx.limits.hi[dof]);
                out.anatomy += over * over;
            } else if (value_of(comps[c]) < ctx.limits.lo[dof]) {
                const S under = S(ctx.limits.lo[dof]) - comps[c];
                out.anatomy += under * under;
            }
        }
    }

    {
        const geom::SpatialIndex posed_index((geom::PointCloud(vals)));
        for (std::uint32_t a = 0; a < n; ++a) {
            for (std::uint32_t b : posed_index.radius_search(vals[a], ctx.margin)) {
                if (b <= a) continue;
                const auto& skip = ctx.exclusion[a];
                if (std::binary_search(skip.begin(), skip.end(), b)) continue;
                if (geom::distance(vals[a], vals[b]) >= ctx.margin) continue;
                if (capture) capture->self_pairs.push_back((std::uint64_t(a) << 32) | b);
                const S pen = S(ctx.margin) - geom::distance(verts[a], verts[b]);
                out.self += pen * pen;
            }
        }
    }

    if (!ctx.hand_contact_idx.empty() && !ctx.obj_contact_pts.empty()) {
        // hand -> object -> hand round trip; both endpoints move with the pose
        auto nearest_hand_contact = [&](const geom::Vec3& q) {
            std::size_t best = 0;
            double best_d2 = std::numeric_limits<double>::infinity();
            for (std::size_t i = 0; i < ctx.hand_contact_idx.size(); ++i) {
                const double d2 = geom::squared_distance(vals[ctx.hand_contact_idx[i]], q);
                if (d2 < best_d2) { best_d2 = d2; best = i; }
            }
            return best;
        };
        S hand_term{};
        for (std::uint32_t hi : ctx.hand_contact_idx) {
            const auto via = ctx.obj_contact_index->nearest(vals[hi]);
            const std::size_t back = nearest_hand_contact(ctx.obj_contact_pts[via.index]);
            if (capture) {
                capture->phi.push_back(via.index);
                capture->psi_of_phi.push_back(ctx.hand_contact_idx[back]);
                const geom::Vec3 diff = vals[ctx.hand_contact_idx[back]] - vals[hi];
                for (double c : {diff.x, diff.y, diff.z})
                    capture->l1_signs.push_back(c > 0.0 ? 1 : (c < 0.0 ? -1 : 0));
            }
            hand_term += l1_distance(verts[ctx.hand_contact_idx[back]], verts[hi]);
        }
        // object -> hand -> object round trip; both endpoints are static
        // object coordinates, so with the maps held fixed this term carries
        // no gradient and enters as a constant.
        double obj_term = 0.0;
        for (const geom::Vec3& o : ctx.obj_contact_pts) {
            const std::size_t via = nearest_hand_contact(o);
            const auto back = ctx.obj_contact_index->nearest(vals[ctx.hand_contact_idx[via]]);
            if (capture) {
                capture->psi.push_back(ctx.hand_contact_idx[via]);
                capture->phi_of_psi.push_back(back.index);
            }
            const geom::Vec3& o2 = ctx.obj_contact_pts[back.index];
            obj_term += std::abs(o2.x - o.x) + std::abs(o2.y - o.y) + std::abs(o2.z - o.z);
        }
        out.cyc = hand_term / double(ctx.hand_contact_idx.size()) +
                  S(obj_term / double(ctx.obj_contact_pts.size()));
    }

    out.total = ctx.weights.lambda_contact * out.contact + ctx.weights.lambda_pene * out.pene +
                ctx.weights.lambda_anatomy * out.anatomy + ctx.weights.lambda_self * out.self +
                ctx.weights.lambda_cyc * out.cyc;
    return out;
}

inline LossBreakdown to_breakdown(const EvalResult<double>& r) {
    return {r.contact, r.pene, r.anatomy, r.self, r.cyc, r.total};
}

template <std::size_t N>
LossBreakdown to_breakdown(const EvalResult<Dual<N>>& r) {
    return {r.contact.v, r.pene.v, r.anatomy.v, r.self.v, r.cyc.v, r.total.v};
}

inline std::array<double, kFreeParams> pack(const hand::HandParams& p) {
    std::array<double, kFreeParams> x{};
    x[0] = p.global_rot.x; x[1] = p.global_rot.y; x[2] = p.global_rot.z;
    x[3] = p.trans.x; x[4] = p.trans.y; x[5] = p.trans.z;
    for (int b = 0; b < hand::kNumArticulated; ++b) {
        x[6 + b * 3 + 0] = p.pose[b].x;
        x[6 + b * 3 + 1] = p.pose[b].y;
        x[6 + b * 3 + 2] = p.pose[b].z;
    }
    return x;
}

inline hand::HandParams unpack(const std::array<double, kFreeParams>& x,
                               const hand::HandParams& base) {
    hand::HandParams p = base;
    p.global_rot = {x[0], x[1], x[2]};
    p.trans = {x[3], x[4], x[5]};
    for (int b = 0; b < hand::kNumArticulated; ++b)
        p.pose[b] = {x[6 + b * 3 + 0], x[6 + b * 3 + 1], x[6 + b * 3 + 2]};
    return p;
}

template <class S>
hand::PoseParamsT<S> lift_free(const std::array<S, kFreeParams>& x,
                               const std::array<double, 6>& shape) {
    hand::PoseParamsT<S> p;
    p.global_rot = {x[0], x[1], x[2]};
    p.trans = {x[3], x[4], x[5]};
    for (int b = 0; b < hand::kNumArticulated; ++b)
        p.pose[b] = {x[6 + b * 3 + 0], x[6 + b * 3 + 1], x[6 + b * 3 + 2]};
    p.shape = shape;
    return p;
}

using Grad = Dual<kFreeParams>;

inline EvalResult<Grad> evaluate_with_gradient(const EvalContext& ctx,
                                               const std::array<double, kFreeParams>& x,
                                               const std::array<double, 6>& shape) {
    std::array<Grad, kFreeParams> seeded;
    for (std::size_t i = 0; i < kFreeParams; ++i) seeded[i] = Grad::seed(x[i], i);
    return evaluate_loss(ctx, lift_free(seeded, shape));
}

inline double evaluate_value(const EvalContext& ctx, const std::array<double, kFreeParams>& x,
                             const std::array<double, 6>& shape) {
    std::array<double, kFreeParams> plain = x;
    return evaluate_loss(ctx, lift_free(plain, shape)).total;
}

}  // namespace detail

/// Evaluates all refinement loss terms at the given pose.
inline LossBreakdown total_refine_loss(const hand::HandTemplate& tpl,
                                       const hand::HandParams& params, const Scene& scene,
                                       const RefineWeights& weights = {},
                                       const JointLimits& limits = JointLimits::defaults(),
                                       double self_margin = 2.0) {
    params.validate();
    const detail::EvalContext ctx(tpl, scene, weights, limits, self_margin);
    return detail::to_breakdown(detail::evaluate_loss(ctx, hand::lift_params<double>(params)));
}

struct TtaResult {
    hand::HandParams params;
    std::vector<LossBreakdown> trace;  // loss before each step, then final
};

/// Deterministic test-time optimization of (global_rot, trans, pose) with
/// Adam in scale-normalized parameter space; shape stays frozen. Returns the
/// best-loss iterate and the full trace. Throws DivergedError when the loss
/// leaves the finite domain.
inline TtaResult tta_refine(const hand::HandTemplate& tpl, const hand::HandParams& init,
                            const Scene& scene, const RefineWeights& weights = {},
                            const TtaConfig& cfg = {},
                            const JointLimits& limits = JointLimits::defaults()) {
    cfg.validate();
    init.validate();
    const detail::EvalContext ctx(tpl, scene, weights, limits, cfg.self_margin);
    const auto scales = cfg.scales();

    std::array<double, kFreeParams> x = detail::pack(init);
    std::array<double, kFreeParams> m{}, v{};
    std::vector<LossBreakdown> trace;
    trace.reserve(std::size_t(cfg.iterations) + 1);

    std::array<double, kFreeParams> best_x = x;
    double best_total = std::numeric_limits<double>::infinity();

    auto record = [&](const LossBreakdown& loss, const std::array<double, kFreeParams>& at) {
        trace.push_back(loss);
        if (!std::isfinite(loss.total)) throw DivergedError(std::move(trace));
        if (loss.total < best_total) {
            best_total = loss.total;
            best_x = at;
        }
    };

    for (int iter = 0; iter < cfg.iterations; ++iter) {
        std::array<double, kFreeParams> grad{};
        LossBreakdown loss;
        if (cfg.gradient_mode == TtaConfig::GradientMode::forward_exact) {
            const auto result = detail::evaluate_with_gradient(ctx, x, init.shape);
            loss = detail::to_breakdown(result);
            for (std::size_t i = 0; i < kFreeParams; ++i) grad[i] = result.total.d[i];
        } else {
            std::array<double, kFreeParams> plain = x;
            loss = detail::to_breakdown(
                detail::evaluate_loss(ctx, detail::lift_free(plain, init.shape)));
            for (std::size_t i = 0; i < kFreeParams; ++i) {
                const double h = cfg.fd_step_rel * scales[i];
                auto lo = x, hi = x;
                hi[i] += h;
                lo[i] -= h;
                grad[i] = (detail::evaluate_value(ctx, hi, init.shape) -
                           detail::evaluate_value(ctx, lo, init.shape)) /
                          (2.0 * h);
            }
        }
        record(loss, x);

        const double t = double(iter + 1);
        for (std::size_t i = 0; i < kFreeParams; ++i) {
            const double g = grad[i] * scales[i];  // d(loss)/d(normalized param)
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
            const double m_hat = m[i] / (1.0 - std::pow(cfg.beta1, t));
            const double v_hat = v[i] / (1.0 - std::pow(cfg.beta2, t));
            const double step = cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.adam_eps);
            x[i] -= step * scales[i];
        }
    }
    {
        std::array<double, kFreeParams> plain = x;
        record(detail::to_breakdown(detail::evaluate_loss(ctx, detail::lift_free(plain, init.shape))),
               x);
    }

    return {detail::unpack(best_x, init), std::move(trace)};
}

/// Compares the forward-mode gradient of the total loss against central
/// finite differences over all free parameters. Relative error is
/// normalized by max(|g_a|, |g_fd|, 1).
inline double check_gradients(const hand::HandTemplate& tpl, const hand::HandParams& params,
                              const Scene& scene, const RefineWeights& weights = {},
                              const TtaConfig& cfg = {},
                              const JointLimits& limits = JointLimits::defaults()) {
    params.validate();
    const detail::EvalContext ctx(tpl, scene, weights, limits, cfg.self_margin);
    const auto scales = cfg.scales();
    const std::array<double, kFreeParams> x = detail::pack(params);

    const auto analytic = detail::evaluate_with_gradient(ctx, x, params.shape);
    double worst = 0.0;
    for (std::size_t i = 0; i < kFreeParams; ++i) {
        const double h = cfg.fd_step_rel * scales[i];
        auto lo = x, hi = x;
        hi[i] += h;
        lo[i] -= h;
        const double fd = (detail::evaluate_value(ctx, hi, params.shape) -
                           detail::evaluate_value(ctx, lo, params.shape)) /
                          (2.0 * h);
        const double ga = analytic.total.d[i];
        const double err = std::abs(ga - fd) / std::max({std::abs(ga), std::abs(fd), 1.0});
        worst = std::max(worst, err);
    }
    return worst;
}

/// Scene file: object paths, contact maps, init params, weights and config
/// in one JSON document. Relative paths resolve against the file's parent.
struct SceneBundle {
    Scene scene;
    hand::HandParams init;
    RefineWeights weights;
    TtaConfig tta;
};

inline SceneBundle load_scene_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open scene file: " + path);
    nlohmann::json j;
    in >> j;
    const std::filesystem::path base = std::filesystem::path(path).parent_path();
    auto resolve = [&](const std::string& p) {
        const std::filesystem::path fp(p);
        return fp.is_absolute() ? fp.string() : (base / fp).string();
    };
    SceneBundle bundle;
    bundle.scene.obj_mesh = geom::read_obj_file(resolve(j.at("object_mesh").get<std::string>()));
    bundle.scene.obj_points =
        geom::read_xyz_file(resolve(j.at("object_points").get<std::string>()));
    bundle.scene.hand_map = contact::contact_map_from_json(j.at("contact_h"));
    bundle.scene.obj_map = contact::contact_map_from_json(j.at("contact_o"));
    bundle.init = hand::hand_params_from_json(j.at("init_params"));
    if (j.contains("weights")) bundle.weights = refine_weights_from_json(j.at("weights"));
    if (j.contains("tta")) bundle.tta = tta_config_from_json(j.at("tta"));
    return bundle;
}

}  // namespace hoikit::refine
