#pragma once

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <thread>

#include "hoikit/cli/config.hpp"
#include "hoikit/hand/hand_template.hpp"
#include "hoikit/metrics/metrics.hpp"

namespace hoikit::cli {

namespace detail {

template <class Fn>
void parallel_for(std::size_t n, int jobs, Fn&& fn) {
    if (jobs <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            fn(i);
        }
    };
    std::vector<std::thread> pool;
    const std::size_t count = std::min<std::size_t>(std::size_t(jobs), n);
    pool.reserve(count);
    for (std::size_t t = 0; t < count; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
}

inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

struct SampleOutcome {
    bool ok = false;
    std::string error;
    nlohmann::ordered_json output;
};

inline nlohmann::ordered_json error_list(const std::vector<SampleRecord>& records,
                                         const std::vector<SampleOutcome>& outcomes) {
    nlohmann::ordered_json errors = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < outcomes.size(); ++i)
        if (!outcomes[i].ok) errors.push_back({{"id", records[i].id}, {"error", outcomes[i].error}});
    return errors;
}

}  // namespace detail

/// Shared per-run assets: the resolved config and the hand template.
struct Runtime {
    RunConfig config;
    hand::HandTemplate tpl;

    explicit Runtime(RunConfig cfg) : config(std::move(cfg)) {
        config.validate();
        if (config.template_path.empty()) {
            tpl = hand::generate_capsule_hand_template();
        } else {
            // accept both a bare template document and the `template` cmd output
            const nlohmann::json j = load_json_file(config.template_path);
            tpl = hand::hand_template_from_json(j.contains("template") ? j.at("template") : j);
        }
    }

    geom::PointCloud object_cloud(const SampleRecord& r, const geom::TriMesh& mesh) const {
        if (!r.obj_points.empty()) return geom::read_xyz_file(r.obj_points);
        Rng rng = Rng::substream(config.seed, "sampling/" + r.id);
        return geom::sample_surface(mesh, std::size_t(r.sample_points), rng);
    }

    hand::HandParams params_from_file(const std::string& path) const {
        return hand::hand_params_from_json(load_json_file(path));
    }

    contact::ContactAnnotation annotate(const hand::PosedHand& posed,
                                        const geom::PointCloud& obj) const {
        return contact::dataset_contact_annotation(geom::PointCloud(posed.vertices), obj,
                                                   tpl.part_label, config.contact,
                                                   config.min_hits);
    }
};

inline int cmd_template(const Runtime& rt, const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    nlohmann::ordered_json j;
    j["format_version"] = kFormatVersion;
    j["template"] = hand::to_json(rt.tpl);
    j["config"] = to_json(rt.config);
    write_json_file((fs::path(out_dir) / "template.json").string(), j);
    geom::write_obj_file((fs::path(out_dir) / "template.obj").string(), rt.tpl.mesh);
    std::cout << "template: " << rt.tpl.vertex_count() << " vertices, "
              << rt.tpl.mesh.faces.size() << " faces\n";
    return 0;
}

inline int cmd_contact(const Runtime& rt, const std::string& manifest_path,
                       const std::string& out_dir) {
    namespace fs = std::filesystem;
    const std::vector<SampleRecord> records = load_manifest(manifest_path);
    fs::create_directories(out_dir);
    std::vector<detail::SampleOutcome> outcomes(records.size());

    detail::parallel_for(records.size(), rt.config.jobs, [&](std::size_t i) {
        auto& out = outcomes[i];
        try {
            const SampleRecord& r = records[i];
            const geom::TriMesh mesh = geom::read_obj_file(r.obj_mesh);
            const geom::PointCloud cloud = rt.object_cloud(r, mesh);
            const hand::HandParams gt = rt.params_from_file(r.gt_params);
            const hand::PosedHand posed = hand::pose_hand(rt.tpl, gt);
            const contact::ContactAnnotation ann = rt.annotate(posed, cloud);
            nlohmann::ordered_json j;
            j["format_version"] = kFormatVersion;
            j["id"] = r.id;
            j["verb"] = r.verb;
            j["scale"] = r.scale;
            j["contact_params"] = contact::to_json(rt.config.contact);
            j["c_h"] = contact::to_json(ann.hand_map);
            j["c_o"] = contact::to_json(ann.obj_map);
            j["label7"] = ann.label.to_string();
            j["label7_bits"] = int(ann.label.bits);
            j["config"] = to_json(rt.config);
            out.output = std::move(j);
            out.ok = true;
        } catch (const std::exception& e) {
            out.error = e.what();
        }
    });

    for (std::size_t i = 0; i < records.size(); ++i)
        if (outcomes[i].ok)
            write_json_file((fs::path(out_dir) / (records[i].id + ".contact.json")).string(),
                            outcomes[i].output);

    nlohmann::ordered_json report;
    report["format_version"] = kFormatVersion;
    nlohmann::ordered_json done = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < records.size(); ++i)
        if (outcomes[i].ok) done.push_back(records[i].id);
    report["samples"] = std::move(done);
    report["errors"] = detail::error_list(records, outcomes);
    report["config"] = to_json(rt.config);
    write_json_file((fs::path(out_dir) / "contact_report.json").string(), report);

    for (const auto& o : outcomes)
        if (!o.ok) std::cerr << "error: " << o.error << '\n';
    const bool any_fail = std::any_of(outcomes.begin(), outcomes.end(),
                                      [](const auto& o) { return !o.ok; });
    return any_fail ? 2 : 0;
}

inline int cmd_metrics(const Runtime& rt, const std::string& manifest_path,
                       const std::string& out_dir) {
    namespace fs = std::filesystem;
    const std::vector<SampleRecord> records = load_manifest(manifest_path);
    fs::create_directories(out_dir);

    if (rt.config.extractor != "moments-v1")
        throw Error("unknown feature extractor: " + rt.config.extractor);
    const metrics::FeatureExtractor extractor = metrics::moments_v1_extractor();

    struct Row {
        metrics::SampleMetrics cells;
        metrics::Feature diversity_feature;
        geom::PointCloud pred_cloud{{geom::Vec3{}}};
        geom::PointCloud gt_cloud{{geom::Vec3{}}};
    };
    std::vector<detail::SampleOutcome> outcomes(records.size());
    std::vector<Row> rows(records.size());

    detail::parallel_for(records.size(), rt.config.jobs, [&](std::size_t i) {
        auto& out = outcomes[i];
        try {
            const SampleRecord& r = records[i];
            if (r.pred_params.empty()) throw Error("sample has no predicted params");
            const geom::TriMesh obj_mesh = geom::read_obj_file(r.obj_mesh);
            const geom::PointCloud obj_cloud = rt.object_cloud(r, obj_mesh);
            const hand::HandParams gt = rt.params_from_file(r.gt_params);
            const hand::HandParams pred = rt.params_from_file(r.pred_params);
            const hand::PosedHand gt_posed = hand::pose_hand(rt.tpl, gt);
            const hand::PosedHand pred_posed = hand::pose_hand(rt.tpl, pred);

            Row row;
            row.cells.id = r.id;
            row.cells.mpvpe = metrics::mpvpe(pred_posed.vertices, gt_posed.vertices);
            const geom::TriMesh pred_mesh = hand::posed_mesh(rt.tpl, pred_posed);
            row.cells.pd = metrics::penetration_depth(pred_mesh, obj_mesh);
            double voxel = rt.config.pv_voxel_mm;
            if (voxel <= 0.0) {
                const geom::Vec3 ext = obj_mesh.bounds().extent();
                voxel = std::max({ext.x, ext.y, ext.z}) / 32.0;
            }
            row.cells.pv = metrics::penetration_volume(pred_mesh, obj_mesh, voxel);

            const contact::ContactAnnotation pred_ann = rt.annotate(pred_posed, obj_cloud);
            hand::ContactLabel7 gt_label;
            contact::ContactMap gt_hand_map;
            if (!r.contact_h.empty()) {
                gt_hand_map = contact::contact_map_from_json(load_json_file(r.contact_h));
                gt_label = hand::contact_label7(gt_hand_map.bits, rt.tpl.part_label,
                                                rt.config.min_hits);
            } else {
                const contact::ContactAnnotation gt_ann = rt.annotate(gt_posed, obj_cloud);
                gt_hand_map = gt_ann.hand_map;
                gt_label = gt_ann.label;
            }
            if (rt.config.parts17) {
                const std::uint32_t pred17 = hand::contact_parts17(
                    pred_ann.hand_map.bits, rt.tpl.part_label, rt.config.min_hits);
                const std::uint32_t gt17 = hand::contact_parts17(
                    gt_hand_map.bits, rt.tpl.part_label, rt.config.min_hits);
                std::tie(row.cells.p_iou, row.cells.p_f1) = metrics::set_iou_f1(pred17, gt17);
            } else {
                std::tie(row.cells.p_iou, row.cells.p_f1) =
                    metrics::part_iou_f1(pred_ann.label, gt_label);
            }

            row.diversity_feature = metrics::hand_diversity_feature(pred_posed);
            row.pred_cloud = geom::PointCloud(pred_posed.vertices);
            row.gt_cloud = geom::PointCloud(gt_posed.vertices);
            rows[i] = std::move(row);
            out.ok = true;
        } catch (const std::exception& e) {
            out.error = e.what();
        }
    });

    metrics::MetricReport report;
    std::vector<metrics::Feature> features;
    std::vector<geom::PointCloud> pred_set, gt_set;
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (!outcomes[i].ok) continue;
        report.samples.push_back(rows[i].cells);
        features.push_back(std::move(rows[i].diversity_feature));
        pred_set.push_back(std::move(rows[i].pred_cloud));
        gt_set.push_back(std::move(rows[i].gt_cloud));
    }

    bool diversity_failed = false;
    std::string diversity_error;
    report.kmeans_k = rt.config.kmeans_k;
    report.extractor = extractor.name;
    if (!report.samples.empty()) {
        try {
            const metrics::Diversity div = metrics::diversity(features, rt.config.kmeans_k,
                                                              rt.config.seed,
                                                              rt.config.kmeans_max_iter);
            report.entropy = div.entropy;
            report.cluster_size = div.cluster_size;
        } catch (const std::exception& e) {
            diversity_failed = true;
            diversity_error = e.what();
        }
        report.p_fid = metrics::p_fid(pred_set, gt_set, extractor);
    }

    nlohmann::ordered_json j = metrics::to_json(report);
    j["format_version"] = kFormatVersion;
    if (diversity_failed) j["diversity_error"] = diversity_error;
    j["errors"] = detail::error_list(records, outcomes);
    j["config"] = to_json(rt.config);
    write_json_file((fs::path(out_dir) / "metrics.json").string(), j);
    {
        std::ofstream table(fs::path(out_dir) / "metrics.txt");
        table << metrics::to_table(report);
    }

    for (const auto& o : outcomes)
        if (!o.ok) std::cerr << "error: " << o.error << '\n';
    if (diversity_failed) std::cerr << "error: diversity: " << diversity_error << '\n';
    const bool any_fail = diversity_failed ||
                          std::any_of(outcomes.begin(), outcomes.end(),
                                      [](const auto& o) { return !o.ok; });
    return any_fail ? 2 : 0;
}

inline int cmd_refine(const Runtime& rt, const std::string& manifest_path,
                      const std::string& out_dir) {
    namespace fs = std::filesystem;
    const std::vector<SampleRecord> records = load_manifest(manifest_path);
    fs::create_directories(out_dir);

    struct RefineRow {
        nlohmann::ordered_json summary;
        std::string trace_csv;
    };
    std::vector<detail::SampleOutcome> outcomes(records.size());
    std::vector<RefineRow> rows(records.size());

    detail::parallel_for(records.size(), rt.config.jobs, [&](std::size_t i) {
        auto& out = outcomes[i];
        try {
            const SampleRecord& r = records[i];
            if (r.pred_params.empty()) throw Error("sample has no predicted params to refine");
            refine::Scene scene;
            scene.obj_mesh = geom::read_obj_file(r.obj_mesh);
            scene.obj_points = rt.object_cloud(r, scene.obj_mesh);
            const hand::HandParams init = rt.params_from_file(r.pred_params);
            if (!r.contact_h.empty() && !r.contact_o.empty()) {
                scene.hand_map = contact::contact_map_from_json(load_json_file(r.contact_h));
                scene.obj_map = contact::contact_map_from_json(load_json_file(r.contact_o));
            } else {
                const hand::HandParams gt = rt.params_from_file(r.gt_params);
                const contact::ContactAnnotation ann =
                    rt.annotate(hand::pose_hand(rt.tpl, gt), scene.obj_points);
                scene.hand_map = ann.hand_map;
                scene.obj_map = ann.obj_map;
            }

            const refine::TtaResult result =
                refine::tta_refine(rt.tpl, init, scene, rt.config.weights, rt.config.tta);
            double best_total = result.trace.front().total;
            for (const auto& step : result.trace) best_total = std::min(best_total, step.total);

            nlohmann::ordered_json j;
            j["format_version"] = kFormatVersion;
            j["id"] = r.id;
            j["initial_total"] = result.trace.front().total;
            j["final_total"] = best_total;
            j["iterations"] = rt.config.tta.iterations;
            j["params"] = hand::to_json(result.params);
            j["config"] = to_json(rt.config);

            std::string csv = "iter,contact,pene,anatomy,self,cyc,total\n";
            for (std::size_t t = 0; t < result.trace.size(); ++t) {
                const auto& b = result.trace[t];
                csv += std::to_string(t);
                for (double v : {b.contact, b.pene, b.anatomy, b.self, b.cyc, b.total})
                    csv += "," + detail::format_double(v);
                csv += "\n";
            }
            rows[i] = {std::move(j), std::move(csv)};
            out.ok = true;
        } catch (const std::exception& e) {
            out.error = e.what();
        }
    });

    nlohmann::ordered_json summary_rows = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (!outcomes[i].ok) continue;
        write_json_file((fs::path(out_dir) / (records[i].id + ".refined.json")).string(),
                        rows[i].summary);
        std::ofstream csv(fs::path(out_dir) / (records[i].id + ".trace.csv"));
        csv << rows[i].trace_csv;
        summary_rows.push_back({{"id", records[i].id},
                                {"initial_total", rows[i].summary["initial_total"]},
                                {"final_total", rows[i].summary["final_total"]}});
    }
    nlohmann::ordered_json report;
    report["format_version"] = kFormatVersion;
    report["samples"] = std::move(summary_rows);
    report["errors"] = detail::error_list(records, outcomes);
    report["config"] = to_json(rt.config);
    write_json_file((fs::path(out_dir) / "refine_report.json").string(), report);

    for (const auto& o : outcomes)
        if (!o.ok) std::cerr << "error: " << o.error << '\n';
    const bool any_fail = std::any_of(outcomes.begin(), outcomes.end(),
                                      [](const auto& o) { return !o.ok; });
    return any_fail ? 2 : 0;
}

/// Single-scene refinement from a bundled scene file.
inline int cmd_refine_scene(const Runtime& rt, const std::string& scene_path,
                            const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    const refine::SceneBundle bundle = refine::load_scene_file(scene_path);
    const refine::TtaResult result =
        refine::tta_refine(rt.tpl, bundle.init, bundle.scene, bundle.weights, bundle.tta);
    double best_total = result.trace.front().total;
    for (const auto& step : result.trace) best_total = std::min(best_total, step.total);

    nlohmann::ordered_json j;
    j["format_version"] = kFormatVersion;
    j["scene"] = scene_path;
    j["initial_total"] = result.trace.front().total;
    j["final_total"] = best_total;
    j["params"] = hand::to_json(result.params);
    j["config"] = to_json(rt.config);
    write_json_file((fs::path(out_dir) / "refined.json").string(), j);

    std::ofstream csv(fs::path(out_dir) / "trace.csv");
    csv << "iter,contact,pene,anatomy,self,cyc,total\n";
    for (std::size_t t = 0; t < result.trace.size(); ++t) {
        const auto& b = result.trace[t];
        csv << t;
        for (double v : {b.contact, b.pene, b.anatomy, b.self, b.cyc, b.total})
            csv << ',' << detail::format_double(v);
        csv << '\n';
    }
    return 0;
}

inline int cmd_framepair(const Runtime& rt, const std::string& clip_dir,
                         const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    const framepair::MaskSequence seq = framepair::load_clip_directory(clip_dir);
    const framepair::FramePairResult result =
        framepair::process_clip(seq, rt.config.selection, rt.config.ransac_iterations,
                                rt.config.ransac_inlier_tol, rt.config.seed);
    const std::string clip = fs::path(clip_dir).filename().string();
    nlohmann::ordered_json j = framepair::to_json(result);
    j["format_version"] = kFormatVersion;
    j["clip"] = clip;
    j["config"] = to_json(rt.config);
    write_json_file((fs::path(out_dir) / (clip + ".framepair.json")).string(), j);
    geom::write_pgm_file((fs::path(out_dir) / (clip + ".inpaint.pgm")).string(),
                         result.inpaint_mask);
    std::cout << "i_ref=" << result.i_ref << " i_hoi=" << result.i_hoi
              << " case=" << framepair::to_string(result.case_taken) << '\n';
    return 0;
}

inline int cmd_resample(const Runtime& rt, const std::string& manifest_path,
                        const std::string& out_dir) {
    namespace fs = std::filesystem;
    const std::vector<SampleRecord> records = load_manifest(manifest_path);
    fs::create_directories(out_dir);

    std::vector<detail::SampleOutcome> outcomes(records.size());
    std::vector<hand::ContactLabel7> labels(records.size());
    detail::parallel_for(records.size(), rt.config.jobs, [&](std::size_t i) {
        auto& out = outcomes[i];
        try {
            const SampleRecord& r = records[i];
            if (!r.contact_h.empty()) {
                const contact::ContactMap map =
                    contact::contact_map_from_json(load_json_file(r.contact_h));
                labels[i] = hand::contact_label7(map.bits, rt.tpl.part_label, rt.config.min_hits);
            } else {
                const geom::TriMesh mesh = geom::read_obj_file(r.obj_mesh);
                const geom::PointCloud cloud = rt.object_cloud(r, mesh);
                const hand::HandParams gt = rt.params_from_file(r.gt_params);
                labels[i] = rt.annotate(hand::pose_hand(rt.tpl, gt), cloud).label;
            }
            out.ok = true;
        } catch (const std::exception& e) {
            out.error = e.what();
        }
    });

    std::vector<hand::ContactLabel7> ok_labels;
    std::vector<std::size_t> ok_positions;
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (!outcomes[i].ok) continue;
        ok_labels.push_back(labels[i]);
        ok_positions.push_back(i);
    }

    nlohmann::ordered_json j;
    j["format_version"] = kFormatVersion;
    if (!ok_labels.empty()) {
        const std::vector<std::size_t> picks = hand::balance_resample(ok_labels, rt.config.seed);
        nlohmann::ordered_json indices = nlohmann::ordered_json::array();
        for (std::size_t p : picks) indices.push_back(ok_positions[p]);
        j["indices"] = std::move(indices);
        std::map<std::string, int> before, after;
        for (const auto& l : ok_labels) ++before[l.to_string()];
        for (std::size_t p : picks) ++after[ok_labels[p].to_string()];
        j["classes_before"] = before;
        j["classes_after"] = after;
    } else {
        j["indices"] = nlohmann::ordered_json::array();
    }
    j["errors"] = detail::error_list(records, outcomes);
    j["config"] = to_json(rt.config);
    write_json_file((fs::path(out_dir) / "resample.json").string(), j);

    for (const auto& o : outcomes)
        if (!o.ok) std::cerr << "error: " << o.error << '\n';
    const bool any_fail = std::any_of(outcomes.begin(), outcomes.end(),
                                      [](const auto& o) { return !o.ok; });
    return any_fail ? 2 : 0;
}

}  // namespace hoikit::cli
