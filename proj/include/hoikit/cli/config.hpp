#pragma once

#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "hoikit/contact/contact.hpp"
#include "hoikit/framepair/framepair.hpp"
#include "hoikit/refine/tta.hpp"
#include "hoikit/version.hpp"

namespace hoikit::cli {

/// Resolved batch-run configuration. Serialized into every output for
/// provenance; a config file mirrors this structure.
struct RunConfig {
    contact::ContactParams contact;
    refine::RefineWeights weights;
    refine::TtaConfig tta;
    framepair::SelectionThresholds selection;
    int kmeans_k = 20;
    int kmeans_max_iter = 100;
    std::string extractor = "moments-v1";
    bool parts17 = false;       // score P-IoU/P-F1 over 17 parts instead of 7
    int min_hits = 3;
    double pv_voxel_mm = 0.0;   // 0 = auto (object extent / 32)
    int ransac_iterations = 200;
    double ransac_inlier_tol = 2.0;
    std::string template_path;  // empty = generate the default template
    std::uint64_t seed = 0;
    int jobs = 1;

    void validate() const {
        contact.validate();
        weights.validate();
        tta.validate();
        selection.validate();
        if (kmeans_k < 1) throw Error("kmeans_k must be >= 1");
        if (min_hits < 1) throw Error("min_hits must be >= 1");
        if (jobs < 1) throw Error("jobs must be >= 1");
        if (ransac_iterations < 1) throw Error("ransac_iterations must be >= 1");
    }
};

inline nlohmann::ordered_json to_json(const RunConfig& c) {
    nlohmann::ordered_json j;
    j["contact"] = contact::to_json(c.contact);
    j["weights"] = refine::to_json(c.weights);
    j["tta"] = refine::to_json(c.tta);
    j["selection"] = framepair::to_json(c.selection);
    j["metrics"] = {{"kmeans_k", c.kmeans_k},
                    {"kmeans_max_iter", c.kmeans_max_iter},
                    {"extractor", c.extractor},
                    {"parts17", c.parts17},
                    {"pv_voxel_mm", c.pv_voxel_mm}};
    j["min_hits"] = c.min_hits;
    j["ransac"] = {{"iterations", c.ransac_iterations}, {"inlier_tol", c.ransac_inlier_tol}};
    j["template"] = c.template_path;
    j["seed"] = c.seed;
    j["jobs"] = c.jobs;
    return j;
}

inline RunConfig run_config_from_json(const nlohmann::json& j) {
    RunConfig c;
    if (j.contains("contact")) c.contact = contact::contact_params_from_json(j.at("contact"));
    if (j.contains("weights")) c.weights = refine::refine_weights_from_json(j.at("weights"));
    if (j.contains("tta")) c.tta = refine::tta_config_from_json(j.at("tta"));
    if (j.contains("selection"))
        c.selection = framepair::selection_thresholds_from_json(j.at("selection"));
    if (j.contains("metrics")) {
        const auto& m = j.at("metrics");
        if (m.contains("kmeans_k")) c.kmeans_k = m.at("kmeans_k").get<int>();
        if (m.contains("kmeans_max_iter")) c.kmeans_max_iter = m.at("kmeans_max_iter").get<int>();
        if (m.contains("extractor")) c.extractor = m.at("extractor").get<std::string>();
        if (m.contains("parts17")) c.parts17 = m.at("parts17").get<bool>();
        if (m.contains("pv_voxel_mm")) c.pv_voxel_mm = m.at("pv_voxel_mm").get<double>();
    }
    if (j.contains("min_hits")) c.min_hits = j.at("min_hits").get<int>();
    if (j.contains("ransac")) {
        const auto& r = j.at("ransac");
        if (r.contains("iterations")) c.ransac_iterations = r.at("iterations").get<int>();
        if (r.contains("inlier_tol")) c.ransac_inlier_tol = r.at("inlier_tol").get<double>();
    }
    if (j.contains("template")) c.template_path = j.at("template").get<std::string>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("jobs")) c.jobs = j.at("jobs").get<int>();
    c.validate();
    return c;
}

inline RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open config file: " + path);
    nlohmann::json j;
    in >> j;
    return run_config_from_json(j);
}

/// One dataset sample: object geometry, ground-truth (and optionally
/// predicted) hand parameters, optional precomputed contact maps, the action
/// verb and the recorded scale factor.
struct SampleRecord {
    std::string id;
    std::string obj_mesh;
    std::string obj_points;     // path; empty when sample_points is used
    int sample_points = 0;      // surface-sample count when no cloud file given
    std::string gt_params;
    std::string pred_params;    // optional
    std::string contact_h;      // optional ground-truth hand contact map
    std::string contact_o;      // optional ground-truth object contact map
    std::string verb;
    double scale = 1.0;         // s_O
};

/// Line-delimited JSON manifest; relative paths resolve against the
/// manifest's directory.
inline std::vector<SampleRecord> load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open manifest: " + path);
    const std::filesystem::path base = std::filesystem::path(path).parent_path();
    auto resolve = [&](std::string p) {
        if (p.empty()) return p;
        const std::filesystem::path fp(p);
        return fp.is_absolute() ? p : (base / fp).string();
    };
    std::vector<SampleRecord> records;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const std::exception& e) {
            throw Error("manifest line " + std::to_string(line_no) + ": " + e.what());
        }
        SampleRecord r;
        r.id = j.at("id").get<std::string>();
        r.obj_mesh = resolve(j.at("obj_mesh").get<std::string>());
        if (j.contains("obj_points")) r.obj_points = resolve(j.at("obj_points").get<std::string>());
        if (j.contains("sample_points")) r.sample_points = j.at("sample_points").get<int>();
        if (r.obj_points.empty() && r.sample_points < 1)
            throw Error("sample " + r.id + ": needs obj_points or sample_points >= 1");
        r.gt_params = resolve(j.at("gt_params").get<std::string>());
        if (j.contains("pred_params")) r.pred_params = resolve(j.at("pred_params").get<std::string>());
        if (j.contains("contact_h")) r.contact_h = resolve(j.at("contact_h").get<std::string>());
        if (j.contains("contact_o")) r.contact_o = resolve(j.at("contact_o").get<std::string>());
        if (j.contains("verb")) r.verb = j.at("verb").get<std::string>();
        if (j.contains("scale")) r.scale = j.at("scale").get<double>();
        records.push_back(std::move(r));
    }
    return records;
}

inline nlohmann::json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open file: " + path);
    nlohmann::json j;
    in >> j;
    return j;
}

inline void write_json_file(const std::string& path, const nlohmann::ordered_json& j) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write file: " + path);
    out << j.dump(2) << '\n';
}

}  // namespace hoikit::cli
