#include <CLI11.hpp>
#include <iostream>

#include "hoikit/cli/commands.hpp"

int main(int argc, char** argv) {
    CLI::App app{"hand-object interaction toolkit"};
    app.require_subcommand(1);

    std::string config_path, out_dir = "out";
    std::int64_t seed_flag = -1;
    int jobs_flag = 0;
    app.add_option("--config", config_path, "JSON run configuration");
    app.add_option("--seed", seed_flag, "override the config seed");
    app.add_option("--jobs", jobs_flag, "worker threads over samples");
    app.add_option("--out", out_dir, "output directory");

    std::string manifest, clip_dir, scene_path;
    auto* contact = app.add_subcommand("contact", "contact maps and 7-bit labels per sample");
    contact->add_option("manifest", manifest, "JSONL sample manifest")->required();
    auto* metrics = app.add_subcommand("metrics", "evaluation report over a manifest");
    metrics->add_option("manifest", manifest, "JSONL sample manifest")->required();
    auto* refine = app.add_subcommand("refine", "test-time pose refinement");
    refine->add_option("manifest", manifest, "JSONL sample manifest");
    refine->add_option("--scene", scene_path, "single bundled scene JSON");
    auto* framepair = app.add_subcommand("framepair", "frame-pair selection for one clip");
    framepair->add_option("clip", clip_dir, "clip directory with PGM masks")->required();
    auto* tmpl = app.add_subcommand("template", "emit the generated hand template");
    auto* resample = app.add_subcommand("resample", "label-balanced resampling indices");
    resample->add_option("manifest", manifest, "JSONL sample manifest")->required();

    for (auto* sub : {contact, metrics, refine, framepair, tmpl, resample}) sub->fallthrough();

    CLI11_PARSE(app, argc, argv);

    try {
        hoikit::cli::RunConfig config;
        if (!config_path.empty()) config = hoikit::cli::load_run_config(config_path);
        if (seed_flag >= 0) config.seed = std::uint64_t(seed_flag);
        if (jobs_flag > 0) config.jobs = jobs_flag;
        const hoikit::cli::Runtime rt(std::move(config));

        if (contact->parsed()) return hoikit::cli::cmd_contact(rt, manifest, out_dir);
        if (metrics->parsed()) return hoikit::cli::cmd_metrics(rt, manifest, out_dir);
        if (refine->parsed()) {
            if (!scene_path.empty()) return hoikit::cli::cmd_refine_scene(rt, scene_path, out_dir);
            if (manifest.empty()) {
                std::cerr << "error: refine needs a manifest or --scene\n";
                return 1;
            }
            return hoikit::cli::cmd_refine(rt, manifest, out_dir);
        }
        if (framepair->parsed()) return hoikit::cli::cmd_framepair(rt, clip_dir, out_dir);
        if (tmpl->parsed()) return hoikit::cli::cmd_template(rt, out_dir);
        if (resample->parsed()) return hoikit::cli::cmd_resample(rt, manifest, out_dir);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
