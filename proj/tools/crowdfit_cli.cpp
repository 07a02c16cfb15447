// crowdfit command-line driver: generate, fit, eval, export, template.

#include <cstdio>
#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "crowdfit/io.hpp"
#include "crowdfit/metrics.hpp"
#include "crowdfit/pipeline.hpp"
#include "crowdfit/synth.hpp"

using namespace crowdfit;

namespace {

struct FitArgs {
    std::string scene;
    std::string out;
    std::string config;
    bool no_crowd = false;
    int iters = 260;
    int batch_size = 50;
    double lr = 1e-5;
    double threshold = 0.23;
    std::uint64_t seed = 0;
    bool raw_pixel_keyp = false;
    bool detach_normal = false;
    bool per_batch_normal = false;
    int freeze_normal_every = 0;
    bool literal_init_crowd = false;
};

int run_generate(const std::string& spec_path, const std::string& out) {
    const SceneSpec spec = load_scene_spec(read_text_file(spec_path), spec_path);
    const SceneObservation scene = generate_scene(active_template(), spec);
    write_text_file(out, save_scene(scene));
    return 0;
}

int run_fit(const FitArgs& a, const CLI::App& sub) {
    PipelineConfig cfg;
    if (!a.config.empty()) {
        cfg = load_config(read_text_file(a.config), cfg, a.config);
    }
    // Flags given on the command line win over the config file.
    if (sub.count("--iters") > 0) cfg.crowd.total_steps = a.iters;
    if (sub.count("--batch-size") > 0) cfg.batch_size = a.batch_size;
    if (sub.count("--lr") > 0) cfg.crowd.lr_max = a.lr;
    if (sub.count("--threshold") > 0) cfg.threshold = a.threshold;
    if (sub.count("--seed") > 0) cfg.seed = a.seed;
    if (a.no_crowd) cfg.crowd_enabled = false;
    if (a.raw_pixel_keyp) cfg.keyp_norm = KeypNormalization::raw_pixels;
    if (a.detach_normal) cfg.detach_normal = true;
    if (a.per_batch_normal) cfg.per_batch_normal = true;
    if (sub.count("--freeze-normal-every") > 0) cfg.freeze_normal_every = a.freeze_normal_every;
    if (a.literal_init_crowd) cfg.literal_init_crowd = true;
    cfg.validate();

    const SceneObservation scene = load_scene(read_text_file(a.scene), a.scene);
    ResultFile result;
    result.config = cfg;
    result.estimate = reconstruct(active_template(), scene, cfg);
    result.focal_source = scene.intrinsics.focal_from_diagonal ? "diagonal" : "calibrated";
    result.notes = default_result_notes();
    for (const auto& w : result.estimate.warnings) {
        std::fprintf(stderr, "warning: %s\n", w.c_str());
    }
    write_text_file(a.out, save_result(result));
    return result.estimate.persons.empty() ? 2 : 0;
}

int run_eval(const std::string& result_path, const std::string& scene_path, const std::string& out) {
    const ResultFile result = load_result(read_text_file(result_path), result_path);
    const SceneObservation scene = load_scene(read_text_file(scene_path), scene_path);
    const EvalReport report = evaluate(active_template(), scene, result.estimate.persons);
    const std::string text = dump(eval_report_json(report));
    if (out.empty()) {
        std::cout << text;
    } else {
        write_text_file(out, text);
    }
    return 0;
}

int run_export(const std::string& result_path, const std::string& format, const std::string& dir) {
    const ResultFile result = load_result(read_text_file(result_path), result_path);
    const MeshFormat f = format == "obj" ? MeshFormat::obj : MeshFormat::ply;
    for (const auto& p : export_geometry(active_template(), result.estimate, f, dir)) {
        std::cout << p.string() << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"crowdfit: crowd-constrained 3D body reconstruction"};
    app.require_subcommand(1);

    std::string spec_path, gen_out;
    auto* generate = app.add_subcommand("generate", "Generate a synthetic crowd scene with ground truth");
    generate->add_option("--spec", spec_path, "Scene spec JSON")->required()->check(CLI::ExistingFile);
    generate->add_option("--out", gen_out, "Output scene JSON")->required();

    FitArgs fa;
    auto* fit = app.add_subcommand("fit", "Reconstruct every person in a scene");
    fit->add_option("--scene", fa.scene, "Scene JSON")->required()->check(CLI::ExistingFile);
    fit->add_option("--out", fa.out, "Output result JSON")->required();
    fit->add_option("--config", fa.config, "Config JSON; command-line flags override it")->check(CLI::ExistingFile);
    fit->add_flag("--no-crowd", fa.no_crowd, "Skip the crowd stage and return stage-1 results");
    fit->add_option("--iters", fa.iters, "Crowd-stage steps per batch")->capture_default_str();
    fit->add_option("--batch-size", fa.batch_size, "People per crowd-stage batch")->capture_default_str();
    fit->add_option("--lr", fa.lr, "Crowd-stage peak learning rate")->capture_default_str();
    fit->add_option("--threshold", fa.threshold, "Detection score threshold")->capture_default_str();
    fit->add_option("--seed", fa.seed, "Seed echoed into the result")->capture_default_str();
    fit->add_flag("--raw-pixel-keyp", fa.raw_pixel_keyp, "Keypoint loss in raw pixels instead of box units");
    fit->add_flag("--detach-normal", fa.detach_normal, "Treat the plane normal as constant in each step");
    fit->add_flag("--per-batch-normal", fa.per_batch_normal, "Estimate the plane normal per batch");
    fit->add_option("--freeze-normal-every", fa.freeze_normal_every, "Recompute the normal every N steps");
    fit->add_flag("--literal-init-crowd", fa.literal_init_crowd, "Scale the init shape term by the crowd loss");

    std::string eval_result, eval_scene, eval_out;
    auto* eval = app.add_subcommand("eval", "Score a result against a scene");
    eval->add_option("--result", eval_result, "Result JSON")->required()->check(CLI::ExistingFile);
    eval->add_option("--scene", eval_scene, "Scene JSON")->required()->check(CLI::ExistingFile);
    eval->add_option("--out", eval_out, "Write the report here instead of stdout");

    std::string exp_result, exp_format = "obj", exp_dir;
    auto* exp = app.add_subcommand("export", "Write OBJ or PLY geometry for a result");
    exp->add_option("--result", exp_result, "Result JSON")->required()->check(CLI::ExistingFile);
    exp->add_option("--format", exp_format, "obj or ply")->check(CLI::IsMember({"obj", "ply"}))->capture_default_str();
    exp->add_option("--out", exp_dir, "Output directory")->required();

    std::string tmpl_out;
    auto* tmpl = app.add_subcommand("template", "Write the active body template as JSON");
    tmpl->add_option("--out", tmpl_out, "Output JSON")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*generate) return run_generate(spec_path, gen_out);
        if (*fit) return run_fit(fa, *fit);
        if (*eval) return run_eval(eval_result, eval_scene, eval_out);
        if (*exp) return run_export(exp_result, exp_format, exp_dir);
        if (*tmpl) {
            write_text_file(tmpl_out, save_template(active_template()));
            return 0;
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 1;
}
