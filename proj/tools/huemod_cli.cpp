// huemod: synthesize hue-modification forgeries, train the Siamese patch
// matcher, localize forged regions, and evaluate against ground truth.

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "huemod/choi.hpp"
#include "huemod/dataset.hpp"
#include "huemod/eval.hpp"
#include "huemod/io.hpp"
#include "huemod/localize.hpp"
#include "huemod/model.hpp"
#include "huemod/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace huemod;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitIncomplete = 2;
constexpr int kExitRuntime = 3;

std::string default_out(const std::string& command) {
    const char* root = std::getenv("HUEMOD_OUT");
    return (fs::path(root ? root : "out") / command).string();
}

std::vector<int> parse_angle_range(const std::string& spec) {
    // "start:stop:step" inclusive, or a single angle
    std::vector<int> angles;
    int start = 0, stop = 0, step = 0;
    if (std::sscanf(spec.c_str(), "%d:%d:%d", &start, &stop, &step) == 3) {
        if (step <= 0) throw CLI::ValidationError("--angles", "step must be positive");
        for (int a = start; a <= stop; a += step) angles.push_back(a);
    } else if (std::sscanf(spec.c_str(), "%d", &start) == 1) {
        angles.push_back(start);
    } else {
        throw CLI::ValidationError("--angles", "expected start:stop:step");
    }
    return angles;
}

std::vector<std::string> list_images(const std::string& dir) {
    std::vector<std::string> paths;
    if (!fs::is_directory(dir)) throw std::runtime_error("not a directory: " + dir);
    for (const auto& e : fs::directory_iterator(dir)) {
        const auto ext = e.path().extension().string();
        if (ext == ".png" || ext == ".jpg" || ext == ".jpeg") paths.push_back(e.path().string());
    }
    std::sort(paths.begin(), paths.end());
    return paths;
}

void write_config(const std::string& out_dir, const json& cfg) {
    std::ofstream f(fs::path(out_dir) / "config.json", std::ios::binary);
    f << cfg.dump(2) << "\n";
}

/// Run fn(i) for i in [0, n) on up to `jobs` worker threads.
void parallel_for(int n, int jobs, const std::function<void(int)>& fn) {
    jobs = std::max(1, std::min(jobs, n));
    if (jobs == 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> workers;
    std::mutex err_mutex;
    std::exception_ptr first_error;
    for (int t = 0; t < jobs; ++t) {
        workers.emplace_back([&] {
            for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(err_mutex);
                    if (!first_error) first_error = std::current_exception();
                }
            }
        });
    }
    for (auto& w : workers) w.join();
    if (first_error) std::rethrow_exception(first_error);
}

// --- subcommands ---

int cmd_sources(const std::string& out_dir, int count, int height, int width, std::uint64_t seed,
                const std::string& cfa) {
    fs::create_directories(out_dir);
    for (int i = 0; i < count; ++i) {
        ImageRaster img = synth_source_image(height, width, derive_seed(seed, i), cfa);
        char name[32];
        std::snprintf(name, sizeof(name), "source_%04d.png", i);
        write_png_rgb((fs::path(out_dir) / name).string(), img);
    }
    json cfg{{"command", "sources"}, {"count", count},        {"height", height},
             {"width", width},       {"seed", seed},          {"cfa", cfa}};
    write_config(out_dir, cfg);
    return kExitOk;
}

int cmd_synth(const std::string& recipe_str, const std::string& sources_dir,
              const std::string& out_dir, std::uint64_t seed, const std::string& angles_spec,
              int qf, int second_qf, int crop_h, int crop_w, int box) {
    const Recipe recipe = parse_recipe(recipe_str);
    const auto sources = list_images(sources_dir);
    if (sources.empty()) throw std::runtime_error("no source images in " + sources_dir);
    TestSetParams params;
    params.angles = parse_angle_range(angles_spec);
    params.qf = qf;
    params.second_qf = second_qf;
    params.crop_h = crop_h;
    params.crop_w = crop_w;
    params.mask_box = box;
    fs::create_directories(out_dir);
    make_test_set(recipe, sources, params, seed, out_dir);
    json cfg{{"command", "synth"}, {"recipe", recipe_str}, {"seed", seed},
             {"angles", params.angles}, {"qf", qf},        {"second_qf", second_qf},
             {"crop_h", crop_h},    {"crop_w", crop_w},    {"box", box}};
    write_config(out_dir, cfg);
    return kExitOk;
}

int cmd_train(const std::string& pool_dir, const std::string& out_dir, TrainConfig config,
              const std::string& angles_spec) {
    if (!angles_spec.empty()) config.angles = parse_angle_range(angles_spec);
    const auto paths = list_images(pool_dir);
    if (paths.empty()) throw std::runtime_error("no pool images in " + pool_dir);
    std::vector<ImageRaster> pool;
    pool.reserve(paths.size());
    for (const auto& p : paths) pool.push_back(read_image(p));

    fs::create_directories(out_dir);
    std::ofstream log(fs::path(out_dir) / "train_log.jsonl", std::ios::binary);
    TrainResult result = train(config, pool, &log);
    save_checkpoint((fs::path(out_dir) / "checkpoint.ckpt").string(), result.model);
    json cfg = config.to_json();
    cfg["command"] = "train";
    write_config(out_dir, cfg);
    std::cout << "trained " << result.curve.size() << " epoch(s), best epoch " << result.best_epoch
              << ", best val loss " << result.model.metadata["best_val_loss"] << "\n";
    return kExitOk;
}

struct LocalizeArgs {
    std::string manifest, image, model_path, out_dir, method = "siamese";
    std::string threshold = "adaptive", cfa = "GBRG";
    int stride = 32, patch = 64, jobs = 1;
    bool invert = false;
};

int cmd_localize(const LocalizeArgs& args) {
    LocalizeOptions options;
    options.stride = args.stride;
    options.patch = args.patch;
    options.invert = args.invert;
    if (args.threshold == "adaptive") {
        options.threshold_mode = ThresholdMode::Adaptive;
    } else if (args.threshold.rfind("fixed:", 0) == 0) {
        options.threshold_mode = ThresholdMode::Fixed;
        options.fixed_tau = std::stod(args.threshold.substr(6));
    } else {
        throw CLI::ValidationError("--threshold", "expected adaptive or fixed:<tau>");
    }

    std::optional<SiameseModel> model;
    if (args.method == "siamese") {
        if (args.model_path.empty()) throw CLI::ValidationError("--model", "required for siamese");
        model = load_checkpoint(args.model_path);
    } else if (args.method != "choi") {
        throw CLI::ValidationError("--method", "expected siamese or choi");
    }
    ChoiConfig choi_config;
    choi_config.cfa = CfaPattern::parse(args.cfa);

    struct Item {
        std::string id;
        std::string image_path;
    };
    std::vector<Item> items;
    fs::path image_root;
    if (!args.manifest.empty()) {
        image_root = fs::path(args.manifest).parent_path();
        for (const auto& c : read_manifest(args.manifest)) items.push_back({c.id, c.image_path});
    } else if (!args.image.empty()) {
        items.push_back({fs::path(args.image).stem().string(), args.image});
        image_root = fs::path(args.image).parent_path();
        items[0].image_path = fs::path(args.image).filename().string();
    } else {
        throw CLI::ValidationError("localize", "one of --manifest or --image is required");
    }

    fs::create_directories(args.out_dir);
    std::vector<json> records(items.size());
    parallel_for(static_cast<int>(items.size()), args.jobs, [&](int i) {
        const Item& item = items[i];
        const ImageRaster img = read_image((image_root / item.image_path).string());
        json rec{{"id", item.id}, {"method", args.method}};
        if (args.method == "choi") {
            BoolMask mask = choi_localize(img, choi_config);
            write_png_mask((fs::path(args.out_dir) / (item.id + "_mask.png")).string(), mask);
        } else {
            LocalizeResult res = localize_pipeline(img, *model, options);
            write_png_mask((fs::path(args.out_dir) / (item.id + "_mask.png")).string(), res.mask);
            write_heatmap_raw((fs::path(args.out_dir) / (item.id + "_heatmap.f32")).string(),
                              res.heatmap);
            write_png_gray((fs::path(args.out_dir) / (item.id + "_heatmap.png")).string(),
                           res.heatmap);
            rec["tau"] = res.threshold.tau;
            rec["mu"] = res.threshold.mu;
            rec["sigma"] = res.threshold.sigma;
            rec["degenerate"] = res.threshold.degenerate;
            rec["ms_iterations"] = res.mean_shift.iterations;
            rec["ms_bandwidth"] = res.mean_shift.bandwidth;
        }
        records[i] = std::move(rec);
    });

    std::ofstream results(fs::path(args.out_dir) / "results.jsonl", std::ios::binary);
    for (const auto& r : records) results << r.dump() << "\n";
    json cfg{{"command", "localize"}, {"method", args.method},   {"threshold", args.threshold},
             {"stride", args.stride}, {"patch", args.patch},     {"invert", args.invert},
             {"cfa", args.cfa}};
    write_config(args.out_dir, cfg);
    return kExitOk;
}

int cmd_eval(const std::string& manifest, const std::string& pred_dir, const std::string& group_by,
             const std::string& out_dir) {
    GroupBy grouping;
    if (group_by == "angle")
        grouping = GroupBy::Angle;
    else if (group_by == "qf")
        grouping = GroupBy::Qf;
    else
        throw CLI::ValidationError("--group-by", "expected angle or qf");

    EvalReport report = evaluate_run(manifest, pred_dir, grouping);
    std::cout << report.table();
    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        std::ofstream t(fs::path(out_dir) / "report.txt", std::ios::binary);
        t << report.table();
        std::ofstream j(fs::path(out_dir) / "report.jsonl", std::ios::binary);
        j << report.to_jsonl();
        json cfg{{"command", "eval"}, {"group_by", group_by}};
        write_config(out_dir, cfg);
    }
    return report.missing.empty() ? kExitOk : kExitIncomplete;
}

int cmd_render(const std::string& manifest, const std::string& pred_dir, const std::string& out_dir) {
    const auto cases = read_manifest(manifest);
    const fs::path root = fs::path(manifest).parent_path();
    fs::create_directories(out_dir);
    int rendered = 0, skipped = 0;
    for (const auto& c : cases) {
        const fs::path mask_path = fs::path(pred_dir) / (c.id + "_mask.png");
        if (!fs::exists(mask_path)) {
            ++skipped;
            continue;
        }
        const ImageRaster img = read_image((root / c.image_path).string());
        const BoolMask pred = read_png_mask(mask_path.string());
        const BoolMask gt = read_png_mask((root / c.mask_path).string());
        const fs::path hm_path = fs::path(pred_dir) / (c.id + "_heatmap.f32");
        FloatImage hm(img.h, img.w);
        if (fs::exists(hm_path)) hm = read_heatmap_raw(hm_path.string());

        // image | heatmap | predicted mask | ground truth, side by side
        const int pad = 4;
        ImageRaster panel(img.h, img.w * 4 + pad * 3);
        std::fill(panel.px.begin(), panel.px.end(), 255);
        auto blit_gray = [&](int x0, auto value) {
            for (int r = 0; r < img.h; ++r)
                for (int cc = 0; cc < img.w; ++cc) {
                    const std::uint8_t v = value(r, cc);
                    panel.at(r, x0 + cc, 0) = v;
                    panel.at(r, x0 + cc, 1) = v;
                    panel.at(r, x0 + cc, 2) = v;
                }
        };
        for (int r = 0; r < img.h; ++r)
            for (int cc = 0; cc < img.w; ++cc)
                for (int ch = 0; ch < 3; ++ch) panel.at(r, cc, ch) = img.at(r, cc, ch);
        blit_gray(img.w + pad, [&](int r, int cc) {
            return static_cast<std::uint8_t>(std::clamp(hm.at(r, cc), 0.f, 1.f) * 255.f + 0.5f);
        });
        blit_gray(2 * (img.w + pad), [&](int r, int cc) { return pred.at(r, cc) ? 255 : 0; });
        blit_gray(3 * (img.w + pad), [&](int r, int cc) { return gt.at(r, cc) ? 255 : 0; });
        write_png_rgb((fs::path(out_dir) / (c.id + "_panel.png")).string(), panel);
        ++rendered;
    }
    std::cout << "rendered " << rendered << " panel(s), skipped " << skipped << "\n";
    return skipped == 0 ? kExitOk : kExitIncomplete;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"hue-modification forgery synthesis, detection and localization"};
    app.require_subcommand(1);

    // sources
    auto* sources = app.add_subcommand("sources", "generate synthetic demosaiced source images");
    std::string src_out = default_out("sources"), src_cfa = "GBRG";
    int src_count = 30, src_h = 768, src_w = 1024;
    std::uint64_t src_seed = 0;
    sources->add_option("--out", src_out, "output directory");
    sources->add_option("--count", src_count, "number of images");
    sources->add_option("--height", src_h, "image height (even)");
    sources->add_option("--width", src_w, "image width (even)");
    sources->add_option("--seed", src_seed, "master seed");
    sources->add_option("--cfa", src_cfa, "CFA pattern");

    // synth
    auto* synth = app.add_subcommand("synth", "synthesize a forgery test set");
    std::string sy_recipe = "png", sy_sources, sy_out = default_out("synth"),
                sy_angles = "30:330:30";
    std::uint64_t sy_seed = 0;
    int sy_qf = 90, sy_second_qf = 75, sy_crop_h = 768, sy_crop_w = 1024, sy_box = 256;
    synth->add_option("--recipe", sy_recipe, "png | b-jpg | a-jpg")->required();
    synth->add_option("--sources", sy_sources, "directory of source images")->required();
    synth->add_option("--out", sy_out, "output directory");
    synth->add_option("--seed", sy_seed, "master seed");
    synth->add_option("--angles", sy_angles, "angle grid start:stop:step");
    synth->add_option("--qf", sy_qf, "first JPEG quality factor");
    synth->add_option("--second-qf", sy_second_qf, "second quality factor (a-jpg)");
    synth->add_option("--crop-h", sy_crop_h, "crop height");
    synth->add_option("--crop-w", sy_crop_w, "crop width");
    synth->add_option("--box", sy_box, "mask bounding box");

    // train
    auto* train_cmd = app.add_subcommand("train", "train the Siamese model");
    std::string tr_pool, tr_out = default_out("train"), tr_mode = "clean",
                tr_backbone = "small-cnn", tr_angles;
    TrainConfig tr_config;
    train_cmd->add_option("--pool", tr_pool, "directory of pristine pool images")->required();
    train_cmd->add_option("--out", tr_out, "output directory");
    train_cmd->add_option("--mode", tr_mode, "clean | jpeg");
    train_cmd->add_option("--backbone", tr_backbone, "small-cnn | resnet50");
    train_cmd->add_option("--epochs", tr_config.epochs, "max epochs");
    train_cmd->add_option("--pairs-per-epoch", tr_config.pairs_per_epoch, "pairs per epoch");
    train_cmd->add_option("--batch", tr_config.batch, "pairs per mini-batch");
    train_cmd->add_option("--lr", tr_config.lr0, "initial learning rate");
    train_cmd->add_option("--patience", tr_config.patience, "early-stop patience");
    train_cmd->add_option("--seed", tr_config.seed, "master seed");
    train_cmd->add_option("--angles", tr_angles, "modification angle grid start:stop:step");

    // localize
    auto* loc = app.add_subcommand("localize", "localize forged regions");
    LocalizeArgs loc_args;
    loc_args.out_dir = default_out("localize");
    loc->add_option("--manifest", loc_args.manifest, "dataset manifest");
    loc->add_option("--image", loc_args.image, "single image file");
    loc->add_option("--model", loc_args.model_path, "checkpoint (siamese)");
    loc->add_option("--method", loc_args.method, "siamese | choi");
    loc->add_option("--threshold", loc_args.threshold, "adaptive | fixed:<tau>");
    loc->add_option("--stride", loc_args.stride, "patch grid stride");
    loc->add_option("--patch", loc_args.patch, "patch size");
    loc->add_option("--cfa", loc_args.cfa, "CFA pattern (choi)");
    loc->add_option("--jobs", loc_args.jobs, "parallel cases");
    loc->add_option("--out", loc_args.out_dir, "output directory");
    loc->add_flag("--invert", loc_args.invert, "analyze the inverted heatmap");

    // eval
    auto* ev = app.add_subcommand("eval", "aggregate metrics against ground truth");
    std::string ev_manifest, ev_pred, ev_group = "angle", ev_out;
    ev->add_option("--manifest", ev_manifest, "dataset manifest")->required();
    ev->add_option("--pred", ev_pred, "predictions directory")->required();
    ev->add_option("--group-by", ev_group, "angle | qf");
    ev->add_option("--out", ev_out, "report output directory");

    // render
    auto* ren = app.add_subcommand("render", "side-by-side qualitative panels");
    std::string rn_manifest, rn_pred, rn_out = default_out("render");
    ren->add_option("--manifest", rn_manifest, "dataset manifest")->required();
    ren->add_option("--pred", rn_pred, "predictions directory")->required();
    ren->add_option("--out", rn_out, "output directory");

    try {
        app.parse(argc, argv);
        if (sources->parsed())
            return cmd_sources(src_out, src_count, src_h, src_w, src_seed, src_cfa);
        if (synth->parsed())
            return cmd_synth(sy_recipe, sy_sources, sy_out, sy_seed, sy_angles, sy_qf, sy_second_qf,
                             sy_crop_h, sy_crop_w, sy_box);
        if (train_cmd->parsed()) {
            tr_config.mode = tr_mode == "jpeg" ? PairMode::Jpeg : PairMode::Clean;
            tr_config.backbone = parse_backbone(tr_backbone);
            return cmd_train(tr_pool, tr_out, tr_config, tr_angles);
        }
        if (loc->parsed()) return cmd_localize(loc_args);
        if (ev->parsed()) return cmd_eval(ev_manifest, ev_pred, ev_group, ev_out);
        if (ren->parsed()) return cmd_render(rn_manifest, rn_pred, rn_out);
        return kExitUsage;
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitUsage;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
}
