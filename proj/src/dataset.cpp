#include "huemod/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "huemod/cfa.hpp"
#include "huemod/io.hpp"
#include "huemod/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace huemod {

// --- convex mask ---

namespace {

struct Pt {
    double x, y;
};

double cross(const Pt& o, const Pt& a, const Pt& b) {
    return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

// Andrew monotone chain, counter-clockwise hull.
std::vector<Pt> convex_hull(std::vector<Pt> pts) {
    std::sort(pts.begin(), pts.end(), [](const Pt& a, const Pt& b) {
        return a.x < b.x || (a.x == b.x && a.y < b.y);
    });
    const int n = static_cast<int>(pts.size());
    std::vector<Pt> hull(2 * n);
    int k = 0;
    for (int i = 0; i < n; ++i) {
        while (k >= 2 && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
        hull[k++] = pts[i];
    }
    for (int i = n - 2, lower = k + 1; i >= 0; --i) {
        while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
        hull[k++] = pts[i];
    }
    hull.resize(k - 1);
    return hull;
}

bool inside_hull(const std::vector<Pt>& hull, double x, double y) {
    const int n = static_cast<int>(hull.size());
    if (n < 3) return false;
    for (int i = 0; i < n; ++i) {
        const Pt& a = hull[i];
        const Pt& b = hull[(i + 1) % n];
        if (cross(a, b, Pt{x, y}) < 0) return false;
    }
    return true;
}

}  // namespace

BoolMask random_convex_mask(int h, int w, int box, std::uint64_t seed) {
    if (h < box || w < box) throw std::invalid_argument("random_convex_mask: image smaller than box");
    std::mt19937_64 rng = make_rng(seed);
    std::uniform_int_distribution<int> npts_dist(8, 16);
    std::uniform_real_distribution<double> coord(0.0, static_cast<double>(box));
    std::uniform_int_distribution<int> r0_dist(0, h - box);
    std::uniform_int_distribution<int> c0_dist(0, w - box);

    BoolMask mask(h, w);
    for (int attempt = 0; attempt < 64; ++attempt) {
        const int npts = npts_dist(rng);
        std::vector<Pt> pts(npts);
        for (auto& p : pts) {
            p.x = coord(rng);
            p.y = coord(rng);
        }
        const int r0 = r0_dist(rng);
        const int c0 = c0_dist(rng);
        auto hull = convex_hull(pts);
        if (hull.size() < 3) continue;
        std::fill(mask.m.begin(), mask.m.end(), 0);
        std::size_t count = 0;
        for (int y = 0; y < box; ++y) {
            for (int x = 0; x < box; ++x) {
                if (inside_hull(hull, x + 0.5, y + 0.5)) {
                    mask.set(r0 + y, c0 + x, true);
                    ++count;
                }
            }
        }
        if (count > 0) return mask;
    }
    throw std::runtime_error("random_convex_mask: degenerate hull after many attempts");
}

ImageRaster apply_local_hue_mod(const ImageRaster& img, const BoolMask& mask, HueAngle angle) {
    if (mask.h != img.h || mask.w != img.w)
        throw std::invalid_argument("apply_local_hue_mod: mask/image dimension mismatch");
    if (angle.degrees == 0) return img;
    ImageRaster out = img;
    const float deg = static_cast<float>(angle.degrees);
    for (int r = 0; r < img.h; ++r) {
        for (int c = 0; c < img.w; ++c) {
            if (!mask.at(r, c)) continue;
            std::uint8_t ro, go, bo;
            hue_rotate_pixel(img.at(r, c, 0), img.at(r, c, 1), img.at(r, c, 2), deg, ro, go, bo);
            out.at(r, c, 0) = ro;
            out.at(r, c, 1) = go;
            out.at(r, c, 2) = bo;
        }
    }
    return out;
}

// --- recipes ---

Recipe parse_recipe(const std::string& s) {
    if (s == "png") return Recipe::Png;
    if (s == "b-jpg") return Recipe::BJpg;
    if (s == "a-jpg") return Recipe::AJpg;
    throw std::invalid_argument("unknown recipe: " + s);
}

std::string recipe_name(Recipe r) {
    switch (r) {
        case Recipe::Png: return "png";
        case Recipe::BJpg: return "b-jpg";
        default: return "a-jpg";
    }
}

namespace {

ImageRaster crop_top_left(const ImageRaster& img, int h, int w) {
    if (img.h < h || img.w < w)
        throw std::invalid_argument("source image smaller than crop size");
    ImageRaster out(h, w);
    for (int r = 0; r < h; ++r)
        std::copy_n(img.px.begin() + static_cast<std::size_t>(r) * img.w * 3, w * 3,
                    out.px.begin() + static_cast<std::size_t>(r) * w * 3);
    return out;
}

std::string case_id(Recipe recipe, int angle, int index) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%s_a%03d_i%03d", recipe_name(recipe).c_str(), angle, index);
    std::string s(buf);
    std::replace(s.begin(), s.end(), '-', '_');
    return s;
}

}  // namespace

std::vector<ForgeryCase> make_test_set(Recipe recipe, const std::vector<std::string>& source_paths,
                                       const TestSetParams& params, std::uint64_t seed,
                                       const std::string& out_dir) {
    if (source_paths.empty()) throw std::invalid_argument("make_test_set: no source images");
    fs::create_directories(fs::path(out_dir) / "images");
    fs::create_directories(fs::path(out_dir) / "masks");

    const int n_img = static_cast<int>(source_paths.size());
    const int n_angles = static_cast<int>(params.angles.size());

    // (source index, angle) assignments; angle 0 marks a pristine control
    struct Job {
        int src;
        int angle;
    };
    std::vector<Job> jobs;
    if (recipe == Recipe::Png) {
        for (int a = 0; a < n_angles; ++a)
            for (int i = 0; i < n_img; ++i) jobs.push_back({i, params.angles[a]});
    } else {
        // split sources round-robin over angle groups plus one pristine group
        for (int i = 0; i < n_img; ++i) {
            const int g = i % (n_angles + 1);
            jobs.push_back({i, g < n_angles ? params.angles[g] : 0});
        }
    }

    std::vector<ForgeryCase> cases;
    cases.reserve(jobs.size());
    for (std::size_t k = 0; k < jobs.size(); ++k) {
        const Job& job = jobs[k];
        const std::uint64_t case_seed = derive_seed(seed, k);
        ImageRaster img = crop_top_left(read_image(source_paths[job.src]), params.crop_h, params.crop_w);

        ForgeryCase fc;
        fc.recipe = recipe;
        fc.angle = job.angle;
        fc.seed = case_seed;
        fc.id = case_id(recipe, job.angle, job.src);

        BoolMask mask(params.crop_h, params.crop_w);
        if (job.angle != 0) mask = random_convex_mask(params.crop_h, params.crop_w, params.mask_box, case_seed);

        switch (recipe) {
            case Recipe::Png:
                img = apply_local_hue_mod(img, mask, HueAngle(job.angle));
                break;
            case Recipe::BJpg:
                img = apply_local_hue_mod(img, mask, HueAngle(job.angle));
                fc.qf_history = {params.qf};
                break;
            case Recipe::AJpg:
                img = jpeg_roundtrip(img, params.qf);
                img = apply_local_hue_mod(img, mask, HueAngle(job.angle));
                fc.qf_history = {params.qf, params.second_qf};
                break;
        }

        const bool as_jpeg = recipe != Recipe::Png;
        fc.image_path = "images/" + fc.id + (as_jpeg ? ".jpg" : ".png");
        fc.mask_path = "masks/" + fc.id + ".png";
        const std::string img_file = (fs::path(out_dir) / fc.image_path).string();
        if (recipe == Recipe::Png)
            write_png_rgb(img_file, img);
        else
            write_jpeg(img_file, img, fc.qf_history.back());
        write_png_mask((fs::path(out_dir) / fc.mask_path).string(), mask);
        cases.push_back(std::move(fc));
    }

    write_manifest((fs::path(out_dir) / "manifest.jsonl").string(), cases);
    return cases;
}

void write_manifest(const std::string& path, const std::vector<ForgeryCase>& cases) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open manifest for writing: " + path);
    for (const auto& c : cases) {
        json j;
        j["id"] = c.id;
        j["image"] = c.image_path;
        j["mask"] = c.mask_path;
        j["recipe"] = recipe_name(c.recipe);
        j["angle"] = c.angle;
        j["qf_history"] = c.qf_history;
        j["seed"] = c.seed;
        f << j.dump() << "\n";
    }
}

std::vector<ForgeryCase> read_manifest(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open manifest: " + path);
    std::vector<ForgeryCase> cases;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        json j = json::parse(line);
        ForgeryCase c;
        c.id = j.at("id").get<std::string>();
        c.image_path = j.at("image").get<std::string>();
        c.mask_path = j.at("mask").get<std::string>();
        c.recipe = parse_recipe(j.at("recipe").get<std::string>());
        c.angle = j.at("angle").get<int>();
        c.qf_history = j.at("qf_history").get<std::vector<int>>();
        c.seed = j.at("seed").get<std::uint64_t>();
        cases.push_back(std::move(c));
    }
    return cases;
}

// --- training pairs ---

namespace {

ImageRaster crop_patch(const ImageRaster& img, int r0, int c0, int size) {
    ImageRaster out(size, size);
    for (int r = 0; r < size; ++r)
        std::copy_n(img.px.begin() + (static_cast<std::size_t>(r0 + r) * img.w + c0) * 3, size * 3,
                    out.px.begin() + static_cast<std::size_t>(r) * size * 3);
    return out;
}

}  // namespace

TrainingPair PairSampler::sample(const std::vector<ImageRaster>& pool, PairMode mode,
                                 std::mt19937_64& rng) const {
    std::uniform_int_distribution<int> coin(0, 1);
    return sample_labeled(pool, mode, coin(rng), rng);
}

TrainingPair PairSampler::sample_labeled(const std::vector<ImageRaster>& pool, PairMode mode, int label,
                                         std::mt19937_64& rng) const {
    if (pool.empty()) throw std::invalid_argument("PairSampler: empty image pool");
    std::uniform_int_distribution<int> img_dist(0, static_cast<int>(pool.size()) - 1);
    const int ia = img_dist(rng);
    const int ib = same_image ? ia : img_dist(rng);
    const ImageRaster& a = pool[ia];
    const ImageRaster& b = pool[ib];
    if (a.h < patch || a.w < patch || b.h < patch || b.w < patch)
        throw std::invalid_argument("PairSampler: pool image smaller than patch");

    std::uniform_int_distribution<int> ra(0, a.h - patch), ca(0, a.w - patch);
    std::uniform_int_distribution<int> rb(0, b.h - patch), cb(0, b.w - patch);
    TrainingPair tp;
    tp.patch_a = crop_patch(a, ra(rng), ca(rng), patch);
    tp.patch_b = crop_patch(b, rb(rng), cb(rng), patch);
    tp.label = label;
    tp.same_image = same_image;

    if (label == 1) {
        std::uniform_int_distribution<int> angle_dist(0, static_cast<int>(angles.size()) - 1);
        tp.angle = angles[angle_dist(rng)];
    }

    if (mode == PairMode::Jpeg) {
        std::uniform_int_distribution<int> qf_dist(55, 100);
        std::uniform_int_distribution<int> coin(0, 1);
        const int qf = qf_dist(rng);
        const bool compress_first = coin(rng) == 1;
        if (compress_first) {
            tp.patch_a = jpeg_roundtrip(tp.patch_a, qf);
            tp.patch_b = jpeg_roundtrip(tp.patch_b, qf);
            if (tp.label == 1) tp.patch_b = hue_rotate(tp.patch_b, HueAngle(tp.angle));
        } else {
            if (tp.label == 1) tp.patch_b = hue_rotate(tp.patch_b, HueAngle(tp.angle));
            tp.patch_a = jpeg_roundtrip(tp.patch_a, qf);
            tp.patch_b = jpeg_roundtrip(tp.patch_b, qf);
        }
    } else if (tp.label == 1) {
        tp.patch_b = hue_rotate(tp.patch_b, HueAngle(tp.angle));
    }
    return tp;
}

// --- patch grid ---

PatchGrid extract_patch_grid(const ImageRaster& img, int h, int w, int stride) {
    if (stride < 1) throw std::invalid_argument("extract_patch_grid: stride must be >= 1");
    if (img.h < h || img.w < w) throw std::invalid_argument("extract_patch_grid: patch larger than image");
    PatchGrid g;
    g.image = &img;
    g.patch_h = h;
    g.patch_w = w;
    g.stride = stride;
    g.nh = (img.h - h) / stride + 1;
    g.nw = (img.w - w) / stride + 1;
    return g;
}

ImageRaster PatchGrid::patch(int k) const {
    if (k < 0 || k >= count()) throw std::out_of_range("PatchGrid::patch: index out of range");
    const int i = k / nw, j = k % nw;
    ImageRaster out(patch_h, patch_w);
    for (int r = 0; r < patch_h; ++r)
        std::copy_n(image->px.begin() +
                        (static_cast<std::size_t>(row_offset(i) + r) * image->w + col_offset(j)) * 3,
                    patch_w * 3, out.px.begin() + static_cast<std::size_t>(r) * patch_w * 3);
    return out;
}

// --- synthetic sources ---

ImageRaster synth_source_image(int h, int w, std::uint64_t seed, const std::string& cfa) {
    if (h % 2 != 0 || w % 2 != 0) throw std::invalid_argument("synth_source_image: even dims required");
    std::mt19937_64 rng = make_rng(seed);
    const int cell = 64;
    const int gh = h / cell + 2, gw = w / cell + 2;

    // saturated random colors on a coarse grid
    std::vector<float> nodes(static_cast<std::size_t>(gh) * gw * 3);
    std::uniform_real_distribution<float> hue_d(0.f, 360.f), sat_d(0.5f, 1.f), val_d(0.3f, 1.f);
    for (int i = 0; i < gh * gw; ++i) {
        float r, g, b;
        float hu = hue_d(rng), sa = sat_d(rng), va = val_d(rng);
        hsv_to_rgb(hu, sa, va, r, g, b);
        nodes[i * 3 + 0] = r;
        nodes[i * 3 + 1] = g;
        nodes[i * 3 + 2] = b;
    }

    // strong per-pixel sensor noise: after mosaicing, recorded samples keep it
    // while interpolated samples smooth it out, which is the acquisition
    // signature both detectors rely on
    std::uniform_int_distribution<int> noise(-20, 20);
    ImageRaster smooth(h, w);
    for (int r = 0; r < h; ++r) {
        const int gi = r / cell;
        const float fy = static_cast<float>(r % cell) / cell;
        for (int c = 0; c < w; ++c) {
            const int gj = c / cell;
            const float fx = static_cast<float>(c % cell) / cell;
            for (int ch = 0; ch < 3; ++ch) {
                const float v00 = nodes[(static_cast<std::size_t>(gi) * gw + gj) * 3 + ch];
                const float v01 = nodes[(static_cast<std::size_t>(gi) * gw + gj + 1) * 3 + ch];
                const float v10 = nodes[(static_cast<std::size_t>(gi + 1) * gw + gj) * 3 + ch];
                const float v11 = nodes[(static_cast<std::size_t>(gi + 1) * gw + gj + 1) * 3 + ch];
                const float v = (1 - fy) * ((1 - fx) * v00 + fx * v01) + fy * ((1 - fx) * v10 + fx * v11);
                const int q = static_cast<int>(quantize_channel(v)) + noise(rng);
                smooth.at(r, c, ch) = static_cast<std::uint8_t>(std::clamp(q, 0, 255));
            }
        }
    }
    return demosaic_bilinear(cfa_mosaic(smooth, CfaPattern::parse(cfa)));
}

}  // namespace huemod
