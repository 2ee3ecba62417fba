#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "huemod/color.hpp"
#include "huemod/image.hpp"

namespace huemod {

// --- Masks and cases ---

/// Convex polygon rasterized inside a box x box area placed uniformly at random.
BoolMask random_convex_mask(int h, int w, int box, std::uint64_t seed);

/// Hue-rotate only the pixels where mask is true; others are bit-unchanged.
ImageRaster apply_local_hue_mod(const ImageRaster& img, const BoolMask& mask, HueAngle angle);

enum class Recipe { Png, BJpg, AJpg };

Recipe parse_recipe(const std::string& s);
std::string recipe_name(Recipe r);

struct ForgeryCase {
    std::string id;
    std::string image_path;  // relative to the manifest directory
    std::string mask_path;
    Recipe recipe = Recipe::Png;
    int angle = 0;  // 0 means pristine
    std::vector<int> qf_history;
    std::uint64_t seed = 0;
};

struct TestSetParams {
    std::vector<int> angles = {30, 60, 90, 120, 150, 180, 210, 240, 270, 300, 330};
    int qf = 90;        // first compression QF for the JPEG recipes
    int second_qf = 75; // fixed second compression of the a-jpg recipe
    int crop_h = 768;
    int crop_w = 1024;
    int mask_box = 256;
};

/// Synthesizes one recipe's cases into out_dir and writes manifest.jsonl there.
/// Returns the cases in manifest order. Fully deterministic given seed.
std::vector<ForgeryCase> make_test_set(Recipe recipe, const std::vector<std::string>& source_paths,
                                       const TestSetParams& params, std::uint64_t seed,
                                       const std::string& out_dir);

// Line-delimited JSON manifest.
void write_manifest(const std::string& path, const std::vector<ForgeryCase>& cases);
std::vector<ForgeryCase> read_manifest(const std::string& path);

// --- Training pairs ---

struct TrainingPair {
    ImageRaster patch_a;
    ImageRaster patch_b;
    int label = 0;  // 0 = consistent, 1 = inconsistent
    int angle = 0;  // modification angle of the inconsistent patch (0 for label 0)
    bool same_image = true;
};

enum class PairMode { Clean, Jpeg };

struct PairSampler {
    std::vector<int> angles = {30, 60, 90, 120, 150, 180, 210, 240, 270, 300, 330};
    int patch = 64;
    bool same_image = true;  // draw both patches from one image

    /// Label drawn by a fair coin.
    TrainingPair sample(const std::vector<ImageRaster>& pool, PairMode mode, std::mt19937_64& rng) const;
    /// Forced label; used by the half/half batch builder.
    TrainingPair sample_labeled(const std::vector<ImageRaster>& pool, PairMode mode, int label,
                                std::mt19937_64& rng) const;
};

// --- Patch grid ---

struct PatchGrid {
    const ImageRaster* image = nullptr;
    int patch_h = 64, patch_w = 64, stride = 32;
    int nh = 0, nw = 0;

    int count() const { return nh * nw; }
    int row_offset(int i) const { return i * stride; }
    int col_offset(int j) const { return j * stride; }
    /// Patch index k = i*nw + j.
    ImageRaster patch(int k) const;
};

PatchGrid extract_patch_grid(const ImageRaster& img, int h, int w, int stride);

// --- Synthetic source generation ---

/// Smooth random color field passed through CFA mosaic + bilinear demosaicing,
/// so that the rasters carry realistic acquisition artifacts.
ImageRaster synth_source_image(int h, int w, std::uint64_t seed, const std::string& cfa = "GBRG");

}  // namespace huemod
