#pragma once

#include "huemod/dataset.hpp"
#include "huemod/image.hpp"
#include "huemod/model.hpp"

namespace huemod {

/// Pairwise inconsistency scores arranged by grid position.
/// anchor >= 0 marks a per-patch map; the anchor's own cell holds the
/// architectural constant c = logistic(head(0)) and carries no evidence.
struct InconsistencyMap {
    int nh = 0, nw = 0;
    int anchor = -1;  // patch index; -1 for the fused map
    std::vector<float> v;

    InconsistencyMap() = default;
    InconsistencyMap(int nh_, int nw_) : nh(nh_), nw(nw_), v(static_cast<std::size_t>(nh_) * nw_, 0.f) {}
    float at(int i, int j) const { return v[static_cast<std::size_t>(i) * nw + j]; }
    float& at(int i, int j) { return v[static_cast<std::size_t>(i) * nw + j]; }
};

/// Row k holds feature(P_k); the backbone runs exactly grid.count() times.
nn::RowMat precompute_features(const SiameseModel& model, const PatchGrid& grid);

/// Map of anchor k against every grid patch, computed from cached features.
InconsistencyMap inconsistency_map(int k, const nn::RowMat& features, const SiameseModel& model,
                                   const PatchGrid& grid);

/// All N maps, exploiting prediction symmetry.
std::vector<InconsistencyMap> all_inconsistency_maps(const nn::RowMat& features,
                                                     const SiameseModel& model, const PatchGrid& grid);

struct MeanShiftStats {
    int iterations = 0;
    double bandwidth = 0.;
};

/// Gaussian-kernel mean shift over the maps viewed as points in R^(nh*nw),
/// started at the coordinate-wise mean. bandwidth <= 0 selects the default:
/// median pairwise distance between maps divided by 2.
InconsistencyMap fuse_mean_shift(const std::vector<InconsistencyMap>& maps, double bandwidth = 0.,
                                 double tol = 1e-4, int max_iter = 100,
                                 MeanShiftStats* stats = nullptr);

/// Bilinear upsampling with map cell (i,j) anchored at the center pixel of
/// patch (i,j); borders replicate the nearest cell.
FloatImage upsample_heatmap(const InconsistencyMap& fused, int out_h, int out_w, const PatchGrid& grid);

struct ThresholdInfo {
    double mu = 0., sigma = 0., t = 0., tau = 0.5;
    bool degenerate = false;
};

/// tau = max(floor, mu + z_{1-tail} * sigma) over all heatmap pixels.
ThresholdInfo gaussian_tail_threshold(const FloatImage& heatmap, double tail = 0.05,
                                      double floor_value = 0.5);

/// Standard normal quantile at probability p (bisection on erfc).
double normal_quantile(double p);

/// Strict greater-than comparison per pixel.
BoolMask binarize(const FloatImage& heatmap, double tau);

enum class ThresholdMode { Adaptive, Fixed };

struct LocalizeOptions {
    int patch = 64;
    int stride = 32;
    ThresholdMode threshold_mode = ThresholdMode::Adaptive;
    double fixed_tau = 0.8;
    double tail = 0.05;
    bool invert = false;  // analyze 1 - heatmap (majority-forged images)
    double bandwidth = 0.;  // <= 0: per-image default
    double ms_tol = 1e-4;
    int ms_max_iter = 100;
};

struct LocalizeResult {
    FloatImage heatmap;
    BoolMask mask;
    ThresholdInfo threshold;
    MeanShiftStats mean_shift;
};

LocalizeResult localize_pipeline(const ImageRaster& image, const SiameseModel& model,
                                 const LocalizeOptions& options);

}  // namespace huemod
