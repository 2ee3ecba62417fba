#include "huemod/localize.hpp"

#include <algorithm>
#include <cmath>

namespace huemod {

nn::RowMat precompute_features(const SiameseModel& model, const PatchGrid& grid) {
    const int n = grid.count();
    nn::RowMat features(n, model.feature_dim());
    for (int k = 0; k < n; ++k) features.row(k) = model.feature(grid.patch(k)).transpose();
    return features;
}

InconsistencyMap inconsistency_map(int k, const nn::RowMat& features, const SiameseModel& model,
                                   const PatchGrid& grid) {
    if (k < 0 || k >= grid.count()) throw std::out_of_range("inconsistency_map: anchor out of range");
    InconsistencyMap map(grid.nh, grid.nw);
    map.anchor = k;
    const Eigen::VectorXf fk = features.row(k).transpose();
    for (int m = 0; m < grid.count(); ++m)
        map.v[m] = model.predict_from_features(fk, features.row(m).transpose());
    return map;
}

std::vector<InconsistencyMap> all_inconsistency_maps(const nn::RowMat& features,
                                                     const SiameseModel& model, const PatchGrid& grid) {
    const int n = grid.count();
    std::vector<InconsistencyMap> maps(n, InconsistencyMap(grid.nh, grid.nw));
    for (int k = 0; k < n; ++k) maps[k].anchor = k;
    for (int k = 0; k < n; ++k) {
        const Eigen::VectorXf fk = features.row(k).transpose();
        for (int m = k; m < n; ++m) {
            const float p = model.predict_from_features(fk, features.row(m).transpose());
            maps[k].v[m] = p;
            maps[m].v[k] = p;  // architectural symmetry
        }
    }
    return maps;
}

InconsistencyMap fuse_mean_shift(const std::vector<InconsistencyMap>& maps, double bandwidth,
                                 double tol, int max_iter, MeanShiftStats* stats) {
    if (maps.empty()) throw std::invalid_argument("fuse_mean_shift: no maps");
    const int nh = maps[0].nh, nw = maps[0].nw;
    const std::size_t dim = static_cast<std::size_t>(nh) * nw;
    const std::size_t n = maps.size();
    for (const auto& m : maps)
        if (m.nh != nh || m.nw != nw) throw std::invalid_argument("fuse_mean_shift: shape mismatch");

    MeanShiftStats local;
    MeanShiftStats& st = stats ? *stats : local;
    st.iterations = 0;

    // a map's own-anchor cell holds the architectural constant, not evidence;
    // that coordinate is skipped in every statistic below (anchor(k) = -1: none)
    auto anchor_of = [&](std::size_t k) {
        const int a = maps[k].anchor;
        return (a >= 0 && a < static_cast<int>(dim)) ? a : -1;
    };

    if (bandwidth <= 0.) {
        // median pairwise distance / 2, recomputed per image
        std::vector<double> dists;
        dists.reserve(n * (n - 1) / 2);
        for (std::size_t a = 0; a < n; ++a) {
            for (std::size_t b = a + 1; b < n; ++b) {
                const int sa = anchor_of(a), sb = anchor_of(b);
                double s = 0.;
                for (std::size_t d = 0; d < dim; ++d) {
                    if (static_cast<int>(d) == sa || static_cast<int>(d) == sb) continue;
                    const double diff = static_cast<double>(maps[a].v[d]) - maps[b].v[d];
                    s += diff * diff;
                }
                dists.push_back(std::sqrt(s));
            }
        }
        if (dists.empty()) {
            bandwidth = 1.;
        } else {
            std::nth_element(dists.begin(), dists.begin() + dists.size() / 2, dists.end());
            bandwidth = dists[dists.size() / 2] / 2.;
        }
        if (bandwidth <= 0.) bandwidth = 1e-12;
    }
    st.bandwidth = bandwidth;

    // start at the coordinate-wise mean
    std::vector<double> y(dim, 0.);
    std::vector<int> cnt(dim, 0);
    for (std::size_t k = 0; k < n; ++k) {
        const int sk = anchor_of(k);
        for (std::size_t d = 0; d < dim; ++d) {
            if (static_cast<int>(d) == sk) continue;
            y[d] += maps[k].v[d];
            ++cnt[d];
        }
    }
    for (std::size_t d = 0; d < dim; ++d) y[d] = cnt[d] > 0 ? y[d] / cnt[d] : 0.;

    const double inv_2h2 = 1. / (2. * bandwidth * bandwidth);
    std::vector<double> y_next(dim), wsum(dim);
    for (int it = 0; it < max_iter; ++it) {
        std::fill(y_next.begin(), y_next.end(), 0.);
        std::fill(wsum.begin(), wsum.end(), 0.);
        double wtotal = 0.;
        for (std::size_t k = 0; k < n; ++k) {
            const int sk = anchor_of(k);
            double d2 = 0.;
            for (std::size_t d = 0; d < dim; ++d) {
                if (static_cast<int>(d) == sk) continue;
                const double diff = y[d] - maps[k].v[d];
                d2 += diff * diff;
            }
            const double w = std::exp(-d2 * inv_2h2);
            wtotal += w;
            for (std::size_t d = 0; d < dim; ++d) {
                if (static_cast<int>(d) == sk) continue;
                y_next[d] += w * maps[k].v[d];
                wsum[d] += w;
            }
        }
        if (wtotal <= 0.) break;  // all weights underflowed; keep current point
        double disp2 = 0., norm2 = 0.;
        for (std::size_t d = 0; d < dim; ++d) {
            y_next[d] = wsum[d] > 0. ? y_next[d] / wsum[d] : y[d];
            const double diff = y_next[d] - y[d];
            disp2 += diff * diff;
            norm2 += y[d] * y[d];
        }
        y = y_next;
        const double rel = std::sqrt(disp2) / std::max(std::sqrt(norm2), 1e-12);
        if (rel < tol) break;
        ++st.iterations;
    }

    InconsistencyMap fused(nh, nw);
    for (std::size_t d = 0; d < dim; ++d)
        fused.v[d] = static_cast<float>(std::clamp(y[d], 0., 1.));
    return fused;
}

FloatImage upsample_heatmap(const InconsistencyMap& fused, int out_h, int out_w,
                            const PatchGrid& grid) {
    FloatImage hm(out_h, out_w);
    const double a0r = grid.patch_h / 2;  // anchor pixel of cell (0,0)
    const double a0c = grid.patch_w / 2;
    const double s = grid.stride;
    for (int r = 0; r < out_h; ++r) {
        double u = (r - a0r) / s;
        u = std::clamp(u, 0., static_cast<double>(fused.nh - 1));
        int i0 = std::min(static_cast<int>(u), fused.nh - 2 >= 0 ? fused.nh - 2 : 0);
        if (fused.nh == 1) i0 = 0;
        const double fy = u - i0;
        for (int c = 0; c < out_w; ++c) {
            double v = (c - a0c) / s;
            v = std::clamp(v, 0., static_cast<double>(fused.nw - 1));
            int j0 = std::min(static_cast<int>(v), fused.nw - 2 >= 0 ? fused.nw - 2 : 0);
            if (fused.nw == 1) j0 = 0;
            const double fx = v - j0;
            const int i1 = std::min(i0 + 1, fused.nh - 1);
            const int j1 = std::min(j0 + 1, fused.nw - 1);
            const double val = (1 - fy) * ((1 - fx) * fused.at(i0, j0) + fx * fused.at(i0, j1)) +
                               fy * ((1 - fx) * fused.at(i1, j0) + fx * fused.at(i1, j1));
            hm.at(r, c) = static_cast<float>(val);
        }
    }
    return hm;
}

double normal_quantile(double p) {
    if (p <= 0. || p >= 1.) throw std::invalid_argument("normal_quantile: p must be in (0,1)");
    double lo = -10., hi = 10.;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        const double cdf = 0.5 * std::erfc(-mid / std::sqrt(2.));
        (cdf < p ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

ThresholdInfo gaussian_tail_threshold(const FloatImage& heatmap, double tail, double floor_value) {
    ThresholdInfo info;
    const std::size_t n = heatmap.v.size();
    if (n == 0) throw std::invalid_argument("gaussian_tail_threshold: empty heatmap");
    double sum = 0.;
    for (float x : heatmap.v) sum += x;
    info.mu = sum / static_cast<double>(n);
    double sq = 0.;
    for (float x : heatmap.v) {
        const double d = x - info.mu;
        sq += d * d;
    }
    info.sigma = std::sqrt(sq / static_cast<double>(n));
    if (info.sigma <= 0.) {
        info.degenerate = true;
        info.t = info.mu;
        info.tau = floor_value;
        return info;
    }
    info.t = info.mu + normal_quantile(1. - tail) * info.sigma;
    info.tau = std::max(floor_value, info.t);
    return info;
}

BoolMask binarize(const FloatImage& heatmap, double tau) {
    if (tau < 0. || tau > 1.) throw std::invalid_argument("binarize: tau must be in [0,1]");
    BoolMask mask(heatmap.h, heatmap.w);
    for (std::size_t i = 0; i < heatmap.v.size(); ++i)
        mask.m[i] = heatmap.v[i] > tau ? 1 : 0;
    return mask;
}

LocalizeResult localize_pipeline(const ImageRaster& image, const SiameseModel& model,
                                 const LocalizeOptions& options) {
    LocalizeResult res;
    PatchGrid grid = extract_patch_grid(image, options.patch, options.patch, options.stride);
    nn::RowMat features = precompute_features(model, grid);
    std::vector<InconsistencyMap> maps = all_inconsistency_maps(features, model, grid);
    InconsistencyMap fused =
        fuse_mean_shift(maps, options.bandwidth, options.ms_tol, options.ms_max_iter, &res.mean_shift);
    res.heatmap = upsample_heatmap(fused, image.h, image.w, grid);
    if (options.invert)
        for (auto& v : res.heatmap.v) v = 1.f - v;
    if (options.threshold_mode == ThresholdMode::Adaptive) {
        res.threshold = gaussian_tail_threshold(res.heatmap, options.tail, 0.5);
    } else {
        res.threshold.tau = options.fixed_tau;
        res.threshold.t = options.fixed_tau;
    }
    res.mask = binarize(res.heatmap, std::min(res.threshold.tau, 1.0));
    return res;
}

}  // namespace huemod
