#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "huemod/dataset.hpp"
#include "huemod/localize.hpp"

using namespace huemod;

namespace {

ImageRaster random_image(int h, int w, std::uint64_t seed) {
    ImageRaster img(h, w);
    std::mt19937_64 rng(seed);
    for (auto& p : img.px) p = static_cast<std::uint8_t>(rng() & 0xff);
    return img;
}

InconsistencyMap make_map(int nh, int nw, const std::vector<float>& vals) {
    InconsistencyMap m(nh, nw);
    m.v = vals;
    return m;
}

}  // namespace

TEST_CASE("feature precompute matches single extraction and counts backbone calls") {
    const SiameseModel model = SiameseModel::create(BackboneKind::SmallCnn, 1);
    const ImageRaster img = random_image(160, 160, 3);
    const PatchGrid grid = extract_patch_grid(img, 64, 64, 32);
    REQUIRE(grid.count() == 16);

    const std::uint64_t calls_before = SiameseModel::backbone_calls();
    const nn::RowMat features = precompute_features(model, grid);
    CHECK(SiameseModel::backbone_calls() - calls_before == 16);

    CHECK(features.rows() == 16);
    CHECK(features.cols() == 256);
    for (int k = 0; k < grid.count(); ++k) {
        const Eigen::VectorXf direct = model.feature(grid.patch(k));
        CHECK((features.row(k).transpose().array() == direct.array()).all());
    }

    // one-patch grid
    const PatchGrid single = extract_patch_grid(img, 160, 160, 1);
    const nn::RowMat f1 = precompute_features(model, single);
    CHECK(f1.rows() == 1);
    CHECK(f1.cols() == 256);
}

TEST_CASE("inconsistency maps: anchor constant, symmetry, cache equivalence") {
    const SiameseModel model = SiameseModel::create(BackboneKind::SmallCnn, 2);
    const ImageRaster img = random_image(128, 160, 4);
    const PatchGrid grid = extract_patch_grid(img, 64, 64, 32);
    const int n = grid.count();
    const nn::RowMat features = precompute_features(model, grid);

    const float c = predict_inconsistency(model, grid.patch(0), grid.patch(0));
    const auto maps = all_inconsistency_maps(features, model, grid);
    REQUIRE(static_cast<int>(maps.size()) == n);
    for (int k = 0; k < n; ++k) {
        CHECK(maps[k].anchor == k);
        CHECK(maps[k].v[k] == c);  // self-pair holds the architectural constant
        for (int m = 0; m < n; ++m) {
            CHECK(maps[k].v[m] == maps[m].v[k]);
            CHECK(maps[k].v[m] >= 0.f);
            CHECK(maps[k].v[m] <= 1.f);
            // bit-equal to direct pairwise evaluation
            CHECK(maps[k].v[m] == predict_inconsistency(model, grid.patch(k), grid.patch(m)));
        }
    }

    const InconsistencyMap one = inconsistency_map(3, features, model, grid);
    CHECK(one.v == maps[3].v);
    CHECK_THROWS_AS(inconsistency_map(n, features, model, grid), std::out_of_range);
    CHECK_THROWS_AS(inconsistency_map(-1, features, model, grid), std::out_of_range);
}

TEST_CASE("mean shift fixed points") {
    const InconsistencyMap m = make_map(2, 3, {0.1f, 0.2f, 0.3f, 0.4f, 0.5f, 0.6f});
    MeanShiftStats stats;

    // single map
    InconsistencyMap fused = fuse_mean_shift({m}, 0.5, 1e-4, 100, &stats);
    CHECK(fused.v == m.v);

    // N identical maps: exact fixed point, zero counted iterations
    fused = fuse_mean_shift(std::vector<InconsistencyMap>(5, m), 0.5, 1e-4, 100, &stats);
    CHECK(fused.v == m.v);
    CHECK(stats.iterations == 0);

    CHECK_THROWS_AS(fuse_mean_shift(std::vector<InconsistencyMap>{}), std::invalid_argument);
    CHECK_THROWS_AS(fuse_mean_shift({m, make_map(3, 2, std::vector<float>(6, 0.f))}),
                    std::invalid_argument);
}

TEST_CASE("mean shift finds the majority mode, matching a brute-force KDE oracle") {
    // points on the segment A + t (B - A) in R^12: the 1-D kernel density along
    // the segment is an independent oracle for the mode
    const int nh = 3, nw = 4, dim = nh * nw;
    std::vector<float> a(dim), b(dim);
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<float> d(0.1f, 0.9f);
    for (int i = 0; i < dim; ++i) {
        a[i] = d(rng);
        b[i] = d(rng);
    }
    double len2 = 0.;
    for (int i = 0; i < dim; ++i) len2 += (b[i] - a[i]) * (b[i] - a[i]);
    const double len = std::sqrt(len2);

    // majority cluster near t = 0, outliers near t = 1
    const std::vector<double> ts = {0.0, 0.01, -0.01, 0.02, -0.02, 0.015, -0.015, 1.0, 0.98, 1.02};
    std::vector<InconsistencyMap> maps;
    for (double t : ts) {
        std::vector<float> v(dim);
        for (int i = 0; i < dim; ++i) v[i] = static_cast<float>(a[i] + t * (b[i] - a[i]));
        maps.push_back(make_map(nh, nw, v));
    }

    const double bandwidth = 0.1 * len;
    MeanShiftStats stats;
    const InconsistencyMap fused = fuse_mean_shift(maps, bandwidth, 1e-7, 500, &stats);

    // brute-force 1-D KDE grid search along the segment
    double best_t = 0., best_f = -1.;
    for (double t = -0.3; t <= 1.3; t += 1e-5) {
        double f = 0.;
        for (double ti : ts) {
            const double dist = (t - ti) * len;
            f += std::exp(-dist * dist / (2. * bandwidth * bandwidth));
        }
        if (f > best_f) {
            best_f = f;
            best_t = t;
        }
    }
    for (int i = 0; i < dim; ++i) {
        const double oracle = a[i] + best_t * (b[i] - a[i]);
        CHECK(std::abs(fused.v[i] - oracle) < 0.01);  // L-infinity tolerance
    }

    // the mode is the majority cluster, not the mean
    CHECK(std::abs(best_t) < 0.05);
}

TEST_CASE("mean shift output stays in the coordinate-wise hull of its inputs") {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<float> d(0.f, 1.f);
    std::vector<InconsistencyMap> maps;
    for (int k = 0; k < 8; ++k) {
        std::vector<float> v(6);
        for (auto& x : v) x = d(rng);
        maps.push_back(make_map(2, 3, v));
    }
    const InconsistencyMap fused = fuse_mean_shift(maps);
    for (int i = 0; i < 6; ++i) {
        float lo = 1.f, hi = 0.f;
        for (const auto& m : maps) {
            lo = std::min(lo, m.v[i]);
            hi = std::max(hi, m.v[i]);
        }
        CHECK(fused.v[i] >= lo - 1e-6f);
        CHECK(fused.v[i] <= hi + 1e-6f);
    }
}

TEST_CASE("anchored self-pair cells are excluded from fusion") {
    // maps identical except each map's own-anchor cell carries an off-value;
    // exclusion makes the fusion land exactly on the shared payload
    const int n = 6;
    std::vector<float> payload = {0.2f, 0.3f, 0.4f, 0.5f, 0.6f, 0.7f};
    std::vector<InconsistencyMap> maps;
    for (int k = 0; k < n; ++k) {
        InconsistencyMap m = make_map(2, 3, payload);
        m.anchor = k;
        m.v[k] = 0.99f;
        maps.push_back(m);
    }
    MeanShiftStats stats;
    const InconsistencyMap fused = fuse_mean_shift(maps, 0.5, 1e-4, 100, &stats);
    for (int i = 0; i < n; ++i) CHECK(fused.v[i] == doctest::Approx(payload[i]).epsilon(1e-6));
    CHECK(stats.iterations == 0);
}

TEST_CASE("heatmap upsampling anchors cells at patch centers") {
    const ImageRaster img = random_image(160, 160, 12);
    const PatchGrid grid = extract_patch_grid(img, 64, 64, 32);  // 4x4 cells
    InconsistencyMap fused(grid.nh, grid.nw);
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<float> d(0.f, 1.f);
    for (auto& v : fused.v) v = d(rng);

    const FloatImage hm = upsample_heatmap(fused, img.h, img.w, grid);
    CHECK(hm.h == img.h);
    CHECK(hm.w == img.w);

    float lo = 1.f, hi = 0.f;
    for (auto v : fused.v) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    for (int i = 0; i < grid.nh; ++i)
        for (int j = 0; j < grid.nw; ++j) {
            const int r = i * grid.stride + grid.patch_h / 2;
            const int c = j * grid.stride + grid.patch_w / 2;
            CHECK(hm.at(r, c) == doctest::Approx(fused.at(i, j)).epsilon(1e-6));
        }
    for (auto v : hm.v) {
        CHECK(v >= lo - 1e-6f);
        CHECK(v <= hi + 1e-6f);
    }

    // constant map upsample is constant
    InconsistencyMap flat(grid.nh, grid.nw);
    for (auto& v : flat.v) v = 0.42f;
    const FloatImage fhm = upsample_heatmap(flat, img.h, img.w, grid);
    for (auto v : fhm.v) CHECK(v == doctest::Approx(0.42f));
}

TEST_CASE("normal quantile") {
    CHECK(normal_quantile(0.5) == doctest::Approx(0.).epsilon(1e-9));
    CHECK(normal_quantile(0.95) == doctest::Approx(1.6448536269514722).epsilon(1e-9));
    CHECK(normal_quantile(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-9));
    CHECK(normal_quantile(0.05) == doctest::Approx(-1.6448536269514722).epsilon(1e-9));
    CHECK_THROWS_AS(normal_quantile(0.), std::invalid_argument);
    CHECK_THROWS_AS(normal_quantile(1.), std::invalid_argument);
}

TEST_CASE("gaussian tail threshold closed forms") {
    // two-point heatmap {0.1, 0.5}: mean 0.3, population sigma 0.2 exactly
    FloatImage hm(1, 2);
    hm.v = {0.1f, 0.5f};
    ThresholdInfo info = gaussian_tail_threshold(hm);
    CHECK(info.mu == doctest::Approx(0.3).epsilon(1e-7));
    CHECK(info.sigma == doctest::Approx(0.2).epsilon(1e-7));
    CHECK(info.tau == doctest::Approx(0.62898).epsilon(1e-4));
    CHECK_FALSE(info.degenerate);

    // {0.05, 0.15}: mean 0.1, sigma 0.05 -> t = 0.18225, floor engages
    hm.v = {0.05f, 0.15f};
    info = gaussian_tail_threshold(hm);
    CHECK(info.t == doctest::Approx(0.18224).epsilon(1e-3));
    CHECK(info.tau == 0.5);

    // degenerate sigma = 0
    hm.v = {0.3f, 0.3f};
    info = gaussian_tail_threshold(hm);
    CHECK(info.degenerate);
    CHECK(info.tau == 0.5);
}

TEST_CASE("threshold tau respects the tail fraction on a gaussian heatmap") {
    FloatImage hm(100, 100);
    std::mt19937_64 rng(21);
    std::normal_distribution<float> d(0.4f, 0.08f);
    for (auto& v : hm.v) v = std::clamp(d(rng), 0.f, 1.f);
    const ThresholdInfo info = gaussian_tail_threshold(hm);
    CHECK(info.tau >= 0.5);
    const BoolMask mask = binarize(hm, info.tau);
    const double frac = static_cast<double>(mask.count_true()) / (hm.h * hm.w);
    CHECK(frac <= 0.05 + 0.01);
}

TEST_CASE("binarize is a strict comparison") {
    FloatImage hm(1, 3);
    hm.v = {0.5f, 0.9f, 0.2f};
    const BoolMask m = binarize(hm, 0.5);
    CHECK_FALSE(m.at(0, 0));  // equality is pristine
    CHECK(m.at(0, 1));
    CHECK_FALSE(m.at(0, 2));
    CHECK(binarize(hm, 1.0).count_true() == 0);

    FloatImage high(2, 2);
    for (auto& v : high.v) v = 0.9f;
    CHECK(binarize(high, 0.5).count_true() == 4);

    CHECK_THROWS_AS(binarize(hm, -0.1), std::invalid_argument);
    CHECK_THROWS_AS(binarize(hm, 1.1), std::invalid_argument);
}

TEST_CASE("localize pipeline determinism and modes") {
    const SiameseModel model = SiameseModel::create(BackboneKind::SmallCnn, 3);
    const ImageRaster img = synth_source_image(160, 160, 77);

    LocalizeOptions opt;
    const LocalizeResult r1 = localize_pipeline(img, model, opt);
    const LocalizeResult r2 = localize_pipeline(img, model, opt);
    CHECK(r1.heatmap.v == r2.heatmap.v);
    CHECK(r1.mask == r2.mask);
    CHECK(r1.threshold.tau == r2.threshold.tau);
    CHECK(r1.threshold.tau >= 0.5);

    opt.threshold_mode = ThresholdMode::Fixed;
    const LocalizeResult rf = localize_pipeline(img, model, opt);
    CHECK(rf.threshold.tau == 0.8);

    opt.invert = true;
    const LocalizeResult ri = localize_pipeline(img, model, opt);
    for (std::size_t i = 0; i < ri.heatmap.v.size(); ++i)
        CHECK(ri.heatmap.v[i] == doctest::Approx(1.f - rf.heatmap.v[i]).epsilon(1e-6));
}
