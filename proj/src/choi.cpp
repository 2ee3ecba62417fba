#include "huemod/choi.hpp"

#include <algorithm>
#include <cmath>

#include "huemod/color.hpp"

namespace huemod {

int ChoiConfig::green_parity() const {
    if (cfa.channel_at(0, 0) == 'G' && cfa.channel_at(1, 1) == 'G') return 0;
    if (cfa.channel_at(0, 1) == 'G' && cfa.channel_at(1, 0) == 'G') return 1;
    throw std::invalid_argument("ChoiConfig: greens must form a quincunx");
}

namespace {

inline bool violates(const std::vector<std::uint8_t>& g, int w, int r, int c, bool recorded) {
    const int v = g[static_cast<std::size_t>(r) * w + c];
    int mn, mx;
    if (recorded) {
        // nearest recorded greens are the 4 diagonals
        const int a = g[static_cast<std::size_t>(r - 1) * w + c - 1];
        const int b = g[static_cast<std::size_t>(r - 1) * w + c + 1];
        const int d = g[static_cast<std::size_t>(r + 1) * w + c - 1];
        const int e = g[static_cast<std::size_t>(r + 1) * w + c + 1];
        mn = std::min(std::min(a, b), std::min(d, e));
        mx = std::max(std::max(a, b), std::max(d, e));
    } else {
        // axis neighbors of an interpolated position are recorded greens
        const int a = g[static_cast<std::size_t>(r - 1) * w + c];
        const int b = g[static_cast<std::size_t>(r + 1) * w + c];
        const int d = g[static_cast<std::size_t>(r) * w + c - 1];
        const int e = g[static_cast<std::size_t>(r) * w + c + 1];
        mn = std::min(std::min(a, b), std::min(d, e));
        mx = std::max(std::max(a, b), std::max(d, e));
    }
    return !(v > mn && v < mx);
}

std::vector<std::uint8_t> green_channel(const ImageRaster& img) {
    std::vector<std::uint8_t> g(static_cast<std::size_t>(img.h) * img.w);
    for (int r = 0; r < img.h; ++r)
        for (int c = 0; c < img.w; ++c) g[static_cast<std::size_t>(r) * img.w + c] = img.at(r, c, 1);
    return g;
}

std::vector<int> window_offsets(int extent, int window, int stride) {
    std::vector<int> offs;
    for (int o = 0; o + window <= extent; o += stride) offs.push_back(o);
    if (offs.empty() || offs.back() != extent - window) offs.push_back(extent - window);
    return offs;
}

}  // namespace

double violation_ratio(const std::vector<std::uint8_t>& green, int h, int w, int green_parity) {
    if (h < 3 || w < 3) throw std::invalid_argument("violation_ratio: window smaller than 3x3");
    long num = 0, den = 0;
    for (int r = 1; r < h - 1; ++r) {
        for (int c = 1; c < w - 1; ++c) {
            const bool recorded = ((r + c) & 1) == green_parity;
            if (violates(green, w, r, c, recorded)) {
                if (recorded)
                    ++num;
                else
                    ++den;
            }
        }
    }
    if (den == 0) return static_cast<double>(num + 1);
    return static_cast<double>(num) / static_cast<double>(den);
}

int estimate_angle(const ImageRaster& window, const ChoiConfig& config, int row0, int col0) {
    if (window.h < config.window || window.w < config.window)
        throw std::invalid_argument("estimate_angle: window too small");
    const int parity = (config.green_parity() + row0 + col0) % 2;
    double best_ratio = -1.;
    int best_angle = 0;
    for (int beta : config.angle_grid()) {
        const ImageRaster rotated = hue_rotate(window, HueAngle(-beta));
        const double ratio = violation_ratio(green_channel(rotated), rotated.h, rotated.w, parity);
        if (ratio > best_ratio) {
            best_ratio = ratio;
            best_angle = beta;
        }
    }
    return best_angle;
}

BoolMask choi_localize(const ImageRaster& image, const ChoiConfig& config) {
    const int win = config.window;
    if (image.h < win || image.w < win)
        throw std::invalid_argument("choi_localize: image smaller than window");
    const int base_parity = config.green_parity();
    const auto row_offs = window_offsets(image.h, win, config.stride);
    const auto col_offs = window_offsets(image.w, win, config.stride);
    const std::size_t n_windows = row_offs.size() * col_offs.size();

    std::vector<double> best_ratio(n_windows, -1.);
    std::vector<int> best_angle(n_windows, 0);

    // one full-image rotation per candidate; per-window counts via integral images
    const int h = image.h, w = image.w;
    std::vector<std::int32_t> irec(static_cast<std::size_t>(h + 1) * (w + 1));
    std::vector<std::int32_t> iint(static_cast<std::size_t>(h + 1) * (w + 1));
    auto at = [w](std::vector<std::int32_t>& a, int r, int c) -> std::int32_t& {
        return a[static_cast<std::size_t>(r) * (w + 1) + c];
    };
    auto box_sum = [w](const std::vector<std::int32_t>& a, int r0, int c0, int r1, int c1) {
        // inclusive-exclusive box [r0, r1) x [c0, c1)
        const auto v = [&](int r, int c) { return a[static_cast<std::size_t>(r) * (w + 1) + c]; };
        return v(r1, c1) - v(r0, c1) - v(r1, c0) + v(r0, c0);
    };

    for (int beta : config.angle_grid()) {
        const ImageRaster rotated = hue_rotate(image, HueAngle(-beta));
        const auto green = green_channel(rotated);
        for (int r = 0; r <= h; ++r) at(irec, r, 0) = 0, at(iint, r, 0) = 0;
        for (int c = 0; c <= w; ++c) at(irec, 0, c) = 0, at(iint, 0, c) = 0;
        for (int r = 0; r < h; ++r) {
            std::int32_t row_rec = 0, row_int = 0;
            for (int c = 0; c < w; ++c) {
                if (r >= 1 && r < h - 1 && c >= 1 && c < w - 1) {
                    const bool recorded = ((r + c) & 1) == base_parity;
                    if (violates(green, w, r, c, recorded)) {
                        if (recorded)
                            ++row_rec;
                        else
                            ++row_int;
                    }
                }
                at(irec, r + 1, c + 1) = at(irec, r, c + 1) + row_rec;
                at(iint, r + 1, c + 1) = at(iint, r, c + 1) + row_int;
            }
        }
        std::size_t widx = 0;
        for (int r0 : row_offs) {
            for (int c0 : col_offs) {
                // interior of the window, matching violation_ratio on a crop
                const int a0 = std::max(r0 + 1, 1), a1 = std::min(r0 + win - 1, h - 1);
                const int b0 = std::max(c0 + 1, 1), b1 = std::min(c0 + win - 1, w - 1);
                const long num = box_sum(irec, a0, b0, a1, b1);
                const long den = box_sum(iint, a0, b0, a1, b1);
                const double ratio =
                    den == 0 ? static_cast<double>(num + 1)
                             : static_cast<double>(num) / static_cast<double>(den);
                if (ratio > best_ratio[widx]) {
                    best_ratio[widx] = ratio;
                    best_angle[widx] = beta;
                }
                ++widx;
            }
        }
    }

    std::vector<std::uint16_t> votes(static_cast<std::size_t>(h) * w, 0);
    std::vector<std::uint16_t> forged(static_cast<std::size_t>(h) * w, 0);
    std::size_t widx = 0;
    for (int r0 : row_offs) {
        for (int c0 : col_offs) {
            const bool is_forged =
                std::find(config.pristine_angles.begin(), config.pristine_angles.end(),
                          best_angle[widx]) == config.pristine_angles.end();
            for (int r = r0; r < r0 + win; ++r)
                for (int c = c0; c < c0 + win; ++c) {
                    ++votes[static_cast<std::size_t>(r) * w + c];
                    if (is_forged) ++forged[static_cast<std::size_t>(r) * w + c];
                }
            ++widx;
        }
    }

    BoolMask mask(h, w);
    for (std::size_t i = 0; i < mask.m.size(); ++i)
        mask.m[i] = (2 * forged[i] > votes[i]) ? 1 : 0;
    return mask;
}

}  // namespace huemod
