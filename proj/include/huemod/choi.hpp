#pragma once

#include "huemod/cfa.hpp"
#include "huemod/image.hpp"

namespace huemod {

/// CFA-artifact baseline: per-window hue-angle estimation by maximizing the
/// green-channel interpolation-violation ratio.
struct ChoiConfig {
    int window = 35;
    int angle_step = 8;  // candidate grid {0, 8, ..., 352}
    int stride = 17;     // half-window overlap
    CfaPattern cfa = CfaPattern::parse("GBRG");
    std::vector<int> pristine_angles = {0, 352};

    std::vector<int> angle_grid() const {
        std::vector<int> g;
        for (int a = 0; a < 360; a += angle_step) g.push_back(a);
        return g;
    }
    /// Quincunx parity of recorded-green positions: greens sit at (r+c) % 2 == parity.
    int green_parity() const;
};

/// A green pixel "violates" when its value is not strictly between the min and
/// max of its 4 nearest recorded-green neighbors (diagonals on the quincunx for
/// recorded positions, axis neighbors otherwise). Returns
/// (#violating recorded) / (#violating interpolated); a zero denominator maps
/// to (numerator + 1) / 1. Only interior pixels are tested.
/// green_parity is expressed in the window's own coordinates.
double violation_ratio(const std::vector<std::uint8_t>& green, int h, int w, int green_parity);

/// Grid search over candidate angles: rotate the window by -beta and keep the
/// beta maximizing the violation ratio (ties toward the smaller angle).
/// (row0, col0) is the window's offset in the full image, fixing the CFA phase.
int estimate_angle(const ImageRaster& window, const ChoiConfig& config, int row0 = 0, int col0 = 0);

/// Sliding-window localization: each window votes forged iff its estimated
/// angle is not in pristine_angles; per-pixel majority vote. Deterministic.
BoolMask choi_localize(const ImageRaster& image, const ChoiConfig& config);

}  // namespace huemod
