#pragma once

#include <string>

#include "huemod/image.hpp"

namespace huemod {

/// 2x2 color filter array layout; exactly two G cells, one R, one B.
struct CfaPattern {
    char cell[2][2];  // 'R', 'G' or 'B'; cell[row][col]

    /// Parse a row-major 4-letter pattern such as "GBRG".
    static CfaPattern parse(const std::string& s);

    char channel_at(int r, int c) const { return cell[r & 1][c & 1]; }
    int channel_index_at(int r, int c) const {
        char ch = channel_at(r, c);
        return ch == 'R' ? 0 : (ch == 'G' ? 1 : 2);
    }
    std::string to_string() const {
        return std::string() + cell[0][0] + cell[0][1] + cell[1][0] + cell[1][1];
    }
};

/// Single-channel sensor mosaic; the recorded channel at each pixel follows the pattern.
struct CfaMosaic {
    int h = 0;
    int w = 0;
    std::vector<std::uint8_t> v;  // size h*w
    CfaPattern pattern{};

    std::uint8_t at(int r, int c) const { return v[static_cast<std::size_t>(r) * w + c]; }
};

/// Keep only the pattern-dictated channel at each pixel. H and W must be even.
CfaMosaic cfa_mosaic(const ImageRaster& img, const CfaPattern& pattern);

/// Fill missing channels by averaging the 2 or 4 nearest recorded neighbors of the
/// same channel; edge pixels use whichever neighbors exist. Recorded values are
/// copied unchanged.
ImageRaster demosaic_bilinear(const CfaMosaic& mosaic);

}  // namespace huemod
