#include "huemod/cfa.hpp"

#include <cmath>

namespace huemod {

CfaPattern CfaPattern::parse(const std::string& s) {
    if (s.size() != 4) throw std::invalid_argument("CFA pattern must have 4 letters");
    int ng = 0, nr = 0, nb = 0;
    for (char ch : s) {
        if (ch == 'G') ++ng;
        else if (ch == 'R') ++nr;
        else if (ch == 'B') ++nb;
        else throw std::invalid_argument("CFA pattern letters must be R, G or B");
    }
    if (ng != 2 || nr != 1 || nb != 1)
        throw std::invalid_argument("CFA pattern needs exactly two G, one R, one B");
    if (!((s[0] == 'G' && s[3] == 'G') || (s[1] == 'G' && s[2] == 'G')))
        throw std::invalid_argument("CFA pattern greens must sit on a diagonal");
    CfaPattern p;
    p.cell[0][0] = s[0];
    p.cell[0][1] = s[1];
    p.cell[1][0] = s[2];
    p.cell[1][1] = s[3];
    return p;
}

CfaMosaic cfa_mosaic(const ImageRaster& img, const CfaPattern& pattern) {
    if (img.h % 2 != 0 || img.w % 2 != 0)
        throw std::invalid_argument("cfa_mosaic: image dimensions must be even");
    CfaMosaic m;
    m.h = img.h;
    m.w = img.w;
    m.pattern = pattern;
    m.v.resize(static_cast<std::size_t>(img.h) * img.w);
    for (int r = 0; r < img.h; ++r)
        for (int c = 0; c < img.w; ++c)
            m.v[static_cast<std::size_t>(r) * img.w + c] = img.at(r, c, pattern.channel_index_at(r, c));
    return m;
}

namespace {

std::uint8_t round_avg(int sum, int n) {
    // round half away from zero on a non-negative average
    return static_cast<std::uint8_t>((2 * sum + n) / (2 * n));
}

}  // namespace

ImageRaster demosaic_bilinear(const CfaMosaic& mosaic) {
    const int h = mosaic.h, w = mosaic.w;
    ImageRaster out(h, w);
    static const int axis_off[4][2] = {{-1, 0}, {1, 0}, {0, -1}, {0, 1}};
    static const int diag_off[4][2] = {{-1, -1}, {-1, 1}, {1, -1}, {1, 1}};
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            for (int ch = 0; ch < 3; ++ch) {
                if (mosaic.pattern.channel_index_at(r, c) == ch) {
                    out.at(r, c, ch) = mosaic.at(r, c);
                    continue;
                }
                // nearest same-channel recorded positions: axis neighbors first,
                // then diagonals (covers every case of a 2x2 pattern)
                int sum = 0, n = 0;
                for (auto& o : axis_off) {
                    int rr = r + o[0], cc = c + o[1];
                    if (rr < 0 || rr >= h || cc < 0 || cc >= w) continue;
                    if (mosaic.pattern.channel_index_at(rr, cc) != ch) continue;
                    sum += mosaic.at(rr, cc);
                    ++n;
                }
                if (n == 0) {
                    for (auto& o : diag_off) {
                        int rr = r + o[0], cc = c + o[1];
                        if (rr < 0 || rr >= h || cc < 0 || cc >= w) continue;
                        if (mosaic.pattern.channel_index_at(rr, cc) != ch) continue;
                        sum += mosaic.at(rr, cc);
                        ++n;
                    }
                }
                out.at(r, c, ch) = (n > 0) ? round_avg(sum, n) : 0;
            }
        }
    }
    return out;
}

}  // namespace huemod
