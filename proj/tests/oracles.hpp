#pragma once

// Reference implementations kept apart from the library code they check.

#include <algorithm>
#include <cstdint>

#include "dba/attack.hpp"
#include "dba/rng.hpp"

namespace oracle {

// Per-pixel DBA blend with explicit modular indexing. Terms are summed in the
// order x, shift_1, ..., shift_N, starting from 0.0.
inline dba::Image dba_wrap(const dba::Image& x, double alpha, const std::vector<dba::Offset>& offsets) {
    const int h = x.height, w = x.width, ch = x.channels;
    dba::Image out(h, w, ch);
    const double w0 = 1.0 - static_cast<double>(offsets.size()) * alpha;
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c)
            for (int k = 0; k < ch; ++k) {
                double acc = 0.0;
                acc += w0 * x.pixels[(r * w + c) * ch + k];
                for (const auto& o : offsets) {
                    const int sr = ((r - o.dy) % h + h) % h;
                    const int sc = ((c - o.dx) % w + w) % w;
                    acc += alpha * x.pixels[(sr * w + sc) * ch + k];
                }
                out.pixels[(r * w + c) * ch + k] = std::clamp(acc, 0.0, 1.0);
            }
    return out;
}

inline dba::Image random_image(dba::Rng& rng, int h, int w, int c) {
    dba::Image img(h, w, c);
    for (double& v : img.pixels) v = rng.uniform();
    return img;
}

// Random valid DBA spec for an h x w image: N in [1, 4], N * alpha < 1.
inline dba::DbaSpec random_dba(dba::Rng& rng, int h, int w) {
    dba::DbaSpec s;
    const int n = static_cast<int>(rng.between(1, 4));
    s.alpha = rng.uniform(1e-6, 1.0 / n - 1e-6);
    s.offsets.clear();
    for (int k = 0; k < n; ++k) {
        s.offsets.push_back({static_cast<int>(rng.between(-(w - 1), w - 1)), static_cast<int>(rng.between(-(h - 1), h - 1))});
    }
    s.edge_mode = dba::EdgeMode::Wrap;
    return s;
}

}  // namespace oracle
