// Copyright 2026 The fishforge authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "fishforge/image.hpp"
#include "fishforge/rng.hpp"

namespace fishforge {

/// Per-channel 256-bin histogram with its cumulative distribution.
struct HistogramSpec {
    std::array<std::array<std::uint32_t, 256>, 3> counts{};
    std::array<std::array<double, 256>, 3> cdf{};
    std::uint64_t total = 0;

    void finalize() {
        for (int c = 0; c < 3; ++c) {
            std::uint64_t cum = 0;
            for (int k = 0; k < 256; ++k) {
                cum += counts[c][k];
                cdf[c][k] = total ? static_cast<double>(cum) / static_cast<double>(total) : 0.0;
            }
        }
    }
};

/// RGB triples drawn from a reference region, plus the descriptor needed to
/// reproduce the draw (recorded in the manifest).
struct PixelSample {
    enum class Region { BackgroundPatch, HighConfidencePositives };

    std::vector<std::array<std::uint8_t, 3>> pixels;
    Region region = Region::BackgroundPatch;
    RectI patch;                // BackgroundPatch: the sampled rectangle
    double conf = 0.0;          // HighConfidencePositives: confidence gate
    long long qualifying = 0;   // HighConfidencePositives: |{soft >= conf}|
    double fraction = 0.0;      // sample fraction used
};

inline HistogramSpec compute_histogram(const PixelSample& sample) {
    if (sample.pixels.empty())
        throw std::invalid_argument("compute_histogram: empty pixel sample");
    HistogramSpec h;
    for (const auto& px : sample.pixels)
        for (int c = 0; c < 3; ++c) ++h.counts[c][px[c]];
    h.total = sample.pixels.size();
    h.finalize();
    return h;
}

/// Histogram of the asset's opaque (alpha>0) pixels only, so transparent
/// padding cannot pollute the color distribution.
inline HistogramSpec compute_histogram(const FishAsset& asset) {
    HistogramSpec h;
    for (int y = 0; y < asset.height(); ++y) {
        for (int x = 0; x < asset.width(); ++x) {
            const std::uint8_t* p = asset.image.pixel(x, y);
            if (p[3] == 0) continue;
            ++h.counts[0][p[0]];
            ++h.counts[1][p[1]];
            ++h.counts[2][p[2]];
            ++h.total;
        }
    }
    if (h.total == 0)
        throw std::invalid_argument("compute_histogram: asset is fully transparent");
    h.finalize();
    return h;
}

namespace detail {

// G^-1 by linear interpolation between the bin edges bracketing q. Picking
// the smallest k with G[k] >= q lands on the lower edge of any flat region,
// and guarantees the bracket (G[k-1], G[k]] has positive slope.
inline double inverse_cdf(const std::array<double, 256>& g, double q) {
    const int k = static_cast<int>(std::lower_bound(g.begin(), g.end(), q) - g.begin());
    if (k >= 256) return 255.0;
    if (k == 0) return 0.0;
    return (k - 1) + (q - g[k - 1]) / (g[k] - g[k - 1]);
}

// ceil(frac * n) with a guard against FP excess (0.1 * 100 must give 10, not
// 11), clamped to [1, n].
inline long long sample_count(double frac, long long n) {
    const auto k = static_cast<long long>(std::ceil(frac * static_cast<double>(n) - 1e-9));
    return std::clamp(k, 1ll, n);
}

}  // namespace detail

/// Remap each channel of the opaque pixels through v -> G^-1(H(v)), where H
/// is the asset's own opaque-pixel CDF and G the reference CDF. The alpha
/// channel is never touched.
inline FishAsset match_histogram(const FishAsset& asset, const HistogramSpec& reference) {
    if (reference.total == 0)
        throw std::invalid_argument("match_histogram: empty reference histogram");
    const HistogramSpec src = compute_histogram(asset);  // throws if fully transparent

    std::array<std::array<std::uint8_t, 256>, 3> lut;
    for (int c = 0; c < 3; ++c)
        for (int v = 0; v < 256; ++v) {
            const double out = detail::inverse_cdf(reference.cdf[c], src.cdf[c][v]);
            lut[c][v] = static_cast<std::uint8_t>(std::lround(std::clamp(out, 0.0, 255.0)));
        }

    FishAsset out = asset;
    for (int y = 0; y < out.height(); ++y) {
        for (int x = 0; x < out.width(); ++x) {
            std::uint8_t* p = out.image.pixel(x, y);
            if (p[3] == 0) continue;
            p[0] = lut[0][p[0]];
            p[1] = lut[1][p[1]];
            p[2] = lut[2][p[2]];
        }
    }
    return out;
}

/// Stage 1 reference: ceil(frac * patch area) pixels drawn uniformly without
/// replacement from a background patch.
inline PixelSample stage1_reference(const RasterImage& bg, RectI patch, double frac,
                                    RngStream& rng) {
    if (patch.empty()) throw std::invalid_argument("stage1_reference: empty patch");
    if (patch.x < 0 || patch.y < 0 || patch.x + patch.w > bg.width ||
        patch.y + patch.h > bg.height)
        throw std::invalid_argument("stage1_reference: patch outside background");
    if (!(frac > 0.0 && frac <= 1.0))
        throw std::invalid_argument("stage1_reference: fraction must be in (0, 1]");

    const long long area = patch.area();
    const long long k = detail::sample_count(frac, area);
    const auto picks =
        rng.sample_without_replacement(static_cast<std::uint32_t>(area),
                                       static_cast<std::uint32_t>(k));

    PixelSample sample;
    sample.region = PixelSample::Region::BackgroundPatch;
    sample.patch = patch;
    sample.fraction = frac;
    sample.pixels.reserve(picks.size());
    for (const auto idx : picks) {
        const int px = patch.x + static_cast<int>(idx % patch.w);
        const int py = patch.y + static_cast<int>(idx / patch.w);
        const std::uint8_t* p = bg.pixel(px, py);
        sample.pixels.push_back({p[0], p[1], p[2]});
    }
    return sample;
}

/// Stage 2 reference: pixels whose soft probability reaches `conf`. Returns
/// nullopt -- the signal to place no fish -- when fewer than
/// min_frac * (W*H) pixels qualify; otherwise samples ceil(frac * |S|) of
/// them uniformly without replacement.
inline std::optional<PixelSample> stage2_reference(const RasterImage& img, const SoftMask& soft,
                                                   double conf, double min_frac, double frac,
                                                   RngStream& rng) {
    if (img.width != soft.width || img.height != soft.height)
        throw std::invalid_argument("stage2_reference: image/soft-mask dimension mismatch");
    if (!(conf > 0.0 && conf < 1.0))
        throw std::invalid_argument("stage2_reference: conf must be in (0, 1)");

    std::vector<std::uint32_t> qualifying;
    const std::size_t total = static_cast<std::size_t>(soft.width) * soft.height;
    for (std::size_t i = 0; i < total; ++i)
        if (soft.data[i] / 65535.0 >= conf) qualifying.push_back(static_cast<std::uint32_t>(i));

    // "At least min_frac of the image": exact equality qualifies, so leave
    // slack for the FP product.
    const double needed = min_frac * static_cast<double>(total) - 1e-9;
    if (static_cast<double>(qualifying.size()) < needed) return std::nullopt;

    const long long k = detail::sample_count(frac, static_cast<long long>(qualifying.size()));
    const auto picks =
        rng.sample_without_replacement(static_cast<std::uint32_t>(qualifying.size()),
                                       static_cast<std::uint32_t>(k));

    PixelSample sample;
    sample.region = PixelSample::Region::HighConfidencePositives;
    sample.conf = conf;
    sample.qualifying = static_cast<long long>(qualifying.size());
    sample.fraction = frac;
    sample.pixels.reserve(picks.size());
    for (const auto pick : picks) {
        const std::uint32_t idx = qualifying[pick];
        const std::uint8_t* p =
            img.data.data() + static_cast<std::size_t>(idx) * img.channels;
        sample.pixels.push_back({p[0], p[1], p[2]});
    }
    return sample;
}

}  // namespace fishforge
