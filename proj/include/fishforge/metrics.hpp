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
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "fishforge/image.hpp"

namespace fishforge {

namespace detail {

inline void require_same_dims(int aw, int ah, int bw, int bh, const char* what) {
    if (aw != bw || ah != bh) throw std::invalid_argument(std::string(what) + ": dimension mismatch");
}

}  // namespace detail

/// Dice coefficient 2|A∩B| / (|A|+|B|). Two empty masks agree perfectly: 1.0.
inline double dice(const BinaryMask& pred, const BinaryMask& gt) {
    detail::require_same_dims(pred.width, pred.height, gt.width, gt.height, "dice");
    std::uint64_t inter = 0, a = 0, b = 0;
    const std::size_t n = pred.data.size();
    for (std::size_t i = 0; i < n; ++i) {
        const bool p = pred.data[i] != 0, g = gt.data[i] != 0;
        inter += p && g;
        a += p;
        b += g;
    }
    if (a + b == 0) return 1.0;
    return 2.0 * static_cast<double>(inter) / static_cast<double>(a + b);
}

/// Intersection over union |A∩B| / |A∪B|. Two empty masks agree perfectly: 1.0.
inline double iou(const BinaryMask& pred, const BinaryMask& gt) {
    detail::require_same_dims(pred.width, pred.height, gt.width, gt.height, "iou");
    std::uint64_t inter = 0, uni = 0;
    const std::size_t n = pred.data.size();
    for (std::size_t i = 0; i < n; ++i) {
        const bool p = pred.data[i] != 0, g = gt.data[i] != 0;
        inter += p && g;
        uni += p || g;
    }
    if (uni == 0) return 1.0;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

/// Threshold a soft mask: positive where probability >= t.
inline BinaryMask binarize(const SoftMask& soft, double threshold) {
    BinaryMask out = BinaryMask::create(soft.width, soft.height);
    const std::size_t n = soft.data.size();
    for (std::size_t i = 0; i < n; ++i)
        out.data[i] = (soft.data[i] / 65535.0 >= threshold) ? 255 : 0;
    return out;
}

struct PrPoint {
    double threshold = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double dice = 0.0;  // 2PR/(P+R), or 0 when P+R = 0
};

/// Streams (soft prediction, ground truth) pairs into per-value positive and
/// negative counts, then sweeps thresholds over the pooled counts
/// (micro-averaging). Suffix sums make each threshold O(1) after an O(65536)
/// pass, independent of how many pixels were added.
class PrAccumulator {
  public:
    PrAccumulator() : pos_(65536, 0), neg_(65536, 0) {}

    void add(const SoftMask& soft, const BinaryMask& gt) {
        detail::require_same_dims(soft.width, soft.height, gt.width, gt.height, "PrAccumulator");
        const std::size_t n = soft.data.size();
        for (std::size_t i = 0; i < n; ++i) {
            if (gt.data[i] != 0)
                ++pos_[soft.data[i]];
            else
                ++neg_[soft.data[i]];
        }
    }

    /// Precision = TP/(TP+FP), defined as 1.0 with no predicted positives.
    /// Recall = TP/P, defined as 1.0 with no actual positives.
    std::vector<PrPoint> sweep(const std::vector<double>& thresholds) const {
        std::vector<std::uint64_t> suf_pos(65537, 0), suf_neg(65537, 0);
        for (int v = 65535; v >= 0; --v) {
            suf_pos[v] = suf_pos[v + 1] + pos_[v];
            suf_neg[v] = suf_neg[v + 1] + neg_[v];
        }
        const std::uint64_t total_pos = suf_pos[0];

        std::vector<PrPoint> out;
        out.reserve(thresholds.size());
        for (const double t : thresholds) {
            const int vmin = first_positive_value(t);
            const std::uint64_t tp = suf_pos[vmin], fp = suf_neg[vmin];
            PrPoint p;
            p.threshold = t;
            p.precision = (tp + fp) ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 1.0;
            p.recall = total_pos ? static_cast<double>(tp) / static_cast<double>(total_pos) : 1.0;
            p.dice = (p.precision + p.recall > 0.0)
                         ? 2.0 * p.precision * p.recall / (p.precision + p.recall)
                         : 0.0;
            out.push_back(p);
        }
        return out;
    }

  private:
    // Smallest v with v/65535 >= t, using the same predicate as binarize so
    // the sweep and the thresholded masks can never disagree. 65536 means no
    // value qualifies.
    static int first_positive_value(double t) {
        int lo = 0, hi = 65536;
        while (lo < hi) {
            const int mid = (lo + hi) / 2;
            if (mid / 65535.0 >= t)
                hi = mid;
            else
                lo = mid + 1;
        }
        return lo;
    }

    std::vector<std::uint64_t> pos_, neg_;
};

/// Micro-averaged PR sweep over aligned (prediction, reference) lists.
inline std::vector<PrPoint> pr_sweep(const std::vector<SoftMask>& soft,
                                     const std::vector<BinaryMask>& ref,
                                     const std::vector<double>& thresholds) {
    if (soft.size() != ref.size())
        throw std::invalid_argument("pr_sweep: misaligned prediction/reference lists");
    PrAccumulator acc;
    for (std::size_t i = 0; i < soft.size(); ++i) acc.add(soft[i], ref[i]);
    return acc.sweep(thresholds);
}

/// {0.00, 0.01, ..., 1.00}
inline std::vector<double> default_threshold_grid() {
    std::vector<double> grid;
    grid.reserve(101);
    for (int i = 0; i <= 100; ++i) grid.push_back(i / 100.0);
    return grid;
}

/// Threshold of the maximal-dice point; ties resolve toward the larger
/// threshold.
inline double best_dice_threshold(const std::vector<PrPoint>& sweep) {
    if (sweep.empty()) throw std::invalid_argument("best_dice_threshold: empty sweep");
    double best_t = sweep.front().threshold, best_d = -1.0;
    for (const PrPoint& p : sweep) {
        if (p.dice > best_d || (p.dice == best_d && p.threshold > best_t)) {
            best_d = p.dice;
            best_t = p.threshold;
        }
    }
    return best_t;
}

}  // namespace fishforge
