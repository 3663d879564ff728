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

#include <cmath>
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "fishforge/rng.hpp"

namespace fishforge {

class config_error : public std::runtime_error {
  public:
    explicit config_error(const std::string& what) : std::runtime_error(what) {}
};

/// Explicit probability table over fish counts, e.g. {0: 0.2, 1: 0.8}.
struct FishCountDistribution {
    std::vector<std::pair<int, double>> table;

    /// Sum of probabilities must be 1 within 1e-9; counts must be >= 0.
    void validate() const {
        if (table.empty()) throw config_error("fish-count distribution is empty");
        double sum = 0.0;
        for (const auto& [count, p] : table) {
            if (count < 0) throw config_error("fish-count distribution: negative count");
            if (p < 0.0) throw config_error("fish-count distribution: negative probability");
            sum += p;
        }
        if (std::abs(sum - 1.0) > 1e-9) {
            std::ostringstream os;
            os << "fish-count distribution: probabilities sum to " << sum << ", expected 1";
            throw config_error(os.str());
        }
    }

    /// Uniform over {1..max_count}.
    static FishCountDistribution uniform(int max_count) {
        FishCountDistribution d;
        for (int i = 1; i <= max_count; ++i)
            d.table.emplace_back(i, 1.0 / max_count);
        return d;
    }

    /// Parse "count:prob,count:prob,..." as used by the CLI --dist flag.
    static FishCountDistribution parse(const std::string& text) {
        FishCountDistribution d;
        std::stringstream ss(text);
        std::string item;
        while (std::getline(ss, item, ',')) {
            const auto colon = item.find(':');
            if (colon == std::string::npos)
                throw config_error("bad distribution entry '" + item + "' (want count:prob)");
            try {
                d.table.emplace_back(std::stoi(item.substr(0, colon)),
                                     std::stod(item.substr(colon + 1)));
            } catch (const std::exception&) {
                throw config_error("bad distribution entry '" + item + "'");
            }
        }
        d.validate();
        return d;
    }

    std::string to_string() const {
        std::ostringstream os;
        os.precision(17);
        for (std::size_t i = 0; i < table.size(); ++i) {
            if (i) os << ',';
            os << table[i].first << ':' << table[i].second;
        }
        return os.str();
    }
};

/// Inverse-CDF draw over the table, renormalized to kill residual drift.
inline int sample_fish_count(const FishCountDistribution& d, RngStream& rng) {
    d.validate();
    double total = 0.0;
    for (const auto& [count, p] : d.table) total += p;
    const double u = rng.uniform(0.0, 1.0) * total;
    double cum = 0.0;
    for (const auto& [count, p] : d.table) {
        cum += p;
        if (u < cum) return count;
    }
    return d.table.back().first;
}

/// All generation hyperparameters plus the master seed.
struct GenConfig {
    int stage = 1;

    // Ratio of (scaled fish largest dimension) / (background largest dimension).
    double ratio_lo = 0.1;
    double ratio_hi = 1.0 / 3.0;

    int tps_points = 3;          // control points per warp
    double tps_fraction = 0.2;   // displacement range as a fraction of each dimension

    double hm_sample_fraction = 0.10;     // reference pixels sampled from the selected area
    double conf_threshold = 0.8;          // stage 2: soft-output confidence gate
    double min_positive_fraction = 0.01;  // stage 2: skip images below this positive share
    double pseudo_label_threshold = 0.5;  // stage 2: binarization of the pseudo-label target

    FishCountDistribution fish_count = FishCountDistribution::uniform(3);

    std::uint64_t master_seed = 0;
    int max_placement_tries = 100;
    int alpha_cutoff = 127;  // mask membership threshold on warped alpha
    bool emit_instance_maps = false;

    void validate() const {
        if (stage != 1 && stage != 2) throw config_error("stage must be 1 or 2");
        if (!(ratio_lo > 0.0 && ratio_lo <= ratio_hi))
            throw config_error("size-ratio interval must satisfy 0 < lo <= hi");
        if (tps_points < 3) throw config_error("tps_points must be >= 3");
        if (!(tps_fraction > 0.0 && tps_fraction <= 0.5))
            throw config_error("tps_fraction must be in (0, 0.5]");
        if (!(hm_sample_fraction > 0.0 && hm_sample_fraction <= 1.0))
            throw config_error("hm_sample_fraction must be in (0, 1]");
        if (!(conf_threshold > 0.0 && conf_threshold < 1.0))
            throw config_error("conf_threshold must be in (0, 1)");
        if (!(min_positive_fraction > 0.0 && min_positive_fraction <= 1.0))
            throw config_error("min_positive_fraction must be in (0, 1]");
        if (!(pseudo_label_threshold >= 0.0 && pseudo_label_threshold <= 1.0))
            throw config_error("pseudo_label_threshold must be in [0, 1]");
        if (max_placement_tries < 1) throw config_error("max_placement_tries must be >= 1");
        if (alpha_cutoff < 0 || alpha_cutoff > 255)
            throw config_error("alpha_cutoff must be in [0, 255]");
        fish_count.validate();
    }
};

}  // namespace fishforge
