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
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace fishforge {

namespace detail {

// SplitMix64 finalizer. Draw k of stream (seed, id) is mix64(key + k*GOLDEN),
// so sequences are pure functions of (seed, id, k) with no hidden state.
inline std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ull;

}  // namespace detail

/// Counter-based deterministic random stream. Identical (seed, stream_id)
/// always produce the identical draw sequence, on every platform.
class RngStream {
  public:
    RngStream(std::uint64_t seed, std::uint64_t stream_id)
        : key_(detail::mix64(detail::mix64(seed + detail::kGolden) ^ stream_id)),
          seed_(seed),
          stream_(stream_id) {}

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream_id() const { return stream_; }

    std::uint64_t next_u64() {
        counter_ += detail::kGolden;
        return detail::mix64(key_ + counter_);
    }

    /// Uniform real on [lo, hi); returns lo when the interval is degenerate.
    double uniform(double lo, double hi) {
        if (lo > hi) throw std::invalid_argument("RngStream::uniform: lo > hi");
        const double u = (next_u64() >> 11) * 0x1.0p-53;  // [0, 1)
        double v = lo + u * (hi - lo);
        if (v >= hi && hi > lo) v = std::nextafter(hi, lo);
        return v;
    }

    /// Unbiased integer on [0, n). Lemire's multiply-shift with rejection.
    std::uint64_t below(std::uint64_t n) {
        if (n == 0) throw std::invalid_argument("RngStream::below: n must be > 0");
        unsigned __int128 m = static_cast<unsigned __int128>(next_u64()) * n;
        auto lo = static_cast<std::uint64_t>(m);
        if (lo < n) {
            const std::uint64_t threshold = (0 - n) % n;
            while (lo < threshold) {
                m = static_cast<unsigned __int128>(next_u64()) * n;
                lo = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

    /// k distinct indices from [0, n), by partial Fisher-Yates. Order is part
    /// of the determinism contract.
    std::vector<std::uint32_t> sample_without_replacement(std::uint32_t n, std::uint32_t k) {
        if (k > n) throw std::invalid_argument("sample_without_replacement: k > n");
        std::vector<std::uint32_t> idx(n);
        for (std::uint32_t i = 0; i < n; ++i) idx[i] = i;
        for (std::uint32_t i = 0; i < k; ++i) {
            const auto j = i + static_cast<std::uint32_t>(below(n - i));
            std::swap(idx[i], idx[j]);
        }
        idx.resize(k);
        return idx;
    }

  private:
    std::uint64_t key_;
    std::uint64_t seed_;
    std::uint64_t stream_;
    std::uint64_t counter_ = 0;
};

inline std::uint64_t fnv1a64_str(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

/// Stream id for one output unit: a hash of (master seed, input stem, round).
inline std::uint64_t derive_stream(std::uint64_t master_seed, std::string_view stem,
                                   std::uint64_t round) {
    std::uint64_t h = detail::mix64(master_seed + detail::kGolden);
    h = detail::mix64(h ^ fnv1a64_str(stem));
    return detail::mix64(h + (round + 1) * detail::kGolden);
}

}  // namespace fishforge
