#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <utility>
#include <vector>

namespace occ {

/// Vector-space augmentation family: each view is x * (1 + u) masked by
/// feature dropout plus Gaussian noise, u ~ U(-jitter, jitter) per feature.
struct AugmentConfig {
    double noise_sigma = 0.1;
    double dropout = 0.0;
    double scale_jitter = 0.1;
    std::uint64_t seed = 0;

    void validate() const;
};

std::vector<double> augment_view(std::span<const double> x, const AugmentConfig& cfg,
                                 std::mt19937_64& rng);

std::pair<std::vector<double>, std::vector<double>> augment_pair(std::span<const double> x,
                                                                 const AugmentConfig& cfg,
                                                                 std::mt19937_64& rng);

}  // namespace occ
