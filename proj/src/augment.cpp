#include "occ/augment.hpp"

#include <cmath>

#include "occ/errors.hpp"

namespace occ {

void AugmentConfig::validate() const {
    if (!std::isfinite(noise_sigma) || noise_sigma < 0.0)
        throw ConfigError("augment.noise_sigma must be finite and >= 0");
    if (!(dropout >= 0.0 && dropout <= 1.0)) throw ConfigError("augment.dropout must lie in [0,1]");
    if (!std::isfinite(scale_jitter) || scale_jitter < 0.0)
        throw ConfigError("augment.scale_jitter must be finite and >= 0");
}

std::vector<double> augment_view(std::span<const double> x, const AugmentConfig& cfg,
                                 std::mt19937_64& rng) {
    for (double v : x)
        if (!std::isfinite(v)) throw InvalidInput("augment: non-finite input feature");
    std::vector<double> out(x.begin(), x.end());
    // Knobs that are off draw nothing, so the identity config leaves rng untouched.
    if (cfg.scale_jitter > 0.0) {
        std::uniform_real_distribution<double> jitter(-cfg.scale_jitter, cfg.scale_jitter);
        for (double& v : out) v *= 1.0 + jitter(rng);
    }
    if (cfg.dropout > 0.0) {
        std::bernoulli_distribution drop(cfg.dropout);
        for (double& v : out)
            if (drop(rng)) v = 0.0;
    }
    if (cfg.noise_sigma > 0.0) {
        std::normal_distribution<double> noise(0.0, cfg.noise_sigma);
        for (double& v : out) v += noise(rng);
    }
    return out;
}

std::pair<std::vector<double>, std::vector<double>> augment_pair(std::span<const double> x,
                                                                 const AugmentConfig& cfg,
                                                                 std::mt19937_64& rng) {
    auto a = augment_view(x, cfg, rng);
    auto b = augment_view(x, cfg, rng);
    return {std::move(a), std::move(b)};
}

}  // namespace occ
