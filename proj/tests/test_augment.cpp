#include <cmath>
#include <limits>

#include "doctest.h"
#include "occ/augment.hpp"
#include "occ/errors.hpp"

using namespace occ;

TEST_CASE("all knobs off is the identity") {
    AugmentConfig cfg{0.0, 0.0, 0.0, 0};
    std::mt19937_64 rng(1);
    const std::vector<double> x{1.5, -2.0, 0.0, 3.25};
    const auto [a, b] = augment_pair(x, cfg, rng);
    CHECK(a == x);
    CHECK(b == x);
}

TEST_CASE("same seed gives the same pair") {
    AugmentConfig cfg{0.3, 0.2, 0.1, 7};
    const std::vector<double> x{1, 2, 3, 4, 5};
    std::mt19937_64 r1(42), r2(42);
    CHECK(augment_pair(x, cfg, r1) == augment_pair(x, cfg, r2));
}

TEST_CASE("the two views are independent draws") {
    AugmentConfig cfg{0.1, 0.0, 0.0, 0};
    std::mt19937_64 rng(3);
    const std::vector<double> x(16, 1.0);
    const auto [a, b] = augment_pair(x, cfg, rng);
    CHECK(a != b);
}

TEST_CASE("noise on a long zero vector averages out") {
    AugmentConfig cfg{0.1, 0.0, 0.0, 0};
    std::mt19937_64 rng(5);
    const std::vector<double> x(1000, 0.0);
    for (int trial = 0; trial < 5; ++trial) {
        const auto v = augment_view(x, cfg, rng);
        double mean = 0;
        for (double e : v) mean += e;
        mean /= 1000;
        CHECK(std::abs(mean) < 3 * 0.1 / std::sqrt(1000.0));
    }
}

TEST_CASE("dimensionality is preserved") {
    AugmentConfig cfg{0.5, 0.5, 0.5, 0};
    std::mt19937_64 rng(6);
    for (std::size_t d : {1u, 2u, 9u}) {
        const auto [a, b] = augment_pair(std::vector<double>(d, 1.0), cfg, rng);
        CHECK(a.size() == d);
        CHECK(b.size() == d);
    }
}

TEST_CASE("dropout with probability one zeroes a noiseless view") {
    AugmentConfig cfg{0.0, 1.0, 0.0, 0};
    std::mt19937_64 rng(7);
    for (double v : augment_view(std::vector<double>{1, 2, 3}, cfg, rng)) CHECK(v == 0.0);
}

TEST_CASE("invalid config and input are rejected") {
    CHECK_THROWS_AS((AugmentConfig{-1.0, 0, 0, 0}.validate()), ConfigError);
    CHECK_THROWS_AS((AugmentConfig{0.1, 1.5, 0, 0}.validate()), ConfigError);
    CHECK_THROWS_AS((AugmentConfig{0.1, 0, -0.1, 0}.validate()), ConfigError);
    std::mt19937_64 rng(8);
    const std::vector<double> bad{1.0, std::numeric_limits<double>::quiet_NaN()};
    CHECK_THROWS_AS(augment_view(bad, AugmentConfig{}, rng), InvalidInput);
}
