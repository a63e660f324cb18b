#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "occ/tensor.hpp"

namespace occ {

/// Assigns each latent class to a target cluster; one map per clustering
/// orientation.
struct OrientationMap {
    std::string name;
    std::vector<int> class_to_cluster;

    int operator()(int latent_class) const;
    int cluster_count() const;
    void validate(int class_count) const;

    bool operator==(const OrientationMap&) const = default;
};

/// Classes {0,1,2,3}; A = {0,1}|{2,3}, B = {0,2}|{1,3}.
OrientationMap default_orientation_a();
OrientationMap default_orientation_b();

struct SyntheticSpec {
    int classes = 4;
    int samples_per_class = 500;
    int dim = 4;  // first half carries orientation A, second half orientation B
    double separation_a = 1.0;
    double separation_b = 0.6;
    double noise_sigma = 0.1;
    OrientationMap orientation_a = default_orientation_a();
    OrientationMap orientation_b = default_orientation_b();
    std::uint64_t seed = 0;

    void validate() const;
};

struct Dataset {
    Tensor2 features;
    std::vector<int> classes;
    std::vector<int> orient_a;  // empty when unknown
    std::vector<int> orient_b;
    OrientationMap map_a;
    OrientationMap map_b;
    std::string provenance;

    std::size_t size() const noexcept { return classes.size(); }
    std::size_t dim() const noexcept { return features.cols(); }
    bool has_orientations() const noexcept { return !orient_a.empty() && !orient_b.empty(); }
    const std::vector<int>& labels(char orientation) const;
    const OrientationMap& map(char orientation) const;
};

Dataset generate_synthetic(const SyntheticSpec& spec, std::mt19937_64& rng);
Dataset generate_synthetic(const SyntheticSpec& spec);

/// CSV (`f0,...,f{d-1},class[,orientA,orientB]`) or JSON lines with the same
/// keys, chosen by extension (.csv / .jsonl).
Dataset load_dataset(const std::filesystem::path& path);
void save_dataset(const Dataset& dataset, const std::filesystem::path& path);

struct ScatterRow {
    double pc1 = 0.0;
    double pc2 = 0.0;
    int latent_class = 0;
    int orient_a = -1;
    int orient_b = -1;
    int cluster = 0;
};

/// Projects rows onto their top-2 principal directions. Each direction is
/// sign-fixed so its largest-magnitude loading is positive.
Tensor2 principal_projection(const Tensor2& points);

std::vector<ScatterRow> scatter_rows(const Dataset& dataset, const Tensor2& zhat,
                                     const std::vector<int>& assignment);
void export_scatter(const Dataset& dataset, const Tensor2& zhat, const std::vector<int>& assignment,
                    const std::filesystem::path& path);

}  // namespace occ
