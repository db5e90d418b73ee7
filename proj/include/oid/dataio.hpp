#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "oid/pmf.hpp"

namespace oid {

enum class DatasetFormat { udata, ratings_dat, csv };

DatasetFormat dataset_format_from_string(const std::string& s);
std::string to_string(DatasetFormat f);

struct DatasetDescriptor {
    std::string name;
    std::string path;
    DatasetFormat format = DatasetFormat::csv;
    RatingScale scale{1.0, 5.0};
    std::optional<std::int64_t> expected_ratings;
    std::optional<int> expected_users;
    std::optional<int> expected_items;
};

/// Parse a ratings file, densely re-index ids, and validate counts against
/// the descriptor. Count mismatches become warnings on the returned dataset;
/// malformed lines raise ParseError with the line number.
RatingsDataset load_dataset(const DatasetDescriptor& desc);

/// Serialize as generic CSV (header `user,item,rating`), using original ids.
void save_dataset_csv(const RatingsDataset& dataset, const std::string& path);

/// Seeded user-level partition: floor(warm_fraction * m) warm users. The
/// warm dataset re-indexes users (items keep their ids); the cold list holds
/// the remaining users' dense ids in the input dataset's indexing.
std::pair<RatingsDataset, std::vector<int>> split_warm_cold(const RatingsDataset& dataset,
                                                            double warm_fraction, std::uint64_t seed);

struct SynthResult {
    RatingsDataset data;
    FactorModel truth;
};

/// Zero-mean Gaussian factors, ratings U_i^T V_j + N(0, noise_sigma^2); each
/// cell observed independently with probability density.
SynthResult synth_generate(int num_users, int num_items, int latent_dim, double noise_sigma,
                           std::uint64_t seed, double density = 1.0);

}  // namespace oid
