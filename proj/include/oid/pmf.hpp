#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "oid/linalg.hpp"

namespace oid {

struct Rating {
    int user = 0;
    int item = 0;
    double value = 0.0;
};

struct RatingScale {
    double min = 1.0;
    double max = 5.0;

    double clamp(double r) const { return r < min ? min : (r > max ? max : r); }
};

/// Sparse user x item ratings; a (user, item) pair appears at most once.
/// Ids are dense 0-based; the original file ids are kept in the id maps.
struct RatingsDataset {
    int num_users = 0;
    int num_items = 0;
    std::vector<Rating> ratings;
    RatingScale scale;
    std::vector<std::int64_t> orig_user_ids;  // dense id -> original id
    std::vector<std::int64_t> orig_item_ids;
    std::vector<std::string> load_warnings;

    void validate() const;
};

struct Hyperparameters {
    int latent_dim = 20;
    double lambda_reg = 0.1;
    double momentum = 0.0;
    double eta0 = 0.005;       // initial step size; decreases linearly to eta0/epochs
    int epochs = 100;
    double init_std = 0.1;
    std::uint64_t seed = 1;
};

/// Latent factor matrices U (d x m) and V (d x n) plus the hyperparameters
/// they were trained with. Immutable after training.
struct FactorModel {
    int latent_dim = 0;
    DenseMatrix user_factors;  // d x m
    DenseMatrix item_factors;  // d x n
    Hyperparameters hyper;

    int num_users() const { return static_cast<int>(user_factors.cols()); }
    int num_items() const { return static_cast<int>(item_factors.cols()); }
    std::vector<double> item_vector(int j) const { return item_factors.column(static_cast<std::size_t>(j)); }
    std::vector<double> user_vector(int i) const { return user_factors.column(static_cast<std::size_t>(i)); }
};

/// Per-item rating-noise standard deviations forming the diagonal of C.
struct NoiseModel {
    std::vector<double> sigma;
    double floor = 1e-3;
};

enum class ProfileSource { folded_in, ridge_estimated };

struct ColdUserProfile {
    std::vector<double> u;
    ProfileSource source = ProfileSource::ridge_estimated;
};

/// Train PMF by seeded stochastic gradient descent on the regularized
/// squared-error objective, with a linearly decreasing step size.
/// Deterministic given the seed. Throws DivergenceError if the loss goes
/// non-finite.
FactorModel train(const RatingsDataset& dataset, const Hyperparameters& hyper);

/// Raw predicted rating U_i^T V_j (no clamping).
double predict(const FactorModel& model, int user_id, int item_id);

/// RMSE of the model over the given ratings; clamping is an evaluation-time
/// choice and never enters training.
double rmse(const FactorModel& model, std::span<const Rating> ratings, bool clamp, const RatingScale& scale);

/// Per-item residual standard deviations sigma_j, floored; items with no
/// ratings get the mean sigma of the rated ones.
NoiseModel estimate_noise(const FactorModel& model, const RatingsDataset& dataset, double floor = 1e-3);

/// Fit a single user's profile against fixed V by gradient descent on the
/// ridge objective sum_j (r_j - u^T V_j)^2 + lambda ||u||^2, run to gradient
/// norm < 1e-6 or an iteration cap. The seed only picks the starting point;
/// the problem is convex.
ColdUserProfile fold_in_user(const FactorModel& model, std::span<const std::pair<int, double>> ratings,
                             double lambda_reg, std::uint64_t seed);

/// Checkpoint round-trip (JSON, exact).
void save_checkpoint(const FactorModel& model, const std::string& path);
FactorModel load_checkpoint(const std::string& path);
std::string checkpoint_to_string(const FactorModel& model);
FactorModel checkpoint_from_string(const std::string& text);

}  // namespace oid
