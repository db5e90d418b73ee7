#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "oid/dataio.hpp"
#include "oid/selection.hpp"

namespace oid {

enum class Setting { ideal, real };

std::string to_string(Setting s);
Setting setting_from_string(const std::string& s);

/// Closed-form ridge estimate of a cold user's profile:
/// u = (gamma*I + V_B C_B^{-2} V_B^T)^{-1} V_B C_B^{-2} R.
ColdUserProfile ridge_estimate(const DenseMatrix& v_b, std::span<const double> c_b,
                               std::span<const double> ratings, double gamma);

/// One cold user's interview simulation: the true profile, a candidate pool
/// the selector may see, and a disjoint test set it may not.
struct ColdUserTrial {
    int user_id = 0;
    ColdUserProfile true_profile;
    std::vector<int> candidate_items;
    std::vector<int> test_items;
    Setting setting = Setting::ideal;
    std::uint64_t seed = 0;
    // actual ratings, required in the real setting for reveal and test
    std::unordered_map<int, double> ratings;

    void validate() const;
};

struct TrialResult {
    SelectionAlgorithm algorithm = SelectionAlgorithm::FG2;
    int budget = 0;
    double prediction_rmse = 0.0;
    double profile_error = 0.0;
    double runtime_ms = 0.0;
    std::uint64_t evals = 0;
    bool truncated = false;
};

/// Select b items from the candidate pool, reveal the user's ratings on
/// them, ridge-estimate the profile, and score prediction RMSE on the test
/// set plus squared profile error. Ideal-setting ratings are the exact
/// model inner products (never clamped); real-setting predictions are
/// clamped to the rating scale.
TrialResult run_trial(const ColdUserTrial& trial, const FactorModel& model, const NoiseModel& noise,
                      SelectionAlgorithm algorithm, int budget, double gamma,
                      const RatingsDataset* warm_for_stats = nullptr, double shared_sigma = 1.0,
                      const RatingScale* scale = nullptr);

struct SynthConfig {
    int users = 700;
    int items = 200;
    int latent_dim = 10;
    double noise_sigma = 0.5;
    double density = 0.35;
};

struct ExperimentConfig {
    DatasetDescriptor dataset;          // ignored when synthetic
    bool synthetic = true;
    SynthConfig synth;
    bool use_truth_model = true;        // synthetic only: skip training, use the generator's factors
    Hyperparameters hyper;
    Setting setting = Setting::ideal;
    std::vector<SelectionAlgorithm> algorithms{SelectionAlgorithm::FG2, SelectionAlgorithm::RS,
                                               SelectionAlgorithm::PI};
    std::vector<int> budgets{4, 6, 8, 10};
    std::uint64_t seed = 1;
    int threads = 1;
    double warm_fraction = 0.7;
    double warm_holdout_fraction = 0.1;  // held-out slice of warm ratings for the reported RMSE
    double gamma = 0.01;                // ridge regularizer for profile estimation
    double selection_gamma = 1e-6;      // regularizer inside greedy search
    double sigma_floor = 1e-3;
    int max_cold_users = 0;             // 0 = all
    double candidate_fraction = 0.5;    // candidate/test split per cold user
    bool timing = true;                 // zero the time columns for byte-identical reruns
    std::string out_dir = "results";
};

struct ResultRow {
    std::string dataset;
    Setting setting = Setting::ideal;
    SelectionAlgorithm algorithm = SelectionAlgorithm::FG2;
    int budget = 0;
    int n_users = 0;
    double mean_rmse = 0.0;
    double std_rmse = 0.0;
    double mean_profile_err = 0.0;
    double std_profile_err = 0.0;
    double mean_runtime_ms = 0.0;
    double mean_evals = 0.0;
};

struct ExperimentResult {
    std::vector<ResultRow> rows;
    double warm_rmse = 0.0;             // held-out RMSE of the trained model, when trained
    double fitted_shared_sigma = 1.0;   // grid-fitted sigma for the C = sigma*I variants
    std::size_t mean_pool_size = 0;
};

/// The full interview-simulation protocol: warm/cold split, model training
/// (or ground-truth reuse), noise estimation, then one trial per
/// (cold user x algorithm x budget). Deterministic given config.seed and
/// independent of the thread count.
ExperimentResult run_experiment(const RatingsDataset& dataset, const ExperimentConfig& config,
                                const FactorModel* truth_model = nullptr);

void write_result_csv(const std::vector<ResultRow>& rows, std::ostream& out, bool include_timing);

/// One file per metric: rows are budgets, one column per algorithm.
void write_plot_data(const std::vector<ResultRow>& rows, const std::string& metric, std::ostream& out);

}  // namespace oid
