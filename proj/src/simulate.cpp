#include "oid/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <set>
#include <thread>
#include <unordered_set>

#include "oid/rng.hpp"

namespace oid {

std::string to_string(Setting s) { return s == Setting::ideal ? "ideal" : "real"; }

Setting setting_from_string(const std::string& s) {
    if (s == "ideal") return Setting::ideal;
    if (s == "real") return Setting::real;
    throw InvalidArgumentError("unknown setting: " + s);
}

ColdUserProfile ridge_estimate(const DenseMatrix& v_b, std::span<const double> c_b,
                               std::span<const double> ratings, double gamma) {
    if (v_b.cols() == 0) throw InvalidArgumentError("ridge_estimate: empty selection");
    if (c_b.size() != v_b.cols() || ratings.size() != v_b.cols())
        throw InvalidArgumentError("ridge_estimate: sigma/rating count mismatch");
    if (gamma < 0.0) throw InvalidArgumentError("ridge_estimate: negative gamma");

    const std::size_t d = v_b.rows();
    std::vector<double> weights(c_b.size());
    std::vector<double> rhs(d, 0.0);
    for (std::size_t j = 0; j < c_b.size(); ++j) {
        if (!(c_b[j] > 0.0)) throw InvalidArgumentError("ridge_estimate: sigma must be positive");
        weights[j] = 1.0 / (c_b[j] * c_b[j]);
        const double wr = weights[j] * ratings[j];
        for (std::size_t i = 0; i < d; ++i) rhs[i] += wr * v_b(i, j);
    }
    const DenseMatrix m = weighted_gram(v_b, weights, gamma);
    return ColdUserProfile{cholesky_solve(m, rhs), ProfileSource::ridge_estimated};
}

void ColdUserTrial::validate() const {
    std::unordered_set<int> cand(candidate_items.begin(), candidate_items.end());
    for (int t : test_items)
        if (cand.count(t)) throw InvalidArgumentError("trial: candidate and test sets overlap");
    if (setting == Setting::real) {
        for (int j : candidate_items)
            if (!ratings.count(j)) throw InvalidArgumentError("trial: real-setting candidate item lacks a rating");
        for (int j : test_items)
            if (!ratings.count(j)) throw InvalidArgumentError("trial: real-setting test item lacks a rating");
    }
}

namespace {

bool is_identical_variance(SelectionAlgorithm a) {
    return a == SelectionAlgorithm::FG1 || a == SelectionAlgorithm::AFG1 || a == SelectionAlgorithm::BG1 ||
           a == SelectionAlgorithm::ABG1;
}

bool needs_baseline_stats(SelectionAlgorithm a) {
    return a == SelectionAlgorithm::PI || a == SelectionAlgorithm::HV || a == SelectionAlgorithm::Ent ||
           a == SelectionAlgorithm::Ent0;
}

double revealed_rating(const ColdUserTrial& trial, const FactorModel& model, int item) {
    if (trial.setting == Setting::ideal) {
        const std::vector<double> v = model.item_vector(item);
        return dot(v, trial.true_profile.u);
    }
    return trial.ratings.at(item);
}

}  // namespace

TrialResult run_trial(const ColdUserTrial& trial, const FactorModel& model, const NoiseModel& noise,
                      SelectionAlgorithm algorithm, int budget, double gamma,
                      const RatingsDataset* warm_for_stats, double shared_sigma,
                      const RatingScale* scale) {
    trial.validate();
    if (budget < 1) throw InvalidArgumentError("run_trial: budget must be >= 1");
    if (trial.candidate_items.empty()) throw InvalidArgumentError("run_trial: empty candidate pool");

    // selection sees the candidate pool and nothing else
    CandidatePool pool = make_pool(model, noise, trial.candidate_items);
    pool.shared_sigma = shared_sigma;
    if (needs_baseline_stats(algorithm)) {
        if (warm_for_stats == nullptr)
            throw MissingMetadataError(to_string(algorithm) + ": needs warm-dataset statistics");
        attach_baseline_stats(pool, *warm_for_stats, &model);
    }

    const std::uint64_t algo_seed = mix_seed(trial.seed, static_cast<std::uint64_t>(algorithm), budget);
    InterviewPlan plan = run_selection(pool, budget, algorithm, 1e-6, algo_seed, &model);

    // reveal ratings on the selected items and ridge-estimate the profile
    const std::size_t d = static_cast<std::size_t>(model.latent_dim);
    DenseMatrix v_b(d, plan.items.size());
    std::vector<double> sigmas(plan.items.size());
    std::vector<double> revealed(plan.items.size());
    const bool shared = is_identical_variance(algorithm);
    for (std::size_t c = 0; c < plan.items.size(); ++c) {
        const int j = plan.items[c];
        const std::vector<double> v = model.item_vector(j);
        for (std::size_t i = 0; i < d; ++i) v_b(i, c) = v[i];
        sigmas[c] = shared ? shared_sigma : noise.sigma[static_cast<std::size_t>(j)];
        revealed[c] = revealed_rating(trial, model, j);
    }
    const ColdUserProfile estimate = ridge_estimate(v_b, sigmas, revealed, gamma);

    double se = 0.0;
    for (int j : trial.test_items) {
        const std::vector<double> v = model.item_vector(j);
        double pred = dot(v, estimate.u);
        double truth;
        if (trial.setting == Setting::ideal) {
            truth = dot(v, trial.true_profile.u);
        } else {
            truth = trial.ratings.at(j);
            if (scale != nullptr) pred = scale->clamp(pred);
        }
        se += (pred - truth) * (pred - truth);
    }

    TrialResult result;
    result.algorithm = algorithm;
    result.budget = budget;
    result.prediction_rmse = trial.test_items.empty()
                                 ? 0.0
                                 : std::sqrt(se / static_cast<double>(trial.test_items.size()));
    double perr = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
        const double diff = estimate.u[i] - trial.true_profile.u[i];
        perr += diff * diff;
    }
    result.profile_error = perr;
    result.runtime_ms = plan.elapsed_ms;
    result.evals = plan.evals;
    result.truncated = plan.truncated;
    return result;
}

namespace {

struct TrialSlot {
    bool valid = false;
    TrialResult result;
};

std::pair<std::vector<Rating>, std::vector<Rating>> holdout_split(const std::vector<Rating>& ratings,
                                                                  double holdout_fraction,
                                                                  std::uint64_t seed) {
    std::vector<std::size_t> order(ratings.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(seed);
    rng.shuffle(order);
    const std::size_t held = static_cast<std::size_t>(std::floor(holdout_fraction * ratings.size()));
    std::vector<Rating> train, holdout;
    train.reserve(ratings.size() - held);
    holdout.reserve(held);
    for (std::size_t i = 0; i < order.size(); ++i)
        (i < held ? holdout : train).push_back(ratings[order[i]]);
    return {std::move(train), std::move(holdout)};
}

ColdUserTrial build_trial(int user, Setting setting, const std::vector<Rating>& user_ratings,
                          const std::vector<int>& covered_items, const FactorModel& model,
                          double candidate_fraction, double lambda_reg, std::uint64_t base_seed) {
    ColdUserTrial trial;
    trial.user_id = user;
    trial.setting = setting;
    trial.seed = mix_seed(base_seed, static_cast<std::uint64_t>(user));

    std::vector<std::pair<int, double>> pairs;
    pairs.reserve(user_ratings.size());
    for (const auto& r : user_ratings) {
        pairs.emplace_back(r.item, r.value);
        trial.ratings[r.item] = r.value;
    }
    trial.true_profile = fold_in_user(model, pairs, lambda_reg,
                                      mix_seed(base_seed, static_cast<std::uint64_t>(user), 0xf01d));

    std::vector<int> split_items;
    if (setting == Setting::ideal) {
        split_items = covered_items;  // ratings can be generated for any item
    } else {
        split_items.reserve(pairs.size());
        for (const auto& [item, value] : pairs) split_items.push_back(item);
        std::sort(split_items.begin(), split_items.end());
    }
    Rng rng(mix_seed(base_seed, static_cast<std::uint64_t>(user), 0x5217));
    rng.shuffle(split_items);
    const std::size_t n_cand = static_cast<std::size_t>(
        std::floor(candidate_fraction * static_cast<double>(split_items.size())));
    trial.candidate_items.assign(split_items.begin(), split_items.begin() + n_cand);
    trial.test_items.assign(split_items.begin() + n_cand, split_items.end());
    std::sort(trial.candidate_items.begin(), trial.candidate_items.end());
    std::sort(trial.test_items.begin(), trial.test_items.end());
    return trial;
}

double fit_shared_sigma(const std::vector<ColdUserTrial>& trials, const FactorModel& model, double gamma,
                        const RatingScale& scale) {
    const std::size_t sample = std::min<std::size_t>(trials.size(), 20);
    if (sample == 0) return 1.0;
    double best_sigma = 1.0;
    double best_rmse = std::numeric_limits<double>::infinity();
    const std::size_t d = static_cast<std::size_t>(model.latent_dim);
    for (double sigma = 0.25; sigma <= 2.0 + 1e-12; sigma += 0.25) {
        double se = 0.0;
        std::size_t count = 0;
        for (std::size_t t = 0; t < sample; ++t) {
            const ColdUserTrial& trial = trials[t];
            if (trial.candidate_items.empty() || trial.test_items.empty()) continue;
            DenseMatrix v_b(d, trial.candidate_items.size());
            std::vector<double> sig(trial.candidate_items.size(), sigma);
            std::vector<double> revealed(trial.candidate_items.size());
            for (std::size_t c = 0; c < trial.candidate_items.size(); ++c) {
                const std::vector<double> v = model.item_vector(trial.candidate_items[c]);
                for (std::size_t i = 0; i < d; ++i) v_b(i, c) = v[i];
                revealed[c] = revealed_rating(trial, model, trial.candidate_items[c]);
            }
            const ColdUserProfile est = ridge_estimate(v_b, sig, revealed, gamma);
            for (int j : trial.test_items) {
                const std::vector<double> v = model.item_vector(j);
                double pred = dot(v, est.u);
                double truth;
                if (trial.setting == Setting::ideal) {
                    truth = dot(v, trial.true_profile.u);
                } else {
                    truth = trial.ratings.at(j);
                    pred = scale.clamp(pred);
                }
                se += (pred - truth) * (pred - truth);
                ++count;
            }
        }
        if (count == 0) continue;
        const double rmse_val = std::sqrt(se / static_cast<double>(count));
        if (rmse_val < best_rmse - 1e-15) {
            best_rmse = rmse_val;
            best_sigma = sigma;
        }
    }
    return best_sigma;
}

}  // namespace

ExperimentResult run_experiment(const RatingsDataset& dataset, const ExperimentConfig& config,
                                const FactorModel* truth_model) {
    ExperimentResult out;
    auto [warm, cold_users] = split_warm_cold(dataset, config.warm_fraction, config.seed);

    // model: ground truth for synthetic runs, otherwise train on the warm
    // slice minus a held-out part used for the reported RMSE
    FactorModel trained;
    const FactorModel* model = nullptr;
    RatingsDataset warm_train = warm;
    if (config.synthetic && config.use_truth_model && truth_model != nullptr) {
        model = truth_model;
    } else {
        auto [train_ratings, holdout] =
            holdout_split(warm.ratings, config.warm_holdout_fraction, mix_seed(config.seed, 0x401d));
        warm_train.ratings = std::move(train_ratings);
        Hyperparameters hyper = config.hyper;
        trained = train(warm_train, hyper);
        out.warm_rmse = rmse(trained, holdout, true, warm.scale);
        model = &trained;
    }

    const NoiseModel noise = estimate_noise(*model, warm_train, config.sigma_floor);

    // items that received at least one warm rating
    std::vector<char> seen(static_cast<std::size_t>(dataset.num_items), 0);
    for (const auto& r : warm_train.ratings) seen[static_cast<std::size_t>(r.item)] = 1;
    std::vector<int> covered_items;
    for (int j = 0; j < dataset.num_items; ++j)
        if (seen[static_cast<std::size_t>(j)]) covered_items.push_back(j);
    if (covered_items.empty())
        for (int j = 0; j < dataset.num_items; ++j) covered_items.push_back(j);

    // group the cold users' ratings
    std::unordered_map<int, std::vector<Rating>> by_user;
    {
        std::unordered_set<int> cold_set(cold_users.begin(), cold_users.end());
        for (const auto& r : dataset.ratings)
            if (cold_set.count(r.user)) by_user[r.user].push_back(r);
    }

    std::vector<int> usable;
    for (int u : cold_users) {
        const auto it = by_user.find(u);
        if (it == by_user.end() || it->second.empty()) continue;
        if (config.setting == Setting::real && it->second.size() < 2) continue;
        usable.push_back(u);
    }
    if (config.max_cold_users > 0 && static_cast<int>(usable.size()) > config.max_cold_users)
        usable.resize(static_cast<std::size_t>(config.max_cold_users));

    std::vector<ColdUserTrial> trials;
    trials.reserve(usable.size());
    for (int u : usable)
        trials.push_back(build_trial(u, config.setting, by_user.at(u), covered_items, *model,
                                     config.candidate_fraction, config.hyper.lambda_reg, config.seed));

    std::size_t pool_total = 0;
    for (const auto& t : trials) pool_total += t.candidate_items.size();
    out.mean_pool_size = trials.empty() ? 0 : pool_total / trials.size();

    const bool any_identical = std::any_of(config.algorithms.begin(), config.algorithms.end(),
                                           is_identical_variance);
    out.fitted_shared_sigma = any_identical ? fit_shared_sigma(trials, *model, config.gamma, dataset.scale)
                                            : 1.0;

    // one slot per (user, algorithm, budget); trials are independent, so the
    // thread partition cannot change any result
    const std::size_t n_algos = config.algorithms.size();
    const std::size_t n_budgets = config.budgets.size();
    std::vector<TrialSlot> slots(trials.size() * n_algos * n_budgets);

    auto run_range = [&](std::size_t begin, std::size_t end) {
        for (std::size_t t = begin; t < end; ++t) {
            for (std::size_t a = 0; a < n_algos; ++a) {
                for (std::size_t b = 0; b < n_budgets; ++b) {
                    const int budget = config.budgets[b];
                    if (budget < 1) continue;
                    TrialSlot& slot = slots[(t * n_algos + a) * n_budgets + b];
                    const SelectionAlgorithm algo = config.algorithms[a];
                    if (trials[t].candidate_items.empty()) continue;
                    slot.result = run_trial(trials[t], *model, noise, algo,
                                            std::min<int>(budget, static_cast<int>(trials[t].candidate_items.size())),
                                            config.gamma, &warm_train, out.fitted_shared_sigma,
                                            &dataset.scale);
                    slot.result.budget = budget;
                    slot.valid = true;
                }
            }
        }
    };

    const int threads = std::max(1, config.threads);
    if (threads == 1 || trials.size() < 2) {
        run_range(0, trials.size());
    } else {
        std::vector<std::thread> workers;
        std::vector<std::exception_ptr> errors(static_cast<std::size_t>(threads));
        const std::size_t chunk = (trials.size() + threads - 1) / threads;
        for (int w = 0; w < threads; ++w) {
            const std::size_t begin = std::min(trials.size(), static_cast<std::size_t>(w) * chunk);
            const std::size_t end = std::min(trials.size(), begin + chunk);
            workers.emplace_back([&, w, begin, end]() {
                try {
                    run_range(begin, end);
                } catch (...) {
                    errors[static_cast<std::size_t>(w)] = std::current_exception();
                }
            });
        }
        for (auto& t : workers) t.join();
        for (const auto& e : errors)
            if (e) std::rethrow_exception(e);
    }

    for (std::size_t a = 0; a < n_algos; ++a) {
        for (std::size_t b = 0; b < n_budgets; ++b) {
            ResultRow row;
            row.dataset = config.synthetic ? "synth" : config.dataset.name;
            row.setting = config.setting;
            row.algorithm = config.algorithms[a];
            row.budget = config.budgets[b];
            double sum_r = 0.0, sum_r2 = 0.0, sum_p = 0.0, sum_p2 = 0.0, sum_t = 0.0, sum_e = 0.0;
            int n = 0;
            for (std::size_t t = 0; t < trials.size(); ++t) {
                const TrialSlot& slot = slots[(t * n_algos + a) * n_budgets + b];
                if (!slot.valid) continue;
                ++n;
                sum_r += slot.result.prediction_rmse;
                sum_r2 += slot.result.prediction_rmse * slot.result.prediction_rmse;
                sum_p += slot.result.profile_error;
                sum_p2 += slot.result.profile_error * slot.result.profile_error;
                sum_t += slot.result.runtime_ms;
                sum_e += static_cast<double>(slot.result.evals);
            }
            row.n_users = n;
            if (n > 0) {
                row.mean_rmse = sum_r / n;
                row.std_rmse = std::sqrt(std::max(0.0, sum_r2 / n - row.mean_rmse * row.mean_rmse));
                row.mean_profile_err = sum_p / n;
                row.std_profile_err =
                    std::sqrt(std::max(0.0, sum_p2 / n - row.mean_profile_err * row.mean_profile_err));
                row.mean_runtime_ms = sum_t / n;
                row.mean_evals = sum_e / n;
            }
            out.rows.push_back(row);
        }
    }
    return out;
}

namespace {

std::string format_number(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

}  // namespace

void write_result_csv(const std::vector<ResultRow>& rows, std::ostream& out, bool include_timing) {
    out << "dataset,setting,algorithm,budget,n_users,mean_rmse,std_rmse,mean_profile_err,std_profile_err,"
           "mean_runtime_ms,mean_evals\n";
    for (const auto& r : rows) {
        out << r.dataset << ',' << to_string(r.setting) << ',' << to_string(r.algorithm) << ',' << r.budget
            << ',' << r.n_users << ',' << format_number(r.mean_rmse) << ',' << format_number(r.std_rmse)
            << ',' << format_number(r.mean_profile_err) << ',' << format_number(r.std_profile_err) << ','
            << format_number(include_timing ? r.mean_runtime_ms : 0.0) << ',' << format_number(r.mean_evals)
            << '\n';
    }
}

void write_plot_data(const std::vector<ResultRow>& rows, const std::string& metric, std::ostream& out) {
    std::vector<SelectionAlgorithm> algos;
    std::vector<int> budgets;
    for (const auto& r : rows) {
        if (std::find(algos.begin(), algos.end(), r.algorithm) == algos.end()) algos.push_back(r.algorithm);
        if (std::find(budgets.begin(), budgets.end(), r.budget) == budgets.end()) budgets.push_back(r.budget);
    }
    std::sort(budgets.begin(), budgets.end());

    auto value_of = [&metric](const ResultRow& r) {
        if (metric == "profile_error") return r.mean_profile_err;
        if (metric == "rmse") return r.mean_rmse;
        if (metric == "runtime_ms") return r.mean_runtime_ms;
        if (metric == "evals") return r.mean_evals;
        throw InvalidArgumentError("write_plot_data: unknown metric " + metric);
    };

    out << "budget";
    for (auto a : algos) out << ',' << to_string(a);
    out << '\n';
    for (int b : budgets) {
        out << b;
        for (auto a : algos) {
            double v = std::numeric_limits<double>::quiet_NaN();
            for (const auto& r : rows)
                if (r.algorithm == a && r.budget == b) v = value_of(r);
            out << ',' << format_number(v);
        }
        out << '\n';
    }
}

}  // namespace oid
