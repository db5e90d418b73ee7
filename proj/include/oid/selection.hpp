#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "oid/objective.hpp"
#include "oid/pmf.hpp"

namespace oid {

/// FG/BG are forward/backward greedy; the A-prefix marks lazy-evaluation
/// acceleration. "1"-variants assume identical noise (C = sigma*I), the
/// "2"-variants use per-item sigma_j. PI/RS/HV/Ent/Ent0 are baselines.
enum class SelectionAlgorithm { FG1, FG2, AFG1, AFG2, BG1, BG2, ABG1, ABG2, PI, RS, HV, Ent, Ent0 };

std::string to_string(SelectionAlgorithm a);
SelectionAlgorithm selection_algorithm_from_string(const std::string& s);
std::vector<SelectionAlgorithm> all_selection_algorithms();

enum class VarianceMode { identical, per_item };

struct PoolItem {
    int id = 0;
    std::vector<double> latent;
    double sigma = 1.0;
    std::int64_t rating_count = -1;              // -1: unknown
    std::vector<std::int64_t> histogram;         // empty: unknown
    double prediction_variance = std::numeric_limits<double>::quiet_NaN();
};

struct CandidatePool {
    std::size_t dim = 0;
    double shared_sigma = 1.0;                   // used by the "1"-variants
    std::int64_t num_warm_users = -1;            // for Ent0's unrated category
    std::vector<PoolItem> items;

    void validate() const;
};

/// Pool over the given item ids with latent columns from the model and
/// sigmas from the noise model.
CandidatePool make_pool(const FactorModel& model, const NoiseModel& noise, std::span<const int> item_ids);

/// Fill rating counts, rating histograms, and predicted-rating variance over
/// warm users, for the baselines that need them.
void attach_baseline_stats(CandidatePool& pool, const RatingsDataset& warm, const FactorModel* model);

struct InterviewPlan {
    SelectionAlgorithm algorithm = SelectionAlgorithm::FG2;
    int requested_budget = 0;
    bool truncated = false;                      // budget exceeded the pool size
    std::vector<int> items;                      // selection order (forward) or survivors (backward)
    std::vector<double> step_f;                  // f after each algorithm step
    double final_f = 0.0;
    double final_f_gamma0 = std::numeric_limits<double>::quiet_NaN();  // only when |B| >= d and full rank
    std::uint64_t evals = 0;                     // marginal-gain / increment evaluations
    double elapsed_ms = 0.0;
};

/// Greedily add the item with the largest decrease in f until the budget is
/// reached. Ties go to the smallest item id.
InterviewPlan forward_greedy(const CandidatePool& pool, int budget, VarianceMode mode, double gamma,
                             std::uint64_t seed);

/// Lazy-evaluation forward greedy: a max-priority queue of possibly stale
/// gains, recomputed on pop, accepted when the fresh gain still tops the
/// queue. f is not supermodular, so the selection may diverge from the eager
/// run; divergences are counted, never hidden.
InterviewPlan forward_greedy_lazy(const CandidatePool& pool, int budget, VarianceMode mode, double gamma,
                                  std::uint64_t seed);

/// Start from the whole pool and repeatedly drop the item whose removal
/// increases f the least, until budget items remain. Under identical
/// variance, runs at gamma = 0 when the pool spans the space.
InterviewPlan backward_greedy(const CandidatePool& pool, int budget, VarianceMode mode, double gamma);

InterviewPlan backward_greedy_lazy(const CandidatePool& pool, int budget, VarianceMode mode, double gamma);

/// PI / RS / HV / Ent / Ent0. The model is only needed when HV variance is
/// not already attached to the pool.
InterviewPlan baseline_select(const CandidatePool& pool, int budget, SelectionAlgorithm method,
                              const FactorModel* model, std::uint64_t seed);

/// Dispatch on the algorithm enum.
InterviewPlan run_selection(const CandidatePool& pool, int budget, SelectionAlgorithm algo, double gamma,
                            std::uint64_t seed, const FactorModel* model = nullptr);

/// CSV: step,item_id,f_value,evals_so_far,elapsed_ms
void write_plan_csv(const InterviewPlan& plan, std::ostream& out, bool include_timing = true);

}  // namespace oid
