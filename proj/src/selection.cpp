#include "oid/selection.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <ostream>
#include <queue>
#include <unordered_map>
#include <unordered_set>

#include "oid/rng.hpp"

namespace oid {

namespace {

constexpr double kDefaultGamma = 1e-6;

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
    return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

double item_sigma(const CandidatePool& pool, const PoolItem& item, VarianceMode mode) {
    return mode == VarianceMode::identical ? pool.shared_sigma : item.sigma;
}

/// gamma = 0 value of the final selection, when defined.
double unregularized_f(const CandidatePool& pool, const std::vector<int>& chosen, VarianceMode mode) {
    if (chosen.size() < pool.dim) return std::numeric_limits<double>::quiet_NaN();
    std::unordered_map<int, const PoolItem*> by_id;
    for (const auto& it : pool.items) by_id[it.id] = &it;
    DenseMatrix cols(pool.dim, chosen.size());
    std::vector<double> sigmas(chosen.size());
    for (std::size_t c = 0; c < chosen.size(); ++c) {
        const PoolItem* it = by_id.at(chosen[c]);
        for (std::size_t i = 0; i < pool.dim; ++i) cols(i, c) = it->latent[i];
        sigmas[c] = item_sigma(pool, *it, mode);
    }
    try {
        return objective_f(cols, sigmas, 0.0);
    } catch (const SingularMatrixError&) {
        return std::numeric_limits<double>::quiet_NaN();
    }
}

struct GainKey {
    double gain;
    int id;
    // max-queue ordering: larger gain first, then smaller id
    bool operator<(const GainKey& o) const {
        if (gain != o.gain) return gain < o.gain;
        return id > o.id;
    }
};

struct IncrementKey {
    double increment;
    int id;
    // min-queue ordering: smaller increment first, then smaller id
    bool operator<(const IncrementKey& o) const {
        if (increment != o.increment) return increment > o.increment;
        return id > o.id;
    }
};

}  // namespace

std::string to_string(SelectionAlgorithm a) {
    switch (a) {
        case SelectionAlgorithm::FG1: return "FG1";
        case SelectionAlgorithm::FG2: return "FG2";
        case SelectionAlgorithm::AFG1: return "AFG1";
        case SelectionAlgorithm::AFG2: return "AFG2";
        case SelectionAlgorithm::BG1: return "BG1";
        case SelectionAlgorithm::BG2: return "BG2";
        case SelectionAlgorithm::ABG1: return "ABG1";
        case SelectionAlgorithm::ABG2: return "ABG2";
        case SelectionAlgorithm::PI: return "PI";
        case SelectionAlgorithm::RS: return "RS";
        case SelectionAlgorithm::HV: return "HV";
        case SelectionAlgorithm::Ent: return "Ent";
        case SelectionAlgorithm::Ent0: return "Ent0";
    }
    return "?";
}

SelectionAlgorithm selection_algorithm_from_string(const std::string& s) {
    for (SelectionAlgorithm a : all_selection_algorithms())
        if (to_string(a) == s) return a;
    throw InvalidArgumentError("unknown selection algorithm: " + s);
}

std::vector<SelectionAlgorithm> all_selection_algorithms() {
    return {SelectionAlgorithm::FG1, SelectionAlgorithm::FG2,  SelectionAlgorithm::AFG1,
            SelectionAlgorithm::AFG2, SelectionAlgorithm::BG1, SelectionAlgorithm::BG2,
            SelectionAlgorithm::ABG1, SelectionAlgorithm::ABG2, SelectionAlgorithm::PI,
            SelectionAlgorithm::RS,   SelectionAlgorithm::HV,  SelectionAlgorithm::Ent,
            SelectionAlgorithm::Ent0};
}

void CandidatePool::validate() const {
    std::unordered_set<int> ids;
    for (const auto& it : items) {
        if (!ids.insert(it.id).second) throw InvalidArgumentError("pool: duplicate item id");
        if (!(it.sigma > 0.0)) throw InvalidArgumentError("pool: sigma must be positive");
        if (it.latent.size() != dim) throw InvalidArgumentError("pool: latent dimension mismatch");
        if (!it.histogram.empty() && it.rating_count >= 0) {
            const std::int64_t total = std::accumulate(it.histogram.begin(), it.histogram.end(), std::int64_t{0});
            if (total != it.rating_count)
                throw InvalidArgumentError("pool: histogram does not sum to rating count");
        }
    }
    if (!(shared_sigma > 0.0)) throw InvalidArgumentError("pool: shared sigma must be positive");
}

CandidatePool make_pool(const FactorModel& model, const NoiseModel& noise, std::span<const int> item_ids) {
    CandidatePool pool;
    pool.dim = static_cast<std::size_t>(model.latent_dim);
    pool.items.reserve(item_ids.size());
    for (int id : item_ids) {
        if (id < 0 || id >= model.num_items()) throw InvalidArgumentError("make_pool: item id out of range");
        if (static_cast<std::size_t>(id) >= noise.sigma.size())
            throw InvalidArgumentError("make_pool: item missing from noise model");
        pool.items.push_back({id, model.item_vector(id), noise.sigma[static_cast<std::size_t>(id)], -1, {}, std::numeric_limits<double>::quiet_NaN()});
    }
    pool.validate();
    return pool;
}

void attach_baseline_stats(CandidatePool& pool, const RatingsDataset& warm, const FactorModel* model) {
    const double width = warm.scale.max - warm.scale.min;
    const bool integer_scale = width >= 0.0 && width <= 20.0 &&
                               std::floor(warm.scale.min) == warm.scale.min &&
                               std::floor(warm.scale.max) == warm.scale.max;
    const std::size_t bins = integer_scale ? static_cast<std::size_t>(width) + 1 : 5;

    std::unordered_map<int, std::size_t> index;
    for (std::size_t i = 0; i < pool.items.size(); ++i) {
        index[pool.items[i].id] = i;
        pool.items[i].rating_count = 0;
        pool.items[i].histogram.assign(bins, 0);
    }
    for (const auto& r : warm.ratings) {
        const auto it = index.find(r.item);
        if (it == index.end()) continue;
        PoolItem& item = pool.items[it->second];
        ++item.rating_count;
        std::size_t bin;
        if (integer_scale) {
            bin = static_cast<std::size_t>(std::lround(r.value - warm.scale.min));
        } else {
            bin = width > 0.0 ? static_cast<std::size_t>((r.value - warm.scale.min) / width * bins) : 0;
        }
        if (bin >= bins) bin = bins - 1;
        ++item.histogram[bin];
    }
    pool.num_warm_users = warm.num_users;

    if (model != nullptr) {
        const int m = model->num_users();
        for (PoolItem& item : pool.items) {
            double sum = 0.0, sq = 0.0;
            for (int u = 0; u < m; ++u) {
                const double p = predict(*model, u, item.id);
                sum += p;
                sq += p * p;
            }
            const double mean = m > 0 ? sum / m : 0.0;
            item.prediction_variance = m > 0 ? std::max(0.0, sq / m - mean * mean) : 0.0;
        }
    }
}

namespace {

InterviewPlan forward_greedy_impl(const CandidatePool& pool, int budget, VarianceMode mode, double gamma,
                                  bool lazy) {
    pool.validate();
    if (budget < 1) throw InvalidArgumentError("forward_greedy: budget must be >= 1");
    if (pool.items.empty()) throw InvalidArgumentError("forward_greedy: empty pool");
    const auto start = Clock::now();

    InterviewPlan plan;
    plan.algorithm = lazy ? (mode == VarianceMode::identical ? SelectionAlgorithm::AFG1 : SelectionAlgorithm::AFG2)
                          : (mode == VarianceMode::identical ? SelectionAlgorithm::FG1 : SelectionAlgorithm::FG2);
    plan.requested_budget = budget;
    const int take = std::min<int>(budget, static_cast<int>(pool.items.size()));
    plan.truncated = take < budget;

    const double g = gamma > 0.0 ? gamma : kDefaultGamma;
    ObjectiveState state = init_state(g, pool.dim);

    std::vector<char> chosen(pool.items.size(), 0);
    // candidate order is id-ascending so ties always resolve to the smallest id
    std::vector<std::size_t> order(pool.items.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&pool](std::size_t a, std::size_t b) { return pool.items[a].id < pool.items[b].id; });

    if (!lazy) {
        for (int step = 0; step < take; ++step) {
            bool have_best = false;
            GainKey best{0.0, 0};
            std::size_t best_idx = 0;
            for (std::size_t idx : order) {
                if (chosen[idx]) continue;
                const PoolItem& item = pool.items[idx];
                const double gain = marginal_gain(state, item.latent, item_sigma(pool, item, mode));
                const GainKey key{gain, item.id};
                if (!have_best || best < key) {
                    best = key;
                    best_idx = idx;
                    have_best = true;
                }
            }
            const PoolItem& pick = pool.items[best_idx];
            state = commit_add(state, pick.id, pick.latent, item_sigma(pool, pick, mode));
            chosen[best_idx] = 1;
            plan.items.push_back(pick.id);
            plan.step_f.push_back(state.current_f());
        }
    } else {
        struct QEntry {
            GainKey key;
            std::size_t idx;
            int stamp;  // |B| when the gain was computed
            bool operator<(const QEntry& o) const { return key < o.key; }
        };
        std::priority_queue<QEntry> queue;
        for (std::size_t idx : order) {
            const PoolItem& item = pool.items[idx];
            const double gain = marginal_gain(state, item.latent, item_sigma(pool, item, mode));
            queue.push({{gain, item.id}, idx, 0});
        }
        while (static_cast<int>(plan.items.size()) < take) {
            QEntry top = queue.top();
            queue.pop();
            const int now = static_cast<int>(plan.items.size());
            if (top.stamp != now) {
                const PoolItem& item = pool.items[top.idx];
                top.key.gain = marginal_gain(state, item.latent, item_sigma(pool, item, mode));
                top.stamp = now;
                if (!queue.empty() && top < queue.top()) {
                    queue.push(top);
                    continue;
                }
            }
            const PoolItem& pick = pool.items[top.idx];
            state = commit_add(state, pick.id, pick.latent, item_sigma(pool, pick, mode));
            plan.items.push_back(pick.id);
            plan.step_f.push_back(state.current_f());
        }
    }

    plan.final_f = state.current_f();
    plan.final_f_gamma0 = unregularized_f(pool, plan.items, mode);
    plan.evals = state.eval_counter();
    plan.elapsed_ms = ms_since(start);
    return plan;
}

InterviewPlan backward_greedy_impl(const CandidatePool& pool, int budget, VarianceMode mode, double gamma,
                                   bool lazy) {
    pool.validate();
    if (budget < 1) throw InvalidArgumentError("backward_greedy: budget must be >= 1");
    if (static_cast<int>(pool.items.size()) < budget)
        throw InvalidArgumentError("backward_greedy: pool smaller than budget");
    const auto start = Clock::now();

    InterviewPlan plan;
    plan.algorithm = lazy ? (mode == VarianceMode::identical ? SelectionAlgorithm::ABG1 : SelectionAlgorithm::ABG2)
                          : (mode == VarianceMode::identical ? SelectionAlgorithm::BG1 : SelectionAlgorithm::BG2);
    plan.requested_budget = budget;

    std::vector<std::size_t> order(pool.items.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&pool](std::size_t a, std::size_t b) { return pool.items[a].id < pool.items[b].id; });

    DenseMatrix cols(pool.dim, pool.items.size());
    std::vector<int> ids(pool.items.size());
    std::vector<double> sigmas(pool.items.size());
    std::unordered_map<int, const PoolItem*> by_id;
    for (std::size_t c = 0; c < order.size(); ++c) {
        const PoolItem& item = pool.items[order[c]];
        for (std::size_t i = 0; i < pool.dim; ++i) cols(i, c) = item.latent[i];
        ids[c] = item.id;
        sigmas[c] = item_sigma(pool, item, mode);
        by_id[item.id] = &item;
    }

    // the paper's BG minimizes f(V_B V_B^T) directly, so the identical-noise
    // variant runs unregularized whenever the full pool spans the space
    ObjectiveState state;
    if (mode == VarianceMode::identical) {
        try {
            state = state_from_columns(0.0, cols, ids, sigmas);
        } catch (const SingularMatrixError&) {
            state = state_from_columns(gamma > 0.0 ? gamma : kDefaultGamma, cols, ids, sigmas);
        }
    } else {
        state = state_from_columns(gamma > 0.0 ? gamma : kDefaultGamma, cols, ids, sigmas);
    }

    std::uint64_t carried_evals = 0;
    auto rebuild_with_gamma = [&](double g) {
        std::vector<int> keep = state.selected();
        std::sort(keep.begin(), keep.end());
        DenseMatrix kc(pool.dim, keep.size());
        std::vector<double> ks(keep.size());
        for (std::size_t c = 0; c < keep.size(); ++c) {
            const PoolItem* item = by_id.at(keep[c]);
            for (std::size_t i = 0; i < pool.dim; ++i) kc(i, c) = item->latent[i];
            ks[c] = item_sigma(pool, *item, mode);
        }
        carried_evals += state.eval_counter();
        state = state_from_columns(g, kc, keep, ks);
    };

    if (!lazy) {
        while (static_cast<int>(state.size()) > budget) {
            bool have_best = false;
            IncrementKey best{0.0, 0};
            for (int id : ids) {
                if (!state.contains(id)) continue;
                double inc;
                try {
                    inc = removal_increment(state, id);
                } catch (const DegenerateUpdateError&) {
                    continue;  // removal would break the span; keep the item
                }
                const IncrementKey key{inc, id};
                if (!have_best || best < key) {
                    best = key;
                    have_best = true;
                }
            }
            if (!have_best) {
                // every remaining removal is singular under gamma = 0
                rebuild_with_gamma(gamma > 0.0 ? gamma : kDefaultGamma);
                continue;
            }
            state = commit_remove(state, best.id);
            plan.step_f.push_back(state.current_f());
        }
    } else {
        struct QEntry {
            IncrementKey key;
            int stamp;  // removals done when computed
            bool operator<(const QEntry& o) const { return key < o.key; }
        };
        std::priority_queue<QEntry> queue;
        int removals = 0;
        auto prime_queue = [&]() {
            queue = {};
            for (int id : ids) {
                if (!state.contains(id)) continue;
                try {
                    queue.push({{removal_increment(state, id), id}, removals});
                } catch (const DegenerateUpdateError&) {
                }
            }
        };
        prime_queue();
        while (static_cast<int>(state.size()) > budget) {
            if (queue.empty()) {
                rebuild_with_gamma(gamma > 0.0 ? gamma : kDefaultGamma);
                prime_queue();
                if (queue.empty()) throw DegenerateUpdateError("backward_greedy: no removable item");
                continue;
            }
            QEntry top = queue.top();
            queue.pop();
            if (top.stamp != removals) {
                try {
                    top.key.increment = removal_increment(state, top.key.id);
                } catch (const DegenerateUpdateError&) {
                    continue;  // permanently unremovable under the current gamma
                }
                top.stamp = removals;
                if (!queue.empty() && top < queue.top()) {
                    queue.push(top);
                    continue;
                }
            }
            state = commit_remove(state, top.key.id);
            ++removals;
            plan.step_f.push_back(state.current_f());
        }
    }

    plan.items = state.selected();
    std::sort(plan.items.begin(), plan.items.end());
    plan.final_f = state.current_f();
    plan.final_f_gamma0 = unregularized_f(pool, plan.items, mode);
    plan.evals = state.eval_counter() + carried_evals;
    plan.elapsed_ms = ms_since(start);
    return plan;
}

double shannon_entropy(std::span<const std::int64_t> counts) {
    std::int64_t total = 0;
    for (std::int64_t c : counts) total += c;
    if (total <= 0) return 0.0;
    double h = 0.0;
    for (std::int64_t c : counts) {
        if (c <= 0) continue;
        const double p = static_cast<double>(c) / static_cast<double>(total);
        h -= p * std::log2(p);
    }
    return h;
}

/// Rank items by a score, descending, ties to the smallest id; then walk the
/// chosen prefix through the objective to record the f trajectory.
InterviewPlan score_based_plan(const CandidatePool& pool, int budget, SelectionAlgorithm method,
                               const std::vector<std::pair<double, int>>& scored) {
    InterviewPlan plan;
    plan.algorithm = method;
    plan.requested_budget = budget;
    const int take = std::min<int>(budget, static_cast<int>(pool.items.size()));
    plan.truncated = take < budget;

    std::vector<std::pair<double, int>> ranked = scored;
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });

    std::unordered_map<int, const PoolItem*> by_id;
    for (const auto& it : pool.items) by_id[it.id] = &it;

    ObjectiveState state = init_state(kDefaultGamma, pool.dim);
    for (int i = 0; i < take; ++i) {
        const int id = ranked[static_cast<std::size_t>(i)].second;
        const PoolItem* item = by_id.at(id);
        state = commit_add(state, id, item->latent, item->sigma);
        plan.items.push_back(id);
        plan.step_f.push_back(state.current_f());
    }
    plan.final_f = state.current_f();
    plan.final_f_gamma0 = unregularized_f(pool, plan.items, VarianceMode::per_item);
    plan.evals = 0;  // score baselines never evaluate marginal gains
    return plan;
}

}  // namespace

InterviewPlan forward_greedy(const CandidatePool& pool, int budget, VarianceMode mode, double gamma,
                             std::uint64_t /*seed*/) {
    return forward_greedy_impl(pool, budget, mode, gamma, false);
}

InterviewPlan forward_greedy_lazy(const CandidatePool& pool, int budget, VarianceMode mode, double gamma,
                                  std::uint64_t /*seed*/) {
    return forward_greedy_impl(pool, budget, mode, gamma, true);
}

InterviewPlan backward_greedy(const CandidatePool& pool, int budget, VarianceMode mode, double gamma) {
    return backward_greedy_impl(pool, budget, mode, gamma, false);
}

InterviewPlan backward_greedy_lazy(const CandidatePool& pool, int budget, VarianceMode mode, double gamma) {
    return backward_greedy_impl(pool, budget, mode, gamma, true);
}

InterviewPlan baseline_select(const CandidatePool& pool, int budget, SelectionAlgorithm method,
                              const FactorModel* model, std::uint64_t seed) {
    pool.validate();
    if (budget < 1) throw InvalidArgumentError("baseline_select: budget must be >= 1");
    if (pool.items.empty()) throw InvalidArgumentError("baseline_select: empty pool");
    const auto start = Clock::now();

    std::vector<std::pair<double, int>> scored;
    scored.reserve(pool.items.size());

    switch (method) {
        case SelectionAlgorithm::PI:
            for (const auto& it : pool.items) {
                if (it.rating_count < 0) throw MissingMetadataError("PI: rating counts missing from pool");
                scored.emplace_back(static_cast<double>(it.rating_count), it.id);
            }
            break;
        case SelectionAlgorithm::RS: {
            std::vector<int> ids;
            for (const auto& it : pool.items) ids.push_back(it.id);
            std::sort(ids.begin(), ids.end());
            Rng rng(seed);
            const auto picked = rng.sample_without_replacement(
                ids, static_cast<std::size_t>(std::min<int>(budget, static_cast<int>(ids.size()))));
            // scores reproduce the draw order
            std::unordered_map<int, double> score;
            for (std::size_t i = 0; i < picked.size(); ++i)
                score[picked[i]] = static_cast<double>(picked.size() - i);
            for (int id : ids) scored.emplace_back(score.count(id) ? score[id] : 0.0, id);
            break;
        }
        case SelectionAlgorithm::HV:
            for (const auto& it : pool.items) {
                double var = it.prediction_variance;
                if (!std::isfinite(var)) {
                    if (model == nullptr) throw MissingMetadataError("HV: prediction variance missing from pool");
                    const int m = model->num_users();
                    double sum = 0.0, sq = 0.0;
                    for (int u = 0; u < m; ++u) {
                        const double p = predict(*model, u, it.id);
                        sum += p;
                        sq += p * p;
                    }
                    const double mean = m > 0 ? sum / m : 0.0;
                    var = m > 0 ? std::max(0.0, sq / m - mean * mean) : 0.0;
                }
                scored.emplace_back(var, it.id);
            }
            break;
        case SelectionAlgorithm::Ent:
            for (const auto& it : pool.items) {
                if (it.histogram.empty()) throw MissingMetadataError("Ent: rating histograms missing from pool");
                scored.emplace_back(shannon_entropy(it.histogram), it.id);
            }
            break;
        case SelectionAlgorithm::Ent0:
            for (const auto& it : pool.items) {
                if (it.histogram.empty() || it.rating_count < 0 || pool.num_warm_users < 0)
                    throw MissingMetadataError("Ent0: histograms or warm-user count missing from pool");
                std::vector<std::int64_t> with_unrated;
                with_unrated.push_back(std::max<std::int64_t>(pool.num_warm_users - it.rating_count, 0));
                with_unrated.insert(with_unrated.end(), it.histogram.begin(), it.histogram.end());
                scored.emplace_back(shannon_entropy(with_unrated), it.id);
            }
            break;
        default:
            throw InvalidArgumentError("baseline_select: not a baseline method");
    }

    InterviewPlan plan = score_based_plan(pool, budget, method, scored);
    plan.elapsed_ms = ms_since(start);
    return plan;
}

InterviewPlan run_selection(const CandidatePool& pool, int budget, SelectionAlgorithm algo, double gamma,
                            std::uint64_t seed, const FactorModel* model) {
    switch (algo) {
        case SelectionAlgorithm::FG1: return forward_greedy(pool, budget, VarianceMode::identical, gamma, seed);
        case SelectionAlgorithm::FG2: return forward_greedy(pool, budget, VarianceMode::per_item, gamma, seed);
        case SelectionAlgorithm::AFG1: return forward_greedy_lazy(pool, budget, VarianceMode::identical, gamma, seed);
        case SelectionAlgorithm::AFG2: return forward_greedy_lazy(pool, budget, VarianceMode::per_item, gamma, seed);
        case SelectionAlgorithm::BG1: {
            const int b = std::min<int>(budget, static_cast<int>(pool.items.size()));
            return backward_greedy(pool, b, VarianceMode::identical, gamma);
        }
        case SelectionAlgorithm::BG2: {
            const int b = std::min<int>(budget, static_cast<int>(pool.items.size()));
            return backward_greedy(pool, b, VarianceMode::per_item, gamma);
        }
        case SelectionAlgorithm::ABG1: {
            const int b = std::min<int>(budget, static_cast<int>(pool.items.size()));
            return backward_greedy_lazy(pool, b, VarianceMode::identical, gamma);
        }
        case SelectionAlgorithm::ABG2: {
            const int b = std::min<int>(budget, static_cast<int>(pool.items.size()));
            return backward_greedy_lazy(pool, b, VarianceMode::per_item, gamma);
        }
        default: return baseline_select(pool, budget, algo, model, seed);
    }
}

void write_plan_csv(const InterviewPlan& plan, std::ostream& out, bool include_timing) {
    out << "step,item_id,f_value,evals_so_far,elapsed_ms\n";
    const double ms = include_timing ? plan.elapsed_ms : 0.0;
    for (std::size_t i = 0; i < plan.items.size(); ++i) {
        const double f = i < plan.step_f.size() ? plan.step_f[i] : plan.final_f;
        out << i + 1 << ',' << plan.items[i] << ',' << f << ',' << plan.evals << ',' << ms << '\n';
    }
}

}  // namespace oid
