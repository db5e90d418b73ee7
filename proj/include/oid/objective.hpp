#pragma once

#include <atomic>
#include <cstdint>
#include <unordered_map>
#include <vector>

#include "oid/linalg.hpp"

namespace oid {

/// Incremental state for greedy search over the profile-error objective.
/// Maintains B, the inverse of M = gamma*I + V_B C_B^{-2} V_B^T, and the
/// current value f = tr(M^{-1}).
///
/// A state is exclusively owned by one search; marginal_gain() is const and
/// safe to call concurrently over distinct candidates (the evaluation
/// counter is atomic).
class ObjectiveState {
public:
    ObjectiveState() = default;
    ObjectiveState(const ObjectiveState& other);
    ObjectiveState& operator=(const ObjectiveState& other);
    ObjectiveState(ObjectiveState&&) noexcept = default;
    ObjectiveState& operator=(ObjectiveState&&) noexcept = default;

    const std::vector<int>& selected() const { return selected_; }
    const GramInverse& gram_inverse() const { return gram_; }
    double current_f() const { return current_f_; }
    double gamma() const { return gamma_; }
    std::uint64_t eval_counter() const { return evals_.load(std::memory_order_relaxed); }
    bool contains(int item_id) const { return items_.count(item_id) != 0; }
    std::size_t size() const { return selected_.size(); }
    std::size_t dim() const { return gram_.dim; }

    friend ObjectiveState init_state(double gamma, std::size_t d);
    friend ObjectiveState state_from_columns(double gamma, const DenseMatrix& v_b,
                                             std::span<const int> ids, std::span<const double> sigmas);
    friend double marginal_gain(const ObjectiveState& state, std::span<const double> v, double sigma);
    friend double removal_increment(const ObjectiveState& state, int item_id);
    friend ObjectiveState commit_add(const ObjectiveState& state, int item_id,
                                     std::span<const double> v, double sigma);
    friend ObjectiveState commit_remove(const ObjectiveState& state, int item_id);

private:
    struct Entry {
        std::vector<double> latent;
        double weight = 0.0;  // sigma^{-2}
    };

    void refresh_from_scratch();

    std::vector<int> selected_;
    std::unordered_map<int, Entry> items_;
    GramInverse gram_;
    double current_f_ = 0.0;
    double gamma_ = 0.0;
    int commits_since_refresh_ = 0;
    mutable std::atomic<std::uint64_t> evals_{0};
};

/// Empty selection; requires gamma > 0 so M = gamma*I is invertible.
/// f starts at d / gamma.
ObjectiveState init_state(double gamma, std::size_t d);

/// Bulk construction from a full column set (used by backward greedy);
/// gamma = 0 is allowed when the columns span the space.
ObjectiveState state_from_columns(double gamma, const DenseMatrix& v_b,
                                  std::span<const int> ids, std::span<const double> sigmas);

/// f(B) - f(B + v): the decrease in expected profile error from adding v
/// with noise sigma. Non-negative up to roundoff. Does not mutate the
/// selection; bumps the evaluation counter.
double marginal_gain(const ObjectiveState& state, std::span<const double> v, double sigma);

/// f(B - item) - f(B): the increase in error from dropping a selected item.
/// Throws DegenerateUpdateError when removal would make M singular.
double removal_increment(const ObjectiveState& state, int item_id);

ObjectiveState commit_add(const ObjectiveState& state, int item_id,
                          std::span<const double> v, double sigma);

ObjectiveState commit_remove(const ObjectiveState& state, int item_id);

}  // namespace oid
