#include "oid/objective.hpp"

#include <algorithm>
#include <cmath>

namespace oid {

namespace {
constexpr int kRefreshInterval = 64;  // recompute the inverse from scratch this often
constexpr double kDowndateTol = 1e-12;
}  // namespace

ObjectiveState::ObjectiveState(const ObjectiveState& other)
    : selected_(other.selected_),
      items_(other.items_),
      gram_(other.gram_),
      current_f_(other.current_f_),
      gamma_(other.gamma_),
      commits_since_refresh_(other.commits_since_refresh_),
      evals_(other.evals_.load(std::memory_order_relaxed)) {}

ObjectiveState& ObjectiveState::operator=(const ObjectiveState& other) {
    if (this == &other) return *this;
    selected_ = other.selected_;
    items_ = other.items_;
    gram_ = other.gram_;
    current_f_ = other.current_f_;
    gamma_ = other.gamma_;
    commits_since_refresh_ = other.commits_since_refresh_;
    evals_.store(other.evals_.load(std::memory_order_relaxed), std::memory_order_relaxed);
    return *this;
}

void ObjectiveState::refresh_from_scratch() {
    const std::size_t d = gram_.dim;
    DenseMatrix m(d, d);
    for (std::size_t i = 0; i < d; ++i) m(i, i) = gamma_;
    for (int id : selected_) {
        const Entry& e = items_.at(id);
        for (std::size_t i = 0; i < d; ++i) {
            const double wi = e.weight * e.latent[i];
            for (std::size_t j = 0; j < d; ++j) m(i, j) += wi * e.latent[j];
        }
    }
    gram_.inverse = spd_inverse(m);
    current_f_ = gram_.trace();
    commits_since_refresh_ = 0;
}

ObjectiveState init_state(double gamma, std::size_t d) {
    if (!(gamma > 0.0)) throw InvalidArgumentError("init_state: gamma must be positive");
    ObjectiveState s;
    s.gamma_ = gamma;
    s.gram_.dim = d;
    s.gram_.regularizer_gamma = gamma;
    s.gram_.inverse = DenseMatrix(d, d);
    for (std::size_t i = 0; i < d; ++i) s.gram_.inverse(i, i) = 1.0 / gamma;
    s.current_f_ = static_cast<double>(d) / gamma;
    return s;
}

ObjectiveState state_from_columns(double gamma, const DenseMatrix& v_b,
                                  std::span<const int> ids, std::span<const double> sigmas) {
    if (ids.size() != v_b.cols() || sigmas.size() != v_b.cols())
        throw InvalidArgumentError("state_from_columns: column/id/sigma count mismatch");
    ObjectiveState s;
    s.gamma_ = gamma;
    s.gram_.dim = v_b.rows();
    s.gram_.regularizer_gamma = gamma;
    std::vector<double> weights(sigmas.size());
    for (std::size_t j = 0; j < sigmas.size(); ++j) {
        if (!(sigmas[j] > 0.0)) throw InvalidArgumentError("state_from_columns: sigma must be positive");
        weights[j] = 1.0 / (sigmas[j] * sigmas[j]);
        s.selected_.push_back(ids[j]);
        s.items_[ids[j]] = {v_b.column(j), weights[j]};
    }
    if (s.items_.size() != ids.size()) throw InvalidArgumentError("state_from_columns: duplicate item ids");
    s.gram_.inverse = spd_inverse(weighted_gram(v_b, weights, gamma));
    s.current_f_ = s.gram_.trace();
    return s;
}

double marginal_gain(const ObjectiveState& state, std::span<const double> v, double sigma) {
    if (!(sigma > 0.0)) throw InvalidArgumentError("marginal_gain: sigma must be positive");
    state.evals_.fetch_add(1, std::memory_order_relaxed);
    const double w = 1.0 / (sigma * sigma);
    const std::vector<double> iv = mat_vec(state.gram_.inverse, v);
    const double quad = dot(v, iv);
    const double denom = 1.0 + w * quad;
    if (std::abs(denom) < kDowndateTol) throw DegenerateUpdateError("marginal_gain: degenerate update");
    // tr(inv') = tr(inv) - w * v^T inv^2 v / (1 + w v^T inv v)
    return w * dot(iv, iv) / denom;
}

double removal_increment(const ObjectiveState& state, int item_id) {
    const auto it = state.items_.find(item_id);
    if (it == state.items_.end()) throw InvalidArgumentError("removal_increment: item not selected");
    state.evals_.fetch_add(1, std::memory_order_relaxed);
    const double w = it->second.weight;
    const std::vector<double> iv = mat_vec(state.gram_.inverse, it->second.latent);
    const double quad = dot(it->second.latent, iv);
    const double denom = 1.0 - w * quad;
    if (denom < kDowndateTol)
        throw DegenerateUpdateError("removal_increment: removal would make the Gram matrix singular");
    return w * dot(iv, iv) / denom;
}

ObjectiveState commit_add(const ObjectiveState& state, int item_id,
                          std::span<const double> v, double sigma) {
    if (state.contains(item_id)) throw InvalidArgumentError("commit_add: item already selected");
    if (!(sigma > 0.0)) throw InvalidArgumentError("commit_add: sigma must be positive");
    const double w = 1.0 / (sigma * sigma);
    ObjectiveState next = state;
    next.gram_ = rank_one_update(state.gram_, v, w);
    next.selected_.push_back(item_id);
    next.items_[item_id] = ObjectiveState::Entry{std::vector<double>(v.begin(), v.end()), w};
    next.current_f_ = next.gram_.trace();
    if (++next.commits_since_refresh_ >= kRefreshInterval) next.refresh_from_scratch();
    return next;
}

ObjectiveState commit_remove(const ObjectiveState& state, int item_id) {
    const auto it = state.items_.find(item_id);
    if (it == state.items_.end()) throw InvalidArgumentError("commit_remove: item not selected");
    ObjectiveState next = state;
    next.gram_ = rank_one_update(state.gram_, it->second.latent, -it->second.weight);
    next.items_.erase(item_id);
    next.selected_.erase(std::find(next.selected_.begin(), next.selected_.end(), item_id));
    next.current_f_ = next.gram_.trace();
    if (++next.commits_since_refresh_ >= kRefreshInterval) next.refresh_from_scratch();
    return next;
}

}  // namespace oid
