#include "oid/gadgets.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <json.hpp>

namespace oid {

void X3CInstance::validate() const {
    if (q < 1) throw InvalidArgumentError("x3c: q must be at least 1");
    for (const auto& s : sets) {
        std::set<int> uniq(s.begin(), s.end());
        if (uniq.size() != 3) throw InvalidArgumentError("x3c: set must have exactly 3 distinct elements");
        for (int e : s)
            if (e < 1 || e > universe_size()) throw InvalidArgumentError("x3c: element out of range");
    }
}

double tight_eta_squared_bound(int k) {
    return 0.5 * (std::sqrt(5.0 * k * k + 4.0) - k + 4.0);
}

double gadget_theta(int q, double eta_squared) {
    const int k = 3 * q;
    return q / (3.0 + eta_squared) + (k - q) / eta_squared;
}

double gadget_alpha(int q, double eta_squared) {
    return gadget_theta(q, eta_squared) +
           2.0 / ((2.0 + eta_squared) * (4.0 + eta_squared) * (3.0 + eta_squared));
}

GadgetMatrix build_gadget(const X3CInstance& inst, std::optional<double> eta_squared) {
    inst.validate();
    const int q = inst.q;
    const int k = inst.universe_size();
    const double eta2 = eta_squared ? *eta_squared : std::ceil(tight_eta_squared_bound(k));
    if (!(eta2 > 0.0)) throw InvalidArgumentError("build_gadget: eta^2 must be positive");

    GadgetMatrix g;
    g.q = q;
    g.k = k;
    g.eta = std::sqrt(eta2);
    g.budget = q + k;
    g.theta = gadget_theta(q, eta2);
    g.alpha = gadget_alpha(q, eta2);

    g.set_vectors = DenseMatrix(k, inst.sets.size());
    for (std::size_t j = 0; j < inst.sets.size(); ++j)
        for (int e : inst.sets[j]) g.set_vectors(e - 1, j) = 1.0;

    g.dummy_vectors = DenseMatrix(k, k);
    for (int j = 0; j < k; ++j) g.dummy_vectors(j, j) = g.eta;
    return g;
}

DenseMatrix GadgetMatrix::selection_columns(std::span<const int> chosen_sets) const {
    DenseMatrix b(k, chosen_sets.size() + static_cast<std::size_t>(k));
    for (std::size_t c = 0; c < chosen_sets.size(); ++c) {
        const int j = chosen_sets[c];
        if (j < 0 || j >= num_sets()) throw InvalidArgumentError("gadget: set index out of range");
        for (int i = 0; i < k; ++i) b(i, c) = set_vectors(i, j);
    }
    for (int j = 0; j < k; ++j) b(j, chosen_sets.size() + j) = eta;
    return b;
}

bool is_exact_cover(const X3CInstance& inst, std::span<const int> chosen_sets) {
    std::set<int> covered;
    for (int j : chosen_sets)
        for (int e : inst.sets.at(static_cast<std::size_t>(j))) covered.insert(e);
    return chosen_sets.size() == static_cast<std::size_t>(inst.q) &&
           covered.size() == static_cast<std::size_t>(inst.universe_size());
}

bool is_exact_cover(const GadgetMatrix& g, std::span<const int> chosen_sets) {
    if (chosen_sets.size() != static_cast<std::size_t>(g.q)) return false;
    std::vector<int> hits(g.k, 0);
    for (int j : chosen_sets) {
        if (j < 0 || j >= g.num_sets()) throw InvalidArgumentError("gadget: set index out of range");
        for (int i = 0; i < g.k; ++i)
            if (g.set_vectors(i, j) != 0.0) ++hits[i];
    }
    return std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; });
}

std::pair<double, bool> verify_cover_value(const GadgetMatrix& g, std::span<const int> chosen_sets) {
    if (chosen_sets.size() != static_cast<std::size_t>(g.q))
        throw InvalidArgumentError("verify_cover_value: selection must pick exactly q set vectors");
    const DenseMatrix b = g.selection_columns(chosen_sets);
    const std::vector<double> sigmas(b.cols(), 1.0);
    const double f = objective_f(b, sigmas, 0.0);
    const bool cover = is_exact_cover(g, chosen_sets);
    const bool at_theta = std::abs(f - g.theta) <= 1e-8;
    if (cover != at_theta)
        throw Error("verify_cover_value: f = theta does not coincide with exact-cover status");
    return {f, cover};
}

double gadget_trace(const GadgetMatrix& g, std::span<const int> chosen_sets) {
    if (chosen_sets.size() != static_cast<std::size_t>(g.q))
        throw InvalidArgumentError("gadget_trace: selection must be q set vectors plus all dummies");
    const DenseMatrix b = g.selection_columns(chosen_sets);
    return (b * b.transposed()).trace();
}

CounterexampleFixture counterexample_fixture() {
    CounterexampleFixture fx;
    fx.m1 = DenseMatrix::from_rows({{1, 1, 0, 0, 0},
                                    {0, 0, 1, 0, 0},
                                    {1, 0, 0, 1, 0},
                                    {0, 0, 1, 1, 1},
                                    {0, 0, 1, 0, 1}});
    fx.m2 = DenseMatrix::from_rows({{0, 0, 1, 0, 1, 1},
                                    {1, 0, 0, 0, 0, 1},
                                    {0, 1, 0, 0, 1, 1},
                                    {1, 1, 0, 1, 0, 0},
                                    {1, 0, 0, 1, 0, 1}});
    fx.x = {0, 1, 0, 0, 0};
    return fx;
}

namespace {

double f_of_columns(const DenseMatrix& m) {
    const std::vector<double> sigmas(m.cols(), 1.0);
    return objective_f(m, sigmas, 0.0);
}

DenseMatrix with_extra_column(const DenseMatrix& m, std::span<const double> x) {
    DenseMatrix wider = m;
    wider.push_column(x);
    return wider;
}

}  // namespace

std::vector<CheckLine> verify_counterexample(const CounterexampleFixture& fx) {
    std::vector<CheckLine> lines;
    auto check = [&lines](std::string label, double expected, double computed, double tol) {
        lines.push_back({std::move(label), expected, computed, tol, std::abs(computed - expected) <= tol});
    };

    const double f1 = f_of_columns(fx.m1);
    const double f1x = f_of_columns(with_extra_column(fx.m1, fx.x));
    const double f2 = f_of_columns(fx.m2);
    const double f2x = f_of_columns(with_extra_column(fx.m2, fx.x));

    check("f(M1)", fx.f_m1, f1, 1e-3);
    check("f(M1+x)", fx.f_m1_x, f1x, 1e-3);
    check("f(M2)", fx.f_m2, f2, 1e-3);
    check("f(M2+x)", fx.f_m2_x, f2x, 1e-3);
    check("gain at M1", -1.6667, f1x - f1, 1e-3);
    check("gain at M2", -2.1467, f2x - f2, 1e-3);

    // supermodularity would need gain(M1) <= gain(M2); the fixture violates it
    const bool violated = (f1x - f1) > (f2x - f2);
    lines.push_back({"supermodularity violated", 1.0, violated ? 1.0 : 0.0, 0.5, violated});
    return lines;
}

std::string x3c_to_json(const X3CInstance& inst, std::optional<double> eta_squared) {
    nlohmann::json j;
    j["universe_size"] = inst.universe_size();
    j["sets"] = nlohmann::json::array();
    for (const auto& s : inst.sets) j["sets"].push_back({s[0], s[1], s[2]});
    if (eta_squared) j["eta_squared"] = *eta_squared;
    return j.dump(2);
}

void for_each_combination(int n, int q, const std::function<void(std::span<const int>)>& fn) {
    if (q < 0 || q > n) return;
    std::vector<int> idx(static_cast<std::size_t>(q));
    for (int i = 0; i < q; ++i) idx[static_cast<std::size_t>(i)] = i;
    while (true) {
        fn(idx);
        int i = q - 1;
        while (i >= 0 && idx[static_cast<std::size_t>(i)] == n - q + i) --i;
        if (i < 0) break;
        ++idx[static_cast<std::size_t>(i)];
        for (int k = i + 1; k < q; ++k) idx[static_cast<std::size_t>(k)] = idx[static_cast<std::size_t>(k - 1)] + 1;
    }
}

std::pair<X3CInstance, std::optional<double>> x3c_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("x3c json: ") + e.what());
    }
    X3CInstance inst;
    const int universe = j.at("universe_size").get<int>();
    if (universe % 3 != 0) throw ParseError("x3c json: universe_size must be a multiple of 3");
    inst.q = universe / 3;
    for (const auto& s : j.at("sets")) {
        if (s.size() != 3) throw ParseError("x3c json: each set needs 3 elements");
        std::array<int, 3> arr{s[0].get<int>(), s[1].get<int>(), s[2].get<int>()};
        std::sort(arr.begin(), arr.end());
        inst.sets.push_back(arr);
    }
    inst.validate();
    std::optional<double> eta2;
    if (j.contains("eta_squared")) eta2 = j["eta_squared"].get<double>();
    return {inst, eta2};
}

}  // namespace oid
