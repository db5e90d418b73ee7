#pragma once

#include <array>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "oid/linalg.hpp"

namespace oid {

/// Exact Cover by 3-Sets instance: universe {1..3q} and a collection of
/// 3-element subsets.
struct X3CInstance {
    int q = 0;                               // universe size is 3q
    std::vector<std::array<int, 3>> sets;    // each sorted ascending

    int universe_size() const { return 3 * q; }
    void validate() const;
};

/// The reduction's item matrix: one binary column of length k = 3q per set
/// (three 1s at the set's elements) plus k dummy columns eta * e_j. theta is
/// the objective value of an exact-cover selection; alpha the best value any
/// non-cover can achieve.
struct GadgetMatrix {
    int q = 0;
    int k = 0;              // = 3q
    double eta = 0.0;
    DenseMatrix set_vectors;    // k x n
    DenseMatrix dummy_vectors;  // k x k
    int budget = 0;             // q + k
    double theta = 0.0;
    double alpha = 0.0;

    double eta_squared() const { return eta * eta; }
    int num_sets() const { return static_cast<int>(set_vectors.cols()); }

    /// Columns of the chosen set vectors plus all k dummies, as one matrix.
    DenseMatrix selection_columns(std::span<const int> chosen_sets) const;
};

/// Smallest eta^2 the hardness argument needs for universe size k:
/// (1/2) [ sqrt(5k^2 + 4) - k + 4 ].
double tight_eta_squared_bound(int k);

double gadget_theta(int q, double eta_squared);
double gadget_alpha(int q, double eta_squared);

/// Build the gadget; when eta_squared is omitted, uses the ceiling of the
/// tight bound for this k.
GadgetMatrix build_gadget(const X3CInstance& inst, std::optional<double> eta_squared = std::nullopt);

/// Evaluate f over the chosen q set vectors plus all dummies (sigma = 1,
/// gamma = 0) and decide by set arithmetic whether the choice is an exact
/// cover. Throws Error if f = theta and cover status disagree.
std::pair<double, bool> verify_cover_value(const GadgetMatrix& g, std::span<const int> chosen_sets);

/// Whether the chosen set indices form an exact 3-cover of the universe.
bool is_exact_cover(const X3CInstance& inst, std::span<const int> chosen_sets);
bool is_exact_cover(const GadgetMatrix& g, std::span<const int> chosen_sets);

/// tr(B B^T) for a selection of q set vectors plus all dummies.
double gadget_trace(const GadgetMatrix& g, std::span<const int> chosen_sets);

/// The printed 5x5 / 5x6 matrices and extension vector whose f-values
/// witness that f is not supermodular, with their expected values.
struct CounterexampleFixture {
    DenseMatrix m1;              // 5x5, columns a subset of m2's
    DenseMatrix m2;              // 5x6
    std::vector<double> x;       // 5-vector
    double f_m1 = 12.0;
    double f_m1_x = 10.333;
    double f_m2 = 6.6250;
    double f_m2_x = 4.4783;
};

CounterexampleFixture counterexample_fixture();

/// One line per checked quantity: computed vs expected.
struct CheckLine {
    std::string label;
    double expected;
    double computed;
    double tolerance;
    bool ok;
};

/// Recompute the fixture's four f-values and the supermodularity inequality.
/// All checks pass on the unmodified fixture; a perturbed fixture fails.
std::vector<CheckLine> verify_counterexample(const CounterexampleFixture& fixture);

std::string x3c_to_json(const X3CInstance& inst, std::optional<double> eta_squared = std::nullopt);
std::pair<X3CInstance, std::optional<double>> x3c_from_json(const std::string& text);

/// Visit every size-q index subset of {0..n-1} in lexicographic order.
/// Used by the exhaustive oracles; keep n choose q small.
void for_each_combination(int n, int q, const std::function<void(std::span<const int>)>& fn);

}  // namespace oid
