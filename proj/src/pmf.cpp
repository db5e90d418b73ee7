#include "oid/pmf.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <unordered_set>

#include <json.hpp>

#include "oid/rng.hpp"

namespace oid {

void RatingsDataset::validate() const {
    std::unordered_set<std::int64_t> seen;
    seen.reserve(ratings.size());
    for (const auto& r : ratings) {
        if (r.user < 0 || r.user >= num_users) throw InvalidArgumentError("dataset: user id out of range");
        if (r.item < 0 || r.item >= num_items) throw InvalidArgumentError("dataset: item id out of range");
        if (r.value < scale.min || r.value > scale.max)
            throw InvalidArgumentError("dataset: rating outside declared scale");
        const std::int64_t key = static_cast<std::int64_t>(r.user) * num_items + r.item;
        if (!seen.insert(key).second) throw InvalidArgumentError("dataset: duplicate (user,item) rating");
    }
}

namespace {

DenseMatrix gaussian_matrix(std::size_t rows, std::size_t cols, double stddev, Rng& rng) {
    DenseMatrix m(rows, cols);
    for (double& v : m.data()) v = rng.normal(0.0, stddev);
    return m;
}

double training_loss(const DenseMatrix& u, const DenseMatrix& v, const std::vector<Rating>& ratings,
                     double lambda) {
    const std::size_t d = u.rows();
    double loss = 0.0;
    for (const auto& r : ratings) {
        double pred = 0.0;
        for (std::size_t f = 0; f < d; ++f) pred += u(f, r.user) * v(f, r.item);
        const double e = r.value - pred;
        loss += e * e;
    }
    double sq = 0.0;
    for (double x : u.data()) sq += x * x;
    for (double x : v.data()) sq += x * x;
    return loss + lambda * sq;
}

}  // namespace

FactorModel train(const RatingsDataset& dataset, const Hyperparameters& hyper) {
    if (dataset.ratings.empty()) throw InvalidArgumentError("train: dataset has no ratings");
    if (hyper.latent_dim < 1) throw InvalidArgumentError("train: latent_dim must be >= 1");
    if (hyper.lambda_reg < 0.0) throw InvalidArgumentError("train: lambda_reg must be >= 0");
    if (hyper.epochs < 0) throw InvalidArgumentError("train: epochs must be >= 0");

    const std::size_t d = static_cast<std::size_t>(hyper.latent_dim);
    Rng rng(hyper.seed);
    DenseMatrix u = gaussian_matrix(d, dataset.num_users, hyper.init_std, rng);
    DenseMatrix v = gaussian_matrix(d, dataset.num_items, hyper.init_std, rng);

    DenseMatrix u_vel(d, dataset.num_users);
    DenseMatrix v_vel(d, dataset.num_items);
    const bool use_momentum = hyper.momentum != 0.0;

    std::vector<std::size_t> order(dataset.ratings.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    std::vector<double> grad_u(d), grad_v(d);
    for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
        const double eta = hyper.eta0 * (1.0 - static_cast<double>(epoch) / hyper.epochs);
        rng.shuffle(order);
        for (std::size_t idx : order) {
            const Rating& r = dataset.ratings[idx];
            double pred = 0.0;
            for (std::size_t f = 0; f < d; ++f) pred += u(f, r.user) * v(f, r.item);
            const double e = r.value - pred;
            for (std::size_t f = 0; f < d; ++f) {
                grad_u[f] = e * v(f, r.item) - hyper.lambda_reg * u(f, r.user);
                grad_v[f] = e * u(f, r.user) - hyper.lambda_reg * v(f, r.item);
            }
            if (use_momentum) {
                for (std::size_t f = 0; f < d; ++f) {
                    u_vel(f, r.user) = hyper.momentum * u_vel(f, r.user) + grad_u[f];
                    v_vel(f, r.item) = hyper.momentum * v_vel(f, r.item) + grad_v[f];
                    u(f, r.user) += eta * u_vel(f, r.user);
                    v(f, r.item) += eta * v_vel(f, r.item);
                }
            } else {
                for (std::size_t f = 0; f < d; ++f) {
                    u(f, r.user) += eta * grad_u[f];
                    v(f, r.item) += eta * grad_v[f];
                }
            }
        }
        const double loss = training_loss(u, v, dataset.ratings, hyper.lambda_reg);
        if (!std::isfinite(loss)) throw DivergenceError("train: loss became non-finite");
    }

    FactorModel model;
    model.latent_dim = hyper.latent_dim;
    model.user_factors = std::move(u);
    model.item_factors = std::move(v);
    model.hyper = hyper;
    return model;
}

double predict(const FactorModel& model, int user_id, int item_id) {
    if (user_id < 0 || user_id >= model.num_users()) throw InvalidArgumentError("predict: user id out of range");
    if (item_id < 0 || item_id >= model.num_items()) throw InvalidArgumentError("predict: item id out of range");
    double p = 0.0;
    for (int f = 0; f < model.latent_dim; ++f)
        p += model.user_factors(static_cast<std::size_t>(f), static_cast<std::size_t>(user_id)) *
             model.item_factors(static_cast<std::size_t>(f), static_cast<std::size_t>(item_id));
    return p;
}

double rmse(const FactorModel& model, std::span<const Rating> ratings, bool clamp, const RatingScale& scale) {
    if (ratings.empty()) return 0.0;
    double se = 0.0;
    for (const auto& r : ratings) {
        double p = predict(model, r.user, r.item);
        if (clamp) p = scale.clamp(p);
        const double e = r.value - p;
        se += e * e;
    }
    return std::sqrt(se / static_cast<double>(ratings.size()));
}

NoiseModel estimate_noise(const FactorModel& model, const RatingsDataset& dataset, double floor) {
    if (!(floor > 0.0)) throw InvalidArgumentError("estimate_noise: floor must be positive");
    const int n = model.num_items();
    std::vector<double> sq_sum(n, 0.0);
    std::vector<std::int64_t> count(n, 0);
    for (const auto& r : dataset.ratings) {
        const double e = r.value - predict(model, r.user, r.item);
        sq_sum[r.item] += e * e;
        ++count[r.item];
    }

    NoiseModel noise;
    noise.floor = floor;
    noise.sigma.assign(n, 0.0);
    double rated_sum = 0.0;
    std::int64_t rated_items = 0;
    for (int j = 0; j < n; ++j) {
        if (count[j] > 0) {
            noise.sigma[j] = std::max(std::sqrt(sq_sum[j] / static_cast<double>(count[j])), floor);
            rated_sum += noise.sigma[j];
            ++rated_items;
        }
    }
    const double mean_sigma = rated_items > 0 ? rated_sum / static_cast<double>(rated_items) : floor;
    for (int j = 0; j < n; ++j)
        if (count[j] == 0) noise.sigma[j] = std::max(mean_sigma, floor);
    return noise;
}

ColdUserProfile fold_in_user(const FactorModel& model, std::span<const std::pair<int, double>> ratings,
                             double lambda_reg, std::uint64_t seed) {
    if (ratings.empty()) throw InvalidArgumentError("fold_in_user: no ratings given");
    const std::size_t d = static_cast<std::size_t>(model.latent_dim);

    std::vector<std::vector<double>> vs;
    std::vector<double> rs;
    vs.reserve(ratings.size());
    for (const auto& [item, r] : ratings) {
        vs.push_back(model.item_vector(item));
        rs.push_back(r);
    }

    Rng rng(seed);
    std::vector<double> u(d);
    for (double& x : u) x = rng.normal(0.0, 0.1);

    // objective g(u) = sum_j (r_j - u.v_j)^2 + lambda ||u||^2 (convex quadratic);
    // steepest descent with exact line search, H g = 2(sum v_j (v_j.g)) + 2 lambda g
    const int max_iters = 20000;
    std::vector<double> grad(d), hg(d);
    for (int iter = 0; iter < max_iters; ++iter) {
        std::fill(grad.begin(), grad.end(), 0.0);
        for (std::size_t j = 0; j < vs.size(); ++j) {
            const double e = dot(u, vs[j]) - rs[j];
            for (std::size_t f = 0; f < d; ++f) grad[f] += 2.0 * e * vs[j][f];
        }
        for (std::size_t f = 0; f < d; ++f) grad[f] += 2.0 * lambda_reg * u[f];

        const double gnorm2 = dot(grad, grad);
        if (std::sqrt(gnorm2) < 1e-6) break;

        std::fill(hg.begin(), hg.end(), 0.0);
        for (const auto& v : vs) {
            const double p = dot(grad, v);
            for (std::size_t f = 0; f < d; ++f) hg[f] += 2.0 * p * v[f];
        }
        for (std::size_t f = 0; f < d; ++f) hg[f] += 2.0 * lambda_reg * grad[f];

        const double curvature = dot(grad, hg);
        if (!(curvature > 0.0)) break;  // flat directions: already optimal along grad
        const double step = gnorm2 / curvature;
        for (std::size_t f = 0; f < d; ++f) u[f] -= step * grad[f];
        if (!std::all_of(u.begin(), u.end(), [](double x) { return std::isfinite(x); }))
            throw DivergenceError("fold_in_user: iterate became non-finite");
    }

    return ColdUserProfile{std::move(u), ProfileSource::folded_in};
}

namespace {

nlohmann::json hyper_to_json(const Hyperparameters& h) {
    return nlohmann::json{{"latent_dim", h.latent_dim}, {"lambda_reg", h.lambda_reg},
                          {"momentum", h.momentum},     {"eta0", h.eta0},
                          {"epochs", h.epochs},         {"init_std", h.init_std},
                          {"seed", h.seed}};
}

Hyperparameters hyper_from_json(const nlohmann::json& j) {
    Hyperparameters h;
    h.latent_dim = j.at("latent_dim").get<int>();
    h.lambda_reg = j.at("lambda_reg").get<double>();
    h.momentum = j.at("momentum").get<double>();
    h.eta0 = j.at("eta0").get<double>();
    h.epochs = j.at("epochs").get<int>();
    h.init_std = j.at("init_std").get<double>();
    h.seed = j.at("seed").get<std::uint64_t>();
    return h;
}

}  // namespace

std::string checkpoint_to_string(const FactorModel& model) {
    nlohmann::json j;
    j["format"] = "oid-pmf-checkpoint-v1";
    j["latent_dim"] = model.latent_dim;
    j["num_users"] = model.num_users();
    j["num_items"] = model.num_items();
    j["hyper"] = hyper_to_json(model.hyper);
    j["user_factors"] = std::vector<double>(model.user_factors.data().begin(), model.user_factors.data().end());
    j["item_factors"] = std::vector<double>(model.item_factors.data().begin(), model.item_factors.data().end());
    return j.dump();
}

FactorModel checkpoint_from_string(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("checkpoint: ") + e.what());
    }
    if (j.value("format", "") != "oid-pmf-checkpoint-v1") throw ParseError("checkpoint: unknown format tag");
    FactorModel m;
    m.latent_dim = j.at("latent_dim").get<int>();
    const int users = j.at("num_users").get<int>();
    const int items = j.at("num_items").get<int>();
    m.hyper = hyper_from_json(j.at("hyper"));
    const auto uf = j.at("user_factors").get<std::vector<double>>();
    const auto vf = j.at("item_factors").get<std::vector<double>>();
    const std::size_t d = static_cast<std::size_t>(m.latent_dim);
    if (uf.size() != d * static_cast<std::size_t>(users) || vf.size() != d * static_cast<std::size_t>(items))
        throw ParseError("checkpoint: factor array size mismatch");
    m.user_factors = DenseMatrix(d, static_cast<std::size_t>(users));
    std::copy(uf.begin(), uf.end(), m.user_factors.data().begin());
    m.item_factors = DenseMatrix(d, static_cast<std::size_t>(items));
    std::copy(vf.begin(), vf.end(), m.item_factors.data().begin());
    return m;
}

void save_checkpoint(const FactorModel& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("save_checkpoint: cannot open " + path);
    out << checkpoint_to_string(model);
    if (!out) throw Error("save_checkpoint: write failed for " + path);
}

FactorModel load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("load_checkpoint: cannot open " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return checkpoint_from_string(text);
}

}  // namespace oid
