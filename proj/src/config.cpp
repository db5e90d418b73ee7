#include "oid/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace oid {

namespace {

using nlohmann::json;

void reject_unknown_keys(const json& j, const std::set<std::string>& known, const std::string& where) {
    for (const auto& [key, value] : j.items())
        if (!known.count(key)) throw ParseError("config: unknown key '" + key + "' in " + where);
}

}  // namespace

ExperimentConfig config_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ParseError(std::string("config: ") + e.what());
    }

    ExperimentConfig c;
    reject_unknown_keys(j, {"dataset", "synth", "use_truth_model", "hyper", "setting", "algorithms",
                            "budgets", "seed", "threads", "warm_fraction", "warm_holdout_fraction",
                            "gamma", "selection_gamma", "sigma_floor", "max_cold_users",
                            "candidate_fraction", "timing", "out_dir"},
                        "top level");

    if (j.contains("dataset")) {
        const json& d = j["dataset"];
        reject_unknown_keys(d, {"name", "path", "format", "rating_min", "rating_max", "expected_ratings",
                                "expected_users", "expected_items"},
                            "dataset");
        c.dataset.name = d.value("name", std::string("dataset"));
        c.dataset.path = d.value("path", std::string());
        if (d.contains("format")) c.dataset.format = dataset_format_from_string(d["format"].get<std::string>());
        c.dataset.scale.min = d.value("rating_min", 1.0);
        c.dataset.scale.max = d.value("rating_max", 5.0);
        if (d.contains("expected_ratings")) c.dataset.expected_ratings = d["expected_ratings"].get<std::int64_t>();
        if (d.contains("expected_users")) c.dataset.expected_users = d["expected_users"].get<int>();
        if (d.contains("expected_items")) c.dataset.expected_items = d["expected_items"].get<int>();
        c.synthetic = c.dataset.path.empty();
    }
    if (j.contains("synth")) {
        const json& s = j["synth"];
        reject_unknown_keys(s, {"users", "items", "latent_dim", "noise_sigma", "density"}, "synth");
        c.synth.users = s.value("users", c.synth.users);
        c.synth.items = s.value("items", c.synth.items);
        c.synth.latent_dim = s.value("latent_dim", c.synth.latent_dim);
        c.synth.noise_sigma = s.value("noise_sigma", c.synth.noise_sigma);
        c.synth.density = s.value("density", c.synth.density);
    }
    c.use_truth_model = j.value("use_truth_model", c.use_truth_model);
    if (j.contains("hyper")) {
        const json& h = j["hyper"];
        reject_unknown_keys(h, {"latent_dim", "lambda_reg", "momentum", "eta0", "epochs", "init_std", "seed"},
                            "hyper");
        c.hyper.latent_dim = h.value("latent_dim", c.hyper.latent_dim);
        c.hyper.lambda_reg = h.value("lambda_reg", c.hyper.lambda_reg);
        c.hyper.momentum = h.value("momentum", c.hyper.momentum);
        c.hyper.eta0 = h.value("eta0", c.hyper.eta0);
        c.hyper.epochs = h.value("epochs", c.hyper.epochs);
        c.hyper.init_std = h.value("init_std", c.hyper.init_std);
        c.hyper.seed = h.value("seed", c.hyper.seed);
    }
    if (j.contains("setting")) c.setting = setting_from_string(j["setting"].get<std::string>());
    if (j.contains("algorithms")) {
        c.algorithms.clear();
        for (const auto& a : j["algorithms"]) c.algorithms.push_back(selection_algorithm_from_string(a.get<std::string>()));
        if (c.algorithms.empty()) throw ParseError("config: algorithms list is empty");
    }
    if (j.contains("budgets")) {
        c.budgets.clear();
        for (const auto& b : j["budgets"]) {
            const int budget = b.get<int>();
            if (budget < 1) throw ParseError("config: budgets must be positive");
            c.budgets.push_back(budget);
        }
        if (c.budgets.empty()) throw ParseError("config: budgets list is empty");
    }
    c.seed = j.value("seed", c.seed);
    c.threads = j.value("threads", c.threads);
    c.warm_fraction = j.value("warm_fraction", c.warm_fraction);
    c.warm_holdout_fraction = j.value("warm_holdout_fraction", c.warm_holdout_fraction);
    c.gamma = j.value("gamma", c.gamma);
    c.selection_gamma = j.value("selection_gamma", c.selection_gamma);
    c.sigma_floor = j.value("sigma_floor", c.sigma_floor);
    c.max_cold_users = j.value("max_cold_users", c.max_cold_users);
    c.candidate_fraction = j.value("candidate_fraction", c.candidate_fraction);
    c.timing = j.value("timing", c.timing);
    c.out_dir = j.value("out_dir", c.out_dir);

    if (!(c.warm_fraction > 0.0 && c.warm_fraction < 1.0)) throw ParseError("config: warm_fraction must be in (0,1)");
    if (!(c.candidate_fraction > 0.0 && c.candidate_fraction < 1.0))
        throw ParseError("config: candidate_fraction must be in (0,1)");
    return c;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("config: cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return config_from_json(ss.str());
}

std::string config_to_json(const ExperimentConfig& c) {
    json j;
    j["dataset"] = {{"name", c.dataset.name},
                    {"path", c.dataset.path},
                    {"format", to_string(c.dataset.format)},
                    {"rating_min", c.dataset.scale.min},
                    {"rating_max", c.dataset.scale.max}};
    j["synth"] = {{"users", c.synth.users},
                  {"items", c.synth.items},
                  {"latent_dim", c.synth.latent_dim},
                  {"noise_sigma", c.synth.noise_sigma},
                  {"density", c.synth.density}};
    j["use_truth_model"] = c.use_truth_model;
    j["hyper"] = {{"latent_dim", c.hyper.latent_dim}, {"lambda_reg", c.hyper.lambda_reg},
                  {"momentum", c.hyper.momentum},     {"eta0", c.hyper.eta0},
                  {"epochs", c.hyper.epochs},         {"init_std", c.hyper.init_std},
                  {"seed", c.hyper.seed}};
    j["setting"] = to_string(c.setting);
    std::vector<std::string> algos;
    for (auto a : c.algorithms) algos.push_back(to_string(a));
    j["algorithms"] = algos;
    j["budgets"] = c.budgets;
    j["seed"] = c.seed;
    j["threads"] = c.threads;
    j["warm_fraction"] = c.warm_fraction;
    j["warm_holdout_fraction"] = c.warm_holdout_fraction;
    j["gamma"] = c.gamma;
    j["selection_gamma"] = c.selection_gamma;
    j["sigma_floor"] = c.sigma_floor;
    j["max_cold_users"] = c.max_cold_users;
    j["candidate_fraction"] = c.candidate_fraction;
    j["timing"] = c.timing;
    j["out_dir"] = c.out_dir;
    return j.dump(2);
}

}  // namespace oid
