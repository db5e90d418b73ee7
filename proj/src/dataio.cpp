#include "oid/dataio.hpp"

#include <algorithm>
#include <cmath>
#include <charconv>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "oid/rng.hpp"

namespace oid {

DatasetFormat dataset_format_from_string(const std::string& s) {
    if (s == "udata" || s == "u.data") return DatasetFormat::udata;
    if (s == "ratings_dat" || s == "ratings.dat") return DatasetFormat::ratings_dat;
    if (s == "csv") return DatasetFormat::csv;
    throw InvalidArgumentError("unknown dataset format: " + s);
}

std::string to_string(DatasetFormat f) {
    switch (f) {
        case DatasetFormat::udata: return "udata";
        case DatasetFormat::ratings_dat: return "ratings_dat";
        case DatasetFormat::csv: return "csv";
    }
    return "?";
}

namespace {

struct RawTriple {
    std::int64_t user;
    std::int64_t item;
    double rating;
};

std::vector<std::string> split_on(const std::string& line, const std::string& sep) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (true) {
        const std::size_t next = line.find(sep, pos);
        if (next == std::string::npos) {
            out.push_back(line.substr(pos));
            break;
        }
        out.push_back(line.substr(pos, next - pos));
        pos = next + sep.size();
    }
    return out;
}

double parse_double(const std::string& tok, std::size_t line_no) {
    try {
        std::size_t used = 0;
        const double v = std::stod(tok, &used);
        if (used != tok.size()) throw std::invalid_argument(tok);
        return v;
    } catch (const std::exception&) {
        throw ParseError("line " + std::to_string(line_no) + ": bad number '" + tok + "'");
    }
}

std::int64_t parse_int(const std::string& tok, std::size_t line_no) {
    std::int64_t v = 0;
    const auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc{} || p != tok.data() + tok.size())
        throw ParseError("line " + std::to_string(line_no) + ": bad id '" + tok + "'");
    return v;
}

}  // namespace

RatingsDataset load_dataset(const DatasetDescriptor& desc) {
    std::ifstream in(desc.path);
    if (!in) throw ParseError("cannot open dataset file: " + desc.path);

    std::vector<RawTriple> triples;
    std::string line;
    std::size_t line_no = 0;
    bool header_skipped = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;

        std::vector<std::string> toks;
        switch (desc.format) {
            case DatasetFormat::udata: toks = split_on(line, "\t"); break;
            case DatasetFormat::ratings_dat: toks = split_on(line, "::"); break;
            case DatasetFormat::csv:
                toks = split_on(line, ",");
                if (!header_skipped && line_no == 1 && !toks.empty() && toks[0] == "user") {
                    header_skipped = true;
                    continue;
                }
                break;
        }
        const std::size_t min_fields = desc.format == DatasetFormat::csv ? 3 : 4;
        if (toks.size() < 3 || (desc.format != DatasetFormat::csv && toks.size() < min_fields))
            throw ParseError("line " + std::to_string(line_no) + ": expected at least " +
                             std::to_string(min_fields) + " fields");
        // timestamps (field 4) are parsed as part of the record and discarded
        triples.push_back({parse_int(toks[0], line_no), parse_int(toks[1], line_no),
                           parse_double(toks[2], line_no)});
    }

    RatingsDataset ds;
    ds.scale = desc.scale;
    if (triples.empty()) {
        ds.load_warnings.push_back("dataset '" + desc.name + "' is empty");
    }

    std::unordered_map<std::int64_t, int> user_map, item_map;
    for (const auto& t : triples) {
        if (auto [it, inserted] = user_map.try_emplace(t.user, static_cast<int>(ds.orig_user_ids.size()));
            inserted)
            ds.orig_user_ids.push_back(t.user);
        if (auto [it, inserted] = item_map.try_emplace(t.item, static_cast<int>(ds.orig_item_ids.size()));
            inserted)
            ds.orig_item_ids.push_back(t.item);
    }
    ds.num_users = static_cast<int>(ds.orig_user_ids.size());
    ds.num_items = static_cast<int>(ds.orig_item_ids.size());
    ds.ratings.reserve(triples.size());
    for (const auto& t : triples)
        ds.ratings.push_back({user_map.at(t.user), item_map.at(t.item), t.rating});
    ds.validate();

    auto check_count = [&ds](const std::string& what, std::int64_t expected, std::int64_t actual) {
        if (expected != actual)
            ds.load_warnings.push_back("count mismatch: expected " + std::to_string(expected) + " " + what +
                                       ", parsed " + std::to_string(actual));
    };
    if (desc.expected_ratings) check_count("ratings", *desc.expected_ratings, static_cast<std::int64_t>(ds.ratings.size()));
    if (desc.expected_users) check_count("users", *desc.expected_users, ds.num_users);
    if (desc.expected_items) check_count("items", *desc.expected_items, ds.num_items);
    return ds;
}

void save_dataset_csv(const RatingsDataset& dataset, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("save_dataset_csv: cannot open " + path);
    out << "user,item,rating\n";
    std::ostringstream line;
    line.precision(17);
    for (const auto& r : dataset.ratings) {
        const std::int64_t u = r.user < static_cast<int>(dataset.orig_user_ids.size())
                                   ? dataset.orig_user_ids[r.user]
                                   : r.user;
        const std::int64_t i = r.item < static_cast<int>(dataset.orig_item_ids.size())
                                   ? dataset.orig_item_ids[r.item]
                                   : r.item;
        line.str("");
        line << u << ',' << i << ',' << r.value << '\n';
        out << line.str();
    }
}

std::pair<RatingsDataset, std::vector<int>> split_warm_cold(const RatingsDataset& dataset,
                                                            double warm_fraction, std::uint64_t seed) {
    if (!(warm_fraction > 0.0 && warm_fraction < 1.0))
        throw InvalidArgumentError("split_warm_cold: warm_fraction must be in (0,1)");

    std::vector<int> users(dataset.num_users);
    std::iota(users.begin(), users.end(), 0);
    Rng rng(seed);
    rng.shuffle(users);

    const std::size_t warm_count =
        static_cast<std::size_t>(std::floor(warm_fraction * static_cast<double>(dataset.num_users)));
    std::vector<int> warm_users(users.begin(), users.begin() + warm_count);
    std::vector<int> cold_users(users.begin() + warm_count, users.end());
    std::sort(warm_users.begin(), warm_users.end());
    std::sort(cold_users.begin(), cold_users.end());

    std::vector<int> warm_index(dataset.num_users, -1);
    RatingsDataset warm;
    warm.scale = dataset.scale;
    warm.num_items = dataset.num_items;
    warm.orig_item_ids = dataset.orig_item_ids;
    for (int u : warm_users) {
        warm_index[u] = static_cast<int>(warm.orig_user_ids.size());
        warm.orig_user_ids.push_back(u < static_cast<int>(dataset.orig_user_ids.size())
                                         ? dataset.orig_user_ids[u]
                                         : u);
    }
    warm.num_users = static_cast<int>(warm.orig_user_ids.size());
    for (const auto& r : dataset.ratings)
        if (warm_index[r.user] >= 0) warm.ratings.push_back({warm_index[r.user], r.item, r.value});
    return {std::move(warm), std::move(cold_users)};
}

SynthResult synth_generate(int num_users, int num_items, int latent_dim, double noise_sigma,
                           std::uint64_t seed, double density) {
    if (num_users < 1 || num_items < 1 || latent_dim < 1)
        throw InvalidArgumentError("synth_generate: sizes must be positive");
    if (!(density > 0.0 && density <= 1.0))
        throw InvalidArgumentError("synth_generate: density must be in (0,1]");

    Rng rng(seed);
    const std::size_t d = static_cast<std::size_t>(latent_dim);
    const double factor_std = 1.0 / std::sqrt(static_cast<double>(latent_dim));

    SynthResult out;
    out.truth.latent_dim = latent_dim;
    out.truth.user_factors = DenseMatrix(d, static_cast<std::size_t>(num_users));
    out.truth.item_factors = DenseMatrix(d, static_cast<std::size_t>(num_items));
    for (double& v : out.truth.user_factors.data()) v = rng.normal(0.0, factor_std);
    for (double& v : out.truth.item_factors.data()) v = rng.normal(0.0, factor_std);
    out.truth.hyper.latent_dim = latent_dim;
    out.truth.hyper.seed = seed;

    RatingsDataset& ds = out.data;
    ds.num_users = num_users;
    ds.num_items = num_items;
    ds.orig_user_ids.resize(static_cast<std::size_t>(num_users));
    std::iota(ds.orig_user_ids.begin(), ds.orig_user_ids.end(), std::int64_t{0});
    ds.orig_item_ids.resize(static_cast<std::size_t>(num_items));
    std::iota(ds.orig_item_ids.begin(), ds.orig_item_ids.end(), std::int64_t{0});

    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (int i = 0; i < num_users; ++i) {
        for (int j = 0; j < num_items; ++j) {
            if (density < 1.0 && rng.uniform() >= density) continue;
            double r = predict(out.truth, i, j);
            if (noise_sigma > 0.0) r += rng.normal(0.0, noise_sigma);
            ds.ratings.push_back({i, j, r});
            lo = std::min(lo, r);
            hi = std::max(hi, r);
        }
    }
    if (ds.ratings.empty()) {
        lo = 0.0;
        hi = 0.0;
    }
    ds.scale = RatingScale{lo, hi};
    return out;
}

}  // namespace oid
