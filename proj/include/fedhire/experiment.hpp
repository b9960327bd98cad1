#pragma once

// Experiment runner behind the command-line tool: repeated one-shot runs
// with metric summaries, and the synthetic scaling benchmark.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fedhire/csv.hpp"
#include "fedhire/federation.hpp"
#include "fedhire/metrics.hpp"
#include "fedhire/synthetic.hpp"

namespace fedhire {

struct ExperimentSpec {
    std::string dataset;
    LabelColumn label;
    FederationConfig config;
    std::size_t repeats = 10;
    std::string output;

    void validate() const {
        if (repeats < 1) throw InvalidArgument("spec: repeats must be at least 1");
        config.validate();
    }
};

inline nlohmann::json config_json(const FederationConfig& c) {
    nlohmann::json j{{"clients", c.client_count},
                     {"fragments", c.fragments_per_cluster ? nlohmann::json(*c.fragments_per_cluster) : "auto"},
                     {"eta", c.learning_rate},
                     {"k0_fraction", c.k0_fraction},
                     {"k_star", c.k_star},
                     {"seed", c.seed},
                     {"max_epochs", c.max_epochs},
                     {"elimination_threshold", c.elimination_threshold},
                     {"initial_raw_weight", c.initial_raw_weight},
                     {"min_clusterlet_size", c.min_clusterlet_size}};
    if (c.k0_absolute) j["k0_absolute"] = *c.k0_absolute;
    return j;
}

/// Reads the keys of `config_json` (all optional) over `base`.
inline FederationConfig config_from_json(const nlohmann::json& j, FederationConfig base = {}) {
    if (j.contains("clients")) base.client_count = j.at("clients").get<std::size_t>();
    if (j.contains("fragments")) {
        const auto& f = j.at("fragments");
        if (f.is_string()) {
            if (f.get<std::string>() != "auto") throw InvalidArgument("spec: fragments must be a number or \"auto\"");
            base.fragments_per_cluster.reset();
        } else {
            base.fragments_per_cluster = f.get<std::size_t>();
        }
    }
    if (j.contains("eta")) base.learning_rate = j.at("eta").get<double>();
    if (j.contains("k0_fraction")) base.k0_fraction = j.at("k0_fraction").get<double>();
    if (j.contains("k0_absolute")) base.k0_absolute = j.at("k0_absolute").get<std::size_t>();
    if (j.contains("k_star")) base.k_star = j.at("k_star").get<std::size_t>();
    if (j.contains("seed")) base.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("parallel_clients")) base.parallel_clients = j.at("parallel_clients").get<bool>();
    if (j.contains("max_epochs")) base.max_epochs = j.at("max_epochs").get<std::size_t>();
    if (j.contains("elimination_threshold")) base.elimination_threshold = j.at("elimination_threshold").get<double>();
    if (j.contains("initial_raw_weight")) base.initial_raw_weight = j.at("initial_raw_weight").get<double>();
    if (j.contains("min_clusterlet_size")) base.min_clusterlet_size = j.at("min_clusterlet_size").get<std::size_t>();
    return base;
}

/// {"data": path, "labels": name|index|null, "repeats": r, "out": path,
///  plus any config_json key}.
inline ExperimentSpec spec_from_json(const nlohmann::json& j) {
    ExperimentSpec s;
    s.dataset = j.at("data").get<std::string>();
    if (j.contains("labels")) {
        const auto& l = j.at("labels");
        if (l.is_string())
            s.label = l.get<std::string>();
        else if (l.is_number_integer())
            s.label = l.get<long>();
        else if (!l.is_null())
            throw InvalidArgument("spec: labels must be a column name, an index or null");
    }
    if (j.contains("repeats")) s.repeats = j.at("repeats").get<std::size_t>();
    if (j.contains("out")) s.output = j.at("out").get<std::string>();
    s.config = config_from_json(j);
    return s;
}

// ---------------------------------------------------------------------------
// Summaries

struct MeanStd {
    double mean = 0.0;
    double std = 0.0;  // sample standard deviation, 0 for one value
};

inline MeanStd mean_std(const std::vector<double>& v) {
    MeanStd out;
    if (v.empty()) return out;
    for (double x : v) out.mean += x;
    out.mean /= static_cast<double>(v.size());
    if (v.size() < 2) return out;
    double ss = 0.0;
    for (double x : v) ss += (x - out.mean) * (x - out.mean);
    out.std = std::sqrt(ss / static_cast<double>(v.size() - 1));
    return out;
}

/// "0.696±0.05": mean to three decimals, deviation to two.
inline std::string format_mean_std(const MeanStd& m) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3f±%.2f", m.mean, m.std);
    return buf;
}

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline void strip_key(nlohmann::json& j, const std::string& key) {
    if (j.is_object()) {
        j.erase(key);
        for (auto& [k, v] : j.items()) strip_key(v, key);
    } else if (j.is_array()) {
        for (auto& v : j) strip_key(v, key);
    }
}

/// Hash of the results with every "timings" member and the hash itself removed.
inline std::string determinism_hash(nlohmann::json results) {
    strip_key(results, "timings");
    results.erase("determinism_hash");
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(results.dump())));
    return buf;
}

inline nlohmann::json timings_json(const PhaseTimings& t) {
    return {{"partition", t.partition},
            {"clients", t.clients},
            {"hierarchy", t.hierarchy},
            {"final_clustering", t.final_clustering},
            {"total", t.total}};
}

// ---------------------------------------------------------------------------
// Repeated runs

/// Runs the federation `repeats` times with seeds seed, seed+1, ... and
/// scores each run against the ground-truth labels.
inline nlohmann::json run_experiment(const DataMatrix& data, const FederationConfig& base, std::size_t repeats) {
    if (!data.has_labels()) throw InvalidArgument("run: the dataset needs a label column");
    if (repeats < 1) throw InvalidArgument("run: repeats must be at least 1");
    nlohmann::json runs = nlohmann::json::array();
    std::vector<double> purity, ari, nmi, acc;
    for (std::size_t r = 0; r < repeats; ++r) {
        FederationConfig cfg = base;
        cfg.seed = base.seed + r;
        const auto result = run_one_shot(data, cfg);
        const auto s = metrics::evaluate(result.object_labels, data.labels());
        purity.push_back(s.purity);
        ari.push_back(s.ari);
        nmi.push_back(s.nmi);
        acc.push_back(s.acc);
        const auto unassigned = std::ranges::count(result.object_labels, kUnassigned);
        runs.push_back({{"seed", cfg.seed},
                        {"purity", s.purity},
                        {"ari", s.ari},
                        {"nmi", s.nmi},
                        {"acc", s.acc},
                        {"hierarchy_k", result.hierarchy.ks()},
                        {"uploads", result.upload_count},
                        {"stacked_centroids", result.stacked.centroids.object_count()},
                        {"communicated_values", result.communicated_values},
                        {"unassigned_objects", unassigned},
                        {"final_iterations", result.global.iterations},
                        {"timings", timings_json(result.timings)}});
    }
    nlohmann::json summary;
    for (const auto& [name, values] : {std::pair{"purity", &purity}, {"ari", &ari}, {"nmi", &nmi}, {"acc", &acc}}) {
        const auto m = mean_std(*values);
        summary[name] = {{"mean", m.mean}, {"std", m.std}, {"formatted", format_mean_std(m)}};
    }
    nlohmann::json out{{"objects", data.object_count()},
                       {"features", data.feature_count()},
                       {"repeats", repeats},
                       {"config", config_json(base)},
                       {"runs", std::move(runs)},
                       {"summary", std::move(summary)}};
    out["determinism_hash"] = determinism_hash(out);
    return out;
}

inline nlohmann::json cmd_run(const ExperimentSpec& spec) {
    spec.validate();
    CsvOptions options;
    options.label = spec.label;
    const auto table = load_csv(spec.dataset, options);
    auto out = run_experiment(table.data, spec.config, spec.repeats);
    out["dataset"] = spec.dataset;
    out["determinism_hash"] = determinism_hash(out);
    return out;
}

// ---------------------------------------------------------------------------
// Scaling benchmark

struct BenchSettings {
    std::size_t components = 8;
    double sigma = 0.05;
    std::size_t k0_absolute = 64;
    std::size_t clients = 8;
    std::size_t repeats = 3;  // best-of
    std::uint64_t seed = 7;
};

struct BenchRow {
    std::size_t objects;
    std::size_t features;
    double seconds;
};

/// Best-of-`repeats` wall time of one full federated run per (N, d) pair on
/// a fixed-seed Gaussian mixture, with k0 fixed per client.
inline std::vector<BenchRow> cmd_bench(const std::vector<std::size_t>& sizes, const std::vector<std::size_t>& dims,
                                       const BenchSettings& settings = {}) {
    std::vector<BenchRow> rows;
    for (std::size_t n : sizes)
        for (std::size_t d : dims) {
            const auto data = synthetic::gaussian_mixture(n, d, settings.components, settings.sigma, settings.seed);
            FederationConfig cfg;
            cfg.client_count = settings.clients;
            cfg.k0_absolute = settings.k0_absolute;
            cfg.k_star = settings.components;
            cfg.fragments_per_cluster = 2;
            cfg.seed = settings.seed;
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t r = 0; r < std::max<std::size_t>(1, settings.repeats); ++r) {
                const auto t0 = std::chrono::steady_clock::now();
                (void)run_one_shot(data, cfg);
                best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
            }
            rows.push_back({n, d, best});
        }
    return rows;
}

inline std::string bench_csv(const std::vector<BenchRow>& rows) {
    std::string out = "N,d,wall_seconds\n";
    char buf[96];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%zu,%zu,%.6f\n", r.objects, r.features, r.seconds);
        out += buf;
    }
    return out;
}

}  // namespace fedhire
