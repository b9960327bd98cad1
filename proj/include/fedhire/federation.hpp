#pragma once

// Simulated federation: a non-IID partitioner that splits every ground-truth
// cluster into k-means fragments scattered over clients, and the one-shot
// driver (clients once, a single upload, then the server pipeline).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <future>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "fedhire/client.hpp"
#include "fedhire/core.hpp"
#include "fedhire/errors.hpp"
#include "fedhire/log.hpp"
#include "fedhire/rng.hpp"
#include "fedhire/server.hpp"

namespace fedhire {

// ---------------------------------------------------------------------------
// k-means

struct KMeansResult {
    Matrix centroids;
    AffiliationMatrix affiliation;
    std::size_t iterations = 0;
    double inertia = 0.0;
};

namespace detail {

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t z = 0; z < a.size(); ++z) {
        const double diff = a[z] - b[z];
        s += diff * diff;
    }
    return s;
}

}  // namespace detail

/// Lloyd iterations from k distinct random objects. An empty cluster takes
/// the object farthest from its current centroid.
inline KMeansResult kmeans(const DataMatrix& data, std::size_t k, std::uint64_t seed, std::size_t max_iters = 100) {
    const std::size_t n = data.object_count();
    const std::size_t d = data.feature_count();
    if (k < 1 || k > n) throw InvalidArgument("kmeans: need 1 <= k <= n");

    Rng rng(seed);
    KMeansResult out;
    out.centroids = Matrix(k, d);
    const auto init = rng.sample_distinct(n, k);
    for (std::size_t j = 0; j < k; ++j) std::ranges::copy(data.row(init[j]), out.centroids.row(j).begin());
    out.affiliation = {std::vector<std::size_t>(n, k), k};

    for (std::size_t iter = 0; iter < max_iters; ++iter) {
        out.iterations = iter + 1;
        std::vector<std::size_t> next(n, 0);
        std::vector<double> dist(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j < k; ++j) {
                const double s = detail::squared_distance(data.row(i), out.centroids.row(j));
                if (s < best) {
                    best = s;
                    next[i] = j;
                }
            }
            dist[i] = best;
        }
        std::vector<std::size_t> sizes(k, 0);
        for (std::size_t a : next) ++sizes[a];
        for (std::size_t j = 0; j < k; ++j) {
            if (sizes[j] > 0) continue;
            std::size_t far = n;
            for (std::size_t i = 0; i < n; ++i)
                if (sizes[next[i]] > 1 && (far == n || dist[i] > dist[far])) far = i;
            if (far == n) break;
            --sizes[next[far]];
            next[far] = j;
            sizes[j] = 1;
            dist[far] = 0.0;
        }
        const bool stable = next == out.affiliation.assignments;
        out.affiliation.assignments = std::move(next);
        Matrix sums(k, d);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t z = 0; z < d; ++z) sums(out.affiliation.assignments[i], z) += data.row(i)[z];
        for (std::size_t j = 0; j < k; ++j)
            for (std::size_t z = 0; z < d; ++z) out.centroids(j, z) = sums(j, z) / static_cast<double>(sizes[j]);
        if (stable) break;
    }
    out.inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        out.inertia += detail::squared_distance(data.row(i), out.centroids.row(out.affiliation.assignments[i]));
    return out;
}

// ---------------------------------------------------------------------------
// Configuration and partition plans

struct FederationConfig {
    std::size_t client_count = 8;
    /// Fragments per ground-truth cluster; empty means auto.
    std::optional<std::size_t> fragments_per_cluster;
    double learning_rate = 0.05;
    double k0_fraction = 0.5;
    std::optional<std::size_t> k0_absolute;
    std::size_t k_star = 2;
    std::uint64_t seed = 0;
    bool parallel_clients = false;
    std::size_t max_epochs = 100;
    double elimination_threshold = 1e-3;
    double initial_raw_weight = -4.8;
    std::size_t min_clusterlet_size = 2;

    void validate() const {
        if (client_count < 1) throw InvalidArgument("config: client_count must be at least 1");
        if (k_star < 2) throw InvalidArgument("config: k_star must be at least 2");
        if (fragments_per_cluster && *fragments_per_cluster < 1)
            throw InvalidArgument("config: fragments_per_cluster must be positive");
        if (!(learning_rate > 0.0)) throw InvalidArgument("config: learning rate must be positive");
        if (!(k0_fraction > 0.0) || k0_fraction > 1.0) throw InvalidArgument("config: k0_fraction must be in (0, 1]");
    }
};

inline std::size_t auto_fragments(std::size_t cluster_size, std::size_t client_count) {
    return std::max<std::size_t>(2, std::min(client_count, cluster_size / 20));
}

struct FragmentRecord {
    Label cluster;
    std::size_t fragment;
    std::size_t client;
    std::vector<std::size_t> object_indices;
};

struct PartitionPlan {
    std::vector<std::vector<std::size_t>> clients;  // object indices per client
    std::vector<FragmentRecord> provenance;

    std::size_t client_count() const noexcept { return clients.size(); }

    /// Index lists must be disjoint and cover 0..n-1.
    void validate(std::size_t n) const {
        std::vector<bool> seen(n, false);
        std::size_t total = 0;
        for (const auto& idx : clients)
            for (std::size_t i : idx) {
                if (i >= n) throw InvalidArgument("plan: object index out of range");
                if (seen[i]) throw InvalidArgument("plan: object assigned to more than one client");
                seen[i] = true;
                ++total;
            }
        if (total != n) throw InvalidArgument("plan: not every object is assigned");
    }
};

inline nlohmann::json to_json(const PartitionPlan& plan) {
    nlohmann::json clients = nlohmann::json::array();
    for (std::size_t l = 0; l < plan.clients.size(); ++l)
        clients.push_back({{"id", l}, {"object_indices", plan.clients[l]}});
    nlohmann::json prov = nlohmann::json::array();
    for (const auto& f : plan.provenance)
        prov.push_back({{"cluster", f.cluster},
                        {"fragment", f.fragment},
                        {"client", f.client},
                        {"object_indices", f.object_indices}});
    return {{"clients", std::move(clients)}, {"provenance", std::move(prov)}};
}

inline PartitionPlan plan_from_json(const nlohmann::json& j) {
    PartitionPlan plan;
    const auto& clients = j.at("clients");
    plan.clients.resize(clients.size());
    for (const auto& c : clients) {
        const auto id = c.at("id").get<std::size_t>();
        if (id >= plan.clients.size()) throw InvalidArgument("plan: client ids must be 0..L-1");
        plan.clients[id] = c.at("object_indices").get<std::vector<std::size_t>>();
    }
    if (j.contains("provenance"))
        for (const auto& f : j.at("provenance"))
            plan.provenance.push_back({f.at("cluster").get<Label>(), f.at("fragment").get<std::size_t>(),
                                       f.at("client").get<std::size_t>(),
                                       f.at("object_indices").get<std::vector<std::size_t>>()});
    return plan;
}

// Seed streams. Clients use their id; the other phases use ids no client can have.
inline std::uint64_t client_seed(std::uint64_t master, std::size_t client_id) { return derive_seed(master, client_id); }
inline std::uint64_t partition_seed(std::uint64_t master) { return derive_seed(master, ~std::uint64_t{0}); }
inline std::uint64_t mcpl_seed(std::uint64_t master) { return derive_seed(master, ~std::uint64_t{0} - 1); }
inline std::uint64_t final_seed(std::uint64_t master) { return derive_seed(master, ~std::uint64_t{0} - 2); }

/// Every ground-truth cluster is split by k-means into fragments, and
/// fragments are scattered over clients uniformly at random. The first L
/// fragments of a random permutation go one to each client, so no client is
/// left empty when there are at least L fragments; the rest are placed
/// independently.
inline PartitionPlan fragment_partition(const DataMatrix& data, const FederationConfig& config) {
    config.validate();
    if (!data.has_labels()) throw InvalidArgument("fragment_partition: ground-truth labels required");
    const std::uint64_t seed = partition_seed(config.seed);
    const std::size_t L = config.client_count;

    std::map<Label, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < data.object_count(); ++i) groups[data.labels()[i]].push_back(i);

    PartitionPlan plan;
    std::size_t g = 0;
    for (const auto& [label, members] : groups) {
        std::size_t k = config.fragments_per_cluster ? *config.fragments_per_cluster
                                                     : auto_fragments(members.size(), L);
        k = std::min(k, members.size());
        const auto fit = kmeans(data.subset(members), k, derive_seed(seed, g++));
        std::vector<std::vector<std::size_t>> frags(k);
        for (std::size_t i = 0; i < members.size(); ++i) frags[fit.affiliation.assignments[i]].push_back(members[i]);
        for (std::size_t f = 0; f < k; ++f)
            if (!frags[f].empty()) plan.provenance.push_back({label, f, 0, std::move(frags[f])});
    }

    Rng rng(derive_seed(seed, ~std::uint64_t{0}));
    std::vector<std::size_t> order(plan.provenance.size());
    for (std::size_t t = 0; t < order.size(); ++t) order[t] = t;
    rng.shuffle(std::span<std::size_t>(order));
    for (std::size_t t = 0; t < order.size(); ++t)
        plan.provenance[order[t]].client = t < L ? t : rng.uniform_index(L);

    plan.clients.assign(L, {});
    for (const auto& f : plan.provenance)
        plan.clients[f.client].insert(plan.clients[f.client].end(), f.object_indices.begin(), f.object_indices.end());
    return plan;
}

// ---------------------------------------------------------------------------
// One-shot run

struct PhaseTimings {
    double partition = 0.0;
    double clients = 0.0;
    double hierarchy = 0.0;
    double final_clustering = 0.0;
    double total = 0.0;
};

struct ExperimentResult {
    PartitionPlan plan;
    std::vector<std::optional<CplResult>> client_results;
    std::vector<ClientPayload> uploaded;  // exactly what the server received
    std::size_t upload_count = 0;
    std::size_t communicated_values = 0;
    StackedCentroids stacked;
    Hierarchy hierarchy;
    EnhancedRepresentation representation;
    GlobalClustering global;
    std::vector<Label> object_labels;  // original object order
    PhaseTimings timings;
};

inline FcplSettings client_settings(const FederationConfig& config, std::size_t client_id) {
    FcplSettings s;
    s.learning_rate = config.learning_rate;
    s.k0_fraction = config.k0_fraction;
    s.k0_absolute = config.k0_absolute;
    s.seed = client_seed(config.seed, client_id);
    s.max_epochs = config.max_epochs;
    s.elimination_threshold = config.elimination_threshold;
    s.initial_raw_weight = config.initial_raw_weight;
    s.min_clusterlet_size = config.min_clusterlet_size;
    return s;
}

inline McplSettings server_settings(const FederationConfig& config) {
    McplSettings s;
    s.learning_rate = config.learning_rate;
    s.k0_fraction = config.k0_fraction;
    s.seed = mcpl_seed(config.seed);
    s.max_epochs = config.max_epochs;
    s.elimination_threshold = config.elimination_threshold;
    s.initial_raw_weight = config.initial_raw_weight;
    return s;
}

/// Server half of the protocol. Takes nothing but uploaded payloads.
struct ServerOutcome {
    StackedCentroids stacked;
    Hierarchy hierarchy;
    EnhancedRepresentation representation;
    GlobalClustering global;
    double hierarchy_seconds = 0.0;
    double final_seconds = 0.0;
};

inline ServerOutcome run_server(std::span<const ClientPayload> payloads, const FederationConfig& config) {
    using clock = std::chrono::steady_clock;
    ServerOutcome out;
    auto t0 = clock::now();
    out.stacked = stack_payloads(payloads);
    out.hierarchy = run_mcpl(out.stacked.centroids, server_settings(config));
    out.representation = encode_hierarchy(out.hierarchy);
    auto t1 = clock::now();
    out.global = final_clustering(out.representation, config.k_star, final_seed(config.seed));
    auto t2 = clock::now();
    out.hierarchy_seconds = std::chrono::duration<double>(t1 - t0).count();
    out.final_seconds = std::chrono::duration<double>(t2 - t1).count();
    log::info("server: ", out.stacked.centroids.object_count(), " centroids, hierarchy k=",
              nlohmann::json(out.hierarchy.ks()).dump(), ", final clustering in ", out.global.iterations, " round(s)");
    return out;
}

/// Partitions (unless a plan is given), runs every client once, performs a
/// single upload and the server pipeline, then maps global clusters back to
/// objects.
inline ExperimentResult run_one_shot(const DataMatrix& data, const FederationConfig& config,
                                     std::optional<PartitionPlan> plan = std::nullopt) {
    using clock = std::chrono::steady_clock;
    config.validate();
    const auto start = clock::now();
    ExperimentResult r;

    r.plan = plan ? std::move(*plan) : fragment_partition(data, config);
    r.plan.validate(data.object_count());
    const std::size_t L = r.plan.client_count();
    const auto after_partition = clock::now();

    std::vector<std::optional<ClientOutcome>> outcomes(L);
    auto work = [&](std::size_t l) {
        return run_fcpl(data.subset(r.plan.clients[l]), client_settings(config, l), l);
    };
    if (config.parallel_clients && L > 1) {
        std::vector<std::future<std::optional<ClientOutcome>>> jobs;
        for (std::size_t l = 0; l < L; ++l) jobs.push_back(std::async(std::launch::async, work, l));
        for (std::size_t l = 0; l < L; ++l) outcomes[l] = jobs[l].get();
    } else {
        for (std::size_t l = 0; l < L; ++l) outcomes[l] = work(l);
    }
    const auto after_clients = clock::now();

    // the single upload
    r.client_results.resize(L);
    for (std::size_t l = 0; l < L; ++l) {
        if (!outcomes[l]) continue;
        r.communicated_values += outcomes[l]->payload.centroids.rows() * outcomes[l]->payload.centroids.cols();
        r.uploaded.push_back(std::move(outcomes[l]->payload));
        r.client_results[l] = std::move(outcomes[l]->result);
    }
    r.upload_count = r.uploaded.size();
    if (r.uploaded.empty()) throw ExperimentError("every client was skipped; nothing to cluster");

    auto server = run_server(r.uploaded, config);
    r.stacked = std::move(server.stacked);
    r.hierarchy = std::move(server.hierarchy);
    r.representation = std::move(server.representation);
    r.global = std::move(server.global);

    std::vector<std::size_t> sizes(L);
    for (std::size_t l = 0; l < L; ++l) sizes[l] = r.plan.clients[l].size();
    const auto local = propagate_labels(r.global.server_assignments, r.stacked.provenance, r.client_results, sizes);
    r.object_labels.assign(data.object_count(), kUnassigned);
    for (std::size_t l = 0; l < L; ++l)
        for (std::size_t i = 0; i < local[l].size(); ++i) r.object_labels[r.plan.clients[l][i]] = local[l][i];

    const auto end = clock::now();
    auto secs = [](auto a, auto b) { return std::chrono::duration<double>(b - a).count(); };
    r.timings.partition = secs(start, after_partition);
    r.timings.clients = secs(after_partition, after_clients);
    r.timings.hierarchy = server.hierarchy_seconds;
    r.timings.final_clustering = server.final_seconds;
    r.timings.total = secs(start, end);
    return r;
}

// ---------------------------------------------------------------------------
// Privacy audit

/// Serializes the uploaded payloads the way they would travel, parses them
/// back, and counts client data rows that reappear (to within `tolerance`
/// relative to the feature range) as an uploaded vector.
inline std::size_t canary_scan(const DataMatrix& data, std::span<const ClientPayload> uploaded,
                               double tolerance = 1e-9) {
    std::vector<ClientPayload> wire;
    for (const auto& p : uploaded) wire.push_back(payload_from_json(nlohmann::json::parse(to_json(p).dump())));
    const auto scaler = MinMaxScaler::fit(data.values());
    std::size_t leaked = 0;
    for (std::size_t i = 0; i < data.object_count(); ++i) {
        const auto x = data.row(i);
        bool hit = false;
        for (const auto& p : wire) {
            for (std::size_t j = 0; j < p.centroids.rows() && !hit; ++j) {
                const auto c = p.centroids.row(j);
                bool same = true;
                for (std::size_t z = 0; z < x.size() && same; ++z) {
                    const double scale = scaler.range[z] > 0.0 ? scaler.range[z] : 1.0;
                    same = std::abs(x[z] - c[z]) <= tolerance * scale;
                }
                hit = same;
            }
            if (hit) break;
        }
        if (hit) ++leaked;
    }
    return leaked;
}

}  // namespace fedhire
