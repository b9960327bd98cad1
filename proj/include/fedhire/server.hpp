#pragma once

// Server side. Stacks the uploaded centroids, discovers a multi-granular
// hierarchy over them by repeated competitive learning, encodes every level
// as one categorical feature, and clusters that representation into k*
// groups with learned per-level weights.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "fedhire/client.hpp"
#include "fedhire/core.hpp"
#include "fedhire/cpl.hpp"
#include "fedhire/log.hpp"
#include "fedhire/rng.hpp"

namespace fedhire {

// ---------------------------------------------------------------------------
// Stacking

struct Provenance {
    std::size_t client_id;
    std::size_t clusterlet;
    friend bool operator==(const Provenance&, const Provenance&) = default;
};

struct StackedCentroids {
    DataMatrix centroids;
    std::vector<Provenance> provenance;  // one entry per row
};

/// Rows ordered by ascending client id, then clusterlet index.
inline StackedCentroids stack_payloads(std::span<const ClientPayload> payloads) {
    if (payloads.empty()) throw InvalidArgument("stack_payloads: no payloads");
    std::vector<const ClientPayload*> order;
    for (const auto& p : payloads) order.push_back(&p);
    std::ranges::stable_sort(order, {}, [](const ClientPayload* p) { return p->client_id; });

    const std::size_t d = order.front()->centroids.cols();
    Matrix rows;
    StackedCentroids out;
    for (const ClientPayload* p : order) {
        if (p->centroids.cols() != d) throw InvalidArgument("stack_payloads: inconsistent feature count");
        for (std::size_t j = 0; j < p->centroids.rows(); ++j) {
            rows.append_row(p->centroids.row(j));
            out.provenance.push_back({p->client_id, j});
        }
    }
    out.centroids = DataMatrix(std::move(rows));
    return out;
}

// ---------------------------------------------------------------------------
// Multi-granular hierarchy

struct HierarchyLevel {
    std::size_t k;
    AffiliationMatrix affiliation;
};

/// Levels ordered finest first, k strictly decreasing.
struct Hierarchy {
    std::vector<HierarchyLevel> levels;

    std::size_t depth() const noexcept { return levels.size(); }
    std::vector<std::size_t> ks() const {
        std::vector<std::size_t> out;
        for (const auto& l : levels) out.push_back(l.k);
        return out;
    }
};

struct McplSettings {
    double learning_rate = 0.05;
    double k0_fraction = 0.5;
    std::uint64_t seed = 0;
    std::size_t max_epochs = 100;
    double elimination_threshold = 1e-3;
    double initial_raw_weight = -4.8;
    std::size_t stage_cap = 20;
};

/// Stage 1 starts from ceil(k0_fraction·n) clusterlets; each later stage
/// starts from the previous stage's k with freshly sampled centroids and
/// reset learning state. Levels are appended while k strictly decreases and
/// stays ≥ 2. If the very first stage collapses to a single cluster that
/// level is kept so the hierarchy is never empty.
inline Hierarchy run_mcpl(const DataMatrix& stacked, const McplSettings& settings) {
    const std::size_t n = stacked.object_count();
    if (n < 2) throw InvalidArgument("run_mcpl: need at least two stacked centroids");
    const DataMatrix data = normalize_min_max(stacked);

    Hierarchy h;
    std::size_t k0 = initial_clusterlets(n, settings.k0_fraction, std::nullopt);
    std::optional<std::size_t> k_old;
    for (std::size_t stage = 0; stage < settings.stage_cap; ++stage) {
        CplConfig cfg;
        cfg.learning_rate = settings.learning_rate;
        cfg.initial_k = k0;
        cfg.max_epochs = settings.max_epochs;
        cfg.elimination_threshold = settings.elimination_threshold;
        cfg.initial_raw_weight = settings.initial_raw_weight;
        cfg.rng_seed = derive_seed(settings.seed, stage);
        auto result = run_cpl(data, cfg, FeatureWeighting::on);
        const std::size_t k_new = result.converged_k;
        log::debug("mcpl stage ", stage, ": k0=", k0, " -> k=", k_new);

        if (k_old && k_new >= *k_old) break;
        if (k_new < 2) {
            if (h.levels.empty()) h.levels.push_back({k_new, std::move(result.affiliation)});
            break;
        }
        h.levels.push_back({k_new, std::move(result.affiliation)});
        k_old = k_new;
        k0 = k_new;
        // a stage started from two clusterlets can only reproduce k=2 or drop to 1
        if (k_new == 2) break;
    }
    return h;
}

// ---------------------------------------------------------------------------
// Enhanced representation

/// n objects by Δ levels; code(i, δ) is the 1-based cluster of object i at
/// level δ.
struct EnhancedRepresentation {
    std::size_t objects = 0;
    std::vector<std::size_t> level_ks;
    std::vector<std::size_t> codes;  // row-major, objects × levels

    std::size_t levels() const noexcept { return level_ks.size(); }
    std::size_t code(std::size_t i, std::size_t level) const { return codes[i * levels() + level]; }
    std::span<const std::size_t> row(std::size_t i) const { return {codes.data() + i * levels(), levels()}; }

    std::vector<std::size_t> column(std::size_t level) const {
        std::vector<std::size_t> out(objects);
        for (std::size_t i = 0; i < objects; ++i) out[i] = code(i, level);
        return out;
    }

    /// Back to the one-hot affiliation of one level.
    AffiliationMatrix decode(std::size_t level) const {
        AffiliationMatrix q{column(level), level_ks[level]};
        for (auto& a : q.assignments) a -= 1;
        return q;
    }
};

/// code = Σ_j j·q_ij with 1-based j.
inline EnhancedRepresentation encode_hierarchy(const Hierarchy& h) {
    if (h.levels.empty()) throw InvalidArgument("encode_hierarchy: empty hierarchy");
    EnhancedRepresentation x;
    x.objects = h.levels.front().affiliation.object_count();
    for (const auto& level : h.levels) {
        if (level.affiliation.object_count() != x.objects)
            throw InvalidArgument("encode_hierarchy: levels cover different object counts");
        x.level_ks.push_back(level.k);
    }
    const std::size_t depth = h.levels.size();
    x.codes.assign(x.objects * depth, 0);
    for (std::size_t level = 0; level < depth; ++level) {
        const auto bin = h.levels[level].affiliation.to_binary();
        for (std::size_t i = 0; i < x.objects; ++i) {
            std::size_t code = 0;
            for (std::size_t j = 0; j < bin[i].size(); ++j) code += (j + 1) * static_cast<std::size_t>(bin[i][j]);
            x.codes[i * depth + level] = code;
        }
    }
    return x;
}

// ---------------------------------------------------------------------------
// Categorical weighting primitives

/// Number of members whose code equals `value`.
inline std::size_t count_matching(std::size_t value, std::span<const std::size_t> member_codes) {
    return static_cast<std::size_t>(std::ranges::count(member_codes, value));
}

/// (1/√2)·sqrt(Σ_{v=1..k} (Υ(v,C)/|C| − Υ(v,C̄)/|C̄|)²), taken literally over
/// frequencies.
inline double alpha_categorical(std::span<const std::size_t> cluster_codes,
                                std::span<const std::size_t> complement_codes, std::size_t level_k) {
    if (cluster_codes.empty() || complement_codes.empty())
        throw UndefinedCluster("alpha_categorical: cluster or complement is empty");
    const auto nc = static_cast<double>(cluster_codes.size());
    const auto nb = static_cast<double>(complement_codes.size());
    double acc = 0.0;
    for (std::size_t v = 1; v <= level_k; ++v) {
        const double diff = static_cast<double>(count_matching(v, cluster_codes)) / nc -
                            static_cast<double>(count_matching(v, complement_codes)) / nb;
        acc += diff * diff;
    }
    return std::sqrt(acc) / std::numbers::sqrt2;
}

/// Average matching rate (1/|C|)·Σ_{x∈C} Υ(x, C)/|C|.
inline double beta_matching(std::span<const std::size_t> cluster_codes) {
    if (cluster_codes.empty()) throw UndefinedCluster("beta_matching: empty cluster");
    const auto nc = static_cast<double>(cluster_codes.size());
    double acc = 0.0;
    for (std::size_t code : cluster_codes) acc += static_cast<double>(count_matching(code, cluster_codes)) / nc;
    return acc / nc;
}

/// U (k* × Δ): u_jδ ∝ α_jδ·β_jδ per cluster. Rows for empty clusters, for a
/// cluster holding every object, or with all products zero are uniform.
/// Counts come from one contingency table per level, so the cost is
/// O(n·Δ + k*·Σk_δ).
inline FeatureClusterMatrix feature_cluster_matrix_server(const EnhancedRepresentation& x,
                                                          const AffiliationMatrix& q) {
    if (q.object_count() != x.objects) throw InvalidArgument("feature_cluster_matrix_server: size mismatch");
    q.validate();
    const std::size_t k = q.k;
    const std::size_t depth = x.levels();
    const auto sizes = q.cluster_sizes();
    const auto n = static_cast<double>(x.objects);

    Matrix products(k, depth);
    for (std::size_t level = 0; level < depth; ++level) {
        const std::size_t kl = x.level_ks[level];
        std::vector<double> table(k * (kl + 1), 0.0), totals(kl + 1, 0.0);
        for (std::size_t i = 0; i < x.objects; ++i) {
            const std::size_t code = x.code(i, level);
            if (code < 1 || code > kl) throw InvalidArgument("feature_cluster_matrix_server: code out of range");
            table[q.assignments[i] * (kl + 1) + code] += 1.0;
            totals[code] += 1.0;
        }
        for (std::size_t j = 0; j < k; ++j) {
            if (sizes[j] == 0 || sizes[j] == x.objects) continue;
            const auto nc = static_cast<double>(sizes[j]);
            const double nb = n - nc;
            double a = 0.0, b = 0.0;
            for (std::size_t v = 1; v <= kl; ++v) {
                const double in = table[j * (kl + 1) + v];
                const double diff = in / nc - (totals[v] - in) / nb;
                a += diff * diff;
                b += in * in;
            }
            products(j, level) = (std::sqrt(a) / std::numbers::sqrt2) * (b / (nc * nc));
        }
    }
    auto u = FeatureClusterMatrix::uniform(k, depth);
    for (std::size_t j = 0; j < k; ++j)
        if (sizes[j] > 0 && sizes[j] < x.objects) u.set_row_normalized(j, products.row(j));
    return u;
}

/// ||u ⊙ 1[x = c]||₂.
inline double match_similarity(std::span<const std::size_t> x_codes, std::span<const std::size_t> centroid_codes,
                               std::span<const double> u_row) {
    if (x_codes.size() != centroid_codes.size() || x_codes.size() != u_row.size())
        throw InvalidArgument("match_similarity: length mismatch");
    double acc = 0.0;
    for (std::size_t t = 0; t < x_codes.size(); ++t)
        if (x_codes[t] == centroid_codes[t]) acc += u_row[t] * u_row[t];
    return std::sqrt(acc);
}

/// k* centroid code vectors, row-major k* × Δ.
struct CodeCentroids {
    std::size_t levels = 0;
    std::vector<std::size_t> codes;

    std::size_t count() const noexcept { return levels ? codes.size() / levels : 0; }
    std::span<const std::size_t> row(std::size_t j) const { return {codes.data() + j * levels, levels}; }
    std::span<std::size_t> row(std::size_t j) { return {codes.data() + j * levels, levels}; }
};

/// Each object goes to the cluster of highest match similarity; ties go to
/// the lower index.
inline AffiliationMatrix assign_server(const EnhancedRepresentation& x, const CodeCentroids& centroids,
                                       const FeatureClusterMatrix& u) {
    const std::size_t k = centroids.count();
    if (k < 1) throw InvalidArgument("assign_server: no centroids");
    if (u.clusters() != k || u.features() != x.levels() || centroids.levels != x.levels())
        throw InvalidArgument("assign_server: shape mismatch");
    AffiliationMatrix q{std::vector<std::size_t>(x.objects, 0), k};
    for (std::size_t i = 0; i < x.objects; ++i) {
        double best = -1.0;
        for (std::size_t j = 0; j < k; ++j) {
            const double s = match_similarity(x.row(i), centroids.row(j), u.row(j));
            if (s > best) {
                best = s;
                q.assignments[i] = j;
            }
        }
    }
    return q;
}

/// Σ_i s(x_i, c_{q(i)}): the quantity the server-side assignment maximizes.
inline double server_objective(const EnhancedRepresentation& x, const CodeCentroids& centroids,
                               const FeatureClusterMatrix& u, const AffiliationMatrix& q) {
    double total = 0.0;
    for (std::size_t i = 0; i < x.objects; ++i) {
        const std::size_t j = q.assignments[i];
        total += match_similarity(x.row(i), centroids.row(j), u.row(j));
    }
    return total;
}

/// Per-level mode of each cluster's members (ties to the smaller code).
/// Empty clusters keep their previous centroid.
inline void update_code_centroids(const EnhancedRepresentation& x, const AffiliationMatrix& q,
                                  CodeCentroids& centroids) {
    const std::size_t depth = x.levels();
    for (std::size_t level = 0; level < depth; ++level) {
        const std::size_t kl = x.level_ks[level];
        std::vector<std::size_t> table(q.k * (kl + 1), 0);
        for (std::size_t i = 0; i < x.objects; ++i) ++table[q.assignments[i] * (kl + 1) + x.code(i, level)];
        for (std::size_t j = 0; j < q.k; ++j) {
            std::size_t best_code = 0, best_count = 0;
            for (std::size_t v = 1; v <= kl; ++v)
                if (table[j * (kl + 1) + v] > best_count) {
                    best_count = table[j * (kl + 1) + v];
                    best_code = v;
                }
            if (best_count > 0) centroids.row(j)[level] = best_code;
        }
    }
}

struct GlobalClustering {
    AffiliationMatrix server_assignments;
    FeatureClusterMatrix weights;  // U, k* × Δ
    CodeCentroids centroids;
    std::size_t iterations = 0;
    bool converged = false;
};

namespace detail {

/// Moves the worst-fitting object (lowest similarity to its own centroid,
/// taken from a cluster with more than one member) into each empty cluster
/// and makes it that cluster's centroid.
inline void repair_empty_clusters(const EnhancedRepresentation& x, CodeCentroids& centroids,
                                  const FeatureClusterMatrix& u, AffiliationMatrix& q) {
    auto sizes = q.cluster_sizes();
    for (std::size_t empty = 0; empty < q.k; ++empty) {
        if (sizes[empty] != 0) continue;
        std::size_t worst = x.objects;
        double worst_sim = 0.0;
        for (std::size_t i = 0; i < x.objects; ++i) {
            const std::size_t j = q.assignments[i];
            if (sizes[j] < 2) continue;
            const double s = match_similarity(x.row(i), centroids.row(j), u.row(j));
            if (worst == x.objects || s < worst_sim) {
                worst = i;
                worst_sim = s;
            }
        }
        if (worst == x.objects) break;
        --sizes[q.assignments[worst]];
        q.assignments[worst] = empty;
        sizes[empty] = 1;
        std::ranges::copy(x.row(worst), centroids.row(empty).begin());
    }
}

}  // namespace detail

/// Alternating optimization over the enhanced representation. Starts from
/// k* sampled objects (preferring distinct code vectors) and uniform U,
/// then repeats: centroid modes, U from the current partition, reassign.
/// Stops when the partition repeats or after `max_iters` rounds.
inline GlobalClustering final_clustering(const EnhancedRepresentation& x, std::size_t k_star, std::uint64_t seed,
                                         std::size_t max_iters = 100) {
    const std::size_t n = x.objects;
    const std::size_t depth = x.levels();
    if (depth == 0) throw InvalidArgument("final_clustering: representation has no levels");
    if (k_star < 2) throw InvalidArgument("final_clustering: k* must be at least 2");
    if (k_star > n) throw InvalidArgument("final_clustering: k* exceeds the number of objects");

    Rng rng(seed);
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    rng.shuffle(std::span<std::size_t>(order));
    std::vector<std::size_t> chosen, spare;
    for (std::size_t i : order) {
        const bool duplicate = std::ranges::any_of(chosen, [&](std::size_t c) {
            return std::ranges::equal(x.row(c), x.row(i));
        });
        if (chosen.size() < k_star && !duplicate)
            chosen.push_back(i);
        else
            spare.push_back(i);
    }
    for (std::size_t t = 0; chosen.size() < k_star; ++t) chosen.push_back(spare[t]);

    GlobalClustering g;
    g.centroids.levels = depth;
    for (std::size_t c : chosen) g.centroids.codes.insert(g.centroids.codes.end(), x.row(c).begin(), x.row(c).end());
    g.weights = FeatureClusterMatrix::uniform(k_star, depth);
    g.server_assignments = assign_server(x, g.centroids, g.weights);
    detail::repair_empty_clusters(x, g.centroids, g.weights, g.server_assignments);

    for (std::size_t iter = 0; iter < max_iters; ++iter) {
        g.iterations = iter + 1;
        update_code_centroids(x, g.server_assignments, g.centroids);
        g.weights = feature_cluster_matrix_server(x, g.server_assignments);
        auto next = assign_server(x, g.centroids, g.weights);
        detail::repair_empty_clusters(x, g.centroids, g.weights, next);
        if (next == g.server_assignments) {
            g.converged = true;
            break;
        }
        g.server_assignments = std::move(next);
    }
    return g;
}

// ---------------------------------------------------------------------------
// Back to objects

/// Object i of client l inherits the global cluster of the clusterlet it
/// belongs to. `client_results[l]` is empty for skipped clients, whose
/// objects are all kUnassigned.
inline std::vector<std::vector<Label>> propagate_labels(const AffiliationMatrix& server_assignments,
                                                        std::span<const Provenance> provenance,
                                                        std::span<const std::optional<CplResult>> client_results,
                                                        std::span<const std::size_t> client_sizes) {
    if (provenance.size() != server_assignments.object_count())
        throw InvalidArgument("propagate_labels: provenance does not cover every stacked row");
    if (client_results.size() != client_sizes.size())
        throw InvalidArgument("propagate_labels: one size per client required");

    std::vector<std::vector<Label>> clusterlet_label(client_results.size());
    for (std::size_t l = 0; l < client_results.size(); ++l)
        if (client_results[l]) clusterlet_label[l].assign(client_results[l]->converged_k, kUnassigned);
    for (std::size_t row = 0; row < provenance.size(); ++row) {
        const auto [client, clusterlet] = provenance[row];
        if (client >= clusterlet_label.size() || clusterlet >= clusterlet_label[client].size())
            throw InvalidArgument("propagate_labels: provenance refers to an unknown clusterlet");
        clusterlet_label[client][clusterlet] = static_cast<Label>(server_assignments.assignments[row]);
    }

    std::vector<std::vector<Label>> out(client_results.size());
    std::size_t unassigned = 0;
    for (std::size_t l = 0; l < client_results.size(); ++l) {
        if (!client_results[l]) {
            out[l].assign(client_sizes[l], kUnassigned);
            unassigned += client_sizes[l];
            continue;
        }
        const auto& local = client_results[l]->affiliation.assignments;
        if (local.size() != client_sizes[l]) throw InvalidArgument("propagate_labels: client size mismatch");
        out[l].reserve(local.size());
        for (std::size_t a : local) out[l].push_back(clusterlet_label[l][a]);
    }
    if (unassigned > 0) log::info("propagate_labels: ", unassigned, " object(s) left unassigned");
    return out;
}

// ---------------------------------------------------------------------------
// Report serialization

inline nlohmann::json report_json(const Hierarchy& h, const EnhancedRepresentation& x, const GlobalClustering& g,
                                  const std::vector<std::vector<Label>>& object_assignments) {
    nlohmann::json levels = nlohmann::json::array();
    for (const auto& level : h.levels)
        levels.push_back({{"k", level.k}, {"assignments", level.affiliation.assignments}});
    nlohmann::json codes = nlohmann::json::array();
    for (std::size_t i = 0; i < x.objects; ++i) codes.push_back(std::vector<std::size_t>(x.row(i).begin(), x.row(i).end()));
    nlohmann::json u = nlohmann::json::array();
    for (std::size_t j = 0; j < g.weights.clusters(); ++j)
        u.push_back(std::vector<double>(g.weights.row(j).begin(), g.weights.row(j).end()));
    return {{"levels", std::move(levels)},
            {"codes", std::move(codes)},
            {"U", std::move(u)},
            {"server_assignments", g.server_assignments.assignments},
            {"object_assignments", object_assignments}};
}

}  // namespace fedhire
