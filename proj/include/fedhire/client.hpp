#pragma once

// Client side: normalize locally, run FCPL with feature-cluster weighting,
// and package the surviving centroids as the only thing sent upstream.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include <json.hpp>

#include "fedhire/core.hpp"
#include "fedhire/cpl.hpp"
#include "fedhire/log.hpp"

namespace fedhire {

/// What a client uploads. Centroids are expressed in the caller's feature
/// units (local normalization is undone before upload).
struct ClientPayload {
    std::size_t client_id = 0;
    Matrix centroids;
    std::optional<std::vector<std::size_t>> clusterlet_sizes;

    std::size_t clusterlet_count() const noexcept { return centroids.rows(); }
};

inline nlohmann::json to_json(const ClientPayload& p) {
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t j = 0; j < p.centroids.rows(); ++j) {
        auto r = p.centroids.row(j);
        rows.push_back(std::vector<double>(r.begin(), r.end()));
    }
    nlohmann::json out{{"client_id", p.client_id}, {"centroids", std::move(rows)}};
    if (p.clusterlet_sizes) out["clusterlet_sizes"] = *p.clusterlet_sizes;
    return out;
}

inline ClientPayload payload_from_json(const nlohmann::json& j) {
    ClientPayload p;
    p.client_id = j.at("client_id").get<std::size_t>();
    for (const auto& row : j.at("centroids")) p.centroids.append_row(row.get<std::vector<double>>());
    if (j.contains("clusterlet_sizes")) p.clusterlet_sizes = j.at("clusterlet_sizes").get<std::vector<std::size_t>>();
    if (p.centroids.rows() == 0) throw InvalidArgument("payload: no centroids");
    for (double v : p.centroids.values())
        if (!std::isfinite(v)) throw InvalidArgument("payload: non-finite centroid");
    return p;
}

struct FcplSettings {
    double learning_rate = 0.05;
    double k0_fraction = 0.5;
    /// Fixed k0 (clipped to the local object count); overrides the fraction.
    std::optional<std::size_t> k0_absolute;
    std::uint64_t seed = 0;
    std::size_t max_epochs = 100;
    double elimination_threshold = 1e-3;
    double initial_raw_weight = -4.8;
    bool include_sizes = false;
    /// Clusterlets with fewer members are folded away before upload; 0 or 1
    /// disables the guard.
    std::size_t min_clusterlet_size = 2;
};

inline constexpr std::size_t kMinClientObjects = 4;

inline std::size_t initial_clusterlets(std::size_t n, double fraction, std::optional<std::size_t> absolute) {
    std::size_t k0 = absolute ? *absolute
                              : static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n)));
    return std::min(n, std::max<std::size_t>(2, k0));
}

/// Moves every member of a clusterlet smaller than `min_size` to the nearest
/// (Euclidean) clusterlet that is large enough, then drops the emptied ones.
/// A one-member clusterlet's centroid is that member's row, so without this
/// the upload could carry raw data. Returns the number folded.
inline std::size_t fold_small_clusterlets(const DataMatrix& data, CplResult& result, std::size_t min_size) {
    auto& state = result.clusterlets;
    const auto sizes = result.affiliation.cluster_sizes();
    std::vector<bool> keep(sizes.size());
    std::size_t kept = 0;
    for (std::size_t j = 0; j < sizes.size(); ++j) kept += (keep[j] = sizes[j] >= min_size);
    if (kept == sizes.size()) return 0;
    if (kept == 0) {
        const auto largest = std::ranges::max_element(sizes) - sizes.begin();
        keep[static_cast<std::size_t>(largest)] = true;
        kept = 1;
    }
    for (std::size_t i = 0; i < data.object_count(); ++i) {
        auto& a = result.affiliation.assignments[i];
        if (keep[a]) continue;
        double best = 0.0;
        std::size_t target = sizes.size();
        for (std::size_t j = 0; j < sizes.size(); ++j) {
            if (!keep[j]) continue;
            double dist = 0.0;
            for (std::size_t z = 0; z < data.feature_count(); ++z) {
                const double diff = data.row(i)[z] - state.centroids(j, z);
                dist += diff * diff;
            }
            if (target == sizes.size() || dist < best) {
                best = dist;
                target = j;
            }
        }
        a = target;
    }
    for (std::size_t j = 0; j < sizes.size(); ++j) state.active[j] = keep[j];
    detail::compact(data, state, result.affiliation);
    result.converged_k = result.affiliation.k;
    return sizes.size() - kept;
}

struct ClientOutcome {
    CplResult result;  // in locally normalized units
    ClientPayload payload;
};

/// Runs FCPL on one client's private data. Returns nullopt (and logs) when
/// the client holds fewer than four objects.
inline std::optional<ClientOutcome> run_fcpl(const DataMatrix& local_data, const FcplSettings& settings,
                                             std::size_t client_id) {
    const std::size_t n = local_data.object_count();
    if (n < kMinClientObjects) {
        log::info("client ", client_id, " skipped: only ", n, " object(s)");
        return std::nullopt;
    }
    const auto scaler = MinMaxScaler::fit(local_data.values());
    const DataMatrix normalized(scaler.transform(local_data.values()));

    CplConfig cfg;
    cfg.learning_rate = settings.learning_rate;
    cfg.initial_k = initial_clusterlets(n, settings.k0_fraction, settings.k0_absolute);
    cfg.max_epochs = settings.max_epochs;
    cfg.elimination_threshold = settings.elimination_threshold;
    cfg.initial_raw_weight = settings.initial_raw_weight;
    cfg.rng_seed = settings.seed;

    ClientOutcome out{run_cpl(normalized, cfg, FeatureWeighting::on), {}};
    if (settings.min_clusterlet_size > 1)
        if (const auto folded = fold_small_clusterlets(normalized, out.result, settings.min_clusterlet_size))
            log::debug("client ", client_id, ": folded ", folded, " undersized clusterlet(s)");
    out.payload.client_id = client_id;
    out.payload.centroids = scaler.inverse_transform(out.result.clusterlets.centroids);
    if (settings.include_sizes) out.payload.clusterlet_sizes = out.result.affiliation.cluster_sizes();
    log::debug("client ", client_id, ": n=", n, " k0=", cfg.initial_k, " -> k=", out.result.converged_k, " in ",
               out.result.epochs_used, " epoch(s)");
    return out;
}

}  // namespace fedhire
