#pragma once

// Competitive penalized learning: an over-provisioned set of clusterlets
// competes for objects. Each presentation rewards the winner and penalizes
// the nearest rival; clusterlets whose squashed weight collapses are
// eliminated. Shared by client-side FCPL and every server-side MCPL stage.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "fedhire/core.hpp"
#include "fedhire/rng.hpp"

namespace fedhire {

struct CplConfig {
    double learning_rate = 0.05;
    std::size_t initial_k = 2;
    std::size_t max_epochs = 100;
    double elimination_threshold = 1e-3;
    /// Starting value of every raw weight. Must sit inside the responsive
    /// range of squash_weight (w ≈ 0.88 at the default) or no clusterlet
    /// can ever be eliminated.
    double initial_raw_weight = -4.8;
    std::uint64_t rng_seed = 0;

    void validate() const {
        if (!(learning_rate > 0.0)) throw InvalidArgument("CplConfig: learning rate must be positive");
        if (initial_k < 2) throw InvalidArgument("CplConfig: initial_k must be at least 2");
        if (max_epochs < 1) throw InvalidArgument("CplConfig: max_epochs must be at least 1");
        if (!(elimination_threshold > 0.0 && elimination_threshold < 0.5))
            throw InvalidArgument("CplConfig: elimination threshold must lie in (0, 0.5)");
        if (!std::isfinite(initial_raw_weight)) throw InvalidArgument("CplConfig: initial raw weight must be finite");
    }
};

enum class FeatureWeighting { off, on };

/// w = 1 / (1 + e^{−10(raw + 5)}).
inline double squash_weight(double raw) { return 1.0 / (1.0 + std::exp(-10.0 * (raw + 5.0))); }

struct ClusterletState {
    Matrix centroids;
    std::vector<std::uint64_t> win_counts;
    std::vector<double> raw_weights;
    std::vector<double> weights;
    std::vector<bool> active;

    static ClusterletState fresh(Matrix centroids, double initial_raw_weight) {
        const std::size_t k = centroids.rows();
        ClusterletState s;
        s.centroids = std::move(centroids);
        s.win_counts.assign(k, 0);
        s.raw_weights.assign(k, initial_raw_weight);
        s.weights.assign(k, squash_weight(initial_raw_weight));
        s.active.assign(k, true);
        return s;
    }

    std::size_t size() const noexcept { return raw_weights.size(); }
    std::size_t active_count() const noexcept {
        return static_cast<std::size_t>(std::count(active.begin(), active.end(), true));
    }
};

/// Relative winning possibility γ_j = 1 − g_j / Σg. All ones before any win.
inline std::vector<double> compute_gamma(std::span<const std::uint64_t> win_counts) {
    std::uint64_t total = 0;
    for (auto g : win_counts) total += g;
    std::vector<double> gamma(win_counts.size(), 1.0);
    if (total == 0) return gamma;
    for (std::size_t j = 0; j < win_counts.size(); ++j)
        gamma[j] = 1.0 - static_cast<double>(win_counts[j]) / static_cast<double>(total);
    return gamma;
}

struct Competition {
    std::size_t winner;
    std::size_t rival;
};

/// Winner and rival are the best and second-best active clusterlets under
/// γ_j·w_j·exp(−‖m_j ⊙ (x − c_j)‖). Ties go to the lower index.
inline Competition select_winner_and_rival(std::span<const double> x, const ClusterletState& state,
                                           const FeatureClusterMatrix& m) {
    if (state.active_count() < 2) throw std::logic_error("select_winner_and_rival: fewer than two active clusterlets");
    std::uint64_t total = 0;
    for (auto g : state.win_counts) total += g;

    constexpr std::size_t none = static_cast<std::size_t>(-1);
    std::size_t best = none, second = none;
    double best_score = 0.0, second_score = 0.0;
    for (std::size_t j = 0; j < state.size(); ++j) {
        if (!state.active[j]) continue;
        const double gamma =
            total == 0 ? 1.0 : 1.0 - static_cast<double>(state.win_counts[j]) / static_cast<double>(total);
        const double score =
            gamma * state.weights[j] * similarity_from_distance(weighted_distance(x, state.centroids.row(j), m.row(j)));
        if (best == none || score > best_score) {
            second = best;
            second_score = best_score;
            best = j;
            best_score = score;
        } else if (second == none || score > second_score) {
            second = j;
            second_score = score;
        }
    }
    return {best, second};
}

inline void reward_winner(ClusterletState& state, std::size_t winner, double learning_rate) {
    if (winner >= state.size() || !state.active[winner])
        throw std::logic_error("reward_winner: winner is not an active clusterlet");
    state.raw_weights[winner] += learning_rate;
    state.weights[winner] = squash_weight(state.raw_weights[winner]);
    ++state.win_counts[winner];
}

/// Raw rival weight drops by η·sim_r/sim_v.
inline void penalize_rival(ClusterletState& state, std::size_t winner, std::size_t rival, std::span<const double> x,
                           const FeatureClusterMatrix& m, double learning_rate) {
    if (winner == rival) throw std::logic_error("penalize_rival: winner and rival coincide");
    if (rival >= state.size() || !state.active[rival] || winner >= state.size() || !state.active[winner])
        throw std::logic_error("penalize_rival: inactive clusterlet");
    const double sim_v = similarity_from_distance(weighted_distance(x, state.centroids.row(winner), m.row(winner)));
    const double sim_r = similarity_from_distance(weighted_distance(x, state.centroids.row(rival), m.row(rival)));
    state.raw_weights[rival] -= learning_rate * sim_r / sim_v;
    state.weights[rival] = squash_weight(state.raw_weights[rival]);
}

struct EliminationOutcome {
    std::size_t eliminated = 0;
    /// Some clusterlet fell below the threshold but was kept to preserve
    /// the two-clusterlet minimum.
    bool floor_applied = false;

    bool any() const noexcept { return eliminated > 0; }
};

/// Deactivates every active clusterlet with w below `threshold`, never
/// leaving fewer than two active (the two heaviest are kept).
inline EliminationOutcome eliminate_clusterlets(ClusterletState& state, double threshold) {
    std::vector<std::size_t> alive, below;
    for (std::size_t j = 0; j < state.size(); ++j) {
        if (!state.active[j]) continue;
        alive.push_back(j);
        if (state.weights[j] < threshold) below.push_back(j);
    }
    EliminationOutcome out;
    if (below.empty()) return out;
    if (alive.size() - below.size() >= 2) {
        for (std::size_t j : below) state.active[j] = false;
        out.eliminated = below.size();
        return out;
    }
    out.floor_applied = true;
    std::vector<std::size_t> order = alive;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return state.weights[a] > state.weights[b]; });
    std::vector<bool> keep(state.size(), false);
    for (std::size_t t = 0; t < std::min<std::size_t>(2, order.size()); ++t) keep[order[t]] = true;
    for (std::size_t j : below)
        if (!keep[j]) {
            state.active[j] = false;
            ++out.eliminated;
        }
    return out;
}

struct CplResult {
    /// Survivors only, compacted: index j here is cluster j of `affiliation`.
    ClusterletState clusterlets;
    AffiliationMatrix affiliation;
    std::size_t converged_k = 0;
    std::size_t epochs_used = 0;
    bool converged = false;
    /// Active clusterlet count at the end of every epoch.
    std::vector<std::size_t> active_history;
};

namespace detail {

inline std::size_t nearest_active(std::span<const double> x, const ClusterletState& state,
                                  const FeatureClusterMatrix& m) {
    std::size_t best = static_cast<std::size_t>(-1);
    double best_dist = 0.0;
    for (std::size_t j = 0; j < state.size(); ++j) {
        if (!state.active[j]) continue;
        const double dist = weighted_distance(x, state.centroids.row(j), m.row(j));
        if (best == static_cast<std::size_t>(-1) || dist < best_dist) {
            best = j;
            best_dist = dist;
        }
    }
    return best;
}

inline void update_centroids(const DataMatrix& data, const std::vector<std::size_t>& assignment,
                             ClusterletState& state) {
    const std::size_t d = data.feature_count();
    Matrix sums(state.size(), d);
    std::vector<std::size_t> counts(state.size(), 0);
    for (std::size_t i = 0; i < assignment.size(); ++i) {
        const std::size_t j = assignment[i];
        ++counts[j];
        auto x = data.row(i);
        for (std::size_t z = 0; z < d; ++z) sums(j, z) += x[z];
    }
    for (std::size_t j = 0; j < state.size(); ++j) {
        if (!state.active[j] || counts[j] == 0) continue;
        for (std::size_t z = 0; z < d; ++z) state.centroids(j, z) = sums(j, z) / static_cast<double>(counts[j]);
    }
}

/// Drops inactive and empty clusterlets, renumbers the affiliation and
/// resets each survivor's centroid to the exact mean of its members.
inline void compact(const DataMatrix& data, ClusterletState& state, AffiliationMatrix& affiliation) {
    std::vector<std::size_t> counts(state.size(), 0);
    for (std::size_t a : affiliation.assignments) ++counts[a];
    std::vector<std::size_t> new_index(state.size(), static_cast<std::size_t>(-1));
    ClusterletState out;
    std::size_t next = 0;
    for (std::size_t j = 0; j < state.size(); ++j) {
        if (!state.active[j] || counts[j] == 0) continue;
        new_index[j] = next++;
        out.centroids.append_row(state.centroids.row(j));
        out.win_counts.push_back(state.win_counts[j]);
        out.raw_weights.push_back(state.raw_weights[j]);
        out.weights.push_back(state.weights[j]);
        out.active.push_back(true);
    }
    for (auto& a : affiliation.assignments) a = new_index[a];
    affiliation.k = next;
    state = std::move(out);
    update_centroids(data, affiliation.assignments, state);
}

}  // namespace detail

/// Runs competitive penalized learning to convergence (an epoch that leaves
/// every assignment unchanged) or `max_epochs`.
///
/// Centroids start at k0 distinct objects drawn with the configured seed and
/// move to member means at the end of each epoch. Objects are presented in
/// ascending index order. With weighting on, the feature-cluster matrix is
/// refreshed after every non-final epoch; otherwise it stays uniform.
inline CplResult run_cpl(const DataMatrix& data, const CplConfig& config, FeatureWeighting weighting) {
    config.validate();
    const std::size_t n = data.object_count();
    const std::size_t d = data.feature_count();
    const std::size_t k0 = config.initial_k;
    if (n < 2) throw InvalidArgument("run_cpl: need at least two objects");
    if (k0 > n) throw InvalidArgument("run_cpl: initial_k exceeds object count");
    if (d == 0) throw InvalidArgument("run_cpl: data has no features");

    Rng rng(config.rng_seed);
    Matrix init(k0, d);
    const auto picks = rng.sample_distinct(n, k0);
    for (std::size_t j = 0; j < k0; ++j) std::ranges::copy(data.row(picks[j]), init.row(j).begin());

    auto state = ClusterletState::fresh(std::move(init), config.initial_raw_weight);
    auto m = FeatureClusterMatrix::uniform(k0, d);

    CplResult result;
    std::vector<std::size_t> assignment(n, 0), previous;
    for (std::size_t epoch = 0; epoch < config.max_epochs; ++epoch) {
        for (std::size_t i = 0; i < n; ++i) {
            const auto x = data.row(i);
            const auto [v, r] = select_winner_and_rival(x, state, m);
            assignment[i] = v;
            reward_winner(state, v, config.learning_rate);
            penalize_rival(state, v, r, x, m, config.learning_rate);
        }
        detail::update_centroids(data, assignment, state);

        const auto outcome = eliminate_clusterlets(state, config.elimination_threshold);
        if (outcome.any())
            for (std::size_t i = 0; i < n; ++i)
                if (!state.active[assignment[i]]) assignment[i] = detail::nearest_active(data.row(i), state, m);

        result.active_history.push_back(state.active_count());
        result.epochs_used = epoch + 1;
        if (assignment == previous) {
            result.converged = true;
            break;
        }
        previous = assignment;
        if (weighting == FeatureWeighting::on)
            m = feature_cluster_matrix_client(data, AffiliationMatrix{assignment, k0}, state.centroids);
    }
    if (!result.converged)
        log::info("run_cpl: no convergence after ", config.max_epochs, " epochs (", state.active_count(),
                  " active clusterlets)");

    result.affiliation = AffiliationMatrix{std::move(assignment), k0};
    detail::compact(data, state, result.affiliation);
    result.clusterlets = std::move(state);
    result.converged_k = result.affiliation.k;
    return result;
}

}  // namespace fedhire
