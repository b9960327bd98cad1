#pragma once

// External validity indices: purity, adjusted Rand index, normalized mutual
// information and clustering accuracy. Labels are arbitrary integers; any
// value (kUnassigned included) is treated as just another cluster id.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <unordered_map>
#include <vector>

#include "fedhire/core.hpp"
#include "fedhire/errors.hpp"

namespace fedhire::metrics {

/// Rows are predicted clusters, columns true classes, both densely
/// renumbered in order of first appearance.
struct Contingency {
    std::size_t rows = 0, cols = 0, n = 0;
    std::vector<double> counts;  // rows × cols
    std::vector<double> row_sums, col_sums;

    double at(std::size_t r, std::size_t c) const { return counts[r * cols + c]; }
};

namespace detail {

inline std::vector<std::size_t> dense_ids(std::span<const Label> labels, std::size_t& distinct) {
    std::unordered_map<Label, std::size_t> ids;
    std::vector<std::size_t> out;
    out.reserve(labels.size());
    for (Label l : labels) out.push_back(ids.try_emplace(l, ids.size()).first->second);
    distinct = ids.size();
    return out;
}

inline double choose2(double x) { return x * (x - 1.0) / 2.0; }

}  // namespace detail

inline Contingency contingency(std::span<const Label> predicted, std::span<const Label> truth) {
    if (predicted.size() != truth.size()) throw InvalidArgument("metrics: label vectors differ in length");
    if (predicted.empty()) throw InvalidArgument("metrics: empty label vectors");
    Contingency t;
    const auto p = detail::dense_ids(predicted, t.rows);
    const auto c = detail::dense_ids(truth, t.cols);
    t.n = predicted.size();
    t.counts.assign(t.rows * t.cols, 0.0);
    t.row_sums.assign(t.rows, 0.0);
    t.col_sums.assign(t.cols, 0.0);
    for (std::size_t i = 0; i < t.n; ++i) {
        t.counts[p[i] * t.cols + c[i]] += 1.0;
        t.row_sums[p[i]] += 1.0;
        t.col_sums[c[i]] += 1.0;
    }
    return t;
}

inline double purity(std::span<const Label> predicted, std::span<const Label> truth) {
    const auto t = contingency(predicted, truth);
    double total = 0.0;
    for (std::size_t r = 0; r < t.rows; ++r) {
        double best = 0.0;
        for (std::size_t c = 0; c < t.cols; ++c) best = std::max(best, t.at(r, c));
        total += best;
    }
    return total / static_cast<double>(t.n);
}

inline double ari(std::span<const Label> predicted, std::span<const Label> truth) {
    const auto t = contingency(predicted, truth);
    if (t.n < 2) throw InvalidArgument("ari: need at least two objects");
    double index = 0.0, a = 0.0, b = 0.0;
    for (double v : t.counts) index += detail::choose2(v);
    for (double v : t.row_sums) a += detail::choose2(v);
    for (double v : t.col_sums) b += detail::choose2(v);
    const double expected = a * b / detail::choose2(static_cast<double>(t.n));
    const double max_index = 0.5 * (a + b);
    // both partitions trivial in the same way (all together or all apart)
    if (max_index == expected) return 1.0;
    return (index - expected) / (max_index - expected);
}

/// Mutual information over the arithmetic mean of the two entropies; 0 when
/// either partition has a single cluster.
inline double nmi(std::span<const Label> predicted, std::span<const Label> truth) {
    const auto t = contingency(predicted, truth);
    const auto n = static_cast<double>(t.n);
    auto entropy = [n](const std::vector<double>& sums) {
        double h = 0.0;
        for (double s : sums)
            if (s > 0.0) h -= (s / n) * std::log(s / n);
        return h;
    };
    const double hp = entropy(t.row_sums), ht = entropy(t.col_sums);
    if (t.rows < 2 || t.cols < 2 || hp <= 0.0 || ht <= 0.0) return 0.0;
    double mi = 0.0;
    for (std::size_t r = 0; r < t.rows; ++r)
        for (std::size_t c = 0; c < t.cols; ++c) {
            const double v = t.at(r, c);
            if (v > 0.0) mi += (v / n) * std::log(v * n / (t.row_sums[r] * t.col_sums[c]));
        }
    return std::clamp(mi / (0.5 * (hp + ht)), 0.0, 1.0);
}

/// Minimum-cost assignment on a square cost matrix (Hungarian method with
/// potentials, O(m³)). Returns the column assigned to each row.
inline std::vector<std::size_t> solve_assignment(const std::vector<double>& cost, std::size_t m) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(m + 1, 0.0), v(m + 1, 0.0);
    std::vector<std::size_t> p(m + 1, 0), way(m + 1, 0);
    for (std::size_t i = 1; i <= m; ++i) {
        p[0] = i;
        std::size_t j0 = 0;
        std::vector<double> minv(m + 1, inf);
        std::vector<bool> used(m + 1, false);
        do {
            used[j0] = true;
            const std::size_t i0 = p[j0];
            double delta = inf;
            std::size_t j1 = 0;
            for (std::size_t j = 1; j <= m; ++j) {
                if (used[j]) continue;
                const double cur = cost[(i0 - 1) * m + (j - 1)] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= m; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const std::size_t j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<std::size_t> row_to_col(m, 0);
    for (std::size_t j = 1; j <= m; ++j)
        if (p[j] != 0) row_to_col[p[j] - 1] = j - 1;
    return row_to_col;
}

/// Fraction of objects correctly labeled under the best one-to-one mapping
/// from predicted clusters to classes.
inline double acc(std::span<const Label> predicted, std::span<const Label> truth) {
    const auto t = contingency(predicted, truth);
    const std::size_t m = std::max(t.rows, t.cols);
    std::vector<double> cost(m * m, 0.0);
    for (std::size_t r = 0; r < t.rows; ++r)
        for (std::size_t c = 0; c < t.cols; ++c) cost[r * m + c] = -t.at(r, c);
    const auto match = solve_assignment(cost, m);
    double hit = 0.0;
    for (std::size_t r = 0; r < t.rows; ++r)
        if (match[r] < t.cols) hit += t.at(r, match[r]);
    return hit / static_cast<double>(t.n);
}

struct Scores {
    double purity = 0.0, ari = 0.0, nmi = 0.0, acc = 0.0;
};

inline Scores evaluate(std::span<const Label> predicted, std::span<const Label> truth) {
    return {purity(predicted, truth), ari(predicted, truth), nmi(predicted, truth), acc(predicted, truth)};
}

}  // namespace fedhire::metrics
