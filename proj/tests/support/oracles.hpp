#pragma once

// Independent reference implementations used by the unit tests and the
// acceptance runner. Deliberately naive: direct loops over objects, pairs
// and permutations, no shared code with the library beyond plain types.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <numeric>
#include <set>
#include <vector>

#include "fedhire/core.hpp"

namespace oracle {

using fedhire::Label;

inline double purity(const std::vector<Label>& pred, const std::vector<Label>& truth) {
    std::set<Label> clusters(pred.begin(), pred.end()), classes(truth.begin(), truth.end());
    double total = 0.0;
    for (Label c : clusters) {
        double best = 0.0;
        for (Label t : classes) {
            double hits = 0.0;
            for (std::size_t i = 0; i < pred.size(); ++i) hits += (pred[i] == c && truth[i] == t);
            best = std::max(best, hits);
        }
        total += best;
    }
    return total / static_cast<double>(pred.size());
}

/// Pair counting over every unordered pair.
inline double ari(const std::vector<Label>& pred, const std::vector<Label>& truth) {
    double n11 = 0, n10 = 0, n01 = 0, n00 = 0;
    for (std::size_t i = 0; i < pred.size(); ++i)
        for (std::size_t j = i + 1; j < pred.size(); ++j) {
            const bool sp = pred[i] == pred[j], st = truth[i] == truth[j];
            if (sp && st) ++n11;
            else if (sp) ++n10;
            else if (st) ++n01;
            else ++n00;
        }
    const double denom = (n00 + n01) * (n01 + n11) + (n00 + n10) * (n10 + n11);
    if (denom == 0.0) return 1.0;
    return 2.0 * (n00 * n11 - n01 * n10) / denom;
}

inline double nmi(const std::vector<Label>& pred, const std::vector<Label>& truth) {
    const auto n = static_cast<double>(pred.size());
    std::map<Label, double> pa, ta;
    std::map<std::pair<Label, Label>, double> joint;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        pa[pred[i]] += 1;
        ta[truth[i]] += 1;
        joint[{pred[i], truth[i]}] += 1;
    }
    if (pa.size() < 2 || ta.size() < 2) return 0.0;
    double hp = 0, ht = 0, mi = 0;
    for (auto [k, c] : pa) hp -= c / n * std::log(c / n);
    for (auto [k, c] : ta) ht -= c / n * std::log(c / n);
    for (auto [key, c] : joint) mi += c / n * std::log((c / n) / ((pa[key.first] / n) * (ta[key.second] / n)));
    return mi / ((hp + ht) / 2.0);
}

/// Every injective map from predicted clusters to classes (padded with
/// unmatched slots), best hit count.
inline double acc(const std::vector<Label>& pred, const std::vector<Label>& truth) {
    std::vector<Label> clusters, classes;
    for (Label l : std::set<Label>(pred.begin(), pred.end())) clusters.push_back(l);
    for (Label l : std::set<Label>(truth.begin(), truth.end())) classes.push_back(l);
    const std::size_t m = std::max(clusters.size(), classes.size());
    std::vector<long> slot(m);
    std::iota(slot.begin(), slot.end(), 0L);
    double best = 0.0;
    do {
        double hits = 0.0;
        for (std::size_t i = 0; i < pred.size(); ++i) {
            const auto ci = static_cast<std::size_t>(std::find(clusters.begin(), clusters.end(), pred[i]) - clusters.begin());
            const auto s = static_cast<std::size_t>(slot[ci]);
            if (s < classes.size() && classes[s] == truth[i]) hits += 1.0;
        }
        best = std::max(best, hits);
    } while (std::next_permutation(slot.begin(), slot.end()));
    return best / static_cast<double>(pred.size());
}

/// Hellinger distance between two normal densities by composite Simpson
/// quadrature of sqrt(p·q).
inline double hellinger_quadrature(double mu1, double var1, double mu2, double var2) {
    const double s = std::sqrt(std::max(var1, var2));
    const double lo = std::min(mu1, mu2) - 14.0 * s, hi = std::max(mu1, mu2) + 14.0 * s;
    const int steps = 40000;
    const double h = (hi - lo) / steps;
    const double pi = 3.14159265358979323846;
    auto f = [&](double x) {
        const double p = std::exp(-(x - mu1) * (x - mu1) / (2 * var1)) / std::sqrt(2 * pi * var1);
        const double q = std::exp(-(x - mu2) * (x - mu2) / (2 * var2)) / std::sqrt(2 * pi * var2);
        return std::sqrt(p * q);
    };
    double acc = f(lo) + f(hi);
    for (int t = 1; t < steps; ++t) acc += f(lo + t * h) * (t % 2 ? 4.0 : 2.0);
    const double bc = acc * h / 3.0;
    return std::sqrt(std::max(0.0, 1.0 - bc));
}

/// Client feature-cluster matrix straight from the definitions: two-pass
/// statistics on explicit member and complement lists.
inline std::vector<std::vector<double>> client_weights(const std::vector<std::vector<double>>& x,
                                                       const std::vector<std::size_t>& assign, std::size_t k,
                                                       const std::vector<std::vector<double>>& centroids) {
    const std::size_t d = x.front().size();
    std::vector<std::vector<double>> out(k, std::vector<double>(d, 1.0 / static_cast<double>(d)));
    for (std::size_t j = 0; j < k; ++j) {
        std::vector<std::size_t> in, rest;
        for (std::size_t i = 0; i < x.size(); ++i) (assign[i] == j ? in : rest).push_back(i);
        if (in.empty() || rest.empty()) continue;
        std::vector<double> prod(d);
        for (std::size_t z = 0; z < d; ++z) {
            auto stats = [&](const std::vector<std::size_t>& idx) {
                double mu = 0;
                for (auto i : idx) mu += x[i][z];
                mu /= static_cast<double>(idx.size());
                double var = 0;
                for (auto i : idx) var += (x[i][z] - mu) * (x[i][z] - mu);
                var = idx.size() > 1 ? var / static_cast<double>(idx.size() - 1) : 0.0;
                return std::pair{mu, std::max(var, 1e-12)};
            };
            const auto [m1, v1] = stats(in);
            const auto [m2, v2] = stats(rest);
            const double h2 = 1.0 - std::sqrt(2.0 * std::sqrt(v1 * v2) / (v1 + v2)) *
                                        std::exp(-(m1 - m2) * (m1 - m2) / (4.0 * (v1 + v2)));
            const double alpha = std::sqrt(std::max(0.0, h2));
            double b = 0;
            for (auto i : in) b += std::exp(-0.5 * (x[i][z] - centroids[j][z]) * (x[i][z] - centroids[j][z]));
            prod[z] = alpha * std::sqrt(b) / static_cast<double>(in.size());
        }
        const double s = std::accumulate(prod.begin(), prod.end(), 0.0);
        if (s > 0)
            for (std::size_t z = 0; z < d; ++z) out[j][z] = prod[z] / s;
    }
    return out;
}

/// Server feature-cluster matrix straight from the definitions over code
/// rows (1-based codes, one column per level).
inline std::vector<std::vector<double>> server_weights(const std::vector<std::vector<std::size_t>>& codes,
                                                       const std::vector<std::size_t>& level_ks,
                                                       const std::vector<std::size_t>& assign, std::size_t k) {
    const std::size_t depth = level_ks.size();
    std::vector<std::vector<double>> out(k, std::vector<double>(depth, 1.0 / static_cast<double>(depth)));
    for (std::size_t j = 0; j < k; ++j) {
        std::vector<std::size_t> in, rest;
        for (std::size_t i = 0; i < codes.size(); ++i) (assign[i] == j ? in : rest).push_back(i);
        if (in.empty() || rest.empty()) continue;
        std::vector<double> prod(depth);
        for (std::size_t t = 0; t < depth; ++t) {
            auto upsilon = [&](std::size_t v, const std::vector<std::size_t>& idx) {
                double c = 0;
                for (auto i : idx) c += codes[i][t] == v;
                return c;
            };
            double a = 0;
            for (std::size_t v = 1; v <= level_ks[t]; ++v) {
                const double diff = upsilon(v, in) / static_cast<double>(in.size()) -
                                    upsilon(v, rest) / static_cast<double>(rest.size());
                a += diff * diff;
            }
            double b = 0;
            for (auto i : in) b += upsilon(codes[i][t], in) / static_cast<double>(in.size());
            prod[t] = std::sqrt(a) / std::sqrt(2.0) * b / static_cast<double>(in.size());
        }
        const double s = std::accumulate(prod.begin(), prod.end(), 0.0);
        if (s > 0)
            for (std::size_t t = 0; t < depth; ++t) out[j][t] = prod[t] / s;
    }
    return out;
}

}  // namespace oracle
