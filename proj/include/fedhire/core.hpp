#pragma once

// Domain types shared by clients and server, plus the distance and
// feature-cluster importance primitives used by competitive learning.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fedhire/errors.hpp"
#include "fedhire/log.hpp"

namespace fedhire {

using Label = std::int64_t;

/// Label given to objects that could not be clustered (e.g. a skipped client).
inline constexpr Label kUnassigned = -1;

/// Dense row-major real matrix.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), values_(rows * cols, fill) {}
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> values)
        : rows_(rows), cols_(cols), values_(std::move(values)) {
        if (values_.size() != rows_ * cols_)
            throw InvalidArgument("Matrix: value count does not match shape");
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    bool empty() const noexcept { return values_.empty(); }

    std::span<double> row(std::size_t i) { return {values_.data() + i * cols_, cols_}; }
    std::span<const double> row(std::size_t i) const { return {values_.data() + i * cols_, cols_}; }

    double& operator()(std::size_t i, std::size_t j) { return values_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return values_[i * cols_ + j]; }

    std::span<const double> values() const noexcept { return values_; }

    void append_row(std::span<const double> r) {
        if (rows_ == 0 && cols_ == 0) cols_ = r.size();
        if (r.size() != cols_) throw InvalidArgument("Matrix: appended row has wrong width");
        values_.insert(values_.end(), r.begin(), r.end());
        ++rows_;
    }

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> values_;
};

/// n objects by d features, every entry finite. Labels are ground truth for
/// evaluation only; no clustering routine reads them.
class DataMatrix {
public:
    DataMatrix() = default;
    explicit DataMatrix(Matrix values, std::optional<std::vector<Label>> labels = std::nullopt)
        : values_(std::move(values)), labels_(std::move(labels)) {
        for (double v : values_.values())
            if (!std::isfinite(v)) throw InvalidArgument("DataMatrix: non-finite entry");
        if (labels_ && labels_->size() != values_.rows())
            throw InvalidArgument("DataMatrix: label count does not match object count");
    }

    std::size_t object_count() const noexcept { return values_.rows(); }
    std::size_t feature_count() const noexcept { return values_.cols(); }
    std::span<const double> row(std::size_t i) const { return values_.row(i); }
    const Matrix& values() const noexcept { return values_; }

    bool has_labels() const noexcept { return labels_.has_value(); }
    const std::vector<Label>& labels() const {
        if (!labels_) throw InvalidArgument("DataMatrix: no labels present");
        return *labels_;
    }

    /// Rows at `indices` (in that order), labels carried along when present.
    DataMatrix subset(std::span<const std::size_t> indices) const {
        Matrix m(indices.size(), feature_count());
        std::optional<std::vector<Label>> lab;
        if (labels_) lab.emplace();
        for (std::size_t r = 0; r < indices.size(); ++r) {
            if (indices[r] >= object_count()) throw InvalidArgument("DataMatrix::subset: index out of range");
            std::ranges::copy(row(indices[r]), m.row(r).begin());
            if (labels_) lab->push_back((*labels_)[indices[r]]);
        }
        return DataMatrix(std::move(m), std::move(lab));
    }

private:
    Matrix values_;
    std::optional<std::vector<Label>> labels_;
};

/// Hard object-to-cluster assignment: one index in [0, k) per object.
struct AffiliationMatrix {
    std::vector<std::size_t> assignments;
    std::size_t k = 0;

    std::size_t object_count() const noexcept { return assignments.size(); }

    void validate() const {
        for (std::size_t a : assignments)
            if (a >= k) throw InvalidArgument("AffiliationMatrix: assignment index out of range");
    }

    std::vector<std::size_t> cluster_sizes() const {
        std::vector<std::size_t> sizes(k, 0);
        for (std::size_t a : assignments) ++sizes[a];
        return sizes;
    }

    /// Dense binary export, one row per object.
    std::vector<std::vector<int>> to_binary() const {
        std::vector<std::vector<int>> q(assignments.size(), std::vector<int>(k, 0));
        for (std::size_t i = 0; i < assignments.size(); ++i) q[i][assignments[i]] = 1;
        return q;
    }

    friend bool operator==(const AffiliationMatrix&, const AffiliationMatrix&) = default;
};

/// k clusters by d features; each row is a distribution over features.
class FeatureClusterMatrix {
public:
    FeatureClusterMatrix() = default;

    static FeatureClusterMatrix uniform(std::size_t clusters, std::size_t features) {
        FeatureClusterMatrix m;
        m.entries_ = Matrix(clusters, features, features ? 1.0 / static_cast<double>(features) : 0.0);
        return m;
    }

    /// Takes ownership of `entries`; rows must already be normalized.
    static FeatureClusterMatrix from_entries(Matrix entries) {
        FeatureClusterMatrix m;
        m.entries_ = std::move(entries);
        return m;
    }

    std::size_t clusters() const noexcept { return entries_.rows(); }
    std::size_t features() const noexcept { return entries_.cols(); }
    std::span<const double> row(std::size_t j) const { return entries_.row(j); }
    double operator()(std::size_t j, std::size_t z) const { return entries_(j, z); }
    const Matrix& entries() const noexcept { return entries_; }

    /// Row j := a / sum(a), or uniform when the sum is not positive.
    /// Returns false when the uniform fallback was taken.
    bool set_row_normalized(std::size_t j, std::span<const double> a) {
        double total = 0.0;
        for (double v : a) total += v;
        auto out = entries_.row(j);
        if (!(total > 0.0) || !std::isfinite(total)) {
            std::ranges::fill(out, 1.0 / static_cast<double>(out.size()));
            return false;
        }
        for (std::size_t z = 0; z < a.size(); ++z) out[z] = a[z] / total;
        return true;
    }

    friend bool operator==(const FeatureClusterMatrix&, const FeatureClusterMatrix&) = default;

private:
    Matrix entries_;
};

// ---------------------------------------------------------------------------
// Normalization

/// Per-feature min-max transform to [0, 1]; constant features map to 0.
struct MinMaxScaler {
    std::vector<double> minimum;
    std::vector<double> range;  // max - min; 0 for constant features

    static MinMaxScaler fit(const Matrix& m) {
        MinMaxScaler s;
        s.minimum.assign(m.cols(), 0.0);
        s.range.assign(m.cols(), 0.0);
        if (m.rows() == 0) return s;
        std::vector<double> hi(m.cols());
        for (std::size_t z = 0; z < m.cols(); ++z) s.minimum[z] = hi[z] = m(0, z);
        for (std::size_t i = 1; i < m.rows(); ++i)
            for (std::size_t z = 0; z < m.cols(); ++z) {
                s.minimum[z] = std::min(s.minimum[z], m(i, z));
                hi[z] = std::max(hi[z], m(i, z));
            }
        for (std::size_t z = 0; z < m.cols(); ++z) s.range[z] = hi[z] - s.minimum[z];
        return s;
    }

    Matrix transform(const Matrix& m) const {
        Matrix out(m.rows(), m.cols());
        for (std::size_t i = 0; i < m.rows(); ++i)
            for (std::size_t z = 0; z < m.cols(); ++z)
                out(i, z) = range[z] > 0.0 ? (m(i, z) - minimum[z]) / range[z] : 0.0;
        return out;
    }

    Matrix inverse_transform(const Matrix& m) const {
        Matrix out(m.rows(), m.cols());
        for (std::size_t i = 0; i < m.rows(); ++i)
            for (std::size_t z = 0; z < m.cols(); ++z) out(i, z) = minimum[z] + m(i, z) * range[z];
        return out;
    }
};

inline DataMatrix normalize_min_max(const DataMatrix& data) {
    const auto scaler = MinMaxScaler::fit(data.values());
    std::optional<std::vector<Label>> labels;
    if (data.has_labels()) labels = data.labels();
    return DataMatrix(scaler.transform(data.values()), std::move(labels));
}

// ---------------------------------------------------------------------------
// Distance primitives

/// ||m ⊙ (x − c)||₂: a seminorm of the difference, so zero iff every
/// weighted coordinate agrees.
inline double weighted_distance(std::span<const double> x, std::span<const double> c,
                                std::span<const double> m_row) {
    if (x.size() != c.size() || x.size() != m_row.size())
        throw InvalidArgument("weighted_distance: dimension mismatch");
    double acc = 0.0;
    for (std::size_t z = 0; z < x.size(); ++z) {
        const double t = m_row[z] * (x[z] - c[z]);
        acc += t * t;
    }
    return std::sqrt(acc);
}

/// exp(−dist): the similarity that competitive learning maximizes.
inline double similarity_from_distance(double dist) {
    if (!(dist >= 0.0)) throw InvalidArgument("similarity_from_distance: negative distance");
    return std::exp(-dist);
}

inline constexpr double kVarianceFloor = 1e-12;

/// Hellinger distance between N(mu, sigma2) and N(mu_bar, sigma2_bar),
/// closed form. Variances are floored so degenerate clusters stay defined.
inline double gaussian_hellinger_alpha(double mu, double sigma2, double mu_bar, double sigma2_bar) {
    const double v1 = std::max(sigma2, kVarianceFloor);
    const double v2 = std::max(sigma2_bar, kVarianceFloor);
    const double sum = v1 + v2;
    const double bc = std::sqrt(2.0 * std::sqrt(v1) * std::sqrt(v2) / sum) *
                      std::exp(-(mu - mu_bar) * (mu - mu_bar) / (4.0 * sum));
    return std::sqrt(std::clamp(1.0 - bc, 0.0, 1.0));
}

/// (1/|C|)·sqrt(Σ_{x∈C} exp(−½(x_z − c_z)²)): compactness of a cluster
/// along feature z.
inline double beta_intra_client(const DataMatrix& data, std::span<const std::size_t> members,
                                std::span<const double> centroid, std::size_t z) {
    if (members.empty()) throw UndefinedCluster("beta_intra_client: empty cluster");
    if (z >= centroid.size() || centroid.size() != data.feature_count())
        throw InvalidArgument("beta_intra_client: feature index or centroid width mismatch");
    double acc = 0.0;
    for (std::size_t i : members) {
        const double diff = data.row(i)[z] - centroid[z];
        acc += std::exp(-0.5 * diff * diff);
    }
    return std::sqrt(acc) / static_cast<double>(members.size());
}

/// Client-side feature-cluster importance M: m_jz ∝ α_jz·β_jz, where α
/// compares feature z inside and outside cluster j (Gaussian Hellinger) and
/// β measures compactness around the centroid. Rows whose cluster is empty,
/// whose complement is empty, or whose products are all zero are uniform.
inline FeatureClusterMatrix feature_cluster_matrix_client(const DataMatrix& data,
                                                          const AffiliationMatrix& affiliation,
                                                          const Matrix& centroids) {
    const std::size_t n = data.object_count();
    const std::size_t d = data.feature_count();
    const std::size_t k = affiliation.k;
    if (affiliation.object_count() != n)
        throw InvalidArgument("feature_cluster_matrix_client: affiliation does not cover the data");
    if (centroids.rows() != k || centroids.cols() != d)
        throw InvalidArgument("feature_cluster_matrix_client: centroid matrix shape mismatch");
    affiliation.validate();

    std::vector<std::size_t> count(k, 0);
    Matrix mean(k, d), m2(k, d), beta_sum(k, d);
    std::vector<double> total_mean(d, 0.0), total_m2(d, 0.0);

    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t j = affiliation.assignments[i];
        ++count[j];
        auto x = data.row(i);
        for (std::size_t z = 0; z < d; ++z) {
            mean(j, z) += x[z];
            total_mean[z] += x[z];
        }
    }
    for (std::size_t j = 0; j < k; ++j)
        if (count[j] > 0)
            for (std::size_t z = 0; z < d; ++z) mean(j, z) /= static_cast<double>(count[j]);
    for (std::size_t z = 0; z < d; ++z) total_mean[z] /= static_cast<double>(n);

    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t j = affiliation.assignments[i];
        auto x = data.row(i);
        for (std::size_t z = 0; z < d; ++z) {
            const double dc = x[z] - mean(j, z);
            const double dt = x[z] - total_mean[z];
            const double db = x[z] - centroids(j, z);
            m2(j, z) += dc * dc;
            total_m2[z] += dt * dt;
            beta_sum(j, z) += std::exp(-0.5 * db * db);
        }
    }

    auto result = FeatureClusterMatrix::uniform(k, d);
    std::vector<double> products(d);
    std::size_t fallbacks = 0;
    for (std::size_t j = 0; j < k; ++j) {
        const std::size_t in = count[j];
        const std::size_t out = n - in;
        if (in == 0 || out == 0) continue;
        const auto nin = static_cast<double>(in);
        const auto nout = static_cast<double>(out);
        for (std::size_t z = 0; z < d; ++z) {
            // complement statistics recovered from the totals (pairwise-merge identity)
            const double mu_bar = (total_mean[z] * static_cast<double>(n) - mean(j, z) * nin) / nout;
            const double delta = mu_bar - mean(j, z);
            const double m2_bar =
                std::max(0.0, total_m2[z] - m2(j, z) - delta * delta * nin * nout / static_cast<double>(n));
            const double var_in = in > 1 ? m2(j, z) / (nin - 1.0) : 0.0;
            const double var_out = out > 1 ? m2_bar / (nout - 1.0) : 0.0;
            const double alpha = gaussian_hellinger_alpha(mean(j, z), var_in, mu_bar, var_out);
            const double beta = std::sqrt(beta_sum(j, z)) / nin;
            products[z] = alpha * beta;
        }
        if (!result.set_row_normalized(j, products)) ++fallbacks;
    }
    if (fallbacks > 0)
        log::debug("feature_cluster_matrix_client: ", fallbacks, " row(s) fell back to uniform weights");
    return result;
}

}  // namespace fedhire
