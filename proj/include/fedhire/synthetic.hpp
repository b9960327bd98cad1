#pragma once

// Gaussian test data generators used by the benchmark and the test suites.

#include <cstddef>
#include <cstdint>
#include <vector>

#include "fedhire/core.hpp"
#include "fedhire/rng.hpp"

namespace fedhire::synthetic {

/// `sizes[c]` isotropic Gaussian samples around row c of `centers`.
/// Labels are the blob index; rows are grouped blob by blob.
inline DataMatrix gaussian_blobs(const Matrix& centers, const std::vector<std::size_t>& sizes, double sigma,
                                 std::uint64_t seed) {
    if (sizes.size() != centers.rows()) throw InvalidArgument("gaussian_blobs: one size per center required");
    Rng rng(seed);
    Matrix values;
    std::vector<Label> labels;
    std::vector<double> point(centers.cols());
    for (std::size_t c = 0; c < centers.rows(); ++c)
        for (std::size_t i = 0; i < sizes[c]; ++i) {
            for (std::size_t z = 0; z < centers.cols(); ++z) point[z] = centers(c, z) + sigma * rng.normal();
            values.append_row(point);
            labels.push_back(static_cast<Label>(c));
        }
    return DataMatrix(std::move(values), std::move(labels));
}

/// n points from k equally weighted Gaussians in d dimensions; centers are
/// drawn uniformly from [0.1, 0.9]^d.
inline DataMatrix gaussian_mixture(std::size_t n, std::size_t d, std::size_t k, double sigma, std::uint64_t seed) {
    if (k == 0) throw InvalidArgument("gaussian_mixture: need at least one component");
    Rng rng(derive_seed(seed, 0xC3));
    Matrix centers(k, d);
    for (std::size_t c = 0; c < k; ++c)
        for (std::size_t z = 0; z < d; ++z) centers(c, z) = 0.1 + 0.8 * rng.uniform();
    std::vector<std::size_t> sizes(k, n / k);
    for (std::size_t c = 0; c < n % k; ++c) ++sizes[c];
    return gaussian_blobs(centers, sizes, sigma, seed);
}

}  // namespace fedhire::synthetic
