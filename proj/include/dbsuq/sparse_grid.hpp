#pragma once

// Nested Clenshaw-Curtis rules and isotropic Smolyak sparse grids on
// [-1, 1]^d, normalised for the uniform probability density.

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace dbsuq {

struct UnivariateRule {
    int level = 0;
    std::vector<double> nodes;    // ascending
    std::vector<double> weights;  // sum to 1
};

// level 0: {0}; level l >= 1: 2^l + 1 nodes -cos(pi k / 2^l).
UnivariateRule cc_rule(int level);

// Deepest hierarchy level used for exact point identification.
inline constexpr int kHierarchyDepth = 30;

// Position of node k of cc_rule(level) on the level-kHierarchyDepth hierarchy.
std::int64_t cc_hierarchy_index(int level, std::int64_t k);

struct SparseGridRule {
    int dim = 0;
    int level = 0;
    Eigen::MatrixXd points;  // K x dim
    std::vector<double> weights;
    // K x dim hierarchy indices (cc_hierarchy_index), used for exact merging.
    Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic> keys;

    std::size_t size() const { return weights.size(); }
};

SparseGridRule smolyak_rule(int dim, int level);

// For every point of `coarse`, the row index of the same point in `fine`.
// Throws if `coarse` is not nested in `fine`.
std::vector<std::size_t> embed_points(const SparseGridRule& coarse, const SparseGridRule& fine);

double integrate(const SparseGridRule& rule, std::span<const double> values);

struct Moments {
    double mean = 0.0;
    double variance = 0.0;
};

// Two-pass centred variance; tiny negatives from negative weights are
// clamped at 0 (threshold 1e-12 * mean^2).
Moments moments(const SparseGridRule& rule, std::span<const double> values);

}  // namespace dbsuq
