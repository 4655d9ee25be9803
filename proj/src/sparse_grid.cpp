#include "dbsuq/sparse_grid.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <stdexcept>
#include <string>

#include "dbsuq/errors.hpp"

namespace dbsuq {

namespace {

std::int64_t binomial(int n, int k)
{
    if (k < 0 || k > n) return 0;
    std::int64_t result = 1;
    for (int i = 1; i <= k; ++i) result = result * (n - k + i) / i;
    return result;
}

// Visits every multi-index i >= 0 with |i| == total.
template <class Visit>
void for_each_composition(int dim, int total, std::vector<int>& index, int pos, Visit&& visit)
{
    if (pos == dim - 1) {
        index[static_cast<std::size_t>(pos)] = total;
        visit(index);
        return;
    }
    for (int v = 0; v <= total; ++v) {
        index[static_cast<std::size_t>(pos)] = v;
        for_each_composition(dim, total - v, index, pos + 1, visit);
    }
}

}  // namespace

UnivariateRule cc_rule(int level)
{
    if (level < 0) throw std::invalid_argument("Clenshaw-Curtis level must be >= 0");
    if (level > 20) throw std::invalid_argument("Clenshaw-Curtis level too large");
    UnivariateRule rule;
    rule.level = level;
    if (level == 0) {
        rule.nodes = {0.0};
        rule.weights = {1.0};
        return rule;
    }
    const int n = (1 << level) + 1;
    const int m = n - 1;
    rule.nodes.resize(static_cast<std::size_t>(n));
    rule.weights.resize(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) {
        // Symmetric evaluation keeps x_k == -x_{m-k} and the centre exactly 0.
        double x;
        if (2 * k == m)
            x = 0.0;
        else if (2 * k < m)
            x = -std::cos(std::numbers::pi * k / m);
        else
            x = std::cos(std::numbers::pi * (m - k) / m);
        rule.nodes[static_cast<std::size_t>(k)] = x;
    }
    // Closed-form weights on [-1, 1] (Lebesgue), then halved.
    for (int k = 0; k < n; ++k) {
        const double theta = std::numbers::pi * k / m;
        double sum = 0.0;
        for (int j = 1; j <= m / 2; ++j) {
            const double b = (2 * j == m) ? 1.0 : 2.0;
            sum += b / (4.0 * j * j - 1.0) * std::cos(2.0 * j * theta);
        }
        const double c = (k == 0 || k == m) ? 1.0 : 2.0;
        rule.weights[static_cast<std::size_t>(k)] = 0.5 * c / m * (1.0 - sum);
    }
    for (int k = 0; k < n / 2; ++k) {
        const auto a = static_cast<std::size_t>(k);
        const auto b = static_cast<std::size_t>(m - k);
        const double w = 0.5 * (rule.weights[a] + rule.weights[b]);
        rule.weights[a] = rule.weights[b] = w;
    }
    return rule;
}

std::int64_t cc_hierarchy_index(int level, std::int64_t k)
{
    if (level == 0) return std::int64_t{1} << (kHierarchyDepth - 1);
    return k << (kHierarchyDepth - level);
}

SparseGridRule smolyak_rule(int dim, int level)
{
    if (dim < 1) throw std::invalid_argument("sparse grid dimension must be >= 1");
    if (level < 0) throw std::invalid_argument("sparse grid level must be >= 0");
    if (level > 12) throw std::invalid_argument("sparse grid level too large");

    std::vector<UnivariateRule> rules;
    for (int l = 0; l <= level; ++l) rules.push_back(cc_rule(l));

    // Combination technique over 0-based level multi-indices:
    //   sum_{max(0, q-d+1) <= |i| <= q} (-1)^(q-|i|) C(d-1, q-|i|) (U^i1 x ... x U^id).
    std::map<std::vector<std::int64_t>, double> merged;
    std::vector<int> index(static_cast<std::size_t>(dim));
    for (int total = std::max(0, level - dim + 1); total <= level; ++total) {
        const int gap = level - total;
        const double coeff = static_cast<double>((gap % 2 ? -1 : 1) * binomial(dim - 1, gap));
        for_each_composition(dim, total, index, 0, [&](const std::vector<int>& idx) {
            std::vector<std::size_t> counter(static_cast<std::size_t>(dim), 0);
            std::vector<std::int64_t> key(static_cast<std::size_t>(dim));
            for (;;) {
                double w = coeff;
                for (int d = 0; d < dim; ++d) {
                    const auto& r = rules[static_cast<std::size_t>(idx[static_cast<std::size_t>(d)])];
                    const auto k = counter[static_cast<std::size_t>(d)];
                    w *= r.weights[k];
                    key[static_cast<std::size_t>(d)] =
                        cc_hierarchy_index(r.level, static_cast<std::int64_t>(k));
                }
                merged[key] += w;
                int d = 0;
                for (; d < dim; ++d) {
                    auto& c = counter[static_cast<std::size_t>(d)];
                    const auto& r = rules[static_cast<std::size_t>(idx[static_cast<std::size_t>(d)])];
                    if (++c < r.nodes.size()) break;
                    c = 0;
                }
                if (d == dim) break;
            }
        });
    }

    // Node value from a hierarchy key, evaluated on the deepest level used.
    const auto& finest = rules.back();
    auto node_of = [&](std::int64_t key) {
        if (level == 0) return 0.0;
        const std::int64_t step = std::int64_t{1} << (kHierarchyDepth - level);
        return finest.nodes[static_cast<std::size_t>(key / step)];
    };

    SparseGridRule rule;
    rule.dim = dim;
    rule.level = level;
    const auto K = static_cast<Eigen::Index>(merged.size());
    rule.points.resize(K, dim);
    rule.keys.resize(K, dim);
    rule.weights.reserve(merged.size());
    Eigen::Index row = 0;
    for (const auto& [key, w] : merged) {
        for (int d = 0; d < dim; ++d) {
            rule.keys(row, d) = key[static_cast<std::size_t>(d)];
            rule.points(row, d) = node_of(key[static_cast<std::size_t>(d)]);
        }
        rule.weights.push_back(w);
        ++row;
    }
    return rule;
}

std::vector<std::size_t> embed_points(const SparseGridRule& coarse, const SparseGridRule& fine)
{
    if (coarse.dim != fine.dim) throw std::invalid_argument("embed_points: dimension mismatch");
    std::map<std::vector<std::int64_t>, std::size_t> lookup;
    for (Eigen::Index r = 0; r < fine.keys.rows(); ++r) {
        std::vector<std::int64_t> key(static_cast<std::size_t>(fine.dim));
        for (int d = 0; d < fine.dim; ++d) key[static_cast<std::size_t>(d)] = fine.keys(r, d);
        lookup.emplace(std::move(key), static_cast<std::size_t>(r));
    }
    std::vector<std::size_t> map;
    map.reserve(coarse.size());
    std::vector<std::int64_t> key(static_cast<std::size_t>(coarse.dim));
    for (Eigen::Index r = 0; r < coarse.keys.rows(); ++r) {
        for (int d = 0; d < coarse.dim; ++d) key[static_cast<std::size_t>(d)] = coarse.keys(r, d);
        const auto it = lookup.find(key);
        if (it == lookup.end())
            throw std::invalid_argument("embed_points: coarse grid is not nested in the fine grid");
        map.push_back(it->second);
    }
    return map;
}

double integrate(const SparseGridRule& rule, std::span<const double> values)
{
    if (values.size() != rule.size())
        throw std::invalid_argument("integrate: " + std::to_string(values.size()) +
                                    " values for " + std::to_string(rule.size()) + " points");
    double sum = 0.0;
    for (std::size_t k = 0; k < values.size(); ++k) sum += rule.weights[k] * values[k];
    return sum;
}

Moments moments(const SparseGridRule& rule, std::span<const double> values)
{
    Moments m;
    m.mean = integrate(rule, values);
    std::vector<double> centred(values.size());
    for (std::size_t k = 0; k < values.size(); ++k) {
        const double d = values[k] - m.mean;
        centred[k] = d * d;
    }
    m.variance = integrate(rule, centred);
    if (m.variance < 0.0) {
        if (-m.variance <= 1e-12 * m.mean * m.mean)
            m.variance = 0.0;
        else
            throw NumericalError("sparse-grid variance is negative (" +
                                 std::to_string(m.variance) + ")");
    }
    return m;
}

}  // namespace dbsuq
