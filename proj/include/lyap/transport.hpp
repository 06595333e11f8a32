#pragma once

// Exact discrete optimal transport (1-Wasserstein) between weighted point
// clouds, via successive shortest augmenting paths on the bipartite
// transportation graph.

#include <vector>

namespace lyap {

// cost is an n x m row-major matrix; a (size n) and b (size m) are
// nonnegative weights with equal totals (tolerance 1e-9; weights are
// rebalanced exactly onto the last atom before solving).
// Returns the minimal total cost sum_{ij} plan_{ij} cost_{ij}.
double wasserstein1(const std::vector<double>& a, const std::vector<double>& b,
                    const std::vector<std::vector<double>>& cost);

}  // namespace lyap
