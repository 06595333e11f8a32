#include "lyap/transport.hpp"

#include <cmath>
#include <deque>
#include <limits>
#include <stdexcept>

namespace lyap {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Min-cost flow on the bipartite transportation graph, successive shortest
// paths with a label-correcting (SPFA) search so the negative reduced costs
// produced by backward arcs are handled without potentials.
struct Solver {
  int n, m;
  const std::vector<std::vector<double>>& cost;
  std::vector<double> supply, demand;
  std::vector<std::vector<double>> flow;

  Solver(std::vector<double> a, std::vector<double> b,
         const std::vector<std::vector<double>>& c)
      : n(int(a.size())), m(int(b.size())), cost(c), supply(std::move(a)),
        demand(std::move(b)), flow(std::size_t(n), std::vector<double>(std::size_t(m), 0.0)) {}

  double run() {
    double total = 0.0;
    while (true) {
      int src = -1;
      for (int i = 0; i < n; ++i)
        if (supply[std::size_t(i)] > 1e-15) { src = i; break; }
      if (src < 0) break;

      // Shortest path from src over arcs i->j (cost c_ij) and j->i (cost
      // -c_ij, usable when flow_ij > 0), to any j with remaining demand.
      std::vector<double> dist_l(std::size_t(n), kInf), dist_r(std::size_t(m), kInf);
      std::vector<int> pred_r(std::size_t(m), -1), pred_l(std::size_t(n), -1);
      std::vector<bool> in_queue_l(std::size_t(n), false), in_queue_r(std::size_t(m), false);
      dist_l[std::size_t(src)] = 0.0;
      std::deque<int> queue;  // encode left node i as i, right node j as n + j
      queue.push_back(src);
      in_queue_l[std::size_t(src)] = true;
      while (!queue.empty()) {
        const int node = queue.front();
        queue.pop_front();
        if (node < n) {
          in_queue_l[std::size_t(node)] = false;
          const double base = dist_l[std::size_t(node)];
          for (int j = 0; j < m; ++j) {
            const double nd = base + cost[std::size_t(node)][std::size_t(j)];
            if (nd < dist_r[std::size_t(j)] - 1e-15) {
              dist_r[std::size_t(j)] = nd;
              pred_r[std::size_t(j)] = node;
              if (!in_queue_r[std::size_t(j)]) {
                queue.push_back(n + j);
                in_queue_r[std::size_t(j)] = true;
              }
            }
          }
        } else {
          const int j = node - n;
          in_queue_r[std::size_t(j)] = false;
          const double base = dist_r[std::size_t(j)];
          for (int i = 0; i < n; ++i) {
            if (flow[std::size_t(i)][std::size_t(j)] <= 1e-15) continue;
            const double nd = base - cost[std::size_t(i)][std::size_t(j)];
            if (nd < dist_l[std::size_t(i)] - 1e-15) {
              dist_l[std::size_t(i)] = nd;
              pred_l[std::size_t(i)] = j;
              if (!in_queue_l[std::size_t(i)]) {
                queue.push_back(i);
                in_queue_l[std::size_t(i)] = true;
              }
            }
          }
        }
      }

      int best_j = -1;
      double best = kInf;
      for (int j = 0; j < m; ++j)
        if (demand[std::size_t(j)] > 1e-15 && dist_r[std::size_t(j)] < best) {
          best = dist_r[std::size_t(j)];
          best_j = j;
        }
      if (best_j < 0) throw std::runtime_error("wasserstein1: unbalanced problem");

      // Bottleneck along the augmenting path src -> ... -> best_j.
      double push = std::min(supply[std::size_t(src)], demand[std::size_t(best_j)]);
      for (int j = best_j;;) {
        const int i = pred_r[std::size_t(j)];
        if (i == src) break;
        const int pj = pred_l[std::size_t(i)];
        push = std::min(push, flow[std::size_t(i)][std::size_t(pj)]);
        j = pj;
      }
      for (int j = best_j;;) {
        const int i = pred_r[std::size_t(j)];
        flow[std::size_t(i)][std::size_t(j)] += push;
        total += push * cost[std::size_t(i)][std::size_t(j)];
        if (i == src) break;
        const int pj = pred_l[std::size_t(i)];
        flow[std::size_t(i)][std::size_t(pj)] -= push;
        total -= push * cost[std::size_t(i)][std::size_t(pj)];
        j = pj;
      }
      supply[std::size_t(src)] -= push;
      demand[std::size_t(best_j)] -= push;
    }
    return total;
  }
};

}  // namespace

double wasserstein1(const std::vector<double>& a, const std::vector<double>& b,
                    const std::vector<std::vector<double>>& cost) {
  if (a.empty() || b.empty()) throw std::invalid_argument("wasserstein1: empty marginal");
  if (cost.size() != a.size()) throw std::invalid_argument("wasserstein1: cost shape");
  for (const auto& row : cost)
    if (row.size() != b.size()) throw std::invalid_argument("wasserstein1: cost shape");
  double sa = 0.0, sb = 0.0;
  for (double w : a) sa += w;
  for (double w : b) sb += w;
  if (std::abs(sa - sb) > 1e-9 * std::max(1.0, std::max(sa, sb)))
    throw std::invalid_argument("wasserstein1: marginal masses differ");
  std::vector<double> aa = a, bb = b;
  bb.back() += sa - sb;  // exact rebalance of the fp residue
  if (bb.back() < 0) {
    aa.back() -= sa - sb;
    bb.back() = b.back();
  }
  return Solver(std::move(aa), std::move(bb), cost).run();
}

}  // namespace lyap
