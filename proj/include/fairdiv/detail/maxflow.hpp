// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstddef>
#include <limits>
#include <queue>
#include <vector>

#include "fairdiv/scalar.hpp"

namespace fairdiv::detail {

/// Dinic max-flow over scalar capacities. Residual capacities at or below
/// `eps` are treated as saturated (eps is 0 for exact scalars).
template <typename T>
class MaxFlow {
 public:
  struct Edge {
    std::size_t to;
    std::size_t rev;
    T cap;
    T flow;
  };

  MaxFlow(std::size_t nodes, T eps) : adj_(nodes), eps_(std::move(eps)) {}

  /// Returns an edge handle usable with flow_on().
  std::pair<std::size_t, std::size_t> add_edge(std::size_t from, std::size_t to, const T& cap) {
    adj_[from].push_back(Edge{to, adj_[to].size(), cap, T{0}});
    adj_[to].push_back(Edge{from, adj_[from].size() - 1, T{0}, T{0}});
    return {from, adj_[from].size() - 1};
  }

  const T& flow_on(std::pair<std::size_t, std::size_t> handle) const {
    return adj_[handle.first][handle.second].flow;
  }

  T run(std::size_t source, std::size_t sink) {
    T total{0};
    while (bfs(source, sink)) {
      next_.assign(adj_.size(), 0);
      for (;;) {
        T pushed = dfs(source, sink, T{-1});
        if (!(pushed > eps_)) break;
        total += pushed;
      }
    }
    return total;
  }

 private:
  T residual(const Edge& e) const { return e.cap - e.flow; }

  bool bfs(std::size_t source, std::size_t sink) {
    level_.assign(adj_.size(), kUnset);
    level_[source] = 0;
    std::queue<std::size_t> q;
    q.push(source);
    while (!q.empty()) {
      const std::size_t u = q.front();
      q.pop();
      for (const Edge& e : adj_[u])
        if (level_[e.to] == kUnset && residual(e) > eps_) {
          level_[e.to] = level_[u] + 1;
          q.push(e.to);
        }
    }
    return level_[sink] != kUnset;
  }

  // `limit` < 0 means unbounded.
  T dfs(std::size_t u, std::size_t sink, T limit) {
    if (u == sink) return limit;
    for (std::size_t& i = next_[u]; i < adj_[u].size(); ++i) {
      Edge& e = adj_[u][i];
      if (level_[e.to] != level_[u] + 1 || !(residual(e) > eps_)) continue;
      T room = residual(e);
      if (limit >= 0 && limit < room) room = limit;
      T got = dfs(e.to, sink, room);
      if (got > eps_) {
        e.flow += got;
        adj_[e.to][e.rev].flow -= got;
        return got;
      }
    }
    return T{0};
  }

  static constexpr std::size_t kUnset = std::numeric_limits<std::size_t>::max();
  std::vector<std::vector<Edge>> adj_;
  std::vector<std::size_t> level_;
  std::vector<std::size_t> next_;
  T eps_;
};

}  // namespace fairdiv::detail
