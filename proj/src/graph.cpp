#include "coopgait/graph.hpp"

#include <algorithm>
#include <stdexcept>

namespace coopgait {

GaitGraph::GaitGraph(std::vector<DomainSpec> domains, std::vector<int> successor, std::vector<ResetKind> resets)
    : domains_(std::move(domains)), successor_(std::move(successor)), resets_(std::move(resets)) {
  const size_t n = domains_.size();
  if (n == 0) throw std::invalid_argument("gait graph has no domains");
  if (successor_.size() != n || resets_.size() != n)
    throw std::invalid_argument("gait graph: one outgoing edge per domain required");
  std::vector<int> indegree(n, 0);
  for (int s : successor_) {
    if (s < 0 || static_cast<size_t>(s) >= n) throw std::invalid_argument("gait graph: edge to unknown domain");
    ++indegree[static_cast<size_t>(s)];
  }
  for (int d : indegree)
    if (d != 1) throw std::invalid_argument("gait graph: every domain needs in-degree 1");
  position_.assign(n, -1);
  int v = 0;
  for (size_t k = 0; k < n; ++k) {
    if (position_[static_cast<size_t>(v)] >= 0) throw std::invalid_argument("gait graph is not a single cycle");
    position_[static_cast<size_t>(v)] = static_cast<int>(k);
    v = successor_[static_cast<size_t>(v)];
  }
  if (v != 0) throw std::invalid_argument("gait graph is not a single cycle");
}

GaitGraph GaitGraph::cycle(std::vector<DomainSpec> domains, std::vector<ResetKind> resets) {
  const int n = static_cast<int>(domains.size());
  std::vector<int> succ(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) succ[static_cast<size_t>(i)] = (i + 1) % n;
  return GaitGraph(std::move(domains), std::move(succ), std::move(resets));
}

GaitGraph plain_cycle(int n) {
  std::vector<DomainSpec> d(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) d[static_cast<size_t>(i)].name = "D" + std::to_string(i + 1);
  return GaitGraph::cycle(std::move(d), std::vector<ResetKind>(static_cast<size_t>(n), ResetKind::kIdentity));
}

int ProductGraph::index(const ProductVertex& p) const {
  auto it = std::lower_bound(vertices.begin(), vertices.end(), p);
  if (it == vertices.end() || !(*it == p)) return -1;
  return static_cast<int>(it - vertices.begin());
}

int classify_edge(const GaitGraph& g, const ProductVertex& a, const ProductVertex& b) {
  if (a.v == b.v && g.has_edge(a.w, b.w)) return 1;
  if (a.w == b.w && g.has_edge(a.v, b.v)) return 2;
  if (g.has_edge(a.v, b.v) && g.has_edge(a.w, b.w)) return 3;
  return 0;
}

ProductGraph strong_product(const GaitGraph& g) {
  ProductGraph p;
  const int n = g.size();
  for (int v = 0; v < n; ++v)
    for (int w = 0; w < n; ++w) p.vertices.push_back({v, w});
  for (const auto& from : p.vertices) {
    const int nv = g.next_domain(from.v);
    const int nw = g.next_domain(from.w);
    const ProductVertex candidates[3] = {{from.v, nw}, {nv, from.w}, {nv, nw}};
    std::vector<ProductVertex> seen;
    for (const auto& to : candidates) {
      if (std::find(seen.begin(), seen.end(), to) != seen.end()) continue;
      seen.push_back(to);
      p.edges.push_back({from, to, classify_edge(g, from, to)});
    }
  }
  std::sort(p.edges.begin(), p.edges.end(), [](const ProductEdge& a, const ProductEdge& b) {
    return std::tie(a.from, a.to) < std::tie(b.from, b.to);
  });
  return p;
}

}  // namespace coopgait
