#pragma once

#include "dissimilarity_matrix.hpp"
#include "error.hpp"
#include "mds.hpp"
#include "parallel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <queue>
#include <string>
#include <vector>

namespace fmds {

struct Edge
{
  std::size_t to;
  double weight;
};

//! Undirected weighted graph on the items of a dissimilarity matrix.
//! Edges join i != j with delta_ij <= radius (radius graph) or one of them
//! among the other's k nearest (k-NN graph, symmetrized by union). Items at
//! dissimilarity 0 are joined by zero-weight edges.
struct NeighborhoodGraph
{
  std::vector<std::string> labels;
  double radius = 0.0;       // radius graphs; +inf for k-NN graphs
  std::size_t knn = 0;       // k-NN graphs; 0 for radius graphs
  std::vector<std::vector<Edge>> adjacency;
  std::vector<std::size_t> component_ids;
  std::size_t component_count = 0;

  std::size_t size() const { return labels.size(); }
  std::size_t edge_count() const
  {
    std::size_t s = 0;
    for (const auto& a : adjacency)
      s += a.size();
    return s / 2;
  }
  bool empty() const { return edge_count() == 0; }
  bool connected() const { return component_count <= 1; }
  std::size_t max_degree() const
  {
    std::size_t m = 0;
    for (const auto& a : adjacency)
      m = std::max(m, a.size());
    return m;
  }

  //! Member indices per component, components ordered by their smallest member.
  std::vector<std::vector<std::size_t>> components() const
  {
    std::vector<std::vector<std::size_t>> out(component_count);
    for (std::size_t i = 0; i < size(); ++i)
      out[component_ids[i]].push_back(i);
    return out;
  }
};

namespace detail {

struct UnionFind
{
  std::vector<std::size_t> parent, rank;
  explicit UnionFind(std::size_t n)
    : parent(n)
    , rank(n, 0)
  {
    std::iota(parent.begin(), parent.end(), 0);
  }
  std::size_t find(std::size_t x)
  {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  }
  void unite(std::size_t a, std::size_t b)
  {
    a = find(a);
    b = find(b);
    if (a == b)
      return;
    if (rank[a] < rank[b])
      std::swap(a, b);
    parent[b] = a;
    if (rank[a] == rank[b])
      ++rank[a];
  }
};

//! Labels components 0, 1, ... in order of their smallest member.
inline void label_components(NeighborhoodGraph& g)
{
  UnionFind uf(g.size());
  for (std::size_t i = 0; i < g.size(); ++i)
    for (const auto& e : g.adjacency[i])
      uf.unite(i, e.to);
  std::vector<std::size_t> root_id(g.size(), std::numeric_limits<std::size_t>::max());
  g.component_ids.assign(g.size(), 0);
  g.component_count = 0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    std::size_t r = uf.find(i);
    if (root_id[r] == std::numeric_limits<std::size_t>::max())
      root_id[r] = g.component_count++;
    g.component_ids[i] = root_id[r];
  }
}

} // namespace detail

inline NeighborhoodGraph build_graph(const DissimilarityMatrix& d, double r)
{
  if (!(r > 0.0))
    throw DomainError("build_graph: radius must be positive");
  NeighborhoodGraph g;
  g.labels = d.labels;
  g.radius = r;
  g.adjacency.resize(d.size());
  for (std::size_t i = 0; i < d.size(); ++i)
    for (std::size_t j = i + 1; j < d.size(); ++j) {
      double w = d.values(i, j);
      if (w <= r) {
        g.adjacency[i].push_back({ j, w });
        g.adjacency[j].push_back({ i, w });
      }
    }
  detail::label_components(g);
  return g;
}

//! k-NN graph: i ~ j when j is among i's k nearest or i among j's (ties
//! broken by index). Not part of the basic radius construction.
inline NeighborhoodGraph build_knn_graph(const DissimilarityMatrix& d, std::size_t k)
{
  if (k < 1)
    throw DomainError("build_knn_graph: k must be >= 1");
  const std::size_t n = d.size();
  std::vector<std::vector<char>> adj(n, std::vector<char>(n, 0));
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return d.values(i, a) < d.values(i, b); });
    std::size_t taken = 0;
    for (std::size_t j : order) {
      if (taken == k)
        break;
      if (j == i || !std::isfinite(d.values(i, j)))
        continue;
      adj[i][j] = adj[j][i] = 1;
      ++taken;
    }
  }
  NeighborhoodGraph g;
  g.labels = d.labels;
  g.radius = inf;
  g.knn = k;
  g.adjacency.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (adj[i][j])
        g.adjacency[i].push_back({ j, d.values(i, j) });
  detail::label_components(g);
  return g;
}

//! Dijkstra from one source; +inf for unreachable nodes.
inline std::vector<double> single_source_paths(const NeighborhoodGraph& g, std::size_t src)
{
  std::vector<double> dist(g.size(), inf);
  using Item = std::pair<double, std::size_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
  dist[src] = 0.0;
  pq.push({ 0.0, src });
  while (!pq.empty()) {
    auto [du, u] = pq.top();
    pq.pop();
    if (du > dist[u])
      continue;
    for (const auto& e : g.adjacency[u]) {
      double nd = du + e.weight;
      if (nd < dist[e.to]) {
        dist[e.to] = nd;
        pq.push({ nd, e.to });
      }
    }
  }
  return dist;
}

//! All-pairs graph geodesics, one Dijkstra run per source. Symmetric
//! exactly: entry (i, j) for i < j is taken from the run started at i.
inline DissimilarityMatrix shortest_paths(const NeighborhoodGraph& g)
{
  const std::size_t n = g.size();
  DissimilarityMatrix m;
  m.labels = g.labels;
  m.values = Matrix::Zero(n, n);
  parallel_for(n, [&](std::size_t i) {
    auto d = single_source_paths(g, i);
    for (std::size_t j = i + 1; j < n; ++j)
      m.values(i, j) = d[j];
  });
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      m.values(j, i) = m.values(i, j);
  return m;
}

//! Smallest radius giving a connected graph: the largest edge of a minimum
//! spanning tree (Prim, O(n^2)). +inf when some pair is at infinite distance.
inline double smallest_connecting_radius(const DissimilarityMatrix& d)
{
  const std::size_t n = d.size();
  if (n < 2)
    return 0.0;
  std::vector<double> best(n, inf);
  std::vector<char> in(n, 0);
  best[0] = 0.0;
  double r = 0.0;
  for (std::size_t step = 0; step < n; ++step) {
    std::size_t u = n;
    for (std::size_t i = 0; i < n; ++i)
      if (!in[i] && (u == n || best[i] < best[u]))
        u = i;
    in[u] = 1;
    r = std::max(r, best[u]);
    for (std::size_t v = 0; v < n; ++v)
      if (!in[v])
        best[v] = std::min(best[v], d.values(u, v));
  }
  return r;
}

enum class DisconnectionPolicy
{
  Error,
  LargestComponent
};

struct IsomapDiagnostics
{
  std::size_t component_count = 0;
  std::size_t max_degree = 0;
  std::size_t edge_count = 0;
  double far_pair_fraction = 0.0; // pairs more than 3 hops apart
  std::vector<std::string> dropped_labels;
};

struct IsomapResult
{
  Embedding embedding;
  DissimilarityMatrix geodesics;
  IsomapDiagnostics diagnostics;
};

//! Fraction of connected unordered pairs whose hop distance exceeds `hops`.
inline double far_pair_fraction(const NeighborhoodGraph& g, std::size_t hops = 3)
{
  const std::size_t n = g.size();
  std::vector<std::size_t> far(n, 0), reach(n, 0);
  parallel_for(n, [&](std::size_t s) {
    std::vector<std::size_t> h(n, std::numeric_limits<std::size_t>::max());
    std::queue<std::size_t> q;
    h[s] = 0;
    q.push(s);
    while (!q.empty()) {
      auto u = q.front();
      q.pop();
      for (const auto& e : g.adjacency[u])
        if (h[e.to] == std::numeric_limits<std::size_t>::max()) {
          h[e.to] = h[u] + 1;
          q.push(e.to);
        }
    }
    for (std::size_t t = s + 1; t < n; ++t)
      if (h[t] != std::numeric_limits<std::size_t>::max()) {
        ++reach[s];
        if (h[t] > hops)
          ++far[s];
      }
  });
  std::size_t f = std::accumulate(far.begin(), far.end(), std::size_t{ 0 });
  std::size_t r = std::accumulate(reach.begin(), reach.end(), std::size_t{ 0 });
  return r ? static_cast<double>(f) / static_cast<double>(r) : 0.0;
}

namespace detail {

inline std::string describe_components(const NeighborhoodGraph& g)
{
  std::string out;
  auto comps = g.components();
  for (std::size_t c = 0; c < comps.size(); ++c) {
    if (c == 8) {
      out += "; ... (" + std::to_string(comps.size() - 8) + " more)";
      break;
    }
    out += (c ? "; " : "") + std::string("component ") + std::to_string(c) + " {";
    for (std::size_t k = 0; k < comps[c].size(); ++k) {
      if (k == 6) {
        out += ", ... " + std::to_string(comps[c].size()) + " items";
        break;
      }
      out += (k ? ", " : "") + g.labels[comps[c][k]];
    }
    out += "}";
  }
  return out;
}

inline IsomapResult isomap_from_graph(const NeighborhoodGraph& g_in, int d_e,
                                      DisconnectionPolicy policy)
{
  IsomapResult res;
  res.diagnostics.component_count = g_in.component_count;
  const NeighborhoodGraph* g = &g_in;
  NeighborhoodGraph sub;
  if (!g_in.connected()) {
    if (policy == DisconnectionPolicy::Error)
      throw Error("neighborhood graph is disconnected (" + std::to_string(g_in.component_count) +
                  " components): " + describe_components(g_in));
    auto comps = g_in.components();
    std::size_t keep = 0;
    for (std::size_t c = 1; c < comps.size(); ++c)
      if (comps[c].size() > comps[keep].size())
        keep = c;
    std::vector<std::size_t> index(g_in.size(), std::numeric_limits<std::size_t>::max());
    for (std::size_t k = 0; k < comps[keep].size(); ++k)
      index[comps[keep][k]] = k;
    sub.radius = g_in.radius;
    sub.knn = g_in.knn;
    for (std::size_t i : comps[keep])
      sub.labels.push_back(g_in.labels[i]);
    sub.adjacency.resize(comps[keep].size());
    for (std::size_t i : comps[keep])
      for (const auto& e : g_in.adjacency[i])
        sub.adjacency[index[i]].push_back({ index[e.to], e.weight });
    label_components(sub);
    for (std::size_t i = 0; i < g_in.size(); ++i)
      if (index[i] == std::numeric_limits<std::size_t>::max())
        res.diagnostics.dropped_labels.push_back(g_in.labels[i]);
    g = &sub;
  }
  res.diagnostics.max_degree = g->max_degree();
  res.diagnostics.edge_count = g->edge_count();
  res.diagnostics.far_pair_fraction = far_pair_fraction(*g);
  res.geodesics = shortest_paths(*g);
  res.embedding = classical_scaling(res.geodesics, d_e);
  return res;
}

} // namespace detail

//! Radius graph, graph geodesics, then classical scaling of the geodesics.
inline IsomapResult isomap_embed(const DissimilarityMatrix& d, double r, int d_e,
                                 DisconnectionPolicy policy = DisconnectionPolicy::Error)
{
  return detail::isomap_from_graph(build_graph(d, r), d_e, policy);
}

inline IsomapResult isomap_embed_knn(const DissimilarityMatrix& d, std::size_t k, int d_e,
                                     DisconnectionPolicy policy = DisconnectionPolicy::Error)
{
  return detail::isomap_from_graph(build_knn_graph(d, k), d_e, policy);
}

//! Edge list `i,j,weight` with i < j (node indices).
inline void write_edge_list(std::ostream& os, const NeighborhoodGraph& g)
{
  os << "i,j,weight\n";
  for (std::size_t i = 0; i < g.size(); ++i)
    for (const auto& e : g.adjacency[i])
      if (i < e.to)
        os << i << ',' << e.to << ',' << format_double(e.weight) << '\n';
}

inline void write_edge_list(const std::string& path, const NeighborhoodGraph& g)
{
  std::ofstream os(path, std::ios::binary);
  if (!os)
    throw Error("cannot open '" + path + "' for writing");
  write_edge_list(os, g);
}

} // namespace fmds
