// Influence graph extraction and the thresholded maximum weighted spanning forest.
#pragma once

#include "colab/types.hpp"

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace colab {

struct Edge {
  int src = 0;
  int dst = 0;
  double weight = 0.0;
  bool operator==(const Edge&) const = default;
};

struct InfluenceGraph {
  int n_nodes = 0;
  /// Directed edges A_ij > 0 with i ≠ j, in row-major order.
  std::vector<Edge> edges;
  /// Optional known social ties (undirected pairs) to draw alongside.
  std::vector<std::pair<int, int>> overlay;
};

InfluenceGraph influence_graph(const Matrix& A);

/// Undirected weights w(i,j) = max(A_ij, A_ji) / max(A), for i < j.
/// All zeros when A has no positive entry.
Matrix normalized_symmetric_weights(const Matrix& A);

/// Maximum weighted spanning forest over edges with normalized weight > threshold.
/// Kruskal on descending weight, ties by (src, dst); edges returned with src < dst
/// in selection order.
std::vector<Edge> mwsf(const Matrix& A, double threshold);
std::vector<Edge> mwsf(const InfluenceGraph& graph, double threshold);

/// Same forest on an explicit undirected weight list (weights used as given).
std::vector<Edge> max_spanning_forest(int n_nodes, std::vector<Edge> edges, double threshold);

/// `src,dst,weight` with six decimals.
void write_edges_csv(std::ostream& out, const std::vector<Edge>& edges);
void write_edges_csv(const std::string& path, const std::vector<Edge>& edges);
std::vector<Edge> read_edges_csv(std::istream& in);
std::vector<Edge> read_edges_csv(const std::string& path);

/// GraphML 1.0, undirected, one `weight` double attribute per edge.
void write_graphml(std::ostream& out, int n_nodes, const std::vector<Edge>& edges, bool directed = false);
void write_graphml(const std::string& path, int n_nodes, const std::vector<Edge>& edges, bool directed = false);

} // namespace colab
