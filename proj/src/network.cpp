#include "colab/network.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace colab {

InfluenceGraph influence_graph(const Matrix& A) {
  if (A.rows() != A.cols()) {
    throw ContractError("influence_graph: A must be square");
  }
  InfluenceGraph g;
  g.n_nodes = static_cast<int>(A.rows());
  for (std::size_t i = 0; i < A.rows(); ++i) {
    for (std::size_t j = 0; j < A.cols(); ++j) {
      if (i != j && A(i, j) > 0.0) {
        g.edges.push_back({static_cast<int>(i), static_cast<int>(j), A(i, j)});
      }
    }
  }
  return g;
}

Matrix normalized_symmetric_weights(const Matrix& A) {
  if (A.rows() != A.cols()) {
    throw ContractError("mwsf: A must be square");
  }
  const std::size_t n = A.rows();
  double peak = 0.0;
  for (double v : A.data()) {
    if (v < 0.0) {
      throw ContractError("mwsf: negative influence weight");
    }
    peak = std::max(peak, v);
  }
  Matrix w(n, n, 0.0);
  if (peak <= 0.0) {
    return w;
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      w(i, j) = std::max(A(i, j), A(j, i)) / peak;
    }
  }
  return w;
}

namespace {

class DisjointSet {
public:
  explicit DisjointSet(std::size_t n) : parent_(n), rank_(n, 0) { std::iota(parent_.begin(), parent_.end(), 0); }

  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }

  bool unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) {
      return false;
    }
    if (rank_[a] < rank_[b]) {
      std::swap(a, b);
    }
    parent_[b] = a;
    if (rank_[a] == rank_[b]) {
      ++rank_[a];
    }
    return true;
  }

private:
  std::vector<std::size_t> parent_;
  std::vector<int> rank_;
};

} // namespace

std::vector<Edge> max_spanning_forest(int n_nodes, std::vector<Edge> edges, double threshold) {
  for (Edge& e : edges) {
    if (e.src < 0 || e.dst < 0 || e.src >= n_nodes || e.dst >= n_nodes) {
      throw ContractError("mwsf: edge endpoint out of range");
    }
    if (e.src > e.dst) {
      std::swap(e.src, e.dst);
    }
  }
  std::erase_if(edges, [&](const Edge& e) { return e.src == e.dst || !(e.weight > threshold); });
  std::sort(edges.begin(), edges.end(), [](const Edge& a, const Edge& b) {
    if (a.weight != b.weight) {
      return a.weight > b.weight;
    }
    return std::pair(a.src, a.dst) < std::pair(b.src, b.dst);
  });
  DisjointSet sets(static_cast<std::size_t>(n_nodes));
  std::vector<Edge> forest;
  for (const Edge& e : edges) {
    if (sets.unite(static_cast<std::size_t>(e.src), static_cast<std::size_t>(e.dst))) {
      forest.push_back(e);
    }
  }
  return forest;
}

std::vector<Edge> mwsf(const Matrix& A, double threshold) {
  const Matrix w = normalized_symmetric_weights(A);
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < w.rows(); ++i) {
    for (std::size_t j = i + 1; j < w.cols(); ++j) {
      if (w(i, j) > 0.0) {
        edges.push_back({static_cast<int>(i), static_cast<int>(j), w(i, j)});
      }
    }
  }
  return max_spanning_forest(static_cast<int>(A.rows()), std::move(edges), threshold);
}

std::vector<Edge> mwsf(const InfluenceGraph& graph, double threshold) {
  const auto n = static_cast<std::size_t>(graph.n_nodes);
  Matrix A(n, n, 0.0);
  for (const Edge& e : graph.edges) {
    A(static_cast<std::size_t>(e.src), static_cast<std::size_t>(e.dst)) = e.weight;
  }
  return mwsf(A, threshold);
}

void write_edges_csv(std::ostream& out, const std::vector<Edge>& edges) {
  out << "src,dst,weight\n";
  out << std::fixed << std::setprecision(6);
  for (const Edge& e : edges) {
    out << e.src << ',' << e.dst << ',' << e.weight << '\n';
  }
}

void write_edges_csv(const std::string& path, const std::vector<Edge>& edges) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot write '" + path + "'");
  }
  write_edges_csv(out, edges);
  if (!out) {
    throw std::runtime_error("write failed for '" + path + "'");
  }
}

std::vector<Edge> read_edges_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) {
    throw ContractError("edge csv: missing header");
  }
  if (!line.empty() && line.back() == '\r') {
    line.pop_back();
  }
  if (line != "src,dst,weight") {
    throw ContractError("edge csv: unexpected header '" + line + "'");
  }
  std::vector<Edge> edges;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    if (line.empty()) {
      continue;
    }
    std::istringstream fields(line);
    Edge e;
    char c1 = 0;
    char c2 = 0;
    if (!(fields >> e.src >> c1 >> e.dst >> c2 >> e.weight) || c1 != ',' || c2 != ',') {
      throw ContractError("edge csv: line " + std::to_string(line_no) + ": malformed row");
    }
    edges.push_back(e);
  }
  return edges;
}

std::vector<Edge> read_edges_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open '" + path + "'");
  }
  return read_edges_csv(in);
}

void write_graphml(std::ostream& out, int n_nodes, const std::vector<Edge>& edges, bool directed) {
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<graphml xmlns=\"http://graphml.graphdrawing.org/xmlns\">\n"
      << "  <key id=\"weight\" for=\"edge\" attr.name=\"weight\" attr.type=\"double\"/>\n"
      << "  <graph id=\"influence\" edgedefault=\"" << (directed ? "directed" : "undirected") << "\">\n";
  for (int v = 0; v < n_nodes; ++v) {
    out << "    <node id=\"n" << v << "\"/>\n";
  }
  out << std::fixed << std::setprecision(6);
  for (std::size_t k = 0; k < edges.size(); ++k) {
    const Edge& e = edges[k];
    out << "    <edge id=\"e" << k << "\" source=\"n" << e.src << "\" target=\"n" << e.dst << "\">"
        << "<data key=\"weight\">" << e.weight << "</data></edge>\n";
  }
  out << "  </graph>\n</graphml>\n";
}

void write_graphml(const std::string& path, int n_nodes, const std::vector<Edge>& edges, bool directed) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot write '" + path + "'");
  }
  write_graphml(out, n_nodes, edges, directed);
  if (!out) {
    throw std::runtime_error("write failed for '" + path + "'");
  }
}

} // namespace colab
