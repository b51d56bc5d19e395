#include "formnet/graph.hpp"

#include <algorithm>
#include <queue>
#include <set>

namespace formnet {

Graph::Graph(int num_vertices, std::vector<Edge> edges)
    : n_(num_vertices), edges_(std::move(edges)) {
  require(n_ > 0, "graph.invalid", "graph needs at least one vertex");
  std::set<std::pair<int, int>> seen;
  for (const Edge& e : edges_) {
    require(e.i >= 0 && e.i < n_ && e.j >= 0 && e.j < n_, "graph.invalid",
            "edge endpoint out of range: (" + std::to_string(e.i) + ", " +
                std::to_string(e.j) + ")");
    require(e.i != e.j, "graph.invalid",
            "self-loop at vertex " + std::to_string(e.i));
    auto key = std::minmax(e.i, e.j);
    require(seen.insert(key).second, "graph.invalid",
            "duplicate edge between " + std::to_string(key.first) + " and " +
                std::to_string(key.second));
  }
}

Graph Graph::path(int n) {
  std::vector<Edge> edges;
  for (int i = 0; i + 1 < n; ++i) edges.push_back({i, i + 1});
  return Graph(n, std::move(edges));
}

Graph Graph::cycle(int n) {
  require(n >= 3, "graph.invalid", "cycle needs at least 3 vertices");
  std::vector<Edge> edges;
  for (int i = 0; i < n; ++i) edges.push_back({i, (i + 1) % n});
  return Graph(n, std::move(edges));
}

Graph Graph::complete(int n) {
  std::vector<Edge> edges;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) edges.push_back({i, j});
  return Graph(n, std::move(edges));
}

Graph Graph::star(int n) {
  require(n >= 2, "graph.invalid", "star needs at least 2 vertices");
  std::vector<Edge> edges;
  for (int i = 1; i < n; ++i) edges.push_back({0, i});
  return Graph(n, std::move(edges));
}

namespace {

std::vector<int> bfs_distances(const Graph& g, int source) {
  std::vector<std::vector<int>> adj(g.num_vertices());
  for (const Edge& e : g.edges()) {
    adj[e.i].push_back(e.j);
    adj[e.j].push_back(e.i);
  }
  std::vector<int> dist(g.num_vertices(), -1);
  std::queue<int> q;
  dist[source] = 0;
  q.push(source);
  while (!q.empty()) {
    int v = q.front();
    q.pop();
    for (int w : adj[v]) {
      if (dist[w] < 0) {
        dist[w] = dist[v] + 1;
        q.push(w);
      }
    }
  }
  return dist;
}

}  // namespace

bool Graph::connected() const {
  auto dist = bfs_distances(*this, 0);
  return std::all_of(dist.begin(), dist.end(), [](int d) { return d >= 0; });
}

int Graph::diameter() const {
  int diam = 0;
  for (int v = 0; v < n_; ++v) {
    auto dist = bfs_distances(*this, v);
    for (int d : dist) {
      require(d >= 0, "graph.disconnected", "diameter of a disconnected graph");
      diam = std::max(diam, d);
    }
  }
  return diam;
}

Eigen::MatrixXd incidence_matrix(const Graph& g) {
  Eigen::MatrixXd inc = Eigen::MatrixXd::Zero(g.num_vertices(), g.num_edges());
  for (int k = 0; k < g.num_edges(); ++k) {
    inc(g.edges()[k].i, k) = 1.0;
    inc(g.edges()[k].j, k) = -1.0;
  }
  return inc;
}

Eigen::MatrixXd laplacian(const Eigen::MatrixXd& incidence) {
  return incidence * incidence.transpose();
}

Eigen::VectorXd minimum_norm_node_vector(const Eigen::MatrixXd& incidence,
                                         const Eigen::VectorXd& zeta) {
  require(zeta.size() == incidence.cols(), "graph.dimension",
          "edge vector length does not match edge count");
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(
      incidence.transpose());
  return cod.solve(zeta);
}

Eigen::VectorXd project_edge_space(const Eigen::MatrixXd& incidence,
                                   const Eigen::VectorXd& zeta) {
  return incidence.transpose() * minimum_norm_node_vector(incidence, zeta);
}

double edge_space_residual(const Eigen::MatrixXd& incidence,
                           const Eigen::VectorXd& zeta) {
  return (zeta - project_edge_space(incidence, zeta)).norm();
}

Eigen::MatrixXd edge_space_basis(const Eigen::MatrixXd& incidence) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(incidence.transpose(),
                                        Eigen::ComputeThinU);
  const auto& sv = svd.singularValues();
  double tol = std::max(incidence.rows(), incidence.cols()) * sv(0) * 1e-12;
  int rank = 0;
  for (int i = 0; i < sv.size(); ++i)
    if (sv(i) > tol) ++rank;
  return svd.matrixU().leftCols(rank);
}

}  // namespace formnet
