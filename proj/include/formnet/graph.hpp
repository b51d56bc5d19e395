#pragma once

#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "formnet/error.hpp"

namespace formnet {

// Oriented edge (i, j): the incidence column carries +1 at i and -1 at j.
struct Edge {
  int i = 0;
  int j = 0;
};

// Undirected graph with a fixed edge orientation given by the stored (i, j)
// order. Vertices are 0..n-1. Construction validates: no self-loops, indices
// in range, at most one edge per unordered pair.
class Graph {
 public:
  Graph(int num_vertices, std::vector<Edge> edges);

  static Graph path(int n);
  static Graph cycle(int n);
  static Graph complete(int n);
  static Graph star(int n);  // vertex 0 is the hub

  int num_vertices() const { return n_; }
  int num_edges() const { return static_cast<int>(edges_.size()); }
  const std::vector<Edge>& edges() const { return edges_; }

  bool connected() const;
  // Longest shortest-path distance; throws for disconnected graphs.
  int diameter() const;

 private:
  int n_;
  std::vector<Edge> edges_;
};

// Vertex-by-edge incidence matrix E: column k has +1 at edges[k].i and -1 at
// edges[k].j. For a connected graph rank(E) = n - 1 and ker(E^T) = span(1).
Eigen::MatrixXd incidence_matrix(const Graph& g);

// E * E^T, the graph Laplacian. Positive semi-definite; column sums zero.
Eigen::MatrixXd laplacian(const Eigen::MatrixXd& incidence);

// Orthogonal projection of an edge-space vector onto Im(E^T). Idempotent.
Eigen::VectorXd project_edge_space(const Eigen::MatrixXd& incidence,
                                   const Eigen::VectorXd& zeta);

// Minimum-norm y with E^T y = zeta (least squares). Used to pick node
// potentials realizing a relative-output target.
Eigen::VectorXd minimum_norm_node_vector(const Eigen::MatrixXd& incidence,
                                         const Eigen::VectorXd& zeta);

// Residual distance of zeta from Im(E^T); zero (to tolerance) iff realizable.
double edge_space_residual(const Eigen::MatrixXd& incidence,
                           const Eigen::VectorXd& zeta);

// Orthonormal basis of Im(E^T) as columns (num_edges x rank).
Eigen::MatrixXd edge_space_basis(const Eigen::MatrixXd& incidence);

}  // namespace formnet
