#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "grafflow/graph_model.hpp"

namespace grafflow {

/// Real field sampled at the interior nodes of a mesh, in global index order.
using Field = Eigen::VectorXd;

/// Values of some quantity at the two ends of every edge, {start, end}.
using EdgeEnds = std::vector<std::array<double, 2>>;

/// Uniform interior grid per edge: x_{e,k} = k * dx_e, 1 <= k <= N_e, with
/// dx_e = l_e / (N_e + 1). The edge ends are not unknowns.
class Mesh {
 public:
  Mesh() = default;
  Mesh(std::vector<std::size_t> counts, std::vector<double> lengths);

  std::size_t edge_count() const { return counts_.size(); }
  std::size_t node_count(std::size_t e) const { return counts_.at(e); }
  double spacing(std::size_t e) const { return spacing_.at(e); }
  double length(std::size_t e) const { return lengths_.at(e); }
  std::size_t offset(std::size_t e) const { return offsets_.at(e); }
  std::size_t total_nodes() const { return total_; }

  /// Global index of interior node k (1-based along the edge).
  std::size_t index(std::size_t e, std::size_t k) const { return offsets_[e] + k - 1; }
  double coordinate(std::size_t e, std::size_t k) const { return static_cast<double>(k) * spacing_[e]; }

  double max_spacing() const;

 private:
  std::vector<std::size_t> counts_;
  std::vector<double> lengths_;
  std::vector<double> spacing_;
  std::vector<std::size_t> offsets_;
  std::size_t total_ = 0;
};

/// N_e = round(l_e / target_dx) - 1 on every edge; MeshTooCoarse if any N_e < 3.
Mesh build_mesh(const MetricGraph& graph, double target_dx);
Mesh build_mesh(const MetricGraph& graph, std::span<const std::size_t> per_edge_counts);
/// Distributes roughly total_points interior nodes proportionally to length.
Mesh build_mesh_with_total(const MetricGraph& graph, std::size_t total_points);

/// C_v = (3 B - 2 dx A)^{-1} B: maps 4 psi_{-1} - psi_{-2} to the vertex
/// traces psi_0, one entry per slot. Derivatives in (A, B) point from the
/// vertex into the edge.
Matrix trace_coefficients(const VertexCondition& cond, double dx);
/// Per-slot spacing variant; the scalar 2 dx becomes diag(2 dx_s).
Matrix trace_coefficients(const VertexCondition& cond, std::span<const double> slot_spacing);

/// Condition number of the trace system for the given slot spacings.
double trace_system_condition(const VertexCondition& cond, std::span<const double> slot_spacing);

class TraceMap {
 public:
  struct VertexTraces {
    Matrix coefficients;
    // Per slot: global indices of the first and second interior nodes
    // counted from the vertex.
    std::vector<std::array<std::size_t, 2>> neighbours;
  };

  TraceMap() = default;
  TraceMap(const MetricGraph& graph, const Mesh& mesh);

  const VertexTraces& vertex(std::size_t v) const { return vertices_.at(v); }
  std::size_t vertex_count() const { return vertices_.size(); }

  /// psi_0 per slot for every vertex.
  std::vector<Eigen::VectorXd> reconstruct(const Field& field) const;
  /// Trace at both ends of every edge.
  EdgeEnds edge_traces(const Field& field) const;

 private:
  std::vector<VertexTraces> vertices_;
  // Per edge: {(vertex, slot) at start, (vertex, slot) at end}.
  std::vector<std::array<std::array<std::size_t, 2>, 2>> edge_slots_;
};

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// [H], the discretization of -d^2/dx^2 with the vertex conditions folded
/// into the rows next to each vertex.
class SparseOperator {
 public:
  SparseOperator() = default;
  explicit SparseOperator(SparseMatrix m) : matrix_(std::move(m)) {}

  const SparseMatrix& matrix() const { return matrix_; }
  std::size_t size() const { return static_cast<std::size_t>(matrix_.rows()); }

  Field apply(const Field& x) const { return matrix_ * x; }
  Eigen::MatrixXd to_dense() const { return Eigen::MatrixXd(matrix_); }

  /// Coordinate listing "row col value", 0-based, one nonzero per line.
  void write_coordinates(std::ostream& os) const;

 private:
  SparseMatrix matrix_;
};

SparseOperator assemble_h(const MetricGraph& graph, const Mesh& mesh, const TraceMap& traces);
SparseOperator assemble_h(const MetricGraph& graph, const Mesh& mesh);

std::vector<Eigen::VectorXd> reconstruct_traces(const Field& field, const TraceMap& traces);

struct Norms {
  double l2_norm = 0.0;
  double l4_norm = 0.0;
  double mass = 0.0;
};

/// Composite trapezoid over every edge with reconstructed vertex traces.
Norms weighted_norms(const Field& field, const Mesh& mesh, const TraceMap& traces);

/// Trapezoid sum of nodal values with the given edge-end values.
double trapezoid(const Mesh& mesh, const Field& nodal, const EdgeEnds& ends);

/// Linear extrapolation of nodal values to the edge ends from the two
/// nearest interior nodes.
EdgeEnds extrapolate_ends(const Mesh& mesh, const Field& nodal);

/// Everything derived from a (graph, mesh) pair, built once and shared
/// read-only by flows and diagnostics.
struct Discretization {
  MetricGraph graph;
  Mesh mesh;
  TraceMap traces;
  SparseOperator h;

  std::size_t size() const { return mesh.total_nodes(); }
  double mass(const Field& f) const { return weighted_norms(f, mesh, traces).mass; }
};

Discretization discretize(MetricGraph graph, Mesh mesh);

}  // namespace grafflow
