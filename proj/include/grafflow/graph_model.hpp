#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace grafflow {

using Matrix = Eigen::MatrixXd;

enum class Endpoint { Start, End };

/// One end of one edge. A vertex condition acts on the vector of traces
/// indexed by the vertex's slots.
struct Slot {
  std::size_t edge = 0;
  Endpoint end = Endpoint::Start;

  friend bool operator==(const Slot&, const Slot&) = default;
};

/// Local boundary condition A u(v) + B u'(v) = 0, with u'(v) the outgoing
/// derivatives along the incident edges.
struct VertexCondition {
  Matrix a;
  Matrix b;

  std::size_t dimension() const { return static_cast<std::size_t>(a.rows()); }
};

VertexCondition kirchhoff_condition(std::size_t degree);
VertexCondition delta_condition(std::size_t degree, double alpha);
/// Two-slot point interaction u1 = u2 + beta u2', u1' + u2' = 0.
VertexCondition delta_prime_condition(double beta);
VertexCondition dirichlet_condition();
/// Two-slot coupling u1 + tau u2 = 0, tau u1' - u2' = 0.
VertexCondition dipole_condition(double tau);

enum class ConditionDefect { NotSquare, RankDeficient, NonSymmetric };

struct ConditionCheck {
  std::optional<ConditionDefect> defect;
  std::string reason;

  bool valid() const { return !defect.has_value(); }
  explicit operator bool() const { return valid(); }
};

/// Self-adjointness test: (A|B) has full row rank and A B^T is symmetric.
ConditionCheck validate_condition(const VertexCondition& cond);

/// Numerical rank by full-pivot elimination, pivots below
/// rel_tol * max|entry| count as zero.
std::size_t numerical_rank(const Matrix& m, double rel_tol = 1e-10);

struct EdgeSpec {
  std::string id;
  std::string from;
  std::string to;
  double length = 0.0;
};

struct SlotRef {
  std::string edge;
  Endpoint end = Endpoint::Start;
};

struct VertexSpec {
  std::string id;
  VertexCondition condition;
  // Empty means the default ordering: incident edges in declaration order,
  // the start end of a loop before its end.
  std::vector<SlotRef> slot_order;
};

class MetricGraph {
 public:
  struct Vertex {
    std::string id;
    VertexCondition condition;
    std::vector<Slot> slots;
  };

  struct Edge {
    std::string id;
    std::size_t from = 0;
    std::size_t to = 0;
    double length = 0.0;
  };

  const std::vector<Vertex>& vertices() const { return vertices_; }
  const std::vector<Edge>& edges() const { return edges_; }
  const Vertex& vertex(std::size_t v) const { return vertices_.at(v); }
  const Edge& edge(std::size_t e) const { return edges_.at(e); }

  std::size_t degree(std::size_t v) const { return vertices_.at(v).slots.size(); }

  /// Vertex sitting at the given end of an edge.
  std::size_t endpoint_vertex(std::size_t e, Endpoint end) const {
    return end == Endpoint::Start ? edges_.at(e).from : edges_.at(e).to;
  }

  /// Position of (edge, end) inside its vertex's slot list.
  std::size_t slot_position(std::size_t e, Endpoint end) const {
    return end == Endpoint::Start ? start_slot_.at(e) : end_slot_.at(e);
  }

  std::optional<std::size_t> find_vertex(std::string_view id) const;
  std::optional<std::size_t> find_edge(std::string_view id) const;
  std::size_t vertex_index(std::string_view id) const;
  std::size_t edge_index(std::string_view id) const;

  double total_length() const;

 private:
  friend MetricGraph build_graph(const std::vector<EdgeSpec>&, const std::vector<VertexSpec>&);

  std::vector<Vertex> vertices_;
  std::vector<Edge> edges_;
  std::vector<std::size_t> start_slot_;
  std::vector<std::size_t> end_slot_;
};

/// Validates and wires a metric graph: every endpoint must name a declared
/// vertex, the graph must be connected, and each condition must be
/// self-adjoint with dimension equal to the vertex degree (a loop counts 2).
MetricGraph build_graph(const std::vector<EdgeSpec>& edges, const std::vector<VertexSpec>& vertices);

}  // namespace grafflow
