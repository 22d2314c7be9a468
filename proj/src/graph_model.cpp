#include "grafflow/graph_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "grafflow/error.hpp"

namespace grafflow {

namespace {

void require_degree(std::size_t degree) {
  if (degree == 0) throw Error(ErrorKind::InvalidDegree, "vertex degree must be at least 1");
}

// Shared continuity block: rows e_i - e_{i+1}, last row left for the caller.
VertexCondition continuity_block(std::size_t d) {
  const auto n = static_cast<Eigen::Index>(d);
  VertexCondition c{Matrix::Zero(n, n), Matrix::Zero(n, n)};
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    c.a(i, i) = 1.0;
    c.a(i, i + 1) = -1.0;
  }
  c.b.row(n - 1).setOnes();
  return c;
}

}  // namespace

VertexCondition kirchhoff_condition(std::size_t degree) {
  require_degree(degree);
  return continuity_block(degree);
}

VertexCondition delta_condition(std::size_t degree, double alpha) {
  require_degree(degree);
  auto c = continuity_block(degree);
  c.a(c.a.rows() - 1, 0) = -alpha;
  return c;
}

VertexCondition delta_prime_condition(double beta) {
  if (beta == 0.0 || !std::isfinite(beta)) {
    throw Error(ErrorKind::InvalidParameter, "delta' strength must be finite and nonzero (use Kirchhoff for beta = 0)");
  }
  VertexCondition c{Matrix::Zero(2, 2), Matrix::Zero(2, 2)};
  c.a << 1.0, -1.0, 0.0, 0.0;
  c.b << 0.0, -beta, 1.0, 1.0;
  return c;
}

VertexCondition dirichlet_condition() {
  return {Matrix::Ones(1, 1), Matrix::Zero(1, 1)};
}

VertexCondition dipole_condition(double tau) {
  if (tau == 0.0 || !std::isfinite(tau)) {
    throw Error(ErrorKind::InvalidParameter, "dipole parameter must be finite and nonzero (tau = 0 decouples the edges)");
  }
  VertexCondition c{Matrix::Zero(2, 2), Matrix::Zero(2, 2)};
  c.a << 1.0, tau, 0.0, 0.0;
  c.b << 0.0, 0.0, tau, -1.0;
  return c;
}

std::size_t numerical_rank(const Matrix& m, double rel_tol) {
  if (m.size() == 0) return 0;
  const double scale = m.cwiseAbs().maxCoeff();
  if (scale == 0.0) return 0;
  Eigen::FullPivLU<Matrix> lu(m);
  lu.setThreshold(rel_tol);
  return static_cast<std::size_t>(lu.rank());
}

ConditionCheck validate_condition(const VertexCondition& cond) {
  const auto d = cond.a.rows();
  if (d == 0 || cond.a.cols() != d || cond.b.rows() != d || cond.b.cols() != d) {
    return {ConditionDefect::NotSquare, "A and B must be square matrices of equal size"};
  }
  Matrix stacked(d, 2 * d);
  stacked << cond.a, cond.b;
  const auto rank = numerical_rank(stacked);
  if (rank != static_cast<std::size_t>(d)) {
    std::ostringstream os;
    os << "rank(A|B) = " << rank << " < " << d;
    return {ConditionDefect::RankDeficient, os.str()};
  }
  const Matrix ab = cond.a * cond.b.transpose();
  const double asym = (ab - ab.transpose()).cwiseAbs().maxCoeff();
  const double tol = 1e-12 * std::max(1.0, ab.cwiseAbs().maxCoeff());
  if (asym > tol) {
    std::ostringstream os;
    os << "A B^T is not symmetric (max deviation " << asym << ")";
    return {ConditionDefect::NonSymmetric, os.str()};
  }
  return {};
}

std::optional<std::size_t> MetricGraph::find_vertex(std::string_view id) const {
  for (std::size_t i = 0; i < vertices_.size(); ++i)
    if (vertices_[i].id == id) return i;
  return std::nullopt;
}

std::optional<std::size_t> MetricGraph::find_edge(std::string_view id) const {
  for (std::size_t i = 0; i < edges_.size(); ++i)
    if (edges_[i].id == id) return i;
  return std::nullopt;
}

std::size_t MetricGraph::vertex_index(std::string_view id) const {
  if (auto v = find_vertex(id)) return *v;
  throw Error(ErrorKind::UnknownVertex, "no vertex named '" + std::string(id) + "'");
}

std::size_t MetricGraph::edge_index(std::string_view id) const {
  if (auto e = find_edge(id)) return *e;
  throw Error(ErrorKind::InvalidGraph, "no edge named '" + std::string(id) + "'");
}

double MetricGraph::total_length() const {
  return std::accumulate(edges_.begin(), edges_.end(), 0.0,
                         [](double acc, const Edge& e) { return acc + e.length; });
}

MetricGraph build_graph(const std::vector<EdgeSpec>& edges, const std::vector<VertexSpec>& vertices) {
  if (edges.empty()) throw Error(ErrorKind::InvalidGraph, "graph has no edges");

  MetricGraph g;
  std::unordered_map<std::string, std::size_t> vertex_ids;
  for (const auto& v : vertices) {
    if (!vertex_ids.emplace(v.id, g.vertices_.size()).second) {
      throw Error(ErrorKind::InvalidGraph, "duplicate vertex id '" + v.id + "'");
    }
    g.vertices_.push_back({v.id, v.condition, {}});
  }

  std::unordered_map<std::string, std::size_t> edge_ids;
  for (const auto& e : edges) {
    if (!(std::isfinite(e.length) && e.length > 0.0)) {
      throw Error(ErrorKind::InvalidGraph, "edge '" + e.id + "' must have a finite positive length");
    }
    if (!edge_ids.emplace(e.id, g.edges_.size()).second) {
      throw Error(ErrorKind::InvalidGraph, "duplicate edge id '" + e.id + "'");
    }
    auto lookup = [&](const std::string& vid) {
      auto it = vertex_ids.find(vid);
      if (it == vertex_ids.end()) {
        throw Error(ErrorKind::UnknownVertex, "edge '" + e.id + "' references undeclared vertex '" + vid + "'");
      }
      return it->second;
    };
    g.edges_.push_back({e.id, lookup(e.from), lookup(e.to), e.length});
  }

  // Default slot order: edge declaration order, start before end.
  std::vector<std::vector<Slot>> incident(g.vertices_.size());
  for (std::size_t e = 0; e < g.edges_.size(); ++e) {
    incident[g.edges_[e].from].push_back({e, Endpoint::Start});
    incident[g.edges_[e].to].push_back({e, Endpoint::End});
  }

  for (std::size_t v = 0; v < g.vertices_.size(); ++v) {
    auto& vert = g.vertices_[v];
    const auto& spec = vertices[v];
    if (spec.slot_order.empty()) {
      vert.slots = incident[v];
    } else {
      for (const auto& ref : spec.slot_order) {
        auto it = edge_ids.find(ref.edge);
        if (it == edge_ids.end()) {
          throw Error(ErrorKind::InvalidCondition, "slot order of vertex '" + vert.id + "' names unknown edge '" + ref.edge + "'");
        }
        vert.slots.push_back({it->second, ref.end});
      }
      auto sorted_given = vert.slots;
      auto sorted_incident = incident[v];
      auto key = [](const Slot& s) { return 2 * s.edge + (s.end == Endpoint::End ? 1 : 0); };
      auto by_key = [&](const Slot& l, const Slot& r) { return key(l) < key(r); };
      std::sort(sorted_given.begin(), sorted_given.end(), by_key);
      std::sort(sorted_incident.begin(), sorted_incident.end(), by_key);
      if (sorted_given != sorted_incident) {
        throw Error(ErrorKind::InvalidCondition, "slot order of vertex '" + vert.id + "' is not a permutation of its incident edge ends");
      }
    }

    if (vert.slots.empty()) {
      throw Error(ErrorKind::DisconnectedGraph, "vertex '" + vert.id + "' has no incident edges");
    }
    if (vert.condition.dimension() != vert.slots.size() || vert.condition.b.rows() != vert.condition.a.rows()) {
      std::ostringstream os;
      os << "condition at vertex '" << vert.id << "' has dimension " << vert.condition.dimension()
         << " but the vertex degree is " << vert.slots.size();
      throw Error(ErrorKind::DimensionMismatch, os.str());
    }
    if (auto check = validate_condition(vert.condition); !check) {
      throw Error(ErrorKind::InvalidCondition, "vertex '" + vert.id + "': " + check.reason);
    }
  }

  g.start_slot_.assign(g.edges_.size(), 0);
  g.end_slot_.assign(g.edges_.size(), 0);
  for (const auto& vert : g.vertices_) {
    for (std::size_t s = 0; s < vert.slots.size(); ++s) {
      const auto& slot = vert.slots[s];
      (slot.end == Endpoint::Start ? g.start_slot_ : g.end_slot_)[slot.edge] = s;
    }
  }

  // Connectivity via union-find over edges.
  std::vector<std::size_t> parent(g.vertices_.size());
  std::iota(parent.begin(), parent.end(), 0);
  auto root = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (const auto& e : g.edges_) parent[root(e.from)] = root(e.to);
  const auto r0 = root(0);
  for (std::size_t v = 1; v < g.vertices_.size(); ++v) {
    if (root(v) != r0) throw Error(ErrorKind::DisconnectedGraph, "vertex '" + g.vertices_[v].id + "' is not connected to '" + g.vertices_[0].id + "'");
  }
  return g;
}

}  // namespace grafflow
