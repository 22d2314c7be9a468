#include "grafflow/fd_discretization.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>

#include "grafflow/error.hpp"

namespace grafflow {

namespace {

constexpr double kMaxTraceCondition = 1e12;

void require_min_nodes(const MetricGraph& graph, std::span<const std::size_t> counts) {
  for (std::size_t e = 0; e < counts.size(); ++e) {
    if (counts[e] < 3) {
      std::ostringstream os;
      os << "edge '" << graph.edge(e).id << "' would get " << counts[e] << " interior nodes (at least 3 required)";
      throw Error(ErrorKind::MeshTooCoarse, os.str());
    }
  }
}

std::vector<double> edge_lengths(const MetricGraph& graph) {
  std::vector<double> out;
  out.reserve(graph.edges().size());
  for (const auto& e : graph.edges()) out.push_back(e.length);
  return out;
}

// Slot spacings of a vertex, in slot order.
std::vector<double> slot_spacings(const MetricGraph& graph, const Mesh& mesh, std::size_t v) {
  std::vector<double> out;
  for (const auto& slot : graph.vertex(v).slots) out.push_back(mesh.spacing(slot.edge));
  return out;
}

struct TraceSystem {
  Matrix lhs;
  Matrix rhs;
};

TraceSystem trace_system(const VertexCondition& cond, std::span<const double> slot_spacing) {
  const auto d = cond.a.rows();
  if (static_cast<std::size_t>(d) != slot_spacing.size()) {
    throw Error(ErrorKind::DimensionMismatch, "slot spacing count does not match condition dimension");
  }
  Eigen::VectorXd inv_two_dx(d);
  for (Eigen::Index s = 0; s < d; ++s) inv_two_dx(s) = 1.0 / (2.0 * slot_spacing[static_cast<std::size_t>(s)]);
  // Outgoing derivative (into the edge) from the vertex trace and the first
  // two nodes: u' ~ -(3 psi_0 - 4 psi_{-1} + psi_{-2}) / (2 dx). Substituting
  // into A psi_0 + B u' = 0 gives (3 B D - A) psi_0 = B D (4 psi_{-1} - psi_{-2})
  // with D = diag(1 / (2 dx_s)).
  const Matrix bd = cond.b * inv_two_dx.asDiagonal();
  return {3.0 * bd - cond.a, bd};
}

double condition_number(const Matrix& m) {
  Eigen::JacobiSVD<Matrix> svd(m);
  const auto& sv = svd.singularValues();
  const double smin = sv(sv.size() - 1);
  if (smin == 0.0) return std::numeric_limits<double>::infinity();
  return sv(0) / smin;
}

}  // namespace

Mesh::Mesh(std::vector<std::size_t> counts, std::vector<double> lengths)
    : counts_(std::move(counts)), lengths_(std::move(lengths)) {
  spacing_.resize(counts_.size());
  offsets_.resize(counts_.size());
  for (std::size_t e = 0; e < counts_.size(); ++e) {
    spacing_[e] = lengths_[e] / static_cast<double>(counts_[e] + 1);
    offsets_[e] = total_;
    total_ += counts_[e];
  }
}

double Mesh::max_spacing() const {
  return spacing_.empty() ? 0.0 : *std::max_element(spacing_.begin(), spacing_.end());
}

Mesh build_mesh(const MetricGraph& graph, double target_dx) {
  if (!(std::isfinite(target_dx) && target_dx > 0.0)) {
    throw Error(ErrorKind::InvalidParameter, "target dx must be finite and positive");
  }
  std::vector<std::size_t> counts;
  for (const auto& e : graph.edges()) {
    const double cells = std::round(e.length / target_dx);
    counts.push_back(cells >= 1.0 ? static_cast<std::size_t>(cells) - 1 : 0);
  }
  return build_mesh(graph, counts);
}

Mesh build_mesh(const MetricGraph& graph, std::span<const std::size_t> per_edge_counts) {
  if (per_edge_counts.size() != graph.edges().size()) {
    throw Error(ErrorKind::DimensionMismatch, "one node count per edge required");
  }
  require_min_nodes(graph, per_edge_counts);
  return Mesh({per_edge_counts.begin(), per_edge_counts.end()}, edge_lengths(graph));
}

Mesh build_mesh_with_total(const MetricGraph& graph, std::size_t total_points) {
  const double total_length = graph.total_length();
  std::vector<std::size_t> counts;
  for (const auto& e : graph.edges()) {
    counts.push_back(static_cast<std::size_t>(std::llround(static_cast<double>(total_points) * e.length / total_length)));
  }
  return build_mesh(graph, counts);
}

Matrix trace_coefficients(const VertexCondition& cond, double dx) {
  std::vector<double> spacing(cond.dimension(), dx);
  return trace_coefficients(cond, spacing);
}

double trace_system_condition(const VertexCondition& cond, std::span<const double> slot_spacing) {
  return condition_number(trace_system(cond, slot_spacing).lhs);
}

Matrix trace_coefficients(const VertexCondition& cond, std::span<const double> slot_spacing) {
  const auto sys = trace_system(cond, slot_spacing);
  const double cond_number = condition_number(sys.lhs);
  if (!(cond_number <= kMaxTraceCondition)) {
    std::ostringstream os;
    os << "3B - 2dx A is not safely invertible (condition number " << cond_number << ")";
    throw Error(ErrorKind::SingularTraceSystem, os.str());
  }
  return sys.lhs.fullPivLu().solve(sys.rhs);
}

TraceMap::TraceMap(const MetricGraph& graph, const Mesh& mesh) {
  vertices_.resize(graph.vertices().size());
  edge_slots_.resize(graph.edges().size());
  for (std::size_t v = 0; v < graph.vertices().size(); ++v) {
    const auto& vert = graph.vertex(v);
    auto& out = vertices_[v];
    try {
      out.coefficients = trace_coefficients(vert.condition, slot_spacings(graph, mesh, v));
    } catch (const Error& err) {
      throw Error(err.kind(), "vertex '" + vert.id + "': " + err.what());
    }
    for (std::size_t s = 0; s < vert.slots.size(); ++s) {
      const auto& slot = vert.slots[s];
      const auto n = mesh.node_count(slot.edge);
      if (slot.end == Endpoint::Start) {
        out.neighbours.push_back({mesh.index(slot.edge, 1), mesh.index(slot.edge, 2)});
        edge_slots_[slot.edge][0] = {v, s};
      } else {
        out.neighbours.push_back({mesh.index(slot.edge, n), mesh.index(slot.edge, n - 1)});
        edge_slots_[slot.edge][1] = {v, s};
      }
    }
  }
}

std::vector<Eigen::VectorXd> TraceMap::reconstruct(const Field& field) const {
  std::vector<Eigen::VectorXd> out;
  out.reserve(vertices_.size());
  for (const auto& vert : vertices_) {
    const auto d = static_cast<Eigen::Index>(vert.neighbours.size());
    Eigen::VectorXd w(d);
    for (Eigen::Index s = 0; s < d; ++s) {
      const auto& nb = vert.neighbours[static_cast<std::size_t>(s)];
      w(s) = 4.0 * field(static_cast<Eigen::Index>(nb[0])) - field(static_cast<Eigen::Index>(nb[1]));
    }
    out.push_back(vert.coefficients * w);
  }
  return out;
}

EdgeEnds TraceMap::edge_traces(const Field& field) const {
  const auto per_vertex = reconstruct(field);
  EdgeEnds out(edge_slots_.size());
  for (std::size_t e = 0; e < edge_slots_.size(); ++e) {
    for (std::size_t end = 0; end < 2; ++end) {
      const auto [v, s] = edge_slots_[e][end];
      out[e][end] = per_vertex[v](static_cast<Eigen::Index>(s));
    }
  }
  return out;
}

void SparseOperator::write_coordinates(std::ostream& os) const {
  const auto precision = os.precision(17);
  for (Eigen::Index r = 0; r < matrix_.outerSize(); ++r) {
    for (SparseMatrix::InnerIterator it(matrix_, r); it; ++it) {
      os << it.row() << ' ' << it.col() << ' ' << it.value() << '\n';
    }
  }
  os.precision(precision);
}

SparseOperator assemble_h(const MetricGraph& graph, const Mesh& mesh) {
  return assemble_h(graph, mesh, TraceMap(graph, mesh));
}

SparseOperator assemble_h(const MetricGraph& graph, const Mesh& mesh, const TraceMap& traces) {
  using Triplet = Eigen::Triplet<double>;
  std::vector<Triplet> entries;
  entries.reserve(3 * mesh.total_nodes() + 16 * graph.vertices().size());

  for (std::size_t e = 0; e < graph.edges().size(); ++e) {
    const auto n = mesh.node_count(e);
    const double inv_dx2 = 1.0 / (mesh.spacing(e) * mesh.spacing(e));
    for (std::size_t k = 1; k <= n; ++k) {
      const auto row = static_cast<int>(mesh.index(e, k));
      entries.emplace_back(row, row, 2.0 * inv_dx2);
      if (k > 1) entries.emplace_back(row, row - 1, -inv_dx2);
      if (k < n) entries.emplace_back(row, row + 1, -inv_dx2);
    }
    // The missing neighbour of the first and last node is the eliminated
    // trace psi_0 = sum_s' C[s, s'] (4 psi_{s',-1} - psi_{s',-2}).
    for (const auto end : {Endpoint::Start, Endpoint::End}) {
      const auto v = graph.endpoint_vertex(e, end);
      const auto s = static_cast<Eigen::Index>(graph.slot_position(e, end));
      const auto& vt = traces.vertex(v);
      const auto row = static_cast<int>(end == Endpoint::Start ? mesh.index(e, 1) : mesh.index(e, n));
      for (std::size_t sp = 0; sp < vt.neighbours.size(); ++sp) {
        const double c = vt.coefficients(s, static_cast<Eigen::Index>(sp));
        if (c == 0.0) continue;
        entries.emplace_back(row, static_cast<int>(vt.neighbours[sp][0]), -4.0 * c * inv_dx2);
        entries.emplace_back(row, static_cast<int>(vt.neighbours[sp][1]), c * inv_dx2);
      }
    }
  }

  const auto size = static_cast<Eigen::Index>(mesh.total_nodes());
  SparseMatrix m(size, size);
  m.setFromTriplets(entries.begin(), entries.end());
  m.makeCompressed();
  return SparseOperator(std::move(m));
}

std::vector<Eigen::VectorXd> reconstruct_traces(const Field& field, const TraceMap& traces) {
  return traces.reconstruct(field);
}

double trapezoid(const Mesh& mesh, const Field& nodal, const EdgeEnds& ends) {
  double total = 0.0;
  for (std::size_t e = 0; e < mesh.edge_count(); ++e) {
    const auto n = static_cast<Eigen::Index>(mesh.node_count(e));
    const auto off = static_cast<Eigen::Index>(mesh.offset(e));
    const double interior = nodal.segment(off, n).sum();
    total += mesh.spacing(e) * (interior + 0.5 * (ends[e][0] + ends[e][1]));
  }
  return total;
}

EdgeEnds extrapolate_ends(const Mesh& mesh, const Field& nodal) {
  EdgeEnds out(mesh.edge_count());
  for (std::size_t e = 0; e < mesh.edge_count(); ++e) {
    const auto n = mesh.node_count(e);
    auto at = [&](std::size_t k) { return nodal(static_cast<Eigen::Index>(mesh.index(e, k))); };
    out[e] = {2.0 * at(1) - at(2), 2.0 * at(n) - at(n - 1)};
  }
  return out;
}

Norms weighted_norms(const Field& field, const Mesh& mesh, const TraceMap& traces) {
  auto ends = traces.edge_traces(field);
  EdgeEnds ends2(ends.size()), ends4(ends.size());
  for (std::size_t e = 0; e < ends.size(); ++e) {
    for (std::size_t i = 0; i < 2; ++i) {
      const double sq = ends[e][i] * ends[e][i];
      ends2[e][i] = sq;
      ends4[e][i] = sq * sq;
    }
  }
  const Field sq = field.array().square().matrix();
  const Field quart = sq.array().square().matrix();
  Norms out;
  out.mass = trapezoid(mesh, sq, ends2);
  out.l2_norm = std::sqrt(out.mass);
  out.l4_norm = std::pow(trapezoid(mesh, quart, ends4), 0.25);
  return out;
}

Discretization discretize(MetricGraph graph, Mesh mesh) {
  if (mesh.edge_count() != graph.edges().size()) {
    throw Error(ErrorKind::DimensionMismatch, "mesh does not match graph");
  }
  TraceMap traces(graph, mesh);
  auto h = assemble_h(graph, mesh, traces);
  return {std::move(graph), std::move(mesh), std::move(traces), std::move(h)};
}

}  // namespace grafflow
