#include "grafflow/gfdn_flow.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/SparseLU>

#include "grafflow/error.hpp"

namespace grafflow {

namespace {

constexpr double kResidualTolerance = 1e-10;

Eigen::SparseMatrix<double> identity_plus(const SparseOperator& h, double dt) {
  const auto n = static_cast<Eigen::Index>(h.size());
  Eigen::SparseMatrix<double> id(n, n);
  id.setIdentity();
  Eigen::SparseMatrix<double> m = id + dt * Eigen::SparseMatrix<double>(h.matrix());
  m.makeCompressed();
  return m;
}

bool all_finite(const Field& f) { return f.allFinite(); }

}  // namespace

const char* to_string(Termination t) {
  switch (t) {
    case Termination::Converged: return "converged";
    case Termination::MaxIterations: return "max_iter";
    case Termination::SolverFailure: return "solver_failure";
  }
  return "unknown";
}

void FlowConfig::validate() const {
  if (!(std::isfinite(mass) && mass > 0.0)) throw Error(ErrorKind::InvalidParameter, "mass must be positive");
  if (!(std::isfinite(dt) && dt > 0.0)) throw Error(ErrorKind::InvalidParameter, "time step must be positive");
  if (!(std::isfinite(tolerance) && tolerance > 0.0)) throw Error(ErrorKind::InvalidParameter, "tolerance must be positive");
  if (max_iterations < 1) throw Error(ErrorKind::InvalidParameter, "max_iterations must be at least 1");
}

Field initial_field(const Discretization& disc, const InitialDatum& datum) {
  const auto& mesh = disc.mesh;
  if (datum.values) {
    if (static_cast<std::size_t>(datum.values->size()) != mesh.total_nodes()) {
      std::ostringstream os;
      os << "initial field has " << datum.values->size() << " values, mesh has " << mesh.total_nodes();
      throw Error(ErrorKind::DimensionMismatch, os.str());
    }
    return *datum.values;
  }
  Field f(static_cast<Eigen::Index>(mesh.total_nodes()));
  for (std::size_t e = 0; e < mesh.edge_count(); ++e) {
    const auto it = datum.per_edge.find(disc.graph.edge(e).id);
    const auto& bump = it != datum.per_edge.end() ? it->second : datum.fallback;
    for (std::size_t k = 1; k <= mesh.node_count(e); ++k) {
      const double x = mesh.coordinate(e, k) - bump.center;
      f(static_cast<Eigen::Index>(mesh.index(e, k))) = bump.sign * bump.amplitude * std::exp(-bump.width * x * x);
    }
  }
  return f;
}

struct LinearSolver::Impl {
  Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
  bool analyzed = false;
  Eigen::Index size = -1;
};

LinearSolver::LinearSolver() : impl_(std::make_unique<Impl>()) {}
LinearSolver::~LinearSolver() = default;
LinearSolver::LinearSolver(LinearSolver&&) noexcept = default;
LinearSolver& LinearSolver::operator=(LinearSolver&&) noexcept = default;

Field LinearSolver::solve(const Eigen::SparseMatrix<double>& system, const Field& rhs) {
  if (system.rows() != system.cols() || system.rows() != rhs.size()) {
    throw Error(ErrorKind::DimensionMismatch, "linear system and right-hand side sizes differ");
  }
  if (!impl_->analyzed || impl_->size != system.rows()) {
    impl_->lu.analyzePattern(system);
    impl_->analyzed = true;
    impl_->size = system.rows();
  }
  impl_->lu.factorize(system);
  if (impl_->lu.info() != Eigen::Success) {
    throw Error(ErrorKind::LinearSolveFailure, "sparse LU factorization failed: " + impl_->lu.lastErrorMessage());
  }
  Field x = impl_->lu.solve(rhs);
  const double rhs_norm = rhs.norm();
  const double residual = (system * x - rhs).norm();
  if (!all_finite(x) || residual > kResidualTolerance * std::max(rhs_norm, std::numeric_limits<double>::min())) {
    std::ostringstream os;
    os << "residual " << residual << " exceeds " << kResidualTolerance << " * |rhs| (|rhs| = " << rhs_norm << ")";
    throw Error(ErrorKind::LinearSolveFailure, os.str());
  }
  return x;
}

Field solve_linear(const Eigen::SparseMatrix<double>& system, const Field& rhs) {
  LinearSolver solver;
  return solver.solve(system, rhs);
}

BefdStepper::BefdStepper(const Discretization& disc, const Nonlinearity& nonlinearity, double dt, double mass)
    : disc_(disc), nonlinearity_(nonlinearity), dt_(dt), mass_(mass), base_(identity_plus(disc.h, dt)) {
  system_ = base_;
  diagonal_.resize(static_cast<std::size_t>(base_.rows()));
  for (Eigen::Index c = 0; c < base_.outerSize(); ++c) {
    const auto begin = base_.outerIndexPtr()[c];
    const auto end = base_.outerIndexPtr()[c + 1];
    for (auto p = begin; p < end; ++p) {
      if (base_.innerIndexPtr()[p] == c) diagonal_[static_cast<std::size_t>(c)] = p;
    }
  }
}

Field BefdStepper::step(const Field& psi) {
  std::copy(base_.valuePtr(), base_.valuePtr() + base_.nonZeros(), system_.valuePtr());
  for (std::size_t i = 0; i < diagonal_.size(); ++i) {
    const double v = psi(static_cast<Eigen::Index>(i));
    system_.valuePtr()[diagonal_[i]] -= dt_ * nonlinearity_.g(v * v);
  }
  const Field phi = solver_.solve(system_, psi);
  const double phi_mass = disc_.mass(phi);
  if (!std::isfinite(phi_mass) || !all_finite(phi)) {
    throw Error(ErrorKind::DivergedFlow, "non-finite values after the linear solve");
  }
  if (phi_mass <= 0.0) throw Error(ErrorKind::DivergedFlow, "intermediate field has zero mass");
  return std::sqrt(mass_ / phi_mass) * phi;
}

Field befd_step(const Discretization& disc, const Field& psi, const Nonlinearity& nonlinearity, double dt,
                double mass) {
  BefdStepper stepper(disc, nonlinearity, dt, mass);
  return stepper.step(psi);
}

Field normalize_mass(const Discretization& disc, const Field& psi, double mass) {
  const double current = disc.mass(psi);
  if (!(current > 0.0)) throw Error(ErrorKind::ZeroMass, "cannot normalize a field with zero mass");
  return std::sqrt(mass / current) * psi;
}

double interior_dot(const Mesh& mesh, const Field& u, const Field& v) {
  double total = 0.0;
  for (std::size_t e = 0; e < mesh.edge_count(); ++e) {
    const auto n = static_cast<Eigen::Index>(mesh.node_count(e));
    const auto off = static_cast<Eigen::Index>(mesh.offset(e));
    total += mesh.spacing(e) * u.segment(off, n).dot(v.segment(off, n));
  }
  return total;
}

double discrete_energy(const Discretization& disc, const Field& psi, const Nonlinearity& nonlinearity) {
  const Field hpsi = disc.h.apply(psi);
  const auto traces = disc.traces.edge_traces(psi);
  const auto h_ends = extrapolate_ends(disc.mesh, hpsi);

  EdgeEnds kinetic_ends(traces.size()), potential_ends(traces.size());
  for (std::size_t e = 0; e < traces.size(); ++e) {
    for (std::size_t i = 0; i < 2; ++i) {
      kinetic_ends[e][i] = h_ends[e][i] * traces[e][i];
      potential_ends[e][i] = nonlinearity.antiderivative(traces[e][i] * traces[e][i]);
    }
  }
  const Field kinetic = hpsi.cwiseProduct(psi);
  const Field potential = psi.unaryExpr([&](double v) { return nonlinearity.antiderivative(v * v); });
  return 0.5 * trapezoid(disc.mesh, kinetic, kinetic_ends) - 0.5 * trapezoid(disc.mesh, potential, potential_ends);
}

namespace {

Field gradient(const Discretization& disc, const Field& psi, const Nonlinearity& nonlinearity) {
  Field out = disc.h.apply(psi);
  for (Eigen::Index i = 0; i < psi.size(); ++i) out(i) -= nonlinearity.g(psi(i) * psi(i)) * psi(i);
  return out;
}

}  // namespace

double chemical_potential(const Discretization& disc, const Field& psi, const Nonlinearity& nonlinearity) {
  const double norm2 = interior_dot(disc.mesh, psi, psi);
  if (!(norm2 > 0.0)) throw Error(ErrorKind::ZeroMass, "chemical potential of a zero field");
  return interior_dot(disc.mesh, gradient(disc, psi, nonlinearity), psi) / norm2;
}

double stationarity_residual(const Discretization& disc, const Field& psi, const Nonlinearity& nonlinearity) {
  const double mu = chemical_potential(disc, psi, nonlinearity);
  const Field r = gradient(disc, psi, nonlinearity) - mu * psi;
  return std::sqrt(interior_dot(disc.mesh, r, r));
}

double weighted_l2(const Discretization& disc, const Field& f) {
  return weighted_norms(f, disc.mesh, disc.traces).l2_norm;
}

FlowResult run_flow(const Discretization& disc, const FlowConfig& config) {
  config.validate();
  Field psi = initial_field(disc, config.initial);
  if (!all_finite(psi)) throw Error(ErrorKind::InvalidParameter, "initial datum is not finite");
  psi = normalize_mass(disc, psi, config.mass);

  FlowResult result;
  result.history.reserve(std::min<std::size_t>(config.max_iterations, 100000));
  BefdStepper stepper(disc, config.nonlinearity, config.dt, config.mass);

  for (std::size_t n = 1; n <= config.max_iterations; ++n) {
    Field next;
    try {
      next = stepper.step(psi);
    } catch (const Error& err) {
      if (err.kind() != ErrorKind::LinearSolveFailure) throw;
      result.reason = Termination::SolverFailure;
      result.message = err.what();
      break;
    }
    const double diff = weighted_l2(disc, next - psi);
    if (!std::isfinite(diff)) throw Error(ErrorKind::DivergedFlow, "step difference is not finite");
    psi = std::move(next);

    HistoryRecord rec;
    rec.iteration = n;
    rec.energy = discrete_energy(disc, psi, config.nonlinearity);
    rec.mass = disc.mass(psi);
    rec.chemical_potential = chemical_potential(disc, psi, config.nonlinearity);
    rec.step_difference = diff;
    result.history.push_back(rec);
    result.iterations = n;

    if (diff < config.tolerance) {
      result.reason = Termination::Converged;
      break;
    }
  }
  result.field = std::move(psi);
  return result;
}

}  // namespace grafflow
