#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Sparse>

#include "grafflow/fd_discretization.hpp"
#include "grafflow/nonlinearity.hpp"

namespace grafflow {

/// sign * amplitude * exp(-width (x - center)^2), x measured from the edge start.
struct GaussianBump {
  double amplitude = 1.0;
  double width = 10.0;
  double center = 0.0;
  double sign = 1.0;
};

struct InitialDatum {
  GaussianBump fallback;
  std::map<std::string, GaussianBump> per_edge;
  // Explicit nodal values (e.g. loaded from a field file) take precedence.
  std::optional<Field> values;
};

Field initial_field(const Discretization& disc, const InitialDatum& datum);

struct FlowConfig {
  double mass = 1.0;
  double dt = 1e-2;
  double tolerance = 1e-10;
  std::size_t max_iterations = 10000;
  Nonlinearity nonlinearity = Nonlinearity::cubic();
  InitialDatum initial;

  void validate() const;
};

struct HistoryRecord {
  std::size_t iteration = 0;
  double energy = 0.0;
  double mass = 0.0;
  double chemical_potential = 0.0;
  double step_difference = 0.0;
};

enum class Termination { Converged, MaxIterations, SolverFailure };

const char* to_string(Termination t);

struct FlowResult {
  Field field;
  std::size_t iterations = 0;
  std::vector<HistoryRecord> history;
  Termination reason = Termination::MaxIterations;
  std::string message;
};

/// Direct sparse LU for the BEFD system. The sparsity pattern of
/// Id + dt (H - [g]) never changes, so the symbolic analysis is done once
/// and only the numeric factorization is repeated.
class LinearSolver {
 public:
  LinearSolver();
  ~LinearSolver();
  LinearSolver(LinearSolver&&) noexcept;
  LinearSolver& operator=(LinearSolver&&) noexcept;

  /// Solves system * x = rhs; LinearSolveFailure if the factorization fails
  /// or the relative residual exceeds 1e-10.
  Field solve(const Eigen::SparseMatrix<double>& system, const Field& rhs);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

Field solve_linear(const Eigen::SparseMatrix<double>& system, const Field& rhs);

/// Holds Id + dt H and the solver state across iterations of one flow.
class BefdStepper {
 public:
  BefdStepper(const Discretization& disc, const Nonlinearity& nonlinearity, double dt, double mass);

  /// One semi-implicit gradient step followed by renormalization to mass m.
  Field step(const Field& psi);

  const Eigen::SparseMatrix<double>& last_system() const { return system_; }

 private:
  const Discretization& disc_;
  const Nonlinearity& nonlinearity_;
  double dt_;
  double mass_;
  Eigen::SparseMatrix<double> base_;
  Eigen::SparseMatrix<double> system_;
  std::vector<Eigen::Index> diagonal_;
  LinearSolver solver_;
};

Field befd_step(const Discretization& disc, const Field& psi, const Nonlinearity& nonlinearity, double dt,
                double mass);

/// Rescales a nonzero field to the requested weighted mass.
Field normalize_mass(const Discretization& disc, const Field& psi, double mass);

/// Interior inner product sum_e dx_e sum_k u_k v_k, the natural pairing for
/// vectors that live only on interior nodes such as [H] psi.
double interior_dot(const Mesh& mesh, const Field& u, const Field& v);

/// E = 1/2 <[H] psi, psi>_w - 1/2 sum_w G(psi^2), trapezoid weights; the
/// vertex value of [H] psi is extrapolated from the adjacent nodes.
double discrete_energy(const Discretization& disc, const Field& psi, const Nonlinearity& nonlinearity);

/// mu = <([H] - [g]) psi, psi> / <psi, psi>, interior weights.
double chemical_potential(const Discretization& disc, const Field& psi, const Nonlinearity& nonlinearity);

/// || [H] psi - g(psi^2) psi - mu psi || in the interior weighted norm.
double stationarity_residual(const Discretization& disc, const Field& psi, const Nonlinearity& nonlinearity);

/// Weighted L2 norm (trapezoid with traces) of a field.
double weighted_l2(const Discretization& disc, const Field& f);

FlowResult run_flow(const Discretization& disc, const FlowConfig& config);

}  // namespace grafflow
