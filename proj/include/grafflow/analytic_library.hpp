#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "grafflow/fd_discretization.hpp"
#include "grafflow/graph_model.hpp"

namespace grafflow {

enum class StateKind { KirchhoffSoliton, Delta, DeltaPrimeSymmetric, DeltaPrimeAsymmetric };

/// Closed-form stationary state of the focusing cubic NLS on the two-edge
/// star. Profiles take the distance x >= 0 from the central vertex; masses
/// and energies refer to the untruncated half-lines.
struct AnalyticState {
  StateKind kind = StateKind::KirchhoffSoliton;
  double omega = 0.0;
  double mass = 0.0;
  double energy = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
  // Offsets of the transcendental system for the delta' family.
  double x_minus = 0.0;
  double x_plus = 0.0;
  std::array<std::function<double(double)>, 2> profile;

  double value(std::size_t edge, double x) const { return profile.at(edge)(x); }
  std::string describe() const;
};

AnalyticState kirchhoff_soliton(double mass);
AnalyticState delta_ground_state(double omega, double alpha);

/// Symmetric (odd) state, plus the asymmetric one when omega > 8 / beta^2.
std::vector<AnalyticState> delta_prime_states(double omega, double beta);
/// The energy minimizer among delta_prime_states.
AnalyticState delta_prime_ground_state(double omega, double beta);

/// Edges swapped and sign flipped. The delta' condition is invariant under
/// this map, so the asymmetric state comes in two mirror copies.
AnalyticState mirror_image(const AnalyticState& state);

struct TranscendentalRoot {
  double x_minus = 0.0;
  double x_plus = 0.0;
};

/// Asymmetric solution x_- < 0 < x_+ < |x_-| of
///   tanh(s x_+)/cosh(s x_+) + tanh(s x_-)/cosh(s x_-) = 0,
///   1/cosh(s x_+) + 1/cosh(s x_-) = beta s tanh(s x_+)/cosh(s x_+),  s = sqrt(omega).
TranscendentalRoot solve_transcendental(double omega, double beta);
std::array<double, 2> transcendental_residuals(double omega, double beta, double x_minus, double x_plus);

/// Central vertex and edge orientation of a two-edge star. Edge 1 is the
/// first declared edge.
struct TwoStarLayout {
  std::size_t center = 0;
  std::array<std::size_t, 2> edges{0, 1};
  std::array<bool, 2> starts_at_center{true, true};
};

TwoStarLayout two_star_layout(const MetricGraph& graph);

/// Distance from the central vertex of interior node k on star edge i.
double distance_from_center(const TwoStarLayout& layout, const Mesh& mesh, std::size_t i, std::size_t k);

Field sample_on_mesh(const AnalyticState& state, const MetricGraph& graph, const Mesh& mesh);

}  // namespace grafflow
