#include "grafflow/analytic_library.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>

#include "grafflow/error.hpp"

namespace grafflow {

namespace {

double sech(double x) { return 1.0 / std::cosh(x); }

// sqrt(2 omega) sech(sqrt(omega) x + shift), scaled by sign.
std::function<double(double)> sech_profile(double omega, double shift, double sign) {
  const double amp = sign * std::sqrt(2.0 * omega);
  const double s = std::sqrt(omega);
  return [amp, s, shift](double x) { return amp * sech(s * x + shift); };
}

void require_positive_frequency(double omega) {
  if (!(std::isfinite(omega) && omega > 0.0)) {
    throw Error(ErrorKind::FrequencyTooSmall, "frequency must be positive");
  }
}

AnalyticState delta_prime_symmetric(double omega, double beta) {
  const double s = std::sqrt(omega);
  const double xbar = std::atanh(2.0 / (beta * s)) / s;
  AnalyticState st;
  st.kind = StateKind::DeltaPrimeSymmetric;
  st.omega = omega;
  st.beta = beta;
  st.x_minus = -xbar;
  st.x_plus = xbar;
  st.mass = 4.0 * s - 8.0 / beta;
  st.energy = 2.0 / 3.0 * (8.0 / (beta * beta * beta) - omega * s);
  st.profile = {sech_profile(omega, s * xbar, -1.0), sech_profile(omega, s * xbar, 1.0)};
  return st;
}

AnalyticState delta_prime_asymmetric(double omega, double beta) {
  const auto root = solve_transcendental(omega, beta);
  const double s = std::sqrt(omega);
  const double tm = std::tanh(s * root.x_minus);
  const double tp = std::tanh(s * root.x_plus);
  const double sum_sech = sech(s * root.x_minus) + sech(s * root.x_plus);
  AnalyticState st;
  st.kind = StateKind::DeltaPrimeAsymmetric;
  st.omega = omega;
  st.beta = beta;
  st.x_minus = root.x_minus;
  st.x_plus = root.x_plus;
  st.mass = 2.0 * s * (2.0 + tm - tp);
  st.energy = omega * s / 3.0 * (-2.0 - 3.0 * (tm - tp) + 2.0 * (tm * tm * tm - tp * tp * tp)) -
              omega / beta * sum_sech * sum_sech;
  // Edge 1 is centred at |x_-| outside the half-line, edge 2 at x_+.
  st.profile = {sech_profile(omega, -s * root.x_minus, -1.0), sech_profile(omega, s * root.x_plus, 1.0)};
  return st;
}

}  // namespace

std::string AnalyticState::describe() const {
  std::ostringstream os;
  switch (kind) {
    case StateKind::KirchhoffSoliton: os << "kirchhoff_soliton(m=" << mass << ")"; break;
    case StateKind::Delta: os << "delta(omega=" << omega << ", alpha=" << alpha << ")"; break;
    case StateKind::DeltaPrimeSymmetric: os << "delta_prime_sym(omega=" << omega << ", beta=" << beta << ")"; break;
    case StateKind::DeltaPrimeAsymmetric:
      os << "delta_prime_asym(omega=" << omega << ", beta=" << beta << ", x-=" << x_minus << ", x+=" << x_plus << ")";
      break;
  }
  return os.str();
}

AnalyticState kirchhoff_soliton(double mass) {
  if (!(std::isfinite(mass) && mass > 0.0)) throw Error(ErrorKind::NonpositiveMass, "soliton mass must be positive");
  AnalyticState st;
  st.kind = StateKind::KirchhoffSoliton;
  st.mass = mass;
  st.omega = mass * mass / 16.0;
  st.energy = -mass * mass * mass / 96.0;
  const double amp = mass / (2.0 * std::numbers::sqrt2);
  const auto profile = [amp, mass](double x) { return amp * sech(mass * x / 4.0); };
  st.profile = {profile, profile};
  return st;
}

AnalyticState delta_ground_state(double omega, double alpha) {
  if (!(std::isfinite(alpha) && alpha < 0.0)) {
    throw Error(ErrorKind::InvalidParameter, "explicit delta ground states need an attractive strength alpha < 0");
  }
  require_positive_frequency(omega);
  const double s = std::sqrt(omega);
  const double arg = std::abs(alpha) / (2.0 * s);
  if (arg >= 1.0) {
    std::ostringstream os;
    os << "omega = " << omega << " must exceed alpha^2/4 = " << alpha * alpha / 4.0;
    throw Error(ErrorKind::FrequencyTooSmall, os.str());
  }
  const double a = std::atanh(arg) / s;
  AnalyticState st;
  st.kind = StateKind::Delta;
  st.omega = omega;
  st.alpha = alpha;
  st.mass = 4.0 * s + 2.0 * alpha;
  st.energy = -2.0 / 3.0 * omega * s - alpha * alpha * alpha / 12.0;
  // cosh(s (x - sign(alpha) a)) with alpha < 0.
  const auto profile = sech_profile(omega, s * a, 1.0);
  st.profile = {profile, profile};
  return st;
}

std::array<double, 2> transcendental_residuals(double omega, double beta, double x_minus, double x_plus) {
  const double s = std::sqrt(omega);
  const double p = s * x_plus;
  const double m = s * x_minus;
  return {std::tanh(p) * sech(p) + std::tanh(m) * sech(m),
          sech(p) + sech(m) - beta * s * std::tanh(p) * sech(p)};
}

TranscendentalRoot solve_transcendental(double omega, double beta) {
  if (!(std::isfinite(beta) && beta > 0.0)) throw Error(ErrorKind::InvalidParameter, "beta must be positive");
  require_positive_frequency(omega);
  const double k = beta * std::sqrt(omega);
  if (k * k <= 8.0) {
    std::ostringstream os;
    os << "no asymmetric solution for omega = " << omega << " <= 8/beta^2 = " << 8.0 / (beta * beta);
    throw Error(ErrorKind::FrequencyTooSmall, os.str());
  }
  // The first equation pairs u = s x_+ with |s x_-| through
  // sinh(u) sinh|s x_-| = 1, which turns sech(s x_-) into tanh(u). What is
  // left is a scalar equation in u on (0, asinh 1).
  auto reduced = [k](double u) { return sech(u) + std::tanh(u) - k * std::tanh(u) * sech(u); };
  auto reduced_prime = [k](double u) {
    const double t = std::tanh(u), c = sech(u);
    return -t * c + c * c - k * (c * c * c - t * t * c);
  };

  double lo = 0.0, hi = std::asinh(1.0);
  if (!(reduced(lo) > 0.0 && reduced(hi) < 0.0)) {
    throw Error(ErrorKind::RootFindFailure, "transcendental system is not bracketed");
  }
  for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
    const double mid = 0.5 * (lo + hi);
    (reduced(mid) > 0.0 ? lo : hi) = mid;
  }
  double u = 0.5 * (lo + hi);
  for (int it = 0; it < 5; ++it) {
    const double d = reduced_prime(u);
    if (d == 0.0) break;
    const double next = u - reduced(u) / d;
    if (!(next > 0.0 && next < std::asinh(1.0))) break;
    u = next;
  }

  const double s = std::sqrt(omega);
  TranscendentalRoot root{-std::asinh(1.0 / std::sinh(u)) / s, u / s};
  const auto res = transcendental_residuals(omega, beta, root.x_minus, root.x_plus);
  if (!(std::abs(res[0]) <= 1e-12 && std::abs(res[1]) <= 1e-12)) {
    std::ostringstream os;
    os << "transcendental residuals " << res[0] << ", " << res[1] << " above 1e-12";
    throw Error(ErrorKind::RootFindFailure, os.str());
  }
  return root;
}

std::vector<AnalyticState> delta_prime_states(double omega, double beta) {
  if (!(std::isfinite(beta) && beta > 0.0)) throw Error(ErrorKind::InvalidParameter, "beta must be positive");
  require_positive_frequency(omega);
  const double b2 = beta * beta;
  if (omega * b2 <= 4.0) {
    std::ostringstream os;
    os << "omega = " << omega << " must exceed 4/beta^2 = " << 4.0 / b2;
    throw Error(ErrorKind::FrequencyTooSmall, os.str());
  }
  std::vector<AnalyticState> out{delta_prime_symmetric(omega, beta)};
  if (omega * b2 > 8.0) out.push_back(delta_prime_asymmetric(omega, beta));
  return out;
}

AnalyticState delta_prime_ground_state(double omega, double beta) {
  auto states = delta_prime_states(omega, beta);
  return states.back();
}

AnalyticState mirror_image(const AnalyticState& state) {
  AnalyticState out = state;
  auto first = state.profile[0];
  auto second = state.profile[1];
  out.profile[0] = [second](double x) { return -second(x); };
  out.profile[1] = [first](double x) { return -first(x); };
  return out;
}

TwoStarLayout two_star_layout(const MetricGraph& graph) {
  if (graph.edges().size() != 2) {
    throw Error(ErrorKind::TopologyMismatch, "analytic states live on the two-edge star");
  }
  const auto& e0 = graph.edge(0);
  const auto& e1 = graph.edge(1);
  for (const auto* e : {&e0, &e1}) {
    if (e->from == e->to) throw Error(ErrorKind::TopologyMismatch, "two-edge star cannot contain a loop");
  }
  std::optional<std::size_t> center;
  for (const auto c : {e0.from, e0.to}) {
    if ((c == e1.from || c == e1.to) && graph.degree(c) == 2) center = c;
  }
  if (!center) throw Error(ErrorKind::TopologyMismatch, "the two edges do not meet at a degree-2 vertex");
  TwoStarLayout layout;
  layout.center = *center;
  layout.edges = {0, 1};
  layout.starts_at_center = {e0.from == *center, e1.from == *center};
  for (std::size_t i = 0; i < 2; ++i) {
    const auto& e = graph.edge(i);
    const auto outer = layout.starts_at_center[i] ? e.to : e.from;
    if (outer == *center || graph.degree(outer) != 1) {
      throw Error(ErrorKind::TopologyMismatch, "outer ends of the star must be degree-1 vertices");
    }
  }
  return layout;
}

double distance_from_center(const TwoStarLayout& layout, const Mesh& mesh, std::size_t i, std::size_t k) {
  const auto e = layout.edges[i];
  const double x = mesh.coordinate(e, k);
  return layout.starts_at_center[i] ? x : mesh.length(e) - x;
}

Field sample_on_mesh(const AnalyticState& state, const MetricGraph& graph, const Mesh& mesh) {
  const auto layout = two_star_layout(graph);
  Field f(static_cast<Eigen::Index>(mesh.total_nodes()));
  for (std::size_t i = 0; i < 2; ++i) {
    const auto e = layout.edges[i];
    for (std::size_t k = 1; k <= mesh.node_count(e); ++k) {
      f(static_cast<Eigen::Index>(mesh.index(e, k))) = state.value(i, distance_from_center(layout, mesh, i, k));
    }
  }
  return f;
}

}  // namespace grafflow
