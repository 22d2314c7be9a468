#pragma once

#include <functional>
#include <string>

namespace grafflow {

/// Gauge-invariant nonlinearity f(u) = g(|u|^2) u. Stores g and its
/// antiderivative G with G(0) = 0; the energy density is -G(|u|^2)/2.
class Nonlinearity {
 public:
  enum class Kind { Power, DoublePower, Custom };

  /// f(u) = sign |u|^{p-1} u; sign = +1 is focusing.
  static Nonlinearity power(double sign, double p);
  /// f(u) = |u|^{p-1} u - |u|^{q-1} u.
  static Nonlinearity double_power(double p, double q);
  static Nonlinearity custom(std::function<double(double)> g, std::function<double(double)> big_g,
                             std::string name = "custom");
  /// Focusing cubic, g(s) = s.
  static Nonlinearity cubic() { return power(1.0, 3.0); }
  static Nonlinearity none() { return power(0.0, 3.0); }

  Kind kind() const { return kind_; }
  const std::string& name() const { return name_; }

  double g(double s) const { return g_(s); }
  double antiderivative(double s) const { return big_g_(s); }

 private:
  Kind kind_ = Kind::Custom;
  std::string name_;
  std::function<double(double)> g_;
  std::function<double(double)> big_g_;
};

}  // namespace grafflow
