#include "grafflow/nonlinearity.hpp"

#include <cmath>
#include <sstream>

#include "grafflow/error.hpp"

namespace grafflow {

namespace {

void require_exponent(double p) {
  if (!(std::isfinite(p) && p > 1.0)) {
    throw Error(ErrorKind::InvalidParameter, "nonlinearity exponent must be finite and > 1");
  }
}

}  // namespace

Nonlinearity Nonlinearity::power(double sign, double p) {
  require_exponent(p);
  Nonlinearity n;
  n.kind_ = Kind::Power;
  std::ostringstream os;
  os << "power(" << sign << ", " << p << ")";
  n.name_ = os.str();
  const double half = 0.5 * (p - 1.0);
  const double top = 0.5 * (p + 1.0);
  if (p == 3.0) {
    n.g_ = [sign](double s) { return sign * s; };
    n.big_g_ = [sign](double s) { return 0.5 * sign * s * s; };
  } else {
    n.g_ = [sign, half](double s) { return sign * std::pow(s, half); };
    n.big_g_ = [sign, top](double s) { return sign * std::pow(s, top) / top; };
  }
  return n;
}

Nonlinearity Nonlinearity::double_power(double p, double q) {
  require_exponent(p);
  require_exponent(q);
  Nonlinearity n;
  n.kind_ = Kind::DoublePower;
  std::ostringstream os;
  os << "double_power(" << p << ", " << q << ")";
  n.name_ = os.str();
  n.g_ = [p, q](double s) { return std::pow(s, 0.5 * (p - 1.0)) - std::pow(s, 0.5 * (q - 1.0)); };
  n.big_g_ = [p, q](double s) {
    return std::pow(s, 0.5 * (p + 1.0)) / (0.5 * (p + 1.0)) - std::pow(s, 0.5 * (q + 1.0)) / (0.5 * (q + 1.0));
  };
  return n;
}

Nonlinearity Nonlinearity::custom(std::function<double(double)> g, std::function<double(double)> big_g,
                                  std::string name) {
  if (!g || !big_g) throw Error(ErrorKind::InvalidParameter, "custom nonlinearity needs both g and G");
  Nonlinearity n;
  n.kind_ = Kind::Custom;
  n.name_ = std::move(name);
  n.g_ = std::move(g);
  n.big_g_ = std::move(big_g);
  return n;
}

}  // namespace grafflow
