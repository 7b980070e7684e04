#pragma once

#include <cmath>
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>

namespace kk {

/// Thrown when an input violates a documented precondition.
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Thrown when a numerical diagnostic fails (nonconvergence, truncation, aliasing).
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Global physics configuration. kappa is always derived from gamma and s.
struct ModelParams {
  int d = 2;
  double s = 0.5;
  double gamma = -2.0;
  double delta0 = 0.5;
  double chi_inner = 1.0;
  double chi_outer = 2.0;

  double kappa() const { return -(gamma + 2.0 * s); }
  bool landau() const { return s == 1.0; }

  void validate() const {
    if (d != 2 && d != 3) throw ValidationError("model.d must be 2 or 3");
    if (!(s > 0.0 && s <= 1.0)) throw ValidationError("model.s must lie in (0,1]");
    double k = kappa();
    if (!(k >= 0.0 && k < d)) {
      std::ostringstream os;
      os << "kappa = " << k << " must lie in [0," << d << "); gamma must lie in (-d-2s,-2s]";
      throw ValidationError(os.str());
    }
    if (!(delta0 > 0.0 && delta0 < 1.0)) throw ValidationError("model.delta0 must lie in (0,1)");
  }

  static ModelParams make(int d, double s, double gamma, double delta0 = 0.5) {
    ModelParams p;
    p.d = d;
    p.s = s;
    p.gamma = gamma;
    p.delta0 = delta0;
    p.validate();
    return p;
  }
};

/// Node counts, truncation radii and tolerances for the deterministic integrals.
struct QuadratureSpec {
  int radial_nodes = 48;     // Gauss-Legendre per radial panel
  int angular_nodes = 64;    // trapezoid nodes on the circle / per sphere axis
  int line_nodes = 24;       // per panel for hyperplane integrals
  int tau_nodes = 16;        // Gauss-Legendre order in time
  double v_trunc = 12.0;     // truncation radius for Maxwellian-weighted integrals
  double rel_tol = 1e-10;    // adaptive quadrature tolerance
  double lambda_cut = 30.0;  // frequency-box truncation level
  std::size_t fft_budget = std::size_t(1) << 25;  // max complex points in one FFT

  QuadratureSpec refined() const {
    QuadratureSpec q = *this;
    q.radial_nodes = radial_nodes * 3 / 2;
    q.angular_nodes = angular_nodes * 3 / 2;
    q.line_nodes = line_nodes * 3 / 2;
    q.tau_nodes = tau_nodes * 3 / 2;
    q.rel_tol = rel_tol * 0.1;
    return q;
  }
};

inline std::uint64_t fnv1a(const std::string& s, std::uint64_t h = 1469598103934665603ull) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string params_key(const ModelParams& p, const QuadratureSpec& q) {
  std::ostringstream os;
  os.precision(17);
  os << p.d << ',' << p.s << ',' << p.gamma << ',' << p.delta0 << ';' << q.radial_nodes << ','
     << q.angular_nodes << ',' << q.line_nodes << ',' << q.tau_nodes << ',' << q.v_trunc << ','
     << q.rel_tol << ',' << q.lambda_cut;
  return os.str();
}

inline std::string params_hash(const ModelParams& p, const QuadratureSpec& q) {
  std::ostringstream os;
  os << std::hex << fnv1a(params_key(p, q));
  return os.str();
}

}  // namespace kk
