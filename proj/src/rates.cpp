#include "batchvr/rates.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace batchvr::rates {

std::string GammaVerdict::violated() const {
  if (valid()) return "";
  if (!upper_ok && !lower_ok) return "upper+lower";
  return upper_ok ? "lower" : "upper";
}

GammaVerdict validate_gamma(const StepCheck& s) {
  GammaVerdict v;
  const double inv_beta = 1.0 / s.beta;
  const double cap_smooth = 1.0 / ((1.0 + s.beta) * s.L);
  const double cap_memory =
      std::sqrt(s.c * s.expected_batch / (2.0 * (1.0 + inv_beta) * s.n * s.L));
  v.upper_ok = s.gamma > 0.0 && s.gamma <= std::min(cap_smooth, cap_memory) * (1.0 + kBoundSlack);

  const double quad = 2.0 * s.mu * s.beta * s.gamma * s.gamma;
  const double lin = 2.0 * (s.L - s.mu) * s.gamma / s.L;
  const double need = s.c * s.expected_batch / s.n;
  v.lower_ok = s.gamma > 0.0 && quad + lin >= need * (1.0 - kBoundSlack);
  return v;
}

double contraction(const StepCheck& s) {
  const double memory_term =
      s.expected_batch / s.n - 2.0 * (1.0 + 1.0 / s.beta) * s.L * s.gamma * s.gamma / s.c;
  return std::min(memory_term, s.gamma * s.mu);
}

StepCheck gamma_adaptive(double n, double L, double mu, double expected_batch) {
  if (!(L > 0.0)) throw std::invalid_argument("L must be positive");
  StepCheck s;
  s.n = n;
  s.L = L;
  s.mu = mu;
  s.beta = 2.0;
  s.c = n / (3.0 * L * expected_batch);
  s.expected_batch = expected_batch;
  s.gamma = 1.0 / (3.0 * L);
  return s;
}

double tau_upper_bound(double n, double L, double mu, double expected_batch) {
  if (!(L > mu)) return 0.0;
  const double kappa = L / mu;
  const double denom = L / (L - mu) + n / (4.0 * kappa * expected_batch);
  return 1.0 / (denom * denom);
}

DependentStep gamma_dependent_unchecked(double n, double L, double mu, double tau,
                                        double expected_batch) {
  if (!(L > 0.0) || !(mu > 0.0)) throw std::invalid_argument("L and mu must be positive");
  if (!(tau > 0.0 && tau < 1.0)) throw std::invalid_argument("tau must lie in (0, 1)");
  if (!(expected_batch >= 1.0 && expected_batch <= n))
    throw std::invalid_argument("expected batch must lie in [1, n]");
  const double kappa = L / mu;
  const double c = tau * n / (L * expected_batch);
  const double x = 16.0 * kappa * expected_batch / (c * n * mu);
  // sqrt(1 + x) - 1 written without cancellation.
  const double gamma = c / (8.0 * kappa) * (x / (std::sqrt(1.0 + x) + 1.0));

  DependentStep out;
  out.check = {n, L, mu, 1.0, c, expected_batch, gamma};
  out.tau = tau;
  out.rho = gamma * mu;
  return out;
}

DependentStep gamma_dependent(double n, double L, double mu, double tau,
                              double expected_batch) {
  const double bound = tau_upper_bound(n, L, mu, expected_batch);
  if (!(tau > 0.0) || tau > bound) {
    std::ostringstream msg;
    msg << "tau=" << tau << " is infeasible: the lower step-size bound needs "
        << "tau <= (1/(L/(L-mu) + n/(4 kappa E|B|)))^2 = " << bound;
    throw InfeasibleTau(msg.str());
  }
  return gamma_dependent_unchecked(n, L, mu, tau, expected_batch);
}

double alpha(double n, double kappa, double tau) {
  return 4.0 * kappa / (std::sqrt(tau) * n);
}

double access_cost_curve(double n, double kappa, double tau, double expected_batch) {
  const double a = alpha(n, kappa, tau);
  const double ab = a * expected_batch;
  return (1.0 + std::sqrt(1.0 + ab * ab)) / (a * a);
}

double access_cost_derivative(double n, double kappa, double tau, double expected_batch) {
  const double ab = alpha(n, kappa, tau) * expected_batch;
  return expected_batch / std::sqrt(1.0 + ab * ab);
}

double wall_cost_curve(double n, double kappa, double tau, double eta, double batch) {
  const double a = alpha(n, kappa, tau);
  const double ab2 = a * a * batch * batch;
  const double s = std::sqrt(1.0 + ab2);
  // sqrt(1 + x) - 1 == x / (sqrt(1 + x) + 1)
  const double denom = ab2 / (s + 1.0);
  return ((batch * batch - batch) * eta + batch) / denom;
}

double xi(double a, double batch) {
  const double ab = a * batch;
  return 1.0 + 1.0 / std::sqrt(1.0 + ab * ab);
}

namespace {

// B - k (xi - 1)/(2 - xi); (xi - 1)/(2 - xi) == 1/(s - 1) == (s + 1)/(a B)^2.
double stationarity_gap(double a, double k, double batch) {
  const double ab2 = a * a * batch * batch;
  const double s = std::sqrt(1.0 + ab2);
  return batch - k * (s + 1.0) / ab2;
}

}  // namespace

OptimalBatch solve_optimal_batch(double n, double kappa, double tau, double eta) {
  if (!(eta > 0.0 && eta <= 1.0)) throw std::invalid_argument("eta must lie in (0, 1]");
  if (!(n >= 1.0)) throw std::invalid_argument("n must be >= 1");
  const double a = alpha(n, kappa, tau);
  const double k = 1.0 / eta - 1.0;

  OptimalBatch out;
  if (k == 0.0) {
    out.unconstrained = 0.0;
    out.xi = 2.0;
    out.residual = 0.0;
  } else {
    // The gap increases monotonically from -inf at 0+ to +inf.
    double lo = 1.0;
    while (stationarity_gap(a, k, lo) >= 0.0) lo *= 0.5;
    double hi = 1.0;
    while (stationarity_gap(a, k, hi) <= 0.0) hi *= 2.0;
    for (int it = 0; it < 2000 && hi - lo > 0.0; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (mid <= lo || mid >= hi) break;
      if (stationarity_gap(a, k, mid) < 0.0) lo = mid;
      else hi = mid;
    }
    const double glo = std::abs(stationarity_gap(a, k, lo));
    const double ghi = std::abs(stationarity_gap(a, k, hi));
    out.unconstrained = glo <= ghi ? lo : hi;
    out.residual = std::min(glo, ghi);
    out.xi = xi(a, out.unconstrained);
  }

  out.batch = std::clamp(out.unconstrained, 1.0, n);
  out.clamped = out.batch != out.unconstrained;
  if (out.clamped) {
    std::ostringstream msg;
    msg << "stationary point B=" << out.unconstrained << " lies outside [1, " << n
        << "]; clamped to " << out.batch;
    out.diagnostic = msg.str();
  }
  return out;
}

double two_point_params(double batch, double n) {
  if (!(batch >= 1.0 && batch <= n)) throw std::invalid_argument("batch must lie in [1, n]");
  if (n <= 1.0) return 0.0;
  return (batch - 1.0) / (n - 1.0);
}

RatePlan plan_rates(double n, double L, double mu, double tau, double expected_batch,
                    double eta_cache) {
  const DependentStep step = gamma_dependent_unchecked(n, L, mu, tau, expected_batch);
  RatePlan p;
  p.n = n;
  p.L = L;
  p.mu = mu;
  p.kappa = L / mu;
  p.tau = tau;
  p.beta = step.check.beta;
  p.c_lyapunov = step.check.c;
  p.expected_batch = expected_batch;
  p.gamma = step.check.gamma;
  p.rho = step.rho;
  p.alpha = alpha(n, p.kappa, tau);
  p.eta_cache = eta_cache;
  p.gamma_valid = validate_gamma(step.check).valid();
  return p;
}

}  // namespace batchvr::rates
