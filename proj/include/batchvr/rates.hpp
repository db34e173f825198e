#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace batchvr::rates {

/// Parameters of the Lyapunov contraction L_t = c * Hbar_t + ||w_t - w*||^2
/// for a step size `gamma` under a batch law with mean `expected_batch`.
struct StepCheck {
  double n = 0.0;
  double L = 0.0;
  double mu = 0.0;
  double beta = 0.0;
  double c = 0.0;
  double expected_batch = 1.0;
  double gamma = 0.0;
};

struct GammaVerdict {
  bool upper_ok = false;
  bool lower_ok = false;
  bool valid() const { return upper_ok && lower_ok; }
  /// "" when valid, otherwise "upper", "lower" or "upper+lower".
  std::string violated() const;
};

/// Relative slack applied to both step-size inequalities. The closed-form
/// step sizes sit exactly on the upper bound, so a few ulps must be allowed.
inline constexpr double kBoundSlack = 1e-12;

/// Upper bound gamma <= min(1/((1+beta)L), sqrt(c E|B| / (2(1+1/beta) n L)))
/// and lower bound 2 mu beta gamma^2 + 2(L-mu) gamma / L - c E|B| / n >= 0.
GammaVerdict validate_gamma(const StepCheck& s);

/// rho = min(E|B|/n - 2(1+1/beta) L gamma^2 / c, gamma mu).
double contraction(const StepCheck& s);

/// Step size independent of mu: gamma = 1/(3L), beta = 2, c = n/(3 L E|B|).
StepCheck gamma_adaptive(double n, double L, double mu, double expected_batch);

class InfeasibleTau : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Largest tau for which the batch-dependent step size provably satisfies
/// the lower bound: (1 / (L/(L-mu) + n/(4 kappa E|B|)))^2.
double tau_upper_bound(double n, double L, double mu, double expected_batch);

struct DependentStep {
  StepCheck check;  ///< beta = 1, c = tau n / (L E|B|)
  double tau = 0.0;
  double rho = 0.0;  ///< gamma * mu
};

/// gamma = (c / 8 kappa) (sqrt(1 + 16 kappa E|B| / (c n mu)) - 1) with
/// c = tau n / (L E|B|). Throws InfeasibleTau when tau is outside
/// (0, tau_upper_bound].
DependentStep gamma_dependent(double n, double L, double mu, double tau,
                              double expected_batch);

/// Same formula without the feasibility check; tau only needs to be in (0, 1).
DependentStep gamma_dependent_unchecked(double n, double L, double mu, double tau,
                                        double expected_batch);

/// alpha = 4 kappa / (sqrt(tau) n).
double alpha(double n, double kappa, double tau);

/// Data accesses per unit of accuracy, E^2 / (sqrt(1 + alpha^2 E^2) - 1).
/// Evaluated in the cancellation-free form (1 + sqrt(1 + alpha^2 E^2)) / alpha^2,
/// which also gives the finite limit 2/alpha^2 at E -> 0.
double access_cost_curve(double n, double kappa, double tau, double expected_batch);

/// d/dE of access_cost_curve, which simplifies to E / sqrt(1 + alpha^2 E^2).
double access_cost_derivative(double n, double kappa, double tau, double expected_batch);

/// Running time per unit of accuracy with cache ratio eta:
/// ((B^2 - B) eta + B) / (sqrt(1 + alpha^2 B^2) - 1).
double wall_cost_curve(double n, double kappa, double tau, double eta, double batch);

struct OptimalBatch {
  double batch = 1.0;             ///< root clamped to [1, n]
  double unconstrained = 0.0;     ///< root of the stationarity equation on (0, inf)
  double xi = 0.0;                ///< xi evaluated at the unconstrained root
  double residual = 0.0;          ///< |B - (1/eta - 1)(xi - 1)/(2 - xi)| at that root
  bool clamped = false;
  std::string diagnostic;
};

/// Solves B = (1/eta - 1)(xi - 1)/(2 - xi) with
/// xi = alpha^2 B^2 / (1 + alpha^2 B^2 - sqrt(1 + alpha^2 B^2)) by bracketed
/// bisection, then clamps to [1, n]. eta must lie in (0, 1]; eta = 1 has
/// the root B = 0 and always clamps to 1.
OptimalBatch solve_optimal_batch(double n, double kappa, double tau, double eta);

/// xi(B) from the stationarity equation, computed as 1 + 1/sqrt(1 + alpha^2 B^2).
double xi(double alpha, double batch);

/// Probability of a full pass so that the two-point law has mean `batch`:
/// p = (batch - 1) / (n - 1).
double two_point_params(double batch, double n);

/// Every derived quantity for one problem and batch policy.
struct RatePlan {
  double n = 0.0;
  double L = 0.0;
  double mu = 0.0;
  double kappa = 0.0;
  double tau = 0.0;
  double beta = 0.0;
  double c_lyapunov = 0.0;
  double expected_batch = 1.0;
  double gamma = 0.0;
  double rho = 0.0;
  double alpha = 0.0;
  double eta_cache = 0.0;  ///< 0 when no cache ratio was supplied
  bool gamma_valid = false;
};

/// Batch-dependent step size and contraction for one problem. When tau is
/// outside the provable range the formula is still evaluated and
/// gamma_valid reports the validate_gamma verdict.
RatePlan plan_rates(double n, double L, double mu, double tau, double expected_batch,
                    double eta_cache = 0.0);

}  // namespace batchvr::rates
