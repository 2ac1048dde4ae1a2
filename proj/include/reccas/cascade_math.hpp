#pragma once

// Log-domain transmission kernels shared by training, evaluation, and
// simulation, plus their right-censored variants. Conventions:
//   a(k,r,delta) = k * r * exp(-r*delta)        (infection density at delay)
//   b(k,r,delta) = k * exp(-r*delta) + 1 - k    (no infection before delay)
//   h            = prod(b) * sum(a/b)           (first-infection density)
//   g            = prod(1 - k)                  (never infected, long-horizon
//                                                approximation; the exact
//                                                horizon form appears only in
//                                                censoring denominators)
// Callers pass log k and log(1-k) (pre-clamped by the model layer) plus
// (log r, r); -kNegInf represents log 0 with saturating behavior.

#include <cstddef>
#include <span>

namespace reccas::cm {

inline constexpr double kNegInf = -1e30;

// Stable log(exp(x) + exp(y)).
double lse2(double x, double y);

// log a = log_k + log_r - r*delta, delta = t_v - t_u > 0.
double log_a(double log_k, double log_r, double r, double delta);

// log b = log(k*exp(-r*delta) + 1 - k).
double log_b(double log_k, double log_1mk, double r, double delta);

// log h from per-candidate log a / log b values (product form,
// sum(log_b) + logsumexp(log_a - log_b)); vectors must be non-empty.
double log_h(std::span<const double> log_as, std::span<const double> log_bs);

// log g = sum of log(1-k) over the infected attackers of one node.
double log_g(std::span<const double> log_1mks);

// Censoring denominator: probability that u (infected at t_u < tau) did not
// infect the target before tau. Equals b evaluated at delay tau - t_u.
double log_censor_den(double log_k, double log_1mk, double r, double tau,
                      double t_u);

// Conditional kernels for a target with t_v >= tau (t_v may be +inf for b).
// For t_u >= tau they equal the unconditional values.
double log_a_cond(double log_k, double log_1mk, double log_r, double r,
                  double t_u, double t_v, double tau);
double log_b_cond(double log_k, double log_1mk, double r, double t_u,
                  double t_v, double tau);

}  // namespace reccas::cm
