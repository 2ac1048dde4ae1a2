#include "reccas/cascade_math.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "reccas/kernels.hpp"

namespace reccas::cm {

double lse2(double x, double y) {
  const double m = std::max(x, y);
  if (m <= kNegInf) return kNegInf;
  return m + std::log1p(std::exp(std::min(x, y) - m));
}

double log_a(double log_k, double log_r, double r, double delta) {
  if (!(delta > 0.0)) {
    throw std::domain_error("log_a requires t_v > t_u");
  }
  if (log_k <= kNegInf) return kNegInf;
  return log_k + log_r - r * delta;
}

double log_b(double log_k, double log_1mk, double r, double delta) {
  return lse2(log_k <= kNegInf ? kNegInf : log_k - r * delta, log_1mk);
}

double log_h(std::span<const double> log_as, std::span<const double> log_bs) {
  if (log_as.empty() || log_as.size() != log_bs.size()) {
    throw std::domain_error("log_h needs matching non-empty candidate terms");
  }
  double sum_b = 0.0;
  double max_ratio = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < log_as.size(); ++i) {
    sum_b += log_bs[i];
    max_ratio = std::max(max_ratio, log_as[i] - log_bs[i]);
  }
  if (max_ratio <= kNegInf) return kNegInf;
  double acc = 0.0;
  for (std::size_t i = 0; i < log_as.size(); ++i) {
    acc += std::exp(log_as[i] - log_bs[i] - max_ratio);
  }
  return std::max(sum_b + max_ratio + std::log(acc), kNegInf);
}

double log_g(std::span<const double> log_1mks) {
  double sum = 0.0;
  for (const double x : log_1mks) sum += x;
  return std::max(sum, kNegInf);
}

double log_censor_den(double log_k, double log_1mk, double r, double tau,
                      double t_u) {
  return log_b(log_k, log_1mk, r, tau - t_u);
}

double log_a_cond(double log_k, double log_1mk, double log_r, double r,
                  double t_u, double t_v, double tau) {
  if (t_v < tau) {
    throw std::invalid_argument("conditional a scores only targets with t_v >= tau");
  }
  const double base = log_a(log_k, log_r, r, t_v - t_u);
  if (t_u >= tau) return base;
  return base - log_censor_den(log_k, log_1mk, r, tau, t_u);
}

double log_b_cond(double log_k, double log_1mk, double r, double t_u,
                  double t_v, double tau) {
  const bool never = std::isinf(t_v);
  if (!never && t_v < tau) {
    throw std::invalid_argument("conditional b scores only targets with t_v >= tau");
  }
  const double base = never ? log_1mk : log_b(log_k, log_1mk, r, t_v - t_u);
  if (t_u >= tau) return base;
  return base - log_censor_den(log_k, log_1mk, r, tau, t_u);
}

}  // namespace reccas::cm
