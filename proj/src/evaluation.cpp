#include "reccas/evaluation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "reccas/cascade_math.hpp"
#include "reccas/errors.hpp"
#include "reccas/generator.hpp"
#include "reccas/inference.hpp"
#include "reccas/kernels.hpp"
#include "reccas/rng.hpp"

namespace reccas {
namespace {

constexpr double kProbLo = 1e-6;
constexpr double kProbHi = 1.0 - 1e-6;

double clamp_prob(double p) { return std::min(kProbHi, std::max(kProbLo, p)); }

struct Timer {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double ms() const {
    return std::chrono::duration<double, std::milli>(
               std::chrono::steady_clock::now() - t0)
        .count();
  }
};

std::size_t sample_categorical(const std::vector<double>& log_probs,
                               Rng& rng) {
  const double r = rng.uniform();
  double acc = 0.0;
  for (std::size_t j = 0; j < log_probs.size(); ++j) {
    acc += std::exp(log_probs[j]);
    if (r < acc) return j;
  }
  return log_probs.size() - 1;
}

std::vector<char> infected_mask(const Episode& ep, int n) {
  std::vector<char> mask(static_cast<std::size_t>(n), 0);
  for (int v : ep.nodes) mask[static_cast<std::size_t>(v)] = 1;
  return mask;
}

// Exact log p(D | D^tau) for the stateless families: conditional h terms for
// the positions at or after tau, conditional survival for never-infected
// nodes. tau = 0 reduces every kernel to its plain form.
double exact_conditional_loglik(const Model& model, const Episode& ep,
                                double tau) {
  const State none;
  double total = 0.0;
  std::vector<double> las, lbs;
  for (std::size_t i = 1; i < ep.size(); ++i) {
    if (ep.times[i] < tau) continue;  // prefix is conditioned on, not scored
    const int v = ep.nodes[i];
    las.assign(i, 0.0);
    lbs.assign(i, 0.0);
    for (std::size_t u = 0; u < i; ++u) {
      const int nu = ep.nodes[u];
      const double log_k = model.log_k(none, nu, v);
      const double log_1mk = model.log_1mk(none, nu, v);
      const double log_r = model.log_r(nu, v);
      const double r = model.r(nu, v);
      las[u] = cm::log_a_cond(log_k, log_1mk, log_r, r, ep.times[u],
                              ep.times[i], tau);
      lbs[u] = cm::log_b_cond(log_k, log_1mk, r, ep.times[u], ep.times[i],
                              tau);
    }
    total += cm::log_h(las, lbs);
  }
  const std::vector<char> infected = infected_mask(ep, model.n);
  const double never = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < ep.size(); ++j) {
    const int nj = ep.nodes[j];
    for (int w = 1; w < model.n; ++w) {
      if (infected[static_cast<std::size_t>(w)]) continue;
      total += cm::log_b_cond(model.log_k(none, nj, w),
                              model.log_1mk(none, nj, w), model.r(nj, w),
                              ep.times[j], never, tau);
    }
  }
  return total;
}

// One filtering sample of the trajectory plus the conditional joint
// log p(D, I | D^tau, I^tau) and the suffix share of log q. The filtering
// posterior is unchanged by conditioning (the censor denominators cancel in
// the a/b ratios), so the prefix draws double as the I^tau sample.
struct CondSample {
  double joint = 0.0;
  double logq_suffix = 0.0;
};

CondSample sampled_conditional(const Model& model, const Episode& ep,
                               double tau, Rng& rng) {
  const std::size_t m = ep.size();
  const bool rec = model.needs_states();
  const State none;
  std::vector<State> states;
  if (rec) {
    states.resize(m);
    states[0] = model.initial_state();
  }
  CondSample out;
  std::vector<double> lk, l1mk, lr, rr, logits;
  for (std::size_t i = 1; i < m; ++i) {
    const int v = ep.nodes[i];
    const double t_v = ep.times[i];
    lk.assign(i, 0.0);
    l1mk.assign(i, 0.0);
    lr.assign(i, 0.0);
    rr.assign(i, 0.0);
    logits.assign(i, 0.0);
    for (std::size_t u = 0; u < i; ++u) {
      const State& z_u = rec ? states[u] : none;
      const int nu = ep.nodes[u];
      lk[u] = model.log_k(z_u, nu, v);
      l1mk[u] = model.log_1mk(z_u, nu, v);
      lr[u] = model.log_r(nu, v);
      rr[u] = model.r(nu, v);
      const double delta = t_v - ep.times[u];
      logits[u] = cm::log_a(lk[u], lr[u], rr[u], delta) -
                  cm::log_b(lk[u], l1mk[u], rr[u], delta);
    }
    const double lse = kernels::logsumexp(logits.data(), logits.size());
    if (!std::isfinite(lse) || lse < cm::kNegInf / 2) {
      out.joint = -std::numeric_limits<double>::infinity();
      return out;
    }
    for (double& l : logits) l -= lse;
    const std::size_t pick = sample_categorical(logits, rng);
    if (t_v >= tau) {
      out.logq_suffix += logits[pick];
      for (std::size_t u = 0; u < i; ++u) {
        out.joint +=
            (u == pick)
                ? cm::log_a_cond(lk[u], l1mk[u], lr[u], rr[u], ep.times[u],
                                 t_v, tau)
                : cm::log_b_cond(lk[u], l1mk[u], rr[u], ep.times[u], t_v, tau);
      }
    }
    if (rec) states[i] = model.state_update(states[pick], v);
  }
  const std::vector<char> infected = infected_mask(ep, model.n);
  const double never = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < m; ++j) {
    const State& z_j = rec ? states[j] : none;
    const int nj = ep.nodes[j];
    for (int w = 1; w < model.n; ++w) {
      if (infected[static_cast<std::size_t>(w)]) continue;
      out.joint += cm::log_b_cond(model.log_k(z_j, nj, w),
                                  model.log_1mk(z_j, nj, w), model.r(nj, w),
                                  ep.times[j], never, tau);
    }
  }
  return out;
}

}  // namespace

std::string metric_name(Metric m) {
  switch (m) {
    case Metric::kNll: return "nll";
    case Metric::kCe: return "ce";
    case Metric::kInf: return "inf";
  }
  throw std::logic_error("unknown metric");
}

Metric metric_from_name(const std::string& name) {
  if (name == "nll") return Metric::kNll;
  if (name == "ce") return Metric::kCe;
  if (name == "inf") return Metric::kInf;
  throw UsageError("unknown metric: " + name);
}

double indicator_cross_entropy(const std::vector<double>& probs,
                               const Episode& ep) {
  const std::size_t n = probs.size();
  for (int v : ep.nodes) {
    if (v < 0 || static_cast<std::size_t>(v) >= n) {
      throw std::invalid_argument("episode node outside the probability vector");
    }
  }
  const std::vector<char> mask = infected_mask(ep, static_cast<int>(n));
  double ce = 0.0;
  for (std::size_t v = 0; v < n; ++v) {
    const double p = clamp_prob(probs[v]);
    ce -= mask[v] ? std::log(p) : std::log1p(-p);
  }
  return ce / static_cast<double>(n);
}

double resolve_condition_level(int level, double max_t) {
  if (!(max_t > 0.0)) throw std::invalid_argument("maxT must be positive");
  switch (level) {
    case 0: return 0.0;
    case 1: return 1.0 + 1e-9;
    case 2: return max_t / 10.0;
    case 3: return max_t / 20.0;
    default: throw UsageError("unknown conditioning level");
  }
}

MetricsReport nll(const Model& model, const std::vector<Episode>& episodes,
                  int S, int level, double tau, std::uint64_t seed) {
  if (S < 1) throw std::invalid_argument("S must be >= 1");
  if (episodes.empty()) throw std::invalid_argument("no episodes");
  if (tau < 0.0) throw std::invalid_argument("tau must be >= 0");
  Timer timer;
  MetricsReport rep;
  rep.metric = Metric::kNll;
  rep.level = level;
  rep.tau = tau;
  rep.S = S;

  double sum = 0.0, var_sum = 0.0;
  std::size_t counted = 0;
  if (!model.needs_states()) {
    for (const Episode& ep : episodes) {
      sum -= exact_conditional_loglik(model, ep, tau);
      ++counted;
    }
  } else {
    std::vector<double> w(static_cast<std::size_t>(S));
    std::vector<double> w2(static_cast<std::size_t>(S));
    for (std::size_t idx = 0; idx < episodes.size(); ++idx) {
      Rng rng(mix_stream(seed, idx, 0x6e6c6cULL));
      for (int s = 0; s < S; ++s) {
        const CondSample cs = sampled_conditional(model, episodes[idx], tau, rng);
        w[static_cast<std::size_t>(s)] = cs.joint - cs.logq_suffix;
      }
      const double lse = kernels::logsumexp(w.data(), w.size());
      if (!std::isfinite(lse) || lse < cm::kNegInf / 2) {
        ++rep.excluded;
        continue;
      }
      const double log_mean = lse - std::log(static_cast<double>(S));
      sum -= log_mean;
      ++counted;
      // Delta method: Var(log mean W) ~ (E[W^2]/E[W]^2 - 1) / S.
      for (std::size_t s = 0; s < w.size(); ++s) w2[s] = 2.0 * w[s];
      const double ratio = std::exp(kernels::logsumexp(w2.data(), w2.size()) -
                                    std::log(static_cast<double>(S)) -
                                    2.0 * log_mean);
      var_sum += std::max(0.0, ratio - 1.0) / static_cast<double>(S);
    }
  }
  if (counted == 0) {
    rep.value = std::numeric_limits<double>::quiet_NaN();
  } else {
    rep.value = sum / static_cast<double>(counted);
    rep.std_error = std::sqrt(var_sum) / static_cast<double>(counted);
  }
  rep.wall_ms = timer.ms();
  return rep;
}

MetricsReport cross_entropy(const Model& model,
                            const std::vector<Episode>& episodes,
                            std::size_t n_sims, int level, double tau,
                            std::uint64_t seed) {
  if (n_sims < 1) throw std::invalid_argument("n_sims must be >= 1");
  if (episodes.empty()) throw std::invalid_argument("no episodes");
  if (tau < 0.0) throw std::invalid_argument("tau must be >= 0");
  Timer timer;
  MetricsReport rep;
  rep.metric = Metric::kCe;
  rep.level = level;
  rep.tau = tau;
  rep.n_sims = n_sims;

  const std::size_t n = static_cast<std::size_t>(model.n);
  const double e_count = static_cast<double>(episodes.size());
  const double sims = static_cast<double>(n_sims);

  // Delta-method variance share of one episode's indicator cross-entropy
  // (treating the per-node marginal estimates as independent).
  auto episode_var = [&](const std::vector<char>& mask,
                         const std::vector<double>& probs) {
    double var = 0.0;
    for (std::size_t v = 0; v < n; ++v) {
      const double raw = probs[v];
      const double p = clamp_prob(raw);
      const double d = mask[v] ? 1.0 / p : 1.0 / (1.0 - p);
      var += d * d * raw * (1.0 - raw) / sims;
    }
    return var / (static_cast<double>(n) * static_cast<double>(n));
  };

  double sum = 0.0, var_total = 0.0;
  if (tau == 0.0) {
    // One shared marginal vector; episodes only reweight it.
    const std::vector<double> probs = marginal_infection_probs(
        model, n_sims, mix_stream(seed, 0x6365ULL, 0));
    std::vector<double> freq(n, 0.0);
    for (const Episode& ep : episodes) {
      const std::vector<char> mask = infected_mask(ep, model.n);
      sum += indicator_cross_entropy(probs, ep);
      for (std::size_t v = 0; v < n; ++v) freq[v] += mask[v] ? 1.0 : 0.0;
    }
    for (std::size_t v = 0; v < n; ++v) {
      const double f = freq[v] / e_count;
      const double p = clamp_prob(probs[v]);
      const double d = (f / p - (1.0 - f) / (1.0 - p)) / static_cast<double>(n);
      var_total += d * d * probs[v] * (1.0 - probs[v]) / sims;
    }
    rep.std_error = std::sqrt(var_total);
  } else {
    for (std::size_t idx = 0; idx < episodes.size(); ++idx) {
      const Episode& ep = episodes[idx];
      const Episode cens = censor(ep, tau);
      PrefixFactory factory;
      if (model.needs_states()) {
        factory = [&model, &cens, tau](std::size_t, Rng& rng) {
          const Trajectory t = sample_trajectory(model, cens, rng);
          Prefix p;
          p.observed = cens;
          p.ancestors = t.cascade.ancestors;
          p.states = t.states;
          p.tau = tau;
          return p;
        };
      } else {
        Prefix fixed;
        fixed.observed = cens;
        fixed.ancestors.assign(cens.size(), 0);
        fixed.tau = tau;
        factory = [fixed](std::size_t, Rng&) { return fixed; };
      }
      const std::vector<double> probs = marginal_infection_probs(
          model, n_sims, mix_stream(seed, 0x6365ULL, idx + 1), factory);
      sum += indicator_cross_entropy(probs, ep);
      var_total += episode_var(infected_mask(ep, model.n), probs);
    }
    rep.std_error = std::sqrt(var_total) / e_count;
  }
  rep.value = sum / e_count;
  rep.wall_ms = timer.ms();
  return rep;
}

MetricsReport infector_recovery(const Model& model,
                                const std::vector<GroundTruthRecord>& records,
                                int S, int level, double tau,
                                std::uint64_t seed) {
  if (S < 1) throw std::invalid_argument("S must be >= 1");
  if (records.empty()) throw std::invalid_argument("no ground-truth records");
  if (tau < 0.0) throw std::invalid_argument("tau must be >= 0");
  Timer timer;
  MetricsReport rep;
  rep.metric = Metric::kInf;
  rep.level = level;
  rep.tau = tau;
  rep.S = S;

  double num = 0.0, var_sum = 0.0;
  std::size_t den = 0;
  const bool rec = model.needs_states();
  for (std::size_t idx = 0; idx < records.size(); ++idx) {
    const Episode& ep = records[idx].cascade.episode;
    const std::vector<int>& truth = records[idx].cascade.ancestors;
    if (truth.size() != ep.size()) {
      throw std::invalid_argument("ground-truth ancestors do not match");
    }
    double ep_num = 0.0, ep_var = 0.0;
    std::size_t ep_den = 0;
    try {
      if (!rec) {
        for (std::size_t i = 1; i < ep.size(); ++i) {
          if (ep.times[i] < tau) continue;
          const std::vector<double> lp = ancestor_posterior(model, ep, i, {});
          ep_num += std::exp(lp[static_cast<std::size_t>(truth[i])]);
          ++ep_den;
        }
      } else {
        // Accumulate the true-infector mass per scored position across S
        // sampled past-trajectories.
        std::vector<double> acc(ep.size(), 0.0), acc2(ep.size(), 0.0);
        Rng rng(mix_stream(seed, idx, 0x696e66ULL));
        for (int s = 0; s < S; ++s) {
          std::vector<State> states(ep.size());
          states[0] = model.initial_state();
          for (std::size_t i = 1; i < ep.size(); ++i) {
            const std::vector<double> lp =
                ancestor_posterior(model, ep, i, states);
            if (ep.times[i] >= tau) {
              const double p = std::exp(lp[static_cast<std::size_t>(truth[i])]);
              acc[i] += p;
              acc2[i] += p * p;
            }
            const std::size_t pick = sample_categorical(lp, rng);
            states[i] = model.state_update(states[pick], ep.nodes[i]);
          }
        }
        for (std::size_t i = 1; i < ep.size(); ++i) {
          if (ep.times[i] < tau) continue;
          const double mean = acc[i] / static_cast<double>(S);
          ep_num += mean;
          ++ep_den;
          if (S > 1) {
            const double var =
                std::max(0.0, acc2[i] / static_cast<double>(S) - mean * mean);
            ep_var += var / static_cast<double>(S);
          }
        }
      }
      num += ep_num;
      den += ep_den;
      var_sum += ep_var;
    } catch (const NumericError&) {
      ++rep.excluded;  // zero-density episode under this model
    }
  }
  if (den == 0) {
    rep.value = std::numeric_limits<double>::quiet_NaN();
  } else {
    rep.value = num / static_cast<double>(den);
    rep.std_error = std::sqrt(var_sum) / static_cast<double>(den);
  }
  rep.wall_ms = timer.ms();
  return rep;
}

}  // namespace reccas
