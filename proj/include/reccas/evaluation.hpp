#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "reccas/episode.hpp"
#include "reccas/models.hpp"

namespace reccas {

enum class Metric { kNll, kCe, kInf };

std::string metric_name(Metric m);
Metric metric_from_name(const std::string& name);

struct MetricsReport {
  Metric metric = Metric::kNll;
  int level = 0;   // conditioning level; -1 for a raw tau override
  double tau = 0.0;
  double value = 0.0;
  double std_error = 0.0;  // Monte-Carlo standard error (0 for exact paths)
  int S = 0;               // trajectory samples (NLL, INF on recurrent)
  std::size_t n_sims = 0;  // simulations per marginal estimate (CE)
  std::size_t excluded = 0;
  double wall_ms = 0.0;
};

// Conditioning level -> censor time: 0 -> 0 (nothing observed), 1 -> just
// after the first normalized time-stamp, 2 -> maxT/10, 3 -> maxT/20.
double resolve_condition_level(int level, double max_t);

// Mean negated log-probability of the episodes given their tau-prefix
// (tau = 0: plain likelihood). Stateless families are exact; the recurrent
// family is importance-sampled with S trajectories per episode, sharing the
// prefix samples between numerator and denominator. Episodes whose S weights
// all vanish are excluded and counted.
MetricsReport nll(const Model& model, const std::vector<Episode>& episodes,
                  int S, int level, double tau, std::uint64_t seed);

// Negated mean (over all nodes, world included) indicator-weighted log of
// the given per-node infection probabilities for one episode; probabilities
// are clamped to [1e-6, 1-1e-6] before the log. The per-episode building
// block of the simulated cross-entropy.
double indicator_cross_entropy(const std::vector<double>& probs,
                               const Episode& ep);

// Negated mean (over episodes and all nodes, world included) of the
// indicator-weighted log marginal infection probabilities, estimated by
// n_sims simulations — conditioned on each episode's tau-prefix when
// tau > 0. Marginals are clamped to [1e-6, 1-1e-6] before the log.
MetricsReport cross_entropy(const Model& model,
                            const std::vector<Episode>& episodes,
                            std::size_t n_sims, int level, double tau,
                            std::uint64_t seed);

// Pooled posterior mass on the true infector over all scored positions
// (those with time >= tau; all non-world positions when tau = 0). The
// recurrent family averages the posterior over S sampled past-trajectories.
MetricsReport infector_recovery(const Model& model,
                                const std::vector<GroundTruthRecord>& records,
                                int S, int level, double tau,
                                std::uint64_t seed);

}  // namespace reccas
