#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "reccas/episode.hpp"
#include "reccas/models.hpp"
#include "reccas/rng.hpp"

namespace reccas {

// Observed start of a cascade for conditioned simulation: the nodes infected
// before tau, a sampled transmission tree over them, and (for the recurrent
// family) the per-position states induced by that tree. All times < tau
// except the world node, which sits at 0 <= tau.
struct Prefix {
  Episode observed;
  std::vector<int> ancestors;
  std::vector<State> states;  // empty unless the model keeps states
  double tau = 0.0;
};

// The trivial prefix: just the world node at time 0, tau = 0. Conditioned
// generation from it is draw-for-draw identical to unconditioned generation.
Prefix world_prefix(const Model& model);

struct GenConfig {
  std::size_t cap = 0;  // max infected incl. world; 0 means 4 * n
};

struct GenResult {
  Cascade cascade;
  bool truncated = false;  // cap was hit with infections still pending
};

// Forward simulation. Every infected node makes one Bernoulli(k) attempt per
// not-yet-infected node; a successful attempt proposes arrival at
// t_u + Exp(r). The earliest proposal wins the node and fixes its infector
// (lazy priority queue with staleness checks). States follow the winning
// tree.
GenResult generate(const Model& model, Rng& rng, const GenConfig& config = {});

// Same process conditioned on the prefix: each prefix node's attempt on a
// surviving node is rescored by the evidence that no infection arrived
// before tau (success probability k*e^{-r(tau-t_u)} / (k*e^{-r(tau-t_u)}+1-k))
// and, on success, the arrival is the exponential truncated to [tau, inf),
// i.e. tau + Exp(r). Nodes infected after tau attempt untruncated, as in
// plain generation.
GenResult generate_conditioned(const Model& model, const Prefix& prefix,
                               Rng& rng, const GenConfig& config = {});

// Per-simulation prefix source for conditioned marginals (e.g. a fresh
// posterior sample of the prefix tree per run). Called once per simulation.
using PrefixFactory = std::function<Prefix(std::size_t sim, Rng& rng)>;

// Fraction of simulations in which each node ends up infected. With a
// factory the runs are conditioned on its prefixes; otherwise they are plain
// generations. The world slot is always 1.
std::vector<double> marginal_infection_probs(const Model& model,
                                             std::size_t n_sims,
                                             std::uint64_t seed,
                                             const PrefixFactory& prefix = {});

}  // namespace reccas
