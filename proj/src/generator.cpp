#include "reccas/generator.hpp"

#include <cmath>
#include <limits>
#include <queue>
#include <stdexcept>

namespace reccas {
namespace {

struct Proposal {
  double time;
  int node;
  int infector_pos;
};

// Min-heap order with deterministic tie-breaking.
struct ProposalAfter {
  bool operator()(const Proposal& a, const Proposal& b) const {
    if (a.time != b.time) return a.time > b.time;
    if (a.node != b.node) return a.node > b.node;
    return a.infector_pos > b.infector_pos;
  }
};

void check_prefix(const Model& model, const Prefix& prefix) {
  const std::size_t m = prefix.observed.size();
  if (m == 0 || prefix.observed.nodes[0] != kWorldNode ||
      prefix.observed.times[0] != 0.0) {
    throw std::invalid_argument("prefix must start with the world node at 0");
  }
  if (prefix.ancestors.size() != m) {
    throw std::invalid_argument("prefix ancestors do not match its episode");
  }
  if (model.needs_states() && prefix.states.size() != m) {
    throw std::invalid_argument("prefix lacks states for a recurrent model");
  }
  if (prefix.tau < 0.0) throw std::invalid_argument("tau must be >= 0");
  for (std::size_t i = 1; i < m; ++i) {
    const int v = prefix.observed.nodes[i];
    if (v <= kWorldNode || v >= model.n) {
      throw std::invalid_argument("prefix node out of range");
    }
    if (!(prefix.observed.times[i] < prefix.tau)) {
      throw std::invalid_argument("prefix infection at or after tau");
    }
  }
}

GenResult run_engine(const Model& model, const Prefix& prefix, Rng& rng,
                     const GenConfig& config) {
  check_prefix(model, prefix);
  const int n = model.n;
  const std::size_t cap =
      config.cap ? config.cap : 4 * static_cast<std::size_t>(n);
  const bool with_states = model.needs_states();
  const State no_state;

  GenResult result;
  Episode& ep = result.cascade.episode;
  std::vector<int>& ancestors = result.cascade.ancestors;
  std::vector<State> states;
  std::vector<char> infected(static_cast<std::size_t>(n), 0);

  for (std::size_t i = 0; i < prefix.observed.size(); ++i) {
    ep.nodes.push_back(prefix.observed.nodes[i]);
    ep.times.push_back(prefix.observed.times[i]);
    ancestors.push_back(prefix.ancestors[i]);
    infected[static_cast<std::size_t>(prefix.observed.nodes[i])] = 1;
    if (with_states) states.push_back(prefix.states[i]);
  }

  std::priority_queue<Proposal, std::vector<Proposal>, ProposalAfter> heap;

  // One Bernoulli/exponential attempt per surviving node. Attempts launched
  // from inside the prefix carry the survival evidence up to tau; later ones
  // are the plain process.
  auto attempt_targets = [&](std::size_t pos) {
    const int u = ep.nodes[pos];
    const double t_u = ep.times[pos];
    const State& z_u = with_states ? states[pos] : no_state;
    const bool censored = t_u < prefix.tau;
    for (int w = 1; w < n; ++w) {
      if (infected[static_cast<std::size_t>(w)]) continue;
      const double k = model.k(z_u, u, w);
      if (censored) {
        const double r = model.r(u, w);
        const double reach = k * std::exp(-r * (prefix.tau - t_u));
        const double success = reach / (reach + (1.0 - k));
        if (rng.uniform() < success) {
          heap.push({prefix.tau + rng.exponential(r), w,
                     static_cast<int>(pos)});
        }
      } else {
        if (rng.uniform() < k) {
          const double r = model.r(u, w);
          heap.push({t_u + rng.exponential(r), w, static_cast<int>(pos)});
        }
      }
    }
  };

  for (std::size_t i = 0; i < prefix.observed.size(); ++i) attempt_targets(i);

  while (!heap.empty()) {
    const Proposal top = heap.top();
    heap.pop();
    if (infected[static_cast<std::size_t>(top.node)]) continue;  // stale
    if (ep.size() >= cap) {
      result.truncated = true;
      break;
    }
    infected[static_cast<std::size_t>(top.node)] = 1;
    double t = top.time;
    if (t <= ep.times.back()) {  // exact double collision; keep order strict
      t = std::nextafter(ep.times.back(),
                         std::numeric_limits<double>::infinity());
    }
    ep.nodes.push_back(top.node);
    ep.times.push_back(t);
    ancestors.push_back(top.infector_pos);
    if (with_states) {
      states.push_back(
          model.state_update(states[static_cast<std::size_t>(
                                 top.infector_pos)],
                             top.node));
    }
    attempt_targets(ep.size() - 1);
  }

  ep.raw_times = ep.times;
  return result;
}

}  // namespace

Prefix world_prefix(const Model& model) {
  Prefix p;
  p.observed.nodes = {kWorldNode};
  p.observed.times = {0.0};
  p.observed.raw_times = {0.0};
  p.ancestors = {0};
  if (model.needs_states()) p.states = {model.initial_state()};
  p.tau = 0.0;
  return p;
}

GenResult generate(const Model& model, Rng& rng, const GenConfig& config) {
  return run_engine(model, world_prefix(model), rng, config);
}

GenResult generate_conditioned(const Model& model, const Prefix& prefix,
                               Rng& rng, const GenConfig& config) {
  return run_engine(model, prefix, rng, config);
}

std::vector<double> marginal_infection_probs(const Model& model,
                                             std::size_t n_sims,
                                             std::uint64_t seed,
                                             const PrefixFactory& prefix) {
  if (n_sims == 0) throw std::invalid_argument("n_sims must be >= 1");
  std::vector<double> hits(static_cast<std::size_t>(model.n), 0.0);
  for (std::size_t s = 0; s < n_sims; ++s) {
    Rng rng(mix_stream(seed, 0x6d617267ULL, s));
    GenResult run = prefix ? generate_conditioned(model, prefix(s, rng), rng)
                           : generate(model, rng);
    for (int v : run.cascade.episode.nodes) {
      hits[static_cast<std::size_t>(v)] += 1.0;
    }
  }
  for (double& h : hits) h /= static_cast<double>(n_sims);
  return hits;
}

}  // namespace reccas
