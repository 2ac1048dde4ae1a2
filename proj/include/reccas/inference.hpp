#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <vector>

#include "reccas/episode.hpp"
#include "reccas/models.hpp"
#include "reccas/param_store.hpp"
#include "reccas/rng.hpp"
#include "reccas/tape.hpp"

namespace reccas {

// A transmission tree for an episode: sampled (or given) ancestors, the
// states they induce, and the log-probability of the tree under the
// filtering proposal q (product of per-position ancestor posteriors).
struct Trajectory {
  Cascade cascade;
  std::vector<State> states;  // per position; empty for stateless families
  double log_q = 0.0;
};

// Normalized log-probabilities over the infector candidates of `position`
// (positions 0..position-1). `states` must cover those positions when the
// model keeps states; pass {} otherwise. Logits are log a - log b per pair.
std::vector<double> ancestor_posterior(const Model& model, const Episode& ep,
                                       std::size_t position,
                                       const std::vector<State>& states);

// States induced by a concrete transmission tree (empty for stateless
// families).
std::vector<State> states_along_tree(const Model& model, const Episode& ep,
                                     const std::vector<int>& ancestors);

// Sequential (filtering) sample of the ancestors: each draw conditions only
// on the already-sampled past.
Trajectory sample_trajectory(const Model& model, const Episode& ep, Rng& rng);

// log q of a given tree under the filtering proposal (recomputes states).
double trajectory_log_q(const Model& model, const Cascade& cascade);

// log p(D, I): per position, the winning pair contributes log a and every
// other earlier node log b; every infected node (world included) contributes
// log(1-k) for each never-infected node. `per_position`, when given, receives
// one entry per position: the ancestor term at that position plus the
// position's survival contributions.
double joint_log_prob(const Model& model, const Cascade& cascade,
                      std::vector<double>* per_position = nullptr);

// Exact marginal log-likelihood (stateless families only; the recurrent
// family has no closed form and must go through sampling).
double episode_exact_loglik(const Model& model, const Episode& ep);

// Mean exact NLL over a corpus (stateless families).
double exact_nll(const Model& model, const std::vector<Episode>& episodes);

// Importance-sampled NLL: per episode, -(logsumexp_s(ll_s - logq_s) - log S).
// Episodes whose S weights are all -inf are excluded and counted. Used for
// validation checkpointing; the evaluation module reports richer statistics.
double importance_nll(const Model& model,
                      const std::vector<Episode>& episodes, int S,
                      std::uint64_t seed, std::size_t* excluded = nullptr);

// One episode's objective traced onto a tape. For the recurrent family the
// tree is sampled on the fly (rng required) and ll is the joint of that
// sample; for stateless families ll is the exact marginal and logq is a
// constant 0.
struct TracedEpisode {
  Value ll;
  Value logq;
  Trajectory trajectory;
};
TracedEpisode trace_episode(Tape& tape, const Model& model, const Episode& ep,
                            Rng* rng);

// Per-bin ring buffer of past per-episode control variates
// (ll - logq - 1), window-averaged into a per-episode baseline. The current
// epoch's values are pushed only after the parameter step, so a baseline
// never includes the epoch it corrects.
class BaselineBuffer {
 public:
  BaselineBuffer(std::size_t bins, std::size_t window);
  std::vector<double> baseline(std::size_t bin, std::size_t rows) const;
  void push(std::size_t bin, std::vector<double> values);

 private:
  std::size_t window_;
  std::vector<std::deque<std::vector<double>>> entries_;
};

struct BinGrad {
  double elbo = 0.0;  // mean(ll - logq) over rows and samples
  bool finite = true; // false: skip the step for this bin
  std::vector<double> baseline_entry;  // per-row mean(ll - logq - 1)
};

// Gradient of the negated per-bin objective into `grads` (zeroed first):
// recurrent surrogate = mean over rows/samples of
// (stop-grad[ll - logq - 1 - b]) * logq + ll; stateless families use the
// exact log-likelihood. Row r of epoch e draws from stream
// (seed, source_index[r], e).
BinGrad elbo_and_gradient(const Model& model, const Bin& bin,
                          std::size_t bin_index,
                          const BaselineBuffer& baseline, int K,
                          std::uint64_t seed, int epoch, GradBuffer& grads,
                          std::size_t workers = 1);

struct TrainConfig {
  int epochs = 100;
  std::size_t batch = 512;
  int samples = 1;  // K trajectories per episode per epoch
  double lr = 1e-2;
  std::uint64_t seed = 0;
  std::size_t b_length = 100;  // baseline window (epochs)
  std::size_t workers = 1;
  int val_samples = 20;  // S for the validation NLL proxy
};

struct EpochRecord {
  int epoch = 0;  // absolute (resume continues the counter)
  double elbo = 0.0;
  double val_nll = std::numeric_limits<double>::quiet_NaN();
  double wall_ms = 0.0;
};

struct TrainResult {
  std::vector<EpochRecord> trace;
  std::size_t skipped_bins = 0;
  bool diverged = false;
  int best_epoch = -1;  // epoch whose params the model ends up carrying
};

using EpochObserver = std::function<void(const EpochRecord&)>;

// Runs config.epochs additional epochs (model.epoch continues counting).
// With a validation set the best-validation parameters are restored at the
// end; divergence (non-finite parameters) restores the last good state and
// sets the flag.
TrainResult train(Model& model, const std::vector<Episode>& train_episodes,
                  const std::vector<Episode>& val_episodes,
                  const TrainConfig& config,
                  const EpochObserver& observer = {});

}  // namespace reccas
