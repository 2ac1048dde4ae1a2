#include "reccas/inference.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <stdexcept>
#include <thread>
#include <utility>

#include "reccas/cascade_math.hpp"
#include "reccas/errors.hpp"
#include "reccas/kernels.hpp"

namespace reccas {
namespace {

struct PairTerms {
  double log_k, log_1mk, log_r, r;
};

PairTerms pair_terms(const Model& m, const State& z_u, int u, int v) {
  return {m.log_k(z_u, u, v), m.log_1mk(z_u, u, v), m.log_r(u, v), m.r(u, v)};
}

const State& state_at(const std::vector<State>& states, std::size_t i) {
  static const State empty;
  return states.empty() ? empty : states[i];
}

void check_tree(const Episode& ep, const std::vector<int>& ancestors) {
  if (ancestors.size() != ep.size()) {
    throw std::invalid_argument("ancestors do not match the episode");
  }
  if (!ancestors.empty() && ancestors[0] != 0) {
    throw std::invalid_argument("the world node cannot have an infector");
  }
  for (std::size_t i = 1; i < ancestors.size(); ++i) {
    if (ancestors[i] < 0 || ancestors[i] >= static_cast<int>(i)) {
      throw std::invalid_argument("ancestor must point at an earlier position");
    }
  }
}

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

// Sum of log(1-k) from every infected position towards every never-infected
// node; adds each position's share into per_position when given.
double survival_terms(const Model& model, const Episode& ep,
                      const std::vector<State>& states,
                      std::vector<double>* per_position) {
  std::vector<char> infected(static_cast<std::size_t>(model.n), 0);
  for (int v : ep.nodes) infected[static_cast<std::size_t>(v)] = 1;
  double total = 0.0;
  for (std::size_t j = 0; j < ep.size(); ++j) {
    double g = 0.0;
    for (int w = 1; w < model.n; ++w) {
      if (infected[static_cast<std::size_t>(w)]) continue;
      g += model.log_1mk(state_at(states, j), ep.nodes[j], w);
    }
    total += g;
    if (per_position) (*per_position)[j] += g;
  }
  return total;
}

// Fused filtering sample and joint evaluation (one pass over the candidate
// pairs). Returns the trajectory's joint log-probability and log q; a
// zero-density position yields ll = -inf.
struct SampledJoint {
  double ll = 0.0;
  double logq = 0.0;
};

SampledJoint sampled_joint(const Model& model, const Episode& ep, Rng& rng) {
  const std::size_t m = ep.size();
  const bool rec = model.needs_states();
  std::vector<State> states;
  if (rec) {
    states.resize(m);
    states[0] = model.initial_state();
  }
  SampledJoint out;
  std::vector<double> a, b, logits;
  for (std::size_t i = 1; i < m; ++i) {
    const int v = ep.nodes[i];
    const double t_v = ep.times[i];
    a.assign(i, 0.0);
    b.assign(i, 0.0);
    logits.assign(i, 0.0);
    for (std::size_t u = 0; u < i; ++u) {
      const PairTerms pt = pair_terms(model, state_at(states, u), ep.nodes[u], v);
      const double delta = t_v - ep.times[u];
      a[u] = cm::log_a(pt.log_k, pt.log_r, pt.r, delta);
      b[u] = cm::log_b(pt.log_k, pt.log_1mk, pt.r, delta);
      logits[u] = a[u] - b[u];
    }
    const double lse = kernels::logsumexp(logits.data(), logits.size());
    if (!std::isfinite(lse) || lse < cm::kNegInf / 2) {
      out.ll = -std::numeric_limits<double>::infinity();
      return out;
    }
    for (double& l : logits) l -= lse;
    const std::size_t pick = sample_categorical(logits, rng);
    out.logq += logits[pick];
    for (std::size_t u = 0; u < i; ++u) out.ll += (u == pick) ? a[u] : b[u];
    if (rec) states[i] = model.state_update(states[pick], ep.nodes[i]);
  }
  out.ll += survival_terms(model, ep, states, nullptr);
  return out;
}

}  // namespace

std::vector<double> ancestor_posterior(const Model& model, const Episode& ep,
                                       std::size_t position,
                                       const std::vector<State>& states) {
  if (position < 1 || position >= ep.size()) {
    throw std::invalid_argument("position out of range");
  }
  if (model.needs_states() && states.size() < position) {
    throw std::invalid_argument("states missing for candidate positions");
  }
  const int v = ep.nodes[position];
  const double t_v = ep.times[position];
  std::vector<double> logits(position);
  for (std::size_t u = 0; u < position; ++u) {
    const PairTerms pt = pair_terms(model, state_at(states, u), ep.nodes[u], v);
    const double delta = t_v - ep.times[u];
    logits[u] = cm::log_a(pt.log_k, pt.log_r, pt.r, delta) -
                cm::log_b(pt.log_k, pt.log_1mk, pt.r, delta);
  }
  const double lse = kernels::logsumexp(logits.data(), logits.size());
  if (!std::isfinite(lse) || lse < cm::kNegInf / 2) {
    throw NumericError("ancestor posterior undefined: zero-density position");
  }
  for (double& l : logits) l -= lse;
  return logits;
}

std::vector<State> states_along_tree(const Model& model, const Episode& ep,
                                     const std::vector<int>& ancestors) {
  check_tree(ep, ancestors);
  if (!model.needs_states()) return {};
  std::vector<State> states(ep.size());
  states[0] = model.initial_state();
  for (std::size_t i = 1; i < ep.size(); ++i) {
    states[i] = model.state_update(
        states[static_cast<std::size_t>(ancestors[i])], ep.nodes[i]);
  }
  return states;
}

Trajectory sample_trajectory(const Model& model, const Episode& ep, Rng& rng) {
  Trajectory t;
  t.cascade.episode = ep;
  t.cascade.ancestors.assign(ep.size(), 0);
  if (model.needs_states()) {
    t.states.resize(ep.size());
    t.states[0] = model.initial_state();
  }
  for (std::size_t i = 1; i < ep.size(); ++i) {
    const std::vector<double> lp = ancestor_posterior(model, ep, i, t.states);
    const std::size_t pick = sample_categorical(lp, rng);
    t.cascade.ancestors[i] = static_cast<int>(pick);
    t.log_q += lp[pick];
    if (model.needs_states()) {
      t.states[i] = model.state_update(t.states[pick], ep.nodes[i]);
    }
  }
  return t;
}

double trajectory_log_q(const Model& model, const Cascade& cascade) {
  const Episode& ep = cascade.episode;
  const std::vector<State> states =
      states_along_tree(model, ep, cascade.ancestors);
  double lq = 0.0;
  for (std::size_t i = 1; i < ep.size(); ++i) {
    const std::vector<double> lp = ancestor_posterior(model, ep, i, states);
    lq += lp[static_cast<std::size_t>(cascade.ancestors[i])];
  }
  return lq;
}

double joint_log_prob(const Model& model, const Cascade& cascade,
                      std::vector<double>* per_position) {
  const Episode& ep = cascade.episode;
  const std::vector<State> states =
      states_along_tree(model, ep, cascade.ancestors);
  if (per_position) per_position->assign(ep.size(), 0.0);
  double total = 0.0;
  for (std::size_t i = 1; i < ep.size(); ++i) {
    const int v = ep.nodes[i];
    const double t_v = ep.times[i];
    const auto winner = static_cast<std::size_t>(cascade.ancestors[i]);
    double term = 0.0;
    for (std::size_t u = 0; u < i; ++u) {
      const PairTerms pt = pair_terms(model, state_at(states, u), ep.nodes[u], v);
      const double delta = t_v - ep.times[u];
      term += (u == winner) ? cm::log_a(pt.log_k, pt.log_r, pt.r, delta)
                            : cm::log_b(pt.log_k, pt.log_1mk, pt.r, delta);
    }
    total += term;
    if (per_position) (*per_position)[i] += term;
  }
  total += survival_terms(model, ep, states, per_position);
  return total;
}

double episode_exact_loglik(const Model& model, const Episode& ep) {
  if (model.needs_states()) {
    throw std::invalid_argument(
        "exact likelihood requires a stateless family");
  }
  double total = 0.0;
  std::vector<double> las, lbs;
  for (std::size_t i = 1; i < ep.size(); ++i) {
    const int v = ep.nodes[i];
    const double t_v = ep.times[i];
    las.assign(i, 0.0);
    lbs.assign(i, 0.0);
    for (std::size_t u = 0; u < i; ++u) {
      const PairTerms pt = pair_terms(model, state_at({}, u), ep.nodes[u], v);
      const double delta = t_v - ep.times[u];
      las[u] = cm::log_a(pt.log_k, pt.log_r, pt.r, delta);
      lbs[u] = cm::log_b(pt.log_k, pt.log_1mk, pt.r, delta);
    }
    total += cm::log_h(las, lbs);
  }
  total += survival_terms(model, ep, {}, nullptr);
  return total;
}

double exact_nll(const Model& model, const std::vector<Episode>& episodes) {
  if (episodes.empty()) throw std::invalid_argument("no episodes");
  double sum = 0.0;
  for (const Episode& ep : episodes) sum -= episode_exact_loglik(model, ep);
  return sum / static_cast<double>(episodes.size());
}

double importance_nll(const Model& model,
                      const std::vector<Episode>& episodes, int S,
                      std::uint64_t seed, std::size_t* excluded) {
  if (S < 1) throw std::invalid_argument("S must be >= 1");
  if (episodes.empty()) throw std::invalid_argument("no episodes");
  if (!model.needs_states()) {
    if (excluded) *excluded = 0;
    return exact_nll(model, episodes);
  }
  double sum = 0.0;
  std::size_t counted = 0, dropped = 0;
  std::vector<double> w(static_cast<std::size_t>(S));
  for (std::size_t idx = 0; idx < episodes.size(); ++idx) {
    Rng rng(mix_stream(seed, idx, 0x76616cULL));
    for (int s = 0; s < S; ++s) {
      const SampledJoint sj = sampled_joint(model, episodes[idx], rng);
      w[static_cast<std::size_t>(s)] = sj.ll - sj.logq;
    }
    const double lse = kernels::logsumexp(w.data(), w.size());
    if (!std::isfinite(lse) || lse < cm::kNegInf / 2) {
      ++dropped;
      continue;
    }
    sum -= lse - std::log(static_cast<double>(S));
    ++counted;
  }
  if (excluded) *excluded = dropped;
  return counted ? sum / static_cast<double>(counted)
                 : std::numeric_limits<double>::quiet_NaN();
}

TracedEpisode trace_episode(Tape& tape, const Model& model, const Episode& ep,
                            Rng* rng) {
  const std::size_t m = ep.size();
  const bool rec = model.needs_states();
  if (rec && rng == nullptr) {
    throw std::invalid_argument("recurrent tracing requires an rng");
  }
  TracedEpisode out;
  out.trajectory.cascade.episode = ep;
  out.trajectory.cascade.ancestors.assign(m, 0);

  std::vector<Value> z(m);
  if (rec) {
    z[0] = traced_initial_state(tape, model);
    out.trajectory.states.resize(m);
    out.trajectory.states[0] = State{tape.vec(z[0])};
  }

  std::vector<Value> ll_terms, logq_terms;
  const Value none{};
  for (std::size_t i = 1; i < m; ++i) {
    const int v = ep.nodes[i];
    const double t_v = ep.times[i];
    std::vector<Value> svals(i), bvals(i);
    for (std::size_t u = 0; u < i; ++u) {
      const Value logit =
          traced_k_logit(tape, model, rec ? z[u] : none, ep.nodes[u], v);
      const Value log_k = tape.log_sigmoid_c(logit);
      const Value log_1mk = tape.log1m_sigmoid_c(logit);
      const Value log_r = traced_log_r(tape, model, ep.nodes[u], v);
      const Value r = tape.exp_v(log_r);
      const Value decay = tape.scale(r, -(t_v - ep.times[u]));
      const Value a = tape.add(tape.add(log_k, log_r), decay);
      bvals[u] = tape.logsumexp(tape.pack({tape.add(log_k, decay), log_1mk}));
      svals[u] = tape.sub(a, bvals[u]);
    }
    const Value svec = tape.pack(svals);
    const Value sum_b = tape.sum(tape.pack(bvals));
    const Value lse_s = tape.logsumexp(svec);
    if (rec) {
      const std::vector<double>& raw = tape.vec(svec);
      const double lse_val = tape.value(lse_s);
      std::vector<double> lp(i);
      for (std::size_t u = 0; u < i; ++u) lp[u] = raw[u] - lse_val;
      const std::size_t pick = sample_categorical(lp, *rng);
      out.trajectory.cascade.ancestors[i] = static_cast<int>(pick);
      const Value s_pick = tape.index(svec, pick);
      ll_terms.push_back(tape.add(s_pick, sum_b));
      logq_terms.push_back(tape.sub(s_pick, lse_s));
      z[i] = traced_state_update(tape, model, z[pick], v);
      out.trajectory.states[i] = State{tape.vec(z[i])};
    } else {
      ll_terms.push_back(tape.add(lse_s, sum_b));  // log h at this position
    }
  }

  std::vector<char> infected(static_cast<std::size_t>(model.n), 0);
  for (int v : ep.nodes) infected[static_cast<std::size_t>(v)] = 1;
  std::vector<int> targets;
  for (int w = 1; w < model.n; ++w) {
    if (!infected[static_cast<std::size_t>(w)]) targets.push_back(w);
  }
  if (!targets.empty()) {
    for (std::size_t j = 0; j < m; ++j) {
      ll_terms.push_back(traced_log_g_terms(tape, model, rec ? z[j] : none,
                                            ep.nodes[j], targets));
    }
  }

  out.ll = ll_terms.empty() ? tape.constant(0.0)
                            : tape.sum(tape.pack(ll_terms));
  out.logq = logq_terms.empty() ? tape.constant(0.0)
                                : tape.sum(tape.pack(logq_terms));
  out.trajectory.log_q = tape.value(out.logq);
  return out;
}

BaselineBuffer::BaselineBuffer(std::size_t bins, std::size_t window)
    : window_(window), entries_(bins) {
  if (window_ == 0) throw std::invalid_argument("baseline window must be >= 1");
}

std::vector<double> BaselineBuffer::baseline(std::size_t bin,
                                             std::size_t rows) const {
  std::vector<double> b(rows, 0.0);
  const auto& past = entries_.at(bin);
  if (past.empty()) return b;
  for (const std::vector<double>& v : past) {
    for (std::size_t r = 0; r < rows && r < v.size(); ++r) b[r] += v[r];
  }
  const double inv = 1.0 / static_cast<double>(past.size());
  for (double& x : b) x *= inv;
  return b;
}

void BaselineBuffer::push(std::size_t bin, std::vector<double> values) {
  auto& past = entries_.at(bin);
  past.push_back(std::move(values));
  if (past.size() > window_) past.pop_front();
}

BinGrad elbo_and_gradient(const Model& model, const Bin& bin,
                          std::size_t bin_index,
                          const BaselineBuffer& baseline, int K,
                          std::uint64_t seed, int epoch, GradBuffer& grads,
                          std::size_t workers) {
  if (K < 1) throw std::invalid_argument("K must be >= 1");
  grads.zero();
  const std::size_t rows = bin.rows();
  BinGrad out;
  out.baseline_entry.assign(rows, 0.0);
  if (rows == 0) return out;

  const std::vector<double> b = baseline.baseline(bin_index, rows);
  const bool rec = model.needs_states();
  std::vector<double> row_elbo(rows, 0.0);
  std::atomic<bool> ok{true};

  auto run_rows = [&](std::size_t begin, std::size_t end, GradBuffer& gbuf) {
    for (std::size_t row = begin;
         row < end && ok.load(std::memory_order_relaxed); ++row) {
      const Episode ep = bin.row_episode(row);
      Tape tape(model.params);
      if (rec) {
        Rng rng(mix_stream(seed, bin.source_index[row],
                           static_cast<std::uint64_t>(epoch)));
        std::vector<Value> surrogates;
        surrogates.reserve(static_cast<std::size_t>(K));
        double elbo = 0.0, entry = 0.0;
        for (int k = 0; k < K; ++k) {
          const TracedEpisode te = trace_episode(tape, model, ep, &rng);
          const double llv = tape.value(te.ll);
          const double lqv = tape.value(te.logq);
          if (!std::isfinite(llv) || !std::isfinite(lqv)) {
            ok.store(false, std::memory_order_relaxed);
            return;
          }
          const double w = llv - lqv - 1.0 - b[row];
          surrogates.push_back(tape.add(tape.scale(te.logq, w), te.ll));
          elbo += (llv - lqv) / K;
          entry += (llv - lqv - 1.0) / K;
        }
        const Value obj =
            K == 1 ? surrogates[0]
                   : tape.scale(tape.sum(tape.pack(surrogates)), 1.0 / K);
        tape.backward(obj, -1.0 / static_cast<double>(rows), gbuf);
        row_elbo[row] = elbo;
        out.baseline_entry[row] = entry;
      } else {
        const TracedEpisode te = trace_episode(tape, model, ep, nullptr);
        const double llv = tape.value(te.ll);
        if (!std::isfinite(llv)) {
          ok.store(false, std::memory_order_relaxed);
          return;
        }
        tape.backward(te.ll, -1.0 / static_cast<double>(rows), gbuf);
        row_elbo[row] = llv;
        out.baseline_entry[row] = llv - 1.0;
      }
    }
  };

  const std::size_t nworkers = std::max<std::size_t>(1, std::min(workers, rows));
  if (nworkers == 1) {
    run_rows(0, rows, grads);
  } else {
    // Contiguous row blocks per worker; reduction in worker order keeps the
    // result deterministic for a fixed worker count.
    std::vector<GradBuffer> partial(nworkers, GradBuffer(model.params));
    std::vector<std::thread> threads;
    const std::size_t base = rows / nworkers, extra = rows % nworkers;
    std::size_t begin = 0;
    for (std::size_t w = 0; w < nworkers; ++w) {
      const std::size_t end = begin + base + (w < extra ? 1 : 0);
      threads.emplace_back(run_rows, begin, end, std::ref(partial[w]));
      begin = end;
    }
    for (std::thread& t : threads) t.join();
    for (const GradBuffer& p : partial) grads.add(p);
  }

  if (!ok.load() || !grads.all_finite()) {
    out.finite = false;
    return out;
  }
  double sum = 0.0;
  for (double e : row_elbo) sum += e;
  out.elbo = sum / static_cast<double>(rows);
  return out;
}

TrainResult train(Model& model, const std::vector<Episode>& train_episodes,
                  const std::vector<Episode>& val_episodes,
                  const TrainConfig& config, const EpochObserver& observer) {
  if (train_episodes.empty()) {
    throw std::invalid_argument("no training episodes");
  }
  if (config.epochs < 0) throw std::invalid_argument("epochs must be >= 0");
  if (config.batch < 1) throw std::invalid_argument("batch must be >= 1");
  if (config.samples < 1) throw std::invalid_argument("samples must be >= 1");
  if (!(config.lr > 0.0)) throw std::invalid_argument("lr must be positive");
  if (model.direct_tables) {
    throw std::invalid_argument("fixture models are not trainable");
  }

  TrainResult result;
  const std::vector<Bin> bins = make_bins(train_episodes, config.batch, model.n);
  GradBuffer grads(model.params);
  AdamState adam(model.params, AdamConfig{config.lr, 0.9, 0.999, 1e-8});
  BaselineBuffer baseline(bins.size(), config.b_length);
  const bool rec = model.needs_states();

  auto snapshot = [&model]() {
    std::vector<std::vector<double>> s;
    s.reserve(model.params.group_count());
    for (std::size_t g = 0; g < model.params.group_count(); ++g) {
      s.push_back(model.params.group(static_cast<int>(g)).data);
    }
    return s;
  };
  auto restore = [&model](const std::vector<std::vector<double>>& s) {
    for (std::size_t g = 0; g < s.size(); ++g) {
      model.params.group(static_cast<int>(g)).data = s[g];
    }
  };

  std::vector<std::vector<double>> best = snapshot();  // divergence fallback
  double best_val = std::numeric_limits<double>::infinity();
  int best_epoch = -1;

  for (int e = 0; e < config.epochs; ++e) {
    const auto t0 = std::chrono::steady_clock::now();
    const int abs_epoch = model.epoch + 1;
    double elbo_sum = 0.0;
    std::size_t elbo_rows = 0;
    for (std::size_t bi = 0; bi < bins.size(); ++bi) {
      BinGrad bg = elbo_and_gradient(model, bins[bi], bi, baseline,
                                     config.samples, config.seed, abs_epoch,
                                     grads, config.workers);
      if (!bg.finite || !adam.step(model.params, grads)) {
        ++result.skipped_bins;
        continue;
      }
      if (rec) baseline.push(bi, std::move(bg.baseline_entry));
      elbo_sum += bg.elbo * static_cast<double>(bins[bi].rows());
      elbo_rows += bins[bi].rows();
    }
    model.epoch = abs_epoch;

    EpochRecord record;
    record.epoch = abs_epoch;
    record.elbo = elbo_rows ? elbo_sum / static_cast<double>(elbo_rows)
                            : std::numeric_limits<double>::quiet_NaN();
    if (!val_episodes.empty()) {
      record.val_nll =
          rec ? importance_nll(
                    model, val_episodes, config.val_samples,
                    mix_stream(config.seed, 0x76616cULL,
                               static_cast<std::uint64_t>(abs_epoch)))
              : exact_nll(model, val_episodes);
      if (std::isfinite(record.val_nll) && record.val_nll < best_val) {
        best_val = record.val_nll;
        best = snapshot();
        best_epoch = abs_epoch;
      }
    }
    record.wall_ms = std::chrono::duration<double, std::milli>(
                         std::chrono::steady_clock::now() - t0)
                         .count();
    result.trace.push_back(record);
    if (observer) observer(record);

    if (!model.params.all_finite()) {
      restore(best);
      result.diverged = true;
      break;
    }
  }

  if (best_epoch >= 0) restore(best);
  result.best_epoch = best_epoch >= 0 ? best_epoch : model.epoch;
  return result;
}

}  // namespace reccas
