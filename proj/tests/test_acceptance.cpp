// Acceptance gate: eight go/no-go checks covering gradients, enumeration
// oracles, estimator unbiasedness, generator fidelity, parameter recovery,
// benchmark trends, conditioning consistency, and degenerate exactness.
// Prints one [PASS]/[FAIL] line per criterion with the measured numbers and
// exits nonzero if any fails. Tolerances are pinned next to each check.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "reccas/cascade_math.hpp"
#include "reccas/episode.hpp"
#include "reccas/evaluation.hpp"
#include "reccas/generator.hpp"
#include "reccas/inference.hpp"
#include "reccas/models.hpp"
#include "reccas/param_store.hpp"
#include "reccas/rng.hpp"
#include "reccas/synth.hpp"
#include "reccas/tape.hpp"

using namespace reccas;

namespace {

double now_s() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

bool report(int idx, const char* name, bool ok, const std::string& detail) {
  std::printf("[%s] %d. %s: %s\n", ok ? "PASS" : "FAIL", idx, name,
              detail.c_str());
  std::fflush(stdout);
  return ok;
}

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list args;
  va_start(args, f);
  std::vsnprintf(buf, sizeof buf, f, args);
  va_end(args);
  return buf;
}

// ---------------------------------------------------------------- helpers --

Episode random_episode(Rng& rng, int n, std::size_t infections) {
  std::vector<int> pool;
  for (int v = 1; v < n; ++v) pool.push_back(v);
  for (std::size_t i = 0; i + 1 < pool.size() && i < infections; ++i) {
    std::swap(pool[i], pool[i + rng.uniform_index(pool.size() - i)]);
  }
  std::vector<std::pair<int, double>> events;
  double t = 1.0;
  for (std::size_t i = 0; i < infections; ++i) {
    events.emplace_back(pool[i], t);
    t += 0.2 + rng.uniform();
  }
  return normalize_events(std::move(events), n);
}

// All ancestor vectors of an episode (anc[0]=0, anc[j] in [0,j)).
void all_trees(std::size_t size, std::vector<int>& tree,
               const std::function<void(const std::vector<int>&)>& visit) {
  if (tree.size() == size) {
    visit(tree);
    return;
  }
  const std::size_t j = tree.size();
  for (int a = 0; a < static_cast<int>(j); ++a) {
    tree.push_back(a);
    all_trees(size, tree, visit);
    tree.pop_back();
  }
}

void for_each_tree(const Episode& ep,
                   const std::function<void(const std::vector<int>&)>& visit) {
  std::vector<int> tree{0};
  if (ep.size() == 1) {
    visit(tree);
    return;
  }
  all_trees(ep.size(), tree, visit);
}

// Joint probability of (episode, tree) recomputed in probability space from
// the generative story (success k, delay density r*exp(-r*delta), survival
// 1-k), independently of the log-domain kernel code under test.
double direct_joint_prob(const Model& m, const Episode& ep,
                         const std::vector<int>& tree) {
  const std::vector<State> states = states_along_tree(m, ep, tree);
  const State none{};
  auto state_of = [&](std::size_t u) -> const State& {
    return states.empty() ? none : states[u];
  };
  double p = 1.0;
  for (std::size_t j = 1; j < ep.size(); ++j) {
    const int v = ep.nodes[j];
    for (std::size_t u = 0; u < j; ++u) {
      const double k = m.k(state_of(u), ep.nodes[u], v);
      const double r = m.r(ep.nodes[u], v);
      const double delta = ep.times[j] - ep.times[u];
      if (static_cast<int>(u) == tree[j]) {
        p *= k * r * std::exp(-r * delta);
      } else {
        p *= k * std::exp(-r * delta) + 1.0 - k;
      }
    }
  }
  for (std::size_t u = 0; u < ep.size(); ++u) {
    for (int w = 0; w < m.n; ++w) {
      if (!ep.infected(w)) p *= 1.0 - m.k(state_of(u), ep.nodes[u], w);
    }
  }
  return p;
}

double enum_log_marginal(const Model& m, const Episode& ep) {
  std::vector<double> joints;
  for_each_tree(ep, [&](const std::vector<int>& tree) {
    joints.push_back(joint_log_prob(m, Cascade{ep, tree}));
  });
  double mx = *std::max_element(joints.begin(), joints.end());
  double s = 0.0;
  for (double j : joints) s += std::exp(j - mx);
  return mx + std::log(s);
}

double enum_elbo(const Model& m, const Episode& ep) {
  double elbo = 0.0;
  for_each_tree(ep, [&](const std::vector<int>& tree) {
    const Cascade cas{ep, tree};
    const double lq = trajectory_log_q(m, cas);
    elbo += std::exp(lq) * (joint_log_prob(m, cas) - lq);
  });
  return elbo;
}

// The estimator's negated per-bin objective with this epoch's trajectory
// draws held fixed: FD of this function must match elbo_and_gradient.
double frozen_objective(const Model& m, const Bin& bin,
                        const std::vector<double>& w_frozen, std::uint64_t seed,
                        int epoch) {
  double sum = 0.0;
  for (std::size_t row = 0; row < bin.rows(); ++row) {
    const Episode ep = bin.row_episode(row);
    Tape tape(m.params);
    Rng rng(mix_stream(seed, bin.source_index[row],
                       static_cast<std::uint64_t>(epoch)));
    const TracedEpisode te = trace_episode(tape, m, ep, &rng);
    sum += w_frozen[row] * tape.value(te.logq) + tape.value(te.ll);
  }
  return -sum / static_cast<double>(bin.rows());
}

double exact_objective(const Model& m, const Bin& bin) {
  double sum = 0.0;
  for (std::size_t row = 0; row < bin.rows(); ++row) {
    sum += episode_exact_loglik(m, bin.row_episode(row));
  }
  return -sum / static_cast<double>(bin.rows());
}

struct GradCheck {
  double worst_rel = 0.0;
  int checked = 0;
};

// Central finite difference over every coordinate of every group against the
// analytic gradient in `grads`; `f` must see the mutated model.
void fd_all_groups(Model& m, const GradBuffer& grads,
                   const std::function<double()>& f, double h, double rel_tol,
                   GradCheck& out, bool& ok) {
  for (std::size_t g = 0; g < m.params.group_count(); ++g) {
    auto& data = m.params.group(static_cast<int>(g)).data;
    const std::vector<double>& ana = grads.group(static_cast<int>(g));
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double keep = data[i];
      data[i] = keep + h;
      const double up = f();
      data[i] = keep - h;
      const double dn = f();
      data[i] = keep;
      const double num = (up - dn) / (2.0 * h);
      const double err = std::abs(num - ana[i]);
      const double tol = rel_tol * std::max(std::abs(num), std::abs(ana[i])) +
                         1e-8;  // abs floor for near-zero coordinates
      const double rel = err / std::max({std::abs(num), std::abs(ana[i]), 1.0});
      out.worst_rel = std::max(out.worst_rel, rel);
      ++out.checked;
      if (err > tol) ok = false;
    }
  }
}

std::vector<Episode> episodes_from(const Model& truth, std::uint64_t seed,
                                   std::size_t count, std::size_t cap = 0) {
  std::vector<Episode> eps;
  eps.reserve(count);
  GenConfig cfg{cap};
  for (std::size_t i = 0; i < count; ++i) {
    Rng rng(mix_stream(seed, 0x67656e65ULL, i));
    eps.push_back(generate(truth, rng, cfg).cascade.episode);
  }
  return eps;
}

// ------------------------------------------------------------- criteria ----

bool crit1_gradients() {
  const double t0 = now_s();
  struct Cfg {
    const char* name;
    std::function<Model(std::uint64_t)> make;
    bool sampled;
  };
  const std::vector<Cfg> cfgs = {
      {"ctic", [](std::uint64_t s) { return Model::classic(8, s); }, false},
      {"embctic", [](std::uint64_t s) { return Model::embedded(8, 4, s); },
       false},
      {"rec-gru",
       [](std::uint64_t s) {
         return Model::recurrent(8, 4, CellType::kGru, s);
       },
       true},
      {"rec-elman",
       [](std::uint64_t s) {
         return Model::recurrent(8, 4, CellType::kElman, s);
       },
       true},
      {"rec-mlp",
       [](std::uint64_t s) {
         return Model::recurrent(8, 4, CellType::kMlp, s);
       },
       true},
      {"rec-identity",
       [](std::uint64_t s) {
         return Model::recurrent(8, 4, CellType::kIdentity, s);
       },
       true},
  };
  bool ok = true;
  GradCheck check;
  for (const Cfg& cfg : cfgs) {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      Model m = cfg.make(seed);
      Rng rng(mix_stream(seed, 0xe9e9ULL));
      std::vector<Episode> eps;
      for (int e = 0; e < 3; ++e) {
        eps.push_back(random_episode(rng, 8, 1 + rng.uniform_index(4)));
      }
      const std::vector<Bin> bins = make_bins(eps, 8, 8);
      const Bin& bin = bins[0];
      const std::uint64_t est_seed = seed * 131;
      const int epoch = 1;
      BaselineBuffer baseline(1, 10);
      GradBuffer grads(m.params);
      elbo_and_gradient(m, bin, 0, baseline, 1, est_seed, epoch, grads);

      if (cfg.sampled) {
        std::vector<double> w(bin.rows());
        for (std::size_t row = 0; row < bin.rows(); ++row) {
          Tape tape(m.params);
          Rng r2(mix_stream(est_seed, bin.source_index[row],
                            static_cast<std::uint64_t>(epoch)));
          const TracedEpisode te =
              trace_episode(tape, m, bin.row_episode(row), &r2);
          w[row] = tape.value(te.ll) - tape.value(te.logq) - 1.0;
        }
        fd_all_groups(
            m, grads,
            [&] { return frozen_objective(m, bin, w, est_seed, epoch); },
            1e-6, 1e-4, check, ok);
      } else {
        fd_all_groups(
            m, grads, [&] { return exact_objective(m, bin); }, 1e-5, 1e-4,
            check, ok);
      }
    }
  }
  const double wall = now_s() - t0;
  return report(1, "finite-difference gradient agreement", ok && wall < 60.0,
                fmt("%d coordinates over 6 model configs x 20 seeds, worst "
                    "rel err %.2e (tol 1e-4), %.1fs (budget 60s)",
                    check.checked, check.worst_rel, wall));
}

bool crit2_enumeration() {
  const double t0 = now_s();
  bool ok = true;
  double worst_marg = 0.0, worst_is = 0.0, worst_gap = 0.0;
  for (int i = 0; i < 50; ++i) {
    const std::uint64_t seed = 1000 + static_cast<std::uint64_t>(i);
    Model m = i % 3 == 0 ? Model::classic(7, seed)
              : i % 3 == 1
                  ? Model::embedded(7, 4, seed)
                  : Model::recurrent(7, 4, CellType::kGru, seed);
    Rng rng(mix_stream(seed, 0x5050ULL));
    const Episode ep = random_episode(rng, 7, 1 + rng.uniform_index(4));

    // (a) tree-summed joints vs the probability-space oracle.
    double direct = 0.0;
    for_each_tree(ep, [&](const std::vector<int>& tree) {
      direct += direct_joint_prob(m, ep, tree);
    });
    const double lm = enum_log_marginal(m, ep);
    const double err_marg = std::abs(lm - std::log(direct));
    worst_marg = std::max(worst_marg, err_marg);
    if (err_marg > 1e-10) ok = false;
    if (!m.needs_states()) {
      const double err_fact = std::abs(lm - episode_exact_loglik(m, ep));
      worst_marg = std::max(worst_marg, err_fact);
      if (err_fact > 1e-10) ok = false;
    }

    // (b) importance-sampled NLL at S=1e5 within 1% of the exact marginal.
    const double is_nll =
        importance_nll(m, {ep}, 100000, mix_stream(seed, 0x1515ULL));
    const double rel = std::abs(is_nll - (-lm)) / std::abs(lm);
    worst_is = std::max(worst_is, rel);
    if (rel > 0.01) ok = false;

    // (c) ELBO never exceeds the exact log-marginal.
    const double gap = enum_elbo(m, ep) - lm;
    worst_gap = std::max(worst_gap, gap);
    if (gap > 1e-9) ok = false;
  }
  const double wall = now_s() - t0;
  return report(2, "enumeration oracle equivalence", ok && wall < 300.0,
                fmt("50 episodes: worst log-marginal err %.2e (tol 1e-10), "
                    "worst IS rel err %.2e (tol 1e-2), worst ELBO gap %.2e "
                    "(tol 1e-9), %.1fs (budget 300s)",
                    worst_marg, worst_is, worst_gap, wall));
}

bool crit3_unbiasedness() {
  const double t0 = now_s();
  Model m = Model::recurrent(4, 2, CellType::kGru, 42);
  Rng erng(7);
  const Episode ep = random_episode(erng, 4, 3);
  const std::vector<Episode> eps{ep};
  const std::vector<Bin> bins = make_bins(eps, 4, 4);

  // Exact gradient of the negated enumeration ELBO by central differences.
  std::vector<std::vector<double>> exact;
  const double h = 1e-5;
  for (std::size_t g = 0; g < m.params.group_count(); ++g) {
    auto& data = m.params.group(static_cast<int>(g)).data;
    std::vector<double> row(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double keep = data[i];
      data[i] = keep + h;
      const double up = -enum_elbo(m, ep);
      data[i] = keep - h;
      const double dn = -enum_elbo(m, ep);
      data[i] = keep;
      row[i] = (up - dn) / (2.0 * h);
    }
    exact.push_back(std::move(row));
  }

  // Sample mean and variance of the estimator over 1e5 draws.
  const int draws = 100000;
  GradBuffer grads(m.params);
  std::vector<std::vector<double>> mean = exact, m2 = exact;
  for (auto& g : mean) std::fill(g.begin(), g.end(), 0.0);
  for (auto& g : m2) std::fill(g.begin(), g.end(), 0.0);
  BaselineBuffer baseline(1, 10);
  for (int s = 1; s <= draws; ++s) {
    elbo_and_gradient(m, bins[0], 0, baseline, 1, 99, s, grads);
    for (std::size_t g = 0; g < mean.size(); ++g) {
      const std::vector<double>& cur = grads.group(static_cast<int>(g));
      for (std::size_t i = 0; i < cur.size(); ++i) {
        const double delta = cur[i] - mean[g][i];
        mean[g][i] += delta / s;
        m2[g][i] += delta * (cur[i] - mean[g][i]);
      }
    }
  }
  bool ok = true;
  double worst_margin = 0.0;
  int coords = 0;
  for (std::size_t g = 0; g < mean.size(); ++g) {
    for (std::size_t i = 0; i < mean[g].size(); ++i) {
      const double se = std::sqrt(m2[g][i] / (draws - 1.0) / draws);
      const double err = std::abs(mean[g][i] - exact[g][i]);
      // 1e-9 floor covers zero-variance coordinates (exact-zero gradients).
      worst_margin = std::max(worst_margin, err / (3.0 * se + 1e-9));
      ++coords;
      if (err > 3.0 * se + 1e-9) ok = false;
    }
  }
  return report(3, "score-function estimator unbiasedness", ok,
                fmt("1e5 draws vs enumeration gradient, %d coordinates, "
                    "worst |bias| %.2f of its 3-standard-error allowance, "
                    "%.1fs",
                    coords, worst_margin, now_s() - t0));
}

bool crit4_generator() {
  const double t0 = now_s();
  bool ok = true;
  std::string why;

  // (a) structural invariants on 1e4 classic + 2e3 recurrent cascades.
  SyntheticSpec spec;
  spec.nodes = 30;
  spec.attach = 2;
  spec.world_k = 0.05;
  spec.seed = 44;
  const Graph g = build_graph(spec);
  const Model classic_truth = fixture_for_regime(g, 0);
  const Model rec_rand = Model::recurrent(16, 4, CellType::kGru, 8);
  std::size_t checked = 0;
  auto check_invariants = [&](const Model& m, std::uint64_t seed,
                              std::size_t count) {
    for (std::size_t i = 0; i < count; ++i) {
      Rng rng(mix_stream(seed, 0x67656e65ULL, i));
      const GenResult res = generate(m, rng);
      const Episode& ep = res.cascade.episode;
      const auto& anc = res.cascade.ancestors;
      bool good = ep.size() >= 1 && ep.nodes[0] == kWorldNode &&
                  ep.times[0] == 0.0 && anc.size() == ep.size() &&
                  anc[0] == 0;
      std::vector<bool> seen(static_cast<std::size_t>(m.n), false);
      for (std::size_t j = 0; j < ep.size() && good; ++j) {
        const int v = ep.nodes[j];
        good = v >= 0 && v < m.n && !seen[static_cast<std::size_t>(v)] &&
               (j == 0 ||
                (ep.times[j] > ep.times[j - 1] && anc[j] >= 0 &&
                 anc[j] < static_cast<int>(j)));
        if (good) seen[static_cast<std::size_t>(v)] = true;
      }
      ++checked;
      if (!good) {
        ok = false;
        why = fmt("invariant violated at cascade %zu", i);
        return;
      }
    }
  };
  check_invariants(classic_truth, 4444, 10000);
  check_invariants(rec_rand, 5555, 2000);

  // (b) eventual-infection marginals vs exact percolation on 3 nodes.
  // Who ends up infected ignores delays entirely: node 1 is infected iff the
  // world edge fires or (world->2 and 2->1) both fire.
  const double k01 = 0.35, k02 = 0.55, k12 = 0.5, k21 = 0.45;
  Model tri = Model::fixture({{0.0, k01, k02}, {0.0, 0.0, k12}, {0.0, k21, 0.0}},
                             {{1.0, 1.4, 0.7}, {1.0, 1.0, 2.2}, {1.0, 0.6, 1.0}});
  const double p1 = k01 + (1.0 - k01) * k02 * k21;
  const double p2 = k02 + (1.0 - k02) * k01 * k12;
  const std::vector<double> probs = marginal_infection_probs(tri, 100000, 606);
  const double err1 = std::abs(probs[1] - p1);
  const double err2 = std::abs(probs[2] - p2);
  if (err1 > 0.02 || err2 > 0.02) {
    ok = false;
    why = fmt("percolation err %.4f/%.4f", err1, err2);
  }

  // (c) conditioned generation never backfills the censored window.
  auto check_conditioned = [&](const Model& m, std::uint64_t seed) {
    Prefix prefix;
    prefix.observed.nodes = {kWorldNode, 1};
    prefix.observed.times = {0.0, 0.4};
    prefix.observed.raw_times = {0.0, 0.4};
    prefix.ancestors = {0, 0};
    prefix.tau = 1.0;
    if (m.needs_states()) {
      prefix.states.push_back(m.initial_state());
      prefix.states.push_back(m.state_update(prefix.states[0], 1));
    }
    std::size_t grew = 0;
    for (std::size_t i = 0; i < 10000; ++i) {
      Rng rng(mix_stream(seed, 0x636f6eULL, i));
      const GenResult res = generate_conditioned(m, prefix, rng);
      const Episode& ep = res.cascade.episode;
      if (ep.size() < 2 || ep.nodes[1] != 1) {
        ok = false;
        why = "conditioned run lost its prefix";
        return;
      }
      for (std::size_t j = 2; j < ep.size(); ++j) {
        if (ep.times[j] < prefix.tau) {
          ok = false;
          why = fmt("infection at %.3f < tau", ep.times[j]);
          return;
        }
      }
      if (ep.size() > 2) ++grew;
    }
    if (grew == 0) {
      ok = false;
      why = "conditioned runs never grew past the prefix";
    }
  };
  check_conditioned(classic_truth, 77);
  check_conditioned(rec_rand, 78);

  return report(4, "generator fidelity", ok,
                ok ? fmt("%zu cascades pass invariants; percolation err "
                         "%.4f/%.4f (tol 0.02); conditioned runs stay past "
                         "tau, %.1fs",
                         checked, err1, err2, now_s() - t0)
                   : why);
}

bool crit5_recovery() {
  const double t0 = now_s();
  // The k range keeps every counted edge transmitting >= 100 times over the
  // corpus, which the delay-rate estimate needs to concentrate.
  SyntheticSpec spec;
  spec.nodes = 19;
  spec.attach = 2;
  spec.k_lo = 0.25;
  spec.k_hi = 0.6;
  spec.world_k = 0.15;
  spec.seed = 506;
  const Graph g = build_graph(spec);
  const Model truth = fixture_for_regime(g, 0);
  const std::vector<Episode> eps = episodes_from(truth, 910, 5000);

  // Opportunities: u was infected and could still have been v's first
  // infector (v uninfected, or infected after u).
  std::vector<std::vector<int>> opp(20, std::vector<int>(20, 0));
  for (const Episode& ep : eps) {
    for (std::size_t j = 0; j < ep.size(); ++j) {
      for (int v = 1; v < 20; ++v) {
        if (v == ep.nodes[j]) continue;
        if (!ep.infected(v) || ep.time_of(v) > ep.times[j]) {
          ++opp[static_cast<std::size_t>(ep.nodes[j])][static_cast<std::size_t>(v)];
        }
      }
    }
  }

  Model m = Model::classic(20, 77);
  TrainConfig cfg;
  cfg.epochs = 200;
  cfg.lr = 0.05;
  cfg.seed = 13;
  train(m, eps, {}, cfg);
  cfg.epochs = 100;
  cfg.lr = 0.01;  // polish stage tightens the weakly-exercised edges
  train(m, eps, {}, cfg);

  const State none{};
  double mae = 0.0, worst_factor = 0.0;
  int edges = 0, factor_viol = 0;
  for (const Edge& e : g.edges) {
    if (opp[static_cast<std::size_t>(e.u)][static_cast<std::size_t>(e.v)] < 50) {
      continue;
    }
    ++edges;
    mae += std::abs(m.k(none, e.u, e.v) - e.k_variants[0]);
    const double factor =
        std::max(m.r(e.u, e.v) / e.r, e.r / m.r(e.u, e.v));
    worst_factor = std::max(worst_factor, factor);
    if (factor > 1.5) ++factor_viol;
  }
  mae /= std::max(edges, 1);
  const double wall = now_s() - t0;
  const bool ok =
      edges > 0 && mae < 0.1 && factor_viol == 0 && wall < 600.0;
  return report(5, "classic parameter recovery", ok,
                fmt("%d edges with >=50 opportunities: k MAE %.4f (tol 0.1), "
                    "worst r factor %.3f (tol 1.5, %d violations), %.1fs "
                    "(budget 600s)",
                    edges, mae, worst_factor, factor_viol, wall));
}

struct Splits {
  std::vector<Episode> train, val, test;
  std::vector<GroundTruthRecord> test_gt;
};

Splits corpus_splits(Corpus corpus, std::uint64_t seed) {
  SyntheticSpec spec;
  spec.seed = seed;
  const Graph g = build_graph(spec);
  Splits out;
  struct Part {
    std::vector<Episode>* eps;
    std::size_t count;
    std::uint64_t salt;
  };
  const Part parts[] = {
      {&out.train, 10000, 1}, {&out.val, 2000, 2}, {&out.test, 2000, 3}};
  for (const Part& part : parts) {
    SyntheticSpec sub = spec;
    sub.episodes = part.count;
    sub.seed = mix_stream(seed, 0x73706c6974ULL, part.salt);
    CorpusResult result = sample_corpus(g, sub, corpus);
    for (GroundTruthRecord& rec : result.records) {
      part.eps->push_back(rec.cascade.episode);
    }
    if (part.salt == 3) out.test_gt = std::move(result.records);
  }
  return out;
}

Model fit(Model model, const Splits& data, int epochs, double lr,
          std::uint64_t seed) {
  TrainConfig cfg;
  cfg.epochs = epochs;
  cfg.lr = lr;
  cfg.seed = seed;
  train(model, data.train, data.val, cfg);
  return model;
}

bool crit6_trends() {
  const double t0 = now_s();

  const Splits a2 = corpus_splits(Corpus::kArti2, 606);
  const Model classic2 = fit(Model::classic(101, 1), a2, 150, 0.05, 11);
  const Model emb2 = fit(Model::embedded(101, 16, 2), a2, 200, 0.02, 11);
  const Model rec2 =
      fit(Model::recurrent(101, 16, CellType::kGru, 3), a2, 300, 0.02, 11);
  const double nll_classic2 = nll(classic2, a2.test, 100, 0, 0.0, 5).value;
  const double nll_emb2 = nll(emb2, a2.test, 100, 0, 0.0, 5).value;
  const double nll_rec2 = nll(rec2, a2.test, 100, 0, 0.0, 5).value;
  const double inf_emb2 =
      infector_recovery(emb2, a2.test_gt, 100, 0, 0.0, 7).value;
  const double inf_rec2 =
      infector_recovery(rec2, a2.test_gt, 100, 0, 0.0, 7).value;

  const Splits a1 = corpus_splits(Corpus::kArti1, 616);
  const Model classic1 = fit(Model::classic(101, 1), a1, 150, 0.05, 11);
  const Model rec1 =
      fit(Model::recurrent(101, 16, CellType::kGru, 3), a1, 300, 0.02, 11);
  const double nll_classic1 = nll(classic1, a1.test, 100, 0, 0.0, 5).value;
  const double nll_rec1 = nll(rec1, a1.test, 100, 0, 0.0, 5).value;

  const double wall = now_s() - t0;
  const bool ok = nll_rec2 < nll_emb2 && nll_rec2 < nll_classic2 &&
                  inf_rec2 - inf_emb2 >= 0.05 && nll_rec1 <= nll_classic1 &&
                  wall < 7200.0;
  return report(
      6, "benchmark trends on synthetic corpora", ok,
      fmt("content corpus NLL rec %.3f vs emb %.3f vs classic %.3f; INF rec "
          "%.3f vs emb %.3f (gap %.3f, need >=0.05); regime corpus NLL rec "
          "%.3f vs classic %.3f; %.0fs (budget 7200s)",
          nll_rec2, nll_emb2, nll_classic2, inf_rec2, inf_emb2,
          inf_rec2 - inf_emb2, nll_rec1, nll_classic1, wall));
}

bool crit7_conditioning() {
  const double t0 = now_s();
  bool ok = true;
  double worst_exact = 0.0, worst_forms = 0.0;
  std::string why;

  // Metrics at a vanishing horizon equal the unconditional metrics: exactly
  // for closed-form paths, within Monte-Carlo error for simulated ones.
  Rng erng(31);
  const Model mc = Model::classic(9, 1);
  const Model me = Model::embedded(9, 4, 2);
  const Model mr = Model::recurrent(9, 4, CellType::kGru, 3);
  std::vector<Episode> eps;
  std::vector<GroundTruthRecord> gts;
  for (int i = 0; i < 20; ++i) {
    eps.push_back(random_episode(erng, 9, 1 + erng.uniform_index(5)));
    GroundTruthRecord rec;
    rec.cascade.episode = eps.back();
    rec.cascade.ancestors.push_back(0);
    for (std::size_t j = 1; j < eps.back().size(); ++j) {
      rec.cascade.ancestors.push_back(
          static_cast<int>(erng.uniform_index(j)));
    }
    gts.push_back(std::move(rec));
  }
  const double tiny = 1e-12;
  for (const Model* m : {&mc, &me, &mr}) {
    const double d_nll = std::abs(nll(*m, eps, 50, 0, 0.0, 5).value -
                                  nll(*m, eps, 50, -1, tiny, 5).value);
    const double d_inf =
        std::abs(infector_recovery(*m, gts, 50, 0, 0.0, 7).value -
                 infector_recovery(*m, gts, 50, -1, tiny, 7).value);
    worst_exact = std::max({worst_exact, d_nll, d_inf});
    if (d_nll > 1e-9 || d_inf > 1e-9) {
      ok = false;
      why = fmt("NLL/INF tau->0 mismatch %.2e/%.2e", d_nll, d_inf);
    }
  }
  for (const Model* m : {&mc, &mr}) {
    const MetricsReport c0 = cross_entropy(*m, eps, 5000, 0, 0.0, 5);
    const MetricsReport ct = cross_entropy(*m, eps, 5000, -1, tiny, 5);
    const double band = 4.0 * (c0.std_error + ct.std_error) + 1e-3;
    if (std::abs(c0.value - ct.value) > band) {
      ok = false;
      why = fmt("CE tau->0 drift %.4f > band %.4f",
                std::abs(c0.value - ct.value), band);
    }
  }

  // First-infection density: the sum-of-products form must equal the
  // product-times-ratio-sum form on random kernel inputs.
  Rng krng(99);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t cand = 1 + krng.uniform_index(20);
    std::vector<double> la(cand), lb(cand), a(cand), b(cand);
    for (std::size_t i = 0; i < cand; ++i) {
      const double k = krng.uniform(0.02, 0.98);
      const double r = krng.uniform(0.05, 5.0);
      const double delta = krng.uniform(1e-3, 4.0);
      a[i] = k * r * std::exp(-r * delta);
      b[i] = k * std::exp(-r * delta) + 1.0 - k;
      la[i] = cm::log_a(std::log(k), std::log(r), r, delta);
      lb[i] = cm::log_b(std::log(k), std::log1p(-k), r, delta);
    }
    double sum = 0.0;
    for (std::size_t u = 0; u < cand; ++u) {
      double term = a[u];
      for (std::size_t w = 0; w < cand; ++w) {
        if (w != u) term *= b[w];
      }
      sum += term;
    }
    const double err = std::abs(cm::log_h(la, lb) - std::log(sum));
    worst_forms = std::max(worst_forms, err);
    if (err > 1e-10) ok = false;
  }

  // Censored kernels: conditional b times the censor denominator recovers
  // the unconditional b, and the denominator is b at delay tau - t_u.
  for (int trial = 0; trial < 1000; ++trial) {
    const double k = krng.uniform(0.02, 0.98);
    const double r = krng.uniform(0.05, 5.0);
    const double tau = krng.uniform(0.1, 3.0);
    const double t_u = krng.uniform(0.0, tau * 0.999);
    const double t_v = tau + krng.uniform(0.0, 3.0);
    const double lk = std::log(k), l1mk = std::log1p(-k), lr = std::log(r);
    const double den = cm::log_censor_den(lk, l1mk, r, tau, t_u);
    const double err_den =
        std::abs(den - cm::log_b(lk, l1mk, r, tau - t_u));
    const double err_b =
        std::abs(cm::log_b_cond(lk, l1mk, r, t_u, t_v, tau) + den -
                 cm::log_b(lk, l1mk, r, t_v - t_u));
    const double err_a =
        std::abs(cm::log_a_cond(lk, l1mk, lr, r, t_u, t_v, tau) + den -
                 cm::log_a(lk, lr, r, t_v - t_u));
    worst_forms = std::max({worst_forms, err_den, err_b, err_a});
    if (err_den > 1e-10 || err_b > 1e-10 || err_a > 1e-10) ok = false;
  }

  return report(7, "conditioning consistency", ok,
                ok ? fmt("tau->0 worst exact-path drift %.2e (tol 1e-9); CE "
                         "within MC bands; kernel-form worst err %.2e "
                         "(tol 1e-10) on 2000 random inputs, %.1fs",
                         worst_exact, worst_forms, now_s() - t0)
                   : why);
}

bool crit8_degenerate_exactness() {
  const double t0 = now_s();
  const Model planted = Model::recurrent(12, 4, CellType::kGru, 1234);
  std::vector<Episode> eps;
  for (std::size_t i = 0; eps.size() < 300 && i < 20000; ++i) {
    Rng rng(mix_stream(777, 0x67656e65ULL, i));
    Episode ep = generate(planted, rng, GenConfig{2}).cascade.episode;
    if (ep.size() == 2) eps.push_back(std::move(ep));
  }

  Model m = Model::recurrent(12, 4, CellType::kGru, 999);
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.batch = 512;
  cfg.lr = 0.05;
  cfg.seed = 13;
  double worst = 0.0;
  for (int step = 0; step < 25; ++step) {
    // With a single candidate the latent tree is deterministic, so the
    // sampled training loss must equal the exact NLL at the pre-step
    // parameters, every step.
    double nll_before = 0.0;
    for (const Episode& ep : eps) {
      nll_before -= joint_log_prob(m, Cascade{ep, {0, 0}});
    }
    nll_before /= static_cast<double>(eps.size());
    const TrainResult res = train(m, eps, {}, cfg);
    worst = std::max(worst, std::abs(res.trace[0].elbo + nll_before));
  }
  const bool ok = eps.size() == 300 && worst < 1e-10;
  return report(8, "single-tree training loss exactness", ok,
                fmt("300 two-node episodes, 25 steps, worst |loss - exact "
                    "NLL| %.2e (tol 1e-10), %.1fs",
                    worst, now_s() - t0));
}

}  // namespace

int main(int argc, char** argv) {
  // Optional arguments restrict the run to the listed criterion numbers.
  std::vector<bool> want(9, argc <= 1);
  for (int i = 1; i < argc; ++i) {
    const int c = std::atoi(argv[i]);
    if (c >= 1 && c <= 8) want[static_cast<std::size_t>(c)] = true;
  }
  const std::function<bool()> checks[] = {
      crit1_gradients, crit2_enumeration,  crit3_unbiasedness,
      crit4_generator, crit5_recovery,     crit6_trends,
      crit7_conditioning, crit8_degenerate_exactness};
  int failures = 0;
  for (int c = 1; c <= 8; ++c) {
    if (want[static_cast<std::size_t>(c)]) {
      failures += !checks[c - 1]();
    }
  }
  if (failures == 0) {
    std::printf("all acceptance criteria pass\n");
  } else {
    std::printf("%d acceptance criteria FAILED\n", failures);
  }
  return failures == 0 ? 0 : 1;
}
