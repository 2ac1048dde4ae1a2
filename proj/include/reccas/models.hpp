#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "reccas/param_store.hpp"
#include "reccas/tape.hpp"

namespace reccas {

enum class Family { kClassic, kEmbedded, kRecurrent };
enum class CellType { kGru, kElman, kMlp, kIdentity };

std::string family_name(Family f);
Family family_from_name(const std::string& name);
std::string cell_name(CellType c);
CellType cell_from_name(const std::string& name);

// Diffusion-path state of an infected node. Only the recurrent family keeps
// a real vector; the other families carry no state (z stays empty).
struct State {
  std::vector<double> z;
};

// One of the three model families behind a single interface:
//   classic   — per-pair tables; k = sigmoid(k_raw[u][v]), r = exp(r_raw[u][v])
//   embedded  — k = sigmoid(<omega_k_src[u], omega_k[v]>), r as recurrent
//   recurrent — k = sigmoid(<z_u, omega_k[v]>), z updated along the infection
//               tree by the configured cell; r = exp(-|<omega_r1[u], omega_r2[v]>|)
// Probabilities are clamped to [1e-6, 1-1e-6] everywhere except fixture
// models (classic tables holding literal k/r values, used by tests and the
// synthetic generators, where exact 0 and 1 are meaningful).
class Model {
 public:
  Family family = Family::kClassic;
  CellType cell = CellType::kGru;
  int n = 0;  // node count including the world node
  int d = 0;  // embedding dimension (0 for classic)
  bool direct_tables = false;
  int epoch = 0;  // completed training epochs (serialized)
  ParamStore params;

  static Model classic(int n, std::uint64_t seed);
  static Model embedded(int n, int d, std::uint64_t seed);
  static Model recurrent(int n, int d, CellType cell, std::uint64_t seed);
  // Fixture: k[u][v] / r[u][v] used literally (no sigmoid/exp, no clamp).
  static Model fixture(std::vector<std::vector<double>> k,
                       std::vector<std::vector<double>> r);

  State initial_state() const;
  State state_update(const State& z_u, int v) const;

  double k(const State& z_u, int u, int v) const;
  double log_k(const State& z_u, int u, int v) const;
  double log_1mk(const State& z_u, int u, int v) const;
  double r(int u, int v) const;
  double log_r(int u, int v) const;

  bool needs_states() const { return family == Family::kRecurrent; }

  // Group ids (set at construction/load); -1 when the family lacks the group.
  int g_k_raw = -1, g_r_raw = -1;
  int g_omega_k = -1, g_omega_k_src = -1;
  int g_omega_r1 = -1, g_omega_r2 = -1;
  int g_omega_f = -1, g_z0 = -1;
  int g_cell_w_ih = -1, g_cell_w_hh = -1, g_cell_b_ih = -1, g_cell_b_hh = -1;
  int g_cell_w1x = -1, g_cell_w1h = -1, g_cell_b1 = -1;
  int g_cell_w2 = -1, g_cell_b2 = -1;

  void cache_group_ids();

 private:
  double k_logit(const State& z_u, int u, int v) const;
};

// Traced twins used by training. They must agree with the plain methods
// bit-for-bit (same kernels, same order of operations).
Value traced_initial_state(Tape& tape, const Model& m);
Value traced_state_update(Tape& tape, const Model& m, Value z_u, int v);
Value traced_k_logit(Tape& tape, const Model& m, Value z_u, int u, int v);
Value traced_log_r(Tape& tape, const Model& m, int u, int v);
// Sum of log(1-k(u -> v)) over the given targets; z_u is ignored by the
// classic/embedded families.
Value traced_log_g_terms(Tape& tape, const Model& m, Value z_u, int u,
                         const std::vector<int>& targets);

}  // namespace reccas
