#include "reccas/models.hpp"

#include <cmath>
#include <stdexcept>

#include "reccas/cascade_math.hpp"
#include "reccas/kernels.hpp"
#include "reccas/rng.hpp"

namespace reccas {

namespace {

constexpr double kClampLo = 1e-6;

void fill_uniform(ParamStore::Group& g, Rng& rng, double lo, double hi) {
  for (auto& x : g.data) x = rng.uniform(lo, hi);
}

void init_embedding_groups(ParamStore& params, Rng& rng, double bound) {
  for (std::size_t i = 0; i < params.group_count(); ++i) {
    auto& g = params.group(static_cast<int>(i));
    if (g.name == "z0") continue;  // stays zero
    fill_uniform(g, rng, -bound, bound);
  }
}

}  // namespace

std::string family_name(Family f) {
  switch (f) {
    case Family::kClassic: return "ctic";
    case Family::kEmbedded: return "embctic";
    case Family::kRecurrent: return "recctic";
  }
  throw std::logic_error("unknown family");
}

Family family_from_name(const std::string& name) {
  if (name == "ctic") return Family::kClassic;
  if (name == "embctic") return Family::kEmbedded;
  if (name == "recctic") return Family::kRecurrent;
  throw std::invalid_argument("unknown model family: " + name);
}

std::string cell_name(CellType c) {
  switch (c) {
    case CellType::kGru: return "gru";
    case CellType::kElman: return "elman";
    case CellType::kMlp: return "mlp";
    case CellType::kIdentity: return "identity";
  }
  throw std::logic_error("unknown cell");
}

CellType cell_from_name(const std::string& name) {
  if (name == "gru") return CellType::kGru;
  if (name == "elman") return CellType::kElman;
  if (name == "mlp") return CellType::kMlp;
  if (name == "identity") return CellType::kIdentity;
  throw std::invalid_argument("unknown cell type: " + name);
}

void Model::cache_group_ids() {
  g_k_raw = params.group_id("k_raw");
  g_r_raw = params.group_id("r_raw");
  g_omega_k = params.group_id("omega_k");
  g_omega_k_src = params.group_id("omega_k_src");
  g_omega_r1 = params.group_id("omega_r1");
  g_omega_r2 = params.group_id("omega_r2");
  g_omega_f = params.group_id("omega_f");
  g_z0 = params.group_id("z0");
  g_cell_w_ih = params.group_id("cell_w_ih");
  g_cell_w_hh = params.group_id("cell_w_hh");
  g_cell_b_ih = params.group_id("cell_b_ih");
  g_cell_b_hh = params.group_id("cell_b_hh");
  g_cell_w1x = params.group_id("cell_w1x");
  g_cell_w1h = params.group_id("cell_w1h");
  g_cell_b1 = params.group_id("cell_b1");
  g_cell_w2 = params.group_id("cell_w2");
  g_cell_b2 = params.group_id("cell_b2");
}

Model Model::classic(int n, std::uint64_t seed) {
  Model m;
  m.family = Family::kClassic;
  m.n = n;
  m.d = 0;
  const auto un = static_cast<std::size_t>(n);
  m.params.add_group("k_raw", un, un);
  m.params.add_group("r_raw", un, un);
  Rng rng(mix_stream(seed, 0x6d6f64656c));
  // k starts small (sigmoid of ~[-2.2,-1.4] is ~[0.10,0.20]) and r near 1.
  fill_uniform(m.params.group("k_raw"), rng, -2.2, -1.4);
  fill_uniform(m.params.group("r_raw"), rng, -0.3, 0.3);
  m.cache_group_ids();
  return m;
}

Model Model::embedded(int n, int d, std::uint64_t seed) {
  Model m;
  m.family = Family::kEmbedded;
  m.n = n;
  m.d = d;
  const auto un = static_cast<std::size_t>(n);
  const auto ud = static_cast<std::size_t>(d);
  m.params.add_group("omega_k_src", un, ud);
  m.params.add_group("omega_k", un, ud);
  m.params.add_group("omega_r1", un, ud);
  m.params.add_group("omega_r2", un, ud);
  Rng rng(mix_stream(seed, 0x6d6f64656c));
  init_embedding_groups(m.params, rng, 1.0 / std::sqrt(double(d)));
  m.cache_group_ids();
  return m;
}

Model Model::recurrent(int n, int d, CellType cell, std::uint64_t seed) {
  Model m;
  m.family = Family::kRecurrent;
  m.cell = cell;
  m.n = n;
  m.d = d;
  const auto un = static_cast<std::size_t>(n);
  const auto ud = static_cast<std::size_t>(d);
  m.params.add_group("z0", 1, ud);
  m.params.add_group("omega_f", un, ud);
  m.params.add_group("omega_k", un, ud);
  m.params.add_group("omega_r1", un, ud);
  m.params.add_group("omega_r2", un, ud);
  switch (cell) {
    case CellType::kGru:
      m.params.add_group("cell_w_ih", 3 * ud, ud);
      m.params.add_group("cell_w_hh", 3 * ud, ud);
      m.params.add_group("cell_b_ih", 3, ud);
      m.params.add_group("cell_b_hh", 3, ud);
      break;
    case CellType::kElman:
      m.params.add_group("cell_w_ih", ud, ud);
      m.params.add_group("cell_w_hh", ud, ud);
      m.params.add_group("cell_b_ih", 1, ud);
      break;
    case CellType::kMlp:
      m.params.add_group("cell_w1x", ud, ud);
      m.params.add_group("cell_w1h", ud, ud);
      m.params.add_group("cell_b1", 1, ud);
      m.params.add_group("cell_w2", ud, ud);
      m.params.add_group("cell_b2", 1, ud);
      break;
    case CellType::kIdentity:
      break;  // state passes through unchanged; no cell parameters
  }
  Rng rng(mix_stream(seed, 0x6d6f64656c));
  init_embedding_groups(m.params, rng, 1.0 / std::sqrt(double(d)));
  m.cache_group_ids();
  return m;
}

Model Model::fixture(std::vector<std::vector<double>> k,
                     std::vector<std::vector<double>> r) {
  Model m;
  m.family = Family::kClassic;
  m.direct_tables = true;
  m.n = static_cast<int>(k.size());
  m.d = 0;
  const auto un = static_cast<std::size_t>(m.n);
  m.params.add_group("k_raw", un, un);
  m.params.add_group("r_raw", un, un);
  auto& kg = m.params.group("k_raw");
  auto& rg = m.params.group("r_raw");
  for (std::size_t u = 0; u < un; ++u) {
    if (k[u].size() != un || r[u].size() != un) {
      throw std::invalid_argument("fixture tables must be square");
    }
    for (std::size_t v = 0; v < un; ++v) {
      kg.at(u, v) = k[u][v];
      rg.at(u, v) = r[u][v];
    }
  }
  m.cache_group_ids();
  return m;
}

State Model::initial_state() const {
  State s;
  if (family == Family::kRecurrent) {
    const auto& z0 = params.group(g_z0);
    s.z.assign(z0.row(0), z0.row(0) + z0.cols);
  }
  return s;
}

State Model::state_update(const State& z_u, int v) const {
  if (family != Family::kRecurrent) return State{};
  const auto ud = static_cast<std::size_t>(d);
  const auto& ops = kernels::active();
  const auto& omega_f = params.group(g_omega_f);
  const double* x = omega_f.row(static_cast<std::size_t>(v));
  const double* h = z_u.z.data();
  State out;
  out.z.resize(ud);
  switch (cell) {
    case CellType::kIdentity:
      out.z = z_u.z;
      break;
    case CellType::kElman: {
      const auto& w_ih = params.group(g_cell_w_ih);
      const auto& w_hh = params.group(g_cell_w_hh);
      const auto& b = params.group(g_cell_b_ih);
      for (std::size_t i = 0; i < ud; ++i) {
        out.z[i] = std::tanh(ops.dot(w_ih.row(i), x, ud) +
                             ops.dot(w_hh.row(i), h, ud) + b.at(0, i));
      }
      break;
    }
    case CellType::kMlp: {
      const auto& w1x = params.group(g_cell_w1x);
      const auto& w1h = params.group(g_cell_w1h);
      const auto& b1 = params.group(g_cell_b1);
      const auto& w2 = params.group(g_cell_w2);
      const auto& b2 = params.group(g_cell_b2);
      std::vector<double> hidden(ud);
      for (std::size_t i = 0; i < ud; ++i) {
        hidden[i] = std::tanh(ops.dot(w1x.row(i), x, ud) +
                              ops.dot(w1h.row(i), h, ud) + b1.at(0, i));
      }
      for (std::size_t i = 0; i < ud; ++i) {
        out.z[i] = std::tanh(ops.dot(w2.row(i), hidden.data(), ud) + b2.at(0, i));
      }
      break;
    }
    case CellType::kGru: {
      const auto& w_ih = params.group(g_cell_w_ih);
      const auto& w_hh = params.group(g_cell_w_hh);
      const auto& b_ih = params.group(g_cell_b_ih);
      const auto& b_hh = params.group(g_cell_b_hh);
      // Gate rows: [0,d) reset, [d,2d) update, [2d,3d) candidate. The
      // grouping matches traced_state_update exactly so both paths produce
      // identical doubles.
      for (std::size_t i = 0; i < ud; ++i) {
        const double rg =
            sigmoid((ops.dot(w_ih.row(i), x, ud) + b_ih.at(0, i)) +
                    (ops.dot(w_hh.row(i), h, ud) + b_hh.at(0, i)));
        const double zg =
            sigmoid((ops.dot(w_ih.row(ud + i), x, ud) + b_ih.at(1, i)) +
                    (ops.dot(w_hh.row(ud + i), h, ud) + b_hh.at(1, i)));
        const double ng = std::tanh(
            (ops.dot(w_ih.row(2 * ud + i), x, ud) + b_ih.at(2, i)) +
            rg * (ops.dot(w_hh.row(2 * ud + i), h, ud) + b_hh.at(2, i)));
        out.z[i] = (1.0 - zg) * ng + zg * h[i];
      }
      break;
    }
  }
  return out;
}

double Model::k_logit(const State& z_u, int u, int v) const {
  const auto& ops = kernels::active();
  switch (family) {
    case Family::kClassic:
      return params.group(g_k_raw).at(static_cast<std::size_t>(u),
                                      static_cast<std::size_t>(v));
    case Family::kEmbedded: {
      const auto& src = params.group(g_omega_k_src);
      const auto& dst = params.group(g_omega_k);
      return ops.dot(src.row(static_cast<std::size_t>(u)),
                     dst.row(static_cast<std::size_t>(v)), src.cols);
    }
    case Family::kRecurrent: {
      const auto& dst = params.group(g_omega_k);
      return ops.dot(z_u.z.data(), dst.row(static_cast<std::size_t>(v)),
                     dst.cols);
    }
  }
  throw std::logic_error("unknown family");
}

double Model::k(const State& z_u, int u, int v) const {
  if (direct_tables) {
    return params.group(g_k_raw).at(static_cast<std::size_t>(u),
                                    static_cast<std::size_t>(v));
  }
  const double s = sigmoid(k_logit(z_u, u, v));
  return std::min(1.0 - kClampLo, std::max(kClampLo, s));
}

double Model::log_k(const State& z_u, int u, int v) const {
  if (direct_tables) {
    const double kv = params.group(g_k_raw).at(static_cast<std::size_t>(u),
                                               static_cast<std::size_t>(v));
    return kv > 0.0 ? std::log(kv) : cm::kNegInf;
  }
  return log_sigmoid_c(k_logit(z_u, u, v));
}

double Model::log_1mk(const State& z_u, int u, int v) const {
  if (direct_tables) {
    const double kv = params.group(g_k_raw).at(static_cast<std::size_t>(u),
                                               static_cast<std::size_t>(v));
    return kv < 1.0 ? std::log1p(-kv) : cm::kNegInf;
  }
  return log1m_sigmoid_c(k_logit(z_u, u, v));
}

double Model::r(int u, int v) const {
  if (direct_tables) {
    return params.group(g_r_raw).at(static_cast<std::size_t>(u),
                                    static_cast<std::size_t>(v));
  }
  return std::exp(log_r(u, v));
}

double Model::log_r(int u, int v) const {
  if (direct_tables) {
    return std::log(params.group(g_r_raw).at(static_cast<std::size_t>(u),
                                             static_cast<std::size_t>(v)));
  }
  if (family == Family::kClassic) {
    return params.group(g_r_raw).at(static_cast<std::size_t>(u),
                                    static_cast<std::size_t>(v));
  }
  const auto& r1 = params.group(g_omega_r1);
  const auto& r2 = params.group(g_omega_r2);
  const double dp = kernels::active().dot(r1.row(static_cast<std::size_t>(u)),
                                          r2.row(static_cast<std::size_t>(v)),
                                          r1.cols);
  return -std::fabs(dp);
}

Value traced_initial_state(Tape& tape, const Model& m) {
  if (m.family != Family::kRecurrent) {
    throw std::logic_error("traced states exist only for the recurrent family");
  }
  return tape.leaf_row(m.g_z0, 0);
}

Value traced_state_update(Tape& tape, const Model& m, Value z_u, int v) {
  const auto ud = static_cast<std::size_t>(m.d);
  const auto uv = static_cast<std::size_t>(v);
  switch (m.cell) {
    case CellType::kIdentity:
      return z_u;
    case CellType::kElman: {
      Value pre = tape.add(tape.matvec(m.g_cell_w_ih, 0, ud,
                                       tape.leaf_row(m.g_omega_f, uv)),
                           tape.matvec(m.g_cell_w_hh, 0, ud, z_u));
      return tape.tanh_v(tape.add(pre, tape.leaf_row(m.g_cell_b_ih, 0)));
    }
    case CellType::kMlp: {
      Value x = tape.leaf_row(m.g_omega_f, uv);
      Value hidden = tape.tanh_v(
          tape.add(tape.add(tape.matvec(m.g_cell_w1x, 0, ud, x),
                            tape.matvec(m.g_cell_w1h, 0, ud, z_u)),
                   tape.leaf_row(m.g_cell_b1, 0)));
      return tape.tanh_v(tape.add(tape.matvec(m.g_cell_w2, 0, ud, hidden),
                                  tape.leaf_row(m.g_cell_b2, 0)));
    }
    case CellType::kGru: {
      Value x = tape.leaf_row(m.g_omega_f, uv);
      auto gate_pre = [&](std::size_t slot) {
        return tape.add(
            tape.add(tape.matvec(m.g_cell_w_ih, slot * ud, ud, x),
                     tape.leaf_row(m.g_cell_b_ih, slot)),
            tape.add(tape.matvec(m.g_cell_w_hh, slot * ud, ud, z_u),
                     tape.leaf_row(m.g_cell_b_hh, slot)));
      };
      Value rg = tape.sigmoid(gate_pre(0));
      Value zg = tape.sigmoid(gate_pre(1));
      Value ng = tape.tanh_v(tape.add(
          tape.add(tape.matvec(m.g_cell_w_ih, 2 * ud, ud, x),
                   tape.leaf_row(m.g_cell_b_ih, 2)),
          tape.mul(rg, tape.add(tape.matvec(m.g_cell_w_hh, 2 * ud, ud, z_u),
                                tape.leaf_row(m.g_cell_b_hh, 2)))));
      Value one_minus_zg = tape.shift(tape.scale(zg, -1.0), 1.0);
      return tape.add(tape.mul(one_minus_zg, ng), tape.mul(zg, z_u));
    }
  }
  throw std::logic_error("unknown cell");
}

Value traced_k_logit(Tape& tape, const Model& m, Value z_u, int u, int v) {
  if (m.direct_tables) {
    throw std::logic_error("fixture models are not trainable");
  }
  const auto uu = static_cast<std::size_t>(u);
  const auto uv = static_cast<std::size_t>(v);
  switch (m.family) {
    case Family::kClassic:
      return tape.leaf_elem(m.g_k_raw, uu, uv);
    case Family::kEmbedded:
      return tape.dot(tape.leaf_row(m.g_omega_k_src, uu),
                      tape.leaf_row(m.g_omega_k, uv));
    case Family::kRecurrent:
      return tape.dot(z_u, tape.leaf_row(m.g_omega_k, uv));
  }
  throw std::logic_error("unknown family");
}

Value traced_log_r(Tape& tape, const Model& m, int u, int v) {
  if (m.direct_tables) {
    throw std::logic_error("fixture models are not trainable");
  }
  const auto uu = static_cast<std::size_t>(u);
  const auto uv = static_cast<std::size_t>(v);
  if (m.family == Family::kClassic) {
    return tape.leaf_elem(m.g_r_raw, uu, uv);
  }
  Value dp = tape.dot(tape.leaf_row(m.g_omega_r1, uu),
                      tape.leaf_row(m.g_omega_r2, uv));
  return tape.scale(tape.abs_v(dp), -1.0);
}

Value traced_log_g_terms(Tape& tape, const Model& m, Value z_u, int u,
                         const std::vector<int>& targets) {
  if (m.direct_tables) {
    throw std::logic_error("fixture models are not trainable");
  }
  if (targets.empty()) return tape.constant(0.0);
  Value logits;
  switch (m.family) {
    case Family::kClassic:
      logits =
          tape.gather_elems(m.g_k_raw, static_cast<std::size_t>(u), targets);
      break;
    case Family::kEmbedded:
      logits = tape.gather_dot(
          tape.leaf_row(m.g_omega_k_src, static_cast<std::size_t>(u)),
          m.g_omega_k, targets);
      break;
    case Family::kRecurrent:
      logits = tape.gather_dot(z_u, m.g_omega_k, targets);
      break;
  }
  return tape.sum(tape.log1m_sigmoid_c(logits));
}

}  // namespace reccas
