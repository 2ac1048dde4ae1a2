// Model families: transmission probability / delay-rate formulas, recurrence
// cells against independent reimplementations, traced-vs-plain parity, and
// serialization round trips.

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "doctest.h"
#include "reccas/cascade_math.hpp"
#include "reccas/errors.hpp"
#include "reccas/model_io.hpp"
#include "reccas/models.hpp"
#include "reccas/rng.hpp"
#include "reccas/tape.hpp"

using namespace reccas;

namespace {

void set_row(Model& m, const std::string& group, std::size_t row,
             const std::vector<double>& vals) {
  auto& g = m.params.group(group);
  REQUIRE(vals.size() == g.cols);
  for (std::size_t i = 0; i < g.cols; ++i) g.at(row, i) = vals[i];
}

std::vector<double> get_row(const Model& m, const std::string& group,
                            std::size_t row) {
  const auto& g = m.params.group(group);
  return std::vector<double>(g.row(row), g.row(row) + g.cols);
}

double dot_naive(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Plain-double GRU step written independently of the library.
std::vector<double> gru_reference(const Model& m,
                                  const std::vector<double>& h, int v) {
  const auto d = static_cast<std::size_t>(m.d);
  const auto x = get_row(m, "omega_f", static_cast<std::size_t>(v));
  const auto& w_ih = m.params.group("cell_w_ih");
  const auto& w_hh = m.params.group("cell_w_hh");
  const auto& b_ih = m.params.group("cell_b_ih");
  const auto& b_hh = m.params.group("cell_b_hh");
  auto row_dot = [&](const ParamStore::Group& w, std::size_t row,
                     const std::vector<double>& vec) {
    double s = 0.0;
    for (std::size_t i = 0; i < d; ++i) s += w.at(row, i) * vec[i];
    return s;
  };
  std::vector<double> out(d);
  for (std::size_t i = 0; i < d; ++i) {
    const double reset =
        1.0 / (1.0 + std::exp(-(row_dot(w_ih, i, x) + b_ih.at(0, i) +
                                row_dot(w_hh, i, h) + b_hh.at(0, i))));
    const double update =
        1.0 / (1.0 + std::exp(-(row_dot(w_ih, d + i, x) + b_ih.at(1, i) +
                                row_dot(w_hh, d + i, h) + b_hh.at(1, i))));
    const double cand = std::tanh(row_dot(w_ih, 2 * d + i, x) + b_ih.at(2, i) +
                                  reset * (row_dot(w_hh, 2 * d + i, h) +
                                           b_hh.at(2, i)));
    out[i] = (1.0 - update) * cand + update * h[i];
  }
  return out;
}

}  // namespace

TEST_CASE("family and cell names round trip; unknown names are rejected") {
  for (Family f : {Family::kClassic, Family::kEmbedded, Family::kRecurrent}) {
    CHECK(family_from_name(family_name(f)) == f);
  }
  for (CellType c : {CellType::kGru, CellType::kElman, CellType::kMlp,
                     CellType::kIdentity}) {
    CHECK(cell_from_name(cell_name(c)) == c);
  }
  CHECK_THROWS_AS(family_from_name("hawkes"), std::invalid_argument);
  CHECK_THROWS_AS(cell_from_name("lstm"), std::invalid_argument);
}

TEST_CASE("per-pair tables: k is the sigmoid of the entry, r its exponential") {
  Model m = Model::classic(4, 1);
  CHECK(m.d == 0);
  CHECK_FALSE(m.needs_states());
  auto& kr = m.params.group("k_raw");
  auto& rr = m.params.group("r_raw");
  kr.at(1, 2) = 0.0;
  rr.at(1, 2) = 0.25;
  const State s;  // stateless family ignores it
  CHECK(m.k(s, 1, 2) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(m.r(1, 2) == doctest::Approx(std::exp(0.25)).epsilon(1e-15));
  CHECK(m.log_r(1, 2) == 0.25);

  kr.at(2, 3) = -1.3;
  CHECK(m.k(s, 2, 3) ==
        doctest::Approx(1.0 / (1.0 + std::exp(1.3))).epsilon(1e-14));
  CHECK(m.log_k(s, 2, 3) ==
        doctest::Approx(std::log(m.k(s, 2, 3))).epsilon(1e-12));
  CHECK(m.log_1mk(s, 2, 3) ==
        doctest::Approx(std::log1p(-m.k(s, 2, 3))).epsilon(1e-12));
}

TEST_CASE("probabilities are clamped away from 0 and 1") {
  Model m = Model::classic(2, 1);
  auto& kr = m.params.group("k_raw");
  const State s;
  kr.at(0, 1) = 100.0;
  CHECK(m.k(s, 0, 1) == 1.0 - 1e-6);
  CHECK(m.log_k(s, 0, 1) == std::log1p(-1e-6));
  CHECK(m.log_1mk(s, 0, 1) == std::log(1e-6));
  kr.at(0, 1) = -100.0;
  CHECK(m.k(s, 0, 1) == 1e-6);
  CHECK(m.log_k(s, 0, 1) == std::log(1e-6));
  CHECK(m.log_1mk(s, 0, 1) == std::log1p(-1e-6));
}

TEST_CASE("embedding dot products drive k and r") {
  Model m = Model::embedded(3, 4, 2);
  CHECK_FALSE(m.needs_states());
  // <omega_k_src[1], omega_k[2]> = 1 -> k = sigmoid(1).
  set_row(m, "omega_k_src", 1, {1.0, 0.0, 0.0, 0.0});
  set_row(m, "omega_k", 2, {1.0, 0.5, -0.25, 2.0});
  const State s;
  CHECK(m.k(s, 1, 2) == doctest::Approx(0.7310585786300049).epsilon(1e-14));

  // r = exp(-|dot|): dot = ln 2 gives r = 1/2, and the sign cannot matter.
  const double ln2 = std::log(2.0);
  set_row(m, "omega_r1", 1, {ln2, 0.0, 0.0, 0.0});
  set_row(m, "omega_r2", 2, {1.0, 0.0, 0.0, 0.0});
  CHECK(m.r(1, 2) == doctest::Approx(0.5).epsilon(1e-14));
  set_row(m, "omega_r1", 1, {-ln2, 0.0, 0.0, 0.0});
  CHECK(m.r(1, 2) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(m.log_r(1, 2) == doctest::Approx(-ln2).epsilon(1e-14));

  // r never exceeds 1 no matter the embeddings.
  Rng rng(5);
  for (int t = 0; t < 100; ++t) {
    std::vector<double> a(4), b(4);
    for (auto& x : a) x = rng.normal(0.0, 3.0);
    for (auto& x : b) x = rng.normal(0.0, 3.0);
    set_row(m, "omega_r1", 0, a);
    set_row(m, "omega_r2", 1, b);
    CHECK(m.r(0, 1) <= 1.0);
    CHECK(m.r(0, 1) > 0.0);
    CHECK(m.log_r(0, 1) == doctest::Approx(-std::fabs(dot_naive(a, b)))
                               .epsilon(1e-12));
  }
}

TEST_CASE("direction matters: swapping source and target changes k and r") {
  Model m = Model::embedded(3, 2, 9);
  set_row(m, "omega_k_src", 1, {1.0, 0.0});
  set_row(m, "omega_k_src", 2, {0.0, 1.0});
  set_row(m, "omega_k", 1, {0.0, 2.0});
  set_row(m, "omega_k", 2, {0.5, 0.0});
  set_row(m, "omega_r1", 1, {1.0, 0.0});
  set_row(m, "omega_r1", 2, {0.0, 1.0});
  set_row(m, "omega_r2", 1, {0.0, 3.0});
  set_row(m, "omega_r2", 2, {0.25, 0.0});
  const State s;
  // k(1->2) = sigmoid(0.5), k(2->1) = sigmoid(2).
  CHECK(m.k(s, 1, 2) == doctest::Approx(sigmoid(0.5)).epsilon(1e-14));
  CHECK(m.k(s, 2, 1) == doctest::Approx(sigmoid(2.0)).epsilon(1e-14));
  CHECK(m.k(s, 1, 2) != m.k(s, 2, 1));
  // r(1->2) = exp(-0.25), r(2->1) = exp(-3).
  CHECK(m.r(1, 2) == doctest::Approx(std::exp(-0.25)).epsilon(1e-14));
  CHECK(m.r(2, 1) == doctest::Approx(std::exp(-3.0)).epsilon(1e-14));
}

TEST_CASE("initial state copies the z0 row; stateless families stay empty") {
  Model rec = Model::recurrent(3, 3, CellType::kIdentity, 4);
  set_row(rec, "z0", 0, {0.5, -1.0, 2.0});
  const State s0 = rec.initial_state();
  CHECK(s0.z == std::vector<double>{0.5, -1.0, 2.0});
  CHECK(rec.needs_states());

  CHECK(Model::classic(3, 1).initial_state().z.empty());
  CHECK(Model::embedded(3, 2, 1).initial_state().z.empty());
  CHECK(Model::classic(3, 1).state_update(s0, 1).z.empty());
}

TEST_CASE("identity cell passes the state through unchanged") {
  Model m = Model::recurrent(4, 3, CellType::kIdentity, 7);
  set_row(m, "z0", 0, {0.1, 0.2, 0.3});
  State s = m.initial_state();
  for (int v : {1, 3, 2}) {
    s = m.state_update(s, v);
    CHECK(s.z == std::vector<double>{0.1, 0.2, 0.3});
  }
}

TEST_CASE("state-dependent k: dot of the carried state with the target row") {
  Model m = Model::recurrent(3, 2, CellType::kIdentity, 11);
  set_row(m, "z0", 0, {2.0, -1.0});
  set_row(m, "omega_k", 2, {0.5, 1.0});
  const State s = m.initial_state();
  // <(2,-1),(0.5,1)> = 0 -> k = 1/2 regardless of the source id.
  CHECK(m.k(s, 0, 2) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(m.k(s, 1, 2) == doctest::Approx(0.5).epsilon(1e-14));
  State other;
  other.z = {1.0, 0.5};
  CHECK(m.k(other, 1, 2) == doctest::Approx(sigmoid(1.0)).epsilon(1e-14));
}

TEST_CASE("one-layer recurrence matches tanh(Wx + Uh + b) computed by hand") {
  Model m = Model::recurrent(3, 2, CellType::kElman, 13);
  set_row(m, "z0", 0, {0.3, -0.4});
  set_row(m, "omega_f", 2, {1.0, 0.5});
  set_row(m, "cell_w_ih", 0, {0.2, -0.1});
  set_row(m, "cell_w_ih", 1, {0.0, 0.7});
  set_row(m, "cell_w_hh", 0, {1.0, 0.0});
  set_row(m, "cell_w_hh", 1, {0.0, 1.0});
  set_row(m, "cell_b_ih", 0, {0.05, -0.05});
  const State out = m.state_update(m.initial_state(), 2);
  // Row 0: 0.2*1 + (-0.1)*0.5 + 1*0.3 + 0*(-0.4) + 0.05 = 0.5.
  CHECK(out.z[0] == doctest::Approx(std::tanh(0.5)).epsilon(1e-14));
  // Row 1: 0*1 + 0.7*0.5 + 0*0.3 + 1*(-0.4) - 0.05 = -0.1.
  CHECK(out.z[1] == doctest::Approx(std::tanh(-0.1)).epsilon(1e-14));
}

TEST_CASE("two-layer recurrence matches the hand-computed composition") {
  Model m = Model::recurrent(3, 2, CellType::kMlp, 17);
  set_row(m, "z0", 0, {0.2, 0.0});
  set_row(m, "omega_f", 1, {0.5, -0.5});
  set_row(m, "cell_w1x", 0, {1.0, 0.0});
  set_row(m, "cell_w1x", 1, {0.0, 1.0});
  set_row(m, "cell_w1h", 0, {0.0, 0.0});
  set_row(m, "cell_w1h", 1, {2.0, 0.0});
  set_row(m, "cell_b1", 0, {0.0, 0.1});
  set_row(m, "cell_w2", 0, {1.0, 1.0});
  set_row(m, "cell_w2", 1, {1.0, -1.0});
  set_row(m, "cell_b2", 0, {0.0, 0.2});
  const State out = m.state_update(m.initial_state(), 1);
  const double h0 = std::tanh(0.5);          // 1*0.5 + 0 + 0
  const double h1 = std::tanh(-0.5 + 0.4 + 0.1);  // 0+1*(-0.5) + 2*0.2 + 0.1
  CHECK(out.z[0] == doctest::Approx(std::tanh(h0 + h1)).epsilon(1e-14));
  CHECK(out.z[1] == doctest::Approx(std::tanh(h0 - h1 + 0.2)).epsilon(1e-14));
}

TEST_CASE("gated recurrence matches an independent reimplementation") {
  Model m = Model::recurrent(6, 4, CellType::kGru, 23);
  Rng rng(101);
  for (std::size_t g = 0; g < m.params.group_count(); ++g) {
    for (auto& x : m.params.group(static_cast<int>(g)).data) {
      x = rng.uniform(-0.8, 0.8);
    }
  }
  State s = m.state_update(m.initial_state(), 3);
  std::vector<double> ref =
      gru_reference(m, m.initial_state().z, 3);
  for (int i = 0; i < 4; ++i) {
    CHECK(s.z[i] == doctest::Approx(ref[i]).epsilon(1e-12));
  }
  // Composition along a diffusion path: world -> 3 -> 1 -> 5.
  for (int v : {1, 5}) {
    s = m.state_update(s, v);
    ref = gru_reference(m, ref, v);
  }
  for (int i = 0; i < 4; ++i) {
    CHECK(s.z[i] == doctest::Approx(ref[i]).epsilon(1e-12));
  }
  // States stay in the tanh/convex-mix envelope.
  for (double x : s.z) CHECK(std::fabs(x) <= 1.0);
}

TEST_CASE("identity-cell recurrence collapses onto the embedded family") {
  const std::vector<double> anchor{0.4, -0.2, 0.7};
  Model emb = Model::embedded(5, 3, 31);
  for (std::size_t u = 0; u < 5; ++u) set_row(emb, "omega_k_src", u, anchor);

  Model rec = Model::recurrent(5, 3, CellType::kIdentity, 31);
  set_row(rec, "z0", 0, anchor);
  rec.params.group("omega_k").data = emb.params.group("omega_k").data;
  rec.params.group("omega_r1").data = emb.params.group("omega_r1").data;
  rec.params.group("omega_r2").data = emb.params.group("omega_r2").data;

  State s = rec.initial_state();
  const State none;
  for (int u = 0; u < 5; ++u) {
    for (int v = 0; v < 5; ++v) {
      if (u == v) continue;
      CHECK(rec.k(s, u, v) == emb.k(none, u, v));
      CHECK(rec.r(u, v) == emb.r(u, v));
      s = rec.state_update(s, v);  // identity: never drifts
    }
  }
}

TEST_CASE("traced graphs reproduce the plain methods bit for bit") {
  struct Spec {
    Family family;
    CellType cell;
  };
  for (const Spec spec :
       {Spec{Family::kClassic, CellType::kGru},
        Spec{Family::kEmbedded, CellType::kGru},
        Spec{Family::kRecurrent, CellType::kGru},
        Spec{Family::kRecurrent, CellType::kElman},
        Spec{Family::kRecurrent, CellType::kMlp},
        Spec{Family::kRecurrent, CellType::kIdentity}}) {
    Model m = spec.family == Family::kClassic
                  ? Model::classic(5, 41)
                  : (spec.family == Family::kEmbedded
                         ? Model::embedded(5, 3, 41)
                         : Model::recurrent(5, 3, spec.cell, 41));
    Rng rng(7 + static_cast<int>(spec.cell));
    for (std::size_t g = 0; g < m.params.group_count(); ++g) {
      for (auto& x : m.params.group(static_cast<int>(g)).data) {
        x = rng.uniform(-1.0, 1.0);
      }
    }
    Tape tape(m.params);
    State plain = m.initial_state();
    Value traced{};
    if (m.needs_states()) {
      traced = traced_initial_state(tape, m);
      CHECK(tape.vec(traced) == plain.z);
    }
    for (int v : {2, 4, 1}) {
      if (m.needs_states()) {
        plain = m.state_update(plain, v);
        traced = traced_state_update(tape, m, traced, v);
        CHECK(tape.vec(traced) == plain.z);
      }
      for (int u : {0, 3}) {
        if (u == v) continue;
        const double lk =
            tape.value(tape.log_sigmoid_c(traced_k_logit(tape, m, traced, u, v)));
        const double l1mk = tape.value(
            tape.log1m_sigmoid_c(traced_k_logit(tape, m, traced, u, v)));
        CHECK(lk == m.log_k(plain, u, v));
        CHECK(l1mk == m.log_1mk(plain, u, v));
        CHECK(tape.value(traced_log_r(tape, m, u, v)) == m.log_r(u, v));
      }
      const std::vector<int> targets{1, 2, 3, 4};
      double manual = 0.0;
      for (int t : targets) manual += m.log_1mk(plain, 0, t);
      CHECK(tape.value(traced_log_g_terms(tape, m, traced, 0, targets)) ==
            doctest::Approx(manual).epsilon(1e-12));
    }
    // Empty target list contributes exactly zero.
    Tape t2(m.params);
    Value z{};
    if (m.needs_states()) z = traced_initial_state(t2, m);
    CHECK(t2.value(traced_log_g_terms(t2, m, z, 0, {})) == 0.0);
  }
}

TEST_CASE("gradients through one gated state update match finite differences") {
  Model m = Model::recurrent(4, 4, CellType::kGru, 53);
  Rng rng(77);
  for (std::size_t g = 0; g < m.params.group_count(); ++g) {
    for (auto& x : m.params.group(static_cast<int>(g)).data) {
      x = rng.uniform(-0.7, 0.7);
    }
  }
  const int v = 2;
  const int gz0 = m.params.group_id("z0");
  const int gof = m.params.group_id("omega_f");

  for (int out_coord = 0; out_coord < 4; ++out_coord) {
    Tape tape(m.params);
    Value z = traced_state_update(tape, m, traced_initial_state(tape, m), v);
    Value root = tape.index(z, static_cast<std::size_t>(out_coord));
    GradBuffer grads(m.params);
    tape.backward(root, 1.0, grads);

    auto fd = [&](int group, std::size_t row, std::size_t col) {
      auto& slot = m.params.group(group).at(row, col);
      const double keep = slot;
      const double h = 1e-6;
      slot = keep + h;
      const double hi =
          m.state_update(m.initial_state(), v).z[out_coord];
      slot = keep - h;
      const double lo =
          m.state_update(m.initial_state(), v).z[out_coord];
      slot = keep;
      return (hi - lo) / (2.0 * h);
    };
    for (std::size_t c = 0; c < 4; ++c) {
      const double num = fd(gz0, 0, c);
      const double ana = grads.group(gz0)[c];
      CHECK(ana == doctest::Approx(num).epsilon(1e-5).scale(1.0));
      const double numf = fd(gof, static_cast<std::size_t>(v), c);
      const double anaf = grads.group(gof)[static_cast<std::size_t>(v) * 4 + c];
      CHECK(anaf == doctest::Approx(numf).epsilon(1e-5).scale(1.0));
    }
  }
}

TEST_CASE("literal probability tables bypass every squashing and clamp") {
  Model f = Model::fixture({{0.0, 0.3}, {1.0, 0.5}}, {{1.0, 2.0}, {0.5, 1.0}});
  CHECK(f.direct_tables);
  const State s;
  CHECK(f.k(s, 0, 1) == 0.3);
  CHECK(f.k(s, 0, 0) == 0.0);
  CHECK(f.k(s, 1, 0) == 1.0);
  CHECK(f.r(0, 1) == 2.0);
  CHECK(f.log_r(1, 0) == doctest::Approx(std::log(0.5)).epsilon(1e-15));
  CHECK(f.log_k(s, 0, 1) == doctest::Approx(std::log(0.3)).epsilon(1e-15));
  CHECK(f.log_k(s, 0, 0) == cm::kNegInf);     // k = 0 exactly
  CHECK(f.log_1mk(s, 1, 0) == cm::kNegInf);   // k = 1 exactly
  CHECK(f.log_1mk(s, 0, 1) == doctest::Approx(std::log(0.7)).epsilon(1e-14));

  CHECK_THROWS_AS(Model::fixture({{0.0}}, {{1.0, 2.0}, {0.5, 1.0}}),
                  std::invalid_argument);

  Tape tape(f.params);
  CHECK_THROWS_AS(traced_k_logit(tape, f, Value{}, 0, 1), std::logic_error);
  CHECK_THROWS_AS(traced_log_r(tape, f, 0, 1), std::logic_error);
  CHECK_THROWS_AS(save_model("/tmp/reccas_fixture.json", f),
                  std::invalid_argument);
}

TEST_CASE("model files round trip parameters and provenance exactly") {
  const std::string path = "/tmp/reccas_test_model_io.json";
  for (int variant = 0; variant < 4; ++variant) {
    Model m = variant == 0 ? Model::classic(5, 3)
              : variant == 1
                  ? Model::embedded(5, 3, 3)
                  : Model::recurrent(5, 3,
                                     variant == 2 ? CellType::kGru
                                                  : CellType::kMlp,
                                     3);
    m.epoch = 17 + variant;
    ModelFileInfo info;
    info.init = "unit-test init";
    info.train_config = "{\"epochs\":3}";
    save_model(path, m, info);

    ModelFileInfo loaded_info;
    const Model loaded = load_model(path, &loaded_info);
    CHECK(loaded.family == m.family);
    CHECK(loaded.n == m.n);
    CHECK(loaded.d == m.d);
    CHECK(loaded.epoch == m.epoch);
    if (m.family == Family::kRecurrent) CHECK(loaded.cell == m.cell);
    CHECK(loaded_info.init == info.init);
    CHECK(loaded_info.train_config == info.train_config);
    REQUIRE(loaded.params.group_count() == m.params.group_count());
    for (std::size_t g = 0; g < m.params.group_count(); ++g) {
      const auto& a = m.params.group(static_cast<int>(g));
      const auto& b = loaded.params.group(a.name);
      CHECK(a.data == b.data);  // doubles survive the file bit-exactly
    }
    // The loaded model computes identical quantities.
    const State s = m.initial_state();
    const State sl = loaded.initial_state();
    CHECK(m.log_k(s, 1, 2) == loaded.log_k(sl, 1, 2));
    CHECK(m.log_r(1, 2) == loaded.log_r(1, 2));
  }
  std::remove(path.c_str());
  CHECK_THROWS_AS(load_model("/tmp/no_such_reccas_model.json"), DataError);
}
