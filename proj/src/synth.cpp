#include "reccas/synth.hpp"

#include <fstream>
#include <stdexcept>

#include "json.hpp"

#include "reccas/errors.hpp"
#include "reccas/generator.hpp"
#include "reccas/rng.hpp"
#include "reccas/tape.hpp"

namespace reccas {
namespace {

using nlohmann::json;

void check_spec(const SyntheticSpec& spec) {
  if (spec.nodes < spec.attach + 1 || spec.attach < 1) {
    throw std::invalid_argument("graph needs at least attach+1 nodes");
  }
  if (!(spec.r_lo > 0.0) || spec.r_hi < spec.r_lo) {
    throw std::invalid_argument("bad delay-rate range");
  }
  if (spec.variants < 1 || spec.feature_dim < 1) {
    throw std::invalid_argument("counts must be positive");
  }
  if (!(spec.content_alpha > 0.0) || !(spec.hub_alpha > 0.0) ||
      !(spec.leaf_alpha > 0.0)) {
    throw std::invalid_argument("Dirichlet parameters must be positive");
  }
}

}  // namespace

std::string corpus_name(Corpus c) {
  return c == Corpus::kArti1 ? "arti1" : "arti2";
}

Corpus corpus_from_name(const std::string& name) {
  if (name == "arti1") return Corpus::kArti1;
  if (name == "arti2") return Corpus::kArti2;
  throw UsageError("unknown corpus: " + name);
}

Graph build_graph(const SyntheticSpec& spec) {
  check_spec(spec);
  Graph g;
  g.nodes = spec.nodes;
  g.world_k = spec.world_k;
  g.degree.assign(static_cast<std::size_t>(spec.nodes), 0);

  // Undirected skeleton: seed clique, then degree-proportional attachment
  // realized by sampling uniformly from the edge-stub list.
  Rng structure(mix_stream(spec.seed, 0x67726166ULL));
  std::vector<std::pair<int, int>> skeleton;
  std::vector<int> stubs;
  auto add_undirected = [&](int a, int b) {
    skeleton.emplace_back(a, b);
    stubs.push_back(a);
    stubs.push_back(b);
    ++g.degree[static_cast<std::size_t>(a - 1)];
    ++g.degree[static_cast<std::size_t>(b - 1)];
  };
  const int seed_nodes = spec.attach + 1;
  for (int a = 1; a <= seed_nodes; ++a) {
    for (int b = a + 1; b <= seed_nodes; ++b) add_undirected(a, b);
  }
  for (int v = seed_nodes + 1; v <= spec.nodes; ++v) {
    std::vector<int> picked;
    while (static_cast<int>(picked.size()) < spec.attach) {
      const int target = stubs[structure.uniform_index(stubs.size())];
      bool fresh = true;
      for (int p : picked) fresh = fresh && p != target;
      if (fresh) picked.push_back(target);
    }
    for (int p : picked) add_undirected(v, p);
  }

  // Per-directed-edge parameters: world edges first, then both directions of
  // each skeleton edge in creation order.
  Rng params(mix_stream(spec.seed, 0x65646765ULL));
  g.world_r.resize(static_cast<std::size_t>(spec.nodes));
  for (double& r : g.world_r) r = params.uniform(spec.r_lo, spec.r_hi);
  auto add_directed = [&](int u, int v) {
    Edge e;
    e.u = u;
    e.v = v;
    e.r = params.uniform(spec.r_lo, spec.r_hi);
    e.k_variants.resize(static_cast<std::size_t>(spec.variants));
    for (double& k : e.k_variants) k = params.uniform(spec.k_lo, spec.k_hi);
    g.edges.push_back(std::move(e));
  };
  for (const auto& [a, b] : skeleton) {
    add_directed(a, b);
    add_directed(b, a);
  }

  Rng feats(mix_stream(spec.seed, 0x66656174ULL));
  g.features.resize(static_cast<std::size_t>(spec.nodes));
  for (int v = 1; v <= spec.nodes; ++v) {
    const bool hub = g.degree[static_cast<std::size_t>(v - 1)] > spec.hub_degree;
    g.features[static_cast<std::size_t>(v - 1)] = feats.dirichlet(
        hub ? spec.hub_alpha : spec.leaf_alpha,
        static_cast<std::size_t>(spec.feature_dim));
  }
  return g;
}

Model fixture_base(const Graph& graph) {
  const std::size_t n = static_cast<std::size_t>(graph.nodes) + 1;
  std::vector<std::vector<double>> k(n, std::vector<double>(n, 0.0));
  std::vector<std::vector<double>> r(n, std::vector<double>(n, 1.0));
  for (int v = 1; v <= graph.nodes; ++v) {
    k[0][static_cast<std::size_t>(v)] = graph.world_k;
    r[0][static_cast<std::size_t>(v)] =
        graph.world_r[static_cast<std::size_t>(v - 1)];
  }
  for (const Edge& e : graph.edges) {
    r[static_cast<std::size_t>(e.u)][static_cast<std::size_t>(e.v)] = e.r;
  }
  return Model::fixture(std::move(k), std::move(r));
}

Model fixture_for_regime(const Graph& graph, int regime) {
  Model m = fixture_base(graph);
  auto& k = m.params.group("k_raw");
  for (const Edge& e : graph.edges) {
    k.at(static_cast<std::size_t>(e.u), static_cast<std::size_t>(e.v)) =
        e.k_variants.at(static_cast<std::size_t>(regime));
  }
  return m;
}

void rewrite_arti2_k(Model& model, const Graph& graph,
                     const SyntheticSpec& spec,
                     const std::vector<double>& content) {
  auto& k = model.params.group("k_raw");
  for (const Edge& e : graph.edges) {
    const std::vector<double>& f = graph.features[static_cast<std::size_t>(e.v - 1)];
    double dot = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) dot += content[i] * f[i];
    k.at(static_cast<std::size_t>(e.u), static_cast<std::size_t>(e.v)) =
        sigmoid(spec.k_scale * dot + spec.k_shift);
  }
}

CorpusResult sample_corpus(const Graph& graph, const SyntheticSpec& spec,
                           Corpus corpus) {
  check_spec(spec);
  CorpusResult out;
  out.records.reserve(spec.episodes);

  std::vector<Model> regimes;
  Model arti2 = fixture_base(graph);
  if (corpus == Corpus::kArti1) {
    regimes.reserve(static_cast<std::size_t>(spec.variants));
    for (int i = 0; i < spec.variants; ++i) {
      regimes.push_back(fixture_for_regime(graph, i));
    }
  }

  double length_sum = 0.0;
  for (std::size_t e = 0; e < spec.episodes; ++e) {
    Rng rng(mix_stream(spec.seed, 0x65706973ULL, e));
    GroundTruthRecord record;
    GenResult run;
    if (corpus == Corpus::kArti1) {
      record.regime =
          static_cast<int>(rng.uniform_index(static_cast<std::size_t>(spec.variants)));
      run = generate(regimes[static_cast<std::size_t>(record.regime)], rng);
    } else {
      record.content = rng.dirichlet(spec.content_alpha,
                                     static_cast<std::size_t>(spec.feature_dim));
      rewrite_arti2_k(arti2, graph, spec, record.content);
      run = generate(arti2, rng);
    }
    if (run.truncated) ++out.truncated;
    length_sum += static_cast<double>(run.cascade.episode.size() - 1);
    record.cascade = std::move(run.cascade);
    out.records.push_back(std::move(record));
  }
  out.mean_length = spec.episodes
                        ? length_sum / static_cast<double>(spec.episodes)
                        : 0.0;
  return out;
}

void save_graph(const std::string& path, const Graph& graph,
                const SyntheticSpec& spec, Corpus corpus) {
  json j;
  j["corpus"] = corpus_name(corpus);
  j["nodes"] = graph.nodes;
  j["world_k"] = graph.world_k;
  j["world_r"] = graph.world_r;
  j["seed"] = spec.seed;
  j["attach"] = spec.attach;
  j["hub_degree"] = spec.hub_degree;
  if (corpus == Corpus::kArti2) {
    j["k_scale"] = spec.k_scale;
    j["k_shift"] = spec.k_shift;
    j["features"] = graph.features;
  }
  json edges = json::array();
  for (const Edge& e : graph.edges) {
    json je;
    je["u"] = e.u;
    je["v"] = e.v;
    je["r"] = e.r;
    if (corpus == Corpus::kArti1) je["k"] = e.k_variants;
    edges.push_back(std::move(je));
  }
  j["edges"] = std::move(edges);
  j["degree"] = graph.degree;

  std::ofstream f(path);
  if (!f) throw DataError("cannot write " + path);
  f << j.dump(2) << "\n";
}

}  // namespace reccas
