#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "reccas/episode.hpp"
#include "reccas/models.hpp"

namespace reccas {

// Arti1: one of `variants` per-edge transmission probabilities per episode.
// Arti2: per-episode content vector, k = sigmoid(scale*<content, feat_v> + shift).
enum class Corpus { kArti1, kArti2 };

std::string corpus_name(Corpus c);
Corpus corpus_from_name(const std::string& name);

struct SyntheticSpec {
  int nodes = 100;  // graph nodes; the model adds the world node on top
  int attach = 1;   // preferential-attachment edges per new node
  double r_lo = 0.5, r_hi = 2.0;
  double world_k = 0.03;  // ~3 expected spontaneous sources per episode
  int variants = 5;
  double k_lo = 0.05, k_hi = 0.5;
  int feature_dim = 5;
  double content_alpha = 0.1;
  double hub_alpha = 10.0;
  double leaf_alpha = 0.1;
  int hub_degree = 30;  // undirected degree above this gets hub features
  // Affine calibration inside Arti2's sigmoid; the raw dot product lives in
  // [0,1], which alone would make every edge fire with probability > 1/2 and
  // every episode engulf the graph. With the defaults an aligned edge fires
  // with probability 0.62 and an orthogonal one with 0.047.
  double k_scale = 3.5;
  double k_shift = -3.0;
  std::size_t episodes = 10000;
  std::uint64_t seed = 0;
};

struct Edge {
  int u = 0, v = 0;  // directed
  double r = 1.0;
  std::vector<double> k_variants;  // `variants` entries
};

struct Graph {
  int nodes = 0;
  std::vector<Edge> edges;                    // both directions of the skeleton
  std::vector<double> world_r;                // r of world->v, index v-1
  std::vector<std::vector<double>> features;  // per node, index v-1
  std::vector<int> degree;                    // undirected degree, index v-1
  double world_k = 0.03;
};

// Preferential-attachment skeleton (clique on attach+1 seed nodes, then
// degree-proportional attachment), doubled into directed edges with
// independent r and k draws per direction. Fills both the Arti1 k-variants
// and the Arti2 features so one graph serves either corpus.
Graph build_graph(const SyntheticSpec& spec);

struct CorpusResult {
  std::vector<GroundTruthRecord> records;
  double mean_length = 0.0;  // mean infected nodes per episode, world excluded
  std::size_t truncated = 0;
};

// Classic fixture over the graph for one parameter assignment: Arti1 regime
// index, or Arti2 content vector (k rewritten per episode).
Model fixture_for_regime(const Graph& graph, int regime);
Model fixture_base(const Graph& graph);  // k filled per episode for Arti2
void rewrite_arti2_k(Model& model, const Graph& graph,
                     const SyntheticSpec& spec,
                     const std::vector<double>& content);

// spec.episodes cascades from per-episode streams of spec.seed. Degenerate
// (world-only) episodes are kept: they are legitimate observations.
CorpusResult sample_corpus(const Graph& graph, const SyntheticSpec& spec,
                           Corpus corpus);

void save_graph(const std::string& path, const Graph& graph,
                const SyntheticSpec& spec, Corpus corpus);

}  // namespace reccas
