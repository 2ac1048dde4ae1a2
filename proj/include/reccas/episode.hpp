#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

namespace reccas {

inline constexpr int kWorldNode = 0;
inline constexpr double kTieJitter = 1e-6;

// A diffusion episode: the observed sequence of infections, rooted at the
// world node (id 0, time 0). `times` are normalized so the first real
// infection happens at exactly 1. `raw_times` preserve the file values so
// that saving reproduces the input bit-exactly.
struct Episode {
  std::vector<int> nodes;        // nodes[0] == kWorldNode
  std::vector<double> times;     // normalized, strictly increasing
  std::vector<double> raw_times; // parallel to nodes; raw_times[0] == 0

  std::size_t size() const { return nodes.size(); }

  // Normalized infection time, or +inf when the node is not infected.
  double time_of(int node) const {
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      if (nodes[i] == node) return times[i];
    }
    return std::numeric_limits<double>::infinity();
  }

  // Position in the infection order, or -1 when the node is not infected.
  int position_of(int node) const {
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      if (nodes[i] == node) return static_cast<int>(i);
    }
    return -1;
  }

  bool infected(int node) const { return position_of(node) >= 0; }
};

// An episode plus its (usually latent) transmission tree: ancestors[j] is the
// position in `nodes` of the node that infected nodes[j]. ancestors[0] == 0
// by convention (the world node has no infector).
struct Cascade {
  Episode episode;
  std::vector<int> ancestors;
};

// Ground-truth record as emitted by the synthetic generators: the true
// cascade plus the per-episode latent that produced it (Arti1 regime index
// or Arti2 content vector).
struct GroundTruthRecord {
  Cascade cascade;
  int regime = -1;                // >= 0 for Arti1 corpora
  std::vector<double> content;    // non-empty for Arti2 corpora
};

// Padded minibatch as built by make_bins. Rows are episodes in decreasing
// length order; -1 pads Inf/Times past each episode's end; not_inf[i][v] is 1
// iff node v is not infected in row i.
struct Bin {
  std::vector<std::vector<int>> inf;
  std::vector<std::vector<double>> times;
  std::vector<std::vector<std::uint8_t>> not_inf;
  std::vector<std::size_t> source_index;  // row -> index into the input list

  std::size_t rows() const { return inf.size(); }
  std::size_t width() const { return inf.empty() ? 0 : inf.front().size(); }

  // Un-pads one row back into an Episode (raw times set to normalized times).
  Episode row_episode(std::size_t row) const;
};

struct LoadStats {
  std::size_t records = 0;
  std::size_t skipped_empty = 0;
};

// Builds a normalized Episode from raw (node, time) events: sorts by time,
// breaks ties deterministically (ordered by node id, +kTieJitter per rank),
// shifts so the earliest event lands at 1, and prepends the world node at 0.
Episode normalize_events(std::vector<std::pair<int, double>> events,
                         int node_count);

// Reads a JSON-Lines episode file ({"events": [[node, time], ...]} per line).
// Empty-event records are skipped and counted in `stats`.
std::vector<Episode> load_episodes(const std::string& path, int node_count,
                                   LoadStats* stats = nullptr);

// Writes episodes in the same format, using raw (pre-normalization) times so
// a save of a load reproduces the file.
void save_episodes(const std::string& path,
                   const std::vector<Episode>& episodes);

// Ground-truth files add "ancestors" (full position vector, world included)
// and either "regime" or "content" to each record.
std::vector<GroundTruthRecord> load_ground_truth(const std::string& path,
                                                 int node_count,
                                                 LoadStats* stats = nullptr);
void save_ground_truth(const std::string& path,
                       const std::vector<GroundTruthRecord>& records);

std::vector<Bin> make_bins(const std::vector<Episode>& episodes,
                           std::size_t batch_size, int node_count);

// Largest normalized infection time over the corpus (maxT).
double max_horizon(const std::vector<Episode>& episodes);

// Right-censors at tau: keeps exactly the nodes with time < tau (the world
// node always survives). Times are left on the original scale.
Episode censor(const Episode& episode, double tau);

}  // namespace reccas
