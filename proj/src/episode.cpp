#include "reccas/episode.hpp"

#include <algorithm>
#include <fstream>
#include <utility>

#include "json.hpp"
#include "reccas/errors.hpp"

namespace reccas {

namespace {

using nlohmann::json;

json events_json(const Episode& e) {
  json events = json::array();
  for (std::size_t i = 1; i < e.size(); ++i) {
    events.push_back(json::array({e.nodes[i], e.raw_times[i]}));
  }
  return events;
}

std::vector<std::pair<int, double>> parse_events(const json& record,
                                                 std::size_t line_no) {
  const auto it = record.find("events");
  if (it == record.end() || !it->is_array()) {
    throw DataError("line " + std::to_string(line_no) +
                    ": missing \"events\" array");
  }
  std::vector<std::pair<int, double>> events;
  events.reserve(it->size());
  for (const auto& ev : *it) {
    if (!ev.is_array() || ev.size() != 2 || !ev[0].is_number_integer() ||
        !ev[1].is_number()) {
      throw DataError("line " + std::to_string(line_no) +
                      ": event must be [node_id, time]");
    }
    events.emplace_back(ev[0].get<int>(), ev[1].get<double>());
  }
  return events;
}

template <typename PerRecord>
void for_each_record(const std::string& path, PerRecord&& fn) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json record;
    try {
      record = json::parse(line);
    } catch (const json::parse_error& err) {
      throw DataError("line " + std::to_string(line_no) + ": " + err.what());
    }
    fn(record, line_no);
  }
}

}  // namespace

Episode Bin::row_episode(std::size_t row) const {
  Episode e;
  for (std::size_t j = 0; j < inf[row].size(); ++j) {
    if (inf[row][j] < 0) break;
    e.nodes.push_back(inf[row][j]);
    e.times.push_back(times[row][j]);
  }
  e.raw_times = e.times;
  return e;
}

Episode normalize_events(std::vector<std::pair<int, double>> events,
                         int node_count) {
  for (const auto& [node, time] : events) {
    if (node < 1 || node >= node_count) {
      throw DataError("node id " + std::to_string(node) + " outside [1, " +
                      std::to_string(node_count) + ")");
    }
    if (!std::isfinite(time) || time < 0.0) {
      throw DataError("non-finite or negative timestamp");
    }
  }
  std::sort(events.begin(), events.end(),
            [](const auto& a, const auto& b) {
              return a.second != b.second ? a.second < b.second
                                          : a.first < b.first;
            });
  {
    std::vector<int> ids;
    ids.reserve(events.size());
    for (const auto& [node, time] : events) ids.push_back(node);
    std::sort(ids.begin(), ids.end());
    if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) {
      throw DataError("duplicate node in episode");
    }
  }

  Episode e;
  e.nodes.push_back(kWorldNode);
  e.times.push_back(0.0);
  e.raw_times.push_back(0.0);
  if (events.empty()) return e;

  const double shift = 1.0 - events.front().second;
  std::size_t i = 0;
  while (i < events.size()) {
    std::size_t j = i;
    while (j < events.size() && events[j].second == events[i].second) ++j;
    for (std::size_t r = i; r < j; ++r) {
      e.nodes.push_back(events[r].first);
      e.times.push_back(events[r].second + shift +
                        kTieJitter * static_cast<double>(r - i));
      e.raw_times.push_back(events[r].second);
    }
    i = j;
  }
  for (std::size_t p = 1; p < e.size(); ++p) {
    if (!(e.times[p] > e.times[p - 1])) {
      throw DataError("timestamps not strictly ordered after tie-breaking");
    }
  }
  return e;
}

std::vector<Episode> load_episodes(const std::string& path, int node_count,
                                   LoadStats* stats) {
  std::vector<Episode> episodes;
  LoadStats local;
  for_each_record(path, [&](const json& record, std::size_t line_no) {
    ++local.records;
    auto events = parse_events(record, line_no);
    if (events.empty()) {
      ++local.skipped_empty;
      return;
    }
    try {
      episodes.push_back(normalize_events(std::move(events), node_count));
    } catch (const DataError& err) {
      throw DataError("line " + std::to_string(line_no) + ": " + err.what());
    }
  });
  if (stats != nullptr) *stats = local;
  return episodes;
}

void save_episodes(const std::string& path,
                   const std::vector<Episode>& episodes) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  for (const auto& e : episodes) {
    json record;
    record["events"] = events_json(e);
    out << record.dump() << '\n';
  }
}

std::vector<GroundTruthRecord> load_ground_truth(const std::string& path,
                                                 int node_count,
                                                 LoadStats* stats) {
  std::vector<GroundTruthRecord> records;
  LoadStats local;
  for_each_record(path, [&](const json& record, std::size_t line_no) {
    ++local.records;
    auto events = parse_events(record, line_no);
    if (events.empty()) {
      ++local.skipped_empty;
      return;
    }
    GroundTruthRecord gt;
    try {
      gt.cascade.episode = normalize_events(std::move(events), node_count);
    } catch (const DataError& err) {
      throw DataError("line " + std::to_string(line_no) + ": " + err.what());
    }
    const auto anc = record.find("ancestors");
    if (anc == record.end() || !anc->is_array() ||
        anc->size() != gt.cascade.episode.size()) {
      throw DataError("line " + std::to_string(line_no) +
                      ": \"ancestors\" must list one position per infection");
    }
    for (std::size_t j = 0; j < anc->size(); ++j) {
      const int a = (*anc)[j].get<int>();
      if ((j == 0 && a != 0) || (j > 0 && (a < 0 || a >= static_cast<int>(j)))) {
        throw DataError("line " + std::to_string(line_no) +
                        ": ancestor index out of range at position " +
                        std::to_string(j));
      }
      gt.cascade.ancestors.push_back(a);
    }
    if (const auto reg = record.find("regime"); reg != record.end()) {
      gt.regime = reg->get<int>();
    }
    if (const auto content = record.find("content"); content != record.end()) {
      gt.content = content->get<std::vector<double>>();
    }
    records.push_back(std::move(gt));
  });
  if (stats != nullptr) *stats = local;
  return records;
}

void save_ground_truth(const std::string& path,
                       const std::vector<GroundTruthRecord>& records) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  for (const auto& gt : records) {
    json record;
    record["events"] = events_json(gt.cascade.episode);
    record["ancestors"] = gt.cascade.ancestors;
    if (gt.regime >= 0) record["regime"] = gt.regime;
    if (!gt.content.empty()) record["content"] = gt.content;
    out << record.dump() << '\n';
  }
}

std::vector<Bin> make_bins(const std::vector<Episode>& episodes,
                           std::size_t batch_size, int node_count) {
  if (batch_size < 1) throw UsageError("batch size must be >= 1");
  std::vector<std::size_t> order(episodes.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return episodes[a].size() > episodes[b].size();
  });

  std::vector<Bin> bins;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t end = std::min(order.size(), start + batch_size);
    Bin bin;
    const std::size_t width = episodes[order[start]].size();
    for (std::size_t row = 0; start + row < end; ++row) {
      const Episode& e = episodes[order[start + row]];
      bin.source_index.push_back(order[start + row]);
      std::vector<int> inf(width, -1);
      std::vector<double> times(width, -1.0);
      std::vector<std::uint8_t> not_inf(static_cast<std::size_t>(node_count), 1);
      for (std::size_t j = 0; j < e.size(); ++j) {
        inf[j] = e.nodes[j];
        times[j] = e.times[j];
        not_inf[static_cast<std::size_t>(e.nodes[j])] = 0;
      }
      bin.inf.push_back(std::move(inf));
      bin.times.push_back(std::move(times));
      bin.not_inf.push_back(std::move(not_inf));
    }
    bins.push_back(std::move(bin));
  }
  return bins;
}

double max_horizon(const std::vector<Episode>& episodes) {
  if (episodes.empty()) throw DataError("max_horizon on empty corpus");
  double max_t = 0.0;
  for (const auto& e : episodes) {
    for (const double t : e.times) max_t = std::max(max_t, t);
  }
  return max_t;
}

Episode censor(const Episode& episode, double tau) {
  Episode out;
  for (std::size_t i = 0; i < episode.size(); ++i) {
    if (i == 0 || episode.times[i] < tau) {
      out.nodes.push_back(episode.nodes[i]);
      out.times.push_back(episode.times[i]);
      out.raw_times.push_back(episode.raw_times[i]);
    }
  }
  return out;
}

}  // namespace reccas
