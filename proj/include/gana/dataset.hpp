#pragma once

#include <algorithm>
#include <array>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "gana/kg.hpp"

namespace gana {

// Dataset directory layout (the public few-shot KG release convention):
//   train_tasks.json / dev_tasks.json / test_tasks.json
//       {relation_name: [[head, relation, tail], ...]}
//   path_graph          background graph, one "head<TAB>relation<TAB>tail" per line
//   rel2candidates.json {relation_name: [entity_name, ...]}
//   e1rel_e2.json       {"head\trelation": [tail_name, ...]}

namespace detail {

inline nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("missing or unreadable file: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError("invalid JSON in " + path.string() + ": " + e.what());
  }
  return j;
}

struct RawDataset {
  std::vector<std::array<std::string, 3>> background;  // file order
  // partition -> (relation -> triples), relations in sorted-name order
  std::map<std::string, std::vector<std::array<std::string, 3>>> tasks[3];
  std::map<std::string, std::vector<std::string>> candidates;
  std::map<std::string, std::vector<std::string>> known;  // "head\trelation" -> tails
};

inline void read_task_file(const std::filesystem::path& path,
                           std::map<std::string, std::vector<std::array<std::string, 3>>>& out) {
  nlohmann::json j = read_json_file(path);
  if (!j.is_object()) throw SchemaError(path.string() + ": expected a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& rel = it.key();
    if (!it.value().is_array()) throw SchemaError(path.string() + ": triples of '" + rel + "' must be an array");
    auto& triples = out[rel];
    for (const auto& t : it.value()) {
      if (!t.is_array() || t.size() != 3)
        throw SchemaError(path.string() + ": malformed triple under '" + rel + "': " + t.dump());
      triples.push_back({t[0].get<std::string>(), t[1].get<std::string>(), t[2].get<std::string>()});
    }
  }
}

inline RawDataset read_raw(const std::filesystem::path& root) {
  RawDataset raw;
  const auto graph_path = root / "path_graph";
  std::ifstream graph(graph_path);
  if (!graph) throw LoadError("missing or unreadable file: " + graph_path.string());
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(graph, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::array<std::string, 3> parts;
    std::size_t start = 0;
    int field = 0;
    for (std::size_t i = 0; i <= line.size(); ++i) {
      if (i == line.size() || line[i] == '\t') {
        if (field < 3) parts[static_cast<std::size_t>(field)] = line.substr(start, i - start);
        ++field;
        start = i + 1;
      }
    }
    if (field != 3)
      throw SchemaError(graph_path.string() + ":" + std::to_string(lineno) +
                        ": expected 3 tab-separated fields: " + line);
    raw.background.push_back(parts);
  }

  read_task_file(root / "train_tasks.json", raw.tasks[0]);
  read_task_file(root / "dev_tasks.json", raw.tasks[1]);
  read_task_file(root / "test_tasks.json", raw.tasks[2]);

  nlohmann::json cand = read_json_file(root / "rel2candidates.json");
  if (!cand.is_object()) throw SchemaError("rel2candidates.json: expected a JSON object");
  for (auto it = cand.begin(); it != cand.end(); ++it)
    raw.candidates[it.key()] = it.value().get<std::vector<std::string>>();

  nlohmann::json filt = read_json_file(root / "e1rel_e2.json");
  if (!filt.is_object()) throw SchemaError("e1rel_e2.json: expected a JSON object");
  for (auto it = filt.begin(); it != filt.end(); ++it)
    raw.known[it.key()] = it.value().get<std::vector<std::string>>();
  return raw;
}

}  // namespace detail

inline std::pair<KnowledgeGraph, TaskSplit> load_dataset(const std::filesystem::path& root) {
  detail::RawDataset raw = detail::read_raw(root);

  KnowledgeGraph graph;
  TaskSplit split;

  // Entity vocabulary: background endpoints, candidate pool members, and the
  // filtering map's entities, sorted for a stable id assignment.
  std::set<std::string> entity_set;
  std::set<std::string> bg_rel_set;
  for (const auto& t : raw.background) {
    entity_set.insert(t[0]);
    entity_set.insert(t[2]);
    bg_rel_set.insert(t[1]);
  }
  for (const auto& [rel, pool] : raw.candidates)
    for (const auto& e : pool) entity_set.insert(e);
  for (const auto& [key, tails] : raw.known) {
    const auto tab = key.find('\t');
    if (tab == std::string::npos)
      throw SchemaError("e1rel_e2.json: key lacks a tab separator: " + key);
    entity_set.insert(key.substr(0, tab));
    for (const auto& e : tails) entity_set.insert(e);
  }
  graph.entity_names.assign(entity_set.begin(), entity_set.end());

  for (const auto& r : bg_rel_set) {
    graph.relation_names.push_back(r);
    graph.relation_names.push_back(r + kInverseSuffix);
  }
  graph.n_background_relations = static_cast<RelationId>(graph.relation_names.size());

  std::set<std::string> task_rel_set;
  for (const auto& tasks : raw.tasks)
    for (const auto& [rel, triples] : tasks) {
      if (bg_rel_set.count(rel))
        throw SchemaError("task relation '" + rel + "' collides with a background relation");
      if (!task_rel_set.insert(rel).second)
        throw SchemaError("task relation '" + rel + "' appears in more than one partition");
    }
  for (const auto& r : task_rel_set) graph.relation_names.push_back(r);
  graph.finalize_vocab_maps();

  graph.background_triples.reserve(raw.background.size());
  for (const auto& t : raw.background)
    graph.background_triples.push_back(
        Triple{graph.entity_id(t[0]), graph.relation_id(t[1]), graph.entity_id(t[2])});

  std::set<Triple> background_set(graph.background_triples.begin(),
                                  graph.background_triples.end());

  auto convert_tasks = [&](const std::map<std::string, std::vector<std::array<std::string, 3>>>& tasks,
                           std::vector<RelationId>& out_relations) {
    for (const auto& [rel_name, triples] : tasks) {
      const RelationId rel = graph.relation_id(rel_name);
      out_relations.push_back(rel);
      auto& dst = split.task_triples[rel];
      for (const auto& t : triples) {
        if (t[1] != rel_name)
          throw SchemaError("task file: triple relation '" + t[1] + "' does not match key '" +
                            rel_name + "'");
        auto hit = graph.entity_ids.find(t[0]);
        if (hit == graph.entity_ids.end())
          throw SchemaError("task file: unknown entity '" + t[0] + "' in triple [" + t[0] + ", " +
                            t[1] + ", " + t[2] + "]");
        auto tit = graph.entity_ids.find(t[2]);
        if (tit == graph.entity_ids.end())
          throw SchemaError("task file: unknown entity '" + t[2] + "' in triple [" + t[0] + ", " +
                            t[1] + ", " + t[2] + "]");
        Triple triple{hit->second, rel, tit->second};
        if (background_set.count(triple))
          throw SchemaError("task triple [" + t[0] + ", " + t[1] + ", " + t[2] +
                            "] also appears in the background graph");
        dst.push_back(triple);
      }
    }
  };
  convert_tasks(raw.tasks[0], split.train_relations);
  convert_tasks(raw.tasks[1], split.valid_relations);
  convert_tasks(raw.tasks[2], split.test_relations);

  for (const auto& [rel_name, pool] : raw.candidates) {
    auto rit = graph.relation_ids.find(rel_name);
    if (rit == graph.relation_ids.end())
      throw SchemaError("rel2candidates.json: unknown relation '" + rel_name + "'");
    auto& ids = split.candidates[rit->second];
    std::set<EntityId> seen;
    for (const auto& e : pool) {
      const EntityId id = graph.entity_id(e);
      if (seen.insert(id).second) ids.push_back(id);
    }
  }

  for (const auto& [key, tails] : raw.known) {
    const auto tab = key.find('\t');
    const std::string head = key.substr(0, tab);
    const std::string rel = key.substr(tab + 1);
    auto rit = graph.relation_ids.find(rel);
    if (rit == graph.relation_ids.end())
      throw SchemaError("e1rel_e2.json: unknown relation '" + rel + "'");
    const EntityId h = graph.entity_id(head);
    for (const auto& t : tails) split.add_known_tail(h, rit->second, graph.entity_id(t));
  }
  // Task triples are always known true triples, whether or not the filtering
  // file lists them.
  for (const auto& [rel, triples] : split.task_triples)
    for (const Triple& t : triples) split.add_known_tail(t.head, rel, t.tail);

  for (const auto& [rel, triples] : split.task_triples) {
    auto cit = split.candidates.find(rel);
    for (const Triple& t : triples) {
      if (cit == split.candidates.end() ||
          std::find(cit->second.begin(), cit->second.end(), t.tail) == cit->second.end())
        throw SchemaError("tail of a task triple is missing from the candidate pool of relation '" +
                          graph.relation_names[static_cast<std::size_t>(rel)] + "'");
    }
  }

  graph.neighbor_index = build_neighbor_index(
      graph.background_triples, graph.num_entities(),
      [&graph](RelationId r) { return graph.inverse_of(r); },
      std::numeric_limits<int>::max(), 0);
  graph.neighbor_cap = 0;

  return {std::move(graph), std::move(split)};
}

// Writes the identical directory layout (used by the synthetic generator and
// the round-trip tests).
inline void write_dataset(const KnowledgeGraph& graph, const TaskSplit& split,
                          const std::filesystem::path& root) {
  std::filesystem::create_directories(root);

  {
    std::ofstream out(root / "path_graph");
    if (!out) throw LoadError("cannot write " + (root / "path_graph").string());
    for (const Triple& t : graph.background_triples)
      out << graph.entity_names[static_cast<std::size_t>(t.head)] << '\t'
          << graph.relation_names[static_cast<std::size_t>(t.relation)] << '\t'
          << graph.entity_names[static_cast<std::size_t>(t.tail)] << '\n';
  }

  auto write_tasks = [&](const std::vector<RelationId>& relations, const std::string& filename) {
    nlohmann::json j = nlohmann::json::object();
    for (RelationId rel : relations) {
      const std::string& rel_name = graph.relation_names[static_cast<std::size_t>(rel)];
      nlohmann::json arr = nlohmann::json::array();
      for (const Triple& t : split.task_triples.at(rel))
        arr.push_back({graph.entity_names[static_cast<std::size_t>(t.head)], rel_name,
                       graph.entity_names[static_cast<std::size_t>(t.tail)]});
      j[rel_name] = std::move(arr);
    }
    std::ofstream out(root / filename);
    if (!out) throw LoadError("cannot write " + (root / filename).string());
    out << j.dump(1) << '\n';
  };
  write_tasks(split.train_relations, "train_tasks.json");
  write_tasks(split.valid_relations, "dev_tasks.json");
  write_tasks(split.test_relations, "test_tasks.json");

  {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [rel, pool] : split.candidates) {
      nlohmann::json arr = nlohmann::json::array();
      for (EntityId e : pool) arr.push_back(graph.entity_names[static_cast<std::size_t>(e)]);
      j[graph.relation_names[static_cast<std::size_t>(rel)]] = std::move(arr);
    }
    std::ofstream out(root / "rel2candidates.json");
    out << j.dump(1) << '\n';
  }

  {
    nlohmann::json j = nlohmann::json::object();
    std::vector<std::uint64_t> keys;
    keys.reserve(split.known_tails.size());
    for (const auto& [k, v] : split.known_tails) keys.push_back(k);
    std::sort(keys.begin(), keys.end());
    for (std::uint64_t k : keys) {
      const EntityId head = static_cast<EntityId>(k >> 32);
      const RelationId rel = static_cast<RelationId>(k & 0xffffffffULL);
      nlohmann::json arr = nlohmann::json::array();
      for (EntityId t : split.known_tails.at(k))
        arr.push_back(graph.entity_names[static_cast<std::size_t>(t)]);
      j[graph.entity_names[static_cast<std::size_t>(head)] + "\t" +
        graph.relation_names[static_cast<std::size_t>(rel)]] = std::move(arr);
    }
    std::ofstream out(root / "e1rel_e2.json");
    out << j.dump(1) << '\n';
  }
}

}  // namespace gana
