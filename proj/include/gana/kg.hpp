#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "gana/core.hpp"

namespace gana {

constexpr const char* kInverseSuffix = "_inv";

struct Triple {
  EntityId head = 0;
  RelationId relation = 0;
  EntityId tail = 0;

  friend bool operator==(const Triple& a, const Triple& b) {
    return a.head == b.head && a.relation == b.relation && a.tail == b.tail;
  }
  friend bool operator<(const Triple& a, const Triple& b) {
    if (a.head != b.head) return a.head < b.head;
    if (a.relation != b.relation) return a.relation < b.relation;
    return a.tail < b.tail;
  }
};

using Neighbor = std::pair<RelationId, EntityId>;
using NeighborIndex = std::vector<std::vector<Neighbor>>;

// Builds the one-hop neighbor index over background triples: outgoing edges
// kept as (r, tail), incoming edges reversed into (r_inv, head). Lists longer
// than max_neighbors are down-sampled without replacement; the draw is seeded
// per entity so one entity's cap does not perturb another's.
//
// inverse_of maps a background relation id to its reversed counterpart.
template <typename InverseFn>
NeighborIndex build_neighbor_index(const std::vector<Triple>& triples, std::size_t n_entities,
                                   InverseFn inverse_of, int max_neighbors, std::uint64_t seed) {
  if (max_neighbors < 1) throw ConfigError("build_neighbor_index: max_neighbors must be >= 1");
  NeighborIndex index(n_entities);
  for (const Triple& t : triples) {
    index[static_cast<std::size_t>(t.head)].emplace_back(t.relation, t.tail);
    index[static_cast<std::size_t>(t.tail)].emplace_back(inverse_of(t.relation), t.head);
  }
  const auto cap = static_cast<std::size_t>(max_neighbors);
  for (std::size_t e = 0; e < index.size(); ++e) {
    auto& list = index[e];
    if (list.size() <= cap) continue;
    Rng rng(derive_seed(seed, 0x6e626864ULL + e));
    std::vector<int> keep = rng.sample_without_replacement(list.size(), cap);
    std::sort(keep.begin(), keep.end());  // keep original relative order
    std::vector<Neighbor> capped;
    capped.reserve(cap);
    for (int i : keep) capped.push_back(list[static_cast<std::size_t>(i)]);
    list = std::move(capped);
  }
  return index;
}

struct KnowledgeGraph {
  // Relation vocabulary layout: background relations and their inverses first
  // (the inverse of id r is r ^ 1), few-shot task relations after.
  std::vector<std::string> entity_names;
  std::vector<std::string> relation_names;
  RelationId n_background_relations = 0;  // count including inverses
  std::vector<Triple> background_triples;
  NeighborIndex neighbor_index;  // uncapped at load; re-derive with build_neighbor_index
  int neighbor_cap = 0;          // 0 = uncapped

  std::unordered_map<std::string, EntityId> entity_ids;
  std::unordered_map<std::string, RelationId> relation_ids;

  std::size_t num_entities() const { return entity_names.size(); }
  std::size_t num_relations() const { return relation_names.size(); }

  bool is_background_relation(RelationId r) const { return r >= 0 && r < n_background_relations; }

  RelationId inverse_of(RelationId r) const {
    if (!is_background_relation(r)) throw Error("inverse_of: not a background relation");
    return r ^ 1;
  }

  EntityId entity_id(const std::string& name) const {
    auto it = entity_ids.find(name);
    if (it == entity_ids.end()) throw SchemaError("unknown entity name: " + name);
    return it->second;
  }

  RelationId relation_id(const std::string& name) const {
    auto it = relation_ids.find(name);
    if (it == relation_ids.end()) throw SchemaError("unknown relation name: " + name);
    return it->second;
  }

  void finalize_vocab_maps() {
    entity_ids.clear();
    relation_ids.clear();
    for (std::size_t i = 0; i < entity_names.size(); ++i)
      entity_ids[entity_names[i]] = static_cast<EntityId>(i);
    for (std::size_t i = 0; i < relation_names.size(); ++i)
      relation_ids[relation_names[i]] = static_cast<RelationId>(i);
  }

  void rebuild_neighbor_index(int max_neighbors, std::uint64_t seed) {
    neighbor_index = build_neighbor_index(
        background_triples, num_entities(), [this](RelationId r) { return inverse_of(r); },
        max_neighbors, seed);
    neighbor_cap = max_neighbors;
  }
};

enum class Partition { Train, Valid, Test };

inline std::string to_string(Partition p) {
  switch (p) {
    case Partition::Train: return "train";
    case Partition::Valid: return "valid";
    case Partition::Test: return "test";
  }
  return "train";
}

inline Partition partition_from_string(const std::string& s) {
  if (s == "train") return Partition::Train;
  if (s == "valid" || s == "dev") return Partition::Valid;
  if (s == "test") return Partition::Test;
  throw ConfigError("unknown partition: " + s);
}

struct TaskSplit {
  std::map<RelationId, std::vector<Triple>> task_triples;  // file order preserved
  std::vector<RelationId> train_relations;
  std::vector<RelationId> valid_relations;
  std::vector<RelationId> test_relations;
  std::map<RelationId, std::vector<EntityId>> candidates;
  // (head, relation) -> known true tails, for filtered ranking and negative
  // sampling. Key packs head in the high 32 bits.
  std::unordered_map<std::uint64_t, std::vector<EntityId>> known_tails;

  static std::uint64_t key(EntityId head, RelationId rel) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(head)) << 32) |
           static_cast<std::uint32_t>(rel);
  }

  bool is_known_tail(EntityId head, RelationId rel, EntityId tail) const {
    auto it = known_tails.find(key(head, rel));
    if (it == known_tails.end()) return false;
    return std::binary_search(it->second.begin(), it->second.end(), tail);
  }

  void add_known_tail(EntityId head, RelationId rel, EntityId tail) {
    auto& v = known_tails[key(head, rel)];
    auto pos = std::lower_bound(v.begin(), v.end(), tail);
    if (pos == v.end() || *pos != tail) v.insert(pos, tail);
  }

  const std::vector<RelationId>& relations(Partition p) const {
    switch (p) {
      case Partition::Train: return train_relations;
      case Partition::Valid: return valid_relations;
      case Partition::Test: return test_relations;
    }
    return train_relations;
  }
};

struct Episode {
  RelationId relation = 0;
  std::vector<Triple> support;
  std::vector<Triple> query;
  std::vector<Triple> support_negatives;  // one per support triple
  std::vector<Triple> query_negatives;    // one per query triple
};

struct EmbeddingTable {
  // Column i is the vector of entity/relation i. Relation columns cover
  // background relations and their inverses only.
  Mat entity_vectors;
  Mat relation_vectors;
  int d = 0;

  Vec entity(EntityId e) const { return entity_vectors.col(e); }
  Vec relation(RelationId r) const { return relation_vectors.col(r); }
};

// Sparse gradient sink for the embedding tables (used when fine-tuning).
struct EmbeddingGrads {
  std::unordered_map<EntityId, Vec> entity;
  std::unordered_map<RelationId, Vec> relation;

  void add_entity(EntityId e, const Vec& g) {
    auto it = entity.find(e);
    if (it == entity.end())
      entity.emplace(e, g);
    else
      it->second += g;
  }
  void add_relation(RelationId r, const Vec& g) {
    auto it = relation.find(r);
    if (it == relation.end())
      relation.emplace(r, g);
    else
      it->second += g;
  }
  void accumulate(const EmbeddingGrads& o) {
    for (const auto& [e, g] : o.entity) add_entity(e, g);
    for (const auto& [r, g] : o.relation) add_relation(r, g);
  }
};

// Corrupts the tail of `positive`, drawing from the relation's candidate pool
// and rejecting known true triples. Bounded resampling; exhaustion throws.
inline Triple sample_negative(const TaskSplit& split, const Triple& positive,
                              const std::string& relation_name, Rng& rng,
                              int max_attempts = 100) {
  auto cit = split.candidates.find(positive.relation);
  if (cit == split.candidates.end() || cit->second.empty())
    throw SamplingError("no candidate pool for relation " + relation_name);
  const auto& pool = cit->second;
  for (int attempt = 0; attempt < max_attempts; ++attempt) {
    EntityId t = pool[static_cast<std::size_t>(rng.index(pool.size()))];
    if (t == positive.tail) continue;
    if (split.is_known_tail(positive.head, positive.relation, t)) continue;
    return Triple{positive.head, positive.relation, t};
  }
  throw SamplingError("negative sampling exhausted for relation " + relation_name);
}

// Samples one few-shot task: K support triples, up to query_size query
// triples (without replacement, disjoint from the support), one tail-corrupted
// negative per positive.
inline Episode sample_episode(const TaskSplit& split, RelationId relation,
                              const std::string& relation_name, int K, int query_size, Rng& rng) {
  if (K < 1 || query_size < 1) throw EpisodeError("sample_episode: K and query_size must be >= 1");
  auto it = split.task_triples.find(relation);
  if (it == split.task_triples.end())
    throw EpisodeError("sample_episode: unknown task relation " + relation_name);
  const auto& triples = it->second;
  if (triples.size() < static_cast<std::size_t>(K) + 1)
    throw EpisodeError("relation " + relation_name + " has fewer than K+1 triples");
  auto cit = split.candidates.find(relation);
  if (cit == split.candidates.end() || cit->second.size() < 2)
    throw EpisodeError("relation " + relation_name + " needs a candidate pool of >= 2 entities");

  std::vector<int> picked = rng.sample_without_replacement(
      triples.size(), static_cast<std::size_t>(K) + static_cast<std::size_t>(query_size));

  Episode ep;
  ep.relation = relation;
  for (int i = 0; i < K; ++i) ep.support.push_back(triples[static_cast<std::size_t>(picked[i])]);
  for (std::size_t i = static_cast<std::size_t>(K); i < picked.size(); ++i)
    ep.query.push_back(triples[static_cast<std::size_t>(picked[i])]);
  for (const Triple& t : ep.support)
    ep.support_negatives.push_back(sample_negative(split, t, relation_name, rng));
  for (const Triple& t : ep.query)
    ep.query_negatives.push_back(sample_negative(split, t, relation_name, rng));
  return ep;
}

enum class RelationCategory { OneToOne, OneToMany, ManyToOne, ManyToMany };

inline std::string to_string(RelationCategory c) {
  switch (c) {
    case RelationCategory::OneToOne: return "1-1";
    case RelationCategory::OneToMany: return "1-N";
    case RelationCategory::ManyToOne: return "N-1";
    case RelationCategory::ManyToMany: return "N-N";
  }
  return "1-1";
}

// Categorizes a relation by average tails-per-head (tph) and heads-per-tail
// (hpt) against the threshold.
inline RelationCategory classify_relation_category(const std::vector<Triple>& triples,
                                                   double threshold = 1.5) {
  if (triples.empty()) throw ClassificationError("classify_relation_category: empty triple list");
  std::set<EntityId> heads, tails;
  for (const Triple& t : triples) {
    heads.insert(t.head);
    tails.insert(t.tail);
  }
  const double n = static_cast<double>(triples.size());
  const double tph = n / static_cast<double>(heads.size());
  const double hpt = n / static_cast<double>(tails.size());
  if (tph >= threshold && hpt >= threshold) return RelationCategory::ManyToMany;
  if (tph >= threshold) return RelationCategory::OneToMany;
  if (hpt >= threshold) return RelationCategory::ManyToOne;
  return RelationCategory::OneToOne;
}

}  // namespace gana
