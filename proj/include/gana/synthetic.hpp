#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "gana/kg.hpp"

namespace gana {

struct SynthOptions {
  int heads_per_relation = 0;  // 0 = derive from n_entities
  int tails_per_relation = 0;
  int pool_size = 50;
  int pattern_edges_per_side = 2;  // edges that make up one planted pattern
  int base_edges_per_entity = 0;   // extra background scaffold edges on every entity
  int distractor_edges = 2;        // noise edges on a (1 - pattern_strength) fraction
  // Decoy clusters: pattern-carrying entity groups that never become task
  // relations. Their members fill the confusable share of candidate pools, so
  // pools contain genuinely cluster-like distractors without turning other
  // tasks' true tails into negatives.
  int decoy_clusters = 0;  // 0 = one per task relation
  double confusable_fraction = 0.5;
  bool plant_n1_relation = false;  // give the first task relation a single tail
};

// Generates a desk-scale KG with planted few-shot relations: (h, r_j, t)
// holds iff h carries the head pattern of r_j and t carries its tail pattern,
// where a pattern is one designated background edge (b_rel, anchor). Entities
// may also receive distractor edges with probability (1 - pattern_strength).
inline std::pair<KnowledgeGraph, TaskSplit> generate_synthetic_kg(
    int n_entities, int n_background_relations, int n_task_relations, double pattern_strength,
    Rng& rng, const SynthOptions& opts = {}) {
  if (n_entities < 50) throw GenerationError("generate_synthetic_kg: n_entities must be >= 50");
  if (n_task_relations < 1)
    throw GenerationError("generate_synthetic_kg: n_task_relations must be >= 1");
  if (n_background_relations < 1)
    throw GenerationError("generate_synthetic_kg: n_background_relations must be >= 1");
  if (pattern_strength < 0.0 || pattern_strength > 1.0)
    throw GenerationError("generate_synthetic_kg: pattern_strength must be in [0, 1]");

  KnowledgeGraph graph;
  TaskSplit split;

  char buf[32];
  for (int i = 0; i < n_entities; ++i) {
    std::snprintf(buf, sizeof(buf), "e%05d", i);
    graph.entity_names.emplace_back(buf);
  }
  std::vector<std::string> bg_names;
  for (int i = 0; i < n_background_relations; ++i) {
    std::snprintf(buf, sizeof(buf), "b%03d", i);
    bg_names.emplace_back(buf);
  }
  for (const auto& r : bg_names) {
    graph.relation_names.push_back(r);
    graph.relation_names.push_back(r + kInverseSuffix);
  }
  graph.n_background_relations = static_cast<RelationId>(graph.relation_names.size());
  std::vector<RelationId> task_rel_ids;
  for (int j = 0; j < n_task_relations; ++j) {
    std::snprintf(buf, sizeof(buf), "task%03d", j);
    task_rel_ids.push_back(static_cast<RelationId>(graph.relation_names.size()));
    graph.relation_names.emplace_back(buf);
  }
  graph.finalize_vocab_maps();

  const int m_edges = std::max(1, opts.pattern_edges_per_side);
  const int n_decoys = opts.decoy_clusters > 0 ? opts.decoy_clusters : n_task_relations;
  const int n_task_anchors = 2 * n_task_relations * m_edges;
  const int n_anchors = n_task_anchors + n_decoys * m_edges;
  if (n_anchors + 10 >= n_entities)
    throw GenerationError("generate_synthetic_kg: too many task relations for the entity count");

  int heads = opts.heads_per_relation;
  int tails = opts.tails_per_relation;
  if (heads <= 0) heads = std::clamp(n_entities / 13, 4, 18);
  if (tails <= 0) tails = std::clamp(n_entities / 13, 4, 18);

  // A pattern is a set of m_edges background edges. side: 0 = head, 1 = tail;
  // anchors are unique per (relation, side, k), decoy anchors follow the task
  // anchors.
  auto pattern_rel = [&](int j, int side, int k) {
    return 2 * ((2 * j + side + 3 * k) % n_background_relations);
  };
  auto pattern_anchor = [&](int j, int side, int k) {
    return static_cast<EntityId>(k * 2 * n_task_relations + 2 * j + side);
  };
  auto decoy_rel = [&](int c, int k) {
    return 2 * ((2 * n_task_relations + c + 3 * k) % n_background_relations);
  };
  auto decoy_anchor = [&](int c, int k) {
    return static_cast<EntityId>(n_task_anchors + c * m_edges + k);
  };

  // Head/tail sets per relation, drawn from the non-anchor pool. Disjoint
  // within a relation; reuse across relations is allowed.
  std::vector<std::vector<EntityId>> head_sets(static_cast<std::size_t>(n_task_relations));
  std::vector<std::vector<EntityId>> tail_sets(static_cast<std::size_t>(n_task_relations));
  const int pool_begin = n_anchors;
  std::vector<EntityId> pool_entities;
  for (int e = pool_begin; e < n_entities; ++e) pool_entities.push_back(e);

  for (int j = 0; j < n_task_relations; ++j) {
    int tj = (opts.plant_n1_relation && j == 0) ? 1 : tails;
    if (static_cast<std::size_t>(heads) + static_cast<std::size_t>(tj) > pool_entities.size())
      throw GenerationError("generate_synthetic_kg: entity pool too small for the pattern sets");
    std::vector<int> idx =
        rng.sample_without_replacement(pool_entities.size(), static_cast<std::size_t>(heads + tj));
    for (int i = 0; i < heads; ++i)
      head_sets[static_cast<std::size_t>(j)].push_back(pool_entities[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])]);
    for (int i = heads; i < heads + tj; ++i)
      tail_sets[static_cast<std::size_t>(j)].push_back(pool_entities[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])]);
    if (static_cast<long long>(heads) * tj < 6)
      throw GenerationError("generate_synthetic_kg: cannot place at least K+1 triples per relation");
  }

  // Pattern edge lookup: (background relation id, anchor id) pairs that define
  // some relation's pattern. Random edges must not collide with these, or the
  // planted iff-condition would be broken.
  std::set<std::pair<RelationId, EntityId>> pattern_edges;
  for (int j = 0; j < n_task_relations; ++j)
    for (int side = 0; side < 2; ++side)
      for (int k = 0; k < m_edges; ++k)
        pattern_edges.insert(
            {static_cast<RelationId>(pattern_rel(j, side, k)), pattern_anchor(j, side, k)});
  for (int c = 0; c < n_decoys; ++c)
    for (int k = 0; k < m_edges; ++k)
      pattern_edges.insert({static_cast<RelationId>(decoy_rel(c, k)), decoy_anchor(c, k)});

  std::set<Triple> background_set;
  auto add_background = [&](EntityId h, RelationId r, EntityId t) {
    Triple triple{h, r, t};
    if (background_set.insert(triple).second) graph.background_triples.push_back(triple);
  };

  for (int j = 0; j < n_task_relations; ++j) {
    for (EntityId h : head_sets[static_cast<std::size_t>(j)])
      for (int k = 0; k < m_edges; ++k)
        add_background(h, static_cast<RelationId>(pattern_rel(j, 0, k)), pattern_anchor(j, 0, k));
    for (EntityId t : tail_sets[static_cast<std::size_t>(j)])
      for (int k = 0; k < m_edges; ++k)
        add_background(t, static_cast<RelationId>(pattern_rel(j, 1, k)), pattern_anchor(j, 1, k));
  }

  // Decoy clusters: never tails of any task relation.
  std::set<EntityId> any_task_tail;
  for (const auto& ts : tail_sets) any_task_tail.insert(ts.begin(), ts.end());
  std::vector<EntityId> decoy_pool;
  for (EntityId e : pool_entities)
    if (!any_task_tail.count(e)) decoy_pool.push_back(e);
  std::vector<EntityId> decoy_members;
  for (int c = 0; c < n_decoys; ++c) {
    if (decoy_pool.size() < static_cast<std::size_t>(tails))
      throw GenerationError("generate_synthetic_kg: entity pool too small for decoy clusters");
    std::vector<int> idx =
        rng.sample_without_replacement(decoy_pool.size(), static_cast<std::size_t>(tails));
    for (int i : idx) {
      const EntityId e = decoy_pool[static_cast<std::size_t>(i)];
      decoy_members.push_back(e);
      for (int k = 0; k < m_edges; ++k)
        add_background(e, static_cast<RelationId>(decoy_rel(c, k)), decoy_anchor(c, k));
    }
  }
  std::sort(decoy_members.begin(), decoy_members.end());
  decoy_members.erase(std::unique(decoy_members.begin(), decoy_members.end()),
                      decoy_members.end());

  auto add_random_edges = [&](EntityId e, int count) {
    for (int k = 0; k < count; ++k) {
      for (int attempt = 0; attempt < 50; ++attempt) {
        RelationId r = static_cast<RelationId>(2 * rng.index(static_cast<std::size_t>(n_background_relations)));
        EntityId t = static_cast<EntityId>(rng.index(static_cast<std::size_t>(n_entities)));
        if (t == e) continue;
        if (pattern_edges.count({r, t})) continue;
        add_background(e, r, t);
        break;
      }
    }
  };
  if (opts.base_edges_per_entity > 0)
    for (int e = 0; e < n_entities; ++e)
      add_random_edges(static_cast<EntityId>(e), opts.base_edges_per_entity);
  if (pattern_strength < 1.0) {
    for (int e = 0; e < n_entities; ++e)
      if (rng.uniform() < 1.0 - pattern_strength)
        add_random_edges(static_cast<EntityId>(e), opts.distractor_edges);
  }

  // Task triples: the full bipartite head-set x tail-set product, in a
  // seeded shuffled order so the first K triples of a relation form a varied
  // support set.
  for (int j = 0; j < n_task_relations; ++j) {
    const RelationId rel = task_rel_ids[static_cast<std::size_t>(j)];
    std::vector<Triple> triples;
    for (EntityId h : head_sets[static_cast<std::size_t>(j)])
      for (EntityId t : tail_sets[static_cast<std::size_t>(j)]) triples.push_back(Triple{h, rel, t});
    rng.shuffle(triples);
    split.task_triples[rel] = triples;
    for (const Triple& t : triples) split.add_known_tail(t.head, rel, t.tail);
  }

  // Candidate pools: every planted tail, a confusable share of decoy-cluster
  // members, and random non-tail entities. Other task relations' tails are
  // kept out of the pools so they never serve as negatives.
  for (int j = 0; j < n_task_relations; ++j) {
    const RelationId rel = task_rel_ids[static_cast<std::size_t>(j)];
    std::set<EntityId> in_pool(tail_sets[static_cast<std::size_t>(j)].begin(),
                               tail_sets[static_cast<std::size_t>(j)].end());
    std::vector<EntityId> pool(in_pool.begin(), in_pool.end());
    const int target = std::min(std::max(opts.pool_size, static_cast<int>(pool.size())), n_entities);

    std::vector<EntityId> confusable = decoy_members;
    rng.shuffle(confusable);
    const int want_confusable =
        static_cast<int>(opts.confusable_fraction * (target - static_cast<int>(pool.size())));
    for (int k = 0; k < want_confusable && k < static_cast<int>(confusable.size()); ++k) {
      const EntityId e = confusable[static_cast<std::size_t>(k)];
      if (in_pool.insert(e).second) pool.push_back(e);
    }
    int guard = 0;
    while (static_cast<int>(pool.size()) < target && guard++ < 100 * n_entities) {
      EntityId e = static_cast<EntityId>(rng.index(static_cast<std::size_t>(n_entities)));
      if (in_pool.count(e)) continue;
      if (any_task_tail.count(e)) continue;  // other tasks' tails stay out of the pool
      in_pool.insert(e);
      pool.push_back(e);
    }
    rng.shuffle(pool);
    split.candidates[rel] = pool;
  }

  // Relation split: train gets the first share after a seeded shuffle, then
  // valid, then test. Valid/test only exist once there are enough relations.
  std::vector<RelationId> order = task_rel_ids;
  rng.shuffle(order);
  int n_test = n_task_relations >= 3 ? std::max(1, static_cast<int>(std::lround(0.2 * n_task_relations))) : 0;
  int n_valid = n_task_relations >= 2 ? 1 : 0;
  if (n_test + n_valid >= n_task_relations) n_test = std::max(0, n_task_relations - n_valid - 1);
  const int n_train = n_task_relations - n_valid - n_test;
  for (int i = 0; i < n_task_relations; ++i) {
    if (i < n_train)
      split.train_relations.push_back(order[static_cast<std::size_t>(i)]);
    else if (i < n_train + n_valid)
      split.valid_relations.push_back(order[static_cast<std::size_t>(i)]);
    else
      split.test_relations.push_back(order[static_cast<std::size_t>(i)]);
  }
  std::sort(split.train_relations.begin(), split.train_relations.end());
  std::sort(split.valid_relations.begin(), split.valid_relations.end());
  std::sort(split.test_relations.begin(), split.test_relations.end());

  graph.neighbor_index = build_neighbor_index(
      graph.background_triples, graph.num_entities(),
      [&graph](RelationId r) { return graph.inverse_of(r); }, std::numeric_limits<int>::max(), 0);
  graph.neighbor_cap = 0;

  // Post-validation: the construction guarantees below must hold on every
  // generated instance.
  for (int j = 0; j < n_task_relations; ++j) {
    const RelationId rel = task_rel_ids[static_cast<std::size_t>(j)];
    const auto& triples = split.task_triples.at(rel);
    if (triples.size() < 6) throw GenerationError("post-validation: relation with fewer than 6 triples");
    for (const Triple& t : triples)
      for (int k = 0; k < m_edges; ++k) {
        if (!background_set.count(
                Triple{t.head, static_cast<RelationId>(pattern_rel(j, 0, k)), pattern_anchor(j, 0, k)}) ||
            !background_set.count(
                Triple{t.tail, static_cast<RelationId>(pattern_rel(j, 1, k)), pattern_anchor(j, 1, k)}))
          throw GenerationError("post-validation: planted pattern missing from a neighborhood");
      }
    // iff-direction: no entity outside the planted sets may carry any pattern
    // edge at all
    std::set<EntityId> hs(head_sets[static_cast<std::size_t>(j)].begin(), head_sets[static_cast<std::size_t>(j)].end());
    std::set<EntityId> ts(tail_sets[static_cast<std::size_t>(j)].begin(), tail_sets[static_cast<std::size_t>(j)].end());
    for (const Triple& b : graph.background_triples)
      for (int k = 0; k < m_edges; ++k) {
        if (b.relation == pattern_rel(j, 0, k) && b.tail == pattern_anchor(j, 0, k) &&
            !hs.count(b.head))
          throw GenerationError("post-validation: accidental head-pattern carrier");
        if (b.relation == pattern_rel(j, 1, k) && b.tail == pattern_anchor(j, 1, k) &&
            !ts.count(b.head))
          throw GenerationError("post-validation: accidental tail-pattern carrier");
      }
    if (split.candidates.at(rel).size() < static_cast<std::size_t>(std::min(opts.pool_size, n_entities)))
      throw GenerationError("post-validation: candidate pool below the requested size");
  }

  return {std::move(graph), std::move(split)};
}

}  // namespace gana
