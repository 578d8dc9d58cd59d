#pragma once

#include <algorithm>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "gana/config.hpp"
#include "gana/kg.hpp"
#include "gana/model.hpp"
#include "gana/mtransh.hpp"

namespace gana {

// Core ranking rule, shared by the model path and the metric-oracle tests:
// rank = 1 + number of kept competitors scoring <= the true score (ties count
// against the true tail). kept[i] == false removes candidate i (filtering);
// the true candidate itself is always kept.
inline int filtered_rank(const std::vector<double>& scores, std::size_t true_index,
                         const std::vector<char>& kept) {
  int rank = 1;
  const double true_score = scores[true_index];
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (i == true_index || !kept[i]) continue;
    if (scores[i] <= true_score) ++rank;
  }
  return rank;
}

struct QueryRecord {
  RelationId relation = 0;
  EntityId head = 0;
  EntityId true_tail = 0;
  int rank = 0;      // filtered
  int raw_rank = 0;  // without filtering, for diagnostics
  int pool_size = 0;  // candidates surviving the filter
};

struct ReportAggregates {
  std::size_t n_queries = 0;
  double mrr = 0.0;
  std::map<int, double> hits;  // {1, 5, 10}
};

inline ReportAggregates compute_aggregates(const std::vector<QueryRecord>& records) {
  ReportAggregates agg;
  agg.n_queries = records.size();
  agg.hits = {{1, 0.0}, {5, 0.0}, {10, 0.0}};
  if (records.empty()) return agg;
  double rr = 0.0;
  std::map<int, int> hit_counts = {{1, 0}, {5, 0}, {10, 0}};
  for (const QueryRecord& r : records) {
    rr += 1.0 / static_cast<double>(r.rank);
    for (auto& [n, c] : hit_counts)
      if (r.rank <= n) ++c;
  }
  agg.mrr = rr / static_cast<double>(records.size());
  for (auto& [n, c] : hit_counts)
    agg.hits[n] = static_cast<double>(c) / static_cast<double>(records.size());
  return agg;
}

struct RankingReport {
  std::vector<QueryRecord> records;
  ReportAggregates aggregates;
  std::map<std::string, ReportAggregates> by_category;  // empty unless requested
};

// Scores one query head against its candidate pool under the adapted relation
// state and returns the filtered rank.
inline int rank_query(EntityId head, const AdaptedRelation& state,
                      const std::vector<EntityId>& candidates, EntityId true_tail,
                      RelationId relation, const TaskSplit& split, const EmbeddingTable& emb,
                      Norm norm, bool use_projection, int* raw_rank = nullptr,
                      int* pool_size = nullptr) {
  std::size_t true_index = candidates.size();
  std::vector<double> scores(candidates.size());
  std::vector<char> kept(candidates.size(), 1);
  const Vec h = emb.entity(head);
  Vec h_side;
  if (use_projection)
    h_side = project_entity(h, state.P_adapted) + state.r_m;
  else
    h_side = h + state.r_m;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const EntityId c = candidates[i];
    Vec v;
    if (use_projection)
      v = h_side - project_entity(emb.entity(c), state.P_adapted);
    else
      v = h_side - emb.entity(c);
    scores[i] = norm == Norm::L2 ? v.norm() : v.lpNorm<1>();
    if (c == true_tail)
      true_index = i;
    else if (split.is_known_tail(head, relation, c))
      kept[i] = 0;
  }
  if (true_index == candidates.size())
    throw ProtocolError("rank_query: true tail is not in the candidate pool");
  if (raw_rank) *raw_rank = filtered_rank(scores, true_index, std::vector<char>(candidates.size(), 1));
  if (pool_size) {
    int n = 0;
    for (char k : kept) n += k;
    *pool_size = n;
  }
  return filtered_rank(scores, true_index, kept);
}

// Builds the deterministic evaluation episode of one relation: the first K
// triples (file order) as the support set, everything else as queries.
inline Episode evaluation_episode(const TaskSplit& split, RelationId relation,
                                  const std::string& relation_name, int K, std::uint64_t seed,
                                  bool sample_support) {
  const auto& triples = split.task_triples.at(relation);
  if (triples.size() < static_cast<std::size_t>(K) + 1)
    throw EpisodeError("relation " + relation_name + " has fewer than K+1 triples");
  Episode ep;
  ep.relation = relation;
  Rng rng(derive_seed(seed, 0xe7a1ULL + static_cast<std::uint64_t>(relation)));
  std::vector<int> support_idx;
  if (sample_support) {
    support_idx = rng.sample_without_replacement(triples.size(), static_cast<std::size_t>(K));
    std::sort(support_idx.begin(), support_idx.end());
  } else {
    for (int i = 0; i < K; ++i) support_idx.push_back(i);
  }
  std::vector<char> in_support(triples.size(), 0);
  for (int i : support_idx) {
    ep.support.push_back(triples[static_cast<std::size_t>(i)]);
    in_support[static_cast<std::size_t>(i)] = 1;
  }
  for (std::size_t i = 0; i < triples.size(); ++i)
    if (!in_support[i]) ep.query.push_back(triples[i]);
  for (const Triple& t : ep.support)
    ep.support_negatives.push_back(sample_negative(split, t, relation_name, rng));
  // Query negatives are not needed for ranking.
  return ep;
}

// Filtered-ranking evaluation over one partition: adapt once per relation on
// its support set, then rank every remaining triple's tail.
inline RankingReport evaluate(const ModelParams& params, const KnowledgeGraph& graph,
                              const TaskSplit& split, const EmbeddingTable& emb,
                              const NeighborIndex& index, Partition partition,
                              const TrainConfig& cfg) {
  RankingReport report;
  const bool projection = cfg.use_projection();
  for (RelationId rel : split.relations(partition)) {
    const std::string& name = graph.relation_names[static_cast<std::size_t>(rel)];
    Episode ep = evaluation_episode(split, rel, name, cfg.K, cfg.seed, cfg.eval_sample_support);
    const std::vector<Triple> queries = ep.query;
    ep.query.clear();
    const AdaptedRelation state = adapt_to_support(params, ep, index, emb, cfg);
    const auto& pool = split.candidates.at(rel);
    for (const Triple& q : queries) {
      QueryRecord rec;
      rec.relation = rel;
      rec.head = q.head;
      rec.true_tail = q.tail;
      rec.rank = rank_query(q.head, state, pool, q.tail, rel, split, emb, cfg.norm, projection,
                            &rec.raw_rank, &rec.pool_size);
      report.records.push_back(rec);
    }
  }
  report.aggregates = compute_aggregates(report.records);
  return report;
}

// Adds per-category sub-reports (1-1 / 1-N / N-1 / N-N by tph and hpt over
// each relation's task triples). Empty categories are absent.
inline RankingReport evaluate_by_category(const ModelParams& params, const KnowledgeGraph& graph,
                                          const TaskSplit& split, const EmbeddingTable& emb,
                                          const NeighborIndex& index, Partition partition,
                                          const TrainConfig& cfg) {
  RankingReport report = evaluate(params, graph, split, emb, index, partition, cfg);
  std::map<RelationId, std::string> category;
  for (RelationId rel : split.relations(partition))
    category[rel] =
        to_string(classify_relation_category(split.task_triples.at(rel), cfg.category_threshold));
  std::map<std::string, std::vector<QueryRecord>> buckets;
  for (const QueryRecord& r : report.records) buckets[category.at(r.relation)].push_back(r);
  for (const auto& [cat, records] : buckets) report.by_category[cat] = compute_aggregates(records);
  return report;
}

inline nlohmann::json report_to_json(const RankingReport& report, const KnowledgeGraph& graph) {
  nlohmann::json j;
  j["n_queries"] = report.aggregates.n_queries;
  j["mrr"] = report.aggregates.mrr;
  for (const auto& [n, v] : report.aggregates.hits) j["hits_at_" + std::to_string(n)] = v;
  nlohmann::json records = nlohmann::json::array();
  for (const QueryRecord& r : report.records) {
    records.push_back({{"relation", graph.relation_names[static_cast<std::size_t>(r.relation)]},
                       {"head", graph.entity_names[static_cast<std::size_t>(r.head)]},
                       {"true_tail", graph.entity_names[static_cast<std::size_t>(r.true_tail)]},
                       {"rank", r.rank},
                       {"raw_rank", r.raw_rank},
                       {"pool_size", r.pool_size}});
  }
  j["records"] = std::move(records);
  if (!report.by_category.empty()) {
    nlohmann::json cats;
    for (const auto& [cat, agg] : report.by_category) {
      nlohmann::json c;
      c["n_queries"] = agg.n_queries;
      c["mrr"] = agg.mrr;
      for (const auto& [n, v] : agg.hits) c["hits_at_" + std::to_string(n)] = v;
      cats[cat] = std::move(c);
    }
    j["by_category"] = std::move(cats);
  }
  return j;
}

// Attention-inspection dump: per support triple, each endpoint's neighbors
// with their attention weights and the gate value, plus the top_k / bottom_k
// selections.
inline nlohmann::json attention_report(const Episode& episode, const ModelParams& params,
                                       const KnowledgeGraph& graph, const EmbeddingTable& emb,
                                       const NeighborIndex& index, const TrainConfig& cfg,
                                       int top_k = 3, int bottom_k = 2) {
  if (cfg.has(Ablation::NoGana))
    throw ConfigError("attention_report: the no_gana ablation has no neighbor attention");
  const AggregatorOptions opts = aggregator_options(cfg);
  nlohmann::json out;
  out["relation"] = graph.relation_names[static_cast<std::size_t>(episode.relation)];
  nlohmann::json supports = nlohmann::json::array();
  for (const Triple& t : episode.support) {
    auto endpoint_dump = [&](EntityId e) {
      const NeighborhoodEncoding enc =
          aggregate_entity(e, index[static_cast<std::size_t>(e)], emb, params.agg, opts);
      std::vector<std::size_t> order(enc.neighbors.size());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (enc.attention(static_cast<Eigen::Index>(a)) != enc.attention(static_cast<Eigen::Index>(b)))
          return enc.attention(static_cast<Eigen::Index>(a)) > enc.attention(static_cast<Eigen::Index>(b));
        return a < b;
      });
      nlohmann::json dump;
      dump["entity"] = graph.entity_names[static_cast<std::size_t>(e)];
      dump["gate"] = enc.gate;
      nlohmann::json neighbors = nlohmann::json::array();
      for (std::size_t i : order) {
        const auto& [rel, ent] = enc.neighbors[i];
        neighbors.push_back({{"relation", graph.relation_names[static_cast<std::size_t>(rel)]},
                             {"entity", graph.entity_names[static_cast<std::size_t>(ent)]},
                             {"weight", enc.attention(static_cast<Eigen::Index>(i))}});
      }
      dump["neighbors"] = neighbors;
      nlohmann::json top = nlohmann::json::array();
      for (std::size_t i = 0; i < order.size() && i < static_cast<std::size_t>(top_k); ++i)
        top.push_back(neighbors[i]);
      nlohmann::json bottom = nlohmann::json::array();
      const std::size_t n = order.size();
      for (std::size_t i = n > static_cast<std::size_t>(bottom_k) ? n - static_cast<std::size_t>(bottom_k) : 0;
           i < n; ++i)
        bottom.push_back(neighbors[i]);
      dump["top"] = std::move(top);
      dump["bottom"] = std::move(bottom);
      return dump;
    };
    nlohmann::json entry;
    entry["triple"] = {graph.entity_names[static_cast<std::size_t>(t.head)],
                       graph.relation_names[static_cast<std::size_t>(t.relation)],
                       graph.entity_names[static_cast<std::size_t>(t.tail)]};
    entry["head"] = endpoint_dump(t.head);
    entry["tail"] = endpoint_dump(t.tail);
    supports.push_back(std::move(entry));
  }
  out["support"] = std::move(supports);
  return out;
}

}  // namespace gana
