#include <catch_amalgamated.hpp>

#include <map>
#include <set>

#include "gana/kg.hpp"
#include "gana/synthetic.hpp"

#include "helpers.hpp"

using namespace gana;

namespace {

// Inverse convention used by the standalone index tests: forward relations
// are even ids, r_inv = r + 1.
RelationId inv(RelationId r) { return r ^ 1; }

}  // namespace

TEST_CASE("neighbor index: forward edges kept, incoming edges reversed") {
  // entities a=0, b=1, c=2; relations r1=0 (inv 1), r2=2 (inv 3)
  std::vector<Triple> triples = {{0, 0, 1}, {2, 2, 0}};
  NeighborIndex index = build_neighbor_index(triples, 3, inv, 50, 7);
  REQUIRE(index[0] == std::vector<Neighbor>{{0, 1}, {3, 2}});
  REQUIRE(index[1] == std::vector<Neighbor>{{1, 0}});
  REQUIRE(index[2] == std::vector<Neighbor>{{2, 0}});
}

TEST_CASE("neighbor index: capping keeps exactly max_neighbors drawn from the originals") {
  std::vector<Triple> triples;
  for (EntityId t = 1; t <= 120; ++t) triples.push_back({0, 0, t});
  NeighborIndex index = build_neighbor_index(triples, 121, inv, 50, 123);
  REQUIRE(index[0].size() == 50);
  std::set<EntityId> seen;
  for (const auto& [r, e] : index[0]) {
    REQUIRE(r == 0);
    REQUIRE(e >= 1);
    REQUIRE(e <= 120);
    seen.insert(e);
  }
  REQUIRE(seen.size() == 50);  // sampled without replacement
}

TEST_CASE("neighbor index: identical seed gives identical index") {
  Rng rng(99);
  std::vector<Triple> triples;
  for (int i = 0; i < 400; ++i)
    triples.push_back({static_cast<EntityId>(rng.index(30)), static_cast<RelationId>(2 * rng.index(4)),
                       static_cast<EntityId>(rng.index(30))});
  NeighborIndex a = build_neighbor_index(triples, 30, inv, 10, 42);
  NeighborIndex b = build_neighbor_index(triples, 30, inv, 10, 42);
  REQUIRE(a == b);
  NeighborIndex c = build_neighbor_index(triples, 30, inv, 10, 43);
  REQUIRE(a != c);  // different seed should resample at least one capped list
}

TEST_CASE("neighbor index completeness before capping") {
  Rng rng(5);
  std::vector<Triple> triples;
  for (int i = 0; i < 200; ++i)
    triples.push_back({static_cast<EntityId>(rng.index(40)), static_cast<RelationId>(2 * rng.index(3)),
                       static_cast<EntityId>(rng.index(40))});
  NeighborIndex index = build_neighbor_index(triples, 40, inv, 1000000, 0);
  std::map<EntityId, std::multiset<Neighbor>> expected;
  for (const Triple& t : triples) {
    expected[t.head].insert({t.relation, t.tail});
    expected[t.tail].insert({inv(t.relation), t.head});
  }
  for (EntityId e = 0; e < 40; ++e) {
    std::multiset<Neighbor> got(index[static_cast<std::size_t>(e)].begin(),
                                index[static_cast<std::size_t>(e)].end());
    REQUIRE(got == expected[e]);
  }
}

TEST_CASE("classify_relation_category") {
  SECTION("many heads sharing one tail is N-1") {
    std::vector<Triple> triples = {{0, 9, 100}, {1, 9, 100}, {2, 9, 100}};
    REQUIRE(classify_relation_category(triples) == RelationCategory::ManyToOne);
  }
  SECTION("single triple is 1-1") {
    REQUIRE(classify_relation_category({{3, 9, 4}}) == RelationCategory::OneToOne);
  }
  SECTION("full 2x2 bipartite is N-N") {
    std::vector<Triple> triples = {{0, 9, 10}, {0, 9, 11}, {1, 9, 10}, {1, 9, 11}};
    REQUIRE(classify_relation_category(triples) == RelationCategory::ManyToMany);
  }
  SECTION("one head many tails is 1-N") {
    std::vector<Triple> triples = {{0, 9, 10}, {0, 9, 11}, {0, 9, 12}};
    REQUIRE(classify_relation_category(triples) == RelationCategory::OneToMany);
  }
  SECTION("empty list is an error") {
    REQUIRE_THROWS_AS(classify_relation_category({}), ClassificationError);
  }
  SECTION("agrees with brute-force tph/hpt on random relations") {
    Rng rng(17);
    for (int trial = 0; trial < 200; ++trial) {
      std::vector<Triple> triples;
      std::set<Triple> seen;
      const int n = 1 + rng.index(12);
      for (int i = 0; i < n; ++i) {
        Triple t{static_cast<EntityId>(rng.index(4)), 0, static_cast<EntityId>(rng.index(4))};
        if (seen.insert(t).second) triples.push_back(t);
      }
      std::set<EntityId> heads, tails;
      for (const Triple& t : triples) {
        heads.insert(t.head);
        tails.insert(t.tail);
      }
      const double tph = double(triples.size()) / double(heads.size());
      const double hpt = double(triples.size()) / double(tails.size());
      RelationCategory expected =
          tph >= 1.5 ? (hpt >= 1.5 ? RelationCategory::ManyToMany : RelationCategory::OneToMany)
                     : (hpt >= 1.5 ? RelationCategory::ManyToOne : RelationCategory::OneToOne);
      REQUIRE(classify_relation_category(triples) == expected);
    }
  }
}

namespace {

TaskSplit tiny_split() {
  TaskSplit split;
  RelationId rel = 4;
  split.task_triples[rel] = {{0, rel, 1}, {2, rel, 3}, {4, rel, 5}, {6, rel, 7}};
  split.train_relations = {rel};
  split.candidates[rel] = {1, 3, 5, 7, 8, 9};
  for (const Triple& t : split.task_triples[rel]) split.add_known_tail(t.head, rel, t.tail);
  return split;
}

}  // namespace

TEST_CASE("sample_episode basic contract") {
  TaskSplit split = tiny_split();
  Rng rng(11);
  SECTION("relation with exactly K+1 triples gives disjoint support and query") {
    Episode ep = sample_episode(split, 4, "rel", 3, 1, rng);
    REQUIRE(ep.support.size() == 3);
    REQUIRE(ep.query.size() == 1);
    std::set<Triple> support(ep.support.begin(), ep.support.end());
    for (const Triple& q : ep.query) REQUIRE(support.count(q) == 0);
    REQUIRE(ep.support_negatives.size() == 3);
    REQUIRE(ep.query_negatives.size() == 1);
  }
  SECTION("too few triples is an episode error") {
    REQUIRE_THROWS_AS(sample_episode(split, 4, "rel", 4, 1, rng), EpisodeError);
  }
  SECTION("negatives corrupt only the tail and avoid known true triples") {
    for (int trial = 0; trial < 50; ++trial) {
      Episode ep = sample_episode(split, 4, "rel", 2, 2, rng);
      for (std::size_t i = 0; i < ep.support.size(); ++i) {
        const Triple& pos = ep.support[i];
        const Triple& neg = ep.support_negatives[i];
        REQUIRE(neg.head == pos.head);
        REQUIRE(neg.relation == pos.relation);
        REQUIRE(neg.tail != pos.tail);
        REQUIRE_FALSE(split.is_known_tail(pos.head, pos.relation, neg.tail));
      }
    }
  }
}

TEST_CASE("sample_episode exhausts when the pool has no valid corruption") {
  TaskSplit split;
  RelationId rel = 0;
  split.task_triples[rel] = {{0, rel, 1}, {2, rel, 1}, {3, rel, 1}};
  split.candidates[rel] = {1, 5};
  // every candidate is a known true tail for head 0
  split.add_known_tail(0, rel, 1);
  split.add_known_tail(0, rel, 5);
  split.add_known_tail(2, rel, 1);
  split.add_known_tail(2, rel, 5);
  split.add_known_tail(3, rel, 1);
  split.add_known_tail(3, rel, 5);
  Rng rng(3);
  REQUIRE_THROWS_AS(sample_episode(split, rel, "rel", 2, 1, rng), SamplingError);
}

TEST_CASE("sample_episode replay: fixed seed gives an identical episode") {
  TaskSplit split = tiny_split();
  Rng a(1234), b(1234);
  Episode e1 = sample_episode(split, 4, "rel", 2, 2, a);
  Episode e2 = sample_episode(split, 4, "rel", 2, 2, b);
  REQUIRE(e1.support == e2.support);
  REQUIRE(e1.query == e2.query);
  REQUIRE(e1.support_negatives == e2.support_negatives);
  REQUIRE(e1.query_negatives == e2.query_negatives);
}

TEST_CASE("episode invariants hold over 1000 random episodes on the synthetic KG") {
  Rng gen_rng(2024);
  auto [graph, split] = generate_synthetic_kg(120, 6, 3, 0.8, gen_rng);
  std::vector<RelationId> rels;
  for (const auto& [rel, triples] : split.task_triples) rels.push_back(rel);
  Rng rng(77);
  for (int i = 0; i < 1000; ++i) {
    const RelationId rel = rels[static_cast<std::size_t>(rng.index(rels.size()))];
    Episode ep = sample_episode(split, rel, "r", 3, 3, rng);
    std::set<Triple> support(ep.support.begin(), ep.support.end());
    REQUIRE(support.size() == ep.support.size());
    for (const Triple& q : ep.query) {
      REQUIRE(support.count(q) == 0);
      REQUIRE(q.relation == rel);
    }
    for (std::size_t k = 0; k < ep.query.size(); ++k) {
      const Triple& pos = ep.query[k];
      const Triple& neg = ep.query_negatives[k];
      REQUIRE(neg.head == pos.head);
      REQUIRE_FALSE(split.is_known_tail(pos.head, rel, neg.tail));
      const auto& pool = split.candidates.at(rel);
      REQUIRE(std::find(pool.begin(), pool.end(), neg.tail) != pool.end());
    }
  }
}
