#include <catch_amalgamated.hpp>

#include "gana/dataset.hpp"

#include "helpers.hpp"

using namespace gana;

TEST_CASE("load_dataset on the toy fixture: exact vocabulary and index") {
  testutil::TempDir dir("toy_load");
  testutil::write_toy_dataset(dir.path);
  auto [graph, split] = load_dataset(dir.path);

  // entities sorted: alpha, beta, gamma
  REQUIRE(graph.entity_names == std::vector<std::string>{"alpha", "beta", "gamma"});
  // background relations sorted with adjacent inverses, then task relations
  REQUIRE(graph.relation_names ==
          std::vector<std::string>{"knows", "knows_inv", "likes", "likes_inv", "mentors"});
  REQUIRE(graph.n_background_relations == 4);
  REQUIRE(graph.background_triples.size() == 2);

  const EntityId alpha = 0, beta = 1, gamma = 2;
  const RelationId knows = 0, knows_inv = 1, likes = 2, likes_inv = 3, mentors = 4;
  REQUIRE(graph.background_triples[0] == Triple{alpha, likes, beta});
  REQUIRE(graph.background_triples[1] == Triple{gamma, knows, alpha});

  // neighbor index by direct enumeration: alpha -> (likes,beta),(knows_inv,gamma)
  REQUIRE(graph.neighbor_index[alpha] ==
          std::vector<Neighbor>{{likes, beta}, {knows_inv, gamma}});
  REQUIRE(graph.neighbor_index[beta] == std::vector<Neighbor>{{likes_inv, alpha}});
  REQUIRE(graph.neighbor_index[gamma] == std::vector<Neighbor>{{knows, alpha}});

  REQUIRE(split.train_relations == std::vector<RelationId>{mentors});
  REQUIRE(split.valid_relations.empty());
  REQUIRE(split.test_relations.empty());
  REQUIRE(split.task_triples.at(mentors) ==
          std::vector<Triple>{{alpha, mentors, beta}, {gamma, mentors, beta}});
  REQUIRE(split.candidates.at(mentors) == std::vector<EntityId>{beta, gamma, alpha});
  REQUIRE(split.is_known_tail(alpha, mentors, beta));
  REQUIRE_FALSE(split.is_known_tail(alpha, mentors, gamma));
}

TEST_CASE("load_dataset: empty background graph yields empty neighborhoods") {
  testutil::TempDir dir("empty_bg");
  testutil::write_toy_dataset(dir.path);
  testutil::write_file(dir.file("path_graph"), "");
  auto [graph, split] = load_dataset(dir.path);
  REQUIRE(graph.background_triples.empty());
  REQUIRE(graph.n_background_relations == 0);
  for (const auto& list : graph.neighbor_index) REQUIRE(list.empty());
  REQUIRE(split.task_triples.size() == 1);
}

TEST_CASE("load_dataset error paths") {
  SECTION("missing file names the file") {
    testutil::TempDir dir("missing");
    testutil::write_toy_dataset(dir.path);
    std::filesystem::remove(dir.file("rel2candidates.json"));
    try {
      load_dataset(dir.path);
      FAIL("expected LoadError");
    } catch (const LoadError& e) {
      REQUIRE(std::string(e.what()).find("rel2candidates.json") != std::string::npos);
    }
  }
  SECTION("unknown entity in a task file is a schema error naming the triple") {
    testutil::TempDir dir("unknown_entity");
    testutil::write_toy_dataset(dir.path);
    testutil::write_file(dir.file("train_tasks.json"),
                         R"({"mentors": [["ghost", "mentors", "beta"]]})");
    try {
      load_dataset(dir.path);
      FAIL("expected SchemaError");
    } catch (const SchemaError& e) {
      REQUIRE(std::string(e.what()).find("ghost") != std::string::npos);
    }
  }
  SECTION("malformed background line is a schema error with the line") {
    testutil::TempDir dir("bad_line");
    testutil::write_toy_dataset(dir.path);
    testutil::write_file(dir.file("path_graph"), "alpha\tlikes\n");
    REQUIRE_THROWS_AS(load_dataset(dir.path), SchemaError);
  }
  SECTION("task triple with mismatched relation is a schema error") {
    testutil::TempDir dir("bad_rel");
    testutil::write_toy_dataset(dir.path);
    testutil::write_file(dir.file("train_tasks.json"),
                         R"({"mentors": [["alpha", "likes", "beta"]]})");
    REQUIRE_THROWS_AS(load_dataset(dir.path), SchemaError);
  }
  SECTION("task tail missing from the candidate pool is a schema error") {
    testutil::TempDir dir("bad_pool");
    testutil::write_toy_dataset(dir.path);
    testutil::write_file(dir.file("rel2candidates.json"), R"({"mentors": ["gamma", "alpha"]})");
    REQUIRE_THROWS_AS(load_dataset(dir.path), SchemaError);
  }
}

TEST_CASE("load -> write -> load round-trip preserves counts and the neighbor index") {
  testutil::TempDir dir("roundtrip");
  testutil::write_toy_dataset(dir.path);
  auto [graph, split] = load_dataset(dir.path);

  testutil::TempDir dir2("roundtrip_out");
  write_dataset(graph, split, dir2.path);
  auto [graph2, split2] = load_dataset(dir2.path);

  REQUIRE(graph2.entity_names == graph.entity_names);
  REQUIRE(graph2.relation_names == graph.relation_names);
  REQUIRE(graph2.background_triples == graph.background_triples);
  REQUIRE(graph2.neighbor_index == graph.neighbor_index);
  REQUIRE(split2.task_triples == split.task_triples);
  REQUIRE(split2.candidates == split.candidates);
  REQUIRE(split2.train_relations == split.train_relations);
  REQUIRE(split2.known_tails.size() == split.known_tails.size());
  for (const auto& [k, v] : split.known_tails) {
    auto it = split2.known_tails.find(k);
    REQUIRE(it != split2.known_tails.end());
    REQUIRE(it->second == v);
  }
}
