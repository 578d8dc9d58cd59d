#pragma once

#include <filesystem>
#include <fstream>
#include <string>

#include "gana/core.hpp"
#include "gana/kg.hpp"

namespace testutil {

// Scratch directory that cleans up after itself.
struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    path = std::filesystem::temp_directory_path() /
           ("gana_test_" + tag + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::filesystem::path file(const std::string& name) const { return path / name; }
};

inline void write_file(const std::filesystem::path& p, const std::string& content) {
  std::ofstream out(p);
  out << content;
}

// Toy dataset on disk: 3 entities, 2 background triples, 1 task relation.
//   background: (alpha, likes, beta), (gamma, knows, alpha)
//   task "mentors": (alpha, mentors, beta), (gamma, mentors, beta)
inline void write_toy_dataset(const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_file(dir / "path_graph", "alpha\tlikes\tbeta\ngamma\tknows\talpha\n");
  write_file(dir / "train_tasks.json",
             R"({"mentors": [["alpha", "mentors", "beta"], ["gamma", "mentors", "beta"]]})");
  write_file(dir / "dev_tasks.json", "{}");
  write_file(dir / "test_tasks.json", "{}");
  write_file(dir / "rel2candidates.json", R"({"mentors": ["beta", "gamma", "alpha"]})");
  write_file(dir / "e1rel_e2.json",
             R"({"alpha\tmentors": ["beta"], "gamma\tmentors": ["beta"]})");
}

// Random embedding table with unit-scale entries.
inline gana::EmbeddingTable random_embeddings(int d, int n_entities, int n_relations,
                                              gana::Rng& rng) {
  gana::EmbeddingTable emb;
  emb.d = d;
  emb.entity_vectors.resize(d, n_entities);
  emb.relation_vectors.resize(d, n_relations);
  for (int c = 0; c < n_entities; ++c)
    for (int i = 0; i < d; ++i) emb.entity_vectors(i, c) = rng.uniform(-1.0, 1.0);
  for (int c = 0; c < n_relations; ++c)
    for (int i = 0; i < d; ++i) emb.relation_vectors(i, c) = rng.uniform(-1.0, 1.0);
  return emb;
}

inline gana::Vec random_vec(int d, gana::Rng& rng, double scale = 1.0) {
  gana::Vec v(d);
  for (int i = 0; i < d; ++i) v(i) = rng.uniform(-scale, scale);
  return v;
}

inline gana::Vec random_unit(int d, gana::Rng& rng) {
  gana::Vec v = random_vec(d, rng);
  v.normalize();
  return v;
}

}  // namespace testutil
