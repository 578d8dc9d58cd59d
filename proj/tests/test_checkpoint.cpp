#include <catch_amalgamated.hpp>

#include <fstream>

#include "gana/checkpoint.hpp"
#include "gana/synthetic.hpp"
#include "gana/training.hpp"

#include "helpers.hpp"

using namespace gana;

namespace {

Checkpoint make_checkpoint(std::uint64_t seed) {
  Rng gen(seed);
  auto [graph, split] = generate_synthetic_kg(80, 5, 2, 0.9, gen);
  Checkpoint ckpt;
  ckpt.config.d = 6;
  ckpt.config.K = 1;
  ckpt.config.hid1 = 12;
  ckpt.config.hid2 = 6;
  ckpt.config.seed = seed;
  Rng rng(seed + 1);
  ckpt.params = ModelParams::init(6, 12, 6, rng);
  ckpt.best_params = ModelParams::init(6, 12, 6, rng);
  ckpt.embeddings = testutil::random_embeddings(6, static_cast<int>(graph.num_entities()),
                                                graph.n_background_relations, rng);
  ckpt.step = 17;
  ckpt.best_val_mrr = 0.375;
  Rng ep(123);
  ep.next_u64();
  ckpt.episode_rng_state = ep.state();
  return ckpt;
}

}  // namespace

TEST_CASE("checkpoint save/load round-trip is bit exact") {
  testutil::TempDir dir("ckpt");
  Checkpoint ckpt = make_checkpoint(71);
  const std::string path = dir.file("model.ckpt").string();
  save_checkpoint(ckpt, path);
  Checkpoint loaded = load_checkpoint(path);

  REQUIRE(loaded.step == ckpt.step);
  REQUIRE(loaded.best_val_mrr == ckpt.best_val_mrr);
  REQUIRE(loaded.episode_rng_state == ckpt.episode_rng_state);
  REQUIRE(loaded.config.seed == ckpt.config.seed);
  REQUIRE(loaded.config.d == ckpt.config.d);
  REQUIRE(loaded.embeddings.entity_vectors == ckpt.embeddings.entity_vectors);
  REQUIRE(loaded.embeddings.relation_vectors == ckpt.embeddings.relation_vectors);
  REQUIRE(loaded.params.agg.W1 == ckpt.params.agg.W1);
  REQUIRE(loaded.params.agg.b_g == ckpt.params.agg.b_g);
  REQUIRE(loaded.params.P_star == ckpt.params.P_star);
  for (int l = 0; l < 2; ++l)
    for (int d = 0; d < 2; ++d) {
      REQUIRE(loaded.params.lstm.cells[l][d].Wx == ckpt.params.lstm.cells[l][d].Wx);
      REQUIRE(loaded.params.lstm.cells[l][d].Wh == ckpt.params.lstm.cells[l][d].Wh);
      REQUIRE(loaded.params.lstm.cells[l][d].bias == ckpt.params.lstm.cells[l][d].bias);
    }
  REQUIRE(loaded.best_params.attn.W3 == ckpt.best_params.attn.W3);

  SECTION("saving the loaded checkpoint reproduces the file byte for byte") {
    const std::string path2 = dir.file("model2.ckpt").string();
    save_checkpoint(loaded, path2);
    std::ifstream a(path, std::ios::binary), b(path2, std::ios::binary);
    std::string sa((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
    std::string sb((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
    REQUIRE(sa == sb);
  }
}

TEST_CASE("checkpoint with adam state round-trips") {
  testutil::TempDir dir("ckpt_adam");
  Checkpoint ckpt = make_checkpoint(73);
  ckpt.config.optimizer = "adam";
  ckpt.opt.adam = true;
  ckpt.opt.t = 5;
  Rng rng(9);
  ckpt.opt.m = ModelParams::init(6, 12, 6, rng);
  ckpt.opt.v = ModelParams::init(6, 12, 6, rng);
  const std::string path = dir.file("adam.ckpt").string();
  save_checkpoint(ckpt, path);
  Checkpoint loaded = load_checkpoint(path);
  REQUIRE(loaded.opt.adam);
  REQUIRE(loaded.opt.t == 5);
  REQUIRE(loaded.opt.m.agg.W1 == ckpt.opt.m.agg.W1);
  REQUIRE(loaded.opt.v.attn.u3 == ckpt.opt.v.attn.u3);
}

TEST_CASE("checkpoint version mismatch is a load error") {
  testutil::TempDir dir("ckpt_ver");
  Checkpoint ckpt = make_checkpoint(79);
  const std::string path = dir.file("model.ckpt").string();
  save_checkpoint(ckpt, path);

  std::ifstream in(path, std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  in.close();
  const std::string needle = "gana-checkpoint-v1";
  const auto pos = bytes.find(needle);
  REQUIRE(pos != std::string::npos);
  bytes[pos + needle.size() - 1] = '9';
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out.close();
  REQUIRE_THROWS_AS(load_checkpoint(path), CheckpointError);
}

TEST_CASE("truncated checkpoint is an integrity error") {
  testutil::TempDir dir("ckpt_trunc");
  Checkpoint ckpt = make_checkpoint(83);
  const std::string path = dir.file("model.ckpt").string();
  save_checkpoint(ckpt, path);
  std::ifstream in(path, std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  in.close();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
  out.close();
  REQUIRE_THROWS_AS(load_checkpoint(path), IntegrityError);
}

TEST_CASE("embedding file round-trip and shape manifest") {
  testutil::TempDir dir("embfile");
  Rng rng(5);
  EmbeddingTable emb = testutil::random_embeddings(7, 40, 10, rng);
  const std::string path = dir.file("emb.gt").string();
  save_embeddings(emb, path);
  EmbeddingTable loaded = load_embeddings(path);
  REQUIRE(loaded.d == 7);
  REQUIRE(loaded.entity_vectors == emb.entity_vectors);
  REQUIRE(loaded.relation_vectors == emb.relation_vectors);
  // manifest shapes readable without touching the blob
  tensorfile::Reader r = tensorfile::Reader::read(path, kEmbeddingsVersion);
  REQUIRE(r.meta.at("n_entities").get<int>() == 40);
  REQUIRE(r.meta.at("d").get<int>() == 7);
  // wrong expected version is a checkpoint error
  REQUIRE_THROWS_AS(tensorfile::Reader::read(path, kCheckpointVersion), CheckpointError);
}
