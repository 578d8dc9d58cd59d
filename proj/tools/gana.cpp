#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "gana/checkpoint.hpp"
#include "gana/config.hpp"
#include "gana/dataset.hpp"
#include "gana/evaluation.hpp"
#include "gana/synthetic.hpp"
#include "gana/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitRuntime = 3;

struct CommonFlags {
  std::string config_path;
  std::string data_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> shots;
  std::optional<int> workers;
  std::vector<std::string> ablations;
};

gana::RunConfig load_run_config(const CommonFlags& flags) {
  gana::RunConfig cfg;
  if (!flags.config_path.empty()) {
    std::ifstream in(flags.config_path);
    if (!in) throw gana::LoadError("missing or unreadable config file: " + flags.config_path);
    json j;
    try {
      in >> j;
    } catch (const json::exception& e) {
      throw gana::ConfigError("invalid JSON in " + flags.config_path + ": " + e.what());
    }
    from_json(j, cfg);
  }
  // flag > config file > environment
  if (!flags.data_dir.empty()) cfg.dataset_dir = flags.data_dir;
  if (cfg.dataset_dir.empty()) {
    if (const char* env = std::getenv("GANA_DATA_ROOT")) cfg.dataset_dir = env;
  }
  if (flags.seed) cfg.train.seed = *flags.seed;
  if (flags.shots) cfg.train.K = *flags.shots;
  if (flags.workers) cfg.train.workers = *flags.workers;
  if (!flags.ablations.empty()) {
    cfg.train.ablation.clear();
    for (const auto& a : flags.ablations) cfg.train.ablation.insert(gana::ablation_from_string(a));
  }
  cfg.validate();
  return cfg;
}

void echo_resolved_config(const gana::RunConfig& cfg) {
  if (cfg.output_dir.empty()) return;
  fs::create_directories(cfg.output_dir);
  json j;
  to_json(j, cfg);
  std::ofstream out(fs::path(cfg.output_dir) / "resolved_config.json");
  out << j.dump(2) << '\n';
}

std::pair<gana::KnowledgeGraph, gana::TaskSplit> load_data_for(const gana::RunConfig& cfg) {
  if (cfg.dataset_dir.empty())
    throw gana::ConfigError("no dataset directory: set dataset_dir, --data, or GANA_DATA_ROOT");
  return gana::load_dataset(cfg.dataset_dir);
}

gana::EmbeddingTable obtain_embeddings(const gana::RunConfig& cfg,
                                       const gana::KnowledgeGraph& graph) {
  if (!cfg.embeddings_path.empty() && fs::exists(cfg.embeddings_path)) {
    gana::EmbeddingTable emb = gana::load_embeddings(cfg.embeddings_path);
    if (emb.entity_vectors.cols() != static_cast<Eigen::Index>(graph.num_entities()) ||
        emb.relation_vectors.cols() != graph.n_background_relations)
      throw gana::IntegrityError("embedding table shapes do not match the dataset vocabularies");
    return emb;
  }
  gana::Rng rng(gana::derive_seed(cfg.train.seed, 0x707265ULL));
  return gana::pretrain_embeddings(graph, cfg.train.d, cfg.train.pretrain_epochs,
                                   cfg.train.pretrain_lr, cfg.train.pretrain_gamma, rng);
}

int cmd_synth(const std::string& out_dir, int entities, int background_relations,
              int task_relations, double pattern_strength, std::uint64_t seed, int pool_size,
              int heads, int tails, bool plant_n1) {
  gana::SynthOptions opts;
  opts.pool_size = pool_size;
  opts.heads_per_relation = heads;
  opts.tails_per_relation = tails;
  opts.plant_n1_relation = plant_n1;
  gana::Rng rng(seed);
  auto [graph, split] =
      gana::generate_synthetic_kg(entities, background_relations, task_relations, pattern_strength,
                                  rng, opts);
  gana::write_dataset(graph, split, out_dir);
  json stats;
  stats["entities"] = graph.num_entities();
  stats["relations"] = graph.num_relations();
  stats["background_triples"] = graph.background_triples.size();
  stats["task_relations"] = split.task_triples.size();
  stats["train_relations"] = split.train_relations.size();
  stats["valid_relations"] = split.valid_relations.size();
  stats["test_relations"] = split.test_relations.size();
  std::cout << stats.dump(2) << std::endl;
  return kExitOk;
}

int cmd_pretrain(const CommonFlags& flags) {
  gana::RunConfig cfg = load_run_config(flags);
  auto [graph, split] = load_data_for(cfg);
  gana::Rng rng(gana::derive_seed(cfg.train.seed, 0x707265ULL));
  gana::EmbeddingTable emb = gana::pretrain_embeddings(
      graph, cfg.train.d, cfg.train.pretrain_epochs, cfg.train.pretrain_lr,
      cfg.train.pretrain_gamma, rng);
  std::string out_path = cfg.embeddings_path;
  if (out_path.empty()) {
    if (cfg.output_dir.empty())
      throw gana::ConfigError("pretrain needs embeddings_path or output_dir");
    out_path = (fs::path(cfg.output_dir) / "embeddings.gt").string();
    cfg.embeddings_path = out_path;
  }
  fs::create_directories(fs::path(out_path).parent_path().empty()
                             ? fs::path(".")
                             : fs::path(out_path).parent_path());
  gana::save_embeddings(emb, out_path);
  echo_resolved_config(cfg);
  json out;
  out["embeddings"] = out_path;
  out["entities"] = emb.entity_vectors.cols();
  out["relations"] = emb.relation_vectors.cols();
  out["d"] = emb.d;
  std::cout << out.dump(2) << std::endl;
  return kExitOk;
}

int cmd_train(const CommonFlags& flags, const std::string& resume_path) {
  gana::RunConfig cfg = load_run_config(flags);
  if (cfg.output_dir.empty()) throw gana::ConfigError("train needs output_dir in the config");
  auto [graph, split] = load_data_for(cfg);
  gana::EmbeddingTable emb = obtain_embeddings(cfg, graph);
  std::optional<gana::Checkpoint> resume;
  if (!resume_path.empty()) resume = gana::load_checkpoint(resume_path);
  gana::TrainResult result = gana::train(graph, split, emb, cfg.train, resume);
  fs::create_directories(cfg.output_dir);
  gana::save_checkpoint(result.best, (fs::path(cfg.output_dir) / "best.ckpt").string());
  gana::save_checkpoint(result.last, (fs::path(cfg.output_dir) / "last.ckpt").string());
  {
    std::ofstream log(fs::path(cfg.output_dir) / "log.jsonl");
    for (const gana::LogRecord& rec : result.log) {
      json j;
      j["step"] = rec.step;
      j["loss"] = rec.loss;
      if (rec.has_val) j["val_mrr"] = rec.val_mrr;
      log << j.dump() << '\n';
    }
  }
  echo_resolved_config(cfg);
  json out;
  out["steps"] = result.last.step;
  out["best_val_mrr"] = result.best.best_val_mrr;
  out["checkpoint"] = (fs::path(cfg.output_dir) / "best.ckpt").string();
  std::cout << out.dump(2) << std::endl;
  return kExitOk;
}

int cmd_eval(const CommonFlags& flags, const std::string& checkpoint_path,
             const std::string& partition, bool by_category, const std::string& out_path) {
  gana::Checkpoint ckpt = gana::load_checkpoint(checkpoint_path);
  gana::RunConfig cfg = load_run_config(flags);
  gana::TrainConfig tc = ckpt.config;
  if (flags.seed) tc.seed = *flags.seed;
  if (flags.shots) tc.K = *flags.shots;
  auto [graph, split] = load_data_for(cfg);
  const gana::NeighborIndex index = gana::build_neighbor_index(
      graph.background_triples, graph.num_entities(),
      [&graph](gana::RelationId r) { return graph.inverse_of(r); }, tc.max_neighbors,
      gana::derive_seed(tc.seed, 0x6e6272ULL));
  const gana::Partition part = gana::partition_from_string(partition);
  gana::RankingReport report =
      by_category ? gana::evaluate_by_category(ckpt.best_params, graph, split, ckpt.embeddings,
                                               index, part, tc)
                  : gana::evaluate(ckpt.best_params, graph, split, ckpt.embeddings, index, part, tc);
  json j = gana::report_to_json(report, graph);
  if (!out_path.empty()) {
    std::ofstream out(out_path);
    out << j.dump(2) << '\n';
  }
  std::cout << j.dump(2) << std::endl;
  return kExitOk;
}

int cmd_inspect_attention(const CommonFlags& flags, const std::string& checkpoint_path,
                          const std::string& relation, int top_k, int bottom_k) {
  gana::Checkpoint ckpt = gana::load_checkpoint(checkpoint_path);
  gana::RunConfig cfg = load_run_config(flags);
  gana::TrainConfig tc = ckpt.config;
  if (flags.seed) tc.seed = *flags.seed;
  if (flags.shots) tc.K = *flags.shots;
  auto [graph, split] = load_data_for(cfg);
  const gana::RelationId rel = graph.relation_id(relation);
  if (!split.task_triples.count(rel))
    throw gana::ProtocolError("relation '" + relation + "' is not a few-shot task relation");
  const gana::NeighborIndex index = gana::build_neighbor_index(
      graph.background_triples, graph.num_entities(),
      [&graph](gana::RelationId r) { return graph.inverse_of(r); }, tc.max_neighbors,
      gana::derive_seed(tc.seed, 0x6e6272ULL));
  gana::Episode ep =
      gana::evaluation_episode(split, rel, relation, tc.K, tc.seed, tc.eval_sample_support);
  json j = gana::attention_report(ep, ckpt.best_params, graph, ckpt.embeddings, index, tc, top_k,
                                  bottom_k);
  std::cout << j.dump(2) << std::endl;
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Few-shot knowledge-graph completion with a gated attentive neighbor aggregator"};
  app.require_subcommand(1);

  CommonFlags flags;

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic planted-pattern dataset");
  std::string synth_out;
  int synth_entities = 200, synth_bg = 20, synth_tasks = 5;
  double synth_strength = 0.9;
  std::uint64_t synth_seed = 1;
  int synth_pool = 50, synth_heads = 0, synth_tails = 0;
  bool synth_n1 = false;
  synth->add_option("--out", synth_out, "Output dataset directory")->required();
  synth->add_option("--entities", synth_entities, "Number of entities");
  synth->add_option("--background-relations", synth_bg, "Number of background relations");
  synth->add_option("--task-relations", synth_tasks, "Number of few-shot task relations");
  synth->add_option("--pattern-strength", synth_strength, "Planted-pattern strength in [0,1]");
  synth->add_option("--seed", synth_seed, "Generator seed");
  synth->add_option("--pool-size", synth_pool, "Candidate pool size");
  synth->add_option("--heads", synth_heads, "Heads per relation (0 = auto)");
  synth->add_option("--tails", synth_tails, "Tails per relation (0 = auto)");
  synth->add_flag("--plant-n1", synth_n1, "Give the first task relation a single tail");

  auto add_common = [&](CLI::App* cmd, bool with_data = true) {
    cmd->add_option("--config", flags.config_path, "Run-configuration JSON file");
    if (with_data) cmd->add_option("--data", flags.data_dir, "Dataset directory");
    cmd->add_option("--seed", flags.seed, "Seed override");
    cmd->add_option("--shots", flags.shots, "Few-shot size K")->check(CLI::IsMember({1, 3, 5}));
    cmd->add_option("--workers", flags.workers, "Worker threads for batch episodes");
    cmd->add_option("--ablation", flags.ablations, "Ablation flags")
        ->check(CLI::IsMember({"no_gate", "no_gana", "no_mtransh"}));
  };

  auto* pretrain = app.add_subcommand("pretrain", "TransE-pretrain background embeddings");
  add_common(pretrain);

  auto* train = app.add_subcommand("train", "Episodic meta-training with early stopping");
  std::string resume_path;
  add_common(train);
  train->add_option("--resume", resume_path, "Checkpoint to resume from");

  auto* eval = app.add_subcommand("eval", "Filtered-ranking evaluation of a checkpoint");
  std::string eval_ckpt, eval_partition = "test", eval_out;
  bool eval_by_category = false;
  add_common(eval);
  eval->add_option("--checkpoint", eval_ckpt, "Checkpoint file")->required();
  eval->add_option("--partition", eval_partition, "valid or test")
      ->check(CLI::IsMember({"valid", "test"}));
  eval->add_flag("--by-category", eval_by_category, "Report per relation category");
  eval->add_option("--out", eval_out, "Write the report JSON here as well");

  auto* inspect = app.add_subcommand("inspect-attention", "Dump neighbor attention weights");
  std::string insp_ckpt, insp_relation;
  int insp_top = 3, insp_bottom = 2;
  add_common(inspect);
  inspect->add_option("--checkpoint", insp_ckpt, "Checkpoint file")->required();
  inspect->add_option("--relation", insp_relation, "Few-shot relation name")->required();
  inspect->add_option("--top-k", insp_top, "Largest-weight neighbors to select");
  inspect->add_option("--bottom-k", insp_bottom, "Smallest-weight neighbors to select");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (synth->parsed())
      return cmd_synth(synth_out, synth_entities, synth_bg, synth_tasks, synth_strength,
                       synth_seed, synth_pool, synth_heads, synth_tails, synth_n1);
    if (pretrain->parsed()) return cmd_pretrain(flags);
    if (train->parsed()) return cmd_train(flags, resume_path);
    if (eval->parsed())
      return cmd_eval(flags, eval_ckpt, eval_partition, eval_by_category, eval_out);
    if (inspect->parsed())
      return cmd_inspect_attention(flags, insp_ckpt, insp_relation, insp_top, insp_bottom);
  } catch (const gana::ConfigError& e) {
    std::cerr << "config error: " << e.what() << std::endl;
    return kExitUsage;
  } catch (const gana::LoadError& e) {
    std::cerr << "load error: " << e.what() << std::endl;
    return kExitUsage;
  } catch (const gana::SchemaError& e) {
    std::cerr << "schema error: " << e.what() << std::endl;
    return kExitUsage;
  } catch (const gana::Error& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return kExitRuntime;
  }
  return kExitUsage;
}
