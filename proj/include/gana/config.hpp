#pragma once

#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "gana/core.hpp"

namespace gana {

enum class Ablation { NoGate, NoGana, NoMTransH };

inline std::string to_string(Ablation a) {
  switch (a) {
    case Ablation::NoGate: return "no_gate";
    case Ablation::NoGana: return "no_gana";
    case Ablation::NoMTransH: return "no_mtransh";
  }
  return "no_gate";
}

inline Ablation ablation_from_string(const std::string& s) {
  if (s == "no_gate") return Ablation::NoGate;
  if (s == "no_gana") return Ablation::NoGana;
  if (s == "no_mtransh") return Ablation::NoMTransH;
  throw ConfigError("unknown ablation flag: " + s);
}

struct TrainConfig {
  int d = 100;
  int K = 5;
  int query_size = 0;  // 0 = same as K
  int batch_tasks = 64;
  double l_r = 0.001;
  double l_p = 0.001;
  double outer_lr = 0.001;
  double gamma = 1.0;
  int max_neighbors = 50;
  Norm norm = Norm::L2;
  int eval_every = 1000;
  int patience = 10;
  int max_steps = 0;  // 0 = until early stop
  std::uint64_t seed = 1;
  std::set<Ablation> ablation;
  bool finetune_embeddings = false;
  bool second_order = false;
  bool shuffle_support = false;
  bool unit_norm = true;
  int hid1 = 0;  // 0 = 2d
  int hid2 = 0;  // 0 = d
  Activation fuse_activation = Activation::Relu;
  double category_threshold = 1.5;
  std::string optimizer = "sgd";  // sgd | adam
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double grad_clip = 0.0;  // 0 = off
  int workers = 1;
  bool eval_sample_support = false;  // default: first K triples in file order
  int pretrain_epochs = 200;
  double pretrain_lr = 0.01;
  double pretrain_gamma = 1.0;

  int resolved_query_size() const { return query_size > 0 ? query_size : K; }
  int resolved_hid1() const { return hid1 > 0 ? hid1 : 2 * d; }
  int resolved_hid2() const { return hid2 > 0 ? hid2 : d; }
  bool has(Ablation a) const { return ablation.count(a) > 0; }
  bool use_projection() const { return !has(Ablation::NoMTransH); }

  void validate() const {
    if (d < 1) throw ConfigError("d must be >= 1");
    if (K < 1) throw ConfigError("K must be >= 1");
    if (batch_tasks < 1) throw ConfigError("batch_tasks must be >= 1");
    // Zero rates are legal: they freeze the corresponding update, which the
    // no-step diagnostics rely on.
    if (l_r < 0 || l_p < 0 || outer_lr < 0) throw ConfigError("learning rates must be >= 0");
    if (gamma <= 0) throw ConfigError("gamma must be > 0");
    if (max_neighbors < 1) throw ConfigError("max_neighbors must be >= 1");
    if (eval_every < 1) throw ConfigError("eval_every must be >= 1");
    if (patience < 1) throw ConfigError("patience must be >= 1");
    if (workers < 1) throw ConfigError("workers must be >= 1");
    if (optimizer != "sgd" && optimizer != "adam")
      throw ConfigError("optimizer must be 'sgd' or 'adam'");
    if (has(Ablation::NoGana) && has(Ablation::NoGate))
      throw ConfigError("contradictory ablation flags: no_gana already removes the gate");
  }
};

inline void to_json(nlohmann::json& j, const TrainConfig& c) {
  std::vector<std::string> ablations;
  for (Ablation a : c.ablation) ablations.push_back(to_string(a));
  j = nlohmann::json{{"d", c.d},
                     {"K", c.K},
                     {"query_size", c.query_size},
                     {"batch_tasks", c.batch_tasks},
                     {"l_r", c.l_r},
                     {"l_p", c.l_p},
                     {"outer_lr", c.outer_lr},
                     {"gamma", c.gamma},
                     {"max_neighbors", c.max_neighbors},
                     {"norm", to_string(c.norm)},
                     {"eval_every", c.eval_every},
                     {"patience", c.patience},
                     {"max_steps", c.max_steps},
                     {"seed", c.seed},
                     {"ablation", ablations},
                     {"finetune_embeddings", c.finetune_embeddings},
                     {"second_order", c.second_order},
                     {"shuffle_support", c.shuffle_support},
                     {"unit_norm", c.unit_norm},
                     {"hid1", c.hid1},
                     {"hid2", c.hid2},
                     {"fuse_activation", to_string(c.fuse_activation)},
                     {"category_threshold", c.category_threshold},
                     {"optimizer", c.optimizer},
                     {"adam_beta1", c.adam_beta1},
                     {"adam_beta2", c.adam_beta2},
                     {"adam_eps", c.adam_eps},
                     {"grad_clip", c.grad_clip},
                     {"workers", c.workers},
                     {"eval_sample_support", c.eval_sample_support},
                     {"pretrain_epochs", c.pretrain_epochs},
                     {"pretrain_lr", c.pretrain_lr},
                     {"pretrain_gamma", c.pretrain_gamma}};
}

inline void from_json(const nlohmann::json& j, TrainConfig& c) {
  static const std::set<std::string> known = {
      "d",          "K",           "query_size", "batch_tasks", "l_r",
      "l_p",        "outer_lr",    "gamma",      "max_neighbors", "norm",
      "eval_every", "patience",    "max_steps",  "seed",        "ablation",
      "finetune_embeddings", "second_order", "shuffle_support", "unit_norm",
      "hid1",       "hid2",        "fuse_activation", "category_threshold",
      "optimizer",  "adam_beta1",  "adam_beta2", "adam_eps",    "grad_clip",
      "workers",    "eval_sample_support", "pretrain_epochs", "pretrain_lr",
      "pretrain_gamma"};
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!known.count(it.key())) throw ConfigError("unknown config key: " + it.key());

  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) j.at(key).get_to(field);
  };
  get("d", c.d);
  get("K", c.K);
  get("query_size", c.query_size);
  get("batch_tasks", c.batch_tasks);
  get("l_r", c.l_r);
  get("l_p", c.l_p);
  get("outer_lr", c.outer_lr);
  get("gamma", c.gamma);
  get("max_neighbors", c.max_neighbors);
  if (j.contains("norm")) c.norm = norm_from_string(j.at("norm").get<std::string>());
  get("eval_every", c.eval_every);
  get("patience", c.patience);
  get("max_steps", c.max_steps);
  get("seed", c.seed);
  if (j.contains("ablation")) {
    c.ablation.clear();
    for (const auto& a : j.at("ablation")) c.ablation.insert(ablation_from_string(a.get<std::string>()));
  }
  get("finetune_embeddings", c.finetune_embeddings);
  get("second_order", c.second_order);
  get("shuffle_support", c.shuffle_support);
  get("unit_norm", c.unit_norm);
  get("hid1", c.hid1);
  get("hid2", c.hid2);
  if (j.contains("fuse_activation"))
    c.fuse_activation = activation_from_string(j.at("fuse_activation").get<std::string>());
  get("category_threshold", c.category_threshold);
  get("optimizer", c.optimizer);
  get("adam_beta1", c.adam_beta1);
  get("adam_beta2", c.adam_beta2);
  get("adam_eps", c.adam_eps);
  get("grad_clip", c.grad_clip);
  get("workers", c.workers);
  get("eval_sample_support", c.eval_sample_support);
  get("pretrain_epochs", c.pretrain_epochs);
  get("pretrain_lr", c.pretrain_lr);
  get("pretrain_gamma", c.pretrain_gamma);
}

// The run-configuration file wraps TrainConfig with dataset paths and the
// output directory. Unknown keys are rejected so typos cannot silently fall
// back to defaults.
struct RunConfig {
  TrainConfig train;
  std::string dataset_dir;
  std::string embeddings_path;  // output of the pretrain command
  std::string output_dir;

  void validate() const {
    train.validate();
    if (train.K != 1 && train.K != 3 && train.K != 5)
      throw ConfigError("K must be one of {1, 3, 5}");
  }
};

inline void to_json(nlohmann::json& j, const RunConfig& c) {
  nlohmann::json train;
  to_json(train, c.train);
  j = nlohmann::json{{"train", train},
                     {"dataset_dir", c.dataset_dir},
                     {"embeddings_path", c.embeddings_path},
                     {"output_dir", c.output_dir}};
}

inline void from_json(const nlohmann::json& j, RunConfig& c) {
  static const std::set<std::string> known = {"train", "dataset_dir", "embeddings_path",
                                              "output_dir"};
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!known.count(it.key())) throw ConfigError("unknown config key: " + it.key());
  if (j.contains("train")) from_json(j.at("train"), c.train);
  if (j.contains("dataset_dir")) j.at("dataset_dir").get_to(c.dataset_dir);
  if (j.contains("embeddings_path")) j.at("embeddings_path").get_to(c.embeddings_path);
  if (j.contains("output_dir")) j.at("output_dir").get_to(c.output_dir);
}

}  // namespace gana
