#pragma once

#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "gana/config.hpp"
#include "gana/kg.hpp"
#include "gana/model.hpp"

namespace gana {

static_assert(std::endian::native == std::endian::little,
              "tensor container assumes a little-endian host");

// Single-file tensor container: 8-byte magic, u64 manifest length, JSON
// manifest, then a blob of raw 64-bit little-endian floats. The manifest
// names every tensor with its shape and byte offset into the blob.
namespace tensorfile {

constexpr char kMagic[8] = {'G', 'A', 'N', 'A', 'T', 'N', 'S', '1'};

struct Writer {
  nlohmann::json meta;
  std::string version;
  nlohmann::json tensors = nlohmann::json::array();
  std::vector<double> blob;

  void add(const std::string& name, const Mat& m) {
    tensors.push_back({{"name", name},
                       {"rows", m.rows()},
                       {"cols", m.cols()},
                       {"offset", blob.size() * sizeof(double)}});
    const std::size_t base = blob.size();
    blob.resize(base + static_cast<std::size_t>(m.size()));
    // column-major, matching Eigen's storage
    std::memcpy(blob.data() + base, m.data(), static_cast<std::size_t>(m.size()) * sizeof(double));
  }
  void add(const std::string& name, const Vec& v) {
    Mat m = v;
    add(name, m);
  }
  void add_scalar(const std::string& name, double x) {
    Mat m(1, 1);
    m(0, 0) = x;
    add(name, m);
  }

  void write(const std::string& path) const {
    nlohmann::json manifest;
    manifest["version"] = version;
    manifest["meta"] = meta;
    manifest["tensors"] = tensors;
    const std::string mstr = manifest.dump();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot write " + path);
    out.write(kMagic, sizeof(kMagic));
    const std::uint64_t msize = mstr.size();
    out.write(reinterpret_cast<const char*>(&msize), sizeof(msize));
    out.write(mstr.data(), static_cast<std::streamsize>(mstr.size()));
    out.write(reinterpret_cast<const char*>(blob.data()),
              static_cast<std::streamsize>(blob.size() * sizeof(double)));
    if (!out) throw CheckpointError("short write to " + path);
  }
};

struct Reader {
  nlohmann::json meta;
  std::string version;
  std::map<std::string, Mat> tensors;

  static Reader read(const std::string& path, const std::string& expected_version) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError("cannot open " + path);
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(magic)) != 0)
      throw IntegrityError(path + ": bad magic; not a tensor container");
    std::uint64_t msize = 0;
    in.read(reinterpret_cast<char*>(&msize), sizeof(msize));
    if (!in) throw IntegrityError(path + ": truncated header");
    std::string mstr(msize, '\0');
    in.read(mstr.data(), static_cast<std::streamsize>(msize));
    if (!in) throw IntegrityError(path + ": truncated manifest");
    nlohmann::json manifest;
    try {
      manifest = nlohmann::json::parse(mstr);
    } catch (const nlohmann::json::exception& e) {
      throw IntegrityError(path + ": corrupt manifest: " + e.what());
    }
    Reader r;
    r.version = manifest.at("version").get<std::string>();
    if (r.version != expected_version)
      throw CheckpointError(path + ": version mismatch: found '" + r.version + "', expected '" +
                            expected_version + "'");
    r.meta = manifest.at("meta");
    std::vector<char> blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    for (const auto& t : manifest.at("tensors")) {
      const std::string name = t.at("name").get<std::string>();
      const Eigen::Index rows = t.at("rows").get<Eigen::Index>();
      const Eigen::Index cols = t.at("cols").get<Eigen::Index>();
      const std::uint64_t offset = t.at("offset").get<std::uint64_t>();
      const std::uint64_t bytes = static_cast<std::uint64_t>(rows) * static_cast<std::uint64_t>(cols) * sizeof(double);
      if (offset + bytes > blob.size())
        throw IntegrityError(path + ": tensor '" + name + "' extends past end of file");
      Mat m(rows, cols);
      std::memcpy(m.data(), blob.data() + offset, bytes);
      r.tensors.emplace(name, std::move(m));
    }
    return r;
  }

  const Mat& tensor(const std::string& name) const {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw IntegrityError("missing tensor: " + name);
    return it->second;
  }
  Vec vector(const std::string& name) const {
    const Mat& m = tensor(name);
    if (m.cols() != 1) throw IntegrityError("tensor '" + name + "' is not a vector");
    return m.col(0);
  }
  double scalar(const std::string& name) const {
    const Mat& m = tensor(name);
    if (m.size() != 1) throw IntegrityError("tensor '" + name + "' is not a scalar");
    return m(0, 0);
  }
};

}  // namespace tensorfile

constexpr const char* kCheckpointVersion = "gana-checkpoint-v1";
constexpr const char* kEmbeddingsVersion = "gana-embeddings-v1";

// Adam moment estimates, stored as full parameter mirrors.
struct OptimizerState {
  bool adam = false;
  long t = 0;
  ModelParams m;
  ModelParams v;
};

struct Checkpoint {
  TrainConfig config;
  ModelParams params;       // current state, continues training
  ModelParams best_params;  // parameters at the best validation MRR
  EmbeddingTable embeddings;
  OptimizerState opt;
  long step = 0;
  double best_val_mrr = -1.0;  // -1 until the first evaluation
  std::string episode_rng_state;
};

namespace detail {

template <typename Fn>
void for_each_param_tensor(const ModelParams& p, Fn fn) {
  fn("agg/W1", p.agg.W1);
  fn("agg/u1", Mat(p.agg.u1));
  fn("agg/u2", Mat(p.agg.u2));
  fn("agg/b_g", Mat(Mat::Constant(1, 1, p.agg.b_g)));
  fn("agg/W2", p.agg.W2);
  fn("agg/b", Mat(p.agg.b));
  const char* dir_names[2] = {"fwd", "bwd"};
  for (int l = 0; l < 2; ++l)
    for (int dir = 0; dir < 2; ++dir) {
      const std::string base = "lstm/l" + std::to_string(l) + "/" + dir_names[dir] + "/";
      fn(base + "Wx", p.lstm.cells[l][dir].Wx);
      fn(base + "Wh", p.lstm.cells[l][dir].Wh);
      fn(base + "bias", Mat(p.lstm.cells[l][dir].bias));
    }
  fn("attn/W3", p.attn.W3);
  fn("attn/u3", Mat(p.attn.u3));
  fn("attn/b_a", Mat(Mat::Constant(1, 1, p.attn.b_a)));
  fn("P_star", Mat(p.P_star));
}

inline void add_params(tensorfile::Writer& w, const std::string& prefix, const ModelParams& p) {
  for_each_param_tensor(p, [&](const std::string& name, const Mat& m) { w.add(prefix + name, m); });
}

inline ModelParams read_params(const tensorfile::Reader& r, const std::string& prefix, int hid1,
                               int hid2) {
  ModelParams p;
  p.agg.W1 = r.tensor(prefix + "agg/W1");
  p.agg.u1 = r.vector(prefix + "agg/u1");
  p.agg.u2 = r.vector(prefix + "agg/u2");
  p.agg.b_g = r.scalar(prefix + "agg/b_g");
  p.agg.W2 = r.tensor(prefix + "agg/W2");
  p.agg.b = r.vector(prefix + "agg/b");
  const char* dir_names[2] = {"fwd", "bwd"};
  p.lstm.hid1 = hid1;
  p.lstm.hid2 = hid2;
  for (int l = 0; l < 2; ++l)
    for (int dir = 0; dir < 2; ++dir) {
      const std::string base = "lstm/l" + std::to_string(l) + "/" + dir_names[dir] + "/";
      p.lstm.cells[l][dir].Wx = r.tensor(prefix + base + "Wx");
      p.lstm.cells[l][dir].Wh = r.tensor(prefix + base + "Wh");
      p.lstm.cells[l][dir].bias = r.vector(prefix + base + "bias");
    }
  p.attn.W3 = r.tensor(prefix + "attn/W3");
  p.attn.u3 = r.vector(prefix + "attn/u3");
  p.attn.b_a = r.scalar(prefix + "attn/b_a");
  p.P_star = r.vector(prefix + "P_star");
  return p;
}

}  // namespace detail

inline void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  tensorfile::Writer w;
  w.version = kCheckpointVersion;
  nlohmann::json cfg;
  to_json(cfg, ckpt.config);
  w.meta["config"] = cfg;
  w.meta["step"] = ckpt.step;
  w.meta["best_val_mrr"] = ckpt.best_val_mrr;
  w.meta["episode_rng"] = ckpt.episode_rng_state;
  w.meta["optimizer"] = ckpt.opt.adam ? "adam" : "sgd";
  w.meta["opt_t"] = ckpt.opt.t;
  w.meta["d"] = ckpt.embeddings.d;
  w.add("emb/entity", ckpt.embeddings.entity_vectors);
  w.add("emb/relation", ckpt.embeddings.relation_vectors);
  detail::add_params(w, "cur/", ckpt.params);
  detail::add_params(w, "best/", ckpt.best_params);
  if (ckpt.opt.adam) {
    detail::add_params(w, "opt/m/", ckpt.opt.m);
    detail::add_params(w, "opt/v/", ckpt.opt.v);
  }
  w.write(path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  tensorfile::Reader r = tensorfile::Reader::read(path, kCheckpointVersion);
  Checkpoint ckpt;
  from_json(r.meta.at("config"), ckpt.config);
  ckpt.step = r.meta.at("step").get<long>();
  ckpt.best_val_mrr = r.meta.at("best_val_mrr").get<double>();
  ckpt.episode_rng_state = r.meta.at("episode_rng").get<std::string>();
  ckpt.embeddings.entity_vectors = r.tensor("emb/entity");
  ckpt.embeddings.relation_vectors = r.tensor("emb/relation");
  ckpt.embeddings.d = r.meta.at("d").get<int>();
  const int hid1 = ckpt.config.resolved_hid1();
  const int hid2 = ckpt.config.resolved_hid2();
  ckpt.params = detail::read_params(r, "cur/", hid1, hid2);
  ckpt.best_params = detail::read_params(r, "best/", hid1, hid2);
  ckpt.opt.adam = r.meta.at("optimizer").get<std::string>() == "adam";
  ckpt.opt.t = r.meta.at("opt_t").get<long>();
  if (ckpt.opt.adam) {
    ckpt.opt.m = detail::read_params(r, "opt/m/", hid1, hid2);
    ckpt.opt.v = detail::read_params(r, "opt/v/", hid1, hid2);
  }
  return ckpt;
}

// Embedding tables in the same container format (the pretrain command's
// output).
inline void save_embeddings(const EmbeddingTable& emb, const std::string& path) {
  tensorfile::Writer w;
  w.version = kEmbeddingsVersion;
  w.meta["d"] = emb.d;
  w.meta["n_entities"] = emb.entity_vectors.cols();
  w.meta["n_relations"] = emb.relation_vectors.cols();
  w.add("emb/entity", emb.entity_vectors);
  w.add("emb/relation", emb.relation_vectors);
  w.write(path);
}

inline EmbeddingTable load_embeddings(const std::string& path) {
  tensorfile::Reader r = tensorfile::Reader::read(path, kEmbeddingsVersion);
  EmbeddingTable emb;
  emb.d = r.meta.at("d").get<int>();
  emb.entity_vectors = r.tensor("emb/entity");
  emb.relation_vectors = r.tensor("emb/relation");
  return emb;
}

}  // namespace gana
