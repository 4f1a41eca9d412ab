#include "tsnmt/config.hpp"

#include <openssl/evp.h>

#include <fstream>
#include <iterator>
#include <set>
#include <sstream>

#include <json.hpp>

#include "tsnmt/errors.hpp"

namespace tsnmt {

using nlohmann::json;
using ojson = nlohmann::ordered_json;

namespace {

// Reads members of one JSON object and rejects the ones nobody asked for.
class Section {
 public:
  Section(const json& parent, const std::string& name) : name_(name) {
    if (!parent.contains(name)) return;
    obj_ = &parent.at(name);
    if (!obj_->is_object()) throw ConfigError("config: '" + name + "' must be an object");
  }

  template <typename T>
  void get(const std::string& key, T& out) {
    seen_.insert(key);
    if (!obj_ || !obj_->contains(key)) return;
    try {
      out = obj_->at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError("config: " + name_ + "." + key + ": " + e.what());
    }
  }

  const json* object() const { return obj_; }

  void done() const {
    if (!obj_) return;
    for (const auto& [k, v] : obj_->items()) {
      if (!seen_.count(k)) throw ConfigError("config: unknown key " + name_ + "." + k);
    }
  }

 private:
  std::string name_;
  const json* obj_ = nullptr;
  std::set<std::string> seen_;
};

}  // namespace

std::string ExperimentConfig::to_json() const {
  ojson j;
  const auto& g = generator;
  j["generator"] = {{"seed", g.seed},           {"xz_pairs", g.xz_pairs},     {"zy_pairs", g.zy_pairs},
                    {"dev_pairs", g.dev_pairs}, {"test_pairs", g.test_pairs}, {"latent_vocab", g.latent_vocab},
                    {"surface_vocab", g.surface_vocab}, {"min_len", g.min_len}, {"max_len", g.max_len},
                    {"reorder_window", g.reorder_window}};
  j["model"] = {{"embed_dim", model.embed_dim}, {"hidden_dim", model.hidden_dim},
                {"attention_dim", model.attention_dim}};
  j["method"] = std::string(method_name(train.method));
  j["teaching"] = {{"beam_k", train.teaching.beam_k}, {"kbest_k", train.teaching.kbest_k},
                   {"kbest_alpha", train.teaching.kbest_alpha}};
  j["optimizer"] = {{"lr", train.adam.lr}, {"beta1", train.adam.beta1}, {"beta2", train.adam.beta2},
                    {"eps", train.adam.eps}, {"clip_norm", train.adam.clip_norm}};
  const auto& s = train.schedule;
  j["schedule"] = {{"epochs", s.epochs}, {"batch_size", s.batch_size}, {"eval_interval", s.eval_interval},
                   {"checkpoint_interval", s.checkpoint_interval}, {"max_updates", s.max_updates}};
  j["seeds"] = {{"init", train.seeds.init}, {"shuffle", train.seeds.shuffle}, {"sampling", train.seeds.sampling}};
  j["eval"] = {{"bleu", train.eval.bleu}, {"bleu_beam", train.eval.bleu_beam}, {"max_dev", train.eval.max_dev},
               {"kl", train.eval.kl}};
  ojson freeze = ojson::object();
  for (const auto& [k, v] : train.freeze.to_map()) freeze[k] = v;
  j["freeze"] = freeze;
  j["init_from_teacher"] = init_from_teacher;
  j["cache_teacher"] = train.cache_teacher;
  j["run_id"] = train.run_id;
  const auto& p = paths;
  j["paths"] = {{"train_src", p.train_src}, {"train_tgt", p.train_tgt}, {"dev_src", p.dev_src},
                {"dev_tgt", p.dev_tgt},     {"dev_kl_src", p.dev_kl_src}, {"dev_kl_tgt", p.dev_kl_tgt},
                {"src_vocab", p.src_vocab}, {"tgt_vocab", p.tgt_vocab}, {"pivot_vocab", p.pivot_vocab},
                {"teacher", p.teacher},
                {"init", p.init},           {"out", p.out}};
  return j.dump(2);
}

ExperimentConfig ExperimentConfig::from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  if (doc.contains("config") && doc.contains("command")) doc = json(doc.at("config"));

  ExperimentConfig c;
  static const std::set<std::string> top = {"generator", "model", "method", "teaching", "optimizer", "schedule",
                                            "seeds", "eval", "freeze", "init_from_teacher", "cache_teacher",
                                            "run_id", "paths"};
  for (const auto& [k, v] : doc.items()) {
    if (!top.count(k)) throw ConfigError("config: unknown key " + k);
  }

  Section g(doc, "generator");
  g.get("seed", c.generator.seed);
  g.get("xz_pairs", c.generator.xz_pairs);
  g.get("zy_pairs", c.generator.zy_pairs);
  g.get("dev_pairs", c.generator.dev_pairs);
  g.get("test_pairs", c.generator.test_pairs);
  g.get("latent_vocab", c.generator.latent_vocab);
  g.get("surface_vocab", c.generator.surface_vocab);
  g.get("min_len", c.generator.min_len);
  g.get("max_len", c.generator.max_len);
  g.get("reorder_window", c.generator.reorder_window);
  g.done();

  Section m(doc, "model");
  m.get("embed_dim", c.model.embed_dim);
  m.get("hidden_dim", c.model.hidden_dim);
  m.get("attention_dim", c.model.attention_dim);
  m.done();

  if (doc.contains("method")) {
    const std::string name = doc.at("method").is_string() ? doc.at("method").get<std::string>() : "";
    auto method = parse_method(name);
    if (!method) throw ConfigError("config: unknown method '" + name + "'");
    c.train.method = *method;
  }

  Section t(doc, "teaching");
  t.get("beam_k", c.train.teaching.beam_k);
  t.get("kbest_k", c.train.teaching.kbest_k);
  t.get("kbest_alpha", c.train.teaching.kbest_alpha);
  t.done();

  Section o(doc, "optimizer");
  o.get("lr", c.train.adam.lr);
  o.get("beta1", c.train.adam.beta1);
  o.get("beta2", c.train.adam.beta2);
  o.get("eps", c.train.adam.eps);
  o.get("clip_norm", c.train.adam.clip_norm);
  o.done();

  Section s(doc, "schedule");
  s.get("epochs", c.train.schedule.epochs);
  s.get("batch_size", c.train.schedule.batch_size);
  s.get("eval_interval", c.train.schedule.eval_interval);
  s.get("checkpoint_interval", c.train.schedule.checkpoint_interval);
  s.get("max_updates", c.train.schedule.max_updates);
  s.done();

  Section seeds(doc, "seeds");
  seeds.get("init", c.train.seeds.init);
  seeds.get("shuffle", c.train.seeds.shuffle);
  seeds.get("sampling", c.train.seeds.sampling);
  seeds.done();

  Section e(doc, "eval");
  e.get("bleu", c.train.eval.bleu);
  e.get("bleu_beam", c.train.eval.bleu_beam);
  e.get("max_dev", c.train.eval.max_dev);
  e.get("kl", c.train.eval.kl);
  e.done();

  if (doc.contains("freeze")) {
    c.freeze_given = true;
    try {
      c.train.freeze = FreezePlan::from_map(doc.at("freeze").get<std::map<std::string, bool>>());
    } catch (const json::exception& ex) {
      throw ConfigError(std::string("config: freeze must map group names to booleans: ") + ex.what());
    }
  }
  auto flag = [&](const char* key, bool& out) {
    if (!doc.contains(key)) return;
    if (!doc.at(key).is_boolean()) throw ConfigError(std::string("config: ") + key + " must be a boolean");
    out = doc.at(key).get<bool>();
  };
  flag("init_from_teacher", c.init_from_teacher);
  flag("cache_teacher", c.train.cache_teacher);
  if (doc.contains("run_id")) c.train.run_id = doc.at("run_id").get<std::string>();

  Section p(doc, "paths");
  p.get("train_src", c.paths.train_src);
  p.get("train_tgt", c.paths.train_tgt);
  p.get("dev_src", c.paths.dev_src);
  p.get("dev_tgt", c.paths.dev_tgt);
  p.get("dev_kl_src", c.paths.dev_kl_src);
  p.get("dev_kl_tgt", c.paths.dev_kl_tgt);
  p.get("src_vocab", c.paths.src_vocab);
  p.get("tgt_vocab", c.paths.tgt_vocab);
  p.get("pivot_vocab", c.paths.pivot_vocab);
  p.get("teacher", c.paths.teacher);
  p.get("init", c.paths.init);
  p.get("out", c.paths.out);
  p.done();
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof buf);
    if (in.gcount() > 0) EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(in.gcount()));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, digest, &len);
  EVP_MD_CTX_free(ctx);
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 15];
  }
  return out;
}

}  // namespace tsnmt
