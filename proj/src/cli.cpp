#include "tsnmt/cli.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "tsnmt/config.hpp"
#include "tsnmt/corpus.hpp"
#include "tsnmt/errors.hpp"
#include "tsnmt/evaluation.hpp"
#include "tsnmt/metrics.hpp"
#include "tsnmt/model.hpp"
#include "tsnmt/objectives.hpp"
#include "tsnmt/pivot.hpp"
#include "tsnmt/trainer.hpp"
#include "tsnmt/transfer.hpp"

namespace tsnmt {

namespace {

using nlohmann::ordered_json;
namespace fs = std::filesystem;

class UsageError : public Error {
 public:
  using Error::Error;
};

template <typename T>
void apply(const std::optional<T>& flag, T& field) {
  if (flag) field = *flag;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

std::string join(const std::vector<std::string>& v, const char* sep) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? sep : "") + v[i];
  return s;
}

Method require_method(const std::string& name) {
  auto m = parse_method(name);
  if (!m) throw UsageError("unknown method '" + name + "'; valid methods: " + join(method_names(), ", "));
  return *m;
}

std::vector<TokenSequence> read_encoded(const fs::path& path, const Vocabulary& vocab) {
  std::vector<TokenSequence> out;
  std::size_t line = 0;
  for (const auto& words : read_tokenized_lines(path)) {
    ++line;
    if (words.empty()) throw DataError(path.string() + ": empty input at line " + std::to_string(line));
    out.push_back(vocab.encode(words));
  }
  return out;
}

void check_vocab(const ModelParams& p, std::size_t src, std::size_t tgt, const std::string& what) {
  if (p.config().src_vocab != src || p.config().tgt_vocab != tgt) {
    std::ostringstream msg;
    msg << what << " expects vocabularies of size " << p.config().src_vocab << "/" << p.config().tgt_vocab
        << " but the given vocabulary files have " << src << "/" << tgt;
    throw ConfigError(msg.str());
  }
}

// ---------------------------------------------------------------------------

struct GenFlags {
  std::string config, out = "corpus";
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> xz, zy, dev, test, latent, surface, min_len, max_len, window;
  bool small = false;
};

int cmd_gen_corpus(const GenFlags& f, std::ostream& out) {
  ExperimentConfig cfg = f.config.empty() ? ExperimentConfig{} : ExperimentConfig::load(f.config);
  GeneratorConfig& g = cfg.generator;
  apply(f.seed, g.seed);
  apply(f.xz, g.xz_pairs);
  apply(f.zy, g.zy_pairs);
  apply(f.dev, g.dev_pairs);
  apply(f.test, g.test_pairs);
  apply(f.latent, g.latent_vocab);
  apply(f.surface, g.surface_vocab);
  apply(f.min_len, g.min_len);
  apply(f.max_len, g.max_len);
  apply(f.window, g.reorder_window);
  if (f.small) g = small_source_pivot(g);
  const TrilingualSplit split = generate_trilingual(g);
  const fs::path dir = f.out;
  const auto files = write_split(split, dir);
  ordered_json manifest;
  manifest["command"] = "gen-corpus";
  manifest["config"] = ordered_json::parse(cfg.to_json());
  ordered_json hashes = ordered_json::object();
  for (const auto& name : files) hashes[name] = sha256_file(dir / name);
  manifest["files"] = hashes;
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");
  out << "wrote " << files.size() << " files to " << dir.string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct TrainFlags {
  std::string config;
  std::optional<std::string> method, out, teacher, init, run_id;
  std::optional<std::string> train_src, train_tgt, dev_src, dev_tgt, dev_kl_src, dev_kl_tgt;
  std::optional<std::string> src_vocab, tgt_vocab, pivot_vocab;
  std::optional<std::size_t> epochs, batch_size, eval_interval, checkpoint_interval, max_updates;
  std::optional<std::size_t> bleu_beam, max_dev, beam_k, kbest_k;
  std::optional<double> lr, alpha;
  std::optional<std::uint64_t> seed, shuffle_seed, sampling_seed;
  std::vector<std::string> freeze;
  bool init_from_teacher = false, no_cache = false, eval_kl = false, no_bleu = false, resume = false;
};

void verify_hashes(const std::string& config_path) {
  std::ifstream in(config_path);
  const auto doc = nlohmann::json::parse(in, nullptr, false);
  if (doc.is_discarded() || !doc.contains("corpus_hashes")) return;
  for (const auto& [path, hash] : doc.at("corpus_hashes").items()) {
    if (sha256_file(path) != hash.get<std::string>()) {
      throw DataError("corpus file " + path + " differs from the one recorded in " + config_path);
    }
  }
}

int cmd_train(const TrainFlags& f, std::ostream& out) {
  ExperimentConfig cfg = f.config.empty() ? ExperimentConfig{} : ExperimentConfig::load(f.config);
  if (!f.config.empty()) verify_hashes(f.config);
  if (f.method) cfg.train.method = require_method(*f.method);
  auto& p = cfg.paths;
  apply(f.out, p.out);
  apply(f.teacher, p.teacher);
  apply(f.init, p.init);
  apply(f.train_src, p.train_src);
  apply(f.train_tgt, p.train_tgt);
  apply(f.dev_src, p.dev_src);
  apply(f.dev_tgt, p.dev_tgt);
  apply(f.dev_kl_src, p.dev_kl_src);
  apply(f.dev_kl_tgt, p.dev_kl_tgt);
  apply(f.src_vocab, p.src_vocab);
  apply(f.tgt_vocab, p.tgt_vocab);
  apply(f.pivot_vocab, p.pivot_vocab);
  apply(f.run_id, cfg.train.run_id);
  auto& s = cfg.train.schedule;
  apply(f.epochs, s.epochs);
  apply(f.batch_size, s.batch_size);
  apply(f.eval_interval, s.eval_interval);
  apply(f.checkpoint_interval, s.checkpoint_interval);
  apply(f.max_updates, s.max_updates);
  apply(f.bleu_beam, cfg.train.eval.bleu_beam);
  apply(f.max_dev, cfg.train.eval.max_dev);
  apply(f.beam_k, cfg.train.teaching.beam_k);
  apply(f.kbest_k, cfg.train.teaching.kbest_k);
  apply(f.alpha, cfg.train.teaching.kbest_alpha);
  apply(f.lr, cfg.train.adam.lr);
  apply(f.seed, cfg.train.seeds.init);
  apply(f.shuffle_seed, cfg.train.seeds.shuffle);
  apply(f.sampling_seed, cfg.train.seeds.sampling);
  if (f.init_from_teacher) cfg.init_from_teacher = true;
  if (f.no_cache) cfg.train.cache_teacher = false;
  if (f.eval_kl) cfg.train.eval.kl = true;
  if (f.no_bleu) cfg.train.eval.bleu = false;
  if (!f.freeze.empty()) {
    std::map<std::string, bool> groups = cfg.train.freeze.to_map();
    for (const auto& item : f.freeze) {
      const auto eq = item.find('=');
      const std::string name = item.substr(0, eq);
      const std::string val = eq == std::string::npos ? "true" : item.substr(eq + 1);
      if (val != "true" && val != "false") throw UsageError("--freeze expects group=true|false, got " + item);
      groups[name] = val == "true";
    }
    cfg.train.freeze = FreezePlan::from_map(groups);
  } else if (cfg.init_from_teacher && !cfg.freeze_given) {
    cfg.train.freeze = FreezePlan::transfer_default();
  }

  const Method method = cfg.train.method;
  const bool teaching = is_teaching(method);
  if (p.train_src.empty() || p.train_tgt.empty()) {
    throw ConfigError(teaching ? "method " + std::string(method_name(method)) +
                                     " needs source-pivot training files (train_src, train_tgt)"
                               : "method mle needs (x, y) parallel training files (train_src, train_tgt); "
                                 "for a zero-resource pair use a teaching method");
  }
  std::optional<ModelParams> teacher;
  if (teaching) {
    if (p.teacher.empty()) throw ConfigError("method " + std::string(method_name(method)) + " needs --teacher");
    if (p.tgt_vocab.empty()) throw ConfigError("teaching methods need --tgt-vocab (the teacher's target vocabulary)");
    teacher = ModelParams::load(p.teacher);
  }

  // Vocabularies: source and target of the trained model, plus the pivot side for teaching.
  const auto lines_src = read_tokenized_lines(p.train_src);
  const Vocabulary src_vocab = p.src_vocab.empty() ? build_vocab(lines_src, 100000) : Vocabulary::load(p.src_vocab);
  const Vocabulary tgt_vocab =
      p.tgt_vocab.empty() ? build_vocab(read_tokenized_lines(p.train_tgt), 100000) : Vocabulary::load(p.tgt_vocab);
  Vocabulary pivot_vocab = tgt_vocab;
  if (teaching) {
    pivot_vocab = p.pivot_vocab.empty() ? build_vocab(read_tokenized_lines(p.train_tgt), 100000)
                                        : Vocabulary::load(p.pivot_vocab);
    if (teacher->config().src_vocab != pivot_vocab.size()) {
      throw ConfigError("teacher source vocabulary (" + std::to_string(teacher->config().src_vocab) +
                        ") differs from the pivot vocabulary (" + std::to_string(pivot_vocab.size()) + ")");
    }
  }

  const auto train_pairs = load_parallel(p.train_src, p.train_tgt, src_vocab, pivot_vocab);
  std::vector<SentencePair> dev, dev_kl;
  if (!p.dev_src.empty() && !p.dev_tgt.empty()) dev = load_parallel(p.dev_src, p.dev_tgt, src_vocab, tgt_vocab);
  if (teaching && !p.dev_kl_src.empty() && !p.dev_kl_tgt.empty()) {
    dev_kl = load_parallel(p.dev_kl_src, p.dev_kl_tgt, src_vocab, pivot_vocab);
  }

  ModelConfig mc = cfg.model;
  mc.src_vocab = src_vocab.size();
  mc.tgt_vocab = tgt_vocab.size();
  ModelParams init = p.init.empty() ? ModelParams::random(mc, cfg.train.seeds.init) : ModelParams::load(p.init);
  if (!(init.config() == mc)) throw ConfigError("initial checkpoint does not match the vocabularies and model dims");
  if (teacher) check_teacher_compatible(init, *teacher);
  if (cfg.init_from_teacher) {
    if (!teacher) throw ConfigError("init_from_teacher needs a teacher");
    init = init_from_teacher(init, *teacher);
  }

  const fs::path dir = p.out;
  fs::create_directories(dir);
  src_vocab.save(dir / "vocab.src");
  tgt_vocab.save(dir / "vocab.tgt");

  std::optional<TrainState> resume;
  if (f.resume) {
    if (auto st = latest_state(dir)) resume = TrainState::load(*st);
  }

  ordered_json manifest;
  manifest["command"] = "train";
  manifest["config"] = ordered_json::parse(cfg.to_json());
  ordered_json hashes = ordered_json::object();
  for (const std::string& path : {p.train_src, p.train_tgt, p.dev_src, p.dev_tgt, p.dev_kl_src, p.dev_kl_tgt,
                                  p.src_vocab, p.tgt_vocab, p.pivot_vocab, p.teacher, p.init}) {
    if (!path.empty()) hashes[path] = sha256_file(path);
  }
  manifest["corpus_hashes"] = hashes;
  manifest["seeds"] = {{"init", cfg.train.seeds.init},
                       {"shuffle", cfg.train.seeds.shuffle},
                       {"sampling", cfg.train.seeds.sampling}};
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");

  TrainConfig tc = cfg.train;
  tc.out_dir = dir;
  MetricsWriter metrics(dir / "metrics.jsonl", tc.run_id, std::string(method_name(method)), resume.has_value());
  TrainData data{train_pairs, dev, dev_kl};
  const TrainResult res = train(init, teacher ? &*teacher : nullptr, data, tc, &metrics, resume ? &*resume : nullptr);
  const fs::path final_path = dir / "final.pdst";
  res.params.save(final_path);
  out << final_path.string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct DecodeFlags {
  std::string model, src_vocab, tgt_vocab, input, output;
  std::string pivot_target_model, pivot_vocab, pivot_output, stats;
  std::size_t k = 5;
  bool via_pivot = false;
};

int cmd_decode(const DecodeFlags& f, std::ostream& out, std::ostream& err) {
  if (f.k < 1) throw UsageError("-k must be >= 1");
  const ModelParams first = ModelParams::load(f.model);
  const Vocabulary src = Vocabulary::load(f.src_vocab);
  const Vocabulary tgt = Vocabulary::load(f.tgt_vocab);
  const auto inputs = read_encoded(f.input, src);
  std::vector<std::vector<std::string>> outputs, pivots;
  std::size_t failed = 0;
  const std::uint64_t calls_before = decode_calls();
  const auto start = std::chrono::steady_clock::now();
  if (!f.via_pivot) {
    check_vocab(first, src.size(), tgt.size(), "model");
    for (const auto& x : inputs) outputs.push_back(tgt.decode(direct_decode(first, x, f.k)));
  } else {
    if (f.pivot_target_model.empty() || f.pivot_vocab.empty() || f.pivot_output.empty()) {
      throw UsageError("--via-pivot needs --pivot-target-model, --pivot-vocab and --pivot-output");
    }
    const ModelParams second = ModelParams::load(f.pivot_target_model);
    const Vocabulary piv = Vocabulary::load(f.pivot_vocab);
    check_vocab(first, src.size(), piv.size(), "source->pivot model");
    check_vocab(second, piv.size(), tgt.size(), "pivot->target model");
    PivotChain chain{&first, &second, f.k};
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      const PivotResult r = two_step_decode(chain, inputs[i]);
      if (!r.ok) {
        ++failed;
        err << "line " << i + 1 << ": " << r.diagnostic << "\n";
      }
      pivots.push_back(piv.decode(r.pivot));
      outputs.push_back(tgt.decode(r.target));
    }
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_lines(f.output, outputs);
  if (f.via_pivot) write_lines(f.pivot_output, pivots);
  ordered_json stats;
  stats["mode"] = f.via_pivot ? "via-pivot" : "direct";
  stats["k"] = f.k;
  stats["sentences"] = inputs.size();
  stats["beam_searches"] = decode_calls() - calls_before;
  stats["seconds"] = seconds;
  stats["seconds_per_sentence"] = inputs.empty() ? 0.0 : seconds / static_cast<double>(inputs.size());
  stats["failed"] = failed;
  if (!f.stats.empty()) write_text(f.stats, stats.dump(2) + "\n");
  out << stats.dump() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct VerifyFlags {
  std::string teacher, dev_src, dev_pivot, src_vocab, pivot_vocab, json, metrics, run_id = "verify-kl";
  std::vector<std::string> checkpoints;
  std::size_t k = 5, max_sentences = 0;
  std::uint64_t sampling_seed = 17;
  bool teacher_column = false;
};

int cmd_verify_kl(const VerifyFlags& f, std::ostream& out) {
  if (f.checkpoints.size() < 2) throw UsageError("verify-kl needs at least two --checkpoints");
  const ModelParams teacher = ModelParams::load(f.teacher);
  const Vocabulary src = Vocabulary::load(f.src_vocab);
  const Vocabulary piv = Vocabulary::load(f.pivot_vocab);
  auto pairs = load_parallel(f.dev_src, f.dev_pivot, src, piv);
  if (f.max_sentences && pairs.size() > f.max_sentences) pairs.resize(f.max_sentences);
  check_vocab(teacher, piv.size(), teacher.config().tgt_vocab, "teacher");

  struct Column {
    std::string label;
    ModelParams params;
    bool self = false;  // teacher scored against itself (x = z)
  };
  std::vector<Column> columns;
  for (const auto& c : f.checkpoints) {
    Column col{fs::path(c).filename().string(), ModelParams::load(c), false};
    if (col.params.config().src_vocab != src.size()) {
      throw ConfigError(c + ": source vocabulary size differs from " + f.src_vocab);
    }
    columns.push_back(std::move(col));
  }
  if (f.teacher_column) columns.push_back({"teacher", teacher, true});

  std::vector<SentencePair> self_pairs;
  for (const auto& pr : pairs) self_pairs.push_back({pr.tgt, pr.tgt});
  KlOptions opt;
  opt.beam_k = f.k;
  opt.sampling_seed = f.sampling_seed;
  const std::vector<std::pair<std::string, Approx>> rows = {{"sent", Approx::Greedy},
                                                            {"sent", Approx::Beam},
                                                            {"word", Approx::Greedy},
                                                            {"word", Approx::Beam},
                                                            {"word", Approx::Sampling}};
  std::vector<std::vector<double>> grid(rows.size());
  for (const auto& col : columns) {
    const std::span<const SentencePair> use = col.self ? std::span<const SentencePair>(self_pairs)
                                                       : std::span<const SentencePair>(pairs);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const KlEstimate e = rows[r].first == "sent" ? measure_j_sent(col.params, teacher, use, rows[r].second, opt)
                                                   : measure_j_word(col.params, teacher, use, rows[r].second, opt);
      grid[r].push_back(e.mean);
    }
  }

  ordered_json j;
  j["sentences"] = pairs.size();
  j["k"] = f.k;
  ordered_json cols = ordered_json::array();
  for (const auto& c : columns) cols.push_back(c.label);
  j["checkpoints"] = cols;
  ordered_json table = ordered_json::object();
  for (std::size_t r = 0; r < rows.size(); ++r) {
    table[rows[r].first + "-" + std::string(approx_name(rows[r].second))] = grid[r];
  }
  j["rows"] = table;
  if (!f.json.empty()) write_text(f.json, j.dump(2) + "\n");
  if (!f.metrics.empty()) {
    MetricsWriter w(f.metrics, f.run_id, "verify-kl");
    for (std::size_t c = 0; c < columns.size(); ++c) {
      for (std::size_t r = 0; r < rows.size(); ++r) {
        MetricsRecord rec{f.run_id, c, 0.0, "J_" + rows[r].first + "_" + std::string(approx_name(rows[r].second)),
                          grid[r][c], columns[c].label};
        w.write(rec);
      }
    }
  }

  std::size_t width = 12;
  for (const auto& c : columns) width = std::max(width, c.label.size() + 2);
  out << std::left << std::setw(16) << "estimator";
  for (const auto& c : columns) out << std::right << std::setw(static_cast<int>(width)) << c.label;
  out << "\n";
  for (std::size_t r = 0; r < rows.size(); ++r) {
    out << std::left << std::setw(16) << ("J_" + rows[r].first + " " + std::string(approx_name(rows[r].second)));
    for (double v : grid[r]) {
      std::ostringstream cell;
      cell << std::fixed << std::setprecision(3) << v;
      out << std::right << std::setw(static_cast<int>(width)) << cell.str();
    }
    out << "\n";
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct EvalFlags {
  std::string hyp, ref;
  bool lowercase = false, json = false;
  int max_order = 4;
};

int cmd_evaluate(const EvalFlags& f, std::ostream& out) {
  const auto hyps = read_tokenized_lines(f.hyp);
  const auto refs = read_tokenized_lines(f.ref);
  if (hyps.size() != refs.size()) {
    throw DataError("hypothesis file has " + std::to_string(hyps.size()) + " lines, reference file has " +
                    std::to_string(refs.size()));
  }
  const BleuReport r = corpus_bleu(hyps, refs, f.max_order, f.lowercase);
  if (f.json) {
    ordered_json j;
    j["bleu"] = r.bleu;
    j["precisions"] = std::vector<double>(r.precisions.begin(), r.precisions.begin() + r.max_order);
    j["brevity_penalty"] = r.brevity_penalty;
    j["ratio"] = r.ratio();
    j["hyp_length"] = r.hyp_length;
    j["ref_length"] = r.ref_length;
    out << j.dump() << "\n";
  } else {
    out << r.summary() << "\n";
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct PeakFlags {
  std::string model, src_vocab, input, metrics, run_id = "peakedness", method = "model";
  std::size_t max_sentences = 0;
  std::uint64_t update = 0;
};

int cmd_peakedness(const PeakFlags& f, std::ostream& out) {
  const ModelParams params = ModelParams::load(f.model);
  const Vocabulary src = Vocabulary::load(f.src_vocab);
  if (params.config().src_vocab != src.size()) throw ConfigError("model source vocabulary differs from " + f.src_vocab);
  auto inputs = read_encoded(f.input, src);
  if (f.max_sentences && inputs.size() > f.max_sentences) inputs.resize(f.max_sentences);
  const double value = peakedness(params, inputs);
  if (!f.metrics.empty()) {
    MetricsWriter w(f.metrics, f.run_id, f.method);
    w.write(f.update, "peakedness", value);
  }
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", value);
  out << "peakedness " << buf << "\n";
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Teacher-student zero-resource translation lab"};
  app.require_subcommand(1);

  GenFlags gen;
  auto* g = app.add_subcommand("gen-corpus", "Generate a synthetic trilingual corpus");
  g->add_option("--config", gen.config, "JSON config file");
  g->add_option("--out", gen.out, "Output directory");
  g->add_option("--seed", gen.seed);
  g->add_option("--xz-pairs", gen.xz);
  g->add_option("--zy-pairs", gen.zy);
  g->add_option("--dev-pairs", gen.dev);
  g->add_option("--test-pairs", gen.test);
  g->add_option("--latent-vocab", gen.latent);
  g->add_option("--surface-vocab", gen.surface);
  g->add_option("--min-len", gen.min_len);
  g->add_option("--max-len", gen.max_len);
  g->add_option("--reorder-window", gen.window);
  g->add_flag("--small-source-pivot", gen.small, "Shrink the source-pivot corpus to 1/8");

  TrainFlags tr;
  auto* t = app.add_subcommand("train", "Train a model (mle or a teaching method)");
  t->add_option("--config", tr.config, "JSON config or run manifest");
  t->add_option("--method", tr.method, "One of: " + join(method_names(), ", "));
  t->add_option("--out", tr.out);
  t->add_option("--teacher", tr.teacher);
  t->add_option("--init", tr.init);
  t->add_option("--run-id", tr.run_id);
  t->add_option("--train-src", tr.train_src);
  t->add_option("--train-tgt", tr.train_tgt);
  t->add_option("--dev-src", tr.dev_src);
  t->add_option("--dev-tgt", tr.dev_tgt);
  t->add_option("--dev-kl-src", tr.dev_kl_src);
  t->add_option("--dev-kl-tgt", tr.dev_kl_tgt);
  t->add_option("--src-vocab", tr.src_vocab);
  t->add_option("--tgt-vocab", tr.tgt_vocab);
  t->add_option("--pivot-vocab", tr.pivot_vocab);
  t->add_option("--epochs", tr.epochs);
  t->add_option("--batch-size", tr.batch_size);
  t->add_option("--eval-interval", tr.eval_interval);
  t->add_option("--checkpoint-interval", tr.checkpoint_interval);
  t->add_option("--max-updates", tr.max_updates);
  t->add_option("--bleu-beam", tr.bleu_beam);
  t->add_option("--max-dev", tr.max_dev);
  t->add_option("--beam-k", tr.beam_k);
  t->add_option("--kbest-k", tr.kbest_k);
  t->add_option("--kbest-alpha", tr.alpha);
  t->add_option("--lr", tr.lr);
  t->add_option("--seed", tr.seed, "Initialization seed");
  t->add_option("--shuffle-seed", tr.shuffle_seed);
  t->add_option("--sampling-seed", tr.sampling_seed);
  t->add_option("--freeze", tr.freeze, "group=true|false, repeatable");
  t->add_flag("--init-from-teacher", tr.init_from_teacher,
              "Copy the teacher's target side; freezes it unless --freeze or the config says otherwise");
  t->add_flag("--no-teacher-cache", tr.no_cache);
  t->add_flag("--eval-kl", tr.eval_kl);
  t->add_flag("--no-bleu", tr.no_bleu);
  t->add_flag("--resume", tr.resume, "Continue from the latest train state in --out");

  DecodeFlags dc;
  auto* d = app.add_subcommand("decode", "Translate a file");
  d->add_option("--model", dc.model)->required();
  d->add_option("--src-vocab", dc.src_vocab)->required();
  d->add_option("--tgt-vocab", dc.tgt_vocab)->required();
  d->add_option("--input", dc.input)->required();
  d->add_option("--output", dc.output)->required();
  d->add_option("-k,--beam", dc.k);
  d->add_flag("--via-pivot", dc.via_pivot, "Two-step decoding; --model is then source->pivot");
  d->add_option("--pivot-target-model", dc.pivot_target_model);
  d->add_option("--pivot-vocab", dc.pivot_vocab);
  d->add_option("--pivot-output", dc.pivot_output);
  d->add_option("--stats", dc.stats, "Write timing statistics as JSON");

  VerifyFlags vk;
  auto* v = app.add_subcommand("verify-kl", "J_SENT / J_WORD estimates over checkpoints");
  v->add_option("--teacher", vk.teacher)->required();
  v->add_option("--checkpoints", vk.checkpoints)->required();
  v->add_option("--dev-src", vk.dev_src)->required();
  v->add_option("--dev-pivot", vk.dev_pivot)->required();
  v->add_option("--src-vocab", vk.src_vocab)->required();
  v->add_option("--pivot-vocab", vk.pivot_vocab)->required();
  v->add_option("-k,--beam", vk.k);
  v->add_option("--max-sentences", vk.max_sentences);
  v->add_option("--sampling-seed", vk.sampling_seed);
  v->add_option("--json", vk.json);
  v->add_option("--metrics", vk.metrics);
  v->add_option("--run-id", vk.run_id);
  v->add_flag("--teacher-column", vk.teacher_column, "Add the teacher scored against itself");

  EvalFlags ev;
  auto* e = app.add_subcommand("evaluate", "Corpus BLEU of a hypothesis file");
  e->add_option("--hyp", ev.hyp)->required();
  e->add_option("--ref", ev.ref)->required();
  e->add_option("--max-order", ev.max_order);
  e->add_flag("--lowercase", ev.lowercase);
  e->add_flag("--json", ev.json);

  PeakFlags pk;
  auto* pkc = app.add_subcommand("peakedness", "Average argmax probability along greedy outputs");
  pkc->add_option("--model", pk.model)->required();
  pkc->add_option("--src-vocab", pk.src_vocab)->required();
  pkc->add_option("--input", pk.input)->required();
  pkc->add_option("--max-sentences", pk.max_sentences);
  pkc->add_option("--metrics", pk.metrics);
  pkc->add_option("--run-id", pk.run_id);
  pkc->add_option("--method", pk.method);
  pkc->add_option("--update", pk.update);

  std::vector<std::string> rev(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& ex) {
    return app.exit(ex, out, err) == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (g->parsed()) return cmd_gen_corpus(gen, out);
    if (t->parsed()) return cmd_train(tr, out);
    if (d->parsed()) return cmd_decode(dc, out, err);
    if (v->parsed()) return cmd_verify_kl(vk, out);
    if (e->parsed()) return cmd_evaluate(ev, out);
    if (pkc->parsed()) return cmd_peakedness(pk, out);
  } catch (const UsageError& ex) {
    err << "usage error: " << ex.what() << "\n";
    return kExitUsage;
  } catch (const NumericError& ex) {
    err << "numeric error: " << ex.what() << "\n";
    return kExitNumeric;
  } catch (const DomainError& ex) {
    err << "numeric error: " << ex.what() << "\n";
    return kExitNumeric;
  } catch (const Error& ex) {
    err << "error: " << ex.what() << "\n";
    return kExitData;
  } catch (const std::filesystem::filesystem_error& ex) {
    err << "error: " << ex.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace tsnmt
