#include "tsnmt/trainer.hpp"

#include <bit>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <numeric>

#include "tsnmt/errors.hpp"
#include "tsnmt/evaluation.hpp"
#include "tsnmt/pivot.hpp"
#include "tsnmt/random.hpp"

namespace tsnmt {

namespace {

constexpr char kStateMagic[4] = {'T', 'S', 'S', 'T'};

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint64_t get_u64(const std::vector<std::uint8_t>& in, std::size_t& pos) {
  if (pos + 8 > in.size()) throw DataError("train state truncated");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(in[pos++]) << (8 * i);
  return v;
}

std::vector<std::uint8_t> get_blob(const std::vector<std::uint8_t>& in, std::size_t& pos) {
  const std::uint64_t n = get_u64(in, pos);
  if (n > in.size() - pos) throw DataError("train state truncated");
  std::vector<std::uint8_t> out(in.begin() + static_cast<std::ptrdiff_t>(pos),
                                in.begin() + static_cast<std::ptrdiff_t>(pos + n));
  pos += n;
  return out;
}

void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace

std::vector<std::uint8_t> TrainState::serialize() const {
  std::vector<std::uint8_t> out(kStateMagic, kStateMagic + 4);
  put_u64(out, update);
  put_u64(out, epoch);
  put_u64(out, next_batch);
  put_u64(out, std::bit_cast<std::uint64_t>(loss_sum));
  put_u64(out, loss_count);
  put_u64(out, skipped_pairs);
  for (const auto& blob : {params.serialize(), adam.serialize()}) {
    put_u64(out, blob.size());
    out.insert(out.end(), blob.begin(), blob.end());
  }
  return out;
}

TrainState TrainState::deserialize(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 4 || !std::equal(kStateMagic, kStateMagic + 4, bytes.begin())) {
    throw DataError("not a train state file");
  }
  std::size_t pos = 4;
  TrainState s;
  s.update = get_u64(bytes, pos);
  s.epoch = get_u64(bytes, pos);
  s.next_batch = get_u64(bytes, pos);
  s.loss_sum = std::bit_cast<double>(get_u64(bytes, pos));
  s.loss_count = get_u64(bytes, pos);
  s.skipped_pairs = get_u64(bytes, pos);
  s.params = ModelParams::deserialize(get_blob(bytes, pos));
  s.adam = Adam::deserialize(get_blob(bytes, pos));
  if (pos != bytes.size()) throw DataError("train state has trailing bytes");
  return s;
}

void TrainState::save(const std::filesystem::path& path) const { write_file(path, serialize()); }

TrainState TrainState::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read train state " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize(bytes);
}

std::filesystem::path checkpoint_path(const std::filesystem::path& dir, std::uint64_t update) {
  char name[64];
  std::snprintf(name, sizeof name, "model.u%08llu.pdst", static_cast<unsigned long long>(update));
  return dir / name;
}

std::filesystem::path state_path(const std::filesystem::path& dir, std::uint64_t update) {
  char name[64];
  std::snprintf(name, sizeof name, "state.u%08llu.bin", static_cast<unsigned long long>(update));
  return dir / name;
}

std::optional<std::filesystem::path> latest_state(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) return std::nullopt;
  std::optional<std::filesystem::path> best;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    const std::string n = e.path().filename().string();
    if (n.size() == 19 && n.rfind("state.u", 0) == 0 && n.substr(15) == ".bin") {
      if (!best || n > best->filename().string()) best = e.path();
    }
  }
  return best;
}

namespace {

class Run {
 public:
  Run(const ModelParams* teacher, const TrainData& data, const TrainConfig& cfg, MetricsWriter* metrics)
      : teacher_(teacher), data_(data), cfg_(cfg), metrics_(metrics), mask_(cfg.freeze.trainable_mask()) {
    if (cfg.method != Method::MLE && teacher == nullptr) {
      throw ConfigError("method " + std::string(method_name(cfg.method)) + " needs a teacher model");
    }
    if (data.train.empty()) throw ConfigError("training data is empty");
    if (cfg.schedule.batch_size == 0) throw ConfigError("batch_size must be positive");
    if (cfg.method != Method::MLE && cfg.cache_teacher && cfg.method != Method::WordSampling) {
      cache_.resize(data.train.size());
    }
  }

  TrainResult run(TrainState st) {
    TrainResult res;
    const std::size_t n = data_.train.size();
    const std::size_t bs = cfg_.schedule.batch_size;
    const std::size_t batches = (n + bs - 1) / bs;
    const bool fresh = st.update == 0 && st.epoch == 0 && st.next_batch == 0;
    if (teacher_ && cfg_.method != Method::MLE) check_teacher_compatible(st.params, *teacher_);
    if (fresh) {
      evaluate(st);
      save(st, res);
    } else {
      evaluated_at_ = saved_at_ = st.update;  // recorded by the interrupted run
    }
    bool capped = false;
    for (std::size_t epoch = st.epoch; epoch < cfg_.schedule.epochs && !capped; ++epoch) {
      std::vector<std::size_t> order(n);
      std::iota(order.begin(), order.end(), std::size_t{0});
      Rng shuffler(cfg_.seeds.shuffle, epoch);
      shuffler.shuffle(std::span<std::size_t>(order));
      for (std::size_t b = epoch == st.epoch ? st.next_batch : 0; b < batches; ++b) {
        if (cfg_.schedule.max_updates && st.update >= cfg_.schedule.max_updates) {
          capped = true;
          break;
        }
        std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(b * bs),
                                     order.begin() + static_cast<std::ptrdiff_t>(std::min(n, (b + 1) * bs)));
        step(st, idx);
        st.epoch = epoch;
        st.next_batch = b + 1;
        if (st.next_batch == batches) {
          st.epoch = epoch + 1;
          st.next_batch = 0;
        }
        const bool epoch_end = st.next_batch == 0;
        const bool eval_due = cfg_.schedule.eval_interval ? st.update % cfg_.schedule.eval_interval == 0 : epoch_end;
        const bool ckpt_due =
            cfg_.schedule.checkpoint_interval ? st.update % cfg_.schedule.checkpoint_interval == 0 : eval_due;
        if (eval_due) evaluate(st);
        if (ckpt_due) save(st, res);
      }
    }
    // A cap can stop the run between evaluations; the final state is always recorded.
    if (evaluated_at_ != st.update) evaluate(st);
    if (saved_at_ != st.update) save(st, res);
    res.updates = st.update;
    res.skipped_pairs = st.skipped_pairs;
    res.params = std::move(st.params);
    return res;
  }

 private:
  void step(TrainState& st, const std::vector<std::size_t>& idx) {
    std::vector<SentencePair> batch;
    for (std::size_t i : idx) batch.push_back(data_.train[i]);
    Tape tape;
    BoundModel model(st.params, tape, &mask_);
    DistillBatchLoss loss;
    if (cfg_.method == Method::MLE) {
      loss = mle_loss(model, batch);
    } else {
      Rng rng(cfg_.seeds.sampling, st.update);
      std::vector<TeacherTarget> targets;
      for (std::size_t i : idx) {
        if (!cache_.empty()) {
          if (!cache_[i]) cache_[i] = teacher_target(*teacher_, data_.train[i].tgt, cfg_.method, cfg_.teaching);
          targets.push_back(*cache_[i]);
        } else {
          targets.push_back(teacher_target(*teacher_, data_.train[i].tgt, cfg_.method, cfg_.teaching, &rng));
        }
      }
      loss = teaching_loss(model, batch, targets, cfg_.method);
    }
    st.skipped_pairs += loss.skipped_pairs;
    ++st.update;
    if (loss.used_pairs == 0) return;
    tape.backward(loss.loss);
    st.adam.step(st.params, model.gradients());
    st.loss_sum += loss.loss.item();
    ++st.loss_count;
  }

  void emit(const TrainState& st, const std::string& metric, double value) {
    if (metrics_) metrics_->write(st.update, metric, value);
  }

  void evaluate(TrainState& st) {
    evaluated_at_ = st.update;
    if (st.loss_count) emit(st, "train_loss", st.loss_sum / static_cast<double>(st.loss_count));
    st.loss_sum = 0.0;
    st.loss_count = 0;
    if (is_teaching(cfg_.method)) emit(st, "skipped_pairs", static_cast<double>(st.skipped_pairs));
    auto dev = data_.dev;
    if (cfg_.eval.max_dev && dev.size() > cfg_.eval.max_dev) dev = dev.first(cfg_.eval.max_dev);
    if (!dev.empty()) {
      emit(st, "val_loss", validation_loss(st.params, dev));
      if (cfg_.eval.bleu) {
        std::vector<TokenSequence> hyps, refs;
        for (const auto& p : dev) {
          hyps.push_back(direct_decode(st.params, p.src, cfg_.eval.bleu_beam));
          refs.push_back(p.tgt);
        }
        emit(st, "dev_bleu", corpus_bleu(hyps, refs).bleu);
      }
    }
    if (cfg_.eval.kl && teacher_ && !data_.dev_kl.empty()) {
      emit(st, "j_sent_greedy", measure_j_sent(st.params, *teacher_, data_.dev_kl, Approx::Greedy).mean);
      emit(st, "j_word_greedy", measure_j_word(st.params, *teacher_, data_.dev_kl, Approx::Greedy).mean);
    }
  }

  void save(const TrainState& st, TrainResult& res) {
    saved_at_ = st.update;
    if (cfg_.out_dir.empty()) return;
    std::filesystem::create_directories(cfg_.out_dir);
    const auto path = checkpoint_path(cfg_.out_dir, st.update);
    st.params.save(path);
    st.save(state_path(cfg_.out_dir, st.update));
    res.checkpoints.push_back(path);
  }

  const ModelParams* teacher_;
  const TrainData& data_;
  const TrainConfig& cfg_;
  MetricsWriter* metrics_;
  std::vector<bool> mask_;
  std::vector<std::optional<TeacherTarget>> cache_;
  std::optional<std::uint64_t> evaluated_at_, saved_at_;
};

}  // namespace

TrainResult train(const ModelParams& init, const ModelParams* teacher, const TrainData& data,
                  const TrainConfig& cfg, MetricsWriter* metrics, const TrainState* resume) {
  TrainState st;
  if (resume) {
    st = *resume;
    if (!(st.params.config() == init.config())) throw ConfigError("resume state does not match the model config");
  } else {
    st.params = init;
    st.adam = Adam(init, cfg.adam);
  }
  Run run(teacher, data, cfg, metrics);
  return run.run(std::move(st));
}

}  // namespace tsnmt
