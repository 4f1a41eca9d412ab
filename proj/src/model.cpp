#include "tsnmt/model.hpp"

#include <array>
#include <atomic>
#include <cmath>
#include <sstream>

#include "tsnmt/errors.hpp"

namespace tsnmt {

namespace {

constexpr std::array<std::string_view, ModelParams::kNumTensors> kNames = {
    "src_embed",
    "enc_fwd_Wx", "enc_fwd_Uh", "enc_fwd_Uc", "enc_fwd_b",
    "enc_bwd_Wx", "enc_bwd_Uh", "enc_bwd_Uc", "enc_bwd_b",
    "att_Wq", "att_Wk", "att_b", "att_v",
    "dec_init_W", "dec_init_b",
    "dec_Wx", "dec_Uh", "dec_Uc", "dec_b",
    "tgt_embed",
    "out_read_W", "out_read_b", "out_W", "out_b",
};

constexpr std::array<std::string_view, kNumParamGroups> kGroupNames = {
    "src_embed", "encoder", "attention", "decoder", "tgt_embed", "output"};

std::pair<std::size_t, std::size_t> tensor_shape(const ModelConfig& c, std::size_t i) {
  const std::size_t E = c.embed_dim, H = c.hidden_dim, A = c.attention_dim;
  switch (static_cast<ModelParams::Index>(i)) {
    case ModelParams::kSrcEmbed: return {c.src_vocab, E};
    case ModelParams::kEncFwdWx:
    case ModelParams::kEncBwdWx: return {E, 3 * H};
    case ModelParams::kEncFwdUh:
    case ModelParams::kEncBwdUh:
    case ModelParams::kDecUh: return {H, 2 * H};
    case ModelParams::kEncFwdUc:
    case ModelParams::kEncBwdUc:
    case ModelParams::kDecUc: return {H, H};
    case ModelParams::kEncFwdB:
    case ModelParams::kEncBwdB:
    case ModelParams::kDecB: return {1, 3 * H};
    case ModelParams::kAttWq: return {H, A};
    case ModelParams::kAttWk: return {2 * H, A};
    case ModelParams::kAttB: return {1, A};
    case ModelParams::kAttV: return {A, 1};
    case ModelParams::kDecInitW: return {2 * H, H};
    case ModelParams::kDecInitB: return {1, H};
    case ModelParams::kDecWx: return {E + 2 * H, 3 * H};
    case ModelParams::kTgtEmbed: return {c.tgt_vocab, E};
    case ModelParams::kOutReadW: return {H + E + 2 * H, E};
    case ModelParams::kOutReadB: return {1, E};
    case ModelParams::kOutW: return {E, c.tgt_vocab};
    case ModelParams::kOutB: return {1, c.tgt_vocab};
    case ModelParams::kNumTensors: break;
  }
  throw IndexError("no parameter tensor " + std::to_string(i));
}

std::atomic<std::uint64_t> g_decode_calls{0};

}  // namespace

void ModelConfig::validate() const {
  // BOS and EOS must exist on the target side; the source side needs one symbol.
  if (src_vocab < 1 || tgt_vocab < 2) {
    throw ConfigError("model config: vocabulary sizes too small (src " + std::to_string(src_vocab) +
                      ", tgt " + std::to_string(tgt_vocab) + ")");
  }
  if (embed_dim == 0 || hidden_dim == 0 || attention_dim == 0) {
    throw ConfigError("model config: dimensions must be positive");
  }
}

std::string_view group_name(ParamGroup g) { return kGroupNames[static_cast<std::size_t>(g)]; }

std::optional<ParamGroup> parse_group(std::string_view name) {
  for (std::size_t i = 0; i < kGroupNames.size(); ++i) {
    if (kGroupNames[i] == name) return static_cast<ParamGroup>(i);
  }
  return std::nullopt;
}

ModelParams ModelParams::zeros(const ModelConfig& cfg) {
  cfg.validate();
  ModelParams p;
  p.config_ = cfg;
  for (std::size_t i = 0; i < kNumTensors; ++i) {
    auto [r, c] = tensor_shape(cfg, i);
    p.tensors_.emplace_back(r, c, 0.0);
  }
  return p;
}

ModelParams ModelParams::random(const ModelConfig& cfg, std::uint64_t seed, double scale) {
  ModelParams p = zeros(cfg);
  Rng rng(seed, 0x1417);
  for (Tensor& t : p.tensors_) {
    for (double& v : t.values()) v = rng.uniform(-scale, scale);
  }
  return p;
}

std::string_view ModelParams::name(std::size_t i) { return kNames.at(i); }

ParamGroup ModelParams::group(std::size_t i) {
  if (i == kSrcEmbed) return ParamGroup::SourceEmbeddings;
  if (i <= kEncBwdB) return ParamGroup::Encoder;
  if (i <= kAttV) return ParamGroup::Attention;
  if (i <= kDecB) return ParamGroup::Decoder;
  if (i == kTgtEmbed) return ParamGroup::TargetEmbeddings;
  if (i < kNumTensors) return ParamGroup::OutputProjection;
  throw IndexError("no parameter tensor " + std::to_string(i));
}

std::optional<std::size_t> ModelParams::find(std::string_view name) const {
  for (std::size_t i = 0; i < kNames.size(); ++i) {
    if (kNames[i] == name) return i;
  }
  return std::nullopt;
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for (const Tensor& t : tensors_) n += t.size();
  return n;
}

// ---------------------------------------------------------------------------

BoundModel::BoundModel(const ModelParams& params, Tape& tape, const std::vector<bool>* trainable)
    : params_(&params), tape_(&tape) {
  if (params.size() != ModelParams::kNumTensors) throw ContractError("BoundModel: uninitialized parameters");
  trainable_.assign(params.size(), true);
  if (trainable != nullptr) {
    if (trainable->size() != params.size()) throw ContractError("BoundModel: trainable mask size mismatch");
    trainable_ = *trainable;
  }
  leaves_.reserve(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) leaves_.push_back(tape.leaf(params[i], trainable_[i]));
}

std::vector<Tensor> BoundModel::gradients() const {
  std::vector<Tensor> out;
  out.reserve(leaves_.size());
  for (std::size_t i = 0; i < leaves_.size(); ++i) {
    out.push_back(trainable_[i] ? tape_->grad(leaves_[i]) : Tensor());
  }
  return out;
}

namespace {

// GRU update from a precomputed input projection xp = x Wx + b (1 x 3H).
Var gru(const Var& xp, const Var& h, const Var& uh, const Var& uc, std::size_t H) {
  Var zr = sigmoid(add(slice_cols(xp, 0, 2 * H), matmul(h, uh)));
  Var z = slice_cols(zr, 0, H);
  Var r = slice_cols(zr, H, H);
  Var cand = tanh(add(slice_cols(xp, 2 * H, H), matmul(mul(r, h), uc)));
  return add(h, mul(z, sub(cand, h)));
}

}  // namespace

EncodedSource encode(const BoundModel& m, const TokenSequence& x) {
  if (x.empty()) throw ContractError("encode: empty source sentence");
  const ModelConfig& c = m.config();
  const std::size_t n = x.size(), H = c.hidden_dim;
  Tape& t = m.tape();
  Var emb = gather_rows(m[ModelParams::kSrcEmbed], x);
  Var xp_fwd = add(matmul(emb, m[ModelParams::kEncFwdWx]), broadcast_rows(m[ModelParams::kEncFwdB], n));
  Var xp_bwd = add(matmul(emb, m[ModelParams::kEncBwdWx]), broadcast_rows(m[ModelParams::kEncBwdB], n));
  const Var h0 = t.constant(Tensor(1, H, 0.0));

  std::vector<Var> fwd(n), bwd(n);
  Var h = h0;
  for (std::size_t i = 0; i < n; ++i) {
    h = gru(slice_rows(xp_fwd, i, 1), h, m[ModelParams::kEncFwdUh], m[ModelParams::kEncFwdUc], H);
    fwd[i] = h;
  }
  h = h0;
  for (std::size_t i = n; i-- > 0;) {
    h = gru(slice_rows(xp_bwd, i, 1), h, m[ModelParams::kEncBwdUh], m[ModelParams::kEncBwdUc], H);
    bwd[i] = h;
  }
  EncodedSource enc;
  const std::array<Var, 2> halves = {concat_rows(fwd), concat_rows(bwd)};
  enc.annotations = concat_cols(halves);
  enc.keys = matmul(enc.annotations, m[ModelParams::kAttWk]);
  enc.mean = scale(sum_rows(enc.annotations), 1.0 / static_cast<double>(n));
  enc.length = n;
  return enc;
}

DecoderState initial_state(const BoundModel& m, const EncodedSource& enc) {
  DecoderState s;
  s.hidden = tanh(add(matmul(enc.mean, m[ModelParams::kDecInitW]), m[ModelParams::kDecInitB]));
  s.annotations = enc.annotations;
  s.keys = enc.keys;
  s.prev = kBos;
  return s;
}

StepOutput decoder_step(const BoundModel& m, const DecoderState& state) {
  const ModelConfig& c = m.config();
  const std::size_t H = c.hidden_dim;
  const std::size_t n = state.annotations.rows();
  if (state.keys.rows() != n) throw ContractError("decoder_step: annotation/key count mismatch");

  Var q = add(matmul(state.hidden, m[ModelParams::kAttWq]), m[ModelParams::kAttB]);
  Var energy = tanh(add(state.keys, broadcast_rows(q, n)));
  Var weights = softmax(transpose(matmul(energy, m[ModelParams::kAttV])));
  Var context = matmul(weights, state.annotations);

  const std::array<TokenId, 1> prev = {state.prev};
  Var emb = gather_rows(m[ModelParams::kTgtEmbed], prev);
  const std::array<Var, 2> input = {emb, context};
  Var xp = add(matmul(concat_cols(input), m[ModelParams::kDecWx]), m[ModelParams::kDecB]);
  Var hidden = gru(xp, state.hidden, m[ModelParams::kDecUh], m[ModelParams::kDecUc], H);

  const std::array<Var, 3> read_in = {hidden, emb, context};
  Var readout = tanh(add(matmul(concat_cols(read_in), m[ModelParams::kOutReadW]), m[ModelParams::kOutReadB]));
  Var logits = add(matmul(readout, m[ModelParams::kOutW]), m[ModelParams::kOutB]);
  return {log_softmax(logits), hidden};
}

DecoderState advance(const DecoderState& state, const Var& hidden, TokenId emitted) {
  DecoderState next = state;
  next.hidden = hidden;
  next.prev = emitted;
  return next;
}

std::vector<Var> forced_log_distributions(const BoundModel& m, const TokenSequence& x,
                                          const TokenSequence& y, bool with_eos) {
  const EncodedSource enc = encode(m, x);
  DecoderState st = initial_state(m, enc);
  const std::size_t steps = y.size() + (with_eos ? 1 : 0);
  std::vector<Var> out;
  out.reserve(steps);
  for (std::size_t j = 0; j < steps; ++j) {
    StepOutput o = decoder_step(m, st);
    out.push_back(o.log_probs);
    if (j < y.size()) st = advance(st, o.hidden, y[j]);
  }
  return out;
}

Var sequence_log_prob(const BoundModel& m, const TokenSequence& x, const TokenSequence& y,
                      bool with_eos) {
  const std::size_t V = m.config().tgt_vocab;
  for (TokenId t : y) {
    if (t < 0 || static_cast<std::size_t>(t) >= V) {
      throw IndexError("target token " + std::to_string(t) + " outside vocabulary of size " +
                       std::to_string(V));
    }
  }
  const std::vector<Var> dists = forced_log_distributions(m, x, y, with_eos);
  std::vector<Var> picked;
  picked.reserve(dists.size());
  for (std::size_t j = 0; j < dists.size(); ++j) {
    const TokenId tok = j < y.size() ? y[j] : kEos;
    picked.push_back(slice_cols(dists[j], static_cast<std::size_t>(tok), 1));
  }
  if (picked.empty()) return m.tape().constant(0.0);
  return sum(concat_cols(picked));
}

// ---------------------------------------------------------------------------

std::size_t default_max_len(std::size_t src_len) { return 2 * src_len + 5; }

double sequence_log_prob(const ModelParams& p, const TokenSequence& x, const TokenSequence& y,
                         bool with_eos) {
  Tape tape(false);
  BoundModel m(p, tape);
  return sequence_log_prob(m, x, y, with_eos).item();
}

std::vector<std::vector<double>> forced_distributions(const ModelParams& p, const TokenSequence& x,
                                                      const TokenSequence& y, bool with_eos) {
  Tape tape(false);
  BoundModel m(p, tape);
  std::vector<std::vector<double>> out;
  for (const Var& lp : forced_log_distributions(m, x, y, with_eos)) {
    std::vector<double> probs(lp.value().size());
    for (std::size_t i = 0; i < probs.size(); ++i) probs[i] = std::exp(lp.value()[i]);
    out.push_back(std::move(probs));
  }
  return out;
}

namespace {

std::size_t argmax_lowest(const Tensor& v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

}  // namespace

Hypothesis greedy_decode(const ModelParams& p, const TokenSequence& x, std::size_t max_len) {
  if (max_len < 1) throw ContractError("greedy_decode: max_len must be >= 1");
  ++g_decode_calls;
  Tape tape(false);
  BoundModel m(p, tape);
  DecoderState st = initial_state(m, encode(m, x));
  Hypothesis h;
  for (std::size_t step = 0; step < max_len; ++step) {
    StepOutput o = decoder_step(m, st);
    const Tensor& lp = o.log_probs.value();
    const auto tok = static_cast<TokenId>(argmax_lowest(lp));
    h.step_log_probs.push_back(lp[static_cast<std::size_t>(tok)]);
    h.log_prob += lp[static_cast<std::size_t>(tok)];
    if (tok == kEos) {
      h.finished = true;
      break;
    }
    h.tokens.push_back(tok);
    st = advance(st, o.hidden, tok);
  }
  return h;
}

std::vector<Hypothesis> beam_search(const ModelParams& p, const TokenSequence& x, std::size_t k,
                                    std::size_t max_len) {
  if (k < 1) throw ContractError("beam_search: k must be >= 1");
  if (max_len < 1) throw ContractError("beam_search: max_len must be >= 1");
  ++g_decode_calls;
  Tape tape(false);
  BoundModel m(p, tape);
  const std::size_t V = p.config().tgt_vocab;

  struct Live {
    Hypothesis hyp;
    DecoderState state;
  };
  struct Candidate {
    double score;
    std::size_t parent;
    TokenId token;
  };

  std::vector<Live> live = {{Hypothesis{}, initial_state(m, encode(m, x))}};
  std::vector<Hypothesis> finished;
  std::vector<Candidate> cands;
  std::vector<StepOutput> outs;

  for (std::size_t step = 0; step < max_len && !live.empty(); ++step) {
    cands.clear();
    outs.clear();
    for (std::size_t i = 0; i < live.size(); ++i) {
      outs.push_back(decoder_step(m, live[i].state));
      const Tensor& lp = outs.back().log_probs.value();
      for (std::size_t v = 0; v < V; ++v) {
        cands.push_back({live[i].hyp.log_prob + lp[v], i, static_cast<TokenId>(v)});
      }
    }
    const std::size_t budget = std::min(k - finished.size(), cands.size());
    std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(budget), cands.end(),
                      [](const Candidate& a, const Candidate& b) {
                        if (a.score != b.score) return a.score > b.score;
                        if (a.parent != b.parent) return a.parent < b.parent;
                        return a.token < b.token;
                      });
    std::vector<Live> next;
    for (std::size_t c = 0; c < budget; ++c) {
      const Candidate& cand = cands[c];
      const Live& parent = live[cand.parent];
      Hypothesis h = parent.hyp;
      const double lp = outs[cand.parent].log_probs.value()[static_cast<std::size_t>(cand.token)];
      h.step_log_probs.push_back(lp);
      h.log_prob = cand.score;
      if (cand.token == kEos) {
        h.finished = true;
        finished.push_back(std::move(h));
      } else {
        h.tokens.push_back(cand.token);
        next.push_back({std::move(h), advance(parent.state, outs[cand.parent].hidden, cand.token)});
      }
    }
    live = std::move(next);
    if (finished.size() >= k) break;
  }
  // Hypotheses still alive after max_len steps are returned truncated.
  for (auto& l : live) finished.push_back(std::move(l.hyp));
  std::stable_sort(finished.begin(), finished.end(),
                   [](const Hypothesis& a, const Hypothesis& b) { return a.log_prob > b.log_prob; });
  if (finished.size() > k) finished.resize(k);
  return finished;
}

Hypothesis sample_decode(const ModelParams& p, const TokenSequence& x, std::size_t max_len, Rng& rng) {
  if (max_len < 1) throw ContractError("sample_decode: max_len must be >= 1");
  ++g_decode_calls;
  Tape tape(false);
  BoundModel m(p, tape);
  DecoderState st = initial_state(m, encode(m, x));
  Hypothesis h;
  std::vector<double> probs;
  for (std::size_t step = 0; step < max_len; ++step) {
    StepOutput o = decoder_step(m, st);
    const Tensor& lp = o.log_probs.value();
    probs.resize(lp.size());
    for (std::size_t i = 0; i < lp.size(); ++i) probs[i] = std::exp(lp[i]);
    const auto tok = static_cast<TokenId>(rng.categorical(probs));
    h.step_log_probs.push_back(lp[static_cast<std::size_t>(tok)]);
    h.log_prob += lp[static_cast<std::size_t>(tok)];
    if (tok == kEos) {
      h.finished = true;
      break;
    }
    h.tokens.push_back(tok);
    st = advance(st, o.hidden, tok);
  }
  return h;
}

std::uint64_t decode_calls() { return g_decode_calls.load(); }

}  // namespace tsnmt
