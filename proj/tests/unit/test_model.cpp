#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>

#include "test_util.hpp"
#include "tsnmt/errors.hpp"
#include "tsnmt/model.hpp"

using namespace tsnmt;
using namespace tsnmt::testing;

TEST(Encode, ShapesAndErrors) {
  const ModelParams p = ModelParams::random(tiny_config(7, 5, 4), 1);
  Tape t(false);
  BoundModel m(p, t);
  const EncodedSource one = encode(m, {5});
  EXPECT_EQ(one.annotations.rows(), 1u);
  EXPECT_EQ(one.annotations.cols(), 8u);
  EXPECT_EQ(encode(m, {4, 5, 6}).annotations.rows(), 3u);
  EXPECT_THROW(encode(m, {}), ContractError);
  EXPECT_THROW(encode(m, {9}), IndexError);
}

TEST(Encode, Deterministic) {
  const ModelParams p = ModelParams::random(tiny_config(7, 5), 3);
  Tape t1(false), t2(false);
  BoundModel m1(p, t1), m2(p, t2);
  EXPECT_EQ(encode(m1, {4, 6, 5, 4}).annotations.value(), encode(m2, {4, 6, 5, 4}).annotations.value());
}

// With the backward GRU tied to the forward one, the backward half of the
// annotations for x is the forward half for reversed x, read in reverse.
TEST(Encode, ReversalUnderWeightTying) {
  ModelConfig c = tiny_config(6, 5, 2);
  ModelParams p = ModelParams::zeros(c);
  p[ModelParams::kSrcEmbed] = Tensor::from_rows({{0, 0}, {0, 0}, {0, 0}, {0, 0}, {0.9, -0.4}, {-0.7, 0.8}});
  p[ModelParams::kEncFwdWx] = Tensor::from_rows({{0.5, -0.3, 0.2, 0.7, 1.1, -0.6}, {0.1, 0.4, -0.5, 0.3, -0.8, 0.9}});
  p[ModelParams::kEncFwdUh] = Tensor::from_rows({{0.2, -0.1, 0.3, 0.6}, {-0.4, 0.5, 0.1, -0.2}});
  p[ModelParams::kEncFwdUc] = Tensor::from_rows({{0.7, -0.5}, {0.3, 0.9}});
  p[ModelParams::kEncFwdB] = Tensor::row({0.05, -0.02, 0.1, 0.0, 0.03, -0.07});
  p[ModelParams::kEncBwdWx] = p[ModelParams::kEncFwdWx];
  p[ModelParams::kEncBwdUh] = p[ModelParams::kEncFwdUh];
  p[ModelParams::kEncBwdUc] = p[ModelParams::kEncFwdUc];
  p[ModelParams::kEncBwdB] = p[ModelParams::kEncFwdB];

  const TokenSequence x = {4, 5, 5, 4, 5};
  const TokenSequence rx(x.rbegin(), x.rend());
  Tape t(false);
  BoundModel m(p, t);
  const Tensor a = encode(m, x).annotations.value();
  const Tensor b = encode(m, rx).annotations.value();
  const std::size_t n = x.size(), H = 2;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t h = 0; h < H; ++h) {
      EXPECT_EQ(a(i, H + h), b(n - 1 - i, h));
      EXPECT_EQ(a(i, h), b(n - 1 - i, H + h));
    }
  }
  // And the tie matters: the two halves differ for a non-palindromic input.
  EXPECT_NE(a(0, 0), a(0, H));
}

TEST(DecoderStep, DistributionAndUniformAtZero) {
  const ModelParams p = ModelParams::random(tiny_config(6, 7), 5, 0.5);
  Tape t(false);
  BoundModel m(p, t);
  DecoderState st = initial_state(m, encode(m, {4, 5}));
  for (TokenId prev : {0, 3, 6}) {
    st.prev = prev;
    const StepOutput o = decoder_step(m, st);
    double sum = 0.0;
    for (double lp : o.log_probs.value().values()) {
      EXPECT_LE(lp, 0.0);
      sum += std::exp(lp);
    }
    EXPECT_NEAR(sum, 1.0, 1e-9);
  }

  const ModelParams z = ModelParams::zeros(tiny_config(6, 7));
  Tape t2(false);
  BoundModel mz(z, t2);
  const StepOutput o = decoder_step(mz, initial_state(mz, encode(mz, {4, 5, 4})));
  for (double lp : o.log_probs.value().values()) EXPECT_NEAR(std::exp(lp), 1.0 / 7.0, 1e-15);
}

TEST(SequenceLogProb, ChainsDecoderSteps) {
  Rng rng(77);
  for (int trial = 0; trial < 30; ++trial) {
    const ModelParams p = ModelParams::random(tiny_config(8, 6), 100 + trial, 0.5);
    const TokenSequence x = random_sequence(rng, 8, 1, 5);
    const TokenSequence y = random_sequence(rng, 6, 0, 5);
    Tape t(false);
    BoundModel m(p, t);
    DecoderState st = initial_state(m, encode(m, x));
    double chained = 0.0;
    for (std::size_t j = 0; j <= y.size(); ++j) {
      const StepOutput o = decoder_step(m, st);
      const TokenId tok = j < y.size() ? y[j] : kEos;
      chained += o.log_probs.value()[static_cast<std::size_t>(tok)];
      if (j < y.size()) st = advance(st, o.hidden, tok);
    }
    const double direct = sequence_log_prob(p, x, y);
    EXPECT_NEAR(direct, chained, 1e-9);
    EXPECT_LE(direct, 0.0);
  }
}

TEST(SequenceLogProb, EmptyTargetIsEosProbability) {
  const ModelParams p = ModelParams::random(tiny_config(6, 5), 9, 0.5);
  Tape t(false);
  BoundModel m(p, t);
  const StepOutput o = decoder_step(m, initial_state(m, encode(m, {4, 4, 5})));
  EXPECT_DOUBLE_EQ(sequence_log_prob(p, {4, 4, 5}, {}), o.log_probs.value()[kEos]);
}

TEST(Greedy, EqualsBeamWidthOne) {
  Rng rng(2024);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t V = 4 + rng.below(6);
    const ModelParams p = ModelParams::random(tiny_config(9, V), 500 + trial, 0.8);
    const TokenSequence x = random_sequence(rng, 9, 1, 6);
    const std::size_t max_len = 1 + rng.below(10);
    const Hypothesis g = greedy_decode(p, x, max_len);
    const auto beam = beam_search(p, x, 1, max_len);
    ASSERT_EQ(beam.size(), 1u);
    EXPECT_EQ(beam[0].tokens, g.tokens);
    EXPECT_EQ(beam[0].log_prob, g.log_prob);
    EXPECT_LE(g.tokens.size(), max_len);
  }
}

TEST(Greedy, Deterministic) {
  const ModelParams p = ModelParams::random(tiny_config(6, 6), 4, 1.0);
  const Hypothesis a = greedy_decode(p, {4, 5}, 9);
  const Hypothesis b = greedy_decode(p, {4, 5}, 9);
  EXPECT_EQ(a.tokens, b.tokens);
  EXPECT_EQ(a.log_prob, b.log_prob);
}

TEST(Greedy, FollowsDeterministicChain) {
  // BOS -> 4 -> 5 -> EOS
  const ModelParams p = chain_model(6, {4, 1, 1, 1, 5, 1});
  const Hypothesis h = greedy_decode(p, {4, 5, 3}, 10);
  EXPECT_EQ(h.tokens, (TokenSequence{4, 5}));
  EXPECT_TRUE(h.finished);
  EXPECT_EQ(h.log_prob, 0.0);
  EXPECT_EQ(greedy_decode(p, {4}, 1).tokens, (TokenSequence{4}));
}

namespace {

// All outputs within max_len tokens, scored by sequence_log_prob.
std::vector<std::pair<TokenSequence, double>> brute_force(const ModelParams& p, const TokenSequence& x,
                                                          std::size_t max_len) {
  const std::size_t V = p.config().tgt_vocab;
  std::vector<TokenSequence> prefixes = {{}};
  std::vector<std::pair<TokenSequence, double>> out;
  for (std::size_t len = 0; len <= max_len; ++len) {
    std::vector<TokenSequence> next;
    for (const auto& pre : prefixes) {
      if (len < max_len) out.emplace_back(pre, sequence_log_prob(p, x, pre, true));
      else out.emplace_back(pre, sequence_log_prob(p, x, pre, false));
      if (len == max_len) continue;
      for (std::size_t v = 0; v < V; ++v) {
        if (static_cast<TokenId>(v) == kEos) continue;
        TokenSequence s = pre;
        s.push_back(static_cast<TokenId>(v));
        next.push_back(std::move(s));
      }
    }
    prefixes = std::move(next);
  }
  return out;
}

}  // namespace

TEST(Beam, ExhaustiveWidthFindsEnumerationArgmax) {
  Rng rng(31);
  for (int trial = 0; trial < 40; ++trial) {
    const ModelParams p = ModelParams::random(tiny_config(5, 3), 900 + trial, 1.5);
    const TokenSequence x = random_sequence(rng, 5, 1, 4);
    const auto all = brute_force(p, x, 3);
    double total = 0.0;
    std::size_t best = 0;
    for (std::size_t i = 0; i < all.size(); ++i) {
      total += std::exp(all[i].second);
      if (all[i].second > all[best].second) best = i;
    }
    EXPECT_NEAR(total, 1.0, 1e-12);
    const auto beam = beam_search(p, x, all.size(), 3);
    ASSERT_FALSE(beam.empty());
    EXPECT_EQ(beam.front().tokens, all[best].first);
    EXPECT_NEAR(beam.front().log_prob, all[best].second, 1e-12);
    EXPECT_EQ(beam.size(), all.size());
  }
}

TEST(Beam, SortedAndInternallyConsistent) {
  Rng rng(8);
  for (int trial = 0; trial < 30; ++trial) {
    const ModelParams p = ModelParams::random(tiny_config(7, 6), 40 + trial, 1.0);
    const TokenSequence x = random_sequence(rng, 7, 1, 5);
    const std::size_t k = 1 + rng.below(6);
    const auto beam = beam_search(p, x, k, 6);
    EXPECT_LE(beam.size(), k);
    for (std::size_t i = 0; i < beam.size(); ++i) {
      if (i > 0) {
        EXPECT_LE(beam[i].log_prob, beam[i - 1].log_prob);
      }
      double s = 0.0;
      for (double v : beam[i].step_log_probs) s += v;
      EXPECT_NEAR(beam[i].log_prob, s, 1e-9);
      EXPECT_NEAR(beam[i].log_prob, sequence_log_prob(p, x, beam[i].tokens, beam[i].finished), 1e-9);
    }
  }
}

TEST(Beam, RejectsZeroWidth) {
  const ModelParams p = ModelParams::random(tiny_config(5, 5), 1);
  EXPECT_THROW(beam_search(p, {4}, 0, 3), ContractError);
  EXPECT_THROW(greedy_decode(p, {4}, 0), ContractError);
}

TEST(Sample, ReproducibleAndOneHotEqualsGreedy) {
  const ModelParams p = ModelParams::random(tiny_config(6, 6), 12, 1.0);
  Rng a(5, 1), b(5, 1);
  const Hypothesis s1 = sample_decode(p, {4, 5}, 8, a);
  const Hypothesis s2 = sample_decode(p, {4, 5}, 8, b);
  EXPECT_EQ(s1.tokens, s2.tokens);
  EXPECT_EQ(s1.log_prob, s2.log_prob);

  const ModelParams chain = chain_model(6, {5, 1, 1, 1, 4, 4});  // BOS -> 5 -> 4 -> 4 ...
  Rng r(99);
  for (int i = 0; i < 20; ++i) {
    EXPECT_EQ(sample_decode(chain, {4}, 6, r).tokens, greedy_decode(chain, {4}, 6).tokens);
  }
}

TEST(Sample, FirstStepFrequenciesMatchDistribution) {
  const ModelParams p = ModelParams::random(tiny_config(6, 5), 21, 2.0);
  const TokenSequence x = {4, 5, 4};
  Tape t(false);
  BoundModel m(p, t);
  const Tensor lp = decoder_step(m, initial_state(m, encode(m, x))).log_probs.value();
  const int n = 10000;
  std::map<TokenId, int> counts;
  Rng rng(7);
  for (int i = 0; i < n; ++i) {
    const Hypothesis h = sample_decode(p, x, 1, rng);
    const TokenId first = h.finished && h.tokens.empty() ? kEos : h.tokens.at(0);
    ++counts[first];
  }
  for (std::size_t v = 0; v < lp.size(); ++v) {
    const double q = std::exp(lp[v]);
    const double sigma = std::sqrt(n * q * (1 - q));
    EXPECT_LE(std::abs(counts[static_cast<TokenId>(v)] - n * q), 3 * sigma + 1e-9) << "token " << v;
  }
}

TEST(Checkpoint, RoundTripIsBitExact) {
  const ModelParams p = ModelParams::random(tiny_config(11, 9, 5), 42);
  const auto dir = std::filesystem::temp_directory_path() / "tsnmt_ckpt_test";
  std::filesystem::create_directories(dir);
  p.save(dir / "m.pdst");
  const ModelParams q = ModelParams::load(dir / "m.pdst");
  EXPECT_EQ(p, q);
  Rng rng(3);
  for (int i = 0; i < 100; ++i) {
    const TokenSequence x = random_sequence(rng, 11, 1, 6);
    const TokenSequence y = random_sequence(rng, 9, 0, 6);
    EXPECT_EQ(sequence_log_prob(p, x, y), sequence_log_prob(q, x, y));
  }
  const auto bytes = p.serialize();
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "PDST");
  std::filesystem::remove_all(dir);
}

TEST(Checkpoint, CorruptInputRejected) {
  const ModelParams p = ModelParams::random(tiny_config(6, 6), 1);
  auto bytes = p.serialize();
  auto truncated = bytes;
  truncated.resize(bytes.size() - 3);
  EXPECT_THROW(ModelParams::deserialize(truncated), DataError);
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(ModelParams::deserialize(bad_magic), DataError);
  auto bad_dims = bytes;
  bad_dims[12] ^= 1;  // tgt_vocab
  EXPECT_THROW(ModelParams::deserialize(bad_dims), DataError);
}

TEST(ModelParams, NamesAndGroupsCoverEveryTensor) {
  const ModelParams p = ModelParams::random(tiny_config(6, 6), 1);
  std::size_t per_group[kNumParamGroups] = {};
  for (std::size_t i = 0; i < p.size(); ++i) {
    EXPECT_EQ(p.find(ModelParams::name(i)), i);
    ++per_group[static_cast<std::size_t>(ModelParams::group(i))];
  }
  for (std::size_t g = 0; g < kNumParamGroups; ++g) EXPECT_GT(per_group[g], 0u);
  EXPECT_FALSE(p.find("nope").has_value());
}

TEST(ModelParams, SeededInitIsReproducibleAndBounded) {
  const ModelParams a = ModelParams::random(tiny_config(6, 6), 8);
  const ModelParams b = ModelParams::random(tiny_config(6, 6), 8);
  const ModelParams c = ModelParams::random(tiny_config(6, 6), 9);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (double v : a[i].values()) EXPECT_LE(std::abs(v), 0.08);
}

TEST(GradCheck, DecoderStepLossOnFourTokenVocabulary) {
  const ModelParams p = ModelParams::random(tiny_config(5, 4), 17, 0.6);
  const TokenSequence x = {4, 2, 4};
  const TokenSequence y = {3, 2};
  ModelParams work = p;
  double worst = 0.0;
  const double eps = 1e-5;
  Tape tape;
  BoundModel m(work, tape);
  Var loss = scale(sequence_log_prob(m, x, y), -1.0);
  tape.backward(loss);
  const auto grads = m.gradients();
  for (std::size_t i = 0; i < work.size(); ++i) {
    for (std::size_t k = 0; k < work[i].size(); ++k) {
      const double orig = work[i][k];
      work[i][k] = orig + eps;
      const double up = -sequence_log_prob(work, x, y);
      work[i][k] = orig - eps;
      const double down = -sequence_log_prob(work, x, y);
      work[i][k] = orig;
      const double num = (up - down) / (2 * eps);
      const double an = grads[i][k];
      worst = std::max(worst, gradient_relative_error(an, num));
    }
  }
  EXPECT_LT(worst, 1e-4);
}
