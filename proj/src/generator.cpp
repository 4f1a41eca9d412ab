#include <algorithm>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "tsnmt/corpus.hpp"
#include "tsnmt/errors.hpp"
#include "tsnmt/random.hpp"

namespace tsnmt {

void GeneratorConfig::validate() const {
  if (min_len < 1 || max_len < min_len) {
    throw ConfigError("generator: need 1 <= min_len <= max_len");
  }
  if (latent_vocab < 5 || surface_vocab < 5) throw ConfigError("generator: vocabulary sizes must be >= 5");
  if (surface_vocab < latent_vocab) {
    throw ConfigError("generator: surface vocabulary must cover the latent alphabet");
  }
  if (reorder_window < 1) throw ConfigError("generator: reorder_window must be >= 1");
  if (xz_pairs == 0 || zy_pairs == 0 || dev_pairs == 0 || test_pairs == 0) {
    throw ConfigError("generator: every split needs at least one pair");
  }
}

GeneratorConfig small_source_pivot(GeneratorConfig cfg) {
  cfg.xz_pairs = std::max<std::size_t>(1, cfg.xz_pairs / 8);
  return cfg;
}

std::string LanguageSpec::content_token(std::size_t index) const {
  std::ostringstream s;
  s << name << (index < 10 ? "0" : "") << index;
  return s.str();
}

std::string LanguageSpec::function_token(std::size_t index) const {
  return name + "f" + std::to_string(index);
}

std::vector<std::string> LanguageSpec::alphabet() const {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < content.size(); ++i) out.push_back(content_token(i));
  for (std::size_t i = 0; i < function_words; ++i) out.push_back(function_token(i));
  return out;
}

std::vector<std::string> LanguageSpec::render(const std::vector<std::size_t>& latent) const {
  std::vector<std::size_t> order(latent);
  for (std::size_t b = 0; b + reorder_window <= order.size(); b += reorder_window) {
    std::reverse(order.begin() + static_cast<std::ptrdiff_t>(b),
                 order.begin() + static_cast<std::ptrdiff_t>(b + reorder_window));
  }
  std::vector<std::string> out;
  for (std::size_t t : order) {
    if (function_words > 0 && (t + insertion_offset) % 8 == 0) {
      out.push_back(function_token((t / 8) % function_words));
    }
    out.push_back(content_token(content[t]));
  }
  return out;
}

std::vector<SentencePair> TrilingualSplit::dev_xz() const {
  std::vector<SentencePair> out;
  for (const auto& s : dev) out.push_back({s.x, s.z});
  return out;
}

std::vector<SentencePair> TrilingualSplit::dev_xy() const {
  std::vector<SentencePair> out;
  for (const auto& s : dev) out.push_back({s.x, s.y});
  return out;
}

std::vector<SentencePair> TrilingualSplit::dev_zy() const {
  std::vector<SentencePair> out;
  for (const auto& s : dev) out.push_back({s.z, s.y});
  return out;
}

std::vector<SentencePair> TrilingualSplit::test_xy() const {
  std::vector<SentencePair> out;
  for (const auto& s : test) out.push_back({s.x, s.y});
  return out;
}

std::vector<SentencePair> TrilingualSplit::test_xz() const {
  std::vector<SentencePair> out;
  for (const auto& s : test) out.push_back({s.x, s.z});
  return out;
}

namespace {

using Latent = std::vector<std::size_t>;

LanguageSpec make_language(const std::string& name, const GeneratorConfig& cfg, std::uint64_t stream,
                           std::size_t offset, std::size_t window) {
  LanguageSpec lang;
  lang.name = name;
  lang.content.resize(cfg.latent_vocab);
  std::iota(lang.content.begin(), lang.content.end(), 0);
  Rng rng(cfg.seed, stream);
  rng.shuffle(std::span<std::size_t>(lang.content));
  lang.function_words = cfg.surface_vocab - cfg.latent_vocab;
  lang.insertion_offset = offset;
  lang.reorder_window = window;
  return lang;
}

// Number of distinct latent sentences, saturating.
std::uint64_t latent_space(const GeneratorConfig& cfg) {
  constexpr std::uint64_t cap = std::uint64_t{1} << 62;
  std::uint64_t total = 0;
  for (std::size_t len = cfg.min_len; len <= cfg.max_len; ++len) {
    std::uint64_t n = 1;
    for (std::size_t i = 0; i < len && n < cap; ++i) {
      n = n > cap / cfg.latent_vocab ? cap : n * cfg.latent_vocab;
    }
    total = total > cap - n ? cap : total + n;
  }
  return total;
}

class LatentSampler {
 public:
  LatentSampler(const GeneratorConfig& cfg, std::uint64_t needed) : cfg_(cfg), rng_(cfg.seed, 10) {
    const std::uint64_t space = latent_space(cfg);
    if (needed > space) {
      std::ostringstream msg;
      msg << "capacity error: " << needed << " distinct sentences requested but the latent space "
          << "(vocab " << cfg.latent_vocab << ", lengths " << cfg.min_len << "-" << cfg.max_len
          << ") holds only " << space;
      throw DataError(msg.str());
    }
    if (needed * 2 > space) {
      dense_ = true;
      // Dense regime: enumerate and shuffle instead of rejection sampling.
      for (std::size_t len = cfg.min_len; len <= cfg.max_len; ++len) {
        Latent s(len, 0);
        while (true) {
          pool_.push_back(s);
          std::size_t i = 0;
          while (i < len && ++s[i] == cfg.latent_vocab) s[i++] = 0;
          if (i == len) break;
        }
      }
      rng_.shuffle(std::span<Latent>(pool_));
    }
  }

  Latent next() {
    if (dense_) return pool_[dense_used_++];
    while (true) {
      const std::size_t len = cfg_.min_len + rng_.below(cfg_.max_len - cfg_.min_len + 1);
      Latent s(len);
      for (auto& t : s) t = rng_.below(cfg_.latent_vocab);
      if (seen_.insert(s).second) return s;
    }
  }

 private:
  const GeneratorConfig& cfg_;
  Rng rng_;
  std::set<Latent> seen_;
  std::vector<Latent> pool_;
  std::size_t dense_used_ = 0;
  bool dense_ = false;
};

}  // namespace

TrilingualSplit generate_trilingual(const GeneratorConfig& cfg) {
  cfg.validate();
  TrilingualSplit split;
  split.config = cfg;
  split.lang_x = make_language("x", cfg, 1, 0, cfg.reorder_window);
  split.lang_z = make_language("z", cfg, 2, 3, 1);
  split.lang_y = make_language("y", cfg, 3, 5, 1);
  split.vocab_x = Vocabulary(split.lang_x.alphabet());
  split.vocab_z = Vocabulary(split.lang_z.alphabet());
  split.vocab_y = Vocabulary(split.lang_y.alphabet());

  const std::uint64_t needed = cfg.xz_pairs + cfg.zy_pairs + cfg.dev_pairs + cfg.test_pairs;
  LatentSampler sampler(cfg, needed);
  auto render = [&](const LanguageSpec& lang, const Vocabulary& v, const Latent& s) {
    return v.encode(lang.render(s));
  };
  auto triple = [&](const Latent& s) {
    return TrilingualSentence{render(split.lang_x, split.vocab_x, s), render(split.lang_z, split.vocab_z, s),
                              render(split.lang_y, split.vocab_y, s)};
  };

  // Draw order is fixed so that shrinking D_{x,z} leaves every other split intact.
  for (std::size_t i = 0; i < cfg.zy_pairs; ++i) {
    const Latent s = sampler.next();
    split.zy_train.push_back({render(split.lang_z, split.vocab_z, s), render(split.lang_y, split.vocab_y, s)});
  }
  for (std::size_t i = 0; i < cfg.dev_pairs; ++i) split.dev.push_back(triple(sampler.next()));
  for (std::size_t i = 0; i < cfg.test_pairs; ++i) split.test.push_back(triple(sampler.next()));
  for (std::size_t i = 0; i < cfg.xz_pairs; ++i) {
    const Latent s = sampler.next();
    split.xz_train.push_back({render(split.lang_x, split.vocab_x, s), render(split.lang_z, split.vocab_z, s)});
  }
  return split;
}

std::vector<std::string> write_split(const TrilingualSplit& split, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<std::string> written;
  auto emit = [&](const std::string& name, const Vocabulary& v, auto&& sentences) {
    std::vector<std::vector<std::string>> lines;
    for (const auto& s : sentences) lines.push_back(v.decode(s));
    write_lines(dir / name, lines);
    written.push_back(name);
  };
  auto side = [](const auto& pairs, bool left) {
    std::vector<TokenSequence> out;
    for (const auto& p : pairs) out.push_back(left ? p.src : p.tgt);
    return out;
  };
  auto field = [](const std::vector<TrilingualSentence>& v, TokenSequence TrilingualSentence::*m) {
    std::vector<TokenSequence> out;
    for (const auto& s : v) out.push_back(s.*m);
    return out;
  };
  emit("train.xz.x", split.vocab_x, side(split.xz_train, true));
  emit("train.xz.z", split.vocab_z, side(split.xz_train, false));
  emit("train.zy.z", split.vocab_z, side(split.zy_train, true));
  emit("train.zy.y", split.vocab_y, side(split.zy_train, false));
  emit("dev.x", split.vocab_x, field(split.dev, &TrilingualSentence::x));
  emit("dev.z", split.vocab_z, field(split.dev, &TrilingualSentence::z));
  emit("dev.y", split.vocab_y, field(split.dev, &TrilingualSentence::y));
  emit("test.x", split.vocab_x, field(split.test, &TrilingualSentence::x));
  emit("test.z", split.vocab_z, field(split.test, &TrilingualSentence::z));
  emit("test.y", split.vocab_y, field(split.test, &TrilingualSentence::y));
  split.vocab_x.save(dir / "vocab.x");
  split.vocab_z.save(dir / "vocab.z");
  split.vocab_y.save(dir / "vocab.y");
  written.insert(written.end(), {"vocab.x", "vocab.z", "vocab.y"});
  return written;
}

}  // namespace tsnmt
