#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "tsnmt/corpus.hpp"
#include "tsnmt/model.hpp"
#include "tsnmt/trainer.hpp"

namespace tsnmt {

// Paths used by `train`. Empty means "not given".
struct TrainPaths {
  std::string train_src, train_tgt;      // (x, y) for mle, (x, z) for teaching
  std::string dev_src, dev_tgt;          // (x, y)
  std::string dev_kl_src, dev_kl_tgt;    // (x, z)
  std::string src_vocab, tgt_vocab;      // built from the training files when empty
  std::string pivot_vocab;               // encodes z for teaching methods
  std::string teacher;                   // teacher checkpoint
  std::string init;                      // start from this checkpoint instead of random init
  std::string out = "run";
};

// One JSON document per run. Sections: generator, model, method, teaching,
// optimizer, schedule, seeds, eval, freeze, init_from_teacher, cache_teacher, paths.
struct ExperimentConfig {
  GeneratorConfig generator;
  ModelConfig model;  // vocabulary sizes are filled in from the data
  TrainConfig train;
  bool init_from_teacher = false;
  bool freeze_given = false;  // set by from_json when the document has a freeze section
  TrainPaths paths;

  std::string to_json() const;
  // Accepts either a bare config or a run manifest (uses its "config" member).
  // Unknown keys are a ConfigError.
  static ExperimentConfig from_json(const std::string& text);
  static ExperimentConfig load(const std::filesystem::path& path);
};

std::string sha256_file(const std::filesystem::path& path);

}  // namespace tsnmt
