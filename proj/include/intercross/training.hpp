#pragma once

#include <set>
#include <string>
#include <vector>

#include "intercross/checkpoint.hpp"
#include "intercross/model.hpp"
#include "intercross/sampler.hpp"

namespace intercross {

struct NonFiniteLoss : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct UnknownClass : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class TrainMode { Org, Intercross };

TrainMode train_mode_from_string(const std::string& s);
std::string to_string(TrainMode mode);

struct TrainConfig {
  long long steps = 1000;
  int batch_size = 16;
  double learning_rate = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double grad_clip_norm = 1.0;
  std::uint64_t seed = 0;
  TrainMode mode = TrainMode::Intercross;
  long long eval_every = 100;
  long long checkpoint_every = 0;  // 0 = final checkpoint only
  std::set<std::string> freeze_mask;  // parameter group names
};

TrainConfig train_config_from_json(const std::string& json_text);
std::string train_config_to_json(const TrainConfig& cfg);

struct StepMetrics {
  long long step = 0;
  double recon = 0.0;
  double cls = 0.0;
  double orth = 0.0;
  double total = 0.0;
  double grad_norm = 0.0;
};

struct AdamState {
  long long t = 0;  // moment slots live in ParamStore
};

// One optimizer step over a batch of examples. Only tensors outside the
// freeze mask move; metrics report the loss breakdown before the update.
StepMetrics train_step(const ModelConfig& model_cfg, ParamStore& params,
                       const CorpusManifest& corpus,
                       const std::vector<TrainingExample>& batch, AdamState& opt,
                       const TrainConfig& cfg);

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<StepMetrics> metrics;
};

// Full loop: sampling per `cfg.mode`, metrics JSONL and checkpoints under
// `out_dir` when given. Deterministic for a fixed seed (single-threaded
// numeric path).
TrainResult train_loop(const CorpusManifest& corpus, const ModelConfig& model_cfg,
                       const TrainConfig& cfg, const std::string& out_dir = "");

// Few-shot adaptation: extends the classification head of the class that
// gained a new instance, freezes the text encoder, and trains on the
// adaptation corpus.
TrainResult fine_tune(const Checkpoint& base, const CorpusManifest& adaptation,
                      TrainConfig cfg, const std::string& out_dir = "");

// ModelConfig whose label vocab comes from the instances actually present in
// the corpus records (held-out instances stay out of the heads).
ModelConfig model_config_for_corpus(const CorpusManifest& corpus);

}  // namespace intercross
