#include "intercross/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "nlohmann/json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace intercross {

TrainMode train_mode_from_string(const std::string& s) {
  if (s == "org" || s == "ORG") return TrainMode::Org;
  if (s == "it" || s == "IT" || s == "intercross") return TrainMode::Intercross;
  throw InvalidConfig("unknown train mode: " + s);
}

std::string to_string(TrainMode mode) {
  return mode == TrainMode::Org ? "org" : "it";
}

TrainConfig train_config_from_json(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw InvalidConfig(std::string("train config parse error: ") + e.what());
  }
  TrainConfig cfg;
  cfg.steps = j.value("steps", cfg.steps);
  cfg.batch_size = j.value("batch_size", cfg.batch_size);
  cfg.learning_rate = j.value("learning_rate", cfg.learning_rate);
  cfg.adam_beta1 = j.value("adam_beta1", cfg.adam_beta1);
  cfg.adam_beta2 = j.value("adam_beta2", cfg.adam_beta2);
  cfg.adam_eps = j.value("adam_eps", cfg.adam_eps);
  cfg.grad_clip_norm = j.value("grad_clip_norm", cfg.grad_clip_norm);
  cfg.seed = j.value("seed", cfg.seed);
  if (j.contains("mode")) cfg.mode = train_mode_from_string(j.at("mode").get<std::string>());
  cfg.eval_every = j.value("eval_every", cfg.eval_every);
  cfg.checkpoint_every = j.value("checkpoint_every", cfg.checkpoint_every);
  if (j.contains("freeze_mask"))
    for (const auto& g : j.at("freeze_mask")) cfg.freeze_mask.insert(g.get<std::string>());
  if (cfg.steps < 1) throw InvalidConfig("steps must be >= 1");
  if (cfg.batch_size < 1) throw InvalidConfig("batch_size must be >= 1");
  return cfg;
}

std::string train_config_to_json(const TrainConfig& cfg) {
  json j;
  j["steps"] = cfg.steps;
  j["batch_size"] = cfg.batch_size;
  j["learning_rate"] = cfg.learning_rate;
  j["adam_beta1"] = cfg.adam_beta1;
  j["adam_beta2"] = cfg.adam_beta2;
  j["adam_eps"] = cfg.adam_eps;
  j["grad_clip_norm"] = cfg.grad_clip_norm;
  j["seed"] = cfg.seed;
  j["mode"] = to_string(cfg.mode);
  j["eval_every"] = cfg.eval_every;
  j["checkpoint_every"] = cfg.checkpoint_every;
  j["freeze_mask"] = std::vector<std::string>(cfg.freeze_mask.begin(), cfg.freeze_mask.end());
  return j.dump(2);
}

ModelConfig model_config_for_corpus(const CorpusManifest& corpus) {
  ModelConfig cfg;
  cfg.num_classes = corpus.num_classes();
  cfg.frame_dim = corpus.frame_dim;
  cfg.vocab_size = corpus.vocab_size;
  cfg.instance_ids.resize(static_cast<size_t>(corpus.num_classes()));
  for (int c = 0; c < corpus.num_classes(); ++c) {
    // Keep the spec's instance order but drop instances with no data.
    std::set<std::string> present;
    for (const auto& rec : corpus.records)
      present.insert(rec.labels[static_cast<size_t>(c)]);
    for (const auto& id : corpus.classes[static_cast<size_t>(c)].instance_ids)
      if (present.count(id)) cfg.instance_ids[static_cast<size_t>(c)].push_back(id);
  }
  cfg.validate();
  return cfg;
}

namespace {

void validate_freeze_mask(const TrainConfig& cfg, const ModelConfig& model_cfg) {
  std::set<std::string> valid = {"text", "dec"};
  for (int n = 0; n < model_cfg.num_classes; ++n) valid.insert("sub" + std::to_string(n));
  for (const auto& g : cfg.freeze_mask)
    if (!valid.count(g)) throw InvalidConfig("freeze_mask names unknown group: " + g);
}

int log_verbosity() {
  const char* env = std::getenv("INTERCROSS_LOG");
  if (env == nullptr) return 0;
  return std::atoi(env);
}

}  // namespace

StepMetrics train_step(const ModelConfig& model_cfg, ParamStore& params,
                       const CorpusManifest& corpus,
                       const std::vector<TrainingExample>& batch, AdamState& opt,
                       const TrainConfig& cfg) {
  validate_freeze_mask(cfg, model_cfg);
  const int N = model_cfg.num_classes;
  const bool aux = N > 1;

  params.zero_grads();
  ad::Tape tape;
  BoundModel m = bind_params(tape, model_cfg, params, cfg.freeze_mask);

  std::vector<std::vector<int>> ref_embs_per_class(static_cast<size_t>(N));
  int recon_sum = -1;
  int cls_sum = -1;
  for (const auto& ex : batch) {
    const auto& target = corpus.records[static_cast<size_t>(ex.target)];
    std::vector<int> ses;
    std::vector<int> logit_vars;
    std::vector<int> labels;
    for (int n = 0; n < N; ++n) {
      const auto& ref = corpus.records[static_cast<size_t>(ex.references[static_cast<size_t>(n)])];
      const int ref_emb = build_reference_encoder(m, n, ref.frames);
      ref_embs_per_class[static_cast<size_t>(n)].push_back(ref_emb);
      ses.push_back(build_style_attend(m, n, ref_emb).style_emb);
      if (aux) {
        logit_vars.push_back(build_classification_logits(m, n, ref_emb));
        labels.push_back(
            model_cfg.label_index(n, ref.labels[static_cast<size_t>(n)]));
      }
    }
    const int text_enc = build_text_encoder(m, target.text);
    const PaddedTarget padded = pad_target(target.frames, model_cfg.frames_per_step);
    const DecodeOut dec = build_decode_teacher_forced(m, text_enc, ses, padded.frames);
    const int recon = build_recon_loss(m, dec, padded);
    recon_sum = recon_sum < 0 ? recon : tape.add(recon_sum, recon);
    if (aux) {
      const int cls = build_classification_loss(m, logit_vars, labels);
      cls_sum = cls_sum < 0 ? cls : tape.add(cls_sum, cls);
    }
  }
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  const int recon_avg = tape.scale(recon_sum, inv_b);

  StepMetrics metrics;
  int total = recon_avg;
  if (aux) {
    const int cls_avg = tape.scale(cls_sum, inv_b);
    std::vector<int> h_batches;
    for (int n = 0; n < N; ++n)
      h_batches.push_back(tape.concat_rows(ref_embs_per_class[static_cast<size_t>(n)]));
    const int orth = build_orthogonality_loss(m, h_batches);
    metrics.cls = tape.scalar(cls_avg);
    metrics.orth = tape.scalar(orth);
    total = tape.add(total, tape.scale(cls_avg, model_cfg.beta));
    total = tape.add(total, tape.scale(orth, model_cfg.gamma));
  }
  metrics.recon = tape.scalar(recon_avg);
  metrics.total = tape.scalar(total);

  if (!std::isfinite(metrics.total)) {
    std::cerr << "non-finite loss: recon=" << metrics.recon << " cls=" << metrics.cls
              << " orth=" << metrics.orth << "\n";
    for (const auto& ex : batch) {
      std::cerr << "  target=" << corpus.records[static_cast<size_t>(ex.target)].utt_id;
      for (int r : ex.references)
        std::cerr << " ref=" << corpus.records[static_cast<size_t>(r)].utt_id;
      std::cerr << "\n";
    }
    throw NonFiniteLoss("train_step: loss is not finite");
  }

  tape.backward(total);

  double norm_sq = 0.0;
  for (const auto& t : params.tensors()) {
    if (cfg.freeze_mask.count(ParamStore::group_of(t.name))) continue;
    norm_sq += t.grad.squaredNorm();
  }
  metrics.grad_norm = std::sqrt(norm_sq);
  double clip_scale = 1.0;
  if (cfg.grad_clip_norm > 0.0 && metrics.grad_norm > cfg.grad_clip_norm)
    clip_scale = cfg.grad_clip_norm / (metrics.grad_norm + 1e-12);

  opt.t += 1;
  const double bc1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(opt.t));
  const double bc2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(opt.t));
  for (auto& t : params.tensors()) {
    if (cfg.freeze_mask.count(ParamStore::group_of(t.name))) continue;
    const Matrix g = t.grad * clip_scale;
    t.adam_m = cfg.adam_beta1 * t.adam_m + (1.0 - cfg.adam_beta1) * g;
    t.adam_v = cfg.adam_beta2 * t.adam_v.array().matrix() +
               (1.0 - cfg.adam_beta2) * g.cwiseProduct(g);
    const Matrix m_hat = t.adam_m / bc1;
    const Matrix v_hat = t.adam_v / bc2;
    t.value.array() -=
        cfg.learning_rate * m_hat.array() / (v_hat.array().sqrt() + cfg.adam_eps);
  }
  return metrics;
}

namespace {

std::vector<TrainingExample> assemble_batch(const InstanceIndex& index, Rng& rng,
                                            const TrainConfig& cfg, int num_classes) {
  std::vector<TrainingExample> batch;
  batch.reserve(static_cast<size_t>(cfg.batch_size));
  for (int i = 0; i < cfg.batch_size; ++i) {
    if (cfg.mode == TrainMode::Org)
      batch.push_back(sample_org_pair(index, rng));
    else if (num_classes == 1)
      batch.push_back(sample_intercross_single(index, rng));
    else
      batch.push_back(sample_intercross_multi(index, rng, num_classes));
  }
  return batch;
}

void append_metrics(std::ofstream* out, const StepMetrics& m) {
  if (out == nullptr || !out->is_open()) return;
  json j;
  j["step"] = m.step;
  j["recon"] = m.recon;
  j["cls"] = m.cls;
  j["orth"] = m.orth;
  j["total"] = m.total;
  j["grad_norm"] = m.grad_norm;
  *out << j.dump() << "\n";
}

// Shared by train_loop and fine_tune once params exist.
void run_training(const CorpusManifest& corpus, const InstanceIndex& index,
                  const TrainConfig& cfg, const std::string& out_dir,
                  TrainResult& result) {
  const int verbosity = log_verbosity();
  Rng rng(Rng::mix(cfg.seed, 0x62617463686573ULL));
  AdamState opt;

  std::ofstream metrics_out;
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    metrics_out.open(fs::path(out_dir) / "metrics.jsonl");
  }

  for (long long step = 1; step <= cfg.steps; ++step) {
    const auto batch =
        assemble_batch(index, rng, cfg, result.checkpoint.config.num_classes);
    StepMetrics m = train_step(result.checkpoint.config, result.checkpoint.params,
                               corpus, batch, opt, cfg);
    m.step = step;
    result.metrics.push_back(m);
    append_metrics(metrics_out.is_open() ? &metrics_out : nullptr, m);
    if (verbosity >= 2 || (verbosity >= 1 && step % cfg.eval_every == 0))
      std::cerr << "step " << step << " total=" << m.total << " recon=" << m.recon
                << " cls=" << m.cls << " orth=" << m.orth
                << " gnorm=" << m.grad_norm << "\n";
    result.checkpoint.step = step;
    if (!out_dir.empty() && cfg.checkpoint_every > 0 && step % cfg.checkpoint_every == 0) {
      char name[32];
      std::snprintf(name, sizeof(name), "step_%08lld", step);
      save_checkpoint(result.checkpoint, (fs::path(out_dir) / name).string());
    }
  }
  if (!out_dir.empty())
    save_checkpoint(result.checkpoint, (fs::path(out_dir) / "checkpoint").string());
}

}  // namespace

TrainResult train_loop(const CorpusManifest& corpus, const ModelConfig& model_cfg,
                       const TrainConfig& cfg, const std::string& out_dir) {
  model_cfg.validate();
  validate_freeze_mask(cfg, model_cfg);
  if (corpus.records.empty()) throw EmptyCorpus("train_loop: corpus has no records");
  const InstanceIndex index = build_index(corpus);

  TrainResult result;
  result.checkpoint.config = model_cfg;
  result.checkpoint.params = init_params(model_cfg, cfg.seed);
  run_training(corpus, index, cfg, out_dir, result);
  return result;
}

TrainResult fine_tune(const Checkpoint& base, const CorpusManifest& adaptation,
                      TrainConfig cfg, const std::string& out_dir) {
  if (adaptation.records.empty())
    throw EmptyCorpus("fine_tune: adaptation corpus has no records");
  if (adaptation.num_classes() != base.config.num_classes)
    throw UnknownClass("fine_tune: adaptation corpus class count differs from model");

  TrainResult result;
  result.checkpoint.config = base.config;
  for (const auto& t : base.params.tensors())
    result.checkpoint.params.add(t.name, t.value);

  // Extend heads for newly introduced instances (zero-initialized slots).
  for (int c = 0; c < adaptation.num_classes(); ++c) {
    std::vector<std::string> new_ids;
    for (const auto& rec : adaptation.records) {
      const auto& id = rec.labels[static_cast<size_t>(c)];
      auto& known = result.checkpoint.config.instance_ids[static_cast<size_t>(c)];
      if (std::find(known.begin(), known.end(), id) == known.end() &&
          std::find(new_ids.begin(), new_ids.end(), id) == new_ids.end())
        new_ids.push_back(id);
    }
    if (new_ids.empty()) continue;
    auto& known = result.checkpoint.config.instance_ids[static_cast<size_t>(c)];
    const std::string s = "sub" + std::to_string(c);
    auto& W = result.checkpoint.params.at(s + ".head.W");
    auto& b = result.checkpoint.params.at(s + ".head.b");
    for (const auto& id : new_ids) {
      known.push_back(id);
      W.value.conservativeResize(Eigen::NoChange, W.value.cols() + 1);
      W.value.col(W.value.cols() - 1).setZero();
      b.value.conservativeResize(Eigen::NoChange, b.value.cols() + 1);
      b.value(0, b.value.cols() - 1) = 0.0;
      for (Matrix* slot : {&W.grad, &W.adam_m, &W.adam_v})
        *slot = Matrix::Zero(W.value.rows(), W.value.cols());
      for (Matrix* slot : {&b.grad, &b.adam_m, &b.adam_v})
        *slot = Matrix::Zero(b.value.rows(), b.value.cols());
    }
  }

  cfg.freeze_mask.insert("text");  // text encoder stays fixed during adaptation
  const InstanceIndex index = build_index(adaptation);
  run_training(adaptation, index, cfg, out_dir, result);
  return result;
}

}  // namespace intercross
