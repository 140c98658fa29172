#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "intercross/autodiff.hpp"
#include "intercross/blobio.hpp"

namespace intercross {

struct NonFiniteInput : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct UnknownToken : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ModelConfig {
  int num_classes = 1;  // N sub-encoders
  int frame_dim = 32;   // D
  int vocab_size = 40;
  int d_ref = 64;          // reference embedding size
  int tokens_per_bank = 10;  // K style tokens
  int n_heads = 4;
  int d_style = 64;
  int d_text = 128;
  int frames_per_step = 5;  // r
  int d_emb = 32;
  int conv_channels = 32;  // first conv width; doubles per layer
  int d_dec = 128;
  int d_prenet = 64;
  int d_attn = 64;
  double beta = 1.0;    // classification weight
  double gamma = 0.02;  // orthogonality weight
  std::vector<std::vector<std::string>> instance_ids;  // label vocab per class

  int instance_count(int class_idx) const {
    return static_cast<int>(instance_ids.at(static_cast<size_t>(class_idx)).size());
  }
  int label_index(int class_idx, const std::string& id) const;
  void validate() const;
};

// Named dense tensors plus optimizer slots, insertion-ordered.
class ParamStore {
 public:
  struct Tensor {
    std::string name;
    Matrix value;
    Matrix grad;
    Matrix adam_m;
    Matrix adam_v;
  };

  int add(const std::string& name, Matrix value);
  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;
  bool has(const std::string& name) const { return by_name_.count(name) > 0; }
  std::vector<Tensor>& tensors() { return tensors_; }
  const std::vector<Tensor>& tensors() const { return tensors_; }
  void zero_grads();

  // Group = name prefix up to the first '.', e.g. "text", "sub0", "dec".
  static std::string group_of(const std::string& tensor_name);

 private:
  std::vector<Tensor> tensors_;
  std::map<std::string, size_t> by_name_;
};

ParamStore init_params(const ModelConfig& cfg, std::uint64_t seed);

// Binds the whole store onto a tape. Tensors whose group is in
// `frozen_groups` enter as constants and receive no gradient.
struct BoundModel {
  ad::Tape* tape = nullptr;
  const ModelConfig* cfg = nullptr;
  std::map<std::string, int> vars;

  int var(const std::string& name) const;
};

BoundModel bind_params(ad::Tape& tape, const ModelConfig& cfg, ParamStore& params,
                       const std::set<std::string>& frozen_groups = {});

// --- graph builders (training path; everything differentiable) ---

int build_reference_encoder(BoundModel& m, int class_idx, const Matrix& frames);

struct StyleAttendOut {
  int style_emb;      // 1 x d_style
  Matrix weights;     // K x n_heads, copied off-tape
};
StyleAttendOut build_style_attend(BoundModel& m, int class_idx, int ref_emb);

int build_text_encoder(BoundModel& m, const std::vector<int>& tokens);

struct DecodeOut {
  int frames = -1;        // T' x D
  int stop_logits = -1;   // T' x 1
  Matrix attention;       // steps x L, copied off-tape
  bool max_steps_exceeded = false;
};

// Teacher-forced decode over a target padded to a multiple of r.
DecodeOut build_decode_teacher_forced(BoundModel& m, int text_enc,
                                      const std::vector<int>& style_embs,
                                      const Matrix& padded_target);
// Free-running decode; feedback frames enter as constants.
DecodeOut build_decode_free_running(BoundModel& m, int text_enc,
                                    const std::vector<int>& style_embs, int max_steps);

// Target padding and loss masks. Stop targets are 1 from the last real frame
// through the pads; masks drop pad frames (frames) and pads past the first
// stop frame (stops).
struct PaddedTarget {
  Matrix frames;        // T' x D, zero-padded
  Matrix frame_mask;    // T' x D
  Matrix stop_targets;  // T' x 1
  Matrix stop_mask;     // T' x 1
};
PaddedTarget pad_target(const Matrix& target, int frames_per_step);

int build_recon_loss(BoundModel& m, const DecodeOut& decode, const PaddedTarget& padded);
int build_classification_logits(BoundModel& m, int class_idx, int ref_emb);
// Mean over classes of softmax cross-entropy; `labels[n]` is the instance
// index for sub-encoder n.
int build_classification_loss(BoundModel& m, const std::vector<int>& logit_vars,
                              const std::vector<int>& labels);
// Sum over unordered pairs i<j of ||Hi^T Hj||_F^2 with rows L2-normalized.
// Returns a constant zero node when fewer than two classes are given.
int build_orthogonality_loss(BoundModel& m, const std::vector<int>& ref_emb_batches);

// --- eval-mode wrappers (no gradients; fresh tape per call) ---

Matrix reference_encode(const ModelConfig& cfg, ParamStore& params, int class_idx,
                        const Matrix& frames);

struct StyleAttendResult {
  Vector style_emb;
  Matrix weights;  // K x n_heads
};
StyleAttendResult style_attend(const ModelConfig& cfg, ParamStore& params,
                               int class_idx, const Vector& ref_emb);

Matrix text_encode(const ModelConfig& cfg, ParamStore& params,
                   const std::vector<int>& tokens);

struct DecodeResult {
  Matrix frames;
  Matrix stop_logits;
  Matrix attention;
  bool max_steps_exceeded = false;
};
DecodeResult decode_teacher_forced(const ModelConfig& cfg, ParamStore& params,
                                   const std::vector<int>& tokens,
                                   const std::vector<Vector>& style_embs,
                                   const Matrix& target);
DecodeResult decode_free_running(const ModelConfig& cfg, ParamStore& params,
                                 const std::vector<int>& tokens,
                                 const std::vector<Vector>& style_embs, int max_steps);

struct ForwardResult {
  Matrix pred_frames;
  Matrix stop_logits;
  std::vector<Vector> ref_embs;
  std::vector<Vector> style_embs;
  std::vector<Vector> class_logits;
};
ForwardResult forward(const ModelConfig& cfg, ParamStore& params,
                      const std::vector<Matrix>& reference_frames,
                      const std::vector<int>& target_text, const Matrix& target_frames);

double recon_loss(const Matrix& pred, const Matrix& stop_logits, const Matrix& target,
                  int frames_per_step);
double classification_loss(const std::vector<Vector>& class_logits,
                           const std::vector<int>& labels);
double orthogonality_loss(const std::vector<Matrix>& ref_emb_batches);

struct LossBreakdown {
  double recon = 0.0;
  double classification = 0.0;
  double orthogonality = 0.0;
  double total = 0.0;
};
// Auxiliary terms count only for multi-reference models (num_classes > 1).
LossBreakdown total_loss(double recon, double classification, double orthogonality,
                         double beta, double gamma, int num_classes);

}  // namespace intercross
