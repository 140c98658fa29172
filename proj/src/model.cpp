#include "intercross/model.hpp"

#include <algorithm>
#include <cmath>

#include "intercross/rng.hpp"

namespace intercross {

int ModelConfig::label_index(int class_idx, const std::string& id) const {
  const auto& ids = instance_ids.at(static_cast<size_t>(class_idx));
  const auto it = std::find(ids.begin(), ids.end(), id);
  if (it == ids.end())
    throw UnknownInstance("label " + id + " unknown to model class " +
                          std::to_string(class_idx));
  return static_cast<int>(it - ids.begin());
}

void ModelConfig::validate() const {
  if (num_classes < 1) throw InvalidConfig("num_classes must be >= 1");
  if (d_style % n_heads != 0) throw InvalidConfig("d_style must divide by n_heads");
  if (frames_per_step < 1) throw InvalidConfig("frames_per_step must be >= 1");
  if (static_cast<int>(instance_ids.size()) != num_classes)
    throw InvalidConfig("instance_ids arity != num_classes");
}

int ParamStore::add(const std::string& name, Matrix value) {
  if (by_name_.count(name)) throw std::logic_error("duplicate tensor " + name);
  Tensor t;
  t.name = name;
  t.grad = Matrix::Zero(value.rows(), value.cols());
  t.adam_m = Matrix::Zero(value.rows(), value.cols());
  t.adam_v = Matrix::Zero(value.rows(), value.cols());
  t.value = std::move(value);
  tensors_.push_back(std::move(t));
  by_name_[name] = tensors_.size() - 1;
  return static_cast<int>(tensors_.size()) - 1;
}

ParamStore::Tensor& ParamStore::at(const std::string& name) {
  const auto it = by_name_.find(name);
  if (it == by_name_.end()) throw std::logic_error("unknown tensor " + name);
  return tensors_[it->second];
}

const ParamStore::Tensor& ParamStore::at(const std::string& name) const {
  const auto it = by_name_.find(name);
  if (it == by_name_.end()) throw std::logic_error("unknown tensor " + name);
  return tensors_[it->second];
}

void ParamStore::zero_grads() {
  for (auto& t : tensors_) t.grad.setZero();
}

std::string ParamStore::group_of(const std::string& tensor_name) {
  const auto dot = tensor_name.find('.');
  return dot == std::string::npos ? tensor_name : tensor_name.substr(0, dot);
}

namespace {

Matrix xavier(Rng& rng, int rows, int cols) {
  const double stddev = std::sqrt(2.0 / static_cast<double>(rows + cols));
  Matrix m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = rng.normal(0.0, stddev);
  return m;
}

void add_gru(ParamStore& p, Rng& rng, const std::string& prefix, int in, int hidden) {
  p.add(prefix + ".Wx", xavier(rng, in, 3 * hidden));
  p.add(prefix + ".Wh", xavier(rng, hidden, 3 * hidden));
  p.add(prefix + ".b", Matrix::Zero(1, 3 * hidden));
}

}  // namespace

ParamStore init_params(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  ParamStore p;
  Rng rng(seed);

  // Text encoder: embedding + bidirectional GRU, halves concatenated.
  const int h_text = cfg.d_text / 2;
  p.add("text.embed", xavier(rng, cfg.vocab_size, cfg.d_emb));
  add_gru(p, rng, "text.fw", cfg.d_emb, h_text);
  add_gru(p, rng, "text.bw", cfg.d_emb, h_text);

  // Per-class sub-encoder: conv stack (widths doubling), GRU summary,
  // token bank, attention projections, classification head.
  for (int n = 0; n < cfg.num_classes; ++n) {
    const std::string s = "sub" + std::to_string(n);
    const int c0 = cfg.conv_channels, c1 = 2 * c0, c2 = 4 * c0;
    p.add(s + ".conv0.W", xavier(rng, 3 * cfg.frame_dim, c0));
    p.add(s + ".conv0.b", Matrix::Zero(1, c0));
    p.add(s + ".conv1.W", xavier(rng, 3 * c0, c1));
    p.add(s + ".conv1.b", Matrix::Zero(1, c1));
    p.add(s + ".conv2.W", xavier(rng, 3 * c1, c2));
    p.add(s + ".conv2.b", Matrix::Zero(1, c2));
    add_gru(p, rng, s + ".gru", c2, cfg.d_ref);

    Matrix bank = xavier(rng, cfg.tokens_per_bank, cfg.d_style);
    for (Eigen::Index r = 0; r < bank.rows(); ++r) bank.row(r).normalize();
    p.add(s + ".bank", std::move(bank));
    p.add(s + ".attn.Wq", xavier(rng, cfg.d_ref, cfg.d_style));
    p.add(s + ".attn.Wk", xavier(rng, cfg.d_style, cfg.d_style));
    p.add(s + ".attn.Wv", xavier(rng, cfg.d_style, cfg.d_style));

    p.add(s + ".head.W", xavier(rng, cfg.d_ref, cfg.instance_count(n)));
    p.add(s + ".head.b", Matrix::Zero(1, cfg.instance_count(n)));
  }

  // Decoder: prenet, additive attention, GRU, frame + stop projections.
  const int d_mem = cfg.d_text + cfg.num_classes * cfg.d_style;
  p.add("dec.prenet.W", xavier(rng, cfg.frame_dim, cfg.d_prenet));
  p.add("dec.prenet.b", Matrix::Zero(1, cfg.d_prenet));
  p.add("dec.attn.Wm", xavier(rng, d_mem, cfg.d_attn));
  p.add("dec.attn.Ws", xavier(rng, cfg.d_dec, cfg.d_attn));
  p.add("dec.attn.b", Matrix::Zero(1, cfg.d_attn));
  p.add("dec.attn.v", xavier(rng, cfg.d_attn, 1));
  add_gru(p, rng, "dec.gru", cfg.d_prenet + d_mem, cfg.d_dec);
  p.add("dec.frame.W", xavier(rng, cfg.d_dec + d_mem, cfg.frames_per_step * cfg.frame_dim));
  p.add("dec.frame.b", Matrix::Zero(1, cfg.frames_per_step * cfg.frame_dim));
  p.add("dec.stop.W", xavier(rng, cfg.d_dec + d_mem, cfg.frames_per_step));
  p.add("dec.stop.b", Matrix::Zero(1, cfg.frames_per_step));
  return p;
}

int BoundModel::var(const std::string& name) const {
  const auto it = vars.find(name);
  if (it == vars.end()) throw std::logic_error("unbound tensor " + name);
  return it->second;
}

BoundModel bind_params(ad::Tape& tape, const ModelConfig& cfg, ParamStore& params,
                       const std::set<std::string>& frozen_groups) {
  BoundModel m;
  m.tape = &tape;
  m.cfg = &cfg;
  for (auto& t : params.tensors()) {
    if (frozen_groups.count(ParamStore::group_of(t.name)))
      m.vars[t.name] = tape.constant(t.value);
    else
      m.vars[t.name] = tape.param(t.value, &t.grad);
  }
  return m;
}

namespace {

// One GRU step; x is 1 x in, h is 1 x hidden.
int gru_step(ad::Tape& t, const BoundModel& m, const std::string& prefix, int x, int h) {
  const int hidden = static_cast<int>(t.val(m.var(prefix + ".Wh")).rows());
  const int gx = t.add(t.matmul(x, m.var(prefix + ".Wx")), m.var(prefix + ".b"));
  const int gh = t.matmul(h, m.var(prefix + ".Wh"));
  const int z = t.sigmoid(t.add(t.slice_cols(gx, 0, hidden), t.slice_cols(gh, 0, hidden)));
  const int r = t.sigmoid(
      t.add(t.slice_cols(gx, hidden, hidden), t.slice_cols(gh, hidden, hidden)));
  const int n = t.tanh(t.add(t.slice_cols(gx, 2 * hidden, hidden),
                             t.hadamard(r, t.slice_cols(gh, 2 * hidden, hidden))));
  // h' = n + z * (h - n)
  return t.add(n, t.hadamard(z, t.sub(h, n)));
}

int conv_relu(ad::Tape& t, const BoundModel& m, const std::string& prefix, int x) {
  const int unfolded = t.unfold_time(x, 3, 2);
  return t.relu(t.add_rowvec(t.matmul(unfolded, m.var(prefix + ".W")),
                             m.var(prefix + ".b")));
}

}  // namespace

int build_reference_encoder(BoundModel& m, int class_idx, const Matrix& frames) {
  if (!frames.allFinite()) throw NonFiniteInput("reference frames contain non-finite values");
  if (frames.rows() < 1) throw NonFiniteInput("reference frames empty");
  ad::Tape& t = *m.tape;
  const std::string s = "sub" + std::to_string(class_idx);
  int x = t.constant(frames);
  x = conv_relu(t, m, s + ".conv0", x);
  x = conv_relu(t, m, s + ".conv1", x);
  x = conv_relu(t, m, s + ".conv2", x);
  int h = t.constant(Matrix::Zero(1, m.cfg->d_ref));
  const int steps = static_cast<int>(t.val(x).rows());
  for (int i = 0; i < steps; ++i)
    h = gru_step(t, m, s + ".gru", t.slice_rows(x, i, 1), h);
  return h;
}

StyleAttendOut build_style_attend(BoundModel& m, int class_idx, int ref_emb) {
  ad::Tape& t = *m.tape;
  const ModelConfig& cfg = *m.cfg;
  const std::string s = "sub" + std::to_string(class_idx);
  const int heads = cfg.n_heads;
  const int d_head = cfg.d_style / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(d_head));

  const int q = t.matmul(ref_emb, m.var(s + ".attn.Wq"));        // 1 x d_style
  const int k = t.matmul(m.var(s + ".bank"), m.var(s + ".attn.Wk"));  // K x d_style
  const int v = t.matmul(m.var(s + ".bank"), m.var(s + ".attn.Wv"));  // K x d_style

  StyleAttendOut out;
  out.weights = Matrix(cfg.tokens_per_bank, heads);
  std::vector<int> head_outs;
  for (int h = 0; h < heads; ++h) {
    const int qh = t.slice_cols(q, h * d_head, d_head);
    const int kh = t.slice_cols(k, h * d_head, d_head);
    const int vh = t.slice_cols(v, h * d_head, d_head);
    const int scores = t.scale(t.matmul(qh, t.transpose(kh)), inv_sqrt);  // 1 x K
    const int alpha = t.softmax_rows(scores);
    out.weights.col(h) = t.val(alpha).row(0).transpose();
    head_outs.push_back(t.matmul(alpha, vh));  // 1 x d_head
  }
  int se = head_outs[0];
  for (size_t h = 1; h < head_outs.size(); ++h) se = t.concat_cols(se, head_outs[h]);
  out.style_emb = se;
  return out;
}

int build_text_encoder(BoundModel& m, const std::vector<int>& tokens) {
  ad::Tape& t = *m.tape;
  const ModelConfig& cfg = *m.cfg;
  if (tokens.empty()) throw UnknownToken("text is empty");
  for (int tok : tokens)
    if (tok < 0 || tok >= cfg.vocab_size)
      throw UnknownToken("token id " + std::to_string(tok) + " outside vocab");

  const int embedded = t.gather_rows(m.var("text.embed"), tokens);  // L x d_emb
  const int L = static_cast<int>(tokens.size());
  const int h_text = cfg.d_text / 2;

  std::vector<int> fw(static_cast<size_t>(L)), bw(static_cast<size_t>(L));
  int h = t.constant(Matrix::Zero(1, h_text));
  for (int i = 0; i < L; ++i) {
    h = gru_step(t, m, "text.fw", t.slice_rows(embedded, i, 1), h);
    fw[static_cast<size_t>(i)] = h;
  }
  h = t.constant(Matrix::Zero(1, h_text));
  for (int i = L - 1; i >= 0; --i) {
    h = gru_step(t, m, "text.bw", t.slice_rows(embedded, i, 1), h);
    bw[static_cast<size_t>(i)] = h;
  }
  std::vector<int> rows(static_cast<size_t>(L));
  for (int i = 0; i < L; ++i)
    rows[static_cast<size_t>(i)] =
        t.concat_cols(fw[static_cast<size_t>(i)], bw[static_cast<size_t>(i)]);
  return t.concat_rows(rows);
}

namespace {

struct DecoderState {
  int memory = -1;      // L x d_mem
  int memory_proj = -1; // L x d_attn
  int state = -1;       // 1 x d_dec
};

DecoderState init_decoder(BoundModel& m, int text_enc, const std::vector<int>& style_embs) {
  ad::Tape& t = *m.tape;
  DecoderState ds;
  const int L = static_cast<int>(t.val(text_enc).rows());
  int mem = text_enc;
  for (int se : style_embs) mem = t.concat_cols(mem, t.repeat_row(se, L));
  ds.memory = mem;
  ds.memory_proj = t.matmul(mem, m.var("dec.attn.Wm"));
  ds.state = t.constant(Matrix::Zero(1, m.cfg->d_dec));
  return ds;
}

struct StepOut {
  int frame_group = -1;  // r x D
  int stop_group = -1;   // r x 1
  Matrix alpha;          // 1 x L
};

StepOut decoder_step(BoundModel& m, DecoderState& ds, int prev_frame) {
  ad::Tape& t = *m.tape;
  const ModelConfig& cfg = *m.cfg;
  const int prenet = t.relu(t.add(t.matmul(prev_frame, m.var("dec.prenet.W")),
                                  m.var("dec.prenet.b")));
  const int query =
      t.add(t.matmul(ds.state, m.var("dec.attn.Ws")), m.var("dec.attn.b"));
  const int energies =
      t.matmul(t.tanh(t.add_rowvec(ds.memory_proj, query)), m.var("dec.attn.v"));
  const int alpha = t.softmax_rows(t.transpose(energies));  // 1 x L
  const int context = t.matmul(alpha, ds.memory);           // 1 x d_mem
  ds.state = gru_step(t, m, "dec.gru", t.concat_cols(prenet, context), ds.state);
  const int out = t.concat_cols(ds.state, context);
  const int frame_flat =
      t.add(t.matmul(out, m.var("dec.frame.W")), m.var("dec.frame.b"));
  const int stop_flat = t.add(t.matmul(out, m.var("dec.stop.W")), m.var("dec.stop.b"));
  StepOut so;
  so.frame_group = t.reshape(frame_flat, cfg.frames_per_step, cfg.frame_dim);
  so.stop_group = t.reshape(stop_flat, cfg.frames_per_step, 1);
  so.alpha = t.val(alpha);
  return so;
}

}  // namespace

DecodeOut build_decode_teacher_forced(BoundModel& m, int text_enc,
                                      const std::vector<int>& style_embs,
                                      const Matrix& padded_target) {
  ad::Tape& t = *m.tape;
  const ModelConfig& cfg = *m.cfg;
  const int r = cfg.frames_per_step;
  if (padded_target.rows() % r != 0)
    throw std::logic_error("teacher-forced target must be padded to a multiple of r");
  const int steps = static_cast<int>(padded_target.rows()) / r;
  DecoderState ds = init_decoder(m, text_enc, style_embs);
  DecodeOut out;
  out.attention = Matrix(steps, t.val(ds.memory).rows());
  std::vector<int> frame_groups, stop_groups;
  int prev = t.constant(Matrix::Zero(1, cfg.frame_dim));
  for (int step = 0; step < steps; ++step) {
    StepOut so = decoder_step(m, ds, prev);
    out.attention.row(step) = so.alpha.row(0);
    frame_groups.push_back(so.frame_group);
    stop_groups.push_back(so.stop_group);
    prev = t.constant(padded_target.row((step + 1) * r - 1));
  }
  out.frames = t.concat_rows(frame_groups);
  out.stop_logits = t.concat_rows(stop_groups);
  return out;
}

DecodeOut build_decode_free_running(BoundModel& m, int text_enc,
                                    const std::vector<int>& style_embs, int max_steps) {
  ad::Tape& t = *m.tape;
  const ModelConfig& cfg = *m.cfg;
  const int r = cfg.frames_per_step;
  DecoderState ds = init_decoder(m, text_enc, style_embs);
  DecodeOut out;
  std::vector<int> frame_groups, stop_groups;
  std::vector<Matrix> alphas;
  int prev = t.constant(Matrix::Zero(1, cfg.frame_dim));
  bool stopped = false;
  for (int step = 0; step < max_steps; ++step) {
    StepOut so = decoder_step(m, ds, prev);
    alphas.push_back(so.alpha);
    frame_groups.push_back(so.frame_group);
    stop_groups.push_back(so.stop_group);
    const Matrix& stops = t.val(so.stop_group);
    if ((stops.array() > 0.0).any()) {  // sigmoid(x) > 0.5 iff x > 0
      stopped = true;
      break;
    }
    prev = t.constant(t.val(so.frame_group).row(r - 1));
  }
  out.max_steps_exceeded = !stopped;
  out.frames = t.concat_rows(frame_groups);
  out.stop_logits = t.concat_rows(stop_groups);
  out.attention = Matrix(static_cast<Eigen::Index>(alphas.size()), alphas[0].cols());
  for (size_t i = 0; i < alphas.size(); ++i)
    out.attention.row(static_cast<Eigen::Index>(i)) = alphas[i].row(0);
  return out;
}

PaddedTarget pad_target(const Matrix& target, int frames_per_step) {
  const int T = static_cast<int>(target.rows());
  const int r = frames_per_step;
  const int padded_len = ((T + r - 1) / r) * r;
  PaddedTarget p;
  p.frames = Matrix::Zero(padded_len, target.cols());
  p.frames.topRows(T) = target;
  p.frame_mask = Matrix::Zero(padded_len, target.cols());
  p.frame_mask.topRows(T).setOnes();
  p.stop_targets = Matrix::Zero(padded_len, 1);
  p.stop_mask = Matrix::Zero(padded_len, 1);
  for (int i = T - 1; i < padded_len; ++i) p.stop_targets(i, 0) = 1.0;
  // Supervise stops on real frames plus the first pad; later pads are masked.
  const int stop_end = std::min(T, padded_len - 1);
  for (int i = 0; i <= stop_end; ++i) p.stop_mask(i, 0) = 1.0;
  return p;
}

int build_recon_loss(BoundModel& m, const DecodeOut& decode, const PaddedTarget& padded) {
  ad::Tape& t = *m.tape;
  const int mse = t.masked_mse(decode.frames, padded.frames, padded.frame_mask);
  const int bce =
      t.masked_bce_logits(decode.stop_logits, padded.stop_targets, padded.stop_mask);
  return t.add(mse, bce);
}

int build_classification_logits(BoundModel& m, int class_idx, int ref_emb) {
  ad::Tape& t = *m.tape;
  const std::string s = "sub" + std::to_string(class_idx);
  return t.add(t.matmul(ref_emb, m.var(s + ".head.W")), m.var(s + ".head.b"));
}

int build_classification_loss(BoundModel& m, const std::vector<int>& logit_vars,
                              const std::vector<int>& labels) {
  ad::Tape& t = *m.tape;
  if (logit_vars.size() != labels.size())
    throw std::logic_error("classification loss arity mismatch");
  int total = -1;
  for (size_t n = 0; n < logit_vars.size(); ++n) {
    const int loss = t.softmax_xent(logit_vars[n], {labels[n]});
    total = (total < 0) ? loss : t.add(total, loss);
  }
  return t.scale(total, 1.0 / static_cast<double>(logit_vars.size()));
}

int build_orthogonality_loss(BoundModel& m, const std::vector<int>& ref_emb_batches) {
  ad::Tape& t = *m.tape;
  if (ref_emb_batches.size() < 2) return t.constant(Matrix::Zero(1, 1));
  std::vector<int> normalized;
  for (int h : ref_emb_batches) normalized.push_back(t.l2_normalize_rows(h));
  int total = -1;
  for (size_t i = 0; i < normalized.size(); ++i) {
    for (size_t j = i + 1; j < normalized.size(); ++j) {
      const int cross = t.matmul(t.transpose(normalized[i]), normalized[j]);
      const int fro = t.frobenius_sq(cross);
      total = (total < 0) ? fro : t.add(total, fro);
    }
  }
  return total;
}

// --- eval-mode wrappers ---

Matrix reference_encode(const ModelConfig& cfg, ParamStore& params, int class_idx,
                        const Matrix& frames) {
  ad::Tape tape;
  BoundModel m = bind_params(tape, cfg, params);
  return tape.val(build_reference_encoder(m, class_idx, frames));
}

StyleAttendResult style_attend(const ModelConfig& cfg, ParamStore& params,
                               int class_idx, const Vector& ref_emb) {
  ad::Tape tape;
  BoundModel m = bind_params(tape, cfg, params);
  const int re = tape.constant(ref_emb.transpose());
  StyleAttendOut out = build_style_attend(m, class_idx, re);
  StyleAttendResult res;
  res.style_emb = tape.val(out.style_emb).row(0).transpose();
  res.weights = out.weights;
  return res;
}

Matrix text_encode(const ModelConfig& cfg, ParamStore& params,
                   const std::vector<int>& tokens) {
  ad::Tape tape;
  BoundModel m = bind_params(tape, cfg, params);
  return tape.val(build_text_encoder(m, tokens));
}

DecodeResult decode_teacher_forced(const ModelConfig& cfg, ParamStore& params,
                                   const std::vector<int>& tokens,
                                   const std::vector<Vector>& style_embs,
                                   const Matrix& target) {
  ad::Tape tape;
  BoundModel m = bind_params(tape, cfg, params);
  const int text_enc = build_text_encoder(m, tokens);
  std::vector<int> ses;
  for (const auto& se : style_embs) ses.push_back(tape.constant(se.transpose()));
  const PaddedTarget padded = pad_target(target, cfg.frames_per_step);
  DecodeOut out = build_decode_teacher_forced(m, text_enc, ses, padded.frames);
  DecodeResult res;
  res.frames = tape.val(out.frames);
  res.stop_logits = tape.val(out.stop_logits);
  res.attention = out.attention;
  return res;
}

DecodeResult decode_free_running(const ModelConfig& cfg, ParamStore& params,
                                 const std::vector<int>& tokens,
                                 const std::vector<Vector>& style_embs, int max_steps) {
  ad::Tape tape;
  BoundModel m = bind_params(tape, cfg, params);
  const int text_enc = build_text_encoder(m, tokens);
  std::vector<int> ses;
  for (const auto& se : style_embs) ses.push_back(tape.constant(se.transpose()));
  DecodeOut out = build_decode_free_running(m, text_enc, ses, max_steps);
  DecodeResult res;
  res.frames = tape.val(out.frames);
  res.stop_logits = tape.val(out.stop_logits);
  res.attention = out.attention;
  res.max_steps_exceeded = out.max_steps_exceeded;
  return res;
}

ForwardResult forward(const ModelConfig& cfg, ParamStore& params,
                      const std::vector<Matrix>& reference_frames,
                      const std::vector<int>& target_text, const Matrix& target_frames) {
  if (static_cast<int>(reference_frames.size()) != cfg.num_classes)
    throw std::logic_error("forward: reference count != num_classes");
  ad::Tape tape;
  BoundModel m = bind_params(tape, cfg, params);
  ForwardResult res;
  std::vector<int> ses;
  for (int n = 0; n < cfg.num_classes; ++n) {
    const int ref = build_reference_encoder(m, n, reference_frames[static_cast<size_t>(n)]);
    StyleAttendOut att = build_style_attend(m, n, ref);
    const int logits = build_classification_logits(m, n, ref);
    res.ref_embs.push_back(tape.val(ref).row(0).transpose());
    res.style_embs.push_back(tape.val(att.style_emb).row(0).transpose());
    res.class_logits.push_back(tape.val(logits).row(0).transpose());
    ses.push_back(att.style_emb);
  }
  const int text_enc = build_text_encoder(m, target_text);
  const PaddedTarget padded = pad_target(target_frames, cfg.frames_per_step);
  DecodeOut out = build_decode_teacher_forced(m, text_enc, ses, padded.frames);
  res.pred_frames = tape.val(out.frames);
  res.stop_logits = tape.val(out.stop_logits);
  return res;
}

double recon_loss(const Matrix& pred, const Matrix& stop_logits, const Matrix& target,
                  int frames_per_step) {
  ad::Tape tape;
  const PaddedTarget padded = pad_target(target, frames_per_step);
  if (pred.rows() != padded.frames.rows())
    throw std::logic_error("recon_loss: prediction length != padded target length");
  const int p = tape.constant(pred);
  const int s = tape.constant(stop_logits);
  const int mse = tape.masked_mse(p, padded.frames, padded.frame_mask);
  const int bce = tape.masked_bce_logits(s, padded.stop_targets, padded.stop_mask);
  return tape.scalar(mse) + tape.scalar(bce);
}

double classification_loss(const std::vector<Vector>& class_logits,
                           const std::vector<int>& labels) {
  if (class_logits.size() != labels.size())
    throw std::logic_error("classification_loss arity mismatch");
  ad::Tape tape;
  double total = 0.0;
  for (size_t n = 0; n < class_logits.size(); ++n) {
    const int logits = tape.constant(class_logits[n].transpose());
    total += tape.scalar(tape.softmax_xent(logits, {labels[n]}));
  }
  return total / static_cast<double>(class_logits.size());
}

double orthogonality_loss(const std::vector<Matrix>& ref_emb_batches) {
  ad::Tape tape;
  BoundModel dummy;
  dummy.tape = &tape;
  std::vector<int> vars;
  for (const auto& h : ref_emb_batches) vars.push_back(tape.constant(h));
  return tape.scalar(build_orthogonality_loss(dummy, vars));
}

LossBreakdown total_loss(double recon, double classification, double orthogonality,
                         double beta, double gamma, int num_classes) {
  LossBreakdown b;
  b.recon = recon;
  // Auxiliary tasks only apply to multi-reference models.
  b.classification = num_classes > 1 ? classification : 0.0;
  b.orthogonality = num_classes > 1 ? orthogonality : 0.0;
  b.total = b.recon + beta * b.classification + gamma * b.orthogonality;
  return b;
}

}  // namespace intercross
