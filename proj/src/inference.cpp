#include "intercross/inference.hpp"

namespace intercross {

Vector extract_style(const ModelConfig& cfg, ParamStore& params, int class_idx,
                     const Matrix& frames) {
  ad::Tape tape;
  BoundModel m = bind_params(tape, cfg, params);
  const int ref = build_reference_encoder(m, class_idx, frames);
  return tape.val(build_style_attend(m, class_idx, ref).style_emb).row(0).transpose();
}

SynthesisResult synthesize(const ModelConfig& cfg, ParamStore& params,
                           const std::vector<Vector>& style_embs,
                           const std::vector<int>& text, int max_steps) {
  if (static_cast<int>(style_embs.size()) != cfg.num_classes)
    throw std::logic_error("synthesize: style embedding count != num_classes");
  DecodeResult dec = decode_free_running(cfg, params, text, style_embs, max_steps);
  SynthesisResult out;
  out.frames = std::move(dec.frames);
  out.stop_logits = std::move(dec.stop_logits);
  out.max_steps_exceeded = dec.max_steps_exceeded;
  return out;
}

SynthesisResult transfer(const ModelConfig& cfg, ParamStore& params,
                         const std::vector<Matrix>& reference_frames,
                         const std::vector<int>& text, int max_steps) {
  if (static_cast<int>(reference_frames.size()) != cfg.num_classes)
    throw std::logic_error("transfer: reference count != num_classes");
  std::vector<Vector> ses;
  for (int n = 0; n < cfg.num_classes; ++n)
    ses.push_back(extract_style(cfg, params, n, reference_frames[static_cast<size_t>(n)]));
  return synthesize(cfg, params, ses, text, max_steps);
}

Vector interpolate(const Vector& se_from, const Vector& se_to, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0))
    throw AlphaOutOfRange("alpha must lie in [0, 1], got " + std::to_string(alpha));
  if (se_from.size() != se_to.size())
    throw std::logic_error("interpolate: dimension mismatch");
  return se_from + alpha * (se_to - se_from);
}

RandomStyle random_style(const ModelConfig& cfg, ParamStore& params, int class_idx,
                         Rng& rng) {
  const int K = cfg.tokens_per_bank;
  Vector a(K);
  for (int k = 0; k < K; ++k) a(k) = rng.uniform();
  const double mx = a.maxCoeff();
  Vector w = (a.array() - mx).exp();
  w /= w.sum();

  ad::Tape tape;
  BoundModel m = bind_params(tape, cfg, params);
  const std::string s = "sub" + std::to_string(class_idx);
  // Same projected token values the attention averages over, concat by head.
  const Matrix v = tape.val(tape.matmul(m.var(s + ".bank"), m.var(s + ".attn.Wv")));
  RandomStyle out;
  out.weights = w;
  out.style_emb = (w.transpose() * v).transpose();
  return out;
}

int trim_at_stop(const Matrix& stop_logits) {
  for (Eigen::Index i = 0; i < stop_logits.rows(); ++i)
    if (stop_logits(i, 0) > 0.0) return static_cast<int>(i) + 1;
  return static_cast<int>(stop_logits.rows());
}

}  // namespace intercross
