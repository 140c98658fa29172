#pragma once

#include "intercross/model.hpp"
#include "intercross/rng.hpp"

namespace intercross {

struct AlphaOutOfRange : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// reference_encode followed by style_attend; pure over frozen params.
Vector extract_style(const ModelConfig& cfg, ParamStore& params, int class_idx,
                     const Matrix& frames);

struct SynthesisResult {
  Matrix frames;       // multiple of r rows; trim_at_stop gives content length
  Matrix stop_logits;  // same row count, 1 column
  bool max_steps_exceeded = false;
};

SynthesisResult synthesize(const ModelConfig& cfg, ParamStore& params,
                           const std::vector<Vector>& style_embs,
                           const std::vector<int>& text, int max_steps);

// One reference audio per class; embeddings extracted in eval mode, then a
// free-running decode on the given text.
SynthesisResult transfer(const ModelConfig& cfg, ParamStore& params,
                         const std::vector<Matrix>& reference_frames,
                         const std::vector<int>& text, int max_steps);

// Fresh lerp value; alpha outside [0, 1] is an error.
Vector interpolate(const Vector& se_from, const Vector& se_to, double alpha);

struct RandomStyle {
  Vector style_emb;
  Vector weights;  // softmax of the K uniform draws
};
// Softmax-weighted combination of projected token values, one weight vector
// shared across heads.
RandomStyle random_style(const ModelConfig& cfg, ParamStore& params, int class_idx,
                         Rng& rng);

// Frames up to and including the first stop (sigmoid > 0.5); all frames when
// no stop fires.
int trim_at_stop(const Matrix& stop_logits);

}  // namespace intercross
