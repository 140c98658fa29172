#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "intercross/blobio.hpp"

namespace intercross {

struct InvalidConfig : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct SeparationUnachievable : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct UnknownInstance : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct EmptyText : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct MissingFile : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct CorruptFrames : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class FactorKind { SpectralProfile, DurationRhythm, AmplitudeEnvelope };

std::string to_string(FactorKind kind);
FactorKind factor_kind_from_string(const std::string& s);

struct StyleClassSpec {
  std::string name;
  std::vector<std::string> instance_ids;
  FactorKind factor_kind;
};

void check_class_specs(const std::vector<StyleClassSpec>& classes);

// Ground-truth parameters, one vector per (class, instance).
//   SpectralProfile:   D-dim additive channel offset
//   DurationRhythm:    (frames-per-token multiplier in [0.5, 2], rhythm depth)
//   AmplitudeEnvelope: (global gain, attack fraction, decay fraction)
struct FactorBank {
  std::vector<std::vector<Vector>> params;  // [class][instance]

  const Vector& lookup(const std::vector<StyleClassSpec>& classes, int class_idx,
                       const std::string& instance_id) const;
};

struct FactorBankOptions {
  double spectral_floor = 2.0;
  double duration_floor = 0.25;
  double amplitude_floor = 0.12;
  double spectral_sigma = 0.5;
  int max_retries_per_instance = 200;
};

double separation_floor_for(const FactorBankOptions& opts, FactorKind kind);

FactorBank make_factor_bank(const std::vector<StyleClassSpec>& classes,
                            std::uint64_t seed, int frame_dim,
                            const FactorBankOptions& opts = {});

// Per-token frame templates; the corpus-wide "language".
Matrix make_template_table(std::uint64_t template_seed, int vocab_size, int frame_dim);

inline constexpr int kBaseFramesPerToken = 4;
inline constexpr int kRhythmPeriod = 8;

// Frame count law: every token spans round(base * multiplier) frames.
int frames_per_token(double duration_multiplier);

Matrix render_utterance(const FactorBank& bank,
                        const std::vector<StyleClassSpec>& classes,
                        const std::vector<std::string>& labels,
                        const std::vector<int>& text, const Matrix& templates);

struct UtteranceRecord {
  std::string utt_id;
  std::vector<int> text;
  std::vector<std::string> labels;  // class order
  Matrix frames;                    // T x D
  std::string frame_file;
  std::int64_t byte_offset = 0;

  int T() const { return static_cast<int>(frames.rows()); }
};

struct CorpusManifest {
  std::vector<StyleClassSpec> classes;
  int frame_dim = 0;
  int vocab_size = 0;
  std::uint64_t seed = 0;
  std::uint64_t template_seed = 0;
  FactorBank bank;
  Matrix templates;
  std::vector<UtteranceRecord> records;
  std::string base_dir;

  int num_classes() const { return static_cast<int>(classes.size()); }
  int instance_index(int class_idx, const std::string& instance_id) const;
};

struct CorpusConfig {
  std::uint64_t seed = 0;
  std::uint64_t template_seed = 1234;
  int frame_dim = 32;
  int vocab_size = 40;
  int text_len_min = 4;
  int text_len_max = 16;
  int utterances_per_cell = 50;
  std::vector<StyleClassSpec> classes;
  std::vector<std::vector<std::string>> empty_cells;
  std::map<std::vector<std::string>, int> cell_counts;  // overrides
  FactorBankOptions bank_options;
};

CorpusConfig corpus_config_from_json(const std::string& json_text);
std::string corpus_config_to_json(const CorpusConfig& config);

CorpusManifest generate_corpus(const CorpusConfig& config, const std::string& out_dir);
CorpusManifest load_corpus(const std::string& dir);
std::vector<std::string> validate_manifest(const CorpusManifest& manifest);

// Ground-truth factor statistics, extracted from frames without access to
// the bank. Used as the oracle side of transfer/interpolation checks.
Vector spectral_statistic(const Matrix& frames, const std::vector<int>& text,
                          const Matrix& templates);
double duration_statistic(int total_frames, int num_tokens);
double amplitude_statistic(const Matrix& frames, const std::vector<int>& text,
                           const Matrix& templates);

}  // namespace intercross
