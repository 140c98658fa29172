#pragma once

#include <string>
#include <vector>

#include "intercross/corpus.hpp"
#include "intercross/model.hpp"

namespace intercross {

// Sub-encoder n style embeddings for every record, row order = record order.
Matrix corpus_style_embeddings(const ModelConfig& cfg, ParamStore& params,
                               const CorpusManifest& corpus, int class_idx);

std::vector<int> corpus_labels(const CorpusManifest& corpus, int class_idx);

// Mean pairwise within-instance distance over mean between-instance distance;
// 0 when embeddings are constant per instance, about 1 when unrelated.
double invariance_ratio(const Matrix& embeddings, const std::vector<int>& labels);

// Multinomial linear probe, 80/20 split at fixed seed; returns held-out accuracy.
double leakage_probe(const Matrix& embeddings, const std::vector<int>& labels,
                     std::uint64_t seed);

// Majority class frequency; the chance baseline for probes under imbalance.
double empirical_chance(const std::vector<int>& labels);

struct KMeansResult {
  std::vector<int> assignment;
  double inertia = 0.0;
};
KMeansResult kmeans(const Matrix& points, int k, std::uint64_t seed, int restarts = 4,
                    int iters = 100);

double cluster_purity(const Matrix& embeddings, const std::vector<int>& labels, int k,
                      std::uint64_t seed);

struct PcaResult {
  Matrix coordinates;                      // rows x dims
  std::vector<double> explained_variance;  // fraction per component
};
PcaResult pca_project(const Matrix& embeddings, int dims = 2);

struct LengthDiagnostic {
  double corr_text = 0.0;    // output length vs text token count
  double corr_ref = 0.0;     // output length vs reference frame count
  bool corr_text_defined = true;
  bool corr_ref_defined = true;
};
// Synthesizes a |texts| x |references| transfer grid with sub-encoder 0 fed
// from each reference.
LengthDiagnostic length_diagnostic(const ModelConfig& cfg, ParamStore& params,
                                   const CorpusManifest& corpus,
                                   const std::vector<std::vector<int>>& texts,
                                   const std::vector<int>& reference_records,
                                   int max_steps);

// TSV of embeddings plus a metadata TSV (utt_id and one label column per class).
void export_embeddings(const ModelConfig& cfg, ParamStore& params,
                       const CorpusManifest& corpus, int class_idx,
                       const std::string& out_prefix);

// Full report over all sub-encoders; schema_version pins the layout.
std::string eval_report_json(const ModelConfig& cfg, ParamStore& params,
                             const CorpusManifest& corpus, std::uint64_t seed);

}  // namespace intercross
