#pragma once

#include <stdexcept>
#include <vector>

#include "intercross/corpus.hpp"
#include "intercross/rng.hpp"

namespace intercross {

struct EmptyCorpus : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// References one record per style class plus a target record, all as indices
// into the manifest's record list. Invariant: for every class n,
// records[references[n]].labels[n] == records[target].labels[n].
struct TrainingExample {
  std::vector<int> references;
  int target = -1;
};

// Per (class, instance) groups of record indices, sorted by utt_id. An
// instance with no data has an empty group.
class InstanceIndex {
 public:
  InstanceIndex() = default;
  InstanceIndex(int num_classes, const std::vector<std::vector<int>>& instance_counts);

  const std::vector<int>& group(int class_idx, int instance_idx) const {
    return groups_.at(static_cast<size_t>(class_idx)).at(static_cast<size_t>(instance_idx));
  }
  bool has_group(int class_idx, int instance_idx) const {
    return !group(class_idx, instance_idx).empty();
  }
  int num_classes() const { return static_cast<int>(groups_.size()); }
  int num_instances(int class_idx) const {
    return static_cast<int>(groups_.at(static_cast<size_t>(class_idx)).size());
  }
  int num_records() const { return num_records_; }
  // Instance index of each record, per class; records order matches manifest.
  int label_of(int record, int class_idx) const {
    return record_labels_.at(static_cast<size_t>(record)).at(static_cast<size_t>(class_idx));
  }

  friend InstanceIndex build_index(const CorpusManifest& manifest);

 private:
  std::vector<std::vector<std::vector<int>>> groups_;  // [class][instance] -> records
  std::vector<std::vector<int>> record_labels_;        // [record][class] -> instance
  int num_records_ = 0;
};

InstanceIndex build_index(const CorpusManifest& manifest);

// ORG pairs: reference and target are the same record.
TrainingExample sample_org_pair(const InstanceIndex& index, Rng& rng);

// N = 1 intercross: target uniform over the corpus, reference uniform with
// replacement from the target's instance group.
TrainingExample sample_intercross_single(const InstanceIndex& index, Rng& rng);

// General intercross: target uniform, then one reference per class drawn
// uniformly with replacement from that class's target-instance group.
TrainingExample sample_intercross_multi(const InstanceIndex& index, Rng& rng, int num_classes);

// Exhaustive invariant check used by tests and the audit CLI.
bool satisfies_shared_instance(const InstanceIndex& index, const TrainingExample& ex);

}  // namespace intercross
