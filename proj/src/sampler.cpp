#include "intercross/sampler.hpp"

#include <algorithm>
#include <cassert>
#include <numeric>

namespace intercross {

InstanceIndex build_index(const CorpusManifest& manifest) {
  InstanceIndex index;
  const int num_classes = manifest.num_classes();
  index.groups_.resize(static_cast<size_t>(num_classes));
  for (int c = 0; c < num_classes; ++c)
    index.groups_[static_cast<size_t>(c)].resize(
        manifest.classes[static_cast<size_t>(c)].instance_ids.size());

  // Sort record indices by utt_id so group order is stable regardless of
  // generation order.
  std::vector<int> order(manifest.records.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return manifest.records[static_cast<size_t>(a)].utt_id <
           manifest.records[static_cast<size_t>(b)].utt_id;
  });

  index.record_labels_.resize(manifest.records.size());
  index.num_records_ = static_cast<int>(manifest.records.size());
  for (int rec : order) {
    const auto& record = manifest.records[static_cast<size_t>(rec)];
    auto& labels = index.record_labels_[static_cast<size_t>(rec)];
    labels.resize(static_cast<size_t>(num_classes));
    for (int c = 0; c < num_classes; ++c) {
      const int inst = manifest.instance_index(c, record.labels[static_cast<size_t>(c)]);
      labels[static_cast<size_t>(c)] = inst;
      index.groups_[static_cast<size_t>(c)][static_cast<size_t>(inst)].push_back(rec);
    }
  }
  return index;
}

namespace {

int pick_target(const InstanceIndex& index, Rng& rng) {
  if (index.num_records() == 0) throw EmptyCorpus("sampler: corpus has no records");
  return static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(index.num_records())));
}

int pick_reference(const InstanceIndex& index, Rng& rng, int target, int class_idx) {
  const auto& group = index.group(class_idx, index.label_of(target, class_idx));
  // The target always belongs to its own group, so the group is non-empty.
  assert(!group.empty());
  return group[rng.uniform_index(static_cast<std::uint64_t>(group.size()))];
}

}  // namespace

TrainingExample sample_org_pair(const InstanceIndex& index, Rng& rng) {
  TrainingExample ex;
  ex.target = pick_target(index, rng);
  ex.references.assign(static_cast<size_t>(index.num_classes()), ex.target);
  return ex;
}

TrainingExample sample_intercross_single(const InstanceIndex& index, Rng& rng) {
  TrainingExample ex;
  ex.target = pick_target(index, rng);
  ex.references.push_back(pick_reference(index, rng, ex.target, 0));
  return ex;
}

TrainingExample sample_intercross_multi(const InstanceIndex& index, Rng& rng,
                                        int num_classes) {
  TrainingExample ex;
  ex.target = pick_target(index, rng);
  ex.references.resize(static_cast<size_t>(num_classes));
  for (int c = 0; c < num_classes; ++c)
    ex.references[static_cast<size_t>(c)] = pick_reference(index, rng, ex.target, c);
  return ex;
}

bool satisfies_shared_instance(const InstanceIndex& index, const TrainingExample& ex) {
  for (int c = 0; c < static_cast<int>(ex.references.size()); ++c) {
    if (index.label_of(ex.references[static_cast<size_t>(c)], c) !=
        index.label_of(ex.target, c))
      return false;
  }
  return true;
}

}  // namespace intercross
