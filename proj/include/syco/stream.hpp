#pragma once

#include <cstdint>
#include <vector>

#include "syco/config.hpp"
#include "syco/tensor.hpp"

namespace syco {

enum class TaskFlavor { seen, seen_shifted, unseen };

// Gaussian-mixture classification task. Samples are drawn as
// x = R (mean_c + cov_scale * inflation * g) + shift with g ~ N(0, I) and
// the observed label is label_perm[c].
struct TaskSpec {
  int task_id = 0;
  int n_classes = 0;
  std::vector<Vec> class_means;  // pre-rotation
  double cov_scale = 1.0;
  Tensor2D rotation;  // orthogonal
  std::vector<int> label_perm;
  TaskFlavor flavor = TaskFlavor::seen;
  Vec mean_shift;  // post-rotation translation, zero when unshifted
  double noise_inflation = 1.0;
};

struct LabeledSet {
  std::vector<Vec> xs;
  std::vector<int> ys;
};

// One source task with its raw data, training statistics, and the embedding
// used for template routing and adapter retrieval.
struct SourceTask {
  TaskSpec spec;
  LabeledSet train;
  LabeledSet val;
  Vec feat_mean;             // per-feature mean of raw train inputs
  Vec feat_std;              // per-feature std, floored away from zero
  double scalar_mean = 0.0;  // pooled over features and samples
  double scalar_std = 1.0;
  Vec embedding;  // [feat_mean; feat_std]
};

struct eval_access;

// One mini-batch of the target stream. Ground-truth labels ride along for
// post-hoc evaluation only; adaptation code cannot name them.
class StreamBatch {
 public:
  std::vector<Vec> inputs;
  std::vector<Vec> canonical_inputs;
  std::vector<Vec> perturbed_inputs;
  std::vector<int> template_ids;
  int segment_id = 0;
  int t = 0;

  StreamBatch() = default;
  StreamBatch(std::vector<Vec> raw, std::vector<Vec> canonical,
              std::vector<Vec> perturbed, std::vector<int> templates,
              std::vector<int> labels, int segment, int step);

  std::size_t size() const { return inputs.size(); }

 private:
  std::vector<int> hidden_labels_;
  friend struct eval_access;
};

// The evaluator's keyhole into the hidden labels.
struct eval_access {
  static const std::vector<int>& labels(const StreamBatch& b) {
    return b.hidden_labels_;
  }
};

enum class StreamMode { unseen_task, unseen_data };

struct StreamSegmentInfo {
  int segment_id = 0;
  int task_id = 0;
  TaskFlavor flavor = TaskFlavor::seen;
  int n_batches = 0;
};

struct StreamSchedule {
  StreamMode mode = StreamMode::unseen_data;
  std::vector<StreamSegmentInfo> segments;
};

struct TargetStream {
  StreamSchedule schedule;
  std::vector<StreamBatch> batches;
};

std::vector<SourceTask> gen_source_tasks(const DataConfig& data, int n_classes,
                                         int input_dim, std::uint64_t seed);

TargetStream gen_target_stream(const std::vector<SourceTask>& sources,
                               StreamMode mode, const DataConfig& data,
                               const StreamConfig& stream, std::uint64_t seed);

LabeledSet sample_task(const TaskSpec& spec, int n, RngState& rng);

// near-identity random orthogonal map, the fixed "surface form" family;
// angle 0 gives the identity
Tensor2D make_feature_mixing(int dim, double angle, RngState& rng);

// Gaussian jitter followed by the fixed orthogonal feature mixing
Vec perturb(const Vec& x, double strength, RngState& rng,
            const Tensor2D& mixing);

// Template routing plus canonical rewriting. The canonical form aligns the
// input by the routed template's pooled training mean/std and then z-scores
// it across features, which makes the rewrite an exact projection: an input
// that is already canonical passes through unchanged up to roundoff.
std::pair<Vec, int> canonicalize(const Vec& x,
                                 const std::vector<SourceTask>& sources);

// canonical rewrite against one known template (used for source data, where
// the true template needs no routing)
Vec canonical_form(const Vec& x, const SourceTask& task);

// feature-wise mean and standard deviation, concatenated
Vec task_embedding(const std::vector<Vec>& batch);

Tensor2D random_orthogonal(int dim, RngState& rng);

}  // namespace syco
