#include "syco/stream.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "syco/prob.hpp"

namespace syco {

StreamBatch::StreamBatch(std::vector<Vec> raw, std::vector<Vec> canonical,
                         std::vector<Vec> perturbed, std::vector<int> templates,
                         std::vector<int> labels, int segment, int step)
    : inputs(std::move(raw)),
      canonical_inputs(std::move(canonical)),
      perturbed_inputs(std::move(perturbed)),
      template_ids(std::move(templates)),
      segment_id(segment),
      t(step),
      hidden_labels_(std::move(labels)) {
  if (inputs.size() != canonical_inputs.size() ||
      inputs.size() != perturbed_inputs.size() ||
      inputs.size() != hidden_labels_.size()) {
    throw std::invalid_argument("StreamBatch: field lengths disagree");
  }
}

Tensor2D random_orthogonal(int dim, RngState& rng) {
  Tensor2D m = Tensor2D::randn(dim, dim, rng, 1.0);
  // Gram-Schmidt on columns, run twice for orthogonality near 1e-14
  for (int pass = 0; pass < 2; ++pass) {
    for (int j = 0; j < dim; ++j) {
      Vec cj = column(m, j);
      for (int k = 0; k < j; ++k) {
        Vec ck = column(m, k);
        const double proj = dot(cj, ck);
        axpy(cj, -proj, ck);
      }
      const double n = norm(cj);
      if (n < 1e-12) {
        throw std::runtime_error("random_orthogonal: degenerate column");
      }
      for (int i = 0; i < dim; ++i) m.at(i, j) = cj[i] / n;
    }
  }
  return m;
}

namespace {

Vec random_unit(int dim, RngState& rng) {
  Vec v(dim);
  double n = 0.0;
  do {
    for (auto& x : v) x = rng.next_gaussian();
    n = norm(v);
  } while (n < 1e-9);
  for (auto& x : v) x /= n;
  return v;
}

// class offsets around the task center, resampled until pairwise separation
// reaches the configured margin
std::vector<Vec> place_class_means(const Vec& center, int n_classes,
                                   double class_sep, RngState& rng) {
  const int dim = static_cast<int>(center.size());
  std::vector<Vec> means;
  for (int attempt = 0; attempt < 256; ++attempt) {
    means.clear();
    for (int c = 0; c < n_classes; ++c) {
      Vec m = center;
      Vec dir = random_unit(dim, rng);
      axpy(m, class_sep * (0.9 + 0.2 * rng.next_double()), dir);
      means.push_back(std::move(m));
    }
    double min_sep = 1e300;
    for (int a = 0; a < n_classes; ++a) {
      for (int b = a + 1; b < n_classes; ++b) {
        min_sep = std::min(min_sep, norm(vec_sub(means[a], means[b])));
      }
    }
    if (min_sep >= class_sep) return means;
  }
  throw std::runtime_error(
      "place_class_means: could not separate class means; raise class_sep or "
      "the input dimension");
}

Vec sample_point(const TaskSpec& spec, int cls, RngState& rng) {
  const int dim = static_cast<int>(spec.class_means[cls].size());
  Vec raw = spec.class_means[cls];
  for (int i = 0; i < dim; ++i) {
    raw[i] += spec.cov_scale * spec.noise_inflation * rng.next_gaussian();
  }
  Vec x = matvec(spec.rotation, raw);
  if (!spec.mean_shift.empty()) axpy(x, 1.0, spec.mean_shift);
  return x;
}

struct TaskStats {
  Vec mean;
  Vec stddev;  // floored at 1e-6
};

TaskStats feature_stats(const std::vector<Vec>& xs) {
  const int dim = static_cast<int>(xs[0].size());
  TaskStats s;
  s.mean.assign(dim, 0.0);
  s.stddev.assign(dim, 0.0);
  for (const auto& x : xs) axpy(s.mean, 1.0, x);
  for (auto& v : s.mean) v /= static_cast<double>(xs.size());
  for (const auto& x : xs) {
    for (int i = 0; i < dim; ++i) {
      const double d = x[i] - s.mean[i];
      s.stddev[i] += d * d;
    }
  }
  for (auto& v : s.stddev) {
    v = std::sqrt(v / static_cast<double>(xs.size()));
    v = std::max(v, 1e-6);
  }
  return s;
}

// z-score across features; exact projection (applying it twice equals once
// up to roundoff)
Vec zscore_vec(const Vec& x) {
  const double n = static_cast<double>(x.size());
  double m = 0.0;
  for (double v : x) m += v;
  m /= n;
  double var = 0.0;
  for (double v : x) var += (v - m) * (v - m);
  const double s = std::max(std::sqrt(var / n), 1e-12);
  Vec z(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) z[i] = (x[i] - m) / s;
  return z;
}

}  // namespace

LabeledSet sample_task(const TaskSpec& spec, int n, RngState& rng) {
  LabeledSet set;
  set.xs.reserve(n);
  set.ys.reserve(n);
  for (int i = 0; i < n; ++i) {
    const int cls = i % spec.n_classes;  // balanced
    set.xs.push_back(sample_point(spec, cls, rng));
    set.ys.push_back(spec.label_perm[cls]);
  }
  return set;
}

std::vector<SourceTask> gen_source_tasks(const DataConfig& data, int n_classes,
                                         int input_dim, std::uint64_t seed) {
  if (data.n_sources < 2) {
    throw std::invalid_argument("gen_source_tasks: need at least 2 sources");
  }
  RngState base(seed);
  std::vector<SourceTask> tasks;
  for (int k = 0; k < data.n_sources; ++k) {
    RngState rng = base.fork(100 + k);
    SourceTask task;
    task.spec.task_id = k;
    task.spec.n_classes = n_classes;
    task.spec.cov_scale = data.cov_scale;
    Vec center = random_unit(input_dim, rng);
    for (auto& v : center) v *= data.center_radius;
    task.spec.class_means =
        place_class_means(center, n_classes, data.class_sep, rng);
    task.spec.rotation = random_orthogonal(input_dim, rng);
    task.spec.label_perm.resize(n_classes);
    for (int c = 0; c < n_classes; ++c) task.spec.label_perm[c] = c;

    task.train = sample_task(task.spec, data.train_per_task, rng);
    task.val = sample_task(task.spec, data.val_per_task, rng);

    TaskStats stats = feature_stats(task.train.xs);
    task.feat_mean = stats.mean;
    task.feat_std = stats.stddev;
    double pooled_mean = 0.0, pooled_sq = 0.0;
    for (const auto& x : task.train.xs) {
      for (double v : x) {
        pooled_mean += v;
        pooled_sq += v * v;
      }
    }
    const double n_vals =
        static_cast<double>(task.train.xs.size()) * input_dim;
    pooled_mean /= n_vals;
    task.scalar_mean = pooled_mean;
    task.scalar_std =
        std::max(std::sqrt(pooled_sq / n_vals - pooled_mean * pooled_mean),
                 1e-6);
    task.embedding = task_embedding(task.train.xs);

    tasks.push_back(std::move(task));
  }
  return tasks;
}

Tensor2D make_feature_mixing(int dim, double angle, RngState& rng) {
  Tensor2D m = Tensor2D::identity(dim);
  if (angle == 0.0) return m;
  // compose Givens rotations on random coordinate pairs
  const int n_rot = std::max(dim / 2, 1);
  for (int r = 0; r < n_rot; ++r) {
    int i = static_cast<int>(rng.next_u64() % dim);
    int j = static_cast<int>(rng.next_u64() % dim);
    if (i == j) continue;
    const double theta = angle * rng.next_gaussian();
    const double c = std::cos(theta), s = std::sin(theta);
    for (int col = 0; col < dim; ++col) {
      const double a = m.at(i, col);
      const double b = m.at(j, col);
      m.at(i, col) = c * a - s * b;
      m.at(j, col) = s * a + c * b;
    }
  }
  return m;
}

Vec perturb(const Vec& x, double strength, RngState& rng,
            const Tensor2D& mixing) {
  if (!(strength >= 0.0)) {
    throw std::invalid_argument("perturb: strength must be nonnegative");
  }
  Vec noisy = x;
  if (strength > 0.0) {
    for (auto& v : noisy) v += strength * rng.next_gaussian();
  }
  return matvec(mixing, noisy);
}

Vec canonical_form(const Vec& x, const SourceTask& task) {
  Vec y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    y[i] = (x[i] - task.scalar_mean) / task.scalar_std;
  }
  return zscore_vec(y);
}

std::pair<Vec, int> canonicalize(const Vec& x,
                                 const std::vector<SourceTask>& sources) {
  if (sources.empty()) {
    throw std::invalid_argument("canonicalize: no source tasks");
  }
  // route by cosine similarity between the singleton embedding [x; 0] and
  // each template embedding [mean; std]; only the mean half contributes
  int best = 0;
  double best_cos = -2.0;
  for (std::size_t k = 0; k < sources.size(); ++k) {
    const Vec& e = sources[k].embedding;
    const int dim = static_cast<int>(x.size());
    double num = 0.0;
    for (int i = 0; i < dim; ++i) num += x[i] * e[i];
    const double c = num / (std::max(norm(x), 1e-12) * norm(e));
    if (c > best_cos) {
      best_cos = c;
      best = static_cast<int>(k);
    }
  }
  return {canonical_form(x, sources[best]), best};
}

Vec task_embedding(const std::vector<Vec>& batch) {
  if (batch.empty()) {
    throw std::invalid_argument("task_embedding: empty batch");
  }
  const int dim = static_cast<int>(batch[0].size());
  Vec mean(dim, 0.0);
  for (const auto& x : batch) axpy(mean, 1.0, x);
  for (auto& v : mean) v /= static_cast<double>(batch.size());
  Vec out = mean;
  for (int i = 0; i < dim; ++i) {
    double var = 0.0;
    for (const auto& x : batch) {
      const double d = x[i] - mean[i];
      var += d * d;
    }
    out.push_back(std::sqrt(var / static_cast<double>(batch.size())));
  }
  return out;
}

namespace {

TaskSpec make_shifted_spec(const SourceTask& src, const StreamConfig& stream,
                           RngState& rng) {
  TaskSpec spec = src.spec;
  spec.flavor = TaskFlavor::seen_shifted;
  const int dim = static_cast<int>(src.feat_mean.size());
  double pooled = 0.0;
  for (double s : src.feat_std) pooled += s;
  pooled /= dim;
  Vec dir = random_unit(dim, rng);
  spec.mean_shift.assign(dim, 0.0);
  axpy(spec.mean_shift, stream.shift * pooled, dir);
  spec.noise_inflation = 1.0 + stream.noise_inflation * stream.shift;
  return spec;
}

TaskSpec make_unseen_spec(const std::vector<SourceTask>& sources, int new_id,
                          const DataConfig& data, RngState& rng) {
  const SourceTask& parent =
      sources[rng.next_u64() % static_cast<std::uint64_t>(sources.size())];
  TaskSpec spec = parent.spec;
  spec.task_id = new_id;
  spec.flavor = TaskFlavor::unseen;
  const int dim = static_cast<int>(parent.feat_mean.size());
  const int n_shared = static_cast<int>(
      std::floor(data.overlap_fraction * spec.n_classes + 1e-9));
  // classes beyond the shared prefix get novel means near the parent center
  Vec center(dim, 0.0);
  for (const auto& m : parent.spec.class_means) axpy(center, 1.0, m);
  for (auto& v : center) v /= static_cast<double>(spec.n_classes);
  for (int c = n_shared; c < spec.n_classes; ++c) {
    Vec m = center;
    Vec dir = random_unit(dim, rng);
    axpy(m, data.class_sep * (0.9 + 0.2 * rng.next_double()), dir);
    spec.class_means[c] = std::move(m);
  }
  // new surface form: parent rotation composed with a bounded random one
  Tensor2D tweak = make_feature_mixing(dim, data.unseen_rotation_angle, rng);
  spec.rotation = matmul(tweak, parent.spec.rotation);
  return spec;
}

}  // namespace

TargetStream gen_target_stream(const std::vector<SourceTask>& sources,
                               StreamMode mode, const DataConfig& data,
                               const StreamConfig& stream, std::uint64_t seed) {
  if (sources.empty()) {
    throw std::invalid_argument("gen_target_stream: no source tasks");
  }
  RngState base(seed);
  RngState rng = base.fork(777);
  Tensor2D mixing = make_feature_mixing(
      static_cast<int>(sources[0].feat_mean.size()), stream.perturb_mix_angle,
      rng);

  std::vector<TaskSpec> pool;
  if (mode == StreamMode::unseen_data) {
    for (const auto& src : sources) {
      pool.push_back(make_shifted_spec(src, stream, rng));
    }
  } else {
    for (int j = 0; j < data.n_unseen_tasks; ++j) {
      pool.push_back(make_unseen_spec(
          sources, static_cast<int>(sources.size()) + j, data, rng));
    }
    // unshifted seen tasks interleave with the unseen ones
    for (const auto& src : sources) {
      TaskSpec spec = src.spec;
      spec.flavor = TaskFlavor::seen;
      pool.push_back(spec);
    }
  }

  TargetStream out;
  out.schedule.mode = mode;
  int t = 0;
  for (int seg = 0; seg < stream.n_segments; ++seg) {
    const TaskSpec* spec = nullptr;
    if (mode == StreamMode::unseen_task) {
      // even segments draw from the unseen part of the pool, so every
      // schedule holds at least one unseen segment
      const int n_unseen = data.n_unseen_tasks;
      if (seg % 2 == 0) {
        spec = &pool[rng.next_u64() % static_cast<std::uint64_t>(n_unseen)];
      } else {
        spec = &pool[n_unseen +
                     static_cast<int>(rng.next_u64() %
                                      static_cast<std::uint64_t>(pool.size() -
                                                                 n_unseen))];
      }
    } else {
      spec = &pool[rng.next_u64() % static_cast<std::uint64_t>(pool.size())];
    }
    out.schedule.segments.push_back(
        {seg, spec->task_id, spec->flavor, stream.batches_per_segment});
    for (int b = 0; b < stream.batches_per_segment; ++b) {
      ++t;
      std::vector<Vec> raw, canon, pert;
      std::vector<int> labels, templates;
      for (int i = 0; i < stream.batch_size; ++i) {
        const int cls = static_cast<int>(
            rng.next_u64() % static_cast<std::uint64_t>(spec->n_classes));
        Vec x = sample_point(*spec, cls, rng);
        auto [cx, tmpl] = canonicalize(x, sources);
        Vec px = perturb(cx, stream.perturb_strength, rng, mixing);
        raw.push_back(std::move(x));
        canon.push_back(std::move(cx));
        pert.push_back(std::move(px));
        templates.push_back(tmpl);
        labels.push_back(spec->label_perm[cls]);
      }
      out.batches.emplace_back(std::move(raw), std::move(canon),
                               std::move(pert), std::move(templates),
                               std::move(labels), seg, t);
    }
  }
  return out;
}

}  // namespace syco
