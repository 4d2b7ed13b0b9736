#pragma once

#include <vector>

#include "syco/adapters.hpp"

namespace syco {

// The model's most confident prediction for one sample; confidence is the
// clean-pass probability of the label.
struct PseudoLabel {
  int label = 0;
  double confidence = 0.0;
};

struct GuardrailExample {
  Vec x;  // canonical input
  int label = 0;
  double margin = 0.0;
};

// Margin-sampled labeled source examples, sorted by margin descending.
struct GuardrailSet {
  std::vector<GuardrailExample> examples;
};

struct LossBreakdown {
  double l_prob = 0.0;
  double l_proc = 0.0;
  double l_guard = 0.0;
  double l_total = 0.0;
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  double lambda3 = 0.0;
};

// Scalar loss plus dL/d(delta W) per adapter-bearing layer.
struct LossGrads {
  double value = 0.0;
  std::vector<Tensor2D> g_delta;
};

// M stochastic forward passes with Gaussian noise on the hidden activations;
// each candidate is the argmax of its own pass.
std::vector<PseudoLabel> generate_candidates(const AdaptedModel& m,
                                             const Vec& x, int m_candidates,
                                             double noise_std, RngState& rng);

// Among distinct candidate labels, the one with the highest clean-pass
// probability; ties resolve to the lower class index.
PseudoLabel select_pseudo_label(const std::vector<PseudoLabel>& candidates,
                                const Distribution& clean_dist);

// standalone contrastive core, exposed for direct verification
double info_nce(const Vec& anchor, const Vec& positive,
                const std::vector<Vec>& negatives, double tau_c);

// Paraphrase-invariance term: CE of the perturbed pass against the clean
// argmax (no gradient through the target) plus InfoNCE between clean and
// perturbed representations with the rest of the batch as negatives.
// With a single-sample batch the contrastive part is omitted with a warning.
LossGrads loss_prob(const AdaptedModel& m, const std::vector<Vec>& canonical,
                    const std::vector<Vec>& perturbed,
                    const std::vector<int>& clean_targets, double tau_c);

// Pseudo-label CE at temperature tau minus w_h times the clean-pass entropy.
LossGrads loss_proc(const AdaptedModel& m, const std::vector<Vec>& canonical,
                    const std::vector<PseudoLabel>& pseudo, double tau,
                    double w_h);

// Mean CE against ground-truth source labels.
LossGrads loss_guard(const AdaptedModel& m,
                     const std::vector<GuardrailExample>& batch);

// Mean entropy of the clean predictions; the entropy-only ablation objective.
LossGrads loss_entropy_only(const AdaptedModel& m,
                            const std::vector<Vec>& canonical);

// margin(x) = p1(x) - p2(x) under the given model; keeps the top
// ceil(fraction * N) examples, stable under ties
GuardrailSet margin_sample(const std::vector<Vec>& xs,
                           const std::vector<int>& labels, double fraction,
                           const AdaptedModel& model);

struct Sc3Result {
  LossBreakdown breakdown;
  std::vector<Tensor2D> g_delta;
};

// weighted sum; gradients compose linearly, a zero weight contributes
// exactly nothing
Sc3Result compose_sc3(const LossGrads& prob, const LossGrads& proc,
                      const LossGrads& guard, double lambda1, double lambda2,
                      double lambda3, const ToyBackbone& model);

}  // namespace syco
