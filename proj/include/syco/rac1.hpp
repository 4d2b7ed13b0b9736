#pragma once

#include <utility>
#include <vector>

#include "syco/adapters.hpp"

namespace syco {

enum class MaskSpace { tail, head, random, none };

// Kept/plastic split over the rank directions of one adapter. Kept
// directions (m_j = 0) stay frozen at their anchor values; plastic
// directions (m_j = 1) receive gradient updates.
struct PlasticityMask {
  std::vector<int> keep_indices;  // ascending
  std::vector<double> m;          // 0 kept, 1 plastic
  double alpha = 0.0;

  int rank() const { return static_cast<int>(m.size()); }
  bool is_kept(int j) const { return m[j] == 0.0; }
  int plastic_count() const;
};

// Keeps the top floor((1 - alpha) r) directions by |sigma|, ties broken by
// lower index.
PlasticityMask build_mask(const Vec& sigma, double alpha);

// Mask-space variants used by the ablation battery. head keeps the low-|sigma|
// directions plastic-side-flipped (plasticity confined to the top directions);
// random draws the plastic set uniformly; none leaves every direction plastic.
PlasticityMask build_mask_variant(const Vec& sigma, double alpha,
                                  MaskSpace space, RngState* rng);

// Zeroes sigma on the plastic slots, clearing signal channels for the new
// task. U, V and the kept sigma entries are untouched.
SvdAdapter reset_tail(const SvdAdapter& a, const PlasticityMask& mask);

// m .* diag(U^T G V) where G = dL/d(delta W); feed the optimizer as the
// gradient (the descent step is -eta * g).
Vec masked_sigma_grad(const Tensor2D& u, const Tensor2D& v,
                      const Tensor2D& dl_ddelta, const PlasticityMask& mask);

// dU = G V diag(sigma), dV = G^T U diag(sigma), kept columns zeroed
std::pair<Tensor2D, Tensor2D> masked_factor_grads(const SvdAdapter& a,
                                                  const Tensor2D& dl_ddelta,
                                                  const PlasticityMask& mask);

struct SourceLibraryEntry {
  int task_id = 0;
  Vec task_embedding;
  std::vector<SvdAdapter> adapter_set;  // one per adapter-bearing layer
};

// Immutable after pretraining; adaptation always works on deep copies.
struct SourceLibrary {
  std::vector<SourceLibraryEntry> entries;
};

// Deep copy of the adapter set whose embedding is most cosine-similar to the
// target embedding; ties resolve to the lowest task_id.
std::vector<SvdAdapter> retrieve_and_init(const SourceLibrary& lib,
                                          const Vec& target_embedding,
                                          int* picked_task_id = nullptr);

}  // namespace syco
