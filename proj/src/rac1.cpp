#include "syco/rac1.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace syco {

int PlasticityMask::plastic_count() const {
  return rank() - static_cast<int>(keep_indices.size());
}

namespace {

PlasticityMask mask_from_keep(std::vector<int> keep, int r, double alpha) {
  std::sort(keep.begin(), keep.end());
  PlasticityMask mask;
  mask.alpha = alpha;
  mask.m.assign(r, 1.0);
  for (int j : keep) mask.m[j] = 0.0;
  mask.keep_indices = std::move(keep);
  return mask;
}

// floor with a nudge so exact products like (1-0.9)*10 = 1 survive the
// binary representation of alpha
int keep_count(double alpha, int r) {
  return static_cast<int>(std::floor((1.0 - alpha) * r + 1e-9));
}

std::vector<int> order_by_magnitude(const Vec& sigma) {
  std::vector<int> idx(sigma.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
    return std::fabs(sigma[a]) > std::fabs(sigma[b]);
  });
  return idx;
}

void validate_alpha(const Vec& sigma, double alpha) {
  if (sigma.empty()) {
    throw std::invalid_argument("build_mask: empty sigma");
  }
  if (!(alpha >= 0.0) || !(alpha <= 1.0)) {
    throw std::invalid_argument("build_mask: alpha must be in [0, 1]");
  }
}

}  // namespace

PlasticityMask build_mask(const Vec& sigma, double alpha) {
  validate_alpha(sigma, alpha);
  const int r = static_cast<int>(sigma.size());
  const int n_keep = keep_count(alpha, r);
  std::vector<int> idx = order_by_magnitude(sigma);
  return mask_from_keep({idx.begin(), idx.begin() + n_keep}, r, alpha);
}

PlasticityMask build_mask_variant(const Vec& sigma, double alpha,
                                  MaskSpace space, RngState* rng) {
  validate_alpha(sigma, alpha);
  const int r = static_cast<int>(sigma.size());
  const int n_keep = keep_count(alpha, r);

  switch (space) {
    case MaskSpace::tail:
      return build_mask(sigma, alpha);
    case MaskSpace::head: {
      // plasticity confined to the top-|sigma| directions
      std::vector<int> idx = order_by_magnitude(sigma);
      return mask_from_keep({idx.begin() + (r - n_keep), idx.end()}, r, alpha);
    }
    case MaskSpace::random: {
      if (rng == nullptr) {
        throw std::invalid_argument("build_mask_variant: random mask needs rng");
      }
      std::vector<int> idx(r);
      std::iota(idx.begin(), idx.end(), 0);
      for (int i = r - 1; i > 0; --i) {
        int j = static_cast<int>(rng->next_u64() % (i + 1));
        std::swap(idx[i], idx[j]);
      }
      return mask_from_keep({idx.begin(), idx.begin() + n_keep}, r, alpha);
    }
    case MaskSpace::none:
      return mask_from_keep({}, r, alpha);
  }
  throw std::invalid_argument("build_mask_variant: unknown mask space");
}

SvdAdapter reset_tail(const SvdAdapter& a, const PlasticityMask& mask) {
  if (mask.rank() != a.rank()) {
    throw std::invalid_argument("reset_tail: mask rank " +
                                std::to_string(mask.rank()) +
                                " vs adapter rank " + std::to_string(a.rank()));
  }
  SvdAdapter out = a;
  for (int j = 0; j < out.rank(); ++j) {
    if (!mask.is_kept(j)) out.sigma[j] = 0.0;
  }
  return out;
}

Vec masked_sigma_grad(const Tensor2D& u, const Tensor2D& v,
                      const Tensor2D& dl_ddelta, const PlasticityMask& mask) {
  const int r = mask.rank();
  if (u.cols != r || v.cols != r) {
    throw std::invalid_argument("masked_sigma_grad: factor rank mismatch");
  }
  if (dl_ddelta.rows != u.rows || dl_ddelta.cols != v.rows) {
    throw std::invalid_argument(
        "masked_sigma_grad: gradient shape " + std::to_string(dl_ddelta.rows) +
        "x" + std::to_string(dl_ddelta.cols) + " does not match factors");
  }
  Vec g(r, 0.0);
  for (int j = 0; j < r; ++j) {
    if (mask.m[j] == 0.0) continue;
    // u_j^T G v_j
    double s = 0.0;
    for (int i = 0; i < u.rows; ++i) {
      const double ui = u.at(i, j);
      if (ui == 0.0) continue;
      double row = 0.0;
      for (int k = 0; k < v.rows; ++k) row += dl_ddelta.at(i, k) * v.at(k, j);
      s += ui * row;
    }
    g[j] = s;
  }
  return g;
}

std::pair<Tensor2D, Tensor2D> masked_factor_grads(const SvdAdapter& a,
                                                  const Tensor2D& dl_ddelta,
                                                  const PlasticityMask& mask) {
  const int r = a.rank();
  if (mask.rank() != r) {
    throw std::invalid_argument("masked_factor_grads: mask rank mismatch");
  }
  if (dl_ddelta.rows != a.u.rows || dl_ddelta.cols != a.v.rows) {
    throw std::invalid_argument("masked_factor_grads: gradient shape mismatch");
  }
  Tensor2D du(a.u.rows, r);
  Tensor2D dv(a.v.rows, r);
  for (int j = 0; j < r; ++j) {
    if (mask.m[j] == 0.0) continue;  // kept columns stay exactly zero
    const double s = a.sigma[j];
    for (int i = 0; i < a.u.rows; ++i) {
      double acc = 0.0;
      for (int k = 0; k < a.v.rows; ++k) acc += dl_ddelta.at(i, k) * a.v.at(k, j);
      du.at(i, j) = s * acc;
    }
    for (int k = 0; k < a.v.rows; ++k) {
      double acc = 0.0;
      for (int i = 0; i < a.u.rows; ++i) acc += dl_ddelta.at(i, k) * a.u.at(i, j);
      dv.at(k, j) = s * acc;
    }
  }
  return {std::move(du), std::move(dv)};
}

std::vector<SvdAdapter> retrieve_and_init(const SourceLibrary& lib,
                                          const Vec& target_embedding,
                                          int* picked_task_id) {
  if (lib.entries.empty()) {
    throw std::invalid_argument("retrieve_and_init: empty source library");
  }
  const SourceLibraryEntry* best = nullptr;
  double best_cos = 0.0;
  for (const auto& entry : lib.entries) {
    if (entry.task_embedding.size() != target_embedding.size()) {
      throw std::invalid_argument(
          "retrieve_and_init: embedding dimension mismatch");
    }
    const double c = cosine_sim(target_embedding, entry.task_embedding);
    if (best == nullptr || c > best_cos ||
        (c == best_cos && entry.task_id < best->task_id)) {
      best = &entry;
      best_cos = c;
    }
  }
  if (picked_task_id != nullptr) *picked_task_id = best->task_id;
  return best->adapter_set;  // deep copy; the library entry is never mutated
}

}  // namespace syco
