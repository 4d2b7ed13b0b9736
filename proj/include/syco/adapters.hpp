#pragma once

#include <variant>
#include <vector>

#include "syco/prob.hpp"
#include "syco/tensor.hpp"

namespace syco {

// Dense layer trained during multi-source pretraining and never mutated
// afterwards; adapters add low-rank corrections on top.
struct FrozenLinear {
  Tensor2D w;  // d_out x d_in
  Vec b;       // d_out
};

// delta W = B A^T
struct LoraAdapter {
  Tensor2D b_mat;  // d_out x r
  Tensor2D a_mat;  // d_in x r
};

// delta W = U diag(sigma) V^T
struct SvdAdapter {
  Tensor2D u;  // d_out x r
  Vec sigma;   // r
  Tensor2D v;  // d_in x r
  int rank() const { return static_cast<int>(sigma.size()); }
};

// delta W = gate * B (u v^T); B is shared across tasks, (u, v) are the
// task-specific rank-1 part, gate scales the whole branch.
struct TaLoraAdapter {
  Tensor2D b_shared;  // d_out x r
  Vec u;              // r
  Vec v;              // d_in
  double gate = 0.0;
};

// Gaussian U, V and all-zero sigma, so the fresh adapter contributes nothing
// to the forward pass.
SvdAdapter init_svd_adapter(int d_out, int d_in, int r, RngState& rng,
                            double scale = 0.02);

Tensor2D delta_weight(const SvdAdapter& a);
Tensor2D delta_weight(const LoraAdapter& a);
Tensor2D delta_weight(const TaLoraAdapter& a);

using AnyAdapter =
    std::variant<std::monostate, SvdAdapter, LoraAdapter, TaLoraAdapter>;

// (W0 + delta W) x + b for whichever parameterization sits in the slot
Vec adapter_forward(const FrozenLinear& layer, const AnyAdapter& a,
                    const Vec& x);

// Two tanh hidden layers with an adapter slot each, plus a frozen linear
// head. h(x) is the activation of the last hidden layer.
struct ToyBackbone {
  std::vector<FrozenLinear> hidden;
  FrozenLinear head;

  int input_dim() const { return hidden.front().w.cols; }
  int n_classes() const { return head.w.rows; }
  int n_hidden_layers() const { return static_cast<int>(hidden.size()); }
};

ToyBackbone make_backbone(int input_dim, int hidden_dim, int n_classes,
                          int n_hidden_layers, RngState& rng);

// Backbone with per-layer low-rank deltas folded into dense weights.
// Rebuild after every adapter update; forwards then run on plain layers.
struct AdaptedModel {
  const ToyBackbone* base = nullptr;
  std::vector<Tensor2D> w_eff;

  explicit AdaptedModel(const ToyBackbone& b);
  void rebuild(const std::vector<SvdAdapter>& adapters);
  void rebuild_deltas(const std::vector<Tensor2D>& deltas);
  void rebuild_plain();
};

struct ForwardTrace {
  Vec input;
  std::vector<Vec> pre;  // pre-activation per hidden layer
  std::vector<Vec> act;  // tanh(pre), plus injected noise on noisy passes
  Vec logits;

  const Vec& h() const { return act.back(); }
};

ForwardTrace backbone_forward(const AdaptedModel& m, const Vec& x);

// same pass with i.i.d. Gaussian noise added to every hidden activation;
// used for stochastic candidate generation only, never backpropagated
ForwardTrace backbone_forward_noisy(const AdaptedModel& m, const Vec& x,
                                    double noise_std, RngState& rng);

Distribution clean_distribution(const ForwardTrace& t);

// Accumulating gradient buffers. g_w[l] is dL/d(effective W of layer l),
// which equals both dL/d(delta W) and dL/dW0 since they enter as a sum.
struct BackpropGrads {
  std::vector<Tensor2D> g_w;
  std::vector<Vec> g_b;
  Tensor2D g_head_w;
  Vec g_head_b;
  bool with_backbone = false;

  BackpropGrads(const ToyBackbone& model, bool backbone_grads);
  void scale(double s);
};

// Accumulates gradients for one traced forward pass. dlogits is dL/dlogits;
// dh (optional, empty for none) is an extra dL/dh term injected at the last
// hidden activation, used by representation-level losses.
void backprop(const AdaptedModel& m, const ForwardTrace& t, const Vec& dlogits,
              const Vec& dh, BackpropGrads& out);

}  // namespace syco
