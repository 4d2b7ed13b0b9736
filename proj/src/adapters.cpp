#include "syco/adapters.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace syco {

SvdAdapter init_svd_adapter(int d_out, int d_in, int r, RngState& rng,
                            double scale) {
  if (r < 1 || r > std::min(d_out, d_in)) {
    throw std::invalid_argument(
        "init_svd_adapter: rank must be in [1, min(d_out, d_in)], got r=" +
        std::to_string(r) + " for " + std::to_string(d_out) + "x" +
        std::to_string(d_in));
  }
  if (!(scale > 0.0)) {
    throw std::invalid_argument("init_svd_adapter: scale must be positive");
  }
  SvdAdapter a;
  a.u = Tensor2D::randn(d_out, r, rng, scale);
  a.v = Tensor2D::randn(d_in, r, rng, scale);
  a.sigma.assign(r, 0.0);
  return a;
}

Tensor2D delta_weight(const SvdAdapter& a) {
  Tensor2D out(a.u.rows, a.v.rows);
  for (int j = 0; j < a.rank(); ++j) {
    const double s = a.sigma[j];
    if (s == 0.0) continue;
    for (int i = 0; i < out.rows; ++i) {
      const double us = a.u.at(i, j) * s;
      for (int k = 0; k < out.cols; ++k) {
        out.at(i, k) += us * a.v.at(k, j);
      }
    }
  }
  return out;
}

Tensor2D delta_weight(const LoraAdapter& a) {
  return matmul(a.b_mat, transpose(a.a_mat));
}

Tensor2D delta_weight(const TaLoraAdapter& a) {
  // gate * B (u v^T), assembled as (B u) v^T
  Vec bu = matvec(a.b_shared, a.u);
  Tensor2D out = outer(bu, a.v);
  scale_inplace(out, a.gate);
  return out;
}

namespace {

Vec linear_apply(const FrozenLinear& layer, const Vec& x) {
  Vec out = matvec(layer.w, x);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += layer.b[i];
  return out;
}

}  // namespace

Vec adapter_forward(const FrozenLinear& layer, const AnyAdapter& a,
                    const Vec& x) {
  if (static_cast<int>(x.size()) != layer.w.cols) {
    throw std::invalid_argument("adapter_forward: input length " +
                                std::to_string(x.size()) +
                                " does not match layer width " +
                                std::to_string(layer.w.cols));
  }
  Vec out = linear_apply(layer, x);
  if (std::holds_alternative<std::monostate>(a)) return out;

  Tensor2D dw = std::visit(
      [](const auto& adapter) -> Tensor2D {
        using T = std::decay_t<decltype(adapter)>;
        if constexpr (std::is_same_v<T, std::monostate>) {
          return Tensor2D(1, 1);
        } else {
          return delta_weight(adapter);
        }
      },
      a);
  if (dw.rows != layer.w.rows || dw.cols != layer.w.cols) {
    throw std::invalid_argument("adapter_forward: adapter shape " +
                                std::to_string(dw.rows) + "x" +
                                std::to_string(dw.cols) +
                                " does not match layer " +
                                std::to_string(layer.w.rows) + "x" +
                                std::to_string(layer.w.cols));
  }
  Vec corr = matvec(dw, x);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += corr[i];
  return out;
}

ToyBackbone make_backbone(int input_dim, int hidden_dim, int n_classes,
                          int n_hidden_layers, RngState& rng) {
  if (n_hidden_layers < 1) {
    throw std::invalid_argument("make_backbone: need at least one hidden layer");
  }
  ToyBackbone model;
  int d_in = input_dim;
  for (int l = 0; l < n_hidden_layers; ++l) {
    FrozenLinear layer;
    layer.w = Tensor2D::randn(hidden_dim, d_in, rng, 1.0 / std::sqrt(d_in));
    layer.b.assign(hidden_dim, 0.0);
    model.hidden.push_back(std::move(layer));
    d_in = hidden_dim;
  }
  model.head.w = Tensor2D::randn(n_classes, d_in, rng, 1.0 / std::sqrt(d_in));
  model.head.b.assign(n_classes, 0.0);
  return model;
}

AdaptedModel::AdaptedModel(const ToyBackbone& b) : base(&b) {
  rebuild_plain();
}

void AdaptedModel::rebuild_plain() {
  w_eff.clear();
  for (const auto& layer : base->hidden) w_eff.push_back(layer.w);
}

void AdaptedModel::rebuild(const std::vector<SvdAdapter>& adapters) {
  if (adapters.empty()) {
    rebuild_plain();
    return;
  }
  if (adapters.size() != base->hidden.size()) {
    throw std::invalid_argument("AdaptedModel: expected one adapter per layer");
  }
  w_eff.clear();
  for (std::size_t l = 0; l < base->hidden.size(); ++l) {
    Tensor2D w = base->hidden[l].w;
    add_inplace(w, delta_weight(adapters[l]));
    w_eff.push_back(std::move(w));
  }
}

void AdaptedModel::rebuild_deltas(const std::vector<Tensor2D>& deltas) {
  if (deltas.size() != base->hidden.size()) {
    throw std::invalid_argument("AdaptedModel: expected one delta per layer");
  }
  w_eff.clear();
  for (std::size_t l = 0; l < base->hidden.size(); ++l) {
    Tensor2D w = base->hidden[l].w;
    add_inplace(w, deltas[l]);
    w_eff.push_back(std::move(w));
  }
}

namespace {

ForwardTrace forward_impl(const AdaptedModel& m, const Vec& x,
                          double noise_std, RngState* rng) {
  const ToyBackbone& model = *m.base;
  if (static_cast<int>(x.size()) != model.input_dim()) {
    throw std::invalid_argument("backbone_forward: input length " +
                                std::to_string(x.size()) + " expected " +
                                std::to_string(model.input_dim()));
  }
  ForwardTrace t;
  t.input = x;
  const Vec* cur = &t.input;
  for (std::size_t l = 0; l < model.hidden.size(); ++l) {
    Vec pre = matvec(m.w_eff[l], *cur);
    for (std::size_t i = 0; i < pre.size(); ++i) pre[i] += model.hidden[l].b[i];
    Vec act(pre.size());
    for (std::size_t i = 0; i < pre.size(); ++i) act[i] = std::tanh(pre[i]);
    if (rng != nullptr && noise_std > 0.0) {
      for (auto& a : act) a += noise_std * rng->next_gaussian();
    }
    t.pre.push_back(std::move(pre));
    t.act.push_back(std::move(act));
    cur = &t.act.back();
  }
  t.logits = matvec(model.head.w, *cur);
  for (std::size_t i = 0; i < t.logits.size(); ++i) t.logits[i] += model.head.b[i];
  check_finite(t.logits, "backbone_forward");
  return t;
}

}  // namespace

ForwardTrace backbone_forward(const AdaptedModel& m, const Vec& x) {
  return forward_impl(m, x, 0.0, nullptr);
}

ForwardTrace backbone_forward_noisy(const AdaptedModel& m, const Vec& x,
                                    double noise_std, RngState& rng) {
  return forward_impl(m, x, noise_std, &rng);
}

Distribution clean_distribution(const ForwardTrace& t) {
  return softmax_temp(t.logits, 1.0);
}

BackpropGrads::BackpropGrads(const ToyBackbone& model, bool backbone_grads)
    : with_backbone(backbone_grads) {
  for (const auto& layer : model.hidden) {
    g_w.emplace_back(layer.w.rows, layer.w.cols);
    g_b.emplace_back(layer.b.size(), 0.0);
  }
  g_head_w = Tensor2D(model.head.w.rows, model.head.w.cols);
  g_head_b.assign(model.head.b.size(), 0.0);
}

void BackpropGrads::scale(double s) {
  for (auto& g : g_w) scale_inplace(g, s);
  for (auto& g : g_b)
    for (auto& x : g) x *= s;
  scale_inplace(g_head_w, s);
  for (auto& x : g_head_b) x *= s;
}

void backprop(const AdaptedModel& m, const ForwardTrace& t, const Vec& dlogits,
              const Vec& dh, BackpropGrads& out) {
  const ToyBackbone& model = *m.base;
  const int n_layers = model.n_hidden_layers();

  Vec g = matvec_t(model.head.w, dlogits);
  if (!dh.empty()) {
    if (dh.size() != g.size()) {
      throw std::invalid_argument("backprop: dh length mismatch");
    }
    axpy(g, 1.0, dh);
  }
  if (out.with_backbone) {
    add_inplace(out.g_head_w, outer(dlogits, t.act.back()));
    axpy(out.g_head_b, 1.0, dlogits);
  }

  for (int l = n_layers - 1; l >= 0; --l) {
    Vec gpre(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double a = t.act[l][i];
      gpre[i] = g[i] * (1.0 - a * a);
    }
    const Vec& below = (l == 0) ? t.input : t.act[l - 1];
    add_inplace(out.g_w[l], outer(gpre, below));
    if (out.with_backbone) axpy(out.g_b[l], 1.0, gpre);
    if (l > 0) g = matvec_t(m.w_eff[l], gpre);
  }
}

}  // namespace syco
