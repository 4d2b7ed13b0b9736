#include "syco/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>
#include <stdexcept>

namespace syco {

namespace {

// dH/dz for H = entropy(softmax(z)): -p_k (ln p_k + H)
Vec entropy_logit_grad(const Distribution& p, double h) {
  Vec g(p.probs.size(), 0.0);
  for (std::size_t k = 0; k < p.probs.size(); ++k) {
    const double pk = p.probs[k];
    if (pk > 0.0) g[k] = -pk * (std::log(pk) + h);
  }
  return g;
}

// d cos(a, b) / da
Vec cos_grad_wrt_first(const Vec& a, const Vec& b, double cos_ab, double na,
                       double nb) {
  Vec g(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    g[i] = b[i] / (na * nb) - cos_ab * a[i] / (na * na);
  }
  return g;
}

}  // namespace

std::vector<PseudoLabel> generate_candidates(const AdaptedModel& m,
                                             const Vec& x, int m_candidates,
                                             double noise_std, RngState& rng) {
  if (m_candidates < 2) {
    throw std::invalid_argument("generate_candidates: need at least 2 passes");
  }
  if (!(noise_std >= 0.0)) {
    throw std::invalid_argument("generate_candidates: negative noise_std");
  }
  std::vector<PseudoLabel> out;
  out.reserve(m_candidates);
  for (int i = 0; i < m_candidates; ++i) {
    ForwardTrace t = backbone_forward_noisy(m, x, noise_std, rng);
    Distribution d = clean_distribution(t);
    const int label = argmax(d.probs);
    out.push_back({label, d.probs[label]});
  }
  return out;
}

PseudoLabel select_pseudo_label(const std::vector<PseudoLabel>& candidates,
                                const Distribution& clean_dist) {
  if (candidates.empty()) {
    throw std::invalid_argument("select_pseudo_label: no candidates");
  }
  std::vector<char> seen(clean_dist.probs.size(), 0);
  for (const auto& c : candidates) {
    if (c.label < 0 || c.label >= static_cast<int>(seen.size())) {
      throw std::invalid_argument("select_pseudo_label: label out of range");
    }
    seen[c.label] = 1;
  }
  int best = -1;
  for (int k = 0; k < static_cast<int>(seen.size()); ++k) {
    if (!seen[k]) continue;
    if (best < 0 || clean_dist.probs[k] > clean_dist.probs[best]) best = k;
  }
  return {best, clean_dist.probs[best]};
}

double info_nce(const Vec& anchor, const Vec& positive,
                const std::vector<Vec>& negatives, double tau_c) {
  if (!(tau_c > 0.0)) {
    throw std::invalid_argument("info_nce: tau_c must be positive");
  }
  const double s_pos = cosine_sim(anchor, positive) / tau_c;
  double m = s_pos;
  std::vector<double> s_neg(negatives.size());
  for (std::size_t j = 0; j < negatives.size(); ++j) {
    s_neg[j] = cosine_sim(anchor, negatives[j]) / tau_c;
    m = std::max(m, s_neg[j]);
  }
  double z = std::exp(s_pos - m);
  for (double s : s_neg) z += std::exp(s - m);
  return -(s_pos - m) + std::log(z);
}

LossGrads loss_prob(const AdaptedModel& m, const std::vector<Vec>& canonical,
                    const std::vector<Vec>& perturbed,
                    const std::vector<int>& clean_targets, double tau_c) {
  const std::size_t n = canonical.size();
  if (n == 0 || perturbed.size() != n || clean_targets.size() != n) {
    throw std::invalid_argument("loss_prob: batch size mismatch");
  }
  if (!(tau_c > 0.0)) {
    throw std::invalid_argument("loss_prob: tau_c must be positive");
  }

  std::vector<ForwardTrace> tc(n), tp(n);
  std::vector<Distribution> dp(n);
  for (std::size_t b = 0; b < n; ++b) {
    tc[b] = backbone_forward(m, canonical[b]);
    tp[b] = backbone_forward(m, perturbed[b]);
    dp[b] = clean_distribution(tp[b]);
  }

  LossGrads out;
  std::vector<Vec> dlog_p(n), dh_c(n), dh_p(n);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t b = 0; b < n; ++b) {
    dlog_p[b].assign(tp[b].logits.size(), 0.0);
    dh_c[b].assign(tc[b].h().size(), 0.0);
    dh_p[b].assign(tp[b].h().size(), 0.0);
  }

  // paraphrase supervision: CE of the perturbed pass against the clean argmax
  for (std::size_t b = 0; b < n; ++b) {
    const int y = clean_targets[b];
    if (y < 0 || y >= static_cast<int>(dp[b].probs.size())) {
      throw std::invalid_argument("loss_prob: target out of range");
    }
    out.value += -std::log(std::max(dp[b].probs[y], 1e-300)) * inv_n;
    for (std::size_t k = 0; k < dp[b].probs.size(); ++k) {
      dlog_p[b][k] += (dp[b].probs[k] - (static_cast<int>(k) == y ? 1.0 : 0.0)) *
                      inv_n;
    }
  }

  // semantic contrastive alignment over the batch; negatives are the other
  // members' perturbed representations
  if (n >= 2) {
    for (std::size_t b = 0; b < n; ++b) {
      const Vec& a = tc[b].h();
      const double na = norm(a);
      const Vec& pos = tp[b].h();
      const double npos = norm(pos);
      if (na == 0.0 || npos == 0.0) {
        throw std::runtime_error("loss_prob: degenerate zero representation");
      }
      const double c_pos = std::clamp(dot(a, pos) / (na * npos), -1.0, 1.0);

      std::vector<std::size_t> negs;
      std::vector<double> c_neg;
      for (std::size_t j = 0; j < n; ++j) {
        if (j == b) continue;
        const double nj = norm(tp[j].h());
        if (nj == 0.0) {
          throw std::runtime_error("loss_prob: degenerate zero representation");
        }
        negs.push_back(j);
        c_neg.push_back(std::clamp(dot(a, tp[j].h()) / (na * nj), -1.0, 1.0));
      }

      double mx = c_pos / tau_c;
      for (double c : c_neg) mx = std::max(mx, c / tau_c);
      double z = std::exp(c_pos / tau_c - mx);
      for (double c : c_neg) z += std::exp(c / tau_c - mx);
      out.value += (-(c_pos / tau_c - mx) + std::log(z)) * inv_n;

      const double w_pos = std::exp(c_pos / tau_c - mx) / z;
      const double ds_pos = (w_pos - 1.0) / tau_c * inv_n;
      axpy(dh_c[b], ds_pos, cos_grad_wrt_first(a, pos, c_pos, na, npos));
      axpy(dh_p[b], ds_pos, cos_grad_wrt_first(pos, a, c_pos, npos, na));
      for (std::size_t idx = 0; idx < negs.size(); ++idx) {
        const std::size_t j = negs[idx];
        const double nj = norm(tp[j].h());
        const double w_j = std::exp(c_neg[idx] / tau_c - mx) / z;
        const double ds_j = w_j / tau_c * inv_n;
        axpy(dh_c[b], ds_j, cos_grad_wrt_first(a, tp[j].h(), c_neg[idx], na, nj));
        axpy(dh_p[j], ds_j, cos_grad_wrt_first(tp[j].h(), a, c_neg[idx], nj, na));
      }
    }
  } else {
    static bool warned = false;
    if (!warned) {
      std::cerr << "loss_prob: single-sample batch, contrastive term omitted\n";
      warned = true;
    }
  }

  BackpropGrads grads(*m.base, false);
  const Vec no_dlogits(tc[0].logits.size(), 0.0);
  for (std::size_t b = 0; b < n; ++b) {
    backprop(m, tc[b], no_dlogits, dh_c[b], grads);
    backprop(m, tp[b], dlog_p[b], dh_p[b], grads);
  }
  out.g_delta = std::move(grads.g_w);
  return out;
}

LossGrads loss_proc(const AdaptedModel& m, const std::vector<Vec>& canonical,
                    const std::vector<PseudoLabel>& pseudo, double tau,
                    double w_h) {
  if (canonical.empty() || pseudo.size() != canonical.size()) {
    throw std::invalid_argument("loss_proc: batch size mismatch");
  }
  if (!(tau > 0.0)) {
    throw std::invalid_argument("loss_proc: tau must be positive");
  }
  const std::size_t n = canonical.size();
  const double inv_n = 1.0 / static_cast<double>(n);

  LossGrads out;
  BackpropGrads grads(*m.base, false);
  const Vec no_dh;
  for (std::size_t b = 0; b < n; ++b) {
    ForwardTrace t = backbone_forward(m, canonical[b]);
    Distribution soft = softmax_temp(t.logits, tau);
    Distribution clean = clean_distribution(t);
    const int y = pseudo[b].label;
    if (y < 0 || y >= static_cast<int>(soft.probs.size())) {
      throw std::invalid_argument("loss_proc: pseudo-label out of range");
    }
    const double h = shannon_entropy(clean);
    out.value += (-std::log(std::max(soft.probs[y], 1e-300)) - w_h * h) * inv_n;

    Vec dlogits(t.logits.size(), 0.0);
    for (std::size_t k = 0; k < soft.probs.size(); ++k) {
      dlogits[k] = (soft.probs[k] - (static_cast<int>(k) == y ? 1.0 : 0.0)) /
                   tau * inv_n;
    }
    Vec dh_ent = entropy_logit_grad(clean, h);
    axpy(dlogits, -w_h * inv_n, dh_ent);
    backprop(m, t, dlogits, no_dh, grads);
  }
  out.g_delta = std::move(grads.g_w);
  return out;
}

LossGrads loss_guard(const AdaptedModel& m,
                     const std::vector<GuardrailExample>& batch) {
  if (batch.empty()) {
    throw std::invalid_argument("loss_guard: empty batch");
  }
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  LossGrads out;
  BackpropGrads grads(*m.base, false);
  const Vec no_dh;
  for (const auto& ex : batch) {
    ForwardTrace t = backbone_forward(m, ex.x);
    Distribution d = clean_distribution(t);
    if (ex.label < 0 || ex.label >= static_cast<int>(d.probs.size())) {
      throw std::invalid_argument("loss_guard: label out of range");
    }
    out.value += -std::log(std::max(d.probs[ex.label], 1e-300)) * inv_n;
    Vec dlogits(t.logits.size());
    for (std::size_t k = 0; k < d.probs.size(); ++k) {
      dlogits[k] =
          (d.probs[k] - (static_cast<int>(k) == ex.label ? 1.0 : 0.0)) * inv_n;
    }
    backprop(m, t, dlogits, no_dh, grads);
  }
  out.g_delta = std::move(grads.g_w);
  return out;
}

LossGrads loss_entropy_only(const AdaptedModel& m,
                            const std::vector<Vec>& canonical) {
  if (canonical.empty()) {
    throw std::invalid_argument("loss_entropy_only: empty batch");
  }
  const double inv_n = 1.0 / static_cast<double>(canonical.size());
  LossGrads out;
  BackpropGrads grads(*m.base, false);
  const Vec no_dh;
  for (const auto& x : canonical) {
    ForwardTrace t = backbone_forward(m, x);
    Distribution d = clean_distribution(t);
    const double h = shannon_entropy(d);
    out.value += h * inv_n;
    Vec dlogits = entropy_logit_grad(d, h);
    for (auto& g : dlogits) g *= inv_n;
    backprop(m, t, dlogits, no_dh, grads);
  }
  out.g_delta = std::move(grads.g_w);
  return out;
}

GuardrailSet margin_sample(const std::vector<Vec>& xs,
                           const std::vector<int>& labels, double fraction,
                           const AdaptedModel& model) {
  if (xs.empty() || labels.size() != xs.size()) {
    throw std::invalid_argument("margin_sample: empty or mismatched source set");
  }
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw std::invalid_argument("margin_sample: fraction must be in (0, 1]");
  }
  std::vector<GuardrailExample> all(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    ForwardTrace t = backbone_forward(model, xs[i]);
    Vec p = clean_distribution(t).probs;
    std::partial_sort(p.begin(), p.begin() + 2, p.end(), std::greater<>());
    all[i] = {xs[i], labels[i], p[0] - p[1]};
  }
  std::stable_sort(all.begin(), all.end(),
                   [](const GuardrailExample& a, const GuardrailExample& b) {
                     return a.margin > b.margin;
                   });
  const auto n_keep = static_cast<std::size_t>(
      std::ceil(fraction * static_cast<double>(xs.size()) - 1e-9));
  GuardrailSet out;
  out.examples.assign(all.begin(), all.begin() + std::max<std::size_t>(n_keep, 1));
  return out;
}

Sc3Result compose_sc3(const LossGrads& prob, const LossGrads& proc,
                      const LossGrads& guard, double lambda1, double lambda2,
                      double lambda3, const ToyBackbone& model) {
  if (lambda1 < 0.0 || lambda2 < 0.0 || lambda3 < 0.0) {
    throw std::invalid_argument("compose_sc3: weights must be nonnegative");
  }
  Sc3Result out;
  out.breakdown.l_prob = prob.value;
  out.breakdown.l_proc = proc.value;
  out.breakdown.l_guard = guard.value;
  out.breakdown.lambda1 = lambda1;
  out.breakdown.lambda2 = lambda2;
  out.breakdown.lambda3 = lambda3;
  out.breakdown.l_total =
      lambda1 * prob.value + lambda2 * proc.value + lambda3 * guard.value;

  for (int l = 0; l < model.n_hidden_layers(); ++l) {
    Tensor2D g(model.hidden[l].w.rows, model.hidden[l].w.cols);
    if (lambda1 > 0.0 && !prob.g_delta.empty())
      add_inplace(g, prob.g_delta[l], lambda1);
    if (lambda2 > 0.0 && !proc.g_delta.empty())
      add_inplace(g, proc.g_delta[l], lambda2);
    if (lambda3 > 0.0 && !guard.g_delta.empty())
      add_inplace(g, guard.g_delta[l], lambda3);
    out.g_delta.push_back(std::move(g));
  }
  return out;
}

}  // namespace syco
