#include "syco/mapk.hpp"

#include <cmath>
#include <stdexcept>

namespace syco {

void ReliabilityHistory::observe(const SignalSample& s) {
  if (has_prev) {
    auto ind = raw_indicators(prev, s);
    push_indicators(ind[0], ind[1], ind[2]);
  }
  prev = s;
  has_prev = true;
  ++t;
}

void ReliabilityHistory::push_indicators(int eh, int ep, int ec) {
  e_h.push_back(eh);
  e_p.push_back(ep);
  e_c.push_back(ec);
  while (static_cast<int>(e_h.size()) > l) e_h.pop_front();
  while (static_cast<int>(e_p.size()) > l) e_p.pop_front();
  while (static_cast<int>(e_c.size()) > l) e_c.pop_front();
}

std::array<int, 3> ReliabilityHistory::latest_raw() const {
  if (e_h.empty()) {
    throw std::runtime_error("ReliabilityHistory: no indicators yet");
  }
  return {e_h.back(), e_p.back(), e_c.back()};
}

SignalSample compute_signals(const std::vector<Distribution>& clean_dists,
                             const std::vector<PseudoLabel>& pseudo,
                             const std::vector<std::vector<int>>& candidates) {
  const std::size_t n = clean_dists.size();
  if (n == 0) {
    throw std::invalid_argument("compute_signals: empty batch");
  }
  if (pseudo.size() != n || candidates.size() != n) {
    throw std::invalid_argument("compute_signals: batch size mismatch");
  }
  SignalSample s;
  for (std::size_t b = 0; b < n; ++b) {
    const int m = static_cast<int>(candidates[b].size());
    if (m < 2) {
      throw std::invalid_argument(
          "compute_signals: consistency undefined for fewer than 2 candidates");
    }
    s.h += shannon_entropy(clean_dists[b]);
    s.p += std::log(std::max(pseudo[b].confidence, 1e-300));
    // modal agreement rate over the M stochastic candidates
    int modal = 0;
    for (int i = 0; i < m; ++i) {
      int count = 0;
      for (int j = 0; j < m; ++j) {
        if (candidates[b][j] == candidates[b][i]) ++count;
      }
      modal = std::max(modal, count);
    }
    s.c += static_cast<double>(modal) / m;
  }
  s.h /= static_cast<double>(n);
  s.p /= static_cast<double>(n);
  s.c /= static_cast<double>(n);
  return s;
}

std::array<int, 3> raw_indicators(const SignalSample& prev,
                                  const SignalSample& cur) {
  return {prev.h - cur.h > 0.0 ? 1 : 0, cur.p - prev.p > 0.0 ? 1 : 0,
          cur.c - prev.c > 0.0 ? 1 : 0};
}

int smoothing_threshold(int l, double kappa) {
  // nudge keeps exact products like 1.0 * 3 from rounding up
  return static_cast<int>(std::ceil(kappa * l - 1e-9));
}

int smoothed_indicator(const ReliabilityHistory& hist, char signal) {
  const std::deque<int>* buf = nullptr;
  switch (signal) {
    case 'H': buf = &hist.e_h; break;
    case 'P': buf = &hist.e_p; break;
    case 'C': buf = &hist.e_c; break;
    default:
      throw std::invalid_argument("smoothed_indicator: signal must be H, P or C");
  }
  int sum = 0;
  for (int bit : *buf) sum += bit;
  return sum >= smoothing_threshold(hist.l, hist.kappa) ? 1 : 0;
}

std::pair<int, int> activation_events(int e_h, int e_p, int e_c) {
  const int xor_hp = (e_h != e_p) ? 1 : 0;
  const int fallback = (e_c == 1 && e_h == 0 && e_p == 0) ? 1 : 0;
  const int a_p = (xor_hp || fallback) ? 1 : 0;
  const int a_f = (e_h == 1 && e_p == 1) ? 1 : 0;
  return {a_p, a_f};
}

double modulated_lr(const TtaConfig& cfg, int a_p, int a_f) {
  return cfg.eta0 * (cfg.gamma0 + cfg.gamma1 * a_p + cfg.gamma2 * a_f);
}

}  // namespace syco
