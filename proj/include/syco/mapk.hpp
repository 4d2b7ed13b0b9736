#pragma once

#include <array>
#include <deque>
#include <vector>

#include "syco/config.hpp"
#include "syco/objectives.hpp"
#include "syco/prob.hpp"

namespace syco {

// One step's reliability signals: mean batch entropy (nats), mean
// log-likelihood of the selected pseudo-labels (nats, <= 0), and mean
// agreement rate of the stochastic candidates in [0, 1].
struct SignalSample {
  double h = 0.0;
  double p = 0.0;
  double c = 0.0;
};

// Ring buffers of raw indicator bits plus the previous sample. Indicators
// compare consecutive samples, so they exist only from the second
// observation on.
struct ReliabilityHistory {
  int l = 8;
  double kappa = 0.8;
  std::deque<int> e_h, e_p, e_c;
  bool has_prev = false;
  SignalSample prev;
  int t = 0;

  ReliabilityHistory() = default;
  ReliabilityHistory(int window, double persistence)
      : l(window), kappa(persistence) {}

  // records a sample; when a previous one exists, pushes its raw indicators
  void observe(const SignalSample& s);
  void push_indicators(int eh, int ep, int ec);
  bool has_indicators() const { return !e_h.empty(); }
  std::array<int, 3> latest_raw() const;
};

SignalSample compute_signals(const std::vector<Distribution>& clean_dists,
                             const std::vector<PseudoLabel>& pseudo,
                             const std::vector<std::vector<int>>& candidates);

// E_H = [H fell], E_P = [P rose], E_C = [C rose]; strict inequalities, so a
// flat signal counts as no evidence
std::array<int, 3> raw_indicators(const SignalSample& prev,
                                  const SignalSample& cur);

// 1 iff the indicator was positive in at least ceil(kappa * l) of the most
// recent l steps; with fewer than l samples the sum runs over the available
// prefix but the threshold stays ceil(kappa * l)
int smoothed_indicator(const ReliabilityHistory& hist, char signal);

int smoothing_threshold(int l, double kappa);

// A_p = (E_H xor E_P) or (E_C and not E_H and not E_P); A_f = E_H and E_P
std::pair<int, int> activation_events(int e_h, int e_p, int e_c);

// eta_t = eta0 (gamma0 + gamma1 A_p + gamma2 A_f)
double modulated_lr(const TtaConfig& cfg, int a_p, int a_f);

}  // namespace syco
