#include "syco/prob.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace syco {

bool is_valid_distribution(const Distribution& d, double tol) {
  if (d.probs.empty()) return false;
  double sum = 0.0;
  for (double p : d.probs) {
    if (!(p >= 0.0) || !std::isfinite(p)) return false;
    sum += p;
  }
  return std::fabs(sum - 1.0) <= tol;
}

Distribution softmax_temp(const Vec& logits, double tau) {
  if (!(tau > 0.0)) {
    throw std::invalid_argument("softmax_temp: tau must be positive");
  }
  if (logits.empty()) {
    throw std::invalid_argument("softmax_temp: empty logits");
  }
  double m = logits[0];
  for (double z : logits) m = std::max(m, z);
  Distribution out;
  out.probs.resize(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out.probs[i] = std::exp((logits[i] - m) / tau);
    sum += out.probs[i];
  }
  for (auto& p : out.probs) p /= sum;
  return out;
}

double shannon_entropy(const Distribution& p) {
  if (!is_valid_distribution(p)) {
    throw std::invalid_argument("shannon_entropy: invalid distribution");
  }
  double h = 0.0;
  for (double q : p.probs) {
    if (q > 0.0) h -= q * std::log(q);
  }
  return std::max(h, 0.0);
}

double cosine_sim(const Vec& u, const Vec& v) {
  const double nu = norm(u);
  const double nv = norm(v);
  if (nu == 0.0 || nv == 0.0) {
    throw std::invalid_argument("cosine_sim: zero-norm input");
  }
  double c = dot(u, v) / (nu * nv);
  return std::clamp(c, -1.0, 1.0);
}

int argmax(const Vec& v) {
  if (v.empty()) throw std::invalid_argument("argmax: empty vector");
  int best = 0;
  for (int i = 1; i < static_cast<int>(v.size()); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

}  // namespace syco
