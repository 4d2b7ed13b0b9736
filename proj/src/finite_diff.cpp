#include "syco/finite_diff.hpp"

#include <cmath>
#include <stdexcept>

namespace syco {

Vec finite_diff_grad(const std::function<double(const Vec&)>& f,
                     const Vec& theta, double h) {
  if (!(h > 0.0)) {
    throw std::invalid_argument("finite_diff_grad: step must be positive");
  }
  Vec g(theta.size(), 0.0);
  Vec probe = theta;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    probe[i] = theta[i] + h;
    const double fp = f(probe);
    probe[i] = theta[i] - h;
    const double fm = f(probe);
    probe[i] = theta[i];
    if (!std::isfinite(fp) || !std::isfinite(fm)) {
      throw std::runtime_error("finite_diff_grad: non-finite evaluation");
    }
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

double rel_error(const Vec& a, const Vec& b, double floor) {
  Vec d = vec_sub(a, b);
  return norm(d) / std::max(norm(b), floor);
}

}  // namespace syco
