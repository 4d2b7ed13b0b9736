#pragma once

#include <cstddef>
#include <vector>

#include "syco/rng.hpp"

namespace syco {

using Vec = std::vector<double>;

// Dense row-major matrix of 64-bit reals. All public operations keep entries
// finite; non-finite results indicate a bug upstream and throw.
struct Tensor2D {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Tensor2D() = default;
  Tensor2D(int r, int c);

  static Tensor2D identity(int n);
  static Tensor2D randn(int r, int c, RngState& rng, double scale);

  double& at(int i, int j) {
    return data[static_cast<std::size_t>(i) * cols + j];
  }
  double at(int i, int j) const {
    return data[static_cast<std::size_t>(i) * cols + j];
  }
};

Tensor2D matmul(const Tensor2D& a, const Tensor2D& b);
Tensor2D transpose(const Tensor2D& a);
Tensor2D outer(const Vec& u, const Vec& v);
void add_inplace(Tensor2D& a, const Tensor2D& b, double scale = 1.0);
void scale_inplace(Tensor2D& a, double s);
Vec matvec(const Tensor2D& a, const Vec& x);    // A x
Vec matvec_t(const Tensor2D& a, const Vec& x);  // A^T x
Vec column(const Tensor2D& a, int j);
double frobenius_norm(const Tensor2D& a);
double max_abs_diff(const Tensor2D& a, const Tensor2D& b);
void check_finite(const Tensor2D& a, const char* where);

double dot(const Vec& u, const Vec& v);
double norm(const Vec& v);
void axpy(Vec& y, double a, const Vec& x);  // y += a x
Vec vec_sub(const Vec& a, const Vec& b);
void check_finite(const Vec& v, const char* where);

}  // namespace syco
