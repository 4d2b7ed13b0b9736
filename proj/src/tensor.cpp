#include "syco/tensor.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace syco {

namespace {

std::string shape_str(const Tensor2D& t) {
  return std::to_string(t.rows) + "x" + std::to_string(t.cols);
}

}  // namespace

Tensor2D::Tensor2D(int r, int c) : rows(r), cols(c) {
  if (r <= 0 || c <= 0) {
    throw std::invalid_argument("Tensor2D: dimensions must be positive, got " +
                                std::to_string(r) + "x" + std::to_string(c));
  }
  data.assign(static_cast<std::size_t>(r) * c, 0.0);
}

Tensor2D Tensor2D::identity(int n) {
  Tensor2D t(n, n);
  for (int i = 0; i < n; ++i) t.at(i, i) = 1.0;
  return t;
}

Tensor2D Tensor2D::randn(int r, int c, RngState& rng, double scale) {
  Tensor2D t(r, c);
  for (auto& x : t.data) x = scale * rng.next_gaussian();
  return t;
}

Tensor2D matmul(const Tensor2D& a, const Tensor2D& b) {
  if (a.cols != b.rows) {
    throw std::invalid_argument("matmul: dimension mismatch " + shape_str(a) +
                                " * " + shape_str(b));
  }
  Tensor2D out(a.rows, b.cols);
  for (int i = 0; i < a.rows; ++i) {
    for (int k = 0; k < a.cols; ++k) {
      const double aik = a.at(i, k);
      if (aik == 0.0) continue;
      for (int j = 0; j < b.cols; ++j) {
        out.at(i, j) += aik * b.at(k, j);
      }
    }
  }
  check_finite(out, "matmul");
  return out;
}

Tensor2D transpose(const Tensor2D& a) {
  Tensor2D out(a.cols, a.rows);
  for (int i = 0; i < a.rows; ++i)
    for (int j = 0; j < a.cols; ++j) out.at(j, i) = a.at(i, j);
  return out;
}

Tensor2D outer(const Vec& u, const Vec& v) {
  Tensor2D out(static_cast<int>(u.size()), static_cast<int>(v.size()));
  for (int i = 0; i < out.rows; ++i)
    for (int j = 0; j < out.cols; ++j) out.at(i, j) = u[i] * v[j];
  return out;
}

void add_inplace(Tensor2D& a, const Tensor2D& b, double scale) {
  if (a.rows != b.rows || a.cols != b.cols) {
    throw std::invalid_argument("add_inplace: shape mismatch " + shape_str(a) +
                                " vs " + shape_str(b));
  }
  for (std::size_t i = 0; i < a.data.size(); ++i) a.data[i] += scale * b.data[i];
}

void scale_inplace(Tensor2D& a, double s) {
  for (auto& x : a.data) x *= s;
}

Vec matvec(const Tensor2D& a, const Vec& x) {
  if (a.cols != static_cast<int>(x.size())) {
    throw std::invalid_argument("matvec: dimension mismatch " + shape_str(a) +
                                " * vec(" + std::to_string(x.size()) + ")");
  }
  Vec out(a.rows, 0.0);
  for (int i = 0; i < a.rows; ++i) {
    double s = 0.0;
    for (int j = 0; j < a.cols; ++j) s += a.at(i, j) * x[j];
    out[i] = s;
  }
  return out;
}

Vec matvec_t(const Tensor2D& a, const Vec& x) {
  if (a.rows != static_cast<int>(x.size())) {
    throw std::invalid_argument("matvec_t: dimension mismatch " + shape_str(a) +
                                "^T * vec(" + std::to_string(x.size()) + ")");
  }
  Vec out(a.cols, 0.0);
  for (int i = 0; i < a.rows; ++i) {
    const double xi = x[i];
    if (xi == 0.0) continue;
    for (int j = 0; j < a.cols; ++j) out[j] += a.at(i, j) * xi;
  }
  return out;
}

Vec column(const Tensor2D& a, int j) {
  Vec out(a.rows);
  for (int i = 0; i < a.rows; ++i) out[i] = a.at(i, j);
  return out;
}

double frobenius_norm(const Tensor2D& a) {
  double s = 0.0;
  for (double x : a.data) s += x * x;
  return std::sqrt(s);
}

double max_abs_diff(const Tensor2D& a, const Tensor2D& b) {
  if (a.rows != b.rows || a.cols != b.cols) {
    throw std::invalid_argument("max_abs_diff: shape mismatch " + shape_str(a) +
                                " vs " + shape_str(b));
  }
  double m = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i)
    m = std::max(m, std::fabs(a.data[i] - b.data[i]));
  return m;
}

void check_finite(const Tensor2D& a, const char* where) {
  for (double x : a.data) {
    if (!std::isfinite(x)) {
      throw std::runtime_error(std::string(where) + ": non-finite entry");
    }
  }
}

double dot(const Vec& u, const Vec& v) {
  if (u.size() != v.size()) {
    throw std::invalid_argument("dot: length mismatch " +
                                std::to_string(u.size()) + " vs " +
                                std::to_string(v.size()));
  }
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) s += u[i] * v[i];
  return s;
}

double norm(const Vec& v) { return std::sqrt(dot(v, v)); }

void axpy(Vec& y, double a, const Vec& x) {
  if (y.size() != x.size()) {
    throw std::invalid_argument("axpy: length mismatch");
  }
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += a * x[i];
}

Vec vec_sub(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("vec_sub: length mismatch");
  }
  Vec out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  return out;
}

void check_finite(const Vec& v, const char* where) {
  for (double x : v) {
    if (!std::isfinite(x)) {
      throw std::runtime_error(std::string(where) + ": non-finite entry");
    }
  }
}

}  // namespace syco
