#include <cmath>
#include <stdexcept>

#include "doctest.h"
#include "syco/finite_diff.hpp"
#include "syco/prob.hpp"
#include "syco/rng.hpp"
#include "syco/tensor.hpp"

using namespace syco;

namespace {

Tensor2D from_rows(const std::vector<Vec>& rows) {
  Tensor2D t(static_cast<int>(rows.size()), static_cast<int>(rows[0].size()));
  for (int i = 0; i < t.rows; ++i)
    for (int j = 0; j < t.cols; ++j) t.at(i, j) = rows[i][j];
  return t;
}

}  // namespace

TEST_CASE("matmul basics") {
  Tensor2D m = from_rows({{1, 2}, {3, 4}});

  SUBCASE("identity times M is M") {
    Tensor2D i3 = Tensor2D::identity(2);
    Tensor2D out = matmul(i3, m);
    CHECK(max_abs_diff(out, m) == 0.0);
    Tensor2D out2 = matmul(m, Tensor2D::identity(2));
    CHECK(max_abs_diff(out2, m) == 0.0);
  }

  SUBCASE("hand-checked product") {
    Tensor2D v = from_rows({{5}, {6}});
    Tensor2D out = matmul(m, v);
    CHECK(out.rows == 2);
    CHECK(out.cols == 1);
    CHECK(out.at(0, 0) == doctest::Approx(17.0).epsilon(1e-15));
    CHECK(out.at(1, 0) == doctest::Approx(39.0).epsilon(1e-15));
  }

  SUBCASE("dimension mismatch names both shapes") {
    Tensor2D bad(3, 3);
    CHECK_THROWS_WITH_AS(matmul(m, bad), "matmul: dimension mismatch 2x2 * 3x3",
                         std::invalid_argument);
  }
}

TEST_CASE("softmax_temp") {
  SUBCASE("equal logits are uniform at any temperature") {
    for (double tau : {0.5, 1.0, 7.0}) {
      Distribution d = softmax_temp({2.5, 2.5, 2.5, 2.5}, tau);
      for (double p : d.probs) CHECK(p == doctest::Approx(0.25).epsilon(1e-14));
    }
  }

  SUBCASE("closed form [ln2, 0] at tau=1") {
    Distribution d = softmax_temp({std::log(2.0), 0.0}, 1.0);
    CHECK(d.probs[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
    CHECK(d.probs[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
  }

  SUBCASE("large tau flattens toward uniform") {
    Distribution d = softmax_temp({3.0, -1.0, 0.5}, 1e6);
    double lo = d.probs[0], hi = d.probs[0];
    for (double p : d.probs) {
      lo = std::min(lo, p);
      hi = std::max(hi, p);
    }
    CHECK(hi - lo < 1e-3);
  }

  SUBCASE("tau must be positive") {
    CHECK_THROWS_AS(softmax_temp({1.0, 2.0}, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(softmax_temp({1.0, 2.0}, -1.0), std::invalid_argument);
  }

  SUBCASE("valid distribution across extreme temperatures") {
    RngState rng(42);
    for (double tau : {1e-6, 1e-3, 1.0, 1e3, 1e9}) {
      Vec z(5);
      for (auto& x : z) x = 10.0 * rng.next_gaussian();
      CHECK(is_valid_distribution(softmax_temp(z, tau)));
    }
  }
}

TEST_CASE("shannon_entropy") {
  SUBCASE("uniform over 4 classes") {
    double h = shannon_entropy({{0.25, 0.25, 0.25, 0.25}});
    CHECK(h == doctest::Approx(std::log(4.0)).epsilon(1e-14));
  }

  SUBCASE("one-hot is zero") {
    CHECK(shannon_entropy({{0.0, 1.0, 0.0}}) == 0.0);
  }

  SUBCASE("closed form 1.5 ln 2") {
    double h = shannon_entropy({{0.5, 0.25, 0.25}});
    CHECK(h == doctest::Approx(1.5 * std::log(2.0)).epsilon(1e-14));
  }

  SUBCASE("bounded by ln K with maximum at uniform") {
    RngState rng(7);
    for (int trial = 0; trial < 50; ++trial) {
      int k = 2 + static_cast<int>(rng.next_u64() % 6);
      Vec raw(k);
      double sum = 0.0;
      for (auto& p : raw) {
        p = rng.next_double() + 1e-9;
        sum += p;
      }
      for (auto& p : raw) p /= sum;
      double h = shannon_entropy({raw});
      CHECK(h >= 0.0);
      CHECK(h <= std::log(static_cast<double>(k)) + 1e-12);
    }
  }
}

TEST_CASE("cosine_sim") {
  SUBCASE("self similarity is 1") {
    Vec v = {0.3, -1.2, 4.0};
    CHECK(cosine_sim(v, v) == doctest::Approx(1.0).epsilon(1e-15));
  }

  SUBCASE("orthogonal pair is 0") {
    CHECK(cosine_sim({1.0, 0.0}, {0.0, 3.0}) == doctest::Approx(0.0));
  }

  SUBCASE("closed form 1/sqrt(2)") {
    CHECK(cosine_sim({1.0, 1.0}, {1.0, 0.0}) ==
          doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-14));
  }

  SUBCASE("zero norm rejected") {
    CHECK_THROWS_AS(cosine_sim({0.0, 0.0}, {1.0, 0.0}), std::invalid_argument);
  }
}

TEST_CASE("finite_diff_grad") {
  SUBCASE("quadratic bowl") {
    auto f = [](const Vec& t) { return 0.5 * dot(t, t); };
    Vec g = finite_diff_grad(f, {1.0, 2.0});
    CHECK(std::fabs(g[0] - 1.0) < 1e-8);
    CHECK(std::fabs(g[1] - 2.0) < 1e-8);
  }

  SUBCASE("constant function has zero gradient") {
    auto f = [](const Vec&) { return 3.5; };
    Vec g = finite_diff_grad(f, {0.2, -0.4, 9.0});
    for (double x : g) CHECK(std::fabs(x) < 1e-9);
  }

  SUBCASE("product rule at [3,5]") {
    auto f = [](const Vec& t) { return t[0] * t[1]; };
    Vec g = finite_diff_grad(f, {3.0, 5.0});
    CHECK(std::fabs(g[0] - 5.0) < 1e-8);
    CHECK(std::fabs(g[1] - 3.0) < 1e-8);
  }

  SUBCASE("non-finite evaluation rejected") {
    auto f = [](const Vec& t) { return std::log(t[0]); };
    CHECK_THROWS_AS(finite_diff_grad(f, {0.0}), std::runtime_error);
  }
}

TEST_CASE("rng determinism and forks") {
  SUBCASE("same seed replays bit-identically") {
    RngState a(123), b(123);
    for (int i = 0; i < 1000; ++i) {
      CHECK(a.next_u64() == b.next_u64());
    }
    RngState c(123), d(123);
    for (int i = 0; i < 100; ++i) {
      CHECK(c.next_gaussian() == d.next_gaussian());
    }
  }

  SUBCASE("different seeds diverge") {
    RngState a(1), b(2);
    int same = 0;
    for (int i = 0; i < 64; ++i) same += (a.next_u64() == b.next_u64());
    CHECK(same == 0);
  }

  SUBCASE("forked streams are independent of parent draw position") {
    RngState a(9);
    RngState f1 = a.fork(3);
    a.next_u64();
    RngState f2 = a.fork(3);
    CHECK(f1.seed == f2.seed);
  }

  SUBCASE("gaussian draws are roughly standard normal") {
    RngState rng(2024);
    const int n = 20000;
    double mean = 0.0, var = 0.0;
    std::vector<double> xs(n);
    for (auto& x : xs) {
      x = rng.next_gaussian();
      mean += x;
    }
    mean /= n;
    for (double x : xs) var += (x - mean) * (x - mean);
    var /= n - 1;
    CHECK(std::fabs(mean) < 0.03);
    CHECK(std::fabs(var - 1.0) < 0.05);
  }
}

TEST_CASE("tensor randn is seed-deterministic") {
  RngState a(55), b(55);
  Tensor2D t1 = Tensor2D::randn(4, 5, a, 0.1);
  Tensor2D t2 = Tensor2D::randn(4, 5, b, 0.1);
  CHECK(max_abs_diff(t1, t2) == 0.0);
  Tensor2D t3 = Tensor2D::randn(4, 5, a, 0.1);
  CHECK(max_abs_diff(t1, t3) > 0.0);
}
