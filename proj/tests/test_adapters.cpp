#include <cmath>
#include <stdexcept>

#include "doctest.h"
#include "syco/adapters.hpp"
#include "syco/finite_diff.hpp"

using namespace syco;

namespace {

// flattens (sigma, U, V) of all adapters into one parameter vector and back;
// the finite-difference oracle differentiates through this view
Vec flatten_adapters(const std::vector<SvdAdapter>& as) {
  Vec out;
  for (const auto& a : as) {
    out.insert(out.end(), a.sigma.begin(), a.sigma.end());
    out.insert(out.end(), a.u.data.begin(), a.u.data.end());
    out.insert(out.end(), a.v.data.begin(), a.v.data.end());
  }
  return out;
}

void unflatten_adapters(const Vec& theta, std::vector<SvdAdapter>& as) {
  std::size_t p = 0;
  for (auto& a : as) {
    for (auto& s : a.sigma) s = theta[p++];
    for (auto& x : a.u.data) x = theta[p++];
    for (auto& x : a.v.data) x = theta[p++];
  }
}

ToyBackbone tiny_model(RngState& rng, int d_in = 5, int hidden = 6,
                       int classes = 3) {
  return make_backbone(d_in, hidden, classes, 2, rng);
}

double ce_loss(const AdaptedModel& m, const Vec& x, int y) {
  ForwardTrace t = backbone_forward(m, x);
  Distribution d = clean_distribution(t);
  return -std::log(std::max(d.probs[y], 1e-300));
}

}  // namespace

TEST_CASE("init_svd_adapter") {
  SUBCASE("fresh adapter has an exactly zero delta") {
    RngState rng(3);
    SvdAdapter a = init_svd_adapter(7, 5, 3, rng);
    Tensor2D dw = delta_weight(a);
    for (double x : dw.data) CHECK(x == 0.0);
  }

  SUBCASE("same seed gives bit-identical adapters") {
    RngState r1(11), r2(11);
    SvdAdapter a = init_svd_adapter(6, 4, 2, r1);
    SvdAdapter b = init_svd_adapter(6, 4, 2, r2);
    CHECK(max_abs_diff(a.u, b.u) == 0.0);
    CHECK(max_abs_diff(a.v, b.v) == 0.0);
  }

  SUBCASE("different seeds differ") {
    RngState r1(11), r2(12);
    SvdAdapter a = init_svd_adapter(6, 4, 2, r1);
    SvdAdapter b = init_svd_adapter(6, 4, 2, r2);
    Tensor2D diff = a.u;
    add_inplace(diff, b.u, -1.0);
    CHECK(frobenius_norm(diff) > 0.0);
  }

  SUBCASE("invalid rank rejected") {
    RngState rng(1);
    CHECK_THROWS_AS(init_svd_adapter(4, 4, 0, rng), std::invalid_argument);
    CHECK_THROWS_AS(init_svd_adapter(4, 4, 5, rng), std::invalid_argument);
  }
}

TEST_CASE("delta_weight") {
  SUBCASE("rank-1 hand case") {
    SvdAdapter a;
    a.u = Tensor2D(2, 1);
    a.u.at(0, 0) = 1.0;
    a.v = Tensor2D(2, 1);
    a.v.at(0, 0) = 1.0;
    a.v.at(1, 0) = 1.0;
    a.sigma = {2.0};
    Tensor2D dw = delta_weight(a);
    CHECK(dw.at(0, 0) == 2.0);
    CHECK(dw.at(0, 1) == 2.0);
    CHECK(dw.at(1, 0) == 0.0);
    CHECK(dw.at(1, 1) == 0.0);
  }

  SUBCASE("scaling sigma scales the delta linearly") {
    RngState rng(5);
    SvdAdapter a = init_svd_adapter(5, 4, 3, rng);
    for (auto& s : a.sigma) s = rng.next_gaussian();
    const double base = frobenius_norm(delta_weight(a));
    for (auto& s : a.sigma) s *= 3.0;
    CHECK(frobenius_norm(delta_weight(a)) ==
          doctest::Approx(3.0 * base).epsilon(1e-12));
  }
}

TEST_CASE("adapter_forward") {
  RngState rng(17);
  FrozenLinear layer;
  layer.w = Tensor2D::randn(4, 3, rng, 0.5);
  layer.b = {0.1, -0.2, 0.3, 0.0};
  Vec x = {0.5, -1.0, 2.0};

  SUBCASE("zero-init adapter output is bit-identical to the plain layer") {
    SvdAdapter a = init_svd_adapter(4, 3, 2, rng);
    Vec plain = adapter_forward(layer, std::monostate{}, x);
    Vec adapted = adapter_forward(layer, a, x);
    for (std::size_t i = 0; i < plain.size(); ++i) {
      CHECK(adapted[i] == plain[i]);
    }
  }

  SUBCASE("gate zero makes the branch inert") {
    TaLoraAdapter a;
    a.b_shared = Tensor2D::randn(4, 2, rng, 1.0);
    a.u = {1.0, -2.0};
    a.v = {0.3, 0.4, 0.5};
    a.gate = 0.0;
    Vec plain = adapter_forward(layer, std::monostate{}, x);
    Vec adapted = adapter_forward(layer, a, x);
    for (std::size_t i = 0; i < plain.size(); ++i) {
      CHECK(adapted[i] == plain[i]);
    }
  }

  SUBCASE("nonzero sigma matches the dense computation") {
    SvdAdapter a = init_svd_adapter(4, 3, 2, rng);
    a.sigma = {0.7, -1.3};
    Tensor2D w_dense = layer.w;
    add_inplace(w_dense, delta_weight(a));
    Vec expect = matvec(w_dense, x);
    for (std::size_t i = 0; i < expect.size(); ++i) expect[i] += layer.b[i];
    Vec got = adapter_forward(layer, a, x);
    for (std::size_t i = 0; i < got.size(); ++i) {
      CHECK(got[i] == doctest::Approx(expect[i]).epsilon(1e-12));
    }
  }

  SUBCASE("lora parameterization: delta is B A^T") {
    LoraAdapter a;
    a.b_mat = Tensor2D::randn(4, 2, rng, 1.0);
    a.a_mat = Tensor2D::randn(3, 2, rng, 1.0);
    Tensor2D dw = delta_weight(a);
    Tensor2D expect = matmul(a.b_mat, transpose(a.a_mat));
    CHECK(max_abs_diff(dw, expect) == 0.0);
  }

  SUBCASE("shape mismatch rejected") {
    CHECK_THROWS_AS(adapter_forward(layer, std::monostate{}, {1.0, 2.0}),
                    std::invalid_argument);
  }
}

TEST_CASE("backbone_forward") {
  RngState rng(23);
  ToyBackbone model = tiny_model(rng);
  AdaptedModel m(model);
  Vec x = {0.2, -0.5, 1.0, 0.0, -1.5};

  SUBCASE("zero-init adapters reproduce the frozen reference bit-exactly") {
    ForwardTrace ref = backbone_forward(m, x);
    std::vector<SvdAdapter> adapters;
    RngState arng(9);
    for (const auto& layer : model.hidden) {
      adapters.push_back(init_svd_adapter(layer.w.rows, layer.w.cols, 3, arng));
    }
    AdaptedModel m2(model);
    m2.rebuild(adapters);
    ForwardTrace got = backbone_forward(m2, x);
    for (std::size_t i = 0; i < ref.logits.size(); ++i) {
      CHECK(std::fabs(got.logits[i] - ref.logits[i]) == 0.0);
    }
    for (std::size_t i = 0; i < ref.h().size(); ++i) {
      CHECK(std::fabs(got.h()[i] - ref.h()[i]) == 0.0);
    }
  }

  SUBCASE("identical inputs give identical outputs") {
    ForwardTrace a = backbone_forward(m, x);
    ForwardTrace b = backbone_forward(m, x);
    for (std::size_t i = 0; i < a.logits.size(); ++i) {
      CHECK(a.logits[i] == b.logits[i]);
    }
  }

  SUBCASE("folded path matches adapter_forward on the first layer") {
    std::vector<SvdAdapter> adapters;
    RngState arng(31);
    for (const auto& layer : model.hidden) {
      SvdAdapter a = init_svd_adapter(layer.w.rows, layer.w.cols, 3, arng);
      for (auto& s : a.sigma) s = 0.5 * arng.next_gaussian();
      adapters.push_back(std::move(a));
    }
    AdaptedModel m2(model);
    m2.rebuild(adapters);
    ForwardTrace t = backbone_forward(m2, x);
    Vec direct = adapter_forward(model.hidden[0], adapters[0], x);
    for (std::size_t i = 0; i < direct.size(); ++i) {
      CHECK(t.pre[0][i] == doctest::Approx(direct[i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("cross-entropy gradient through the backbone matches the oracle") {
  RngState rng(41);
  ToyBackbone model = tiny_model(rng);
  std::vector<SvdAdapter> adapters;
  RngState arng(7);
  for (const auto& layer : model.hidden) {
    SvdAdapter a = init_svd_adapter(layer.w.rows, layer.w.cols, 3, arng, 0.3);
    for (auto& s : a.sigma) s = 0.4 * arng.next_gaussian();
    adapters.push_back(std::move(a));
  }
  Vec x = {0.3, -0.8, 0.5, 1.2, -0.4};
  const int y = 1;

  AdaptedModel m(model);
  m.rebuild(adapters);
  ForwardTrace t = backbone_forward(m, x);
  Distribution d = clean_distribution(t);
  Vec dlogits(d.probs.size());
  for (std::size_t k = 0; k < d.probs.size(); ++k) {
    dlogits[k] = d.probs[k] - (static_cast<int>(k) == y ? 1.0 : 0.0);
  }
  BackpropGrads grads(model, false);
  backprop(m, t, dlogits, {}, grads);

  // chain rule into (sigma, U, V) from dL/d(delta W)
  Vec analytic;
  for (std::size_t l = 0; l < adapters.size(); ++l) {
    const SvdAdapter& a = adapters[l];
    const Tensor2D& g = grads.g_w[l];
    for (int j = 0; j < a.rank(); ++j) {
      double s = 0.0;
      for (int i = 0; i < a.u.rows; ++i) {
        for (int k = 0; k < a.v.rows; ++k) {
          s += a.u.at(i, j) * g.at(i, k) * a.v.at(k, j);
        }
      }
      analytic.push_back(s);
    }
    for (int i = 0; i < a.u.rows; ++i) {
      for (int j = 0; j < a.rank(); ++j) {
        double s = 0.0;
        for (int k = 0; k < a.v.rows; ++k) s += g.at(i, k) * a.v.at(k, j);
        analytic.push_back(s * a.sigma[j]);
      }
    }
    for (int k = 0; k < a.v.rows; ++k) {
      for (int j = 0; j < a.rank(); ++j) {
        double s = 0.0;
        for (int i = 0; i < a.u.rows; ++i) s += g.at(i, k) * a.u.at(i, j);
        analytic.push_back(s * a.sigma[j]);
      }
    }
  }

  auto loss_fn = [&](const Vec& theta) {
    std::vector<SvdAdapter> probe = adapters;
    unflatten_adapters(theta, probe);
    AdaptedModel pm(model);
    pm.rebuild(probe);
    return ce_loss(pm, x, y);
  };
  Vec fd = finite_diff_grad(loss_fn, flatten_adapters(adapters));
  CHECK(rel_error(analytic, fd) < 1e-5);
}

TEST_CASE("tanh nonlinearity is C1: derivative matches finite differences") {
  RngState rng(2025);
  for (int trial = 0; trial < 120; ++trial) {
    const double z = 4.0 * rng.next_gaussian();
    auto f = [](const Vec& t) { return std::tanh(t[0]); };
    Vec g = finite_diff_grad(f, {z});
    const double th = std::tanh(z);
    CHECK(std::fabs(g[0] - (1.0 - th * th)) < 1e-7);
  }
}

TEST_CASE("noisy forward is reproducible under the same rng state") {
  RngState rng(77);
  ToyBackbone model = tiny_model(rng);
  AdaptedModel m(model);
  Vec x = {0.1, 0.2, 0.3, 0.4, 0.5};
  RngState n1(99), n2(99);
  ForwardTrace a = backbone_forward_noisy(m, x, 0.2, n1);
  ForwardTrace b = backbone_forward_noisy(m, x, 0.2, n2);
  for (std::size_t i = 0; i < a.logits.size(); ++i) {
    CHECK(a.logits[i] == b.logits[i]);
  }
}
