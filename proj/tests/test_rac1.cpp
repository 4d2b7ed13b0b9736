#include <cmath>
#include <stdexcept>

#include "doctest.h"
#include "syco/finite_diff.hpp"
#include "syco/rac1.hpp"

using namespace syco;

TEST_CASE("build_mask") {
  SUBCASE("published operating point: r=16, alpha=0.1 keeps 14") {
    Vec sigma(16);
    for (int i = 0; i < 16; ++i) sigma[i] = 0.1 * (i + 1);
    PlasticityMask mask = build_mask(sigma, 0.1);
    CHECK(mask.keep_indices.size() == 14);
    CHECK(mask.plastic_count() == 2);
    // the two smallest |sigma| entries are the plastic ones
    CHECK(mask.m[0] == 1.0);
    CHECK(mask.m[1] == 1.0);
    for (int j = 2; j < 16; ++j) CHECK(mask.m[j] == 0.0);
  }

  SUBCASE("alpha=0 freezes everything") {
    Vec sigma = {3.0, 1.0, 2.0};
    PlasticityMask mask = build_mask(sigma, 0.0);
    CHECK(mask.keep_indices.size() == 3);
    CHECK(mask.plastic_count() == 0);
    for (double m : mask.m) CHECK(m == 0.0);
  }

  SUBCASE("alpha=1 opens everything") {
    Vec sigma = {3.0, 1.0, 2.0};
    PlasticityMask mask = build_mask(sigma, 1.0);
    CHECK(mask.keep_indices.empty());
    for (double m : mask.m) CHECK(m == 1.0);
  }

  SUBCASE("magnitude sort with signs") {
    PlasticityMask mask = build_mask({0.5, -3.0, 0.1, 2.0}, 0.5);
    CHECK(mask.keep_indices == std::vector<int>{1, 3});
    CHECK(mask.m[0] == 1.0);
    CHECK(mask.m[1] == 0.0);
    CHECK(mask.m[2] == 1.0);
    CHECK(mask.m[3] == 0.0);
  }

  SUBCASE("ties go to the lower index") {
    PlasticityMask mask = build_mask({1.0, 1.0, 1.0, 1.0}, 0.5);
    CHECK(mask.keep_indices == std::vector<int>{0, 1});
  }

  SUBCASE("cardinality invariant for every r, alpha") {
    RngState rng(8);
    for (int r = 1; r <= 20; ++r) {
      Vec sigma(r);
      for (auto& s : sigma) s = rng.next_gaussian();
      for (double alpha : {0.0, 0.1, 0.25, 0.5, 0.9, 1.0}) {
        PlasticityMask mask = build_mask(sigma, alpha);
        CHECK(static_cast<int>(mask.keep_indices.size()) +
                  mask.plastic_count() ==
              r);
        CHECK(static_cast<int>(mask.keep_indices.size()) ==
              static_cast<int>(std::floor((1.0 - alpha) * r + 1e-9)));
      }
    }
  }

  SUBCASE("empty sigma rejected") {
    CHECK_THROWS_AS(build_mask({}, 0.1), std::invalid_argument);
  }
}

TEST_CASE("build_mask_variant") {
  Vec sigma = {0.5, -3.0, 0.1, 2.0};

  SUBCASE("head variant opens the top-|sigma| directions") {
    PlasticityMask mask = build_mask_variant(sigma, 0.5, MaskSpace::head, nullptr);
    // plastic = {1, 3} (largest magnitudes), keep = {0, 2}
    CHECK(mask.keep_indices == std::vector<int>{0, 2});
    CHECK(mask.m[1] == 1.0);
    CHECK(mask.m[3] == 1.0);
  }

  SUBCASE("random variant has the right cardinality and is seeded") {
    RngState r1(5), r2(5);
    PlasticityMask a = build_mask_variant(sigma, 0.5, MaskSpace::random, &r1);
    PlasticityMask b = build_mask_variant(sigma, 0.5, MaskSpace::random, &r2);
    CHECK(a.keep_indices == b.keep_indices);
    CHECK(a.keep_indices.size() == 2);
  }

  SUBCASE("none variant leaves everything plastic") {
    PlasticityMask mask = build_mask_variant(sigma, 0.1, MaskSpace::none, nullptr);
    CHECK(mask.keep_indices.empty());
    CHECK(mask.plastic_count() == 4);
  }
}

TEST_CASE("reset_tail") {
  RngState rng(13);
  SvdAdapter a = init_svd_adapter(5, 4, 4, rng);
  a.sigma = {0.5, -3.0, 0.1, 2.0};

  SUBCASE("alpha=0 leaves the adapter unchanged") {
    PlasticityMask mask = build_mask(a.sigma, 0.0);
    SvdAdapter out = reset_tail(a, mask);
    for (int j = 0; j < 4; ++j) CHECK(out.sigma[j] == a.sigma[j]);
  }

  SUBCASE("plastic sigma entries are zeroed, kept ones untouched") {
    PlasticityMask mask = build_mask(a.sigma, 0.5);
    SvdAdapter out = reset_tail(a, mask);
    CHECK(out.sigma[0] == 0.0);
    CHECK(out.sigma[1] == -3.0);
    CHECK(out.sigma[2] == 0.0);
    CHECK(out.sigma[3] == 2.0);
    CHECK(max_abs_diff(out.u, a.u) == 0.0);
    CHECK(max_abs_diff(out.v, a.v) == 0.0);
  }

  SUBCASE("after reset the delta equals the kept rank-1 sum") {
    PlasticityMask mask = build_mask(a.sigma, 0.5);
    SvdAdapter out = reset_tail(a, mask);
    Tensor2D expect(5, 4);
    for (int j : mask.keep_indices) {
      for (int i = 0; i < 5; ++i) {
        for (int k = 0; k < 4; ++k) {
          expect.at(i, k) += a.sigma[j] * a.u.at(i, j) * a.v.at(k, j);
        }
      }
    }
    CHECK(max_abs_diff(delta_weight(out), expect) < 1e-15);
  }

  SUBCASE("rank mismatch rejected") {
    PlasticityMask mask = build_mask({1.0, 2.0}, 0.5);
    CHECK_THROWS_AS(reset_tail(a, mask), std::invalid_argument);
  }
}

TEST_CASE("masked_sigma_grad") {
  SUBCASE("all-kept mask gives a zero vector") {
    RngState rng(3);
    SvdAdapter a = init_svd_adapter(3, 3, 2, rng);
    Tensor2D g = Tensor2D::randn(3, 3, rng, 1.0);
    PlasticityMask mask = build_mask({1.0, 2.0}, 0.0);
    Vec out = masked_sigma_grad(a.u, a.v, g, mask);
    CHECK(out[0] == 0.0);
    CHECK(out[1] == 0.0);
  }

  SUBCASE("rank-1 hand case: diag(U^T G V)") {
    Tensor2D u(2, 1), v(2, 1), g(2, 2);
    u.at(0, 0) = 1.0;
    v.at(0, 0) = 1.0;
    g.at(0, 0) = 3.0;
    g.at(0, 1) = 1.0;
    g.at(1, 0) = 2.0;
    g.at(1, 1) = 4.0;
    PlasticityMask mask = build_mask({0.0}, 1.0);
    Vec out = masked_sigma_grad(u, v, g, mask);
    CHECK(out[0] == 3.0);
  }

  SUBCASE("matches the projected finite-difference gradient of the dense loss") {
    // loss(delta) = sum(T .* delta) with delta = U diag(sigma) V^T, so
    // dL/dsigma_j = u_j^T T v_j exactly; compare against finite differences
    // through sigma on plastic slots and exact zero on kept slots
    RngState rng(21);
    for (int trial = 0; trial < 10; ++trial) {
      const int d_out = 3, d_in = 4, r = 3;
      SvdAdapter a = init_svd_adapter(d_out, d_in, r, rng, 0.8);
      for (auto& s : a.sigma) s = rng.next_gaussian();
      Tensor2D target = Tensor2D::randn(d_out, d_in, rng, 1.0);
      PlasticityMask mask = build_mask(a.sigma, 0.5);

      auto loss = [&](const Vec& sigma_probe) {
        SvdAdapter probe = a;
        probe.sigma = sigma_probe;
        Tensor2D dw = delta_weight(probe);
        double s = 0.0;
        for (std::size_t i = 0; i < dw.data.size(); ++i) {
          s += dw.data[i] * target.data[i];
        }
        return s;
      };
      Vec fd = finite_diff_grad(loss, a.sigma);
      Vec got = masked_sigma_grad(a.u, a.v, target, mask);
      for (int j = 0; j < r; ++j) {
        if (mask.is_kept(j)) {
          CHECK(got[j] == 0.0);
        } else {
          CHECK(std::fabs(got[j] - fd[j]) < 1e-6 * std::max(1.0, std::fabs(fd[j])));
        }
      }
    }
  }

  SUBCASE("shape mismatch rejected") {
    RngState rng(4);
    SvdAdapter a = init_svd_adapter(3, 3, 2, rng);
    Tensor2D g(2, 3);
    PlasticityMask mask = build_mask({1.0, 2.0}, 0.5);
    CHECK_THROWS_AS(masked_sigma_grad(a.u, a.v, g, mask), std::invalid_argument);
  }
}

TEST_CASE("masked_factor_grads") {
  RngState rng(31);

  SUBCASE("kept columns are exactly zero for any input") {
    SvdAdapter a = init_svd_adapter(4, 5, 3, rng, 0.5);
    a.sigma = {1.0, -2.0, 0.5};
    Tensor2D g = Tensor2D::randn(4, 5, rng, 1.0);
    PlasticityMask mask = build_mask(a.sigma, 0.34);  // keeps floor(0.66*3)=1
    auto [du, dv] = masked_factor_grads(a, g, mask);
    for (int j : mask.keep_indices) {
      for (int i = 0; i < du.rows; ++i) CHECK(du.at(i, j) == 0.0);
      for (int i = 0; i < dv.rows; ++i) CHECK(dv.at(i, j) == 0.0);
    }
  }

  SUBCASE("zero sigma on plastic slots zeroes their factor gradients") {
    SvdAdapter a = init_svd_adapter(4, 5, 3, rng, 0.5);
    a.sigma = {2.0, 0.0, 0.0};
    PlasticityMask mask = build_mask(a.sigma, 0.67);  // keeps 0 -> everything plastic
    Tensor2D g = Tensor2D::randn(4, 5, rng, 1.0);
    auto [du, dv] = masked_factor_grads(a, g, mask);
    for (int i = 0; i < du.rows; ++i) {
      CHECK(du.at(i, 1) == 0.0);
      CHECK(du.at(i, 2) == 0.0);
    }
    for (int i = 0; i < dv.rows; ++i) {
      CHECK(dv.at(i, 1) == 0.0);
      CHECK(dv.at(i, 2) == 0.0);
    }
  }

  SUBCASE("all-plastic rank-1 case matches the finite-difference oracle") {
    for (int trial = 0; trial < 10; ++trial) {
      SvdAdapter a = init_svd_adapter(3, 3, 1, rng, 0.7);
      a.sigma = {rng.next_gaussian()};
      Tensor2D target = Tensor2D::randn(3, 3, rng, 1.0);
      PlasticityMask mask = build_mask(a.sigma, 1.0);

      auto loss_u = [&](const Vec& u_flat) {
        SvdAdapter probe = a;
        probe.u.data = u_flat;
        Tensor2D dw = delta_weight(probe);
        double s = 0.0;
        for (std::size_t i = 0; i < dw.data.size(); ++i) {
          s += dw.data[i] * target.data[i];
        }
        return s;
      };
      auto loss_v = [&](const Vec& v_flat) {
        SvdAdapter probe = a;
        probe.v.data = v_flat;
        Tensor2D dw = delta_weight(probe);
        double s = 0.0;
        for (std::size_t i = 0; i < dw.data.size(); ++i) {
          s += dw.data[i] * target.data[i];
        }
        return s;
      };
      auto [du, dv] = masked_factor_grads(a, target, mask);
      Vec fd_u = finite_diff_grad(loss_u, a.u.data);
      Vec fd_v = finite_diff_grad(loss_v, a.v.data);
      CHECK(rel_error(du.data, fd_u) < 1e-6);
      CHECK(rel_error(dv.data, fd_v) < 1e-6);
    }
  }
}

TEST_CASE("retrieve_and_init") {
  RngState rng(55);
  auto make_entry = [&](int id, Vec emb) {
    SourceLibraryEntry e;
    e.task_id = id;
    e.task_embedding = std::move(emb);
    e.adapter_set.push_back(init_svd_adapter(3, 3, 2, rng));
    e.adapter_set.back().sigma = {static_cast<double>(id), 0.0};
    return e;
  };

  SUBCASE("single entry library returns that entry") {
    SourceLibrary lib;
    lib.entries.push_back(make_entry(7, {1.0, 0.0}));
    int picked = -1;
    auto got = retrieve_and_init(lib, {0.3, 0.9}, &picked);
    CHECK(picked == 7);
    CHECK(got.size() == 1);
  }

  SUBCASE("exact embedding match wins") {
    SourceLibrary lib;
    lib.entries.push_back(make_entry(0, {1.0, 0.0}));
    lib.entries.push_back(make_entry(1, {0.0, 1.0}));
    int picked = -1;
    retrieve_and_init(lib, {0.0, 2.0}, &picked);
    CHECK(picked == 1);
  }

  SUBCASE("three-entry cosine comparison") {
    SourceLibrary lib;
    const double s = 1.0 / std::sqrt(2.0);
    lib.entries.push_back(make_entry(1, {1.0, 0.0}));
    lib.entries.push_back(make_entry(2, {0.0, 1.0}));
    lib.entries.push_back(make_entry(3, {s, s}));
    int picked = -1;
    retrieve_and_init(lib, {0.9, 0.1}, &picked);
    CHECK(picked == 1);
  }

  SUBCASE("returned set is a deep copy") {
    SourceLibrary lib;
    lib.entries.push_back(make_entry(0, {1.0, 0.0}));
    auto got = retrieve_and_init(lib, {1.0, 0.0});
    got[0].sigma[0] = 999.0;
    CHECK(lib.entries[0].adapter_set[0].sigma[0] == 0.0);
  }

  SUBCASE("errors") {
    SourceLibrary empty;
    CHECK_THROWS_AS(retrieve_and_init(empty, {1.0, 0.0}),
                    std::invalid_argument);
    SourceLibrary lib;
    lib.entries.push_back(make_entry(0, {1.0, 0.0}));
    CHECK_THROWS_AS(retrieve_and_init(lib, {0.0, 0.0}), std::invalid_argument);
  }
}
