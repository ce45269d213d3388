// Scalar/AVX2 kernel equivalence. The scalar table is the reference; every
// other table must reproduce it within tight tolerances on random inputs.

#include <doctest.h>

#include <cmath>
#include <vector>

#include "gdhm/common.hpp"
#include "gdhm/kernels.hpp"

using namespace gdhm;
namespace k = gdhm::kernels;

namespace {

std::vector<double> random_vec(Rng& rng, int n, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(lo, hi);
  return v;
}

double rel_diff(double a, double b) {
  const double d = std::abs(a - b);
  const double m = std::max({std::abs(a), std::abs(b), 1e-12});
  return d / m;
}

// FMA contraction makes near-zero outputs differ by absolute rounding noise;
// compare with an absolute floor plus a relative bound.
bool close(double a, double b, double tol_rel, double tol_abs) {
  return std::abs(a - b) <= tol_abs + tol_rel * std::max(std::abs(a), std::abs(b));
}

struct SplatData {
  int count;
  std::vector<double> mx, my, ca, cb, cc, op;
  std::vector<double> feat[6];

  k::TileSplats view() const {
    k::TileSplats s;
    s.count = count;
    s.mx = mx.data();
    s.my = my.data();
    s.ca = ca.data();
    s.cb = cb.data();
    s.cc = cc.data();
    s.opacity = op.data();
    for (int c = 0; c < 6; ++c) s.feat[c] = feat[c].data();
    return s;
  }
};

SplatData random_splats(Rng& rng, int count, double x0, double y0, double tw, double th) {
  SplatData d;
  d.count = count;
  for (int i = 0; i < count; ++i) {
    d.mx.push_back(rng.uniform(x0 - 4, x0 + tw + 4));
    d.my.push_back(rng.uniform(y0 - 4, y0 + th + 4));
    // random SPD conic
    const double l1 = rng.uniform(0.02, 0.8), l2 = rng.uniform(0.02, 0.8);
    const double t = rng.uniform(0, 2 * M_PI);
    const double ct = std::cos(t), st = std::sin(t);
    d.ca.push_back(ct * ct * l1 + st * st * l2);
    d.cb.push_back(ct * st * (l1 - l2));
    d.cc.push_back(st * st * l1 + ct * ct * l2);
    d.op.push_back(rng.uniform(0.05, 0.98));
  }
  for (int c = 0; c < 6; ++c) d.feat[c] = random_vec(rng, count, c < 3 ? 0.0 : -1.0, 1.0);
  return d;
}

}  // namespace

TEST_CASE("avx2 kernels match scalar reference") {
  if (!k::avx2_available()) {
    MESSAGE("AVX2 not available; skipping equivalence tests");
    return;
  }
  const k::Table& ref = k::scalar_table();
  const k::Table& opt = k::avx2_table();
  Rng rng(20240811);

  SUBCASE("reductions and elementwise") {
    for (int trial = 0; trial < 20; ++trial) {
      const int n = 1 + static_cast<int>(rng.uniform_index(600));
      auto a = random_vec(rng, n, -2, 2);
      auto b = random_vec(rng, n, -2, 2);
      CHECK(rel_diff(ref.reduce_abs_diff(a.data(), b.data(), n),
                     opt.reduce_abs_diff(a.data(), b.data(), n)) < 1e-13);
      CHECK(rel_diff(ref.reduce_sq_diff(a.data(), b.data(), n),
                     opt.reduce_sq_diff(a.data(), b.data(), n)) < 1e-13);

      std::vector<double> o1(n), o2(n);
      ref.mul_ew(a.data(), b.data(), o1.data(), n);
      opt.mul_ew(a.data(), b.data(), o2.data(), n);
      for (int i = 0; i < n; ++i) CHECK(o1[i] == o2[i]);

      auto g1 = random_vec(rng, n);
      auto g2 = g1;
      ref.l1_grad_acc(a.data(), b.data(), 0.7, g1.data(), n);
      opt.l1_grad_acc(a.data(), b.data(), 0.7, g2.data(), n);
      for (int i = 0; i < n; ++i) CHECK(g1[i] == g2[i]);
    }
  }

  SUBCASE("separable convolution") {
    const double taps[11] = {0.01, 0.03, 0.07, 0.12, 0.17, 0.2, 0.17, 0.12, 0.07, 0.03, 0.01};
    for (int trial = 0; trial < 8; ++trial) {
      const int w = 11 + static_cast<int>(rng.uniform_index(60));
      const int h = 11 + static_cast<int>(rng.uniform_index(60));
      auto src = random_vec(rng, w * h);
      std::vector<double> d1((w - 10) * h), d2((w - 10) * h);
      ref.conv_h_valid(src.data(), w, h, taps, 11, d1.data());
      opt.conv_h_valid(src.data(), w, h, taps, 11, d2.data());
      for (size_t i = 0; i < d1.size(); ++i) CHECK(close(d1[i], d2[i], 1e-13, 1e-12));

      std::vector<double> v1(w * (h - 10)), v2(w * (h - 10));
      ref.conv_v_valid(src.data(), w, h, taps, 11, v1.data());
      opt.conv_v_valid(src.data(), w, h, taps, 11, v2.data());
      for (size_t i = 0; i < v1.size(); ++i) CHECK(close(v1[i], v2[i], 1e-13, 1e-12));
    }
  }

  SUBCASE("adam step") {
    for (int trial = 0; trial < 10; ++trial) {
      const int n = 1 + static_cast<int>(rng.uniform_index(300));
      auto p1 = random_vec(rng, n);
      auto g = random_vec(rng, n);
      auto m1 = random_vec(rng, n, -0.1, 0.1);
      auto v1 = random_vec(rng, n, 0.0, 0.1);
      auto p2 = p1, m2 = m1, v2 = v1;
      ref.adam_step(p1.data(), g.data(), m1.data(), v1.data(), n, 1e-3, 0.9, 0.999, 1e-15,
                    0.9, 0.999);
      opt.adam_step(p2.data(), g.data(), m2.data(), v2.data(), n, 1e-3, 0.9, 0.999, 1e-15,
                    0.9, 0.999);
      for (int i = 0; i < n; ++i) {
        CHECK(close(p1[i], p2[i], 1e-13, 1e-15));
        CHECK(close(m1[i], m2[i], 1e-13, 1e-15));
        CHECK(close(v1[i], v2[i], 1e-13, 1e-15));
      }
    }
  }

  SUBCASE("compositing forward") {
    for (int trial = 0; trial < 12; ++trial) {
      const int tw = 1 + static_cast<int>(rng.uniform_index(16));
      const int th = 1 + static_cast<int>(rng.uniform_index(16));
      const int x0 = static_cast<int>(rng.uniform_index(40));
      const int y0 = static_cast<int>(rng.uniform_index(40));
      auto splats = random_splats(rng, 1 + static_cast<int>(rng.uniform_index(80)), x0, y0,
                                  tw, th);
      const int npix = tw * th;
      std::vector<double> T1(npix, 1.0), T2(npix, 1.0);
      std::vector<double> a1(6 * npix, 0.0), a2(6 * npix, 0.0);
      ref.composite_tile_fwd(splats.view(), x0, y0, tw, th, 1e-4, T1.data(), a1.data());
      opt.composite_tile_fwd(splats.view(), x0, y0, tw, th, 1e-4, T2.data(), a2.data());
      for (int i = 0; i < npix; ++i) CHECK(close(T1[i], T2[i], 1e-12, 1e-14));
      for (size_t i = 0; i < a1.size(); ++i) CHECK(close(a1[i], a2[i], 1e-12, 1e-14));
    }
  }

  SUBCASE("compositing backward") {
    for (int trial = 0; trial < 12; ++trial) {
      const int tw = 1 + static_cast<int>(rng.uniform_index(16));
      const int th = 1 + static_cast<int>(rng.uniform_index(16));
      const int x0 = static_cast<int>(rng.uniform_index(40));
      const int y0 = static_cast<int>(rng.uniform_index(40));
      const int count = 1 + static_cast<int>(rng.uniform_index(60));
      auto splats = random_splats(rng, count, x0, y0, tw, th);
      const int npix = tw * th;
      auto d_out = random_vec(rng, 7 * npix);
      const double bg[6] = {0.2, 0.3, 0.4, 0.0, 0.0, 0.0};
      std::vector<double> scratch(8 * count);

      auto run = [&](const k::Table& t) {
        std::vector<std::vector<double>> g(12, std::vector<double>(count, 0.0));
        k::TileSplatGrads gr;
        gr.mx = g[0].data();
        gr.my = g[1].data();
        gr.ca = g[2].data();
        gr.cb = g[3].data();
        gr.cc = g[4].data();
        gr.opacity = g[5].data();
        for (int c = 0; c < 6; ++c) gr.feat[c] = g[6 + c].data();
        t.composite_tile_bwd(splats.view(), x0, y0, tw, th, 1e-4, d_out.data(), bg,
                             scratch.data(), gr);
        return g;
      };
      auto g1 = run(ref);
      auto g2 = run(opt);
      for (int b = 0; b < 12; ++b)
        for (int i = 0; i < count; ++i) CHECK(close(g1[b][i], g2[b][i], 5e-11, 1e-12));
    }
  }
}

TEST_CASE("composite backward matches finite differences of forward") {
  // Direct check at the kernel level; the full renderer FD suite covers the
  // chained version.
  const k::Table& t = k::scalar_table();
  Rng rng(7);
  const int tw = 6, th = 5, x0 = 3, y0 = 2, npix = tw * th;
  auto splats = random_splats(rng, 8, x0, y0, tw, th);
  auto upstream = random_vec(rng, 7 * npix);
  const double bg[6] = {0.1, 0.2, 0.3, 0.0, 0.0, 0.5};

  auto loss = [&](const SplatData& d) {
    std::vector<double> T(npix, 1.0), a(6 * npix, 0.0);
    t.composite_tile_fwd(d.view(), x0, y0, tw, th, 1e-4, T.data(), a.data());
    double L = 0;
    for (int c = 0; c < 6; ++c)
      for (int p = 0; p < npix; ++p)
        L += upstream[c * npix + p] * (a[c * npix + p] + T[p] * bg[c]);
    for (int p = 0; p < npix; ++p) L += upstream[6 * npix + p] * (1.0 - T[p]);
    return L;
  };

  std::vector<std::vector<double>> g(12, std::vector<double>(splats.count, 0.0));
  k::TileSplatGrads gr;
  gr.mx = g[0].data();
  gr.my = g[1].data();
  gr.ca = g[2].data();
  gr.cb = g[3].data();
  gr.cc = g[4].data();
  gr.opacity = g[5].data();
  for (int c = 0; c < 6; ++c) gr.feat[c] = g[6 + c].data();
  std::vector<double> scratch(8 * splats.count);
  t.composite_tile_bwd(splats.view(), x0, y0, tw, th, 1e-4, upstream.data(), bg,
                       scratch.data(), gr);

  auto fd_check = [&](std::vector<double>& field, const std::vector<double>& grad) {
    const double h = 1e-6;
    for (int i = 0; i < splats.count; ++i) {
      const double saved = field[i];
      field[i] = saved + h;
      const double lp = loss(splats);
      field[i] = saved - h;
      const double lm = loss(splats);
      field[i] = saved;
      const double fd = (lp - lm) / (2 * h);
      CHECK(rel_diff(fd, grad[i]) < 1e-5);
    }
  };
  fd_check(splats.mx, g[0]);
  fd_check(splats.my, g[1]);
  fd_check(splats.ca, g[2]);
  fd_check(splats.cb, g[3]);
  fd_check(splats.cc, g[4]);
  fd_check(splats.op, g[5]);
  for (int c = 0; c < 6; ++c) fd_check(splats.feat[c], g[6 + c]);
}
