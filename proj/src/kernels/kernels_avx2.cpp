// AVX2+FMA variants of the compute kernels. Compiled only when the compiler
// supports -mavx2 -mfma (see src/CMakeLists.txt); selected at runtime after a
// cpuid check. Must agree with the scalar reference table within the
// tolerances asserted in tests/test_kernels.cpp.

#include "gdhm/kernels.hpp"

#ifdef GDHM_HAVE_AVX2

#include <immintrin.h>

#include <cmath>

namespace gdhm::kernels {
namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(lo, _mm_unpackhi_pd(lo, lo)));
}

// Cephes-style expd: range reduction by ln2 split into hi/lo parts, then a
// Pade approximant on the reduced argument. Inputs are clamped to +-700,
// which covers every weight this renderer can produce.
inline __m256d exp_pd(__m256d x) {
  x = _mm256_max_pd(x, _mm256_set1_pd(-700.0));
  x = _mm256_min_pd(x, _mm256_set1_pd(700.0));
  const __m256d log2e = _mm256_set1_pd(1.4426950408889634073599);
  const __m256d px = _mm256_floor_pd(_mm256_fmadd_pd(log2e, x, _mm256_set1_pd(0.5)));
  const __m128i n32 = _mm256_cvttpd_epi32(px);
  x = _mm256_fnmadd_pd(px, _mm256_set1_pd(6.93145751953125e-1), x);
  x = _mm256_fnmadd_pd(px, _mm256_set1_pd(1.42860682030941723212e-6), x);
  const __m256d xx = _mm256_mul_pd(x, x);
  __m256d p = _mm256_set1_pd(1.26177193074810590878e-4);
  p = _mm256_fmadd_pd(p, xx, _mm256_set1_pd(3.02994407707441961300e-2));
  p = _mm256_fmadd_pd(p, xx, _mm256_set1_pd(9.99999999999999999910e-1));
  const __m256d xp = _mm256_mul_pd(x, p);
  __m256d q = _mm256_set1_pd(3.00198505138664455042e-6);
  q = _mm256_fmadd_pd(q, xx, _mm256_set1_pd(2.52448340349684104192e-3));
  q = _mm256_fmadd_pd(q, xx, _mm256_set1_pd(2.27265548208155028766e-1));
  q = _mm256_fmadd_pd(q, xx, _mm256_set1_pd(2.0));
  __m256d e = _mm256_div_pd(xp, _mm256_sub_pd(q, xp));
  e = _mm256_fmadd_pd(_mm256_set1_pd(2.0), e, _mm256_set1_pd(1.0));
  __m256i n64 = _mm256_cvtepi32_epi64(n32);
  n64 = _mm256_slli_epi64(_mm256_add_epi64(n64, _mm256_set1_epi64x(1023)), 52);
  return _mm256_mul_pd(e, _mm256_castsi256_pd(n64));
}

void conv_h_valid_avx2(const double* src, int w, int h, const double* taps, int ntaps,
                       double* dst) {
  const int ow = w - ntaps + 1;
  for (int y = 0; y < h; ++y) {
    const double* row = src + static_cast<size_t>(y) * w;
    double* out = dst + static_cast<size_t>(y) * ow;
    int x = 0;
    for (; x + 4 <= ow; x += 4) {
      __m256d acc = _mm256_setzero_pd();
      for (int k = 0; k < ntaps; ++k)
        acc = _mm256_fmadd_pd(_mm256_set1_pd(taps[k]), _mm256_loadu_pd(row + x + k), acc);
      _mm256_storeu_pd(out + x, acc);
    }
    for (; x < ow; ++x) {
      double acc = 0.0;
      for (int k = 0; k < ntaps; ++k) acc += taps[k] * row[x + k];
      out[x] = acc;
    }
  }
}

void conv_v_valid_avx2(const double* src, int w, int h, const double* taps, int ntaps,
                       double* dst) {
  const int oh = h - ntaps + 1;
  for (int y = 0; y < oh; ++y) {
    double* out = dst + static_cast<size_t>(y) * w;
    int x = 0;
    for (; x + 4 <= w; x += 4) {
      __m256d acc = _mm256_setzero_pd();
      for (int k = 0; k < ntaps; ++k)
        acc = _mm256_fmadd_pd(_mm256_set1_pd(taps[k]),
                              _mm256_loadu_pd(src + static_cast<size_t>(y + k) * w + x), acc);
      _mm256_storeu_pd(out + x, acc);
    }
    for (; x < w; ++x) {
      double acc = 0.0;
      for (int k = 0; k < ntaps; ++k) acc += taps[k] * src[static_cast<size_t>(y + k) * w + x];
      out[x] = acc;
    }
  }
}

double reduce_abs_diff_avx2(const double* a, const double* b, int n) {
  const __m256d absmask = _mm256_castsi256_pd(_mm256_set1_epi64x(0x7fffffffffffffffll));
  __m256d acc = _mm256_setzero_pd();
  int i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
    acc = _mm256_add_pd(acc, _mm256_and_pd(d, absmask));
  }
  double s = hsum(acc);
  for (; i < n; ++i) s += std::abs(a[i] - b[i]);
  return s;
}

double reduce_sq_diff_avx2(const double* a, const double* b, int n) {
  __m256d acc = _mm256_setzero_pd();
  int i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
    acc = _mm256_fmadd_pd(d, d, acc);
  }
  double s = hsum(acc);
  for (; i < n; ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

void mul_ew_avx2(const double* a, const double* b, double* out, int n) {
  int i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  for (; i < n; ++i) out[i] = a[i] * b[i];
}

void l1_grad_acc_avx2(const double* a, const double* b, double coef, double* ga, int n) {
  const __m256d zero = _mm256_setzero_pd();
  const __m256d pc = _mm256_set1_pd(coef);
  const __m256d nc = _mm256_set1_pd(-coef);
  int i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
    const __m256d pos = _mm256_and_pd(_mm256_cmp_pd(d, zero, _CMP_GT_OQ), pc);
    const __m256d neg = _mm256_and_pd(_mm256_cmp_pd(d, zero, _CMP_LT_OQ), nc);
    _mm256_storeu_pd(ga + i,
                     _mm256_add_pd(_mm256_loadu_pd(ga + i), _mm256_add_pd(pos, neg)));
  }
  for (; i < n; ++i) {
    const double d = a[i] - b[i];
    ga[i] += d > 0.0 ? coef : (d < 0.0 ? -coef : 0.0);
  }
}

void adam_step_avx2(double* p, const double* g, double* m, double* v, int n, double lr,
                    double b1, double b2, double eps, double b1t, double b2t) {
  const double c1s = 1.0 / (1.0 - b1t);
  const double c2s = 1.0 / (1.0 - b2t);
  const __m256d vb1 = _mm256_set1_pd(b1), vb2 = _mm256_set1_pd(b2);
  const __m256d v1mb1 = _mm256_set1_pd(1.0 - b1), v1mb2 = _mm256_set1_pd(1.0 - b2);
  const __m256d vc1 = _mm256_set1_pd(c1s), vc2 = _mm256_set1_pd(c2s);
  const __m256d vlr = _mm256_set1_pd(lr), veps = _mm256_set1_pd(eps);
  int i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d gi = _mm256_loadu_pd(g + i);
    __m256d mi = _mm256_fmadd_pd(vb1, _mm256_loadu_pd(m + i), _mm256_mul_pd(v1mb1, gi));
    __m256d vi = _mm256_fmadd_pd(vb2, _mm256_loadu_pd(v + i),
                                 _mm256_mul_pd(v1mb2, _mm256_mul_pd(gi, gi)));
    _mm256_storeu_pd(m + i, mi);
    _mm256_storeu_pd(v + i, vi);
    const __m256d den = _mm256_add_pd(_mm256_sqrt_pd(_mm256_mul_pd(vi, vc2)), veps);
    const __m256d step = _mm256_div_pd(_mm256_mul_pd(vlr, _mm256_mul_pd(mi, vc1)), den);
    _mm256_storeu_pd(p + i, _mm256_sub_pd(_mm256_loadu_pd(p + i), step));
  }
  for (; i < n; ++i) {
    m[i] = b1 * m[i] + (1.0 - b1) * g[i];
    v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
    p[i] -= lr * (m[i] * c1s) / (std::sqrt(v[i] * c2s) + eps);
  }
}

// Scalar fallbacks for tail pixels of the compositing kernels.
void composite_fwd_pixels(const TileSplats& s, const double* px, const double* py, int npix,
                          int nstride, int pbase, double stop_eps, double* T, double* accum) {
  for (int i = 0; i < s.count; ++i) {
    for (int p = 0; p < npix; ++p) {
      const double t = T[pbase + p];
      if (t < stop_eps) continue;
      const double dx = px[p] - s.mx[i];
      const double dy = py[p] - s.my[i];
      const double q = s.ca[i] * dx * dx + 2.0 * s.cb[i] * dx * dy + s.cc[i] * dy * dy;
      const double w = s.opacity[i] * std::exp(-0.5 * q);
      const double c = t * w;
      for (int f = 0; f < 6; ++f) accum[f * nstride + pbase + p] += c * s.feat[f][i];
      T[pbase + p] = t * (1.0 - w);
    }
  }
}

void composite_tile_fwd_avx2(const TileSplats& s, int x0, int y0, int tw, int th,
                             double stop_eps, double* T, double* accum) {
  const int npix = tw * th;
  double px[256], py[256];
  for (int p = 0; p < npix; ++p) {
    px[p] = (x0 + p % tw) + 0.5;
    py[p] = (y0 + p / tw) + 0.5;
  }
  const int nvec = npix & ~3;
  const __m256d eps = _mm256_set1_pd(stop_eps);
  const __m256d one = _mm256_set1_pd(1.0);
  for (int i = 0; i < s.count; ++i) {
    const __m256d mx = _mm256_set1_pd(s.mx[i]), my = _mm256_set1_pd(s.my[i]);
    const __m256d ca = _mm256_set1_pd(s.ca[i]), cb = _mm256_set1_pd(s.cb[i]),
                  cc = _mm256_set1_pd(s.cc[i]);
    const __m256d op = _mm256_set1_pd(s.opacity[i]);
    for (int p = 0; p < nvec; p += 4) {
      const __m256d t = _mm256_loadu_pd(T + p);
      const __m256d live = _mm256_cmp_pd(t, eps, _CMP_GE_OQ);
      if (!_mm256_movemask_pd(live)) continue;
      const __m256d dx = _mm256_sub_pd(_mm256_loadu_pd(px + p), mx);
      const __m256d dy = _mm256_sub_pd(_mm256_loadu_pd(py + p), my);
      __m256d q = _mm256_mul_pd(_mm256_mul_pd(ca, dx), dx);
      q = _mm256_fmadd_pd(_mm256_mul_pd(_mm256_add_pd(cb, cb), dx), dy, q);
      q = _mm256_fmadd_pd(_mm256_mul_pd(cc, dy), dy, q);
      const __m256d w0 = _mm256_mul_pd(op, exp_pd(_mm256_mul_pd(q, _mm256_set1_pd(-0.5))));
      const __m256d w = _mm256_and_pd(w0, live);  // dead lanes contribute 0
      const __m256d c = _mm256_mul_pd(t, w);
      for (int f = 0; f < 6; ++f) {
        double* ap = accum + f * npix + p;
        _mm256_storeu_pd(ap, _mm256_fmadd_pd(c, _mm256_set1_pd(s.feat[f][i]),
                                             _mm256_loadu_pd(ap)));
      }
      _mm256_storeu_pd(T + p, _mm256_mul_pd(t, _mm256_sub_pd(one, w)));
    }
  }
  if (npix > nvec)
    composite_fwd_pixels(s, px + nvec, py + nvec, npix - nvec, npix, nvec, stop_eps, T, accum);
}

void composite_bwd_pixels(const TileSplats& s, const double* px, const double* py, int npix,
                          int nstride, int pbase, double stop_eps, const double* d_out,
                          const double* bg, double* scratch, const TileSplatGrads& g) {
  const int n = s.count;
  double* wbuf = scratch;
  double* tbuf = scratch + n;
  for (int p = 0; p < npix; ++p) {
    double u[7];
    for (int c = 0; c < 7; ++c) u[c] = d_out[c * nstride + pbase + p];
    double T = 1.0;
    int k = 0;
    for (int i = 0; i < n && T >= stop_eps; ++i) {
      const double dx = px[p] - s.mx[i];
      const double dy = py[p] - s.my[i];
      const double q = s.ca[i] * dx * dx + 2.0 * s.cb[i] * dx * dy + s.cc[i] * dy * dy;
      const double w = s.opacity[i] * std::exp(-0.5 * q);
      wbuf[k] = w;
      tbuf[k] = T;
      ++k;
      T *= (1.0 - w);
    }
    double A[7] = {bg[0], bg[1], bg[2], bg[3], bg[4], bg[5], 0.0};
    for (int j = k - 1; j >= 0; --j) {
      const double w = wbuf[j];
      const double Tj = tbuf[j];
      const double dx = px[p] - s.mx[j];
      const double dy = py[p] - s.my[j];
      double dLdw = u[6] * Tj * (1.0 - A[6]);
      const double twj = Tj * w;
      for (int c = 0; c < 6; ++c) {
        const double f = s.feat[c][j];
        dLdw += u[c] * Tj * (f - A[c]);
        g.feat[c][j] += u[c] * twj;
      }
      g.opacity[j] += dLdw * (w / s.opacity[j]);
      const double dLdq = dLdw * (-0.5 * w);
      g.ca[j] += dLdq * dx * dx;
      g.cb[j] += dLdq * 2.0 * dx * dy;
      g.cc[j] += dLdq * dy * dy;
      g.mx[j] -= dLdq * 2.0 * (s.ca[j] * dx + s.cb[j] * dy);
      g.my[j] -= dLdq * 2.0 * (s.cb[j] * dx + s.cc[j] * dy);
      for (int c = 0; c < 6; ++c) A[c] = w * s.feat[c][j] + (1.0 - w) * A[c];
      A[6] = w + (1.0 - w) * A[6];
    }
  }
}

void composite_tile_bwd_avx2(const TileSplats& s, int x0, int y0, int tw, int th,
                             double stop_eps, const double* d_out, const double* bg,
                             double* scratch, const TileSplatGrads& g) {
  const int npix = tw * th;
  const int n = s.count;
  double px[256], py[256];
  for (int p = 0; p < npix; ++p) {
    px[p] = (x0 + p % tw) + 0.5;
    py[p] = (y0 + p / tw) + 0.5;
  }
  const int nvec = npix & ~3;
  const __m256d eps = _mm256_set1_pd(stop_eps);
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d half_neg = _mm256_set1_pd(-0.5);
  // scratch: w and T, 4 lanes per splat
  double* wbuf = scratch;
  double* tbuf = scratch + 4 * n;

  for (int p = 0; p < nvec; p += 4) {
    __m256d u[7];
    for (int c = 0; c < 7; ++c) u[c] = _mm256_loadu_pd(d_out + c * npix + p);
    const __m256d vpx = _mm256_loadu_pd(px + p);
    const __m256d vpy = _mm256_loadu_pd(py + p);

    // forward replay; dead lanes store w = 0, T = 0 so the sweep ignores them
    __m256d T = one;
    for (int i = 0; i < n; ++i) {
      const __m256d live = _mm256_cmp_pd(T, eps, _CMP_GE_OQ);
      if (!_mm256_movemask_pd(live)) {
        for (int j = i; j < n; ++j) {
          _mm256_storeu_pd(wbuf + 4 * j, _mm256_setzero_pd());
          _mm256_storeu_pd(tbuf + 4 * j, _mm256_setzero_pd());
        }
        break;
      }
      const __m256d dx = _mm256_sub_pd(vpx, _mm256_set1_pd(s.mx[i]));
      const __m256d dy = _mm256_sub_pd(vpy, _mm256_set1_pd(s.my[i]));
      const __m256d ca = _mm256_set1_pd(s.ca[i]), cb = _mm256_set1_pd(s.cb[i]),
                    cc = _mm256_set1_pd(s.cc[i]);
      __m256d q = _mm256_mul_pd(_mm256_mul_pd(ca, dx), dx);
      q = _mm256_fmadd_pd(_mm256_mul_pd(_mm256_add_pd(cb, cb), dx), dy, q);
      q = _mm256_fmadd_pd(_mm256_mul_pd(cc, dy), dy, q);
      const __m256d w0 = _mm256_mul_pd(_mm256_set1_pd(s.opacity[i]),
                                       exp_pd(_mm256_mul_pd(q, half_neg)));
      const __m256d w = _mm256_and_pd(w0, live);
      _mm256_storeu_pd(wbuf + 4 * i, w);
      _mm256_storeu_pd(tbuf + 4 * i, _mm256_and_pd(T, live));
      T = _mm256_mul_pd(T, _mm256_sub_pd(one, w));
    }

    __m256d A[7];
    for (int c = 0; c < 6; ++c) A[c] = _mm256_set1_pd(bg[c]);
    A[6] = _mm256_setzero_pd();
    for (int j = n - 1; j >= 0; --j) {
      const __m256d w = _mm256_loadu_pd(wbuf + 4 * j);
      const __m256d Tj = _mm256_loadu_pd(tbuf + 4 * j);
      const __m256d dx = _mm256_sub_pd(vpx, _mm256_set1_pd(s.mx[j]));
      const __m256d dy = _mm256_sub_pd(vpy, _mm256_set1_pd(s.my[j]));
      __m256d dLdw = _mm256_mul_pd(u[6], _mm256_mul_pd(Tj, _mm256_sub_pd(one, A[6])));
      const __m256d twj = _mm256_mul_pd(Tj, w);
      for (int c = 0; c < 6; ++c) {
        const __m256d f = _mm256_set1_pd(s.feat[c][j]);
        dLdw = _mm256_fmadd_pd(u[c], _mm256_mul_pd(Tj, _mm256_sub_pd(f, A[c])), dLdw);
        g.feat[c][j] += hsum(_mm256_mul_pd(u[c], twj));
      }
      g.opacity[j] += hsum(_mm256_mul_pd(dLdw, w)) / s.opacity[j];
      const __m256d dLdq = _mm256_mul_pd(dLdw, _mm256_mul_pd(half_neg, w));
      g.ca[j] += hsum(_mm256_mul_pd(dLdq, _mm256_mul_pd(dx, dx)));
      g.cb[j] += hsum(_mm256_mul_pd(dLdq, _mm256_mul_pd(_mm256_add_pd(dx, dx), dy)));
      g.cc[j] += hsum(_mm256_mul_pd(dLdq, _mm256_mul_pd(dy, dy)));
      const __m256d ca = _mm256_set1_pd(s.ca[j]), cb = _mm256_set1_pd(s.cb[j]),
                    cc = _mm256_set1_pd(s.cc[j]);
      const __m256d qx = _mm256_fmadd_pd(ca, dx, _mm256_mul_pd(cb, dy));
      const __m256d qy = _mm256_fmadd_pd(cb, dx, _mm256_mul_pd(cc, dy));
      g.mx[j] -= 2.0 * hsum(_mm256_mul_pd(dLdq, qx));
      g.my[j] -= 2.0 * hsum(_mm256_mul_pd(dLdq, qy));
      for (int c = 0; c < 6; ++c) {
        const __m256d f = _mm256_set1_pd(s.feat[c][j]);
        A[c] = _mm256_fmadd_pd(w, f, _mm256_fnmadd_pd(w, A[c], A[c]));
      }
      A[6] = _mm256_add_pd(w, _mm256_fnmadd_pd(w, A[6], A[6]));
    }
  }
  if (npix > nvec)
    composite_bwd_pixels(s, px + nvec, py + nvec, npix - nvec, npix, nvec, stop_eps, d_out,
                         bg, scratch, g);
}

}  // namespace

const Table& avx2_table() {
  static const Table t = {
      "avx2",
      conv_h_valid_avx2,
      conv_v_valid_avx2,
      reduce_abs_diff_avx2,
      reduce_sq_diff_avx2,
      mul_ew_avx2,
      l1_grad_acc_avx2,
      adam_step_avx2,
      composite_tile_fwd_avx2,
      composite_tile_bwd_avx2,
  };
  return t;
}

}  // namespace gdhm::kernels

#else  // !GDHM_HAVE_AVX2

namespace gdhm::kernels {
const Table& avx2_table() { return scalar_table(); }
}  // namespace gdhm::kernels

#endif
