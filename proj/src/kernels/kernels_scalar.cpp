#include "gdhm/kernels.hpp"

#include <cmath>
#include <cstring>

namespace gdhm::kernels {
namespace {

void conv_h_valid_scalar(const double* src, int w, int h, const double* taps, int ntaps,
                         double* dst) {
  const int ow = w - ntaps + 1;
  for (int y = 0; y < h; ++y) {
    const double* row = src + static_cast<size_t>(y) * w;
    double* out = dst + static_cast<size_t>(y) * ow;
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int k = 0; k < ntaps; ++k) acc += taps[k] * row[x + k];
      out[x] = acc;
    }
  }
}

void conv_v_valid_scalar(const double* src, int w, int h, const double* taps, int ntaps,
                         double* dst) {
  const int oh = h - ntaps + 1;
  for (int y = 0; y < oh; ++y) {
    double* out = dst + static_cast<size_t>(y) * w;
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int k = 0; k < ntaps; ++k) acc += taps[k] * src[static_cast<size_t>(y + k) * w + x];
      out[x] = acc;
    }
  }
}

double reduce_abs_diff_scalar(const double* a, const double* b, int n) {
  double acc = 0.0;
  for (int i = 0; i < n; ++i) acc += std::abs(a[i] - b[i]);
  return acc;
}

double reduce_sq_diff_scalar(const double* a, const double* b, int n) {
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return acc;
}

void mul_ew_scalar(const double* a, const double* b, double* out, int n) {
  for (int i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

void l1_grad_acc_scalar(const double* a, const double* b, double coef, double* ga, int n) {
  for (int i = 0; i < n; ++i) {
    const double d = a[i] - b[i];
    ga[i] += d > 0.0 ? coef : (d < 0.0 ? -coef : 0.0);
  }
}

void adam_step_scalar(double* p, const double* g, double* m, double* v, int n, double lr,
                      double b1, double b2, double eps, double b1t, double b2t) {
  const double c1 = 1.0 / (1.0 - b1t);
  const double c2 = 1.0 / (1.0 - b2t);
  for (int i = 0; i < n; ++i) {
    m[i] = b1 * m[i] + (1.0 - b1) * g[i];
    v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
    p[i] -= lr * (m[i] * c1) / (std::sqrt(v[i] * c2) + eps);
  }
}

void composite_tile_fwd_scalar(const TileSplats& s, int x0, int y0, int tw, int th,
                               double stop_eps, double* T, double* accum) {
  const int npix = tw * th;
  for (int i = 0; i < s.count; ++i) {
    const double mx = s.mx[i], my = s.my[i];
    const double ca = s.ca[i], cb = s.cb[i], cc = s.cc[i];
    const double op = s.opacity[i];
    const double f0 = s.feat[0][i], f1 = s.feat[1][i], f2 = s.feat[2][i];
    const double f3 = s.feat[3][i], f4 = s.feat[4][i], f5 = s.feat[5][i];
    for (int p = 0; p < npix; ++p) {
      const double t = T[p];
      if (t < stop_eps) continue;
      const double dx = (x0 + p % tw) + 0.5 - mx;
      const double dy = (y0 + p / tw) + 0.5 - my;
      const double q = ca * dx * dx + 2.0 * cb * dx * dy + cc * dy * dy;
      const double w = op * std::exp(-0.5 * q);
      const double c = t * w;
      accum[0 * npix + p] += c * f0;
      accum[1 * npix + p] += c * f1;
      accum[2 * npix + p] += c * f2;
      accum[3 * npix + p] += c * f3;
      accum[4 * npix + p] += c * f4;
      accum[5 * npix + p] += c * f5;
      T[p] = t * (1.0 - w);
    }
  }
}

// Recompute-based adjoint. For each pixel the forward chain is replayed and
// (w_i, T_i) stored, then a back-to-front sweep maintains the normalized
// "behind" feature accumulator A so no divisions are needed.
void composite_tile_bwd_scalar(const TileSplats& s, int x0, int y0, int tw, int th,
                               double stop_eps, const double* d_out, const double* bg,
                               double* scratch, const TileSplatGrads& g) {
  const int npix = tw * th;
  const int n = s.count;
  double* wbuf = scratch;
  double* tbuf = scratch + n;
  for (int p = 0; p < npix; ++p) {
    const double px = (x0 + p % tw) + 0.5;
    const double py = (y0 + p / tw) + 0.5;
    double u[7];
    for (int c = 0; c < 7; ++c) u[c] = d_out[c * npix + p];

    double T = 1.0;
    int k = 0;
    for (int i = 0; i < n && T >= stop_eps; ++i) {
      const double dx = px - s.mx[i];
      const double dy = py - s.my[i];
      const double q = s.ca[i] * dx * dx + 2.0 * s.cb[i] * dx * dy + s.cc[i] * dy * dy;
      const double w = s.opacity[i] * std::exp(-0.5 * q);
      wbuf[k] = w;
      tbuf[k] = T;
      ++k;
      T *= (1.0 - w);
    }

    // A[c]: feature composited behind the current splat; alpha channel has
    // background 0.
    double A[7] = {bg[0], bg[1], bg[2], bg[3], bg[4], bg[5], 0.0};
    for (int j = k - 1; j >= 0; --j) {
      const double w = wbuf[j];
      const double Tj = tbuf[j];
      const double dx = px - s.mx[j];
      const double dy = py - s.my[j];

      double dLdw = u[6] * Tj * (1.0 - A[6]);
      const double twj = Tj * w;
      for (int c = 0; c < 6; ++c) {
        const double f = s.feat[c][j];
        dLdw += u[c] * Tj * (f - A[c]);
        g.feat[c][j] += u[c] * twj;
      }

      const double op = s.opacity[j];
      g.opacity[j] += dLdw * (w / op);
      const double dLdq = dLdw * (-0.5 * w);
      g.ca[j] += dLdq * dx * dx;
      g.cb[j] += dLdq * 2.0 * dx * dy;
      g.cc[j] += dLdq * dy * dy;
      const double qx = 2.0 * (s.ca[j] * dx + s.cb[j] * dy);
      const double qy = 2.0 * (s.cb[j] * dx + s.cc[j] * dy);
      g.mx[j] -= dLdq * qx;
      g.my[j] -= dLdq * qy;

      for (int c = 0; c < 6; ++c) A[c] = w * s.feat[c][j] + (1.0 - w) * A[c];
      A[6] = w * 1.0 + (1.0 - w) * A[6];
    }
  }
}

}  // namespace

const Table& scalar_table() {
  static const Table t = {
      "scalar",
      conv_h_valid_scalar,
      conv_v_valid_scalar,
      reduce_abs_diff_scalar,
      reduce_sq_diff_scalar,
      mul_ew_scalar,
      l1_grad_acc_scalar,
      adam_step_scalar,
      composite_tile_fwd_scalar,
      composite_tile_bwd_scalar,
  };
  return t;
}

}  // namespace gdhm::kernels
