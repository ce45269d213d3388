#include "gdhm/losses.hpp"

#include "gdhm/kernels.hpp"

namespace gdhm {

namespace {

void check_same_shape(const Image& a, const Image& b, const char* what) {
  if (!a.same_shape(b)) throw data_error(std::string(what) + ": resolution mismatch");
}

constexpr int kTaps = 11;

const double* gaussian_taps() {
  static const std::vector<double> taps = [] {
    std::vector<double> t(kTaps);
    const double sigma = 1.5;
    double sum = 0;
    for (int i = 0; i < kTaps; ++i) {
      const double x = i - (kTaps - 1) / 2;
      t[i] = std::exp(-0.5 * x * x / (sigma * sigma));
      sum += t[i];
    }
    for (auto& v : t) v /= sum;
    return t;
  }();
  return taps.data();
}

// valid-mode separable blur: (w,h) -> (w-10, h-10)
std::vector<double> blur_valid(const double* src, int w, int h) {
  const kernels::Table& K = kernels::active_table();
  std::vector<double> tmp(static_cast<size_t>(w - kTaps + 1) * h);
  K.conv_h_valid(src, w, h, gaussian_taps(), kTaps, tmp.data());
  std::vector<double> out(static_cast<size_t>(w - kTaps + 1) * (h - kTaps + 1));
  K.conv_v_valid(tmp.data(), w - kTaps + 1, h, gaussian_taps(), kTaps, out.data());
  return out;
}

// adjoint of blur_valid: (w-10, h-10) -> (w, h). The kernel is symmetric, so
// the adjoint is the same valid blur applied to the zero-padded gradient.
std::vector<double> blur_adjoint(const double* g, int ow, int oh) {
  const int pw = ow + 2 * (kTaps - 1), ph = oh + 2 * (kTaps - 1);
  std::vector<double> pad(static_cast<size_t>(pw) * ph, 0.0);
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x)
      pad[static_cast<size_t>(y + kTaps - 1) * pw + (x + kTaps - 1)] = g[y * ow + x];
  return blur_valid(pad.data(), pw, ph);
}

}  // namespace

double l1_loss(const Image& a, const Image& b) {
  check_same_shape(a, b, "l1_loss");
  const double sum = kernels::active_table().reduce_abs_diff(
      a.data.data(), b.data.data(), static_cast<int>(a.size()));
  return sum / static_cast<double>(a.size());
}

void l1_loss_backward(const Image& a, const Image& b, double coef, Image& d_a) {
  kernels::active_table().l1_grad_acc(a.data.data(), b.data.data(),
                                      coef / static_cast<double>(a.size()), d_a.data.data(),
                                      static_cast<int>(a.size()));
}

double normal_loss(const Image& nhat, const Image& n, const Image& alpha, double lambda_n) {
  check_same_shape(nhat, n, "normal_loss");
  if (alpha.h != nhat.h || alpha.w != nhat.w || alpha.c != 1)
    throw data_error("normal_loss: mask resolution mismatch");
  const kernels::Table& K = kernels::active_table();
  const int np = nhat.pixels();
  std::vector<double> masked(np);
  double sum = 0;
  for (int c = 0; c < 3; ++c) {
    K.mul_ew(n.plane(c), alpha.plane(0), masked.data(), np);
    sum += K.reduce_abs_diff(nhat.plane(c), masked.data(), np);
  }
  return lambda_n * sum / np;
}

void normal_loss_backward(const Image& nhat, const Image& n, const Image& alpha,
                          double lambda_n, Image& d_nhat) {
  const kernels::Table& K = kernels::active_table();
  const int np = nhat.pixels();
  std::vector<double> masked(np);
  for (int c = 0; c < 3; ++c) {
    K.mul_ew(n.plane(c), alpha.plane(0), masked.data(), np);
    K.l1_grad_acc(nhat.plane(c), masked.data(), lambda_n / np, d_nhat.plane(c), np);
  }
}

double ssim(const Image& a, const Image& b, SsimCache* cache) {
  check_same_shape(a, b, "ssim");
  if (a.w < kTaps || a.h < kTaps) throw data_error("ssim: image smaller than the window");
  const int ow = a.w - kTaps + 1, oh = a.h - kTaps + 1;
  SsimCache local;
  SsimCache& cc = cache ? *cache : local;
  cc.w = a.w;
  cc.h = a.h;
  cc.c = a.c;
  cc.ow = ow;
  cc.oh = oh;
  cc.mu_a.resize(a.c);
  cc.mu_b.resize(a.c);
  cc.m_aa.resize(a.c);
  cc.m_bb.resize(a.c);
  cc.m_ab.resize(a.c);

  const double C1 = 0.01 * 0.01, C2 = 0.03 * 0.03;
  const kernels::Table& K = kernels::active_table();
  const int np = a.pixels();
  std::vector<double> tmp(np);
  double total = 0;
  for (int c = 0; c < a.c; ++c) {
    cc.mu_a[c] = blur_valid(a.plane(c), a.w, a.h);
    cc.mu_b[c] = blur_valid(b.plane(c), a.w, a.h);
    K.mul_ew(a.plane(c), a.plane(c), tmp.data(), np);
    cc.m_aa[c] = blur_valid(tmp.data(), a.w, a.h);
    K.mul_ew(b.plane(c), b.plane(c), tmp.data(), np);
    cc.m_bb[c] = blur_valid(tmp.data(), a.w, a.h);
    K.mul_ew(a.plane(c), b.plane(c), tmp.data(), np);
    cc.m_ab[c] = blur_valid(tmp.data(), a.w, a.h);

    for (int i = 0; i < ow * oh; ++i) {
      const double ma = cc.mu_a[c][i], mb = cc.mu_b[c][i];
      const double va = cc.m_aa[c][i] - ma * ma;
      const double vb = cc.m_bb[c][i] - mb * mb;
      const double vab = cc.m_ab[c][i] - ma * mb;
      const double A1 = 2 * ma * mb + C1, A2 = 2 * vab + C2;
      const double B1 = ma * ma + mb * mb + C1, B2 = va + vb + C2;
      total += (A1 * A2) / (B1 * B2);
    }
  }
  return total / (static_cast<double>(ow) * oh * a.c);
}

void ssim_backward(const Image& a, const Image& b, const SsimCache& cc, double upstream,
                   Image& d_a) {
  const double C1 = 0.01 * 0.01, C2 = 0.03 * 0.03;
  const int ow = cc.ow, oh = cc.oh;
  const double u = upstream / (static_cast<double>(ow) * oh * a.c);
  for (int c = 0; c < a.c; ++c) {
    std::vector<double> g_mu(ow * oh), g_maa(ow * oh), g_mab(ow * oh);
    for (int i = 0; i < ow * oh; ++i) {
      const double ma = cc.mu_a[c][i], mb = cc.mu_b[c][i];
      const double va = cc.m_aa[c][i] - ma * ma;
      const double vb = cc.m_bb[c][i] - mb * mb;
      const double vab = cc.m_ab[c][i] - ma * mb;
      const double A1 = 2 * ma * mb + C1, A2 = 2 * vab + C2;
      const double B1 = ma * ma + mb * mb + C1, B2 = va + vb + C2;
      const double inv = 1.0 / (B1 * B2);
      const double S = A1 * A2 * inv;
      const double dS_dA1 = A2 * inv;
      const double dS_dA2 = A1 * inv;
      const double dS_dB1 = -S / B1;
      const double dS_dB2 = -S / B2;
      const double dS_dvab = 2 * dS_dA2;
      const double dS_dva = dS_dB2;
      // mu_a enters A1, B1 directly and va, vab through the centering terms
      g_mu[i] = u * (dS_dA1 * 2 * mb + dS_dB1 * 2 * ma - dS_dvab * mb - dS_dva * 2 * ma);
      g_maa[i] = u * dS_dva;
      g_mab[i] = u * dS_dvab;
    }
    const auto d1 = blur_adjoint(g_mu.data(), ow, oh);
    const auto d2 = blur_adjoint(g_maa.data(), ow, oh);
    const auto d3 = blur_adjoint(g_mab.data(), ow, oh);
    double* out = d_a.plane(c);
    const double* pa = a.plane(c);
    const double* pb = b.plane(c);
    for (int i = 0; i < a.pixels(); ++i) out[i] += d1[i] + 2 * pa[i] * d2[i] + pb[i] * d3[i];
  }
}

double photometric_loss(const Image& rendered, const Image& target, double lambda_rgb,
                        double lambda_ssim, PhotometricCache* cache) {
  check_same_shape(rendered, target, "photometric_loss");
  PhotometricCache local;
  PhotometricCache& cc = cache ? *cache : local;
  return lambda_rgb * l1_loss(rendered, target) +
         lambda_ssim * (1.0 - ssim(rendered, target, &cc.ssim));
}

void photometric_backward(const Image& rendered, const Image& target, double lambda_rgb,
                          double lambda_ssim, const PhotometricCache& cache,
                          Image& d_rendered) {
  l1_loss_backward(rendered, target, lambda_rgb, d_rendered);
  ssim_backward(rendered, target, cache.ssim, -lambda_ssim, d_rendered);
}

double threshold_l1(const MatX3d& x, double threshold) {
  if (x.size() == 0) return 0.0;
  double sum = 0;
  for (const double v : x.reshaped()) sum += std::max(std::abs(v) - threshold, 0.0);
  return sum / static_cast<double>(x.size());
}

void threshold_l1_backward(const MatX3d& x, double threshold, double coef, MatX3d& d_x) {
  if (x.size() == 0) return;
  const double c = coef / static_cast<double>(x.size());
  for (int i = 0; i < x.rows(); ++i)
    for (int k = 0; k < 3; ++k) {
      const double v = x(i, k);
      if (v > threshold)
        d_x(i, k) += c;
      else if (v < -threshold)
        d_x(i, k) -= c;
    }
}

namespace {
int residual_count(const ResidualBundle& r) {
  return static_cast<int>(r.d_mu.size() + r.d_quat.size() + r.d_scale.size() +
                          r.d_opacity.size() + r.d_color.size());
}
}  // namespace

double residual_sq_mean(const ResidualBundle& r) {
  const int n = residual_count(r);
  if (n == 0) return 0.0;
  const double sum = r.d_mu.squaredNorm() + r.d_quat.squaredNorm() + r.d_scale.squaredNorm() +
                     r.d_opacity.squaredNorm() + r.d_color.squaredNorm();
  return sum / n;
}

void residual_sq_mean_backward(const ResidualBundle& r, double coef, ResidualBundle& d_r) {
  const int n = residual_count(r);
  if (n == 0) return;
  const double c = 2.0 * coef / n;
  d_r.d_mu += c * r.d_mu;
  d_r.d_quat += c * r.d_quat;
  d_r.d_scale += c * r.d_scale;
  d_r.d_opacity += c * r.d_opacity;
  d_r.d_color += c * r.d_color;
}

}  // namespace gdhm
