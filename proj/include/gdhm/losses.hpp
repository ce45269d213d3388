#pragma once

#include "gdhm/fields.hpp"
#include "gdhm/image.hpp"

namespace gdhm {

// Loss weights; rgb/ssim/position/scale follow GaussianAvatars-style
// conventions, normal is the Eq-weight for the rendered-normal L1 term.
struct LossWeights {
  double rgb = 0.8;
  double ssim = 0.2;
  double normal = 0.1;
  double position = 0.01;
  double scale = 1.0;
  double dynamics = 1e-3;
  double position_threshold = 1.0;  // triangle-frame units
  double scale_threshold = 0.6;     // activated local scale
};

// mean |a - b| over every element.
double l1_loss(const Image& a, const Image& b);
void l1_loss_backward(const Image& a, const Image& b, double coef, Image& d_a);

// lambda * mean over pixels of sum_c |nhat_c - alpha*n_c|.
double normal_loss(const Image& rendered_normal, const Image& target_normal,
                   const Image& alpha_mask, double lambda_n);
void normal_loss_backward(const Image& rendered_normal, const Image& target_normal,
                          const Image& alpha_mask, double lambda_n, Image& d_rendered);

// Mean local SSIM over an 11x11 Gaussian window (sigma 1.5), valid-mode, unit
// dynamic range constants C1=(0.01)^2, C2=(0.03)^2, averaged across channels.
struct SsimCache {
  int w = 0, h = 0, c = 0, ow = 0, oh = 0;
  std::vector<std::vector<double>> mu_a, mu_b, m_aa, m_bb, m_ab;  // per channel
};
double ssim(const Image& a, const Image& b, SsimCache* cache = nullptr);
void ssim_backward(const Image& a, const Image& b, const SsimCache& cache, double upstream,
                   Image& d_a);

struct PhotometricCache {
  SsimCache ssim;
};
// lambda_rgb * L1 + lambda_ssim * (1 - SSIM)
double photometric_loss(const Image& rendered, const Image& target, double lambda_rgb,
                        double lambda_ssim, PhotometricCache* cache = nullptr);
void photometric_backward(const Image& rendered, const Image& target, double lambda_rgb,
                          double lambda_ssim, const PhotometricCache& cache, Image& d_rendered);

// mean over all entries of max(|x| - threshold, 0); adjoint accumulates
// coef * d/dx into d_x.
double threshold_l1(const MatX3d& x, double threshold);
void threshold_l1_backward(const MatX3d& x, double threshold, double coef, MatX3d& d_x);

// mean of squares over every residual component (the dynamics penalty).
double residual_sq_mean(const ResidualBundle& r);
void residual_sq_mean_backward(const ResidualBundle& r, double coef, ResidualBundle& d_r);

}  // namespace gdhm
