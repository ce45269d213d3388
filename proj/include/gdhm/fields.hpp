#pragma once

#include "gdhm/gaussian_cloud.hpp"

namespace gdhm {

// Small dense network with tanh hidden activations and a linear output
// layer. Rows of batch matrices are samples.
struct Mlp {
  struct Layer {
    MatrixXd W;  // out x in
    VectorXd b;
  };
  std::vector<Layer> layers;

  // dims = {in, hidden..., out}. zero_final makes the output layer exactly
  // zero so freshly created fields are inert.
  static Mlp create(const std::vector<int>& dims, uint64_t seed, bool zero_final);

  int input_dim() const { return static_cast<int>(layers.front().W.cols()); }
  int output_dim() const { return static_cast<int>(layers.back().W.rows()); }

  struct Cache {
    std::vector<MatrixXd> acts;  // acts[0] = input, acts[l] = post-activation
  };
  MatrixXd forward(const MatrixXd& X, Cache* cache = nullptr) const;
  // Returns d_X; accumulates layer gradients into `grads` (same shapes).
  MatrixXd backward(const Cache& cache, const MatrixXd& d_Y, std::vector<Layer>& grads) const;

  std::vector<Layer> zero_grads() const;
  int num_params() const;
  void to_flat(double* out) const;
  void from_flat(const double* in);
  static void grads_to_flat(const std::vector<Layer>& grads, double* out);
};

// Per-vertex deformation conditioned on (canonical position, expression
// latent). Output is scaled by a learnable gain (init 1e-3); the zero final
// layer makes initial offsets exactly zero.
struct DeformationField {
  Mlp mlp;  // (3 + latent_dim) -> hidden -> 3
  double gain = 1e-3;
  int latent_dim = 0;

  static DeformationField create(int latent_dim, int hidden, uint64_t seed);

  struct Cache {
    Mlp::Cache mlp_cache;
    MatrixXd raw;  // pre-gain outputs
  };
  // canonical: V' x 3 (treated as a constant input), latent: latent_dim.
  MatX3d deform_vertices(const MatX3d& canonical, const VectorXd& latent,
                         Cache* cache = nullptr) const;

  struct Grads {
    std::vector<Mlp::Layer> mlp;
    double gain = 0;
    VectorXd latent;
  };
  Grads backward(const Cache& cache, const MatX3d& d_offsets) const;

  int num_params() const { return mlp.num_params() + 1; }  // + gain
  void to_flat(double* out) const;
  void from_flat(const double* in);
  static void grads_to_flat(const Grads& g, double* out);
};

// Per-Gaussian residuals over all attributes, conditioned on a learnable
// per-Gaussian code and the expression latent. Output layout per row:
// [d_mu(3), d_quat(4), d_scale(3), d_opacity(1), d_color(3)] = 14.
struct ResidualBundle {
  MatX3d d_mu;
  MatX4d d_quat;
  MatX3d d_scale;
  VectorXd d_opacity;
  MatX3d d_color;
  void init(int n);
};

struct DynamicsField {
  Mlp mlp;  // (code_dim + latent_dim) -> hidden -> 14
  MatrixXd codes;  // N x code_dim, learnable, zero-init
  int code_dim = 16;
  int latent_dim = 0;

  static DynamicsField create(int n_gaussians, int latent_dim, int code_dim, int hidden,
                              uint64_t seed);

  struct Cache {
    Mlp::Cache mlp_cache;
  };
  ResidualBundle dynamics_residuals(const VectorXd& latent, Cache* cache = nullptr) const;

  struct Grads {
    std::vector<Mlp::Layer> mlp;
    MatrixXd codes;
    VectorXd latent;
  };
  Grads backward(const Cache& cache, const ResidualBundle& d_residuals) const;

  void remove_gaussians(const std::vector<int>& sorted_indices);

  int num_mlp_params() const { return mlp.num_params(); }
  int num_code_params() const { return static_cast<int>(codes.size()); }
};

// cloud (+) residuals: mu/scale/opacity/color add; the quaternion composes
// with the normalized perturbation (1,0,0,0)+d_quat.
GaussianCloud apply_residuals(const GaussianCloud& cloud, const ResidualBundle& r);
void apply_residuals_backward(const GaussianCloud& cloud, const ResidualBundle& r,
                              const CloudGrads& d_effective, CloudGrads& d_cloud,
                              ResidualBundle& d_residuals);

}  // namespace gdhm
