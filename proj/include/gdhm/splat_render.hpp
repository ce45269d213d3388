#pragma once

#include "gdhm/camera.hpp"
#include "gdhm/gaussian_cloud.hpp"
#include "gdhm/image.hpp"

namespace gdhm {

// The composited normal of a Gaussian is its shortest principal axis,
// sign-flipped to face the camera (dot with the view direction <= 0). Ties in
// the minimum scale resolve to the lowest axis index.
Vector3d gaussian_world_normal(const Matrix3d& world_rotation, const Vector3d& world_scale,
                               const Vector3d& camera_center, const Vector3d& world_position,
                               int* axis_out = nullptr, double* sign_out = nullptr);

// Perspective (EWA) projection of one world Gaussian.
struct ProjSplat {
  bool visible = false;
  Vector2d mean = Vector2d::Zero();
  double conic_a = 0, conic_b = 0, conic_c = 0;  // inverse 2D covariance
  double depth = 0;
  // intermediates kept for the backward pass
  Vector3d p_cam = Vector3d::Zero();
  Matrix2d cov2d = Matrix2d::Zero();  // dilated
};

// Culled (visible=false) when the center is behind the near plane. The 2D
// covariance gets +dilation (pixels^2) on the diagonal.
ProjSplat project_gaussian(const Vector3d& position, const Matrix3d& rotation,
                           const Vector3d& scale, const Camera& cam, double dilation = 0.3);

struct RenderParams {
  Vector3d bg_rgb = Vector3d::Zero();
  Vector3d bg_normal = Vector3d::Zero();  // zero keeps Eq-style alpha-masked
                                          // normal targets consistent
  double stop_eps = 1e-4;                 // transmittance early-out
  int tile_size = 16;
  double dilation = 0.3;   // px^2 added to the 2D covariance diagonal
  double bin_sigma = 6.1;  // binning radius; exp(-bin_sigma^2/2) ~ 8e-9 keeps
                           // tiling equivalent to the untiled sum at < 1e-6
};

struct RenderOutput {
  Image rgb;     // [3][H][W], background-composited
  Image normal;  // [3][H][W]
  Image alpha;   // [1][H][W], 1 - final transmittance
};

struct RenderCache {
  PromoteCache promote;
  WorldGaussians world;
  std::vector<ProjSplat> proj;
  MatX3d features_rgb;     // activated colors
  MatX3d features_normal;  // camera-facing normals
  std::vector<int> normal_axis;
  std::vector<double> normal_sign;
  std::vector<int> order;               // depth-sorted visible gaussians
  std::vector<std::vector<int>> bins;   // per tile, indices into `order`
  int tiles_x = 0, tiles_y = 0;
  RenderParams params;
};

// Full differentiable pipeline: promote -> project -> tile -> composite.
// Compositing runs through the dispatched kernels (scalar or AVX2).
RenderOutput render(const GaussianCloud& cloud, const MatX3i& faces, const MatX3d& vertices,
                    const Camera& cam, const RenderParams& params = {},
                    RenderCache* cache = nullptr);

// Exact adjoint. Accumulates into d_cloud and d_vertices (callers must
// pre-size/zero them). Thread-count independent: per-tile partials are
// reduced in tile index order.
void render_backward(const GaussianCloud& cloud, const MatX3i& faces, const MatX3d& vertices,
                     const Camera& cam, const RenderCache& cache, const Image& d_rgb,
                     const Image& d_normal, const Image& d_alpha, CloudGrads& d_cloud,
                     MatX3d& d_vertices);

}  // namespace gdhm
