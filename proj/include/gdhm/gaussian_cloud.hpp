#pragma once

#include "gdhm/common.hpp"

namespace gdhm {

using MatX4d = Eigen::Matrix<double, Eigen::Dynamic, 4, Eigen::RowMajor>;

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double logit(double p) { return std::log(p / (1.0 - p)); }

// Local frame of one triangle. Columns of rotation: normalized first edge,
// unit normal, and their cross product; origin is the centroid; scale the
// mean edge length.
struct TriangleFrame {
  Matrix3d rotation;
  Vector3d origin;
  double scale = 0;
};

// Throws numeric_error when the triangle is degenerate (area < 1e-12).
TriangleFrame triangle_frame(const Vector3d& v0, const Vector3d& v1, const Vector3d& v2);

void triangle_frame_backward(const Vector3d& v0, const Vector3d& v1, const Vector3d& v2,
                             const Matrix3d& d_rotation, const Vector3d& d_origin,
                             double d_scale, Vector3d& d_v0, Vector3d& d_v1, Vector3d& d_v2);

// Per-Gaussian parameters in triangle-local coordinates. Quaternions are
// stored raw and normalized on use; scales are log-space; opacity is a
// logit; colors activate through a sigmoid.
struct GaussianCloud {
  std::vector<int> parent_face;
  MatX3d mu;
  MatX4d quat;
  MatX3d log_scale;
  VectorXd opacity_logit;
  MatX3d color_raw;

  int size() const { return static_cast<int>(parent_face.size()); }
  void resize(int n);
  double activated_opacity(int i) const { return sigmoid(opacity_logit[i]); }
  Vector3d activated_color(int i) const {
    return {sigmoid(color_raw(i, 0)), sigmoid(color_raw(i, 1)), sigmoid(color_raw(i, 2))};
  }
  // Drops the listed Gaussians (used by opacity pruning).
  void remove(const std::vector<int>& sorted_indices);
};

// per_triangle Gaussians per face: centroid-seated, identity rotation,
// isotropic log(0.5) scale, opacity logit(0.5), mid-gray; deterministic
// in-plane jitter for per_triangle > 1. Degenerate faces are skipped and
// reported through skipped_faces.
GaussianCloud init_cloud(const MatX3i& faces, const MatX3d& vertices, int per_triangle,
                         uint64_t seed, std::vector<int>* skipped_faces = nullptr);

struct WorldGaussians {
  MatX3d position;
  std::vector<Matrix3d> rotation;
  MatX3d scale;                 // per-axis world scales
  std::vector<uint8_t> active;  // 0 when the parent triangle degenerated
  int size() const { return static_cast<int>(active.size()); }
};

struct PromoteCache {
  std::vector<TriangleFrame> frames;  // per Gaussian
  std::vector<Vector4d> q_unit;
};

// world_position = origin + scale * R_frame * mu
// world_rotation = R_frame * R(q)
// world_scale    = scale * exp(log_scale)
WorldGaussians promote_to_world(const GaussianCloud& cloud, const MatX3i& faces,
                                const MatX3d& vertices, PromoteCache* cache = nullptr);

struct WorldGrads {
  MatX3d d_position;
  std::vector<Matrix3d> d_rotation;
  MatX3d d_scale;
  void init(int n);
};

struct CloudGrads {
  MatX3d d_mu;
  MatX4d d_quat;
  MatX3d d_log_scale;
  VectorXd d_opacity_logit;
  MatX3d d_color_raw;
  void init(int n);
  void add_scaled(const CloudGrads& o, double s);
};

// Accumulates into d_cloud (mu/quat/log_scale fields) and d_vertices.
void promote_backward(const GaussianCloud& cloud, const MatX3i& faces, const MatX3d& vertices,
                      const PromoteCache& cache, const WorldGrads& d_world,
                      CloudGrads& d_cloud, MatX3d& d_vertices);

}  // namespace gdhm
