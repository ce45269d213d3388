#include "gdhm/gaussian_cloud.hpp"

#include "gdhm/rotation.hpp"

namespace gdhm {

TriangleFrame triangle_frame(const Vector3d& v0, const Vector3d& v1, const Vector3d& v2) {
  const Vector3d e1_raw = v1 - v0;
  const Vector3d e2_raw = v2 - v0;
  const Vector3d n_raw = e1_raw.cross(e2_raw);
  if (0.5 * n_raw.norm() < 1e-12) throw numeric_error("triangle_frame: degenerate triangle");
  TriangleFrame f;
  const Vector3d e1 = e1_raw.normalized();
  const Vector3d n = n_raw.normalized();
  f.rotation.col(0) = e1;
  f.rotation.col(1) = n;
  f.rotation.col(2) = e1.cross(n);
  f.origin = (v0 + v1 + v2) / 3.0;
  f.scale = ((v1 - v0).norm() + (v2 - v1).norm() + (v0 - v2).norm()) / 3.0;
  return f;
}

void triangle_frame_backward(const Vector3d& v0, const Vector3d& v1, const Vector3d& v2,
                             const Matrix3d& d_rot, const Vector3d& d_origin, double d_scale,
                             Vector3d& d_v0, Vector3d& d_v1, Vector3d& d_v2) {
  const Vector3d e1_raw = v1 - v0;
  const Vector3d e2_raw = v2 - v0;
  const Vector3d n_raw = e1_raw.cross(e2_raw);
  const Vector3d e1 = e1_raw.normalized();
  const Vector3d n = n_raw.normalized();

  // columns: col0 = e1, col1 = n, col2 = e1 x n
  Vector3d d_e1 = d_rot.col(0);
  Vector3d d_n = d_rot.col(1);
  const Vector3d d_col2 = d_rot.col(2);
  d_e1 += n.cross(d_col2);   // d(a x b)/da adjoint: b x g
  d_n += d_col2.cross(e1);   // g x a

  Vector3d d_e1_raw = normalize_backward(e1_raw, d_e1);
  const Vector3d d_n_raw = normalize_backward(n_raw, d_n);
  d_e1_raw += e2_raw.cross(d_n_raw);
  const Vector3d d_e2_raw = d_n_raw.cross(e1_raw);

  d_v1 += d_e1_raw;
  d_v0 -= d_e1_raw;
  d_v2 += d_e2_raw;
  d_v0 -= d_e2_raw;

  d_v0 += d_origin / 3.0;
  d_v1 += d_origin / 3.0;
  d_v2 += d_origin / 3.0;

  const Vector3d a = v1 - v0, b = v2 - v1, c = v0 - v2;
  const double third = d_scale / 3.0;
  const Vector3d da = third * a.normalized();
  const Vector3d db = third * b.normalized();
  const Vector3d dc = third * c.normalized();
  d_v1 += da;
  d_v0 -= da;
  d_v2 += db;
  d_v1 -= db;
  d_v0 += dc;
  d_v2 -= dc;
}

void GaussianCloud::resize(int n) {
  parent_face.assign(n, -1);
  mu = MatX3d::Zero(n, 3);
  quat = MatX4d::Zero(n, 4);
  log_scale = MatX3d::Zero(n, 3);
  opacity_logit = VectorXd::Zero(n);
  color_raw = MatX3d::Zero(n, 3);
}

void GaussianCloud::remove(const std::vector<int>& sorted_indices) {
  if (sorted_indices.empty()) return;
  const int n = size();
  std::vector<uint8_t> drop(n, 0);
  for (int i : sorted_indices) drop[i] = 1;
  int out = 0;
  for (int i = 0; i < n; ++i) {
    if (drop[i]) continue;
    parent_face[out] = parent_face[i];
    mu.row(out) = mu.row(i);
    quat.row(out) = quat.row(i);
    log_scale.row(out) = log_scale.row(i);
    opacity_logit[out] = opacity_logit[i];
    color_raw.row(out) = color_raw.row(i);
    ++out;
  }
  parent_face.resize(out);
  mu.conservativeResize(out, 3);
  quat.conservativeResize(out, 4);
  log_scale.conservativeResize(out, 3);
  opacity_logit.conservativeResize(out);
  color_raw.conservativeResize(out, 3);
}

GaussianCloud init_cloud(const MatX3i& faces, const MatX3d& vertices, int per_triangle,
                         uint64_t seed, std::vector<int>* skipped_faces) {
  if (per_triangle < 1) throw data_error("init_cloud: per_triangle must be >= 1");
  Rng rng(seed);
  const int F = static_cast<int>(faces.rows());
  std::vector<int> keep;
  keep.reserve(F);
  for (int f = 0; f < F; ++f) {
    const Vector3d a = vertices.row(faces(f, 0)).transpose();
    const Vector3d b = vertices.row(faces(f, 1)).transpose();
    const Vector3d c = vertices.row(faces(f, 2)).transpose();
    if (0.5 * (b - a).cross(c - a).norm() < 1e-12) {
      if (skipped_faces) skipped_faces->push_back(f);
      continue;
    }
    keep.push_back(f);
  }

  GaussianCloud cloud;
  cloud.resize(static_cast<int>(keep.size()) * per_triangle);
  int g = 0;
  for (int f : keep)
    for (int i = 0; i < per_triangle; ++i, ++g) {
      cloud.parent_face[g] = f;
      if (i > 0) {
        // deterministic in-plane jitter (frame axes 0 and 2 span the plane)
        cloud.mu(g, 0) = rng.uniform(-0.3, 0.3);
        cloud.mu(g, 2) = rng.uniform(-0.3, 0.3);
      }
      cloud.quat(g, 0) = 1.0;
      cloud.log_scale.row(g).setConstant(std::log(0.5));
      cloud.opacity_logit[g] = logit(0.5);
      // color_raw zero: sigmoid(0) = mid-gray
    }
  return cloud;
}

WorldGaussians promote_to_world(const GaussianCloud& cloud, const MatX3i& faces,
                                const MatX3d& vertices, PromoteCache* cache) {
  const int n = cloud.size();
  WorldGaussians w;
  w.position.resize(n, 3);
  w.rotation.resize(n);
  w.scale.resize(n, 3);
  w.active.assign(n, 1);
  if (cache) {
    cache->frames.resize(n);
    cache->q_unit.resize(n);
  }
  for (int g = 0; g < n; ++g) {
    const int f = cloud.parent_face[g];
    if (f < 0 || f >= faces.rows()) throw data_error("promote: parent face out of range");
    const Vector3d v0 = vertices.row(faces(f, 0)).transpose();
    const Vector3d v1 = vertices.row(faces(f, 1)).transpose();
    const Vector3d v2 = vertices.row(faces(f, 2)).transpose();
    TriangleFrame fr;
    try {
      fr = triangle_frame(v0, v1, v2);
    } catch (const numeric_error&) {
      w.active[g] = 0;  // degenerate at this pose; inactive for the frame
      w.position.row(g).setZero();
      w.rotation[g].setIdentity();
      w.scale.row(g).setZero();
      if (cache) cache->q_unit[g] = Vector4d(1, 0, 0, 0);
      continue;
    }
    const Vector4d q = quat_normalize(cloud.quat.row(g).transpose());
    w.position.row(g) =
        (fr.origin + fr.scale * (fr.rotation * cloud.mu.row(g).transpose())).transpose();
    w.rotation[g] = fr.rotation * quat_to_mat(q);
    for (int k = 0; k < 3; ++k) w.scale(g, k) = fr.scale * std::exp(cloud.log_scale(g, k));
    if (cache) {
      cache->frames[g] = fr;
      cache->q_unit[g] = q;
    }
  }
  return w;
}

void WorldGrads::init(int n) {
  d_position = MatX3d::Zero(n, 3);
  d_rotation.assign(n, Matrix3d::Zero());
  d_scale = MatX3d::Zero(n, 3);
}

void CloudGrads::init(int n) {
  d_mu = MatX3d::Zero(n, 3);
  d_quat = MatX4d::Zero(n, 4);
  d_log_scale = MatX3d::Zero(n, 3);
  d_opacity_logit = VectorXd::Zero(n);
  d_color_raw = MatX3d::Zero(n, 3);
}

void CloudGrads::add_scaled(const CloudGrads& o, double s) {
  d_mu += s * o.d_mu;
  d_quat += s * o.d_quat;
  d_log_scale += s * o.d_log_scale;
  d_opacity_logit += s * o.d_opacity_logit;
  d_color_raw += s * o.d_color_raw;
}

void promote_backward(const GaussianCloud& cloud, const MatX3i& faces, const MatX3d& vertices,
                      const PromoteCache& cache, const WorldGrads& d_world,
                      CloudGrads& d_cloud, MatX3d& d_vertices) {
  const int n = cloud.size();
  for (int g = 0; g < n; ++g) {
    const int f = cloud.parent_face[g];
    const Vector3d v0 = vertices.row(faces(f, 0)).transpose();
    const Vector3d v1 = vertices.row(faces(f, 1)).transpose();
    const Vector3d v2 = vertices.row(faces(f, 2)).transpose();
    const double area2 = (v1 - v0).cross(v2 - v0).norm();
    if (0.5 * area2 < 1e-12) continue;  // inactive: no gradients

    const TriangleFrame& fr = cache.frames[g];
    const Vector4d& q = cache.q_unit[g];
    const Matrix3d Rq = quat_to_mat(q);
    const Vector3d mu = cloud.mu.row(g).transpose();

    Matrix3d d_frot = Matrix3d::Zero();
    Vector3d d_origin = Vector3d::Zero();
    double d_fscale = 0;

    // position = origin + fscale * R_f * mu
    const Vector3d d_pos = d_world.d_position.row(g).transpose();
    d_origin += d_pos;
    const Vector3d rmu = fr.rotation * mu;
    d_fscale += d_pos.dot(rmu);
    d_frot += (fr.scale * d_pos) * mu.transpose();
    d_cloud.d_mu.row(g) += (fr.scale * (fr.rotation.transpose() * d_pos)).transpose();

    // rotation = R_f * R(q)
    const Matrix3d& d_wrot = d_world.d_rotation[g];
    d_frot += d_wrot * Rq.transpose();
    const Matrix3d d_Rq = fr.rotation.transpose() * d_wrot;
    const Vector4d d_qunit = quat_to_mat_backward(q, d_Rq);
    d_cloud.d_quat.row(g) +=
        quat_normalize_backward(cloud.quat.row(g).transpose(), d_qunit).transpose();

    // scale_k = fscale * exp(s_k)
    for (int k = 0; k < 3; ++k) {
      const double es = std::exp(cloud.log_scale(g, k));
      d_fscale += d_world.d_scale(g, k) * es;
      d_cloud.d_log_scale(g, k) += d_world.d_scale(g, k) * fr.scale * es;
    }

    Vector3d dv0 = Vector3d::Zero(), dv1 = Vector3d::Zero(), dv2 = Vector3d::Zero();
    triangle_frame_backward(v0, v1, v2, d_frot, d_origin, d_fscale, dv0, dv1, dv2);
    d_vertices.row(faces(f, 0)) += dv0.transpose();
    d_vertices.row(faces(f, 1)) += dv1.transpose();
    d_vertices.row(faces(f, 2)) += dv2.transpose();
  }
}

}  // namespace gdhm
