#pragma once

// Independent straight-line re-implementations used as oracles. These must
// not share code paths with the library implementations they check: rotations
// go through quaternions here (the library uses Rodrigues), transforms use
// homogeneous 4x4 matrices, and loops are written in the most literal way.

#include <Eigen/Dense>

#include <vector>

#include "gdhm/head_model.hpp"
#include "gdhm/image.hpp"

namespace gdhm::testref {

inline Eigen::Matrix3d axis_angle_to_mat_q(const Eigen::Vector3d& v) {
  const double theta = v.norm();
  Eigen::Quaterniond q;
  if (theta < 1e-12) {
    q = Eigen::Quaterniond(1, 0.5 * v.x(), 0.5 * v.y(), 0.5 * v.z());
    q.normalize();
  } else {
    q = Eigen::Quaterniond(Eigen::AngleAxisd(theta, v / theta));
  }
  return q.toRotationMatrix();
}

inline Eigen::Matrix4d make_tf(const Eigen::Matrix3d& R, const Eigen::Vector3d& t) {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.block<3, 3>(0, 0) = R;
  m.block<3, 1>(0, 3) = t;
  return m;
}

// Literal blendshape + LBS + global transform evaluation.
inline MatX3d ref_pose_mesh(const HeadModel& m, const PoseInput& in) {
  const int V = m.num_vertices();
  const int J = m.num_joints();

  MatX3d shape_only = m.template_vertices;
  for (int k = 0; k < m.num_shape(); ++k) shape_only += in.shape[k] * m.shape_basis[k];
  MatX3d shaped = shape_only;
  for (int k = 0; k < m.num_expr(); ++k) shaped += in.expr[k] * m.expr_basis[k];

  MatX3d joints(J, 3);
  for (int j = 0; j < J; ++j) {
    Eigen::Vector3d acc = Eigen::Vector3d::Zero();
    for (int v = 0; v < V; ++v)
      acc += m.joint_regressor(j, v) * shape_only.row(v).transpose();
    joints.row(j) = acc.transpose();
  }

  std::vector<Eigen::Matrix4d> G(J);
  for (int j = 0; j < J; ++j) {
    const Eigen::Matrix3d R = axis_angle_to_mat_q(in.joint_rot.row(j).transpose());
    const int p = m.joint_parents[j];
    if (p < 0) {
      G[j] = make_tf(Eigen::Matrix3d::Identity(), joints.row(j).transpose()) *
             make_tf(R, Eigen::Vector3d::Zero());
    } else {
      const Eigen::Vector3d delta =
          joints.row(j).transpose() - joints.row(p).transpose();
      G[j] = G[p] * make_tf(Eigen::Matrix3d::Identity(), delta) *
             make_tf(R, Eigen::Vector3d::Zero());
    }
  }
  std::vector<Eigen::Matrix4d> S(J);
  for (int j = 0; j < J; ++j)
    S[j] = G[j] * make_tf(Eigen::Matrix3d::Identity(), -joints.row(j).transpose());

  const Eigen::Matrix4d global =
      make_tf(axis_angle_to_mat_q(in.global_rot), in.global_trans);

  MatX3d out(V, 3);
  for (int v = 0; v < V; ++v) {
    Eigen::Vector4d x(shaped(v, 0), shaped(v, 1), shaped(v, 2), 1.0);
    Eigen::Vector4d acc = Eigen::Vector4d::Zero();
    for (int j = 0; j < J; ++j) acc += m.skin_weights(v, j) * (S[j] * x);
    acc = global * acc;
    out.row(v) << acc(0), acc(1), acc(2);
  }
  return out;
}

}  // namespace gdhm::testref

namespace gdhm::testref {

// Straight-line SSIM: explicit window loops, own Gaussian weights.
inline double ref_ssim(const Image& a, const Image& b) {
  const int K = 11;
  double w[K][K];
  double wsum = 0;
  for (int i = 0; i < K; ++i)
    for (int j = 0; j < K; ++j) {
      const double dx = i - 5, dy = j - 5;
      w[i][j] = std::exp(-(dx * dx + dy * dy) / (2 * 1.5 * 1.5));
      wsum += w[i][j];
    }
  for (int i = 0; i < K; ++i)
    for (int j = 0; j < K; ++j) w[i][j] /= wsum;

  const double C1 = 0.0001, C2 = 0.0009;
  double total = 0;
  int count = 0;
  for (int c = 0; c < a.c; ++c)
    for (int y = 0; y + K <= a.h; ++y)
      for (int x = 0; x + K <= a.w; ++x) {
        double ma = 0, mb = 0;
        for (int i = 0; i < K; ++i)
          for (int j = 0; j < K; ++j) {
            ma += w[i][j] * a.at(c, y + i, x + j);
            mb += w[i][j] * b.at(c, y + i, x + j);
          }
        double va = 0, vb = 0, vab = 0;
        for (int i = 0; i < K; ++i)
          for (int j = 0; j < K; ++j) {
            va += w[i][j] * a.at(c, y + i, x + j) * a.at(c, y + i, x + j);
            vb += w[i][j] * b.at(c, y + i, x + j) * b.at(c, y + i, x + j);
            vab += w[i][j] * a.at(c, y + i, x + j) * b.at(c, y + i, x + j);
          }
        va -= ma * ma;
        vb -= mb * mb;
        vab -= ma * mb;
        total += ((2 * ma * mb + C1) * (2 * vab + C2)) /
                 ((ma * ma + mb * mb + C1) * (va + vb + C2));
        ++count;
      }
  return total / count;
}

}  // namespace gdhm::testref
