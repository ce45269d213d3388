#include "gdhm/rotation.hpp"

namespace gdhm {

namespace {

Matrix3d skew(const Vector3d& v) {
  Matrix3d m;
  m << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return m;
}

}  // namespace

Matrix3d rodrigues(const Vector3d& v) {
  const double theta2 = v.squaredNorm();
  if (theta2 < 1e-16) {
    // second-order series, exact enough below the cutoff
    return Matrix3d::Identity() + skew(v) + 0.5 * (skew(v) * skew(v));
  }
  const double theta = std::sqrt(theta2);
  const Vector3d k = v / theta;
  const Matrix3d K = skew(k);
  return Matrix3d::Identity() + std::sin(theta) * K + (1.0 - std::cos(theta)) * (K * K);
}

Vector3d rodrigues_backward(const Vector3d& v, const Matrix3d& R, const Matrix3d& d_R) {
  const double theta2 = v.squaredNorm();
  Vector3d g;
  if (theta2 < 1e-16) {
    // dR/dv_i -> skew(e_i) at v = 0
    for (int i = 0; i < 3; ++i) {
      const Matrix3d dRdvi = skew(Vector3d::Unit(i));
      g[i] = (d_R.array() * dRdvi.array()).sum();
    }
    return g;
  }
  // Gallego & Yezzi: dR/dv_i = (v_i [v]x + [v x ((I - R) e_i)]x) / |v|^2 * R
  const Matrix3d V = skew(v);
  const Matrix3d ImR = Matrix3d::Identity() - R;
  for (int i = 0; i < 3; ++i) {
    const Vector3d w = v.cross(ImR.col(i));
    const Matrix3d dRdvi = ((v[i] * V + skew(w)) / theta2) * R;
    g[i] = (d_R.array() * dRdvi.array()).sum();
  }
  return g;
}

Matrix3d quat_to_mat(const Vector4d& q) {
  const double w = q[0], x = q[1], y = q[2], z = q[3];
  Matrix3d R;
  R << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
      2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
      2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
  return R;
}

Vector4d quat_to_mat_backward(const Vector4d& q, const Matrix3d& g) {
  const double w = q[0], x = q[1], y = q[2], z = q[3];
  Vector4d d;
  d[0] = 2 * (-z * g(0, 1) + y * g(0, 2) + z * g(1, 0) - x * g(1, 2) - y * g(2, 0) +
              x * g(2, 1));
  d[1] = 2 * (y * g(0, 1) + z * g(0, 2) + y * g(1, 0) - 2 * x * g(1, 1) - w * g(1, 2) +
              z * g(2, 0) + w * g(2, 1) - 2 * x * g(2, 2));
  d[2] = 2 * (-2 * y * g(0, 0) + x * g(0, 1) + w * g(0, 2) + x * g(1, 0) + z * g(1, 2) -
              w * g(2, 0) + z * g(2, 1) - 2 * y * g(2, 2));
  d[3] = 2 * (-2 * z * g(0, 0) - w * g(0, 1) + x * g(0, 2) + w * g(1, 0) - 2 * z * g(1, 1) +
              y * g(1, 2) + x * g(2, 0) + y * g(2, 1));
  return d;
}

Vector4d quat_mul(const Vector4d& a, const Vector4d& b) {
  const double aw = a[0], ax = a[1], ay = a[2], az = a[3];
  const double bw = b[0], bx = b[1], by = b[2], bz = b[3];
  return {aw * bw - ax * bx - ay * by - az * bz, aw * bx + ax * bw + ay * bz - az * by,
          aw * by - ax * bz + ay * bw + az * bx, aw * bz + ax * by - ay * bx + az * bw};
}

void quat_mul_backward(const Vector4d& a, const Vector4d& b, const Vector4d& g, Vector4d& d_a,
                       Vector4d& d_b) {
  const double aw = a[0], ax = a[1], ay = a[2], az = a[3];
  const double bw = b[0], bx = b[1], by = b[2], bz = b[3];
  d_a[0] += bw * g[0] + bx * g[1] + by * g[2] + bz * g[3];
  d_a[1] += -bx * g[0] + bw * g[1] - bz * g[2] + by * g[3];
  d_a[2] += -by * g[0] + bz * g[1] + bw * g[2] - bx * g[3];
  d_a[3] += -bz * g[0] - by * g[1] + bx * g[2] + bw * g[3];
  d_b[0] += aw * g[0] + ax * g[1] + ay * g[2] + az * g[3];
  d_b[1] += -ax * g[0] + aw * g[1] + az * g[2] - ay * g[3];
  d_b[2] += -ay * g[0] - az * g[1] + aw * g[2] + ax * g[3];
  d_b[3] += -az * g[0] + ay * g[1] - ax * g[2] + aw * g[3];
}

Vector4d quat_normalize(const Vector4d& q) {
  const double n = q.norm();
  if (n < 1e-30) return {1, 0, 0, 0};
  return q / n;
}

Vector4d quat_normalize_backward(const Vector4d& q_raw, const Vector4d& d_unit) {
  const double n = q_raw.norm();
  if (n < 1e-30) return Vector4d::Zero();
  const Vector4d u = q_raw / n;
  return (d_unit - u * u.dot(d_unit)) / n;
}

Vector4d mat_to_quat(const Matrix3d& R) {
  Vector4d q;
  const double tr = R.trace();
  if (tr > 0) {
    double s = std::sqrt(tr + 1.0) * 2;
    q << 0.25 * s, (R(2, 1) - R(1, 2)) / s, (R(0, 2) - R(2, 0)) / s, (R(1, 0) - R(0, 1)) / s;
  } else if (R(0, 0) > R(1, 1) && R(0, 0) > R(2, 2)) {
    double s = std::sqrt(1.0 + R(0, 0) - R(1, 1) - R(2, 2)) * 2;
    q << (R(2, 1) - R(1, 2)) / s, 0.25 * s, (R(0, 1) + R(1, 0)) / s, (R(0, 2) + R(2, 0)) / s;
  } else if (R(1, 1) > R(2, 2)) {
    double s = std::sqrt(1.0 + R(1, 1) - R(0, 0) - R(2, 2)) * 2;
    q << (R(0, 2) - R(2, 0)) / s, (R(0, 1) + R(1, 0)) / s, 0.25 * s, (R(1, 2) + R(2, 1)) / s;
  } else {
    double s = std::sqrt(1.0 + R(2, 2) - R(0, 0) - R(1, 1)) * 2;
    q << (R(1, 0) - R(0, 1)) / s, (R(0, 2) + R(2, 0)) / s, (R(1, 2) + R(2, 1)) / s, 0.25 * s;
  }
  return q.normalized();
}

Vector3d normalize_backward(const Vector3d& x_raw, const Vector3d& d_unit) {
  const double n = x_raw.norm();
  if (n < 1e-30) return Vector3d::Zero();
  const Vector3d u = x_raw / n;
  return (d_unit - u * u.dot(d_unit)) / n;
}

}  // namespace gdhm
