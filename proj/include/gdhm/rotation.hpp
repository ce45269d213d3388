#pragma once

#include "gdhm/common.hpp"

namespace gdhm {

// Axis-angle (Rodrigues) rotation. The backward pass uses the Gallego-Yezzi
// closed form with a series fallback near zero angle.
Matrix3d rodrigues(const Vector3d& v);
Vector3d rodrigues_backward(const Vector3d& v, const Matrix3d& R, const Matrix3d& d_R);

// Quaternions stored (w, x, y, z). quat_to_mat assumes unit norm.
Matrix3d quat_to_mat(const Vector4d& q);
Vector4d quat_to_mat_backward(const Vector4d& q, const Matrix3d& d_R);

Vector4d quat_mul(const Vector4d& a, const Vector4d& b);
void quat_mul_backward(const Vector4d& a, const Vector4d& b, const Vector4d& d_out,
                       Vector4d& d_a, Vector4d& d_b);

Vector4d quat_normalize(const Vector4d& q);
Vector4d quat_normalize_backward(const Vector4d& q_raw, const Vector4d& d_unit);

Vector4d mat_to_quat(const Matrix3d& R);  // for export; no gradient

// Unit-vector normalization backward: given raw x and upstream on x/|x|.
Vector3d normalize_backward(const Vector3d& x_raw, const Vector3d& d_unit);

// c = a x b adjoints: d_a += d_c x b ... handled inline by callers via these
// helpers.
inline Vector3d cross_backward_a(const Vector3d& b, const Vector3d& d_c) {
  return b.cross(d_c);
}
inline Vector3d cross_backward_b(const Vector3d& a, const Vector3d& d_c) {
  return d_c.cross(a);
}

}  // namespace gdhm
