#include <doctest.h>

#include "gdhm/pose_map.hpp"
#include "gdhm/rotation.hpp"

using namespace gdhm;

namespace {
Camera frontal_camera(int res = 64) {
  // head at the origin, face toward +z; camera on the +z axis looking back
  return Camera::look_at(Vector3d(0, 0, 0.5), Vector3d::Zero(), Vector3d::UnitY(),
                         1.6 * res, res, res);
}
}  // namespace

TEST_CASE("pose maps are bit-identical across expressions") {
  const HeadModel m = make_toy_model(7, 400, 3, 6);
  const Camera cam = frontal_camera();
  Rng rng(11);
  PoseInput base = PoseInput::zeros(m);
  base.joint_rot.row(1) << 0.2, 0.0, 0.1;
  base.global_rot << 0.1, 0.3, -0.05;
  base.global_trans << 0.01, -0.02, 0.005;

  const Image ref = render_pose_map(m, base, cam);
  for (int t = 0; t < 10; ++t) {
    PoseInput p = base;
    for (int k = 0; k < m.num_expr(); ++k) p.expr[k] = 2.0 * rng.normal();
    const Image img = render_pose_map(m, p, cam);
    CHECK(img == ref);
  }
}

TEST_CASE("frontal rest pose faces the camera") {
  const HeadModel m = make_toy_model(13, 500, 2, 2);
  const Camera cam = frontal_camera();
  const Image img = render_pose_map(m, PoseInput::zeros(m), cam);
  // center pixels: camera-space normal approximately (0,0,-1)
  const int c = 32;
  double nz = 0;
  int cnt = 0;
  for (int y = c - 2; y <= c + 2; ++y)
    for (int x = c - 2; x <= c + 2; ++x) {
      nz += img.at(2, y, x);
      ++cnt;
    }
  nz /= cnt;
  CHECK(nz < -0.85);
  // some background must remain background (0,0,0)
  CHECK(img.at(0, 0, 0) == 0.0);
  CHECK(img.at(2, 0, 0) == 0.0);
}

TEST_CASE("mesh behind the camera renders all background") {
  const HeadModel m = make_toy_model(5, 300, 2, 2);
  Camera cam = frontal_camera();
  PoseInput p = PoseInput::zeros(m);
  p.global_trans << 0, 0, 5.0;  // far behind the camera at z=0.5 looking toward -z
  const Image img = render_pose_map(m, p, cam);
  for (const double v : img.data) CHECK(v == 0.0);
}

TEST_CASE("pose maps agree across rigidly related camera/world pairs") {
  const HeadModel m = make_toy_model(29, 450, 2, 2);
  const Camera cam1 = frontal_camera(48);
  PoseInput p0 = PoseInput::zeros(m);
  p0.global_rot << 0.1, -0.2, 0.15;
  p0.global_trans << 0.02, 0.01, -0.01;

  // rigid motion G applied to the world; camera compensated
  const Vector3d g_axis(0.3, 0.5, -0.2);
  const Matrix3d Rg = rodrigues(g_axis);
  const Vector3d tg(0.07, -0.03, 0.12);

  PoseInput p1 = p0;
  const Matrix3d R1 = Rg * rodrigues(p0.global_rot);
  // recover axis-angle of the composed rotation through the quaternion log
  const Eigen::AngleAxisd aa(R1);
  p1.global_rot = aa.angle() * aa.axis();
  p1.global_trans = Rg * p0.global_trans + tg;

  Camera cam2 = cam1;
  cam2.rot = cam1.rot * Rg.transpose();
  cam2.trans = cam1.trans - cam2.rot * tg;

  const Image a = render_pose_map(m, p0, cam1);
  const Image b = render_pose_map(m, p1, cam2);

  int both = 0, either = 0;
  double max_diff = 0;
  for (int y = 0; y < a.h; ++y)
    for (int x = 0; x < a.w; ++x) {
      const bool fa = a.at(0, y, x) != 0 || a.at(1, y, x) != 0 || a.at(2, y, x) != 0;
      const bool fb = b.at(0, y, x) != 0 || b.at(1, y, x) != 0 || b.at(2, y, x) != 0;
      if (fa || fb) ++either;
      if (fa && fb) {
        ++both;
        for (int ch = 0; ch < 3; ++ch)
          max_diff = std::max(max_diff, std::abs(a.at(ch, y, x) - b.at(ch, y, x)));
      }
    }
  CHECK(either > 200);
  CHECK(static_cast<double>(both) / either > 0.98);  // knife-edge pixels may differ
  CHECK(max_diff < 1e-9);
}

TEST_CASE("z-buffer ties resolve to the lower face index") {
  // two coplanar triangles covering the same pixels
  MatX3d v(6, 3);
  v << -1, -1, 0, 1, -1, 0, 0, 1, 0, -1, -1, 0, 1, -1, 0, 0, 1, 0;
  MatX3i f(2, 3);
  f << 0, 1, 2, 3, 4, 5;
  MatX3d attrs(6, 3);
  attrs << 1, 0, 0, 1, 0, 0, 1, 0, 0, 0, 1, 0, 0, 1, 0, 0, 1, 0;
  const Camera cam = Camera::look_at(Vector3d(0, 0, -2), Vector3d::Zero(), Vector3d::UnitY(),
                                     20, 32, 32);
  const Image img = rasterize_vertex_attributes(v, f, attrs, cam, Vector3d::Zero());
  CHECK(img.at(0, 16, 16) == 1.0);  // face 0's attribute wins
  CHECK(img.at(1, 16, 16) == 0.0);
}
