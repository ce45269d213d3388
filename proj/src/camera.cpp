#include "gdhm/camera.hpp"

namespace gdhm {

Camera Camera::look_at(const Vector3d& position, const Vector3d& target,
                       const Vector3d& world_up, double focal, int width, int height) {
  Camera cam;
  cam.width = width;
  cam.height = height;
  cam.fx = cam.fy = focal;
  cam.cx = 0.5 * width;
  cam.cy = 0.5 * height;

  const Vector3d fwd = (target - position).normalized();
  Vector3d right = fwd.cross(world_up);
  if (right.norm() < 1e-9) right = fwd.cross(Vector3d::UnitX());
  right.normalize();
  const Vector3d down = fwd.cross(right);  // y points down in camera frame

  Matrix3d cam_to_world;
  cam_to_world.col(0) = right;
  cam_to_world.col(1) = down;
  cam_to_world.col(2) = fwd;
  cam.rot = cam_to_world.transpose();
  cam.trans = -cam.rot * position;
  return cam;
}

}  // namespace gdhm
