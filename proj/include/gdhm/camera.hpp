#pragma once

#include "gdhm/common.hpp"

namespace gdhm {

// Pinhole camera, OpenCV convention: x right, y down, z forward (the camera
// looks along +z in its own frame). rot/trans map world points into the
// camera frame.
struct Camera {
  std::string name;
  int width = 0, height = 0;
  double fx = 0, fy = 0, cx = 0, cy = 0;
  Matrix3d rot = Matrix3d::Identity();
  Vector3d trans = Vector3d::Zero();
  double near_plane = 0.01;

  Vector3d to_camera(const Vector3d& p_world) const { return rot * p_world + trans; }
  Vector3d center() const { return -rot.transpose() * trans; }

  // Projects a camera-space point; caller must ensure z > 0.
  Vector2d project(const Vector3d& p_cam) const {
    return {fx * p_cam.x() / p_cam.z() + cx, fy * p_cam.y() / p_cam.z() + cy};
  }

  void validate() const {
    if (fx <= 0 || fy <= 0) throw data_error("camera: fx/fy must be positive");
    if (width < 1 || height < 1) throw data_error("camera: width/height must be >= 1");
  }

  static Camera look_at(const Vector3d& position, const Vector3d& target,
                        const Vector3d& world_up, double focal, int width, int height);
};

}  // namespace gdhm
