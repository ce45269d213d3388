#include "gdhm/pose_map.hpp"

namespace gdhm {

Image rasterize_vertex_attributes(const MatX3d& vertices, const MatX3i& faces,
                                  const MatX3d& attributes, const Camera& cam,
                                  const Vector3d& background) {
  const int W = cam.width, H = cam.height;
  Image img(H, W, 3);
  for (int c = 0; c < 3; ++c)
    for (int p = 0; p < H * W; ++p) img.plane(c)[p] = background[c];
  std::vector<double> zbuf(static_cast<size_t>(H) * W,
                           std::numeric_limits<double>::infinity());

  const int V = static_cast<int>(vertices.rows());
  MatX2d screen(V, 2);
  VectorXd depth(V);
  std::vector<uint8_t> in_front(V);
  for (int v = 0; v < V; ++v) {
    const Vector3d pc = cam.to_camera(vertices.row(v).transpose());
    depth[v] = pc.z();
    in_front[v] = pc.z() >= cam.near_plane;
    if (in_front[v]) screen.row(v) = cam.project(pc).transpose();
  }

  for (int f = 0; f < faces.rows(); ++f) {
    const int i0 = faces(f, 0), i1 = faces(f, 1), i2 = faces(f, 2);
    if (!in_front[i0] || !in_front[i1] || !in_front[i2]) continue;  // no clipping
    const Vector2d a = screen.row(i0).transpose(), b = screen.row(i1).transpose(),
                   c = screen.row(i2).transpose();
    const double area2 = (b.x() - a.x()) * (c.y() - a.y()) - (b.y() - a.y()) * (c.x() - a.x());
    if (area2 == 0.0) continue;

    const int x0 = std::max(0, static_cast<int>(std::floor(std::min({a.x(), b.x(), c.x()}) - 0.5)));
    const int x1 = std::min(W - 1, static_cast<int>(std::ceil(std::max({a.x(), b.x(), c.x()}))));
    const int y0 = std::max(0, static_cast<int>(std::floor(std::min({a.y(), b.y(), c.y()}) - 0.5)));
    const int y1 = std::min(H - 1, static_cast<int>(std::ceil(std::max({a.y(), b.y(), c.y()}))));

    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) {
        const double px = x + 0.5, py = y + 0.5;
        const double w0 = ((b.x() - px) * (c.y() - py) - (b.y() - py) * (c.x() - px)) / area2;
        const double w1 = ((c.x() - px) * (a.y() - py) - (c.y() - py) * (a.x() - px)) / area2;
        const double w2 = 1.0 - w0 - w1;
        if (w0 < 0 || w1 < 0 || w2 < 0) continue;
        const double z = w0 * depth[i0] + w1 * depth[i1] + w2 * depth[i2];
        double& zb = zbuf[static_cast<size_t>(y) * W + x];
        if (z >= zb) continue;  // ties keep the earlier (lower) face index
        zb = z;
        for (int ch = 0; ch < 3; ++ch)
          img.at(ch, y, x) = w0 * attributes(i0, ch) + w1 * attributes(i1, ch) +
                             w2 * attributes(i2, ch);
      }
  }
  return img;
}

Image render_pose_map(const HeadModel& m, const PoseInput& params, const Camera& cam) {
  cam.validate();
  PoseInput zeroed = params;
  zeroed.expr.setZero();  // expression (and eyelid) coefficients off
  const MatX3d posed = pose_mesh(m, zeroed);
  const MatX3d normals_world = vertex_normals(posed, m.faces);
  MatX3d normals_cam(normals_world.rows(), 3);
  for (int v = 0; v < normals_world.rows(); ++v)
    normals_cam.row(v) = (cam.rot * normals_world.row(v).transpose()).transpose();
  return rasterize_vertex_attributes(posed, m.faces, normals_cam, cam, Vector3d::Zero());
}

}  // namespace gdhm
