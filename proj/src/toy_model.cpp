#include "gdhm/head_model.hpp"

namespace gdhm {

namespace {

double smoothstep01(double x) {
  x = x < 0 ? 0 : (x > 1 ? 1 : x);
  return x * x * (3 - 2 * x);
}

// Sum of a few smooth surface blobs, scaled to stay well under the head size.
MatX3d smooth_random_offsets(Rng& rng, const MatX3d& verts, double mean_radius) {
  const int V = static_cast<int>(verts.rows());
  MatX3d off = MatX3d::Zero(V, 3);
  const int blobs = 3;
  for (int b = 0; b < blobs; ++b) {
    const Vector3d center = verts.row(rng.uniform_index(V)).transpose();
    const Vector3d dir = rng.unit_vector();
    const double amp = 0.01 * mean_radius * rng.uniform(5.0, 10.0);
    const double sigma = mean_radius * rng.uniform(0.3, 0.6);
    for (int v = 0; v < V; ++v) {
      const double d2 = (verts.row(v).transpose() - center).squaredNorm();
      off.row(v) += (amp * std::exp(-0.5 * d2 / (sigma * sigma))) * dir.transpose();
    }
  }
  return off;
}

}  // namespace

HeadModel make_toy_model(uint64_t seed, int target_vertices, int n_shape, int n_expr) {
  if (target_vertices < 12) target_vertices = 12;
  if (n_shape < 0) n_shape = 0;
  if (n_expr < 0) n_expr = 0;
  Rng rng(seed);

  // lat-long sphere: V = rings*segments + 2
  const int segments = std::max(4, static_cast<int>(std::lround(std::sqrt(2.0 * (target_vertices - 2)))));
  const int rings = std::max(3, (target_vertices - 2) / segments);
  const int V = rings * segments + 2;

  const double rx = 0.085, ry = 0.115, rz = 0.095;  // head-ish radii, meters
  const double mean_radius = (rx + ry + rz) / 3.0;

  // band-limited radial bumps so heads differ across seeds
  struct Lobe {
    Vector3d dir;
    double amp, power;
  };
  std::vector<Lobe> lobes(4);
  for (auto& l : lobes) {
    l.dir = rng.unit_vector();
    l.amp = rng.uniform(-0.06, 0.06);
    l.power = rng.uniform(2.0, 5.0);
  }
  auto bump = [&](const Vector3d& d) {
    double s = 1.0;
    for (const auto& l : lobes) s += l.amp * std::pow(0.5 * (1.0 + d.dot(l.dir)), l.power);
    return s;
  };

  MatX3d verts(V, 3);
  auto ring_idx = [&](int r, int s) { return 1 + r * segments + s; };
  {
    const Vector3d north(0, 1, 0), south(0, -1, 0);
    verts.row(0) = (Vector3d(rx * north.x(), ry * north.y(), rz * north.z()) * bump(north))
                       .transpose();
    for (int r = 0; r < rings; ++r) {
      const double theta = M_PI * (r + 1) / (rings + 1);
      for (int s = 0; s < segments; ++s) {
        const double phi = 2.0 * M_PI * s / segments;
        const Vector3d d(std::sin(theta) * std::sin(phi), std::cos(theta),
                         std::sin(theta) * std::cos(phi));
        verts.row(ring_idx(r, s)) =
            (Vector3d(rx * d.x(), ry * d.y(), rz * d.z()) * bump(d)).transpose();
      }
    }
    verts.row(V - 1) =
        (Vector3d(rx * south.x(), ry * south.y(), rz * south.z()) * bump(south)).transpose();
  }

  // faces + parallel uv faces; u seam duplicated, poles get one uv vertex per
  // segment so the atlas tiles [0,1]^2 without overlap
  const int F = 2 * segments * (rings - 1) + 2 * segments;
  MatX3i faces(F, 3);
  MatX3i uv_faces(F, 3);
  const int uv_ring = segments + 1;
  const int Vt = rings * uv_ring + 2 * segments;
  MatX2d uvs(Vt, 2);
  auto uv_ring_idx = [&](int r, int s) { return r * uv_ring + s; };
  const int uv_north0 = rings * uv_ring;
  const int uv_south0 = rings * uv_ring + segments;
  for (int r = 0; r < rings; ++r) {
    const double vcoord = 1.0 - static_cast<double>(r + 1) / (rings + 1);
    for (int s = 0; s <= segments; ++s)
      uvs.row(uv_ring_idx(r, s)) << static_cast<double>(s) / segments, vcoord;
  }
  for (int s = 0; s < segments; ++s) {
    uvs.row(uv_north0 + s) << (s + 0.5) / segments, 1.0;
    uvs.row(uv_south0 + s) << (s + 0.5) / segments, 0.0;
  }

  int f = 0;
  for (int s = 0; s < segments; ++s) {  // north fan
    const int s1 = (s + 1) % segments;
    faces.row(f) << 0, ring_idx(0, s), ring_idx(0, s1);
    uv_faces.row(f) << uv_north0 + s, uv_ring_idx(0, s), uv_ring_idx(0, s + 1);
    ++f;
  }
  for (int r = 0; r + 1 < rings; ++r)
    for (int s = 0; s < segments; ++s) {
      const int s1 = (s + 1) % segments;
      faces.row(f) << ring_idx(r, s), ring_idx(r + 1, s), ring_idx(r + 1, s1);
      uv_faces.row(f) << uv_ring_idx(r, s), uv_ring_idx(r + 1, s), uv_ring_idx(r + 1, s + 1);
      ++f;
      faces.row(f) << ring_idx(r, s), ring_idx(r + 1, s1), ring_idx(r, s1);
      uv_faces.row(f) << uv_ring_idx(r, s), uv_ring_idx(r + 1, s + 1), uv_ring_idx(r, s + 1);
      ++f;
    }
  for (int s = 0; s < segments; ++s) {  // south fan
    const int s1 = (s + 1) % segments;
    faces.row(f) << V - 1, ring_idx(rings - 1, s1), ring_idx(rings - 1, s);
    uv_faces.row(f) << uv_south0 + s, uv_ring_idx(rings - 1, s + 1), uv_ring_idx(rings - 1, s);
    ++f;
  }

  // orient all faces outward (surface is star-shaped around the origin)
  for (int i = 0; i < F; ++i) {
    const Vector3d a = verts.row(faces(i, 0)).transpose();
    const Vector3d b = verts.row(faces(i, 1)).transpose();
    const Vector3d c = verts.row(faces(i, 2)).transpose();
    if ((b - a).cross(c - a).dot(a + b + c) < 0) {
      std::swap(faces(i, 1), faces(i, 2));
      int tmp = uv_faces(i, 1);
      uv_faces(i, 1) = uv_faces(i, 2);
      uv_faces(i, 2) = tmp;
    }
  }

  HeadModel m;
  m.template_vertices = verts;
  m.faces = faces;
  m.uv_coords = uvs;
  m.uv_faces = uv_faces;

  m.shape_basis.reserve(n_shape);
  for (int k = 0; k < n_shape; ++k)
    m.shape_basis.push_back(smooth_random_offsets(rng, verts, mean_radius));
  m.expr_basis.reserve(n_expr);
  for (int k = 0; k < n_expr; ++k)
    m.expr_basis.push_back(smooth_random_offsets(rng, verts, mean_radius));

  // two joints: root and jaw
  m.joint_parents = {-1, 0};
  m.joint_regressor = MatrixXd::Zero(2, V);
  m.joint_regressor.row(0).setConstant(1.0 / V);
  const Vector3d jaw_anchor(0, -0.35 * ry, 0.3 * rz);
  {
    VectorXd w(V);
    const double sigma = 0.3 * mean_radius;
    for (int v = 0; v < V; ++v)
      w[v] = std::exp(-0.5 * (verts.row(v).transpose() - jaw_anchor).squaredNorm() /
                      (sigma * sigma));
    m.joint_regressor.row(1) = (w / w.sum()).transpose();
  }

  m.skin_weights = MatrixXd::Zero(V, 2);
  for (int v = 0; v < V; ++v) {
    const double ylow = smoothstep01((-verts(v, 1) / ry - 0.05) * 1.8);
    const double zfront = smoothstep01((verts(v, 2) / rz + 0.1) * 1.2);
    const double jaw = ylow * zfront;
    m.skin_weights(v, 1) = jaw;
    m.skin_weights(v, 0) = 1.0 - jaw;
  }

  // Models are defined at f32 precision (the container stores f32); snapping
  // here makes save/load a strict identity.
  auto snap = [](double& x) { x = static_cast<float>(x); };
  for (auto& x : m.template_vertices.reshaped()) snap(x);
  for (auto& x : m.uv_coords.reshaped()) snap(x);
  for (auto& b : m.shape_basis)
    for (auto& x : b.reshaped()) snap(x);
  for (auto& b : m.expr_basis)
    for (auto& x : b.reshaped()) snap(x);
  for (auto& x : m.joint_regressor.reshaped()) snap(x);
  for (auto& x : m.skin_weights.reshaped()) snap(x);

  m.validate();
  return m;
}

}  // namespace gdhm
