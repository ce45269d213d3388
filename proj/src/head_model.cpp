#include "gdhm/head_model.hpp"

#include <map>

#include "gdhm/rotation.hpp"

namespace gdhm {

void HeadModel::validate() const {
  const int V = num_vertices();
  const int F = num_faces();
  const int Vt = num_uv();
  const int J = num_joints();

  if (V < 3 || F < 1) throw data_error("model: empty mesh");
  if (uv_faces.rows() != F) throw data_error("model: uv_faces count differs from faces");
  for (const auto& b : shape_basis)
    if (b.rows() != V) throw data_error("model: shape_basis vertex count mismatch");
  for (const auto& b : expr_basis)
    if (b.rows() != V) throw data_error("model: expr_basis vertex count mismatch");
  if (joint_regressor.rows() != J || joint_regressor.cols() != V)
    throw data_error("model: joint_regressor shape mismatch");
  if (skin_weights.rows() != V || skin_weights.cols() != J)
    throw data_error("model: skin_weights shape mismatch");
  if (J < 1 || joint_parents[0] != -1)
    throw data_error("model: joint 0 must be the root (parent -1)");
  for (int j = 1; j < J; ++j)
    if (joint_parents[j] < 0 || joint_parents[j] >= j)
      throw data_error("model: joint parents must precede children");

  for (int f = 0; f < F; ++f)
    for (int k = 0; k < 3; ++k) {
      if (faces(f, k) < 0 || faces(f, k) >= V)
        throw data_error("model: face index out of range");
      if (uv_faces(f, k) < 0 || uv_faces(f, k) >= Vt)
        throw data_error("model: uv face index out of range");
    }

  for (int v = 0; v < V; ++v) {
    double sum = 0;
    for (int j = 0; j < J; ++j) {
      const double w = skin_weights(v, j);
      if (w < 0) throw data_error("model: negative skin weight");
      sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-6)
      throw data_error("model: skin weight row does not sum to 1");
  }

  for (const auto& b : shape_basis)
    if (!b.allFinite()) throw data_error("model: non-finite shape basis");
  for (const auto& b : expr_basis)
    if (!b.allFinite()) throw data_error("model: non-finite expression basis");
  if (!template_vertices.allFinite()) throw data_error("model: non-finite template");

  // manifold: each undirected edge on at most two faces
  std::map<std::pair<int, int>, int> edge_count;
  for (int f = 0; f < F; ++f)
    for (int k = 0; k < 3; ++k) {
      int a = faces(f, k), b = faces(f, (k + 1) % 3);
      if (a > b) std::swap(a, b);
      if (++edge_count[{a, b}] > 2)
        throw data_error("model: non-manifold template (edge on >2 faces)");
    }
}

uint64_t HeadModel::topology_hash() const {
  return fnv1a(faces.data(), sizeof(int) * faces.size());
}

bool HeadModel::operator==(const HeadModel& o) const {
  auto eq = [](const auto& a, const auto& b) {
    return a.rows() == b.rows() && a.cols() == b.cols() && a == b;
  };
  if (!eq(template_vertices, o.template_vertices) || !eq(faces, o.faces) ||
      !eq(uv_coords, o.uv_coords) || !eq(uv_faces, o.uv_faces) ||
      !eq(joint_regressor, o.joint_regressor) || !eq(skin_weights, o.skin_weights) ||
      joint_parents != o.joint_parents || shape_basis.size() != o.shape_basis.size() ||
      expr_basis.size() != o.expr_basis.size())
    return false;
  for (size_t i = 0; i < shape_basis.size(); ++i)
    if (!eq(shape_basis[i], o.shape_basis[i])) return false;
  for (size_t i = 0; i < expr_basis.size(); ++i)
    if (!eq(expr_basis[i], o.expr_basis[i])) return false;
  return true;
}

PoseInput PoseInput::zeros(const HeadModel& m) {
  PoseInput p;
  p.shape = VectorXd::Zero(m.num_shape());
  p.expr = VectorXd::Zero(m.num_expr());
  p.joint_rot = MatX3d::Zero(m.num_joints(), 3);
  return p;
}

PoseInput& PoseInput::operator+=(const PoseInput& o) {
  shape += o.shape;
  expr += o.expr;
  joint_rot += o.joint_rot;
  global_rot += o.global_rot;
  global_trans += o.global_trans;
  return *this;
}

AvatarParams AvatarParams::zeros(const HeadModel& m, int n_frames) {
  AvatarParams p;
  p.shape = VectorXd::Zero(m.num_shape());
  p.shape_residual = VectorXd::Zero(m.num_shape());
  p.frames.assign(n_frames, PoseInput::zeros(m));
  p.residuals.assign(n_frames, PoseInput::zeros(m));
  return p;
}

PoseInput AvatarParams::effective(int frame) const {
  PoseInput e = frames[frame];
  e += residuals[frame];
  e.shape = shape + shape_residual;
  return e;
}

MatX3d pose_mesh(const HeadModel& m, const PoseInput& in, PoseCache* cache) {
  const int V = m.num_vertices();
  const int J = m.num_joints();
  if (in.shape.size() != m.num_shape()) throw data_error("pose_mesh: shape length mismatch");
  if (in.expr.size() != m.num_expr())
    throw data_error("pose_mesh: expression length mismatch");
  if (in.joint_rot.rows() != J) throw data_error("pose_mesh: joint count mismatch");

  MatX3d shape_only = m.template_vertices;
  for (int k = 0; k < m.num_shape(); ++k) shape_only += in.shape[k] * m.shape_basis[k];
  MatX3d shaped = shape_only;
  for (int k = 0; k < m.num_expr(); ++k) shaped += in.expr[k] * m.expr_basis[k];

  MatX3d joints = m.joint_regressor * shape_only;

  std::vector<Matrix3d> local_rot(J), g_rot(J), s_rot(J);
  std::vector<Vector3d> g_trans(J), s_trans(J);
  for (int j = 0; j < J; ++j) {
    local_rot[j] = rodrigues(in.joint_rot.row(j).transpose());
    const int p = m.joint_parents[j];
    const Vector3d jpos = joints.row(j).transpose();
    if (p < 0) {
      g_rot[j] = local_rot[j];
      g_trans[j] = jpos;  // rotate about the root joint position
    } else {
      const Vector3d delta = jpos - joints.row(p).transpose();
      g_rot[j] = g_rot[p] * local_rot[j];
      g_trans[j] = g_rot[p] * delta + g_trans[p];
    }
    // remove rest pose: S = G * translate(-joint)
    s_rot[j] = g_rot[j];
    s_trans[j] = g_trans[j] - g_rot[j] * jpos;
  }

  // Deltas from identity rather than a direct weighted sum: identical when
  // weight rows sum to 1, and keeps the rest pose exact even though weights
  // are stored at f32 precision.
  MatX3d skinned(V, 3);
  for (int v = 0; v < V; ++v) {
    const Vector3d x = shaped.row(v).transpose();
    Vector3d acc = x;
    for (int j = 0; j < J; ++j) {
      const double w = m.skin_weights(v, j);
      if (w != 0.0) acc += w * (s_rot[j] * x + s_trans[j] - x);
    }
    skinned.row(v) = acc.transpose();
  }

  const Matrix3d Rg = rodrigues(in.global_rot);
  MatX3d out(V, 3);
  for (int v = 0; v < V; ++v)
    out.row(v) = (Rg * skinned.row(v).transpose() + in.global_trans).transpose();

  if (cache) {
    cache->in = in;
    cache->shaped = std::move(shaped);
    cache->shape_only = std::move(shape_only);
    cache->joints_rest = std::move(joints);
    cache->local_rot = std::move(local_rot);
    cache->g_rot = std::move(g_rot);
    cache->g_trans = std::move(g_trans);
    cache->s_rot = std::move(s_rot);
    cache->s_trans = std::move(s_trans);
    cache->global_rot = Rg;
    cache->skinned = std::move(skinned);
  }
  return out;
}

PoseInput pose_mesh_backward(const HeadModel& m, const PoseCache& c, const MatX3d& d_out) {
  const int V = m.num_vertices();
  const int J = m.num_joints();
  PoseInput g = PoseInput::zeros(m);

  // global transform
  Matrix3d d_Rg = Matrix3d::Zero();
  MatX3d d_skinned(V, 3);
  for (int v = 0; v < V; ++v) {
    const Vector3d dv = d_out.row(v).transpose();
    d_Rg += dv * c.skinned.row(v);
    d_skinned.row(v) = (c.global_rot.transpose() * dv).transpose();
    g.global_trans += dv;
  }
  g.global_rot = rodrigues_backward(c.in.global_rot, c.global_rot, d_Rg);

  // skinning
  MatX3d d_shaped = MatX3d::Zero(V, 3);
  std::vector<Matrix3d> d_s_rot(J, Matrix3d::Zero());
  std::vector<Vector3d> d_s_trans(J, Vector3d::Zero());
  for (int v = 0; v < V; ++v) {
    const Vector3d dv = d_skinned.row(v).transpose();
    const Vector3d x = c.shaped.row(v).transpose();
    Vector3d dx = dv;
    for (int j = 0; j < J; ++j) {
      const double w = m.skin_weights(v, j);
      if (w == 0.0) continue;
      dx += w * (c.s_rot[j].transpose() * dv - dv);
      d_s_rot[j] += (w * dv) * x.transpose();
      d_s_trans[j] += w * dv;
    }
    d_shaped.row(v) = dx.transpose();
  }

  // joint transforms; children processed before parents
  std::vector<Matrix3d> d_g_rot(J, Matrix3d::Zero());
  std::vector<Vector3d> d_g_trans(J, Vector3d::Zero());
  MatX3d d_joints = MatX3d::Zero(J, 3);
  for (int j = 0; j < J; ++j) {
    // S = [G_rot, G_trans - G_rot * joint]
    const Vector3d jpos = c.joints_rest.row(j).transpose();
    d_g_rot[j] += d_s_rot[j] - d_s_trans[j] * jpos.transpose();
    d_g_trans[j] += d_s_trans[j];
    d_joints.row(j) -= (c.g_rot[j].transpose() * d_s_trans[j]).transpose();
  }
  for (int j = J - 1; j >= 0; --j) {
    const int p = m.joint_parents[j];
    const Vector3d jpos = c.joints_rest.row(j).transpose();
    if (p < 0) {
      // G = [R_local, joint]
      g.joint_rot.row(j) =
          rodrigues_backward(c.in.joint_rot.row(j).transpose(), c.local_rot[j], d_g_rot[j])
              .transpose();
      d_joints.row(j) += d_g_trans[j].transpose();
    } else {
      const Vector3d delta = jpos - c.joints_rest.row(p).transpose();
      // G_rot = Gp_rot * L ; G_trans = Gp_rot * delta + Gp_trans
      d_g_rot[p] += d_g_rot[j] * c.local_rot[j].transpose();
      const Matrix3d d_local = c.g_rot[p].transpose() * d_g_rot[j];
      g.joint_rot.row(j) =
          rodrigues_backward(c.in.joint_rot.row(j).transpose(), c.local_rot[j], d_local)
              .transpose();
      d_g_rot[p] += d_g_trans[j] * delta.transpose();
      const Vector3d d_delta = c.g_rot[p].transpose() * d_g_trans[j];
      d_g_trans[p] += d_g_trans[j];
      d_joints.row(j) += d_delta.transpose();
      d_joints.row(p) -= d_delta.transpose();
    }
  }

  // joints = regressor * shape_only
  MatX3d d_shape_only = m.joint_regressor.transpose() * d_joints;

  // blendshape readout: shaped = shape_only + expr offsets;
  // shape_only = template + shape offsets
  for (int k = 0; k < m.num_expr(); ++k)
    g.expr[k] = (m.expr_basis[k].array() * d_shaped.array()).sum();
  d_shape_only += d_shaped;
  for (int k = 0; k < m.num_shape(); ++k)
    g.shape[k] = (m.shape_basis[k].array() * d_shape_only.array()).sum();

  return g;
}

MatX3d canonical_expression_mesh(const HeadModel& m, const VectorXd& shape,
                                 const VectorXd& expr) {
  if (shape.size() != m.num_shape())
    throw data_error("canonical_expression_mesh: shape length mismatch");
  if (expr.size() != m.num_expr())
    throw data_error("canonical_expression_mesh: expression length mismatch");
  MatX3d v = m.template_vertices;
  for (int k = 0; k < m.num_shape(); ++k) v += shape[k] * m.shape_basis[k];
  for (int k = 0; k < m.num_expr(); ++k) v += expr[k] * m.expr_basis[k];
  return v;
}

MatX3d vertex_normals(const MatX3d& vertices, const MatX3i& faces,
                      std::vector<int>* degenerate) {
  const int V = static_cast<int>(vertices.rows());
  MatX3d acc = MatX3d::Zero(V, 3);
  for (int f = 0; f < faces.rows(); ++f) {
    const Vector3d a = vertices.row(faces(f, 0)).transpose();
    const Vector3d b = vertices.row(faces(f, 1)).transpose();
    const Vector3d c = vertices.row(faces(f, 2)).transpose();
    const Vector3d n = (b - a).cross(c - a);  // |n| = 2 * area; zero-area adds nothing
    for (int k = 0; k < 3; ++k) acc.row(faces(f, k)) += n.transpose();
  }
  MatX3d out(V, 3);
  for (int v = 0; v < V; ++v) {
    const double len = acc.row(v).norm();
    if (len < 1e-20) {
      out.row(v) << 0, 0, 1;
      if (degenerate) degenerate->push_back(v);
    } else {
      out.row(v) = acc.row(v) / len;
    }
  }
  return out;
}

}  // namespace gdhm
