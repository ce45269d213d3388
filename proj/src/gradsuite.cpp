#include "gdhm/gradsuite.hpp"

#include "gdhm/head_model.hpp"
#include "gdhm/losses.hpp"
#include "gdhm/metrics.hpp"
#include "gdhm/splat_render.hpp"

namespace gdhm {

namespace {

struct OpResult {
  double rel_err;
};

// random linear functional helpers
VectorXd rand_vec(Rng& rng, int n, double scale = 1.0) {
  VectorXd v(n);
  for (auto& x : v) x = scale * rng.normal();
  return v;
}

double check_pose_mesh(uint64_t seed) {
  Rng rng(seed);
  const HeadModel m = make_toy_model(seed * 3 + 1, 160, 2, 2);
  const int J = m.num_joints();
  const int dim = m.num_shape() + m.num_expr() + 3 * J + 6;
  VectorXd x0 = rand_vec(rng, dim, 0.25);
  MatX3d upstream(m.num_vertices(), 3);
  for (auto& v : upstream.reshaped()) v = rng.normal();

  auto unpack = [&](const VectorXd& x) {
    PoseInput p = PoseInput::zeros(m);
    int o = 0;
    p.shape = x.segment(o, m.num_shape());
    o += m.num_shape();
    p.expr = x.segment(o, m.num_expr());
    o += m.num_expr();
    for (int j = 0; j < J; ++j, o += 3) p.joint_rot.row(j) = x.segment(o, 3).transpose();
    p.global_rot = x.segment(o, 3);
    o += 3;
    p.global_trans = x.segment(o, 3);
    return p;
  };
  auto f = [&](const VectorXd& x) {
    return (pose_mesh(m, unpack(x)).array() * upstream.array()).sum();
  };
  PoseCache cache;
  pose_mesh(m, unpack(x0), &cache);
  const PoseInput g = pose_mesh_backward(m, cache, upstream);
  VectorXd analytic(dim);
  int o = 0;
  analytic.segment(o, m.num_shape()) = g.shape;
  o += m.num_shape();
  analytic.segment(o, m.num_expr()) = g.expr;
  o += m.num_expr();
  for (int j = 0; j < J; ++j, o += 3) analytic.segment(o, 3) = g.joint_rot.row(j).transpose();
  analytic.segment(o, 3) = g.global_rot;
  o += 3;
  analytic.segment(o, 3) = g.global_trans;
  return grad_check(f, x0, analytic, 1e-5).max_rel_err;
}

double check_triangle_frame(uint64_t seed) {
  Rng rng(seed);
  VectorXd x0(9);
  do {
    x0 = rand_vec(rng, 9, 0.4);
  } while (((Vector3d(x0[3], x0[4], x0[5]) - Vector3d(x0[0], x0[1], x0[2]))
                .cross(Vector3d(x0[6], x0[7], x0[8]) - Vector3d(x0[0], x0[1], x0[2])))
               .norm() < 0.02);
  Matrix3d u_rot;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) u_rot(i, j) = rng.normal();
  const Vector3d u_origin = rng.normal3();
  const double u_scale = rng.normal();

  auto f = [&](const VectorXd& x) {
    const TriangleFrame fr = triangle_frame(Vector3d(x[0], x[1], x[2]),
                                            Vector3d(x[3], x[4], x[5]),
                                            Vector3d(x[6], x[7], x[8]));
    return (fr.rotation.array() * u_rot.array()).sum() + fr.origin.dot(u_origin) +
           fr.scale * u_scale;
  };
  Vector3d d0 = Vector3d::Zero(), d1 = Vector3d::Zero(), d2 = Vector3d::Zero();
  triangle_frame_backward(Vector3d(x0[0], x0[1], x0[2]), Vector3d(x0[3], x0[4], x0[5]),
                          Vector3d(x0[6], x0[7], x0[8]), u_rot, u_origin, u_scale, d0, d1, d2);
  VectorXd analytic(9);
  analytic << d0, d1, d2;
  return grad_check(f, x0, analytic, 1e-6).max_rel_err;
}

struct MiniScene {
  MatX3i faces;
  MatX3d verts;
  GaussianCloud cloud;
  Camera cam;
};

MiniScene make_scene(Rng& rng, int n_gauss, int res) {
  MiniScene s;
  const int n_faces = (n_gauss + 1) / 2;
  s.faces.resize(n_faces, 3);
  s.verts.resize(3 * n_faces, 3);
  for (int f = 0; f < n_faces; ++f) {
    const Vector3d center(0.2 * rng.normal(), 0.2 * rng.normal(), 0.25 * rng.normal());
    for (int k = 0; k < 3; ++k) {
      s.verts.row(3 * f + k) = (center + 0.22 * rng.normal3()).transpose();
      s.faces(f, k) = 3 * f + k;
    }
    const Vector3d a = s.verts.row(3 * f).transpose(), b = s.verts.row(3 * f + 1).transpose(),
                   c = s.verts.row(3 * f + 2).transpose();
    if (0.5 * (b - a).cross(c - a).norm() < 0.008) --f;
  }
  s.cloud = init_cloud(s.faces, s.verts, 2, rng.next_u64());
  std::vector<int> drop;
  for (int i = n_gauss; i < s.cloud.size(); ++i) drop.push_back(i);
  s.cloud.remove(drop);
  for (int i = 0; i < s.cloud.size(); ++i) {
    for (int k = 0; k < 3; ++k) s.cloud.mu(i, k) = 0.25 * rng.normal();
    s.cloud.quat.row(i) = Vector4d(1 + 0.3 * rng.normal(), 0.3 * rng.normal(),
                                   0.3 * rng.normal(), 0.3 * rng.normal())
                              .transpose();
    for (int k = 0; k < 3; ++k) s.cloud.log_scale(i, k) = std::log(0.35) + 0.5 * rng.normal();
    s.cloud.opacity_logit[i] = logit(rng.uniform(0.1, 0.8));
    for (int k = 0; k < 3; ++k) s.cloud.color_raw(i, k) = rng.normal();
  }
  s.cam = Camera::look_at(Vector3d(0.1 * rng.normal(), 0.1 * rng.normal(), -2.0),
                          Vector3d::Zero(), Vector3d::UnitY(), 0.8 * res, res, res);
  return s;
}

int pack_scene(const MiniScene& s, VectorXd& x) {
  const int n = s.cloud.size();
  const int nv = static_cast<int>(s.verts.rows());
  x.resize(14 * n + 3 * nv);
  int o = 0;
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < 3; ++k) x[o++] = s.cloud.mu(i, k);
    for (int k = 0; k < 4; ++k) x[o++] = s.cloud.quat(i, k);
    for (int k = 0; k < 3; ++k) x[o++] = s.cloud.log_scale(i, k);
    x[o++] = s.cloud.opacity_logit[i];
    for (int k = 0; k < 3; ++k) x[o++] = s.cloud.color_raw(i, k);
  }
  for (int v = 0; v < nv; ++v)
    for (int k = 0; k < 3; ++k) x[o++] = s.verts(v, k);
  return o;
}

void unpack_scene(const VectorXd& x, MiniScene& s) {
  const int n = s.cloud.size();
  int o = 0;
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < 3; ++k) s.cloud.mu(i, k) = x[o++];
    for (int k = 0; k < 4; ++k) s.cloud.quat(i, k) = x[o++];
    for (int k = 0; k < 3; ++k) s.cloud.log_scale(i, k) = x[o++];
    s.cloud.opacity_logit[i] = x[o++];
    for (int k = 0; k < 3; ++k) s.cloud.color_raw(i, k) = x[o++];
  }
  for (int v = 0; v < s.verts.rows(); ++v)
    for (int k = 0; k < 3; ++k) s.verts(v, k) = x[o++];
}

double check_promote(uint64_t seed) {
  Rng rng(seed);
  MiniScene s = make_scene(rng, 4, 8);
  WorldGrads up;
  up.init(s.cloud.size());
  for (auto& v : up.d_position.reshaped()) v = rng.normal();
  for (auto& v : up.d_scale.reshaped()) v = rng.normal();
  for (auto& r : up.d_rotation)
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) r(i, j) = rng.normal();

  VectorXd x0;
  pack_scene(s, x0);
  auto f = [&](const VectorXd& x) {
    MiniScene t = s;
    unpack_scene(x, t);
    const WorldGaussians w = promote_to_world(t.cloud, t.faces, t.verts);
    double L = (w.position.array() * up.d_position.array()).sum() +
               (w.scale.array() * up.d_scale.array()).sum();
    for (int g = 0; g < t.cloud.size(); ++g)
      L += (w.rotation[g].array() * up.d_rotation[g].array()).sum();
    return L;
  };
  PromoteCache cache;
  promote_to_world(s.cloud, s.faces, s.verts, &cache);
  CloudGrads dc;
  dc.init(s.cloud.size());
  MatX3d dv = MatX3d::Zero(s.verts.rows(), 3);
  promote_backward(s.cloud, s.faces, s.verts, cache, up, dc, dv);
  VectorXd analytic(x0.size());
  int o = 0;
  for (int i = 0; i < s.cloud.size(); ++i) {
    for (int k = 0; k < 3; ++k) analytic[o++] = dc.d_mu(i, k);
    for (int k = 0; k < 4; ++k) analytic[o++] = dc.d_quat(i, k);
    for (int k = 0; k < 3; ++k) analytic[o++] = dc.d_log_scale(i, k);
    analytic[o++] = 0;  // opacity: promotion does not touch it
    for (int k = 0; k < 3; ++k) analytic[o++] = 0;  // color likewise
  }
  for (int v = 0; v < s.verts.rows(); ++v)
    for (int k = 0; k < 3; ++k) analytic[o++] = dv(v, k);
  return grad_check(f, x0, analytic, 1e-6).max_rel_err;
}

double check_render(uint64_t seed) {
  Rng rng(seed);
  MiniScene s = make_scene(rng, 5, 12);
  Image ur(12, 12, 3), un(12, 12, 3), ua(12, 12, 1);
  for (auto& v : ur.data) v = rng.normal();
  for (auto& v : un.data) v = rng.normal();
  for (auto& v : ua.data) v = rng.normal();

  VectorXd x0;
  pack_scene(s, x0);
  auto f = [&](const VectorXd& x) {
    MiniScene t = s;
    unpack_scene(x, t);
    const RenderOutput out = render(t.cloud, t.faces, t.verts, t.cam);
    double L = 0;
    for (size_t i = 0; i < out.rgb.data.size(); ++i) L += out.rgb.data[i] * ur.data[i];
    for (size_t i = 0; i < out.normal.data.size(); ++i) L += out.normal.data[i] * un.data[i];
    for (size_t i = 0; i < out.alpha.data.size(); ++i) L += out.alpha.data[i] * ua.data[i];
    return L;
  };
  RenderCache cache;
  render(s.cloud, s.faces, s.verts, s.cam, {}, &cache);
  CloudGrads g;
  g.init(s.cloud.size());
  MatX3d dv = MatX3d::Zero(s.verts.rows(), 3);
  render_backward(s.cloud, s.faces, s.verts, s.cam, cache, ur, un, ua, g, dv);
  VectorXd analytic(x0.size());
  int o = 0;
  for (int i = 0; i < s.cloud.size(); ++i) {
    for (int k = 0; k < 3; ++k) analytic[o++] = g.d_mu(i, k);
    for (int k = 0; k < 4; ++k) analytic[o++] = g.d_quat(i, k);
    for (int k = 0; k < 3; ++k) analytic[o++] = g.d_log_scale(i, k);
    analytic[o++] = g.d_opacity_logit[i];
    for (int k = 0; k < 3; ++k) analytic[o++] = g.d_color_raw(i, k);
  }
  for (int v = 0; v < s.verts.rows(); ++v)
    for (int k = 0; k < 3; ++k) analytic[o++] = dv(v, k);
  return grad_check(f, x0, analytic, 1e-5).max_rel_err;
}

double check_deform_field(uint64_t seed) {
  Rng rng(seed);
  DeformationField field = DeformationField::create(6, 16, seed * 5 + 1);
  std::vector<double> flat(field.num_params());
  field.to_flat(flat.data());
  for (auto& v : flat) v += 0.25 * rng.normal();
  field.from_flat(flat.data());
  MatX3d canon(10, 3);
  for (auto& v : canon.reshaped()) v = 0.1 * rng.normal();
  VectorXd latent = rand_vec(rng, 6);
  MatX3d upstream(10, 3);
  for (auto& v : upstream.reshaped()) v = rng.normal();

  const int dim = field.num_params() + 6;
  VectorXd x0(dim);
  field.to_flat(x0.data());
  x0.tail(6) = latent;
  auto f = [&](const VectorXd& x) {
    DeformationField t = field;
    t.from_flat(x.data());
    return (t.deform_vertices(canon, x.tail(6)).array() * upstream.array()).sum();
  };
  DeformationField::Cache cache;
  field.deform_vertices(canon, latent, &cache);
  const DeformationField::Grads g = field.backward(cache, upstream);
  VectorXd analytic(dim);
  DeformationField::grads_to_flat(g, analytic.data());
  analytic.tail(6) = g.latent;
  return grad_check(f, x0, analytic, 1e-5).max_rel_err;
}

double check_dynamics_field(uint64_t seed) {
  Rng rng(seed);
  DynamicsField field = DynamicsField::create(6, 5, 8, 16, seed * 7 + 2);
  std::vector<double> flat(field.num_mlp_params());
  field.mlp.to_flat(flat.data());
  for (auto& v : flat) v += 0.25 * rng.normal();
  field.mlp.from_flat(flat.data());
  for (auto& v : field.codes.reshaped()) v = 0.2 * rng.normal();
  VectorXd latent = rand_vec(rng, 5);
  ResidualBundle up;
  up.init(6);
  for (auto& v : up.d_mu.reshaped()) v = rng.normal();
  for (auto& v : up.d_quat.reshaped()) v = rng.normal();
  for (auto& v : up.d_scale.reshaped()) v = rng.normal();
  for (auto& v : up.d_opacity) v = rng.normal();
  for (auto& v : up.d_color.reshaped()) v = rng.normal();

  const int n_codes = static_cast<int>(field.codes.size());
  const int dim = field.num_mlp_params() + n_codes + 5;
  VectorXd x0(dim);
  field.mlp.to_flat(x0.data());
  std::copy(field.codes.data(), field.codes.data() + n_codes,
            x0.data() + field.num_mlp_params());
  x0.tail(5) = latent;
  auto f = [&](const VectorXd& x) {
    DynamicsField t = field;
    t.mlp.from_flat(x.data());
    std::copy(x.data() + t.num_mlp_params(), x.data() + t.num_mlp_params() + n_codes,
              t.codes.data());
    const ResidualBundle r = t.dynamics_residuals(x.tail(5));
    return (r.d_mu.array() * up.d_mu.array()).sum() +
           (r.d_quat.array() * up.d_quat.array()).sum() +
           (r.d_scale.array() * up.d_scale.array()).sum() + r.d_opacity.dot(up.d_opacity) +
           (r.d_color.array() * up.d_color.array()).sum();
  };
  DynamicsField::Cache cache;
  field.dynamics_residuals(latent, &cache);
  const DynamicsField::Grads g = field.backward(cache, up);
  VectorXd analytic(dim);
  Mlp::grads_to_flat(g.mlp, analytic.data());
  std::copy(g.codes.data(), g.codes.data() + n_codes, analytic.data() + field.num_mlp_params());
  analytic.tail(5) = g.latent;
  return grad_check(f, x0, analytic, 1e-5).max_rel_err;
}

double check_photometric(uint64_t seed) {
  Rng rng(seed);
  const int h = 14, w = 13;
  Image a(h, w, 3), b(h, w, 3);
  for (auto& v : a.data) v = rng.uniform();
  for (auto& v : b.data) v = rng.uniform();
  VectorXd x0 = Eigen::Map<VectorXd>(a.data.data(), a.data.size());
  auto f = [&](const VectorXd& x) {
    Image t = a;
    std::copy(x.data(), x.data() + x.size(), t.data.data());
    return photometric_loss(t, b, 0.8, 0.2);
  };
  PhotometricCache cache;
  photometric_loss(a, b, 0.8, 0.2, &cache);
  Image g(h, w, 3);
  photometric_backward(a, b, 0.8, 0.2, cache, g);
  const VectorXd analytic = Eigen::Map<VectorXd>(g.data.data(), g.data.size());
  return grad_check(f, x0, analytic, 1e-6).max_rel_err;
}

double check_normal_loss(uint64_t seed) {
  Rng rng(seed);
  const int h = 10, w = 11;
  Image nhat(h, w, 3), n(h, w, 3), alpha(h, w, 1);
  for (auto& v : nhat.data) v = rng.uniform(-1, 1);
  for (auto& v : n.data) v = rng.uniform(-1, 1);
  for (auto& v : alpha.data) v = rng.uniform();
  VectorXd x0 = Eigen::Map<VectorXd>(nhat.data.data(), nhat.data.size());
  auto f = [&](const VectorXd& x) {
    Image t = nhat;
    std::copy(x.data(), x.data() + x.size(), t.data.data());
    return normal_loss(t, n, alpha, 0.1);
  };
  Image g(h, w, 3);
  normal_loss_backward(nhat, n, alpha, 0.1, g);
  const VectorXd analytic = Eigen::Map<VectorXd>(g.data.data(), g.data.size());
  return grad_check(f, x0, analytic, 1e-7).max_rel_err;
}

double check_regularizers(uint64_t seed) {
  Rng rng(seed);
  MatX3d mu(8, 3);
  for (auto& v : mu.reshaped()) {
    // keep values away from the hinge at |x| = 1 so central differences are valid
    do {
      v = 1.6 * rng.normal();
    } while (std::abs(std::abs(v) - 1.0) < 0.01);
  }
  VectorXd x0 = Eigen::Map<VectorXd>(mu.data(), mu.size());
  auto f = [&](const VectorXd& x) {
    MatX3d t = mu;
    std::copy(x.data(), x.data() + x.size(), t.data());
    return threshold_l1(t, 1.0);
  };
  MatX3d g = MatX3d::Zero(8, 3);
  threshold_l1_backward(mu, 1.0, 1.0, g);
  const VectorXd analytic = Eigen::Map<VectorXd>(g.data(), g.size());
  double err = grad_check(f, x0, analytic, 1e-6).max_rel_err;

  ResidualBundle r;
  r.init(5);
  for (auto& v : r.d_mu.reshaped()) v = rng.normal();
  for (auto& v : r.d_quat.reshaped()) v = rng.normal();
  VectorXd y0 = Eigen::Map<VectorXd>(r.d_mu.data(), r.d_mu.size());
  auto f2 = [&](const VectorXd& x) {
    ResidualBundle t = r;
    std::copy(x.data(), x.data() + x.size(), t.d_mu.data());
    return residual_sq_mean(t);
  };
  ResidualBundle gr;
  gr.init(5);
  residual_sq_mean_backward(r, 1.0, gr);
  const VectorXd analytic2 = Eigen::Map<VectorXd>(gr.d_mu.data(), gr.d_mu.size());
  err = std::max(err, grad_check(f2, y0, analytic2, 1e-6).max_rel_err);
  return err;
}

}  // namespace

std::vector<GradSuiteEntry> run_grad_suite(int n_seeds, uint64_t base_seed) {
  struct Op {
    const char* name;
    double tol;
    double (*fn)(uint64_t);
  };
  const Op ops[] = {
      {"pose_mesh", 1e-4, check_pose_mesh},
      {"triangle_frame", 1e-4, check_triangle_frame},
      {"promote_to_world", 1e-4, check_promote},
      {"render", 1e-3, check_render},
      {"deformation_field", 1e-4, check_deform_field},
      {"dynamics_field", 1e-4, check_dynamics_field},
      {"photometric_loss", 1e-4, check_photometric},
      {"normal_loss", 1e-4, check_normal_loss},
      {"regularizers", 1e-4, check_regularizers},
  };
  std::vector<GradSuiteEntry> results;
  for (const Op& op : ops) {
    GradSuiteEntry e;
    e.op = op.name;
    e.tolerance = op.tol;
    e.seeds = n_seeds;
    for (int s = 0; s < n_seeds; ++s)
      e.max_rel_err = std::max(e.max_rel_err, op.fn(base_seed + 31 * s));
    e.pass = e.max_rel_err < op.tol;
    results.push_back(std::move(e));
  }
  return results;
}

}  // namespace gdhm
