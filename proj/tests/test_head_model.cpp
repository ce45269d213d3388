#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <set>

#include "gdhm/head_model.hpp"
#include "gdhm/io_gdhm.hpp"
#include "support/reference_impls.hpp"

using namespace gdhm;

namespace {

PoseInput random_pose(Rng& rng, const HeadModel& m, double mag = 0.3) {
  PoseInput p = PoseInput::zeros(m);
  for (int k = 0; k < m.num_shape(); ++k) p.shape[k] = mag * rng.normal();
  for (int k = 0; k < m.num_expr(); ++k) p.expr[k] = mag * rng.normal();
  for (int j = 0; j < m.num_joints(); ++j)
    p.joint_rot.row(j) = (0.3 * mag * rng.normal3()).transpose();
  p.global_rot = 0.5 * mag * rng.normal3();
  p.global_trans = 0.1 * mag * rng.normal3();
  return p;
}

std::string temp_path(const char* name) {
  return std::string("/tmp/gdhm_test_") + name;
}

}  // namespace

TEST_CASE("toy model is deterministic and closed") {
  const HeadModel a = make_toy_model(42, 300, 4, 3);
  const HeadModel b = make_toy_model(42, 300, 4, 3);
  CHECK(a == b);
  const HeadModel c = make_toy_model(43, 300, 4, 3);
  CHECK_FALSE(a == c);

  // Euler characteristic of a closed genus-0 surface
  for (uint64_t seed : {1ull, 7ull, 99ull}) {
    const HeadModel m = make_toy_model(seed, 260, 2, 2);
    std::set<std::pair<int, int>> edges;
    for (int f = 0; f < m.num_faces(); ++f)
      for (int k = 0; k < 3; ++k) {
        int u = m.faces(f, k), v = m.faces(f, (k + 1) % 3);
        if (u > v) std::swap(u, v);
        edges.insert({u, v});
      }
    const int chi = m.num_vertices() - static_cast<int>(edges.size()) + m.num_faces();
    CHECK(chi == 2);
  }
}

TEST_CASE("toy model with empty bases poses to template") {
  const HeadModel m = make_toy_model(5, 200, 0, 0);
  PoseInput p = PoseInput::zeros(m);
  const MatX3d out = pose_mesh(m, p);
  CHECK((out - m.template_vertices).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("model save/load round-trip is an identity") {
  const HeadModel m = make_toy_model(11, 320, 3, 2);
  const std::string path = temp_path("model.gdhm");
  save_model(path, m);
  const HeadModel r = load_model(path);
  CHECK(r == m);

  // write -> read -> write produces identical bytes
  const std::string path2 = temp_path("model2.gdhm");
  save_model(path2, r);
  std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
  std::string b1((std::istreambuf_iterator<char>(f1)), {});
  std::string b2((std::istreambuf_iterator<char>(f2)), {});
  CHECK(b1 == b2);
  std::remove(path.c_str());
  std::remove(path2.c_str());
}

TEST_CASE("invalid models are rejected with distinct errors") {
  HeadModel m = make_toy_model(3, 220, 2, 2);
  const std::string path = temp_path("bad.gdhm");

  SUBCASE("skin weight row sum") {
    m.skin_weights(0, 0) = 0.25;
    m.skin_weights(0, 1) = 0.25;
    save_model(path, m);
    CHECK_THROWS_WITH_AS(load_model(path), doctest::Contains("skin weight"), data_error);
  }
  SUBCASE("face index out of range") {
    m.faces(0, 0) = m.num_vertices() + 3;
    save_model(path, m);
    CHECK_THROWS_WITH_AS(load_model(path), doctest::Contains("face index"), data_error);
  }
  SUBCASE("non-manifold template") {
    // duplicate a face so one edge is shared by three faces
    MatX3i faces(m.num_faces() + 1, 3);
    faces.topRows(m.num_faces()) = m.faces;
    faces.row(m.num_faces()) = m.faces.row(0);
    m.faces = faces;
    MatX3i uvf(m.uv_faces.rows() + 1, 3);
    uvf.topRows(m.uv_faces.rows()) = m.uv_faces;
    uvf.row(uvf.rows() - 1) = m.uv_faces.row(0);
    m.uv_faces = uvf;
    save_model(path, m);
    CHECK_THROWS_WITH_AS(load_model(path), doctest::Contains("non-manifold"), data_error);
  }
  SUBCASE("bad magic") {
    save_model(path, m);
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.write("JUNK", 4);
    f.close();
    CHECK_THROWS_WITH_AS(load_model(path), doctest::Contains("malformed header"), data_error);
  }
  std::remove(path.c_str());
}

TEST_CASE("truncated model files fail with a parse error naming the spot") {
  const HeadModel m = make_toy_model(9, 150, 1, 1);
  const std::string path = temp_path("trunc.gdhm");
  save_model(path, m);
  std::ifstream f(path, std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(f)), {});
  f.close();

  // every strict prefix must fail; check a sweep plus the first bytes
  std::vector<size_t> cuts = {0, 1, 3, 4, 7, 8, 11, 12};
  for (size_t c = 16; c < bytes.size(); c += 199) cuts.push_back(c);
  cuts.push_back(bytes.size() - 1);
  const std::string tpath = temp_path("trunc_cut.gdhm");
  for (size_t cut : cuts) {
    std::ofstream out(tpath, std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(cut));
    out.close();
    CHECK_THROWS_AS(load_model(tpath), data_error);
    if (cut > 12) {
      try {
        load_model(tpath);
      } catch (const data_error& e) {
        CHECK(std::string(e.what()).find("chunk") != std::string::npos);
      }
    }
  }
  std::remove(path.c_str());
  std::remove(tpath.c_str());
}

TEST_CASE("pose_mesh rest pose and rigid motion") {
  const HeadModel m = make_toy_model(21, 300, 3, 3);
  PoseInput p = PoseInput::zeros(m);
  CHECK((pose_mesh(m, p) - m.template_vertices).cwiseAbs().maxCoeff() == 0.0);

  p.global_trans = Vector3d(0.03, -0.02, 0.4);
  const MatX3d out = pose_mesh(m, p);
  MatX3d expect = m.template_vertices;
  expect.rowwise() += p.global_trans.transpose();
  CHECK((out - expect).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("pose_mesh matches the independent straight-line oracle") {
  Rng rng(100);
  for (int trial = 0; trial < 5; ++trial) {
    const HeadModel m = make_toy_model(200 + trial, 280, 3, 2);
    const PoseInput p = random_pose(rng, m);
    const MatX3d got = pose_mesh(m, p);
    const MatX3d want = testref::ref_pose_mesh(m, p);
    CHECK((got - want).cwiseAbs().maxCoeff() < 2e-8);  // formulation rounding with f32 weights
  }
}

TEST_CASE("pose_mesh is affine in blendshape coefficients at fixed pose") {
  Rng rng(7);
  const HeadModel m = make_toy_model(77, 260, 4, 4);
  PoseInput base = PoseInput::zeros(m);
  base.global_rot = Vector3d(0.2, -0.1, 0.3);
  base.global_trans = Vector3d(0.01, 0.02, -0.03);

  VectorXd p1(m.num_expr()), p2(m.num_expr());
  for (int i = 0; i < m.num_expr(); ++i) {
    p1[i] = rng.normal();
    p2[i] = rng.normal();
  }
  const double a = 0.7, b = -1.3;

  auto eval = [&](const VectorXd& e) {
    PoseInput p = base;
    p.expr = e;
    return pose_mesh(m, p);
  };
  const MatX3d lhs = eval(a * p1 + b * p2);
  const MatX3d rhs = a * eval(p1) + b * eval(p2) - (a + b - 1) * eval(VectorXd::Zero(m.num_expr()));
  CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("canonical expression mesh") {
  const HeadModel m = make_toy_model(31, 260, 3, 3);
  Rng rng(5);
  VectorXd shape(m.num_shape());
  for (int i = 0; i < shape.size(); ++i) shape[i] = 0.4 * rng.normal();

  SUBCASE("zero expression gives shaped template") {
    MatX3d want = m.template_vertices;
    for (int k = 0; k < m.num_shape(); ++k) want += shape[k] * m.shape_basis[k];
    const MatX3d got = canonical_expression_mesh(m, shape, VectorXd::Zero(m.num_expr()));
    CHECK((got - want).cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("unit vector reads out one basis column") {
    VectorXd e = VectorXd::Zero(m.num_expr());
    e[1] = 1.0;
    const MatX3d base = canonical_expression_mesh(m, shape, VectorXd::Zero(m.num_expr()));
    const MatX3d got = canonical_expression_mesh(m, shape, e);
    CHECK((got - base - m.expr_basis[1]).cwiseAbs().maxCoeff() < 1e-12);
  }

  SUBCASE("pose_mesh equals skinning+global applied to the canonical mesh") {
    Rng rng2(17);
    PoseInput p = random_pose(rng2, m);
    p.shape = shape;
    PoseCache cache;
    const MatX3d posed = pose_mesh(m, p, &cache);
    const MatX3d canon = canonical_expression_mesh(m, shape, p.expr);
    MatX3d composed(m.num_vertices(), 3);
    for (int v = 0; v < m.num_vertices(); ++v) {
      Vector3d acc = Vector3d::Zero();
      for (int j = 0; j < m.num_joints(); ++j)
        acc += m.skin_weights(v, j) *
               (cache.s_rot[j] * canon.row(v).transpose() + cache.s_trans[j]);
      composed.row(v) = (cache.global_rot * acc + p.global_trans).transpose();
    }
    CHECK((posed - composed).cwiseAbs().maxCoeff() < 2e-8);
  }
}

TEST_CASE("residuals at zero leave effective parameters bit-exact") {
  const HeadModel m = make_toy_model(51, 200, 3, 2);
  AvatarParams params = AvatarParams::zeros(m, 4);
  Rng rng(3);
  for (int i = 0; i < m.num_shape(); ++i) params.shape[i] = rng.normal();
  for (auto& f : params.frames) {
    for (int i = 0; i < m.num_expr(); ++i) f.expr[i] = rng.normal();
    f.joint_rot = 0.2 * MatX3d::Random(m.num_joints(), 3);
    f.global_rot = rng.normal3();
    f.global_trans = rng.normal3();
  }
  for (int t = 0; t < params.num_frames(); ++t) {
    const PoseInput e = params.effective(t);
    CHECK(e.shape == params.shape);
    CHECK(e.expr == params.frames[t].expr);
    CHECK(e.joint_rot == params.frames[t].joint_rot);
    CHECK(e.global_rot == params.frames[t].global_rot);
    CHECK(e.global_trans == params.frames[t].global_trans);
  }
}

TEST_CASE("pose_mesh gradients match finite differences") {
  Rng rng(900);
  for (int trial = 0; trial < 3; ++trial) {
    const HeadModel m = make_toy_model(400 + trial, 180, 2, 2);
    PoseInput p = random_pose(rng, m);
    MatX3d upstream(m.num_vertices(), 3);
    for (auto& x : upstream.reshaped()) x = rng.normal();

    auto loss = [&](const PoseInput& q) {
      return (pose_mesh(m, q).array() * upstream.array()).sum();
    };
    PoseCache cache;
    pose_mesh(m, p, &cache);
    const PoseInput g = pose_mesh_backward(m, cache, upstream);

    const double h = 1e-5;
    auto check_fd = [&](double* x, double analytic) {
      const double saved = *x;
      *x = saved + h;
      const double lp = loss(p);
      *x = saved - h;
      const double lm = loss(p);
      *x = saved;
      const double fd = (lp - lm) / (2 * h);
      CHECK(std::abs(fd - analytic) <
            1e-4 * std::max({std::abs(fd), std::abs(analytic), 1e-8}));
    };
    for (int k = 0; k < m.num_shape(); ++k) check_fd(&p.shape[k], g.shape[k]);
    for (int k = 0; k < m.num_expr(); ++k) check_fd(&p.expr[k], g.expr[k]);
    for (int j = 0; j < m.num_joints(); ++j)
      for (int c = 0; c < 3; ++c) check_fd(&p.joint_rot(j, c), g.joint_rot(j, c));
    for (int c = 0; c < 3; ++c) check_fd(&p.global_rot[c], g.global_rot[c]);
    for (int c = 0; c < 3; ++c) check_fd(&p.global_trans[c], g.global_trans[c]);
  }
}

TEST_CASE("vertex normals") {
  SUBCASE("unit cube corners, diagonals through the corner") {
    MatX3d v(8, 3);
    v << 0, 0, 0, 1, 0, 0, 0, 1, 0, 1, 1, 0, 0, 0, 1, 1, 0, 1, 0, 1, 1, 1, 1, 1;
    // each face split along the diagonal through (1,1,1) or (0,0,0),
    // wound outward
    MatX3i f(12, 3);
    f << 7, 1, 3, 7, 5, 1,  // x = 1
        0, 6, 2, 0, 4, 6,   // x = 0
        7, 4, 5, 7, 6, 4,   // z = 1
        0, 3, 1, 0, 2, 3,   // z = 0
        7, 3, 2, 7, 2, 6,   // y = 1
        0, 5, 4, 0, 1, 5;   // y = 0
    const MatX3d n = vertex_normals(v, f);
    const double s = 1.0 / std::sqrt(3.0);
    CHECK((n.row(7) - Eigen::RowVector3d(s, s, s)).norm() < 1e-12);
    CHECK((n.row(0) - Eigen::RowVector3d(-s, -s, -s)).norm() < 1e-12);

    // independent oracle: area-weighted sum over incident faces for all verts
    MatX3d acc = MatX3d::Zero(8, 3);
    for (int i = 0; i < 12; ++i) {
      const Vector3d a = v.row(f(i, 0)).transpose(), b = v.row(f(i, 1)).transpose(),
                     c = v.row(f(i, 2)).transpose();
      const Vector3d fn = (b - a).cross(c - a);
      const double area = 0.5 * fn.norm();
      for (int k = 0; k < 3; ++k) acc.row(f(i, k)) += (area * fn.normalized()).transpose();
    }
    for (int i = 0; i < 8; ++i)
      CHECK((n.row(i).transpose() - acc.row(i).transpose().normalized()).norm() < 1e-12);
  }

  SUBCASE("flat fan in z=0") {
    MatX3d v(5, 3);
    v << 0, 0, 0, 1, 0, 0, 0.5, 1, 0, -0.5, 1, 0, -1, 0, 0;
    MatX3i f(3, 3);
    f << 0, 1, 2, 0, 2, 3, 0, 3, 4;
    const MatX3d n = vertex_normals(v, f);
    for (int i = 0; i < 5; ++i) CHECK((n.row(i) - Eigen::RowVector3d(0, 0, 1)).norm() < 1e-12);
  }

  SUBCASE("unit length and degenerate flagging") {
    const HeadModel m = make_toy_model(8, 240, 2, 2);
    const MatX3d n = vertex_normals(m.template_vertices, m.faces);
    for (int i = 0; i < n.rows(); ++i) CHECK(std::abs(n.row(i).norm() - 1.0) < 1e-6);

    // a vertex whose faces are all zero-area gets +z and a flag
    MatX3d v(4, 3);
    v << 0, 0, 0, 1, 1, 1, 2, 2, 2, 0.5, 0.5, 0.5;  // collinear
    MatX3i f(2, 3);
    f << 0, 1, 2, 0, 1, 3;
    std::vector<int> degenerate;
    const MatX3d dn = vertex_normals(v, f, &degenerate);
    CHECK(degenerate.size() == 4);
    CHECK((dn.row(0) - Eigen::RowVector3d(0, 0, 1)).norm() == 0.0);
  }
}
