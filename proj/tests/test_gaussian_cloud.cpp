#include <doctest.h>

#include "gdhm/gaussian_cloud.hpp"
#include "gdhm/rotation.hpp"
#include "gdhm/uv_remesh.hpp"

using namespace gdhm;

namespace {

MatX3d random_verts(Rng& rng, int n, double scale = 1.0) {
  MatX3d v(n, 3);
  for (auto& x : v.reshaped()) x = scale * rng.normal();
  return v;
}

GaussianCloud random_cloud(Rng& rng, const MatX3i& faces, const MatX3d& verts, int n) {
  GaussianCloud c = init_cloud(faces, verts, 1, 7);
  // keep first n, randomize parameters
  std::vector<int> drop;
  for (int i = n; i < c.size(); ++i) drop.push_back(i);
  c.remove(drop);
  for (auto& x : c.mu.reshaped()) x = 0.4 * rng.normal();
  for (int i = 0; i < c.size(); ++i) {
    c.quat.row(i) = Vector4d(1 + 0.3 * rng.normal(), 0.3 * rng.normal(), 0.3 * rng.normal(),
                             0.3 * rng.normal())
                        .transpose();
    for (int k = 0; k < 3; ++k) c.log_scale(i, k) = std::log(0.5) + 0.5 * rng.normal();
    c.opacity_logit[i] = rng.normal();
    for (int k = 0; k < 3; ++k) c.color_raw(i, k) = rng.normal();
  }
  return c;
}

}  // namespace

TEST_CASE("triangle frame geometry") {
  SUBCASE("equilateral triangle in the z=0 plane") {
    const double e = 0.8;
    const Vector3d v0(0, 0, 0), v1(e, 0, 0), v2(e / 2, e * std::sqrt(3.0) / 2, 0);
    const TriangleFrame f = triangle_frame(v0, v1, v2);
    CHECK(f.scale == doctest::Approx(e).epsilon(1e-12));
    CHECK((f.rotation.col(0) - Vector3d(1, 0, 0)).norm() < 1e-12);
    CHECK(std::abs(f.rotation.col(1).z()) == doctest::Approx(1.0));
    CHECK((f.origin - (v0 + v1 + v2) / 3).norm() < 1e-15);
    CHECK((f.rotation * f.rotation.transpose() - Matrix3d::Identity()).norm() < 1e-12);
    CHECK(f.rotation.determinant() == doctest::Approx(1.0));
  }
  SUBCASE("equivariance under rigid rotation") {
    Rng rng(3);
    const Matrix3d R = rodrigues(rng.normal3());
    const Vector3d t(0.1, -0.2, 0.05);
    const Vector3d v0(0.1, 0.2, 0.0), v1(0.5, 0.1, 0.2), v2(0.2, 0.6, -0.1);
    const TriangleFrame f = triangle_frame(v0, v1, v2);
    const TriangleFrame g = triangle_frame(R * v0 + t, R * v1 + t, R * v2 + t);
    CHECK((g.rotation - R * f.rotation).norm() < 1e-12);
    CHECK((g.origin - (R * f.origin + t)).norm() < 1e-12);
    CHECK(g.scale == doctest::Approx(f.scale).epsilon(1e-12));
  }
  SUBCASE("homogeneity under uniform scaling") {
    const Vector3d v0(0.1, 0.2, 0.0), v1(0.5, 0.1, 0.2), v2(0.2, 0.6, -0.1);
    const double k = 2.75;
    const TriangleFrame f = triangle_frame(v0, v1, v2);
    const TriangleFrame g = triangle_frame(k * v0, k * v1, k * v2);
    CHECK(g.scale == doctest::Approx(k * f.scale).epsilon(1e-12));
    CHECK((g.rotation - f.rotation).norm() < 1e-12);
  }
  SUBCASE("degenerate triangle throws") {
    CHECK_THROWS_AS(triangle_frame(Vector3d(0, 0, 0), Vector3d(1, 1, 1), Vector3d(2, 2, 2)),
                    numeric_error);
  }
}

TEST_CASE("init_cloud") {
  const HeadModel m = make_toy_model(4, 260, 0, 0);
  SUBCASE("one per face, deterministic") {
    const GaussianCloud a = init_cloud(m.faces, m.template_vertices, 1, 5);
    CHECK(a.size() == m.num_faces());
    const GaussianCloud b = init_cloud(m.faces, m.template_vertices, 1, 5);
    CHECK(a.mu == b.mu);
    CHECK(a.quat == b.quat);
    const GaussianCloud c3 = init_cloud(m.faces, m.template_vertices, 3, 5);
    CHECK(c3.size() == 3 * m.num_faces());
  }
  SUBCASE("zero mu sits on the parent centroid after promotion") {
    const GaussianCloud c = init_cloud(m.faces, m.template_vertices, 1, 5);
    const WorldGaussians w = promote_to_world(c, m.faces, m.template_vertices);
    for (int g = 0; g < c.size(); ++g) {
      Vector3d centroid = Vector3d::Zero();
      for (int k = 0; k < 3; ++k)
        centroid += m.template_vertices.row(m.faces(c.parent_face[g], k)).transpose();
      centroid /= 3;
      CHECK((w.position.row(g).transpose() - centroid).norm() < 1e-14);
      CHECK((w.rotation[g] - triangle_frame(
                                 m.template_vertices.row(m.faces(c.parent_face[g], 0)).transpose(),
                                 m.template_vertices.row(m.faces(c.parent_face[g], 1)).transpose(),
                                 m.template_vertices.row(m.faces(c.parent_face[g], 2)).transpose())
                                 .rotation)
                .norm() < 1e-13);
    }
  }
  SUBCASE("degenerate faces skipped and reported") {
    MatX3d v(4, 3);
    v << 0, 0, 0, 1, 0, 0, 0, 1, 0, 2, 0, 0;  // face using 0,1,3 is collinear
    MatX3i f(2, 3);
    f << 0, 1, 2, 0, 1, 3;
    std::vector<int> skipped;
    const GaussianCloud c = init_cloud(f, v, 2, 1, &skipped);
    CHECK(c.size() == 2);
    CHECK(skipped == std::vector<int>{1});
  }
}

TEST_CASE("promotion equivariance under rigid motion") {
  Rng rng(11);
  const HeadModel m = make_toy_model(12, 220, 0, 0);
  GaussianCloud c = random_cloud(rng, m.faces, m.template_vertices, 40);
  const Matrix3d R = rodrigues(Vector3d(0.4, -0.2, 0.7));
  const Vector3d t(0.05, 0.3, -0.1);
  MatX3d moved = m.template_vertices;
  for (int v = 0; v < moved.rows(); ++v)
    moved.row(v) = (R * m.template_vertices.row(v).transpose() + t).transpose();

  const WorldGaussians w0 = promote_to_world(c, m.faces, m.template_vertices);
  const WorldGaussians w1 = promote_to_world(c, m.faces, moved);
  for (int g = 0; g < c.size(); ++g) {
    CHECK((w1.position.row(g).transpose() - (R * w0.position.row(g).transpose() + t)).norm() <
          1e-6);
    CHECK((w1.rotation[g] - R * w0.rotation[g]).norm() < 1e-6);
    CHECK((w1.scale.row(g) - w0.scale.row(g)).norm() < 1e-6);
  }

  // pure translation shifts positions exactly
  MatX3d shifted = m.template_vertices;
  shifted.rowwise() += Vector3d(0.2, 0.1, -0.4).transpose();
  const WorldGaussians w2 = promote_to_world(c, m.faces, shifted);
  for (int g = 0; g < c.size(); ++g) {
    CHECK((w2.position.row(g) - w0.position.row(g) - Eigen::RowVector3d(0.2, 0.1, -0.4))
              .norm() < 1e-12);
    CHECK((w2.rotation[g] - w0.rotation[g]).norm() < 1e-13);
  }
}

TEST_CASE("promotion matches a scalar straight-line oracle") {
  Rng rng(21);
  const HeadModel m = make_toy_model(31, 200, 0, 0);
  const GaussianCloud c = random_cloud(rng, m.faces, m.template_vertices, 25);
  const WorldGaussians w = promote_to_world(c, m.faces, m.template_vertices);

  for (int g = 0; g < c.size(); ++g) {
    // oracle: rebuild everything with plain arithmetic
    const int f = c.parent_face[g];
    const Vector3d a = m.template_vertices.row(m.faces(f, 0)).transpose();
    const Vector3d b = m.template_vertices.row(m.faces(f, 1)).transpose();
    const Vector3d d = m.template_vertices.row(m.faces(f, 2)).transpose();
    const Vector3d e1 = (b - a) / (b - a).norm();
    Vector3d n = (b - a).cross(d - a);
    n /= n.norm();
    Matrix3d rot;
    rot.col(0) = e1;
    rot.col(1) = n;
    rot.col(2) = e1.cross(n);
    const Vector3d origin = (a + b + d) / 3;
    const double scale = ((b - a).norm() + (d - b).norm() + (a - d).norm()) / 3;

    Eigen::Quaterniond q(c.quat(g, 0), c.quat(g, 1), c.quat(g, 2), c.quat(g, 3));
    q.normalize();
    const Vector3d pos = origin + scale * (rot * c.mu.row(g).transpose());
    const Matrix3d wrot = rot * q.toRotationMatrix();
    CHECK((w.position.row(g).transpose() - pos).norm() < 1e-12);
    CHECK((w.rotation[g] - wrot).norm() < 1e-12);
    for (int k = 0; k < 3; ++k)
      CHECK(w.scale(g, k) == doctest::Approx(scale * std::exp(c.log_scale(g, k))));
  }
}

TEST_CASE("promotion gradients match finite differences") {
  Rng rng(77);
  MatX3i faces(2, 3);
  faces << 0, 1, 2, 1, 3, 2;
  MatX3d verts = random_verts(rng, 4, 0.3);
  GaussianCloud c = random_cloud(rng, faces, verts, 2);

  // random linear functional over all world outputs
  WorldGrads up;
  up.init(c.size());
  for (auto& x : up.d_position.reshaped()) x = rng.normal();
  for (auto& x : up.d_scale.reshaped()) x = rng.normal();
  for (auto& r : up.d_rotation)
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) r(i, j) = rng.normal();

  auto loss = [&]() {
    const WorldGaussians w = promote_to_world(c, faces, verts);
    double L = (w.position.array() * up.d_position.array()).sum() +
               (w.scale.array() * up.d_scale.array()).sum();
    for (int g = 0; g < c.size(); ++g)
      L += (w.rotation[g].array() * up.d_rotation[g].array()).sum();
    return L;
  };

  PromoteCache cache;
  promote_to_world(c, faces, verts, &cache);
  CloudGrads dc;
  dc.init(c.size());
  MatX3d dv = MatX3d::Zero(4, 3);
  promote_backward(c, faces, verts, cache, up, dc, dv);

  const double h = 1e-6;
  auto fd = [&](double* x) {
    const double saved = *x;
    *x = saved + h;
    const double lp = loss();
    *x = saved - h;
    const double lm = loss();
    *x = saved;
    return (lp - lm) / (2 * h);
  };
  auto check = [&](double got, double want) {
    CHECK(std::abs(got - want) < 1e-5 * std::max({std::abs(got), std::abs(want), 1e-4}));
  };
  for (int g = 0; g < c.size(); ++g) {
    for (int k = 0; k < 3; ++k) check(fd(&c.mu(g, k)), dc.d_mu(g, k));
    for (int k = 0; k < 4; ++k) check(fd(&c.quat(g, k)), dc.d_quat(g, k));
    for (int k = 0; k < 3; ++k) check(fd(&c.log_scale(g, k)), dc.d_log_scale(g, k));
  }
  for (int v = 0; v < 4; ++v)
    for (int k = 0; k < 3; ++k) check(fd(&verts(v, k)), dv(v, k));
}
