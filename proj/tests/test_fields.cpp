#include <doctest.h>

#include "gdhm/fields.hpp"
#include "gdhm/splat_render.hpp"
#include "gdhm/uv_remesh.hpp"

using namespace gdhm;

TEST_CASE("deformation field") {
  const int d = 8;
  DeformationField f = DeformationField::create(d, 32, 99);
  Rng rng(1);
  MatX3d canon(20, 3);
  for (auto& x : canon.reshaped()) x = 0.1 * rng.normal();
  VectorXd latent(d);
  for (auto& x : latent) x = rng.normal();

  SUBCASE("freshly initialized field produces exactly zero offsets") {
    const MatX3d off = f.deform_vertices(canon, latent);
    CHECK(off.cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("identical positions get identical offsets") {
    // randomize weights so outputs are nonzero
    std::vector<double> flat(f.num_params());
    f.to_flat(flat.data());
    for (auto& x : flat) x += 0.3 * rng.normal();
    f.from_flat(flat.data());
    MatX3d c2 = canon;
    c2.row(5) = c2.row(11);
    const MatX3d off = f.deform_vertices(c2, latent);
    CHECK((off.row(5) - off.row(11)).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("latent dimension mismatch errors") {
    CHECK_THROWS_AS(f.deform_vertices(canon, VectorXd::Zero(d + 1)), data_error);
  }
  SUBCASE("weight and latent gradients match finite differences") {
    std::vector<double> flat(f.num_params());
    f.to_flat(flat.data());
    for (auto& x : flat) x += 0.2 * rng.normal();
    f.from_flat(flat.data());

    MatX3d upstream(20, 3);
    for (auto& x : upstream.reshaped()) x = rng.normal();
    DeformationField::Cache cache;
    f.deform_vertices(canon, latent, &cache);
    const DeformationField::Grads g = f.backward(cache, upstream);
    std::vector<double> gflat(f.num_params());
    DeformationField::grads_to_flat(g, gflat.data());

    const double h = 1e-5;
    f.to_flat(flat.data());
    int wrong = 0;
    for (int i = 0; i < f.num_params(); i += 3) {
      const double saved = flat[i];
      flat[i] = saved + h;
      f.from_flat(flat.data());
      const double lp = (f.deform_vertices(canon, latent).array() * upstream.array()).sum();
      flat[i] = saved - h;
      f.from_flat(flat.data());
      const double lm = (f.deform_vertices(canon, latent).array() * upstream.array()).sum();
      flat[i] = saved;
      f.from_flat(flat.data());
      const double fd = (lp - lm) / (2 * h);
      if (std::abs(fd - gflat[i]) > 1e-4 * std::max({std::abs(fd), std::abs(gflat[i]), 1e-6}))
        ++wrong;
    }
    CHECK(wrong == 0);

    for (int i = 0; i < d; ++i) {
      const double saved = latent[i];
      latent[i] = saved + h;
      const double lp = (f.deform_vertices(canon, latent).array() * upstream.array()).sum();
      latent[i] = saved - h;
      const double lm = (f.deform_vertices(canon, latent).array() * upstream.array()).sum();
      latent[i] = saved;
      const double fd = (lp - lm) / (2 * h);
      CHECK(std::abs(fd - g.latent[i]) <
            1e-4 * std::max({std::abs(fd), std::abs(g.latent[i]), 1e-6}));
    }
  }
}

TEST_CASE("dynamics field") {
  const int d = 6, n = 12;
  DynamicsField f = DynamicsField::create(n, d, 16, 32, 7);
  Rng rng(2);
  VectorXd latent(d);
  for (auto& x : latent) x = rng.normal();

  SUBCASE("zero-initialized field produces zero residuals") {
    const ResidualBundle r = f.dynamics_residuals(latent);
    CHECK(r.d_mu.cwiseAbs().maxCoeff() == 0.0);
    CHECK(r.d_quat.cwiseAbs().maxCoeff() == 0.0);
    CHECK(r.d_opacity.cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("perturbing one code changes only that gaussian's residuals") {
    // randomize weights, keep codes distinct
    std::vector<double> flat(f.mlp.num_params());
    f.mlp.to_flat(flat.data());
    for (auto& x : flat) x += 0.3 * rng.normal();
    f.mlp.from_flat(flat.data());
    for (auto& x : f.codes.reshaped()) x = 0.1 * rng.normal();
    const ResidualBundle r0 = f.dynamics_residuals(latent);
    f.codes(4, 2) += 0.37;
    const ResidualBundle r1 = f.dynamics_residuals(latent);
    for (int i = 0; i < n; ++i) {
      const double diff = (r1.d_mu.row(i) - r0.d_mu.row(i)).cwiseAbs().maxCoeff() +
                          (r1.d_quat.row(i) - r0.d_quat.row(i)).cwiseAbs().maxCoeff() +
                          std::abs(r1.d_opacity[i] - r0.d_opacity[i]);
      if (i == 4)
        CHECK(diff > 0.0);
      else
        CHECK(diff == 0.0);
    }
  }
  SUBCASE("weight, code and latent gradients match finite differences") {
    std::vector<double> flat(f.mlp.num_params());
    f.mlp.to_flat(flat.data());
    for (auto& x : flat) x += 0.2 * rng.normal();
    f.mlp.from_flat(flat.data());
    for (auto& x : f.codes.reshaped()) x = 0.2 * rng.normal();

    ResidualBundle upstream;
    upstream.init(n);
    for (auto& x : upstream.d_mu.reshaped()) x = rng.normal();
    for (auto& x : upstream.d_quat.reshaped()) x = rng.normal();
    for (auto& x : upstream.d_scale.reshaped()) x = rng.normal();
    for (auto& x : upstream.d_opacity) x = rng.normal();
    for (auto& x : upstream.d_color.reshaped()) x = rng.normal();

    auto loss = [&]() {
      const ResidualBundle r = f.dynamics_residuals(latent);
      return (r.d_mu.array() * upstream.d_mu.array()).sum() +
             (r.d_quat.array() * upstream.d_quat.array()).sum() +
             (r.d_scale.array() * upstream.d_scale.array()).sum() +
             r.d_opacity.dot(upstream.d_opacity) +
             (r.d_color.array() * upstream.d_color.array()).sum();
    };
    DynamicsField::Cache cache;
    f.dynamics_residuals(latent, &cache);
    const DynamicsField::Grads g = f.backward(cache, upstream);

    const double h = 1e-5;
    auto fd_at = [&](double* x) {
      const double saved = *x;
      *x = saved + h;
      const double lp = loss();
      *x = saved - h;
      const double lm = loss();
      *x = saved;
      return (lp - lm) / (2 * h);
    };
    std::vector<double> gflat(f.mlp.num_params());
    Mlp::grads_to_flat(g.mlp, gflat.data());
    f.mlp.to_flat(flat.data());
    for (int i = 0; i < f.mlp.num_params(); i += 5) {
      const double saved = flat[i];
      flat[i] = saved + h;
      f.mlp.from_flat(flat.data());
      const double lp = loss();
      flat[i] = saved - h;
      f.mlp.from_flat(flat.data());
      const double lm = loss();
      flat[i] = saved;
      f.mlp.from_flat(flat.data());
      const double fd = (lp - lm) / (2 * h);
      CHECK(std::abs(fd - gflat[i]) < 1e-4 * std::max({std::abs(fd), std::abs(gflat[i]), 1e-6}));
    }
    for (int i = 0; i < n; i += 3)
      for (int k = 0; k < 16; k += 5) {
        const double fd = fd_at(&f.codes(i, k));
        CHECK(std::abs(fd - g.codes(i, k)) <
              1e-4 * std::max({std::abs(fd), std::abs(g.codes(i, k)), 1e-6}));
      }
    for (int i = 0; i < d; ++i) {
      const double fd = fd_at(&latent[i]);
      CHECK(std::abs(fd - g.latent[i]) <
            1e-4 * std::max({std::abs(fd), std::abs(g.latent[i]), 1e-6}));
    }
  }
}

TEST_CASE("residual application") {
  Rng rng(3);
  const HeadModel m = make_toy_model(40, 220, 2, 2);
  GaussianCloud cloud = init_cloud(m.faces, m.template_vertices, 1, 9);
  for (auto& x : cloud.quat.reshaped()) x += 0.2 * rng.normal();

  SUBCASE("zero residuals leave the cloud bit-identical") {
    ResidualBundle zero;
    zero.init(cloud.size());
    const GaussianCloud e = apply_residuals(cloud, zero);
    CHECK(e.mu == cloud.mu);
    CHECK(e.quat == cloud.quat);
    CHECK(e.log_scale == cloud.log_scale);
    CHECK(e.opacity_logit == cloud.opacity_logit);
    CHECK(e.color_raw == cloud.color_raw);
  }

  SUBCASE("renders are bit-identical with inert fields enabled") {
    const Camera cam = Camera::look_at(Vector3d(0, 0, -0.5), Vector3d::Zero(),
                                       Vector3d::UnitY(), 100, 48, 48);
    const DynamicsField f = DynamicsField::create(cloud.size(), 4, 16, 32, 5);
    const ResidualBundle r = f.dynamics_residuals(VectorXd::Zero(4));
    const GaussianCloud e = apply_residuals(cloud, r);
    const RenderOutput a = render(cloud, m.faces, m.template_vertices, cam);
    const RenderOutput b = render(e, m.faces, m.template_vertices, cam);
    CHECK(a.rgb == b.rgb);
    CHECK(a.normal == b.normal);
    CHECK(a.alpha == b.alpha);
  }

  SUBCASE("application gradients match finite differences") {
    ResidualBundle r;
    r.init(cloud.size());
    for (auto& x : r.d_mu.reshaped()) x = 0.05 * rng.normal();
    for (auto& x : r.d_quat.reshaped()) x = 0.05 * rng.normal();
    for (auto& x : r.d_scale.reshaped()) x = 0.05 * rng.normal();
    for (auto& x : r.d_opacity) x = 0.05 * rng.normal();
    for (auto& x : r.d_color.reshaped()) x = 0.05 * rng.normal();

    CloudGrads upstream;
    upstream.init(cloud.size());
    for (auto& x : upstream.d_mu.reshaped()) x = rng.normal();
    for (auto& x : upstream.d_quat.reshaped()) x = rng.normal();
    for (auto& x : upstream.d_log_scale.reshaped()) x = rng.normal();
    for (auto& x : upstream.d_opacity_logit) x = rng.normal();
    for (auto& x : upstream.d_color_raw.reshaped()) x = rng.normal();

    auto loss = [&]() {
      const GaussianCloud e = apply_residuals(cloud, r);
      return (e.mu.array() * upstream.d_mu.array()).sum() +
             (e.quat.array() * upstream.d_quat.array()).sum() +
             (e.log_scale.array() * upstream.d_log_scale.array()).sum() +
             e.opacity_logit.dot(upstream.d_opacity_logit) +
             (e.color_raw.array() * upstream.d_color_raw.array()).sum();
    };
    CloudGrads d_cloud;
    d_cloud.init(cloud.size());
    ResidualBundle d_r;
    d_r.init(cloud.size());
    apply_residuals_backward(cloud, r, upstream, d_cloud, d_r);

    const double h = 1e-6;
    auto fd_at = [&](double* x) {
      const double saved = *x;
      *x = saved + h;
      const double lp = loss();
      *x = saved - h;
      const double lm = loss();
      *x = saved;
      return (lp - lm) / (2 * h);
    };
    for (int i = 0; i < cloud.size(); i += 17) {
      for (int k = 0; k < 4; ++k) {
        CHECK(std::abs(fd_at(&r.d_quat(i, k)) - d_r.d_quat(i, k)) < 1e-5);
        CHECK(std::abs(fd_at(&cloud.quat(i, k)) - d_cloud.d_quat(i, k)) < 1e-5);
      }
      CHECK(std::abs(fd_at(&r.d_mu(i, 1)) - d_r.d_mu(i, 1)) < 1e-8);
      CHECK(std::abs(fd_at(&r.d_opacity[i]) - d_r.d_opacity[i]) < 1e-8);
    }
  }
}
