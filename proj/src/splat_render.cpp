#include "gdhm/splat_render.hpp"

#include "gdhm/kernels.hpp"
#include "gdhm/rotation.hpp"

namespace gdhm {

Vector3d gaussian_world_normal(const Matrix3d& rot, const Vector3d& scale,
                               const Vector3d& cam_center, const Vector3d& position,
                               int* axis_out, double* sign_out) {
  int k = 0;
  for (int i = 1; i < 3; ++i)
    if (scale[i] < scale[k]) k = i;
  const Vector3d axis = rot.col(k);
  const Vector3d view = position - cam_center;
  const double sign = axis.dot(view) <= 0.0 ? 1.0 : -1.0;
  if (axis_out) *axis_out = k;
  if (sign_out) *sign_out = sign;
  return sign * axis;
}

ProjSplat project_gaussian(const Vector3d& position, const Matrix3d& rotation,
                           const Vector3d& scale, const Camera& cam, double dilation) {
  ProjSplat s;
  s.p_cam = cam.to_camera(position);
  if (s.p_cam.z() < cam.near_plane) return s;  // culled
  s.visible = true;
  s.depth = s.p_cam.z();
  s.mean = cam.project(s.p_cam);

  const double x = s.p_cam.x(), y = s.p_cam.y(), z = s.p_cam.z();
  Eigen::Matrix<double, 2, 3> J;
  J << cam.fx / z, 0, -cam.fx * x / (z * z), 0, cam.fy / z, -cam.fy * y / (z * z);

  const Matrix3d M = cam.rot * rotation;
  const Matrix3d cov_cam =
      M * Vector3d(scale.array().square()).asDiagonal() * M.transpose();
  Matrix2d cov2d = J * cov_cam * J.transpose();
  cov2d(0, 0) += dilation;
  cov2d(1, 1) += dilation;
  s.cov2d = cov2d;

  const double det = cov2d(0, 0) * cov2d(1, 1) - cov2d(0, 1) * cov2d(1, 0);
  s.conic_a = cov2d(1, 1) / det;
  s.conic_b = -cov2d(0, 1) / det;
  s.conic_c = cov2d(0, 0) / det;
  return s;
}

namespace {

// Adjoint of project_gaussian. Packed conic grads use the kernel convention
// q = a dx^2 + 2 b dx dy + c dy^2.
void project_backward(const Vector3d& position, const Matrix3d& rotation, const Vector3d& scale,
                      const Camera& cam, const ProjSplat& s, const Vector2d& d_mean,
                      double d_ca, double d_cb, double d_cc, Vector3d& d_position,
                      Matrix3d& d_rotation, Vector3d& d_scale) {
  const double x = s.p_cam.x(), y = s.p_cam.y(), z = s.p_cam.z();
  Eigen::Matrix<double, 2, 3> J;
  J << cam.fx / z, 0, -cam.fx * x / (z * z), 0, cam.fy / z, -cam.fy * y / (z * z);

  // conic = cov2d^{-1}; d_cov = -C G C with G the full symmetric grad matrix
  Matrix2d C;
  C << s.conic_a, s.conic_b, s.conic_b, s.conic_c;
  Matrix2d G;
  G << d_ca, 0.5 * d_cb, 0.5 * d_cb, d_cc;
  const Matrix2d d_cov = -C * G * C;

  const Matrix3d M = cam.rot * rotation;
  const Matrix3d D = Vector3d(scale.array().square()).asDiagonal();
  const Matrix3d cov_cam = M * D * M.transpose();

  // cov2d = J cov_cam J^T (+ dilation, constant)
  const Eigen::Matrix<double, 2, 3> d_J = (d_cov + d_cov.transpose()) * J * cov_cam;
  const Matrix3d d_cov_cam = J.transpose() * d_cov * J;

  // cov_cam = M D M^T
  const Matrix3d d_M = (d_cov_cam + d_cov_cam.transpose()) * M * D;
  const Matrix3d MtGM = M.transpose() * d_cov_cam * M;
  for (int k = 0; k < 3; ++k) d_scale[k] += 2.0 * scale[k] * MtGM(k, k);
  d_rotation += cam.rot.transpose() * d_M;

  // mean = (fx x/z + cx, fy y/z + cy); dmean/dp_cam = J
  Vector3d d_pcam = J.transpose() * d_mean;

  // J's own dependence on p_cam
  const double z2 = z * z, z3 = z2 * z;
  d_pcam.x() += d_J(0, 2) * (-cam.fx / z2);
  d_pcam.y() += d_J(1, 2) * (-cam.fy / z2);
  d_pcam.z() += d_J(0, 0) * (-cam.fx / z2) + d_J(0, 2) * (2.0 * cam.fx * x / z3) +
                d_J(1, 1) * (-cam.fy / z2) + d_J(1, 2) * (2.0 * cam.fy * y / z3);

  d_position += cam.rot.transpose() * d_pcam;
}

struct TileGrads {
  std::vector<double> mx, my, ca, cb, cc, op, feat[6];
  void init(int n) {
    mx.assign(n, 0);
    my.assign(n, 0);
    ca.assign(n, 0);
    cb.assign(n, 0);
    cc.assign(n, 0);
    op.assign(n, 0);
    for (auto& fbuf : feat) fbuf.assign(n, 0);
  }
};

struct TileSoA {
  std::vector<double> mx, my, ca, cb, cc, op, feat[6];
  kernels::TileSplats view() const {
    kernels::TileSplats s;
    s.count = static_cast<int>(mx.size());
    s.mx = mx.data();
    s.my = my.data();
    s.ca = ca.data();
    s.cb = cb.data();
    s.cc = cc.data();
    s.opacity = op.data();
    for (int c = 0; c < 6; ++c) s.feat[c] = feat[c].data();
    return s;
  }
};

void gather_tile(const RenderCache& cache, const GaussianCloud& cloud,
                 const std::vector<int>& list, TileSoA& soa) {
  const int n = static_cast<int>(list.size());
  soa.mx.resize(n);
  soa.my.resize(n);
  soa.ca.resize(n);
  soa.cb.resize(n);
  soa.cc.resize(n);
  soa.op.resize(n);
  for (auto& fbuf : soa.feat) fbuf.resize(n);
  for (int i = 0; i < n; ++i) {
    const int g = list[i];
    const ProjSplat& p = cache.proj[g];
    soa.mx[i] = p.mean.x();
    soa.my[i] = p.mean.y();
    soa.ca[i] = p.conic_a;
    soa.cb[i] = p.conic_b;
    soa.cc[i] = p.conic_c;
    soa.op[i] = cloud.activated_opacity(g);
    for (int c = 0; c < 3; ++c) {
      soa.feat[c][i] = cache.features_rgb(g, c);
      soa.feat[3 + c][i] = cache.features_normal(g, c);
    }
  }
}

}  // namespace

RenderOutput render(const GaussianCloud& cloud, const MatX3i& faces, const MatX3d& vertices,
                    const Camera& cam, const RenderParams& params, RenderCache* cache_out) {
  cam.validate();
  const int n = cloud.size();
  RenderCache local_cache;
  RenderCache& cache = cache_out ? *cache_out : local_cache;
  cache.params = params;

  cache.world = promote_to_world(cloud, faces, vertices, &cache.promote);

  cache.proj.assign(n, ProjSplat{});
  cache.features_rgb.resize(n, 3);
  cache.features_normal.resize(n, 3);
  cache.normal_axis.assign(n, 0);
  cache.normal_sign.assign(n, 1.0);
  const Vector3d cam_center = cam.center();
  for (int g = 0; g < n; ++g) {
    if (!cache.world.active[g]) continue;
    cache.proj[g] = project_gaussian(cache.world.position.row(g).transpose(),
                                     cache.world.rotation[g],
                                     cache.world.scale.row(g).transpose(), cam,
                                     params.dilation);
    if (!cache.proj[g].visible) continue;
    cache.features_rgb.row(g) = cloud.activated_color(g).transpose();
    cache.features_normal.row(g) =
        gaussian_world_normal(cache.world.rotation[g], cache.world.scale.row(g).transpose(),
                              cam_center, cache.world.position.row(g).transpose(),
                              &cache.normal_axis[g], &cache.normal_sign[g])
            .transpose();
  }

  // front-to-back order, stable tie-break on index
  cache.order.clear();
  for (int g = 0; g < n; ++g)
    if (cache.world.active[g] && cache.proj[g].visible) cache.order.push_back(g);
  std::sort(cache.order.begin(), cache.order.end(), [&](int a, int b) {
    if (cache.proj[a].depth != cache.proj[b].depth)
      return cache.proj[a].depth < cache.proj[b].depth;
    return a < b;
  });

  // bin to tiles by the bin_sigma ellipse bound
  const int ts = params.tile_size;
  cache.tiles_x = (cam.width + ts - 1) / ts;
  cache.tiles_y = (cam.height + ts - 1) / ts;
  cache.bins.assign(static_cast<size_t>(cache.tiles_x) * cache.tiles_y, {});
  for (int oi = 0; oi < static_cast<int>(cache.order.size()); ++oi) {
    const ProjSplat& p = cache.proj[cache.order[oi]];
    const double tr = 0.5 * (p.cov2d(0, 0) + p.cov2d(1, 1));
    const double disc = std::sqrt(std::max(0.0, tr * tr - p.cov2d.determinant()));
    const double radius = params.bin_sigma * std::sqrt(tr + disc);
    const int tx0 = std::max(0, static_cast<int>(std::floor((p.mean.x() - radius) / ts)));
    const int tx1 =
        std::min(cache.tiles_x - 1, static_cast<int>(std::floor((p.mean.x() + radius) / ts)));
    const int ty0 = std::max(0, static_cast<int>(std::floor((p.mean.y() - radius) / ts)));
    const int ty1 =
        std::min(cache.tiles_y - 1, static_cast<int>(std::floor((p.mean.y() + radius) / ts)));
    for (int ty = ty0; ty <= ty1; ++ty)
      for (int tx = tx0; tx <= tx1; ++tx)
        cache.bins[ty * cache.tiles_x + tx].push_back(oi);
  }
  // bins hold order-indices (already depth sorted); map to gaussian ids
  for (auto& bin : cache.bins)
    for (int& oi : bin) oi = cache.order[oi];

  RenderOutput out;
  out.rgb = Image(cam.height, cam.width, 3);
  out.normal = Image(cam.height, cam.width, 3);
  out.alpha = Image(cam.height, cam.width, 1);

  const kernels::Table& K = kernels::active_table();
  const int n_tiles = cache.tiles_x * cache.tiles_y;
  parallel_for(n_tiles, worker_threads(), [&](int t) {
    const int tx = t % cache.tiles_x, ty = t / cache.tiles_x;
    const int x0 = tx * ts, y0 = ty * ts;
    const int tw = std::min(ts, cam.width - x0), th = std::min(ts, cam.height - y0);
    const int npix = tw * th;
    std::vector<double> T(npix, 1.0), accum(6 * npix, 0.0);
    TileSoA soa;
    gather_tile(cache, cloud, cache.bins[t], soa);
    K.composite_tile_fwd(soa.view(), x0, y0, tw, th, params.stop_eps, T.data(), accum.data());
    for (int p = 0; p < npix; ++p) {
      const int x = x0 + p % tw, y = y0 + p / tw;
      for (int c = 0; c < 3; ++c) {
        out.rgb.at(c, y, x) = accum[c * npix + p] + T[p] * params.bg_rgb[c];
        out.normal.at(c, y, x) = accum[(3 + c) * npix + p] + T[p] * params.bg_normal[c];
      }
      out.alpha.at(0, y, x) = 1.0 - T[p];
    }
  });
  return out;
}

void render_backward(const GaussianCloud& cloud, const MatX3i& faces, const MatX3d& vertices,
                     const Camera& cam, const RenderCache& cache, const Image& d_rgb,
                     const Image& d_normal, const Image& d_alpha, CloudGrads& d_cloud,
                     MatX3d& d_vertices) {
  const int n = cloud.size();
  const RenderParams& params = cache.params;
  const int ts = params.tile_size;
  const kernels::Table& K = kernels::active_table();

  const int n_tiles = cache.tiles_x * cache.tiles_y;
  std::vector<TileGrads> tile_grads(n_tiles);
  const double bg[6] = {params.bg_rgb[0],    params.bg_rgb[1],    params.bg_rgb[2],
                        params.bg_normal[0], params.bg_normal[1], params.bg_normal[2]};

  parallel_for(n_tiles, worker_threads(), [&](int t) {
    const std::vector<int>& list = cache.bins[t];
    if (list.empty()) return;
    const int tx = t % cache.tiles_x, ty = t / cache.tiles_x;
    const int x0 = tx * ts, y0 = ty * ts;
    const int tw = std::min(ts, cam.width - x0), th = std::min(ts, cam.height - y0);
    const int npix = tw * th;

    std::vector<double> d_out(7 * npix);
    for (int p = 0; p < npix; ++p) {
      const int x = x0 + p % tw, y = y0 + p / tw;
      for (int c = 0; c < 3; ++c) {
        d_out[c * npix + p] = d_rgb.at(c, y, x);
        d_out[(3 + c) * npix + p] = d_normal.at(c, y, x);
      }
      d_out[6 * npix + p] = d_alpha.at(0, y, x);
    }

    TileSoA soa;
    gather_tile(cache, cloud, list, soa);
    TileGrads& tg = tile_grads[t];
    tg.init(static_cast<int>(list.size()));
    kernels::TileSplatGrads gr;
    gr.mx = tg.mx.data();
    gr.my = tg.my.data();
    gr.ca = tg.ca.data();
    gr.cb = tg.cb.data();
    gr.cc = tg.cc.data();
    gr.opacity = tg.op.data();
    for (int c = 0; c < 6; ++c) gr.feat[c] = tg.feat[c].data();
    std::vector<double> scratch(8 * list.size());
    K.composite_tile_bwd(soa.view(), x0, y0, tw, th, params.stop_eps, d_out.data(), bg,
                         scratch.data(), gr);
  });

  // deterministic reduction in tile index order
  MatX2d d_mean = MatX2d::Zero(n, 2);
  MatX3d d_conic = MatX3d::Zero(n, 3);
  VectorXd d_op_act = VectorXd::Zero(n);
  MatX3d d_feat_rgb = MatX3d::Zero(n, 3);
  MatX3d d_feat_normal = MatX3d::Zero(n, 3);
  for (int t = 0; t < n_tiles; ++t) {
    const std::vector<int>& list = cache.bins[t];
    const TileGrads& tg = tile_grads[t];
    for (size_t i = 0; i < list.size(); ++i) {
      const int g = list[i];
      d_mean(g, 0) += tg.mx[i];
      d_mean(g, 1) += tg.my[i];
      d_conic(g, 0) += tg.ca[i];
      d_conic(g, 1) += tg.cb[i];
      d_conic(g, 2) += tg.cc[i];
      d_op_act[g] += tg.op[i];
      for (int c = 0; c < 3; ++c) {
        d_feat_rgb(g, c) += tg.feat[c][i];
        d_feat_normal(g, c) += tg.feat[3 + c][i];
      }
    }
  }

  // chain through activations, the normal selection, and the projection
  WorldGrads d_world;
  d_world.init(n);
  for (int g = 0; g < n; ++g) {
    if (!cache.world.active[g] || !cache.proj[g].visible) continue;
    const double op = cloud.activated_opacity(g);
    d_cloud.d_opacity_logit[g] += d_op_act[g] * op * (1.0 - op);
    for (int c = 0; c < 3; ++c) {
      const double col = cache.features_rgb(g, c);
      d_cloud.d_color_raw(g, c) += d_feat_rgb(g, c) * col * (1.0 - col);
    }
    // normal = sign * rotation.col(axis)
    d_world.d_rotation[g].col(cache.normal_axis[g]) +=
        cache.normal_sign[g] * d_feat_normal.row(g).transpose();

    Vector3d d_pos = Vector3d::Zero(), d_scale = Vector3d::Zero();
    Matrix3d d_rot = Matrix3d::Zero();
    project_backward(cache.world.position.row(g).transpose(), cache.world.rotation[g],
                     cache.world.scale.row(g).transpose(), cam, cache.proj[g],
                     d_mean.row(g).transpose(), d_conic(g, 0), d_conic(g, 1), d_conic(g, 2),
                     d_pos, d_rot, d_scale);
    d_world.d_position.row(g) += d_pos.transpose();
    d_world.d_rotation[g] += d_rot;
    d_world.d_scale.row(g) += d_scale.transpose();
  }

  promote_backward(cloud, faces, vertices, cache.promote, d_world, d_cloud, d_vertices);
}

}  // namespace gdhm
