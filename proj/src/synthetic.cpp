#include "gdhm/synthetic.hpp"

#include <filesystem>
#include <iostream>

#include "gdhm/io_gdhm.hpp"
#include "gdhm/io_png.hpp"
#include "gdhm/pose_map.hpp"
#include "gdhm/splat_render.hpp"
#include "gdhm/uv_remesh.hpp"

namespace fs = std::filesystem;

namespace gdhm {

VectorXd sampler_probabilities(const std::vector<std::pair<double, double>>& priority_size) {
  if (priority_size.empty()) throw data_error("sampler: need at least one dataset");
  VectorXd p(priority_size.size());
  double total = 0;
  for (size_t i = 0; i < priority_size.size(); ++i) {
    const auto [priority, size] = priority_size[i];
    if (priority < 0 || size < 0) throw data_error("sampler: negative priority or size");
    p[static_cast<int>(i)] = priority * size;
    total += priority * size;
  }
  if (total <= 0) throw data_error("sampler: all priority*size products are zero");
  return p / total;
}

int draw_sample(const VectorXd& probabilities, Rng& rng) {
  const double u = rng.uniform();
  double acc = 0;
  for (int i = 0; i < probabilities.size(); ++i) {
    acc += probabilities[i];
    if (u < acc) return i;
  }
  return static_cast<int>(probabilities.size()) - 1;
}

std::vector<Camera> camera_ring(int n_views, int resolution, double radius, double span_deg,
                                double elevation_deg, double focal_factor) {
  std::vector<Camera> cams;
  const double span = span_deg * M_PI / 180.0;
  const double elev = elevation_deg * M_PI / 180.0;
  for (int v = 0; v < n_views; ++v) {
    const double az =
        n_views > 1 ? -span / 2 + span * static_cast<double>(v) / (n_views - 1) : 0.0;
    const Vector3d pos(radius * std::cos(elev) * std::sin(az), radius * std::sin(elev),
                       radius * std::cos(elev) * std::cos(az));
    Camera c = Camera::look_at(pos, Vector3d::Zero(), Vector3d::UnitY(),
                               focal_factor * resolution, resolution, resolution);
    c.name = "view_" + std::to_string(v);
    c.near_plane = 0.05;
    cams.push_back(c);
  }
  return cams;
}

void save_cloud(const std::string& path, const GaussianCloud& cloud) {
  GdhmFile f;
  const uint64_t n = cloud.size();
  std::vector<int32_t> pf(cloud.parent_face.begin(), cloud.parent_face.end());
  f.add_i32("parent_face", {n}, pf.data());
  f.add_f64("mu", {n, 3}, cloud.mu.data());
  f.add_f64("quat", {n, 4}, cloud.quat.data());
  f.add_f64("log_scale", {n, 3}, cloud.log_scale.data());
  f.add_f64("opacity_logit", {n}, cloud.opacity_logit.data());
  f.add_f64("color_raw", {n, 3}, cloud.color_raw.data());
  f.write(path);
}

GaussianCloud load_cloud(const std::string& path) {
  const GdhmFile f = GdhmFile::read(path);
  GaussianCloud c;
  const auto pf = f.require("parent_face").as_ints();
  c.parent_face.assign(pf.begin(), pf.end());
  const int n = static_cast<int>(pf.size());
  auto fill = [&](const char* name, double* dst, int cols) {
    const auto v = f.require(name).as_doubles();
    if (static_cast<int>(v.size()) != n * cols)
      throw data_error(std::string("cloud: bad chunk size for ") + name);
    std::copy(v.begin(), v.end(), dst);
  };
  c.mu.resize(n, 3);
  c.quat.resize(n, 4);
  c.log_scale.resize(n, 3);
  c.opacity_logit.resize(n);
  c.color_raw.resize(n, 3);
  fill("mu", c.mu.data(), 3);
  fill("quat", c.quat.data(), 4);
  fill("log_scale", c.log_scale.data(), 3);
  fill("opacity_logit", c.opacity_logit.data(), 1);
  fill("color_raw", c.color_raw.data(), 3);
  return c;
}

OracleResult generate_oracle_scene(const Config& cfg) {
  const std::string dir = cfg.get<std::string>("synth.out", "oracle_bundle");
  const uint64_t seed = cfg.get<uint64_t>("synth.seed", 1);
  const int views = cfg.get<int>("synth.views", 12);
  const int frames = cfg.get<int>("synth.frames", 40);
  const int resolution = cfg.get<int>("synth.resolution", 128);
  if (views < 1 || frames < 1) throw data_error("synth: views and frames must be >= 1");

  const int model_vertices = cfg.get<int>("synth.model.vertices", 950);
  const int n_shape = cfg.get<int>("synth.model.n_shape", 8);
  const int n_expr = cfg.get<int>("synth.model.n_expr", 6);
  const uint64_t model_seed = cfg.get<uint64_t>("synth.model.seed", seed * 977 + 3);
  const int remesh_res = cfg.get<int>("synth.remesh.resolution", 17);
  const int max_hops = cfg.get<int>("synth.remesh.max_hops", 5);
  const int per_triangle = cfg.get<int>("synth.gaussians_per_triangle", 1);
  const int latent_dim = cfg.get<int>("synth.latent_dim", 16);
  const double rot_sigma = cfg.get<double>("synth.track_noise.rot_sigma", 0.0);
  const double expr_sigma = cfg.get<double>("synth.track_noise.expr_sigma", 0.0);
  const double trans_sigma = cfg.get<double>("synth.track_noise.trans_sigma", 0.0);

  Rng rng(seed);
  const HeadModel model = make_toy_model(model_seed, model_vertices, n_shape, n_expr);
  const UvRemesh remesh = remesh_uv(model, remesh_res, max_hops);

  // ground-truth cloud: surface-flattened, randomized appearance
  GaussianCloud cloud = init_cloud(remesh.faces, remesh.vertices, per_triangle, seed * 31 + 7);
  for (int g = 0; g < cloud.size(); ++g) {
    for (int k = 0; k < 3; ++k) cloud.color_raw(g, k) = 1.3 * rng.normal();
    cloud.opacity_logit[g] = logit(rng.uniform(0.65, 0.95));
    for (int k = 0; k < 3; ++k) cloud.log_scale(g, k) = std::log(0.55) + 0.25 * rng.normal();
    cloud.log_scale(g, 1) -= cfg.get<double>("synth.gt_cloud.flatten", 1.2);  // axis 1: normal
    cloud.quat.row(g) += 0.05 * Vector4d(rng.normal(), rng.normal(), rng.normal(),
                                         rng.normal())
                                    .transpose();
    for (int k = 0; k < 3; ++k) cloud.mu(g, k) += 0.05 * rng.normal();
  }

  // smooth expression + pose track
  Tracks gt;
  gt.shape = VectorXd::Zero(model.num_shape());
  for (int k = 0; k < model.num_shape(); ++k) gt.shape[k] = 0.4 * rng.normal();
  struct Osc {
    double amp, freq, phase;
  };
  std::vector<Osc> osc(model.num_expr());
  for (auto& o : osc)
    o = {rng.uniform(0.2, 0.7), std::floor(rng.uniform(1.0, 3.99)), rng.uniform(0, 2 * M_PI)};
  const double jaw_amp = cfg.get<double>("synth.jaw_amplitude", 0.12);
  const double yaw_amp = cfg.get<double>("synth.yaw_amplitude", 0.15);

  MatrixXd latent_map(latent_dim, model.num_expr());
  for (int i = 0; i < latent_dim; ++i)
    for (int j = 0; j < model.num_expr(); ++j) latent_map(i, j) = rng.normal();

  for (int t = 0; t < frames; ++t) {
    const double phase = frames > 1 ? static_cast<double>(t) / (frames - 1) : 0.0;
    FrameTrack ft;
    ft.expr.resize(model.num_expr());
    for (int k = 0; k < model.num_expr(); ++k)
      ft.expr[k] = osc[k].amp * std::sin(2 * M_PI * osc[k].freq * phase + osc[k].phase);
    ft.joint_rot = MatX3d::Zero(model.num_joints(), 3);
    if (model.num_joints() > 1)
      ft.joint_rot(1, 0) = jaw_amp * 0.5 * (1.0 - std::cos(2 * M_PI * phase));  // jaw open
    ft.rot = Vector3d(0.0, yaw_amp * std::sin(2 * M_PI * phase), 0.0);
    ft.trans = Vector3d(0.004 * std::sin(4 * M_PI * phase), 0.0, 0.0);
    ft.latent = latent_map * ft.expr;
    gt.frames.push_back(std::move(ft));
  }

  const std::vector<Camera> cams =
      camera_ring(views, resolution, cfg.get<double>("synth.camera.radius", 0.55),
                  cfg.get<double>("synth.camera.span_deg", views > 1 ? 120.0 : 0.0),
                  cfg.get<double>("synth.camera.elevation_deg", 4.0),
                  cfg.get<double>("synth.camera.focal_factor", 1.6));

  fs::create_directories(fs::path(dir) / "gt");
  for (int v = 0; v < views; ++v) {
    char sub[32];
    std::snprintf(sub, sizeof(sub), "view_%02d", v);
    fs::create_directories(fs::path(dir) / "images" / sub);
  }

  // render every (view, frame); parallel across pairs
  RenderParams rparams;
  std::vector<std::string> rel_paths;
  const int total = views * frames;
  std::vector<int> coverage(total, 0);
  parallel_for(total, worker_threads(), [&](int i) {
    const int v = i / frames, t = i % frames;
    PoseInput pose = PoseInput::zeros(model);
    pose.shape = gt.shape;
    pose.expr = gt.frames[t].expr;
    pose.joint_rot = gt.frames[t].joint_rot;
    pose.global_rot = gt.frames[t].rot;
    pose.global_trans = gt.frames[t].trans;
    const MatX3d posed = pose_mesh(model, pose);
    const MatX3d posed_remesh = remesh.interpolate(posed);
    const RenderOutput out = render(cloud, remesh.faces, posed_remesh, cams[v], rparams);

    Image mask(resolution, resolution, 1);
    int fg = 0;
    for (int p = 0; p < resolution * resolution; ++p) {
      mask.plane(0)[p] = out.alpha.plane(0)[p] > 0.5 ? 1.0 : 0.0;
      fg += mask.plane(0)[p] > 0.5;
    }
    coverage[i] = fg;
    const Image pmap = render_pose_map(model, pose, cams[v]);

    write_png8(dir + "/" + image_rel_path(v, t, "rgb"), out.rgb);
    write_png16(dir + "/" + image_rel_path(v, t, "normal"), encode_signed(out.normal));
    write_png8(dir + "/" + image_rel_path(v, t, "mask"), mask);
    write_png16(dir + "/" + image_rel_path(v, t, "posemap"), encode_signed(pmap));
  });

  int total_fg = 0;
  for (int c : coverage) total_fg += c;
  if (total_fg == 0) throw data_error("synth: no foreground coverage at this resolution");

  for (int v = 0; v < views; ++v)
    for (int t = 0; t < frames; ++t)
      for (const char* kind : {"rgb", "normal", "mask", "posemap"})
        rel_paths.push_back(image_rel_path(v, t, kind));

  // written (possibly noise-perturbed) tracks
  Tracks noisy = gt;
  if (rot_sigma > 0 || expr_sigma > 0 || trans_sigma > 0) {
    Rng nrng(seed * 131 + 17);
    for (auto& ft : noisy.frames) {
      ft.rot += rot_sigma * nrng.normal3();
      for (int k = 0; k < ft.expr.size(); ++k) ft.expr[k] += expr_sigma * nrng.normal();
      ft.trans += trans_sigma * nrng.normal3();
    }
  }

  save_model(dir + "/model.gdhm", model);
  write_cameras_json(dir + "/cameras.json", cams);
  write_tracks_json(dir + "/tracks.json", noisy);
  write_tracks_json(dir + "/gt/tracks.json", gt);
  save_cloud(dir + "/gt/cloud.gdhm", cloud);
  rel_paths.push_back("model.gdhm");
  rel_paths.push_back("cameras.json");
  rel_paths.push_back("tracks.json");
  rel_paths.push_back("gt/tracks.json");
  rel_paths.push_back("gt/cloud.gdhm");

  BundleMeta meta;
  meta.views = views;
  meta.frames = frames;
  meta.resolution = resolution;
  meta.remesh_resolution = remesh_res;
  meta.remesh_max_hops = max_hops;
  meta.gaussians_per_triangle = per_triangle;
  write_manifest(dir, meta, rel_paths);  // commit point

  OracleResult res;
  res.dir = dir;
  res.meta = meta;
  res.n_gaussians = cloud.size();
  return res;
}

}  // namespace gdhm
