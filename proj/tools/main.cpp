#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "gdhm/config.hpp"
#include "gdhm/dataset.hpp"
#include "gdhm/gradsuite.hpp"
#include "gdhm/io_gdhm.hpp"
#include "gdhm/io_ply.hpp"
#include "gdhm/io_png.hpp"
#include "gdhm/metrics.hpp"
#include "gdhm/pose_map.hpp"
#include "gdhm/reconstructor.hpp"
#include "gdhm/synthetic.hpp"
#include "gdhm/uv_remesh.hpp"

namespace fs = std::filesystem;
using namespace gdhm;

namespace {

Config assemble_config(const std::string& config_path,
                       const std::vector<std::string>& overrides) {
  Config cfg;
  if (!config_path.empty()) cfg = Config::from_file(config_path);
  for (const auto& kv : overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos)
      throw data_error("--set expects key=value, got '" + kv + "'");
    cfg.set_from_string(kv.substr(0, eq), kv.substr(eq + 1));
  }
  set_worker_threads(cfg.get<int>("threads", 2));
  return cfg;
}

int cmd_synth(const Config& cfg) {
  const OracleResult res = generate_oracle_scene(cfg);
  nlohmann::json j;
  j["bundle"] = res.dir;
  j["views"] = res.meta.views;
  j["frames"] = res.meta.frames;
  j["resolution"] = res.meta.resolution;
  j["gaussians"] = res.n_gaussians;
  std::cout << j.dump(2) << "\n";
  return 0;
}

int cmd_reconstruct(const Config& cfg, const std::string& data_dir,
                    const std::string& resume) {
  const DatasetBundle bundle = load_bundle(data_dir);
  Trainer trainer(bundle, cfg);
  if (!resume.empty()) trainer.load_checkpoint(resume);
  trainer.run();
  std::cout << "{\"checkpoint\":\"" << trainer.out_dir() << "/ckpt_final.gdhm\""
            << ",\"iterations\":" << trainer.iteration() << "}\n";
  return 0;
}

int cmd_render(const Config& cfg, const std::string& data_dir, const std::string& checkpoint,
               const std::string& camera_path, const std::string& out_dir, int frame_begin,
               int frame_end, bool write_ply) {
  const DatasetBundle bundle = load_bundle(data_dir);
  Trainer trainer(bundle, cfg);
  trainer.load_checkpoint(checkpoint);
  const std::vector<Camera> cams =
      camera_path.empty() ? bundle.cameras : read_cameras_json(camera_path);
  if (frame_end < 0 || frame_end > bundle.meta.frames) frame_end = bundle.meta.frames;
  fs::create_directories(out_dir);
  for (size_t c = 0; c < cams.size(); ++c) {
    for (int t = frame_begin; t < frame_end; ++t) {
      const RenderOutput out = trainer.render_camera(cams[c], t);
      char name[128];
      std::snprintf(name, sizeof(name), "%s/cam%02zu_frame%04d", out_dir.c_str(), c, t);
      write_png8(std::string(name) + "_rgb.png", out.rgb);
      write_png16(std::string(name) + "_normal.png", encode_signed(out.normal));
      write_png8(std::string(name) + "_alpha.png", out.alpha);
    }
  }
  if (write_ply) {
    const PoseInput pose = trainer.avatar_params().effective(frame_begin);
    const MatX3d posed = pose_mesh(bundle.model, pose);
    export_ply(out_dir + "/avatar.ply", trainer.cloud(), trainer.remesh().faces,
               trainer.remesh().interpolate(posed));
  }
  std::cout << "{\"rendered_cameras\":" << cams.size() << ",\"frames\":["
            << frame_begin << "," << frame_end << ")}" << "\n";
  return 0;
}

int cmd_eval(const Config& cfg, const std::string& data_dir, const std::string& checkpoint,
             const std::string& out_path, std::vector<int> views, int stride) {
  const DatasetBundle bundle = load_bundle(data_dir);
  Trainer trainer(bundle, cfg);
  trainer.load_checkpoint(checkpoint);
  if (views.empty())
    for (int v = 0; v < bundle.meta.views; ++v) views.push_back(v);
  const nlohmann::json report = evaluate_avatar(trainer, views, stride);
  if (!out_path.empty()) {
    std::ofstream f(out_path);
    f << report.dump(2) << "\n";
  }
  std::cout << report.dump(2) << "\n";
  return 0;
}

int cmd_remesh_check(const Config& cfg, const std::string& model_path,
                     std::vector<int> resolutions) {
  HeadModel model;
  if (!model_path.empty())
    model = load_model(model_path);
  else
    model = make_toy_model(cfg.get<uint64_t>("synth.model.seed", 1),
                           cfg.get<int>("synth.model.vertices", 950),
                           cfg.get<int>("synth.model.n_shape", 8),
                           cfg.get<int>("synth.model.n_expr", 6));
  if (resolutions.empty()) resolutions = {16, 32, 64};
  const int max_hops = cfg.get<int>("remesh.max_hops", 5);
  nlohmann::json out = nlohmann::json::array();
  for (int res : resolutions) {
    const UvRemesh r = remesh_uv(model, res, max_hops);
    int empty = 0, hop = 0;
    for (const DropReason d : r.drop_reason) {
      empty += d == DropReason::empty_texel;
      hop += d == DropReason::hop_violation;
    }
    nlohmann::json j;
    j["resolution"] = res;
    j["max_hops"] = max_hops;
    j["candidates"] = r.num_candidates();
    j["retained"] = r.num_faces();
    j["dropped_empty_texel"] = empty;
    j["dropped_hop_violation"] = hop;
    j["vertices"] = r.num_vertices();
    out.push_back(std::move(j));
  }
  std::cout << out.dump(2) << "\n";
  return 0;
}

int cmd_posemap(const Config& cfg, const std::string& model_path, const std::string& cam_path,
                int cam_index, const std::string& tracks_path, int frame,
                const std::string& out_path) {
  const HeadModel model = model_path.empty()
                              ? make_toy_model(cfg.get<uint64_t>("synth.model.seed", 1),
                                               cfg.get<int>("synth.model.vertices", 950),
                                               cfg.get<int>("synth.model.n_shape", 8),
                                               cfg.get<int>("synth.model.n_expr", 6))
                              : load_model(model_path);
  const std::vector<Camera> cams = read_cameras_json(cam_path);
  if (cam_index < 0 || cam_index >= static_cast<int>(cams.size()))
    throw data_error("posemap: camera index out of range");
  PoseInput pose = PoseInput::zeros(model);
  if (!tracks_path.empty()) {
    const Tracks tracks = read_tracks_json(tracks_path);
    if (frame < 0 || frame >= static_cast<int>(tracks.frames.size()))
      throw data_error("posemap: frame out of range");
    pose.shape = tracks.shape;
    pose.expr = tracks.frames[frame].expr;
    pose.joint_rot = tracks.frames[frame].joint_rot;
    pose.global_rot = tracks.frames[frame].rot;
    pose.global_trans = tracks.frames[frame].trans;
  }
  const Image map = render_pose_map(model, pose, cams[cam_index]);
  write_png16(out_path, encode_signed(map));
  std::cout << "{\"posemap\":\"" << out_path << "\"}\n";
  return 0;
}

int cmd_gradcheck(const Config& cfg, int seeds) {
  (void)cfg;
  const auto results = run_grad_suite(seeds);
  bool all_pass = true;
  for (const auto& e : results) {
    std::cout << (e.pass ? "PASS" : "FAIL") << "  " << e.op << "  max_rel_err=" << e.max_rel_err
              << "  tol=" << e.tolerance << "  seeds=" << e.seeds << "\n";
    all_pass = all_pass && e.pass;
  }
  return all_pass ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gdhm: triangle-bound Gaussian head avatar reconstruction toolkit"};
  app.require_subcommand(1);
  app.fallthrough();  // global --config/--set are accepted after the subcommand
  std::string config_path;
  std::vector<std::string> overrides;
  app.add_option("--config", config_path, "JSON configuration file")->expected(1);
  app.add_option("--set", overrides, "override a config value (key=value), repeatable");

  auto* synth = app.add_subcommand("synth", "generate a synthetic oracle dataset bundle");

  auto* recon = app.add_subcommand("reconstruct", "fit an avatar to a dataset bundle");
  std::string data_dir, resume;
  recon->add_option("--data", data_dir, "dataset bundle directory");
  recon->add_option("--resume", resume, "checkpoint to resume from");

  auto* rend = app.add_subcommand("render", "render novel views from a checkpoint");
  std::string checkpoint, camera_path, out_dir = "renders";
  int frame_begin = 0, frame_end = -1;
  bool write_ply = false;
  rend->add_option("--data", data_dir, "dataset bundle directory");
  rend->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  rend->add_option("--cameras", camera_path, "camera-path JSON (defaults to bundle cameras)");
  rend->add_option("--out", out_dir, "output directory");
  rend->add_option("--frame-begin", frame_begin, "first frame");
  rend->add_option("--frame-end", frame_end, "one past the last frame");
  rend->add_flag("--ply", write_ply, "also export the posed avatar as a splat PLY");

  auto* eval = app.add_subcommand("eval", "metrics report for a checkpoint vs. a bundle");
  std::string metrics_out;
  std::vector<int> eval_views;
  int eval_stride = 1;
  eval->add_option("--data", data_dir, "dataset bundle directory");
  eval->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  eval->add_option("--out", metrics_out, "metrics JSON output path");
  eval->add_option("--views", eval_views, "views to evaluate (default: all)");
  eval->add_option("--frame-stride", eval_stride, "evaluate every k-th frame");

  auto* rcheck = app.add_subcommand("remesh-check", "UV remesh validity statistics as JSON");
  std::string model_path;
  std::vector<int> resolutions;
  rcheck->add_option("--model", model_path, "GDHM model file (default: toy model)");
  rcheck->add_option("--resolution", resolutions, "grid resolutions (default 16 32 64)");

  auto* pmap = app.add_subcommand("posemap", "render a standalone head-pose map");
  std::string pm_cam_path, pm_tracks, pm_out = "posemap.png";
  int pm_cam_index = 0, pm_frame = 0;
  pmap->add_option("--model", model_path, "GDHM model file (default: toy model)");
  pmap->add_option("--cameras", pm_cam_path, "cameras JSON")->required();
  pmap->add_option("--camera-index", pm_cam_index, "camera to use");
  pmap->add_option("--tracks", pm_tracks, "tracks JSON for the pose");
  pmap->add_option("--frame", pm_frame, "frame in the tracks file");
  pmap->add_option("--out", pm_out, "output PNG (16-bit)");

  auto* gcheck = app.add_subcommand("gradcheck", "run the finite-difference gradient suite");
  int gc_seeds = 20;
  gcheck->add_option("--seeds", gc_seeds, "random seeds per operation");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);  // help goes to stdout, exit 0
  } catch (const CLI::ParseError& e) {
    std::cerr << app.help() << "\n";
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }

  try {
    const Config cfg = assemble_config(config_path, overrides);
    if (synth->parsed()) return cmd_synth(cfg);
    if (recon->parsed()) {
      if (data_dir.empty()) data_dir = cfg.get<std::string>("data", "");
      if (data_dir.empty()) throw data_error("reconstruct: --data (or config 'data') required");
      return cmd_reconstruct(cfg, data_dir, resume);
    }
    if (rend->parsed()) {
      if (data_dir.empty()) data_dir = cfg.get<std::string>("data", "");
      if (data_dir.empty()) throw data_error("render: --data (or config 'data') required");
      return cmd_render(cfg, data_dir, checkpoint, camera_path, out_dir, frame_begin,
                        frame_end, write_ply);
    }
    if (eval->parsed()) {
      if (data_dir.empty()) data_dir = cfg.get<std::string>("data", "");
      if (data_dir.empty()) throw data_error("eval: --data (or config 'data') required");
      return cmd_eval(cfg, data_dir, checkpoint, metrics_out, eval_views, eval_stride);
    }
    if (rcheck->parsed()) return cmd_remesh_check(cfg, model_path, resolutions);
    if (pmap->parsed())
      return cmd_posemap(cfg, model_path, pm_cam_path, pm_cam_index, pm_tracks, pm_frame,
                         pm_out);
    if (gcheck->parsed()) return cmd_gradcheck(cfg, gc_seeds);
  } catch (const numeric_error& e) {
    std::cerr << "numerical abort: " << e.what() << "\n";
    return 3;
  } catch (const data_error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
