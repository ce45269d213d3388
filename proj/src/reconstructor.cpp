#include "gdhm/reconstructor.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>

#include "gdhm/io_gdhm.hpp"
#include "gdhm/metrics.hpp"
#include "gdhm/rotation.hpp"
#include "gdhm/synthetic.hpp"

namespace fs = std::filesystem;

namespace gdhm {

namespace {

ScheduleSpec schedule_from_config(const Config& cfg, const std::string& key, double def_start,
                                  double def_peak, int64_t total) {
  const std::string base = "trainer.schedules." + key + ".";
  return ScheduleSpec::make(cfg.get<double>(base + "start", def_start),
                            cfg.get<double>(base + "peak", def_peak),
                            cfg.get<double>(base + "end", -1.0),
                            cfg.get<double>(base + "warmup_frac", 0.2),
                            cfg.get<double>(base + "stable_frac", 0.8), total);
}

}  // namespace

Trainer::Trainer(const DatasetBundle& bundle, const Config& config)
    : bundle_(bundle),
      config_(config),
      rng_(config.get<uint64_t>("trainer.seed", 0) + 0x9e3779b97f4a7c15ull) {
  total_iters_ = config.get<int64_t>("trainer.total_iters", 20000);
  log_interval_ = config.get<int64_t>("trainer.log_interval", 200);
  checkpoint_interval_ = config.get<int64_t>("trainer.checkpoint_interval", 0);
  prune_interval_ = config.get<int64_t>("trainer.prune_interval", 5000);
  prune_opacity_ = config.get<double>("trainer.prune_opacity", 0.005);
  optimize_residuals_ = config.get<bool>("trainer.optimize_residuals", true);
  enable_fields_ = config.get<bool>("trainer.enable_fields", true);
  out_dir_ = config.get<std::string>("trainer.out", "run");
  config_hash_ = config.hash();

  weights_.rgb = config.get<double>("trainer.loss.rgb", 0.8);
  weights_.ssim = config.get<double>("trainer.loss.ssim", 0.2);
  weights_.normal = config.get<double>("trainer.loss.normal", 0.1);
  weights_.position = config.get<double>("trainer.loss.position", 0.01);
  weights_.scale = config.get<double>("trainer.loss.scale", 1.0);
  weights_.dynamics = config.get<double>("trainer.loss.dynamics", 1e-3);
  weights_.position_threshold = config.get<double>("trainer.loss.position_threshold", 1.0);
  weights_.scale_threshold = config.get<double>("trainer.loss.scale_threshold", 0.6);

  const auto holdout = config.get<std::vector<int>>("trainer.holdout_views", {});
  for (int v = 0; v < bundle.meta.views; ++v)
    if (std::find(holdout.begin(), holdout.end(), v) == holdout.end())
      train_views_.push_back(v);
  if (train_views_.empty()) throw data_error("trainer: every view is held out");

  const int remesh_res =
      config.get<int>("remesh.resolution", bundle.meta.remesh_resolution > 0
                                               ? bundle.meta.remesh_resolution
                                               : 17);
  const int max_hops = config.get<int>("remesh.max_hops", bundle.meta.remesh_max_hops);
  remesh_ = remesh_uv(bundle.model, remesh_res, max_hops);

  const int per_triangle =
      config.get<int>("cloud.per_triangle", bundle.meta.gaussians_per_triangle);
  cloud_ = init_cloud(remesh_.faces, remesh_.vertices, per_triangle,
                      config.get<uint64_t>("cloud.seed", 11));

  params_ = AvatarParams::zeros(bundle.model, bundle.meta.frames);
  params_.shape = bundle.tracks.shape;
  for (int t = 0; t < bundle.meta.frames; ++t) {
    params_.frames[t].expr = bundle.tracks.frames[t].expr;
    params_.frames[t].joint_rot = bundle.tracks.frames[t].joint_rot;
    params_.frames[t].global_rot = bundle.tracks.frames[t].rot;
    params_.frames[t].global_trans = bundle.tracks.frames[t].trans;
  }

  const int latent_dim = static_cast<int>(bundle.tracks.frames.at(0).latent.size());
  const int hidden = config.get<int>("fields.hidden", 64);
  const int code_dim = config.get<int>("fields.code_dim", 16);
  deform_ = DeformationField::create(latent_dim, hidden,
                                     config.get<uint64_t>("fields.seed", 21));
  dynamics_ = DynamicsField::create(cloud_.size(), latent_dim, code_dim, hidden,
                                    config.get<uint64_t>("fields.seed", 21) + 1);

  // parameter groups
  const int n = cloud_.size();
  adam_["gauss_mu"].init(3 * n);
  adam_["gauss_quat"].init(4 * n);
  adam_["gauss_scale"].init(3 * n);
  adam_["gauss_opacity"].init(n);
  adam_["gauss_color"].init(3 * n);
  const int T = bundle.meta.frames;
  const int J = bundle.model.num_joints();
  adam_["resid_pose"].init(bundle.model.num_shape() + T * (3 * J + 6));
  adam_["resid_expr"].init(T * bundle.model.num_expr());
  adam_["deform"].init(deform_.num_params());
  adam_["dyn_mlp"].init(dynamics_.num_mlp_params());
  adam_["dyn_codes"].init(dynamics_.num_code_params());
  for (auto& [name, state] : adam_) {
    state.beta1 = config.get<double>("trainer.adam.beta1", 0.9);
    state.beta2 = config.get<double>("trainer.adam.beta2", 0.999);
    state.eps = config.get<double>("trainer.adam.eps", 1e-15);
  }

  const int64_t sched_total = std::max<int64_t>(total_iters_, 1);
  schedules_["gauss_mu"] =
      ScheduleSpec::flat(config.get<double>("trainer.lr.gauss_mu", 2e-3), sched_total);
  schedules_["gauss_quat"] =
      ScheduleSpec::flat(config.get<double>("trainer.lr.gauss_quat", 2e-3), sched_total);
  schedules_["gauss_scale"] =
      ScheduleSpec::flat(config.get<double>("trainer.lr.gauss_scale", 5e-3), sched_total);
  schedules_["gauss_opacity"] =
      ScheduleSpec::flat(config.get<double>("trainer.lr.gauss_opacity", 0.05), sched_total);
  schedules_["gauss_color"] =
      ScheduleSpec::flat(config.get<double>("trainer.lr.gauss_color", 5e-3), sched_total);
  schedules_["deform"] =
      ScheduleSpec::flat(config.get<double>("trainer.lr.deform", 1e-3), sched_total);
  schedules_["dyn_mlp"] =
      ScheduleSpec::flat(config.get<double>("trainer.lr.dyn_mlp", 1e-3), sched_total);
  schedules_["dyn_codes"] =
      ScheduleSpec::flat(config.get<double>("trainer.lr.dyn_codes", 1e-3), sched_total);
  // paper-faithful defaults for the FLAME residual groups: warmup from 1e-10,
  // peaks 1e-5 (pose/shape) and 1e-4 (expression-related)
  schedules_["resid_pose"] = schedule_from_config(config_, "resid_pose", 1e-10, 1e-5,
                                                  sched_total);
  schedules_["resid_expr"] = schedule_from_config(config_, "resid_expr", 1e-10, 1e-4,
                                                  sched_total);
}

PoseInput Trainer::effective_pose(int frame) const { return params_.effective(frame); }

void Trainer::adam_step_group(const std::string& name, double* params, const double* grads,
                              int n) {
  AdamState& st = adam_.at(name);
  if (st.size() != n) throw numeric_error("trainer: adam state size mismatch for " + name);
  const double lr = schedule_rate(schedules_.at(name), std::min(iter_, total_iters_));
  st.step(params, grads, lr);
}

Trainer::StepStats Trainer::step() {
  StepStats s;
  s.iter = iter_;
  const int n_pairs = static_cast<int>(train_views_.size()) * bundle_.meta.frames;
  const int pick = static_cast<int>(rng_.uniform_index(n_pairs));
  s.view = train_views_[pick / bundle_.meta.frames];
  s.frame = pick % bundle_.meta.frames;
  const Camera& cam = bundle_.cameras[s.view];
  const VectorXd& latent = bundle_.tracks.frames[s.frame].latent;

  // ---- forward ----
  const PoseInput pose = effective_pose(s.frame);
  PoseCache pose_cache;
  const MatX3d posed_orig = pose_mesh(bundle_.model, pose, &pose_cache);
  const MatX3d posed_remesh = remesh_.interpolate(posed_orig);

  MatX3d verts = posed_remesh;
  DeformationField::Cache deform_cache;
  MatX3d canon_remesh;
  if (enable_fields_) {
    // canonical expression-animated positions; treated as a constant input
    const MatX3d canon = canonical_expression_mesh(bundle_.model, pose.shape, pose.expr);
    canon_remesh = remesh_.interpolate(canon);
    verts += deform_.deform_vertices(canon_remesh, latent, &deform_cache);
  }

  ResidualBundle residuals;
  DynamicsField::Cache dyn_cache;
  GaussianCloud eff_cloud;
  if (enable_fields_) {
    residuals = dynamics_.dynamics_residuals(latent, &dyn_cache);
    eff_cloud = apply_residuals(cloud_, residuals);
  } else {
    residuals.init(cloud_.size());
    eff_cloud = cloud_;
  }

  RenderCache rcache;
  const RenderOutput out = render(eff_cloud, remesh_.faces, verts, cam, {}, &rcache);

  const Image& target_rgb = bundle_.rgb(s.view, s.frame);
  const Image& target_normal = bundle_.normal(s.view, s.frame);
  const Image& target_mask = bundle_.mask(s.view, s.frame);

  PhotometricCache photo_cache;
  s.photometric =
      photometric_loss(out.rgb, target_rgb, weights_.rgb, weights_.ssim, &photo_cache);
  s.normal = normal_loss(out.normal, target_normal, target_mask, weights_.normal);
  s.position = weights_.position * threshold_l1(eff_cloud.mu, weights_.position_threshold);
  MatX3d activated_scale = eff_cloud.log_scale.array().exp().matrix();
  s.scale = weights_.scale * threshold_l1(activated_scale, weights_.scale_threshold);
  s.dynamics = weights_.dynamics * residual_sq_mean(residuals);
  s.total = s.photometric + s.normal + s.position + s.scale + s.dynamics;

  if (!std::isfinite(s.total)) {
    fs::create_directories(out_dir_);
    std::ofstream dump(out_dir_ + "/diagnostic.json");
    dump << "{\"iter\":" << iter_ << ",\"view\":" << s.view << ",\"frame\":" << s.frame
         << ",\"photometric\":" << s.photometric << ",\"normal\":" << s.normal
         << ",\"position\":" << s.position << ",\"scale\":" << s.scale
         << ",\"dynamics\":" << s.dynamics << "}\n";
    throw numeric_error("trainer: non-finite loss at iteration " + std::to_string(iter_));
  }

  // ---- backward ----
  Image d_rgb(out.rgb.h, out.rgb.w, 3), d_normal(out.rgb.h, out.rgb.w, 3),
      d_alpha(out.rgb.h, out.rgb.w, 1);
  photometric_backward(out.rgb, target_rgb, weights_.rgb, weights_.ssim, photo_cache, d_rgb);
  normal_loss_backward(out.normal, target_normal, target_mask, weights_.normal, d_normal);

  CloudGrads d_eff;
  d_eff.init(cloud_.size());
  MatX3d d_verts = MatX3d::Zero(verts.rows(), 3);
  render_backward(eff_cloud, remesh_.faces, verts, cam, rcache, d_rgb, d_normal, d_alpha,
                  d_eff, d_verts);

  // regularizers act on the effective parameters
  threshold_l1_backward(eff_cloud.mu, weights_.position_threshold, weights_.position,
                        d_eff.d_mu);
  {
    MatX3d d_act = MatX3d::Zero(cloud_.size(), 3);
    threshold_l1_backward(activated_scale, weights_.scale_threshold, weights_.scale, d_act);
    d_eff.d_log_scale.array() += d_act.array() * activated_scale.array();
  }

  CloudGrads d_cloud;
  d_cloud.init(cloud_.size());
  ResidualBundle d_residuals;
  d_residuals.init(cloud_.size());
  if (enable_fields_) {
    apply_residuals_backward(cloud_, residuals, d_eff, d_cloud, d_residuals);
    residual_sq_mean_backward(residuals, weights_.dynamics, d_residuals);
  } else {
    d_cloud = d_eff;
  }

  // ---- parameter updates ----
  adam_step_group("gauss_mu", cloud_.mu.data(), d_cloud.d_mu.data(), 3 * cloud_.size());
  adam_step_group("gauss_quat", cloud_.quat.data(), d_cloud.d_quat.data(), 4 * cloud_.size());
  adam_step_group("gauss_scale", cloud_.log_scale.data(), d_cloud.d_log_scale.data(),
                  3 * cloud_.size());
  adam_step_group("gauss_opacity", cloud_.opacity_logit.data(),
                  d_cloud.d_opacity_logit.data(), cloud_.size());
  adam_step_group("gauss_color", cloud_.color_raw.data(), d_cloud.d_color_raw.data(),
                  3 * cloud_.size());

  if (enable_fields_) {
    const DynamicsField::Grads dyn_g = dynamics_.backward(dyn_cache, d_residuals);
    std::vector<double> flat(dynamics_.num_mlp_params()), gflat(dynamics_.num_mlp_params());
    dynamics_.mlp.to_flat(flat.data());
    Mlp::grads_to_flat(dyn_g.mlp, gflat.data());
    adam_step_group("dyn_mlp", flat.data(), gflat.data(), dynamics_.num_mlp_params());
    dynamics_.mlp.from_flat(flat.data());
    // codes are plain matrices; MatrixXd storage is contiguous
    MatrixXd code_grads = dyn_g.codes;
    adam_step_group("dyn_codes", dynamics_.codes.data(), code_grads.data(),
                    dynamics_.num_code_params());

    const DeformationField::Grads def_g = deform_.backward(deform_cache, d_verts);
    std::vector<double> dflat(deform_.num_params()), dgflat(deform_.num_params());
    deform_.to_flat(dflat.data());
    DeformationField::grads_to_flat(def_g, dgflat.data());
    adam_step_group("deform", dflat.data(), dgflat.data(), deform_.num_params());
    deform_.from_flat(dflat.data());
  }

  if (optimize_residuals_) {
    // vertices flow back through the remesh interpolation into the original
    // mesh and the blendshape/skinning chain
    const MatX3d d_posed_orig =
        remesh_.interpolate_backward(bundle_.model.num_vertices(), d_verts);
    const PoseInput d_pose = pose_mesh_backward(bundle_.model, pose_cache, d_posed_orig);

    const int T = bundle_.meta.frames;
    const int J = bundle_.model.num_joints();
    const int Nb = bundle_.model.num_shape();
    const int Ne = bundle_.model.num_expr();

    // pose/shape group: [shape | per frame: joints, rot, trans]
    VectorXd pose_params = VectorXd::Zero(Nb + T * (3 * J + 6));
    VectorXd pose_grads = VectorXd::Zero(pose_params.size());
    pose_params.head(Nb) = params_.shape_residual;
    pose_grads.head(Nb) = d_pose.shape;
    for (int t = 0; t < T; ++t) {
      const int base = Nb + t * (3 * J + 6);
      for (int j = 0; j < J; ++j)
        for (int k = 0; k < 3; ++k)
          pose_params[base + 3 * j + k] = params_.residuals[t].joint_rot(j, k);
      pose_params.segment(base + 3 * J, 3) = params_.residuals[t].global_rot;
      pose_params.segment(base + 3 * J + 3, 3) = params_.residuals[t].global_trans;
      if (t == s.frame) {
        for (int j = 0; j < J; ++j)
          for (int k = 0; k < 3; ++k) pose_grads[base + 3 * j + k] = d_pose.joint_rot(j, k);
        pose_grads.segment(base + 3 * J, 3) = d_pose.global_rot;
        pose_grads.segment(base + 3 * J + 3, 3) = d_pose.global_trans;
      }
    }
    adam_step_group("resid_pose", pose_params.data(), pose_grads.data(),
                    static_cast<int>(pose_params.size()));
    params_.shape_residual = pose_params.head(Nb);
    for (int t = 0; t < T; ++t) {
      const int base = Nb + t * (3 * J + 6);
      for (int j = 0; j < J; ++j)
        for (int k = 0; k < 3; ++k)
          params_.residuals[t].joint_rot(j, k) = pose_params[base + 3 * j + k];
      params_.residuals[t].global_rot = pose_params.segment(base + 3 * J, 3);
      params_.residuals[t].global_trans = pose_params.segment(base + 3 * J + 3, 3);
    }

    VectorXd expr_params = VectorXd::Zero(T * Ne);
    VectorXd expr_grads = VectorXd::Zero(T * Ne);
    for (int t = 0; t < T; ++t) expr_params.segment(t * Ne, Ne) = params_.residuals[t].expr;
    expr_grads.segment(s.frame * Ne, Ne) = d_pose.expr;
    adam_step_group("resid_expr", expr_params.data(), expr_grads.data(),
                    static_cast<int>(expr_params.size()));
    for (int t = 0; t < T; ++t) params_.residuals[t].expr = expr_params.segment(t * Ne, Ne);
  } else {
    // keep group step counts aligned with the iteration for determinism
    VectorXd zp = VectorXd::Zero(adam_.at("resid_pose").size());
    VectorXd zg = VectorXd::Zero(zp.size());
    adam_step_group("resid_pose", zp.data(), zg.data(), static_cast<int>(zp.size()));
    VectorXd ep = VectorXd::Zero(adam_.at("resid_expr").size());
    VectorXd eg = VectorXd::Zero(ep.size());
    adam_step_group("resid_expr", ep.data(), eg.data(), static_cast<int>(ep.size()));
  }

  ++iter_;
  if (prune_interval_ > 0 && iter_ % prune_interval_ == 0 && iter_ < total_iters_) prune();
  return s;
}

void Trainer::prune() {
  std::vector<int> drop;
  for (int g = 0; g < cloud_.size(); ++g)
    if (cloud_.activated_opacity(g) < prune_opacity_) drop.push_back(g);
  if (drop.empty()) return;
  cloud_.remove(drop);
  dynamics_.remove_gaussians(drop);
  adam_.at("gauss_mu").remove_rows(drop, 3);
  adam_.at("gauss_quat").remove_rows(drop, 4);
  adam_.at("gauss_scale").remove_rows(drop, 3);
  adam_.at("gauss_opacity").remove_rows(drop, 1);
  adam_.at("gauss_color").remove_rows(drop, 3);
  adam_.at("dyn_codes").remove_rows(drop, dynamics_.code_dim);
  std::cerr << "trainer: pruned " << drop.size() << " gaussians at iter " << iter_ << "\n";
}

void Trainer::run() {
  fs::create_directories(out_dir_);
  std::ofstream log(out_dir_ + "/train_log.jsonl", std::ios::app);
  while (iter_ < total_iters_) {
    const StepStats s = step();
    if (log_interval_ > 0 && (s.iter % log_interval_ == 0 || iter_ == total_iters_)) {
      log << "{\"iter\":" << s.iter << ",\"total\":" << s.total
          << ",\"photometric\":" << s.photometric << ",\"normal\":" << s.normal
          << ",\"position\":" << s.position << ",\"scale\":" << s.scale
          << ",\"dynamics\":" << s.dynamics
          << ",\"lr_pose\":" << schedule_rate(schedules_.at("resid_pose"), s.iter)
          << ",\"lr_expr\":" << schedule_rate(schedules_.at("resid_expr"), s.iter)
          << ",\"gaussians\":" << cloud_.size() << "}\n";
      log.flush();
    }
    if (checkpoint_interval_ > 0 && iter_ % checkpoint_interval_ == 0 &&
        iter_ < total_iters_) {
      char name[64];
      std::snprintf(name, sizeof(name), "/ckpt_%06lld.gdhm",
                    static_cast<long long>(iter_));
      save_checkpoint(out_dir_ + name);
    }
  }
  save_checkpoint(out_dir_ + "/ckpt_final.gdhm");
}

RenderOutput Trainer::render_frame(int view, int frame) const {
  return render_camera(bundle_.cameras[view], frame);
}

RenderOutput Trainer::render_camera(const Camera& cam, int frame) const {
  const PoseInput pose = params_.effective(frame);
  const MatX3d posed_orig = pose_mesh(bundle_.model, pose);
  MatX3d verts = remesh_.interpolate(posed_orig);
  GaussianCloud eff = cloud_;
  const VectorXd& latent = bundle_.tracks.frames[frame].latent;
  if (enable_fields_) {
    const MatX3d canon = canonical_expression_mesh(bundle_.model, pose.shape, pose.expr);
    verts += deform_.deform_vertices(remesh_.interpolate(canon), latent);
    eff = apply_residuals(cloud_, dynamics_.dynamics_residuals(latent));
  }
  return render(eff, remesh_.faces, verts, cam);
}

void Trainer::save_checkpoint(const std::string& path) const {
  GdhmFile f;
  const int64_t it = iter_;
  f.add_i64("iteration", {1}, &it);
  const int64_t ch = static_cast<int64_t>(config_hash_);
  f.add_i64("config_hash", {1}, &ch);
  {
    const std::string rs = rng_.serialize();
    f.add_u8("rng_state", {rs.size()},
             reinterpret_cast<const uint8_t*>(rs.data()));
  }
  const uint64_t n = cloud_.size();
  std::vector<int32_t> pf(cloud_.parent_face.begin(), cloud_.parent_face.end());
  f.add_i32("cloud.parent_face", {n}, pf.data());
  f.add_f64("cloud.mu", {n, 3}, cloud_.mu.data());
  f.add_f64("cloud.quat", {n, 4}, cloud_.quat.data());
  f.add_f64("cloud.log_scale", {n, 3}, cloud_.log_scale.data());
  f.add_f64("cloud.opacity_logit", {n}, cloud_.opacity_logit.data());
  f.add_f64("cloud.color_raw", {n, 3}, cloud_.color_raw.data());

  const uint64_t T = bundle_.meta.frames;
  const uint64_t J = bundle_.model.num_joints();
  const uint64_t Nb = bundle_.model.num_shape();
  const uint64_t Ne = bundle_.model.num_expr();
  f.add_f64("resid.shape", {Nb}, params_.shape_residual.data());
  {
    std::vector<double> buf;
    for (const auto& r : params_.residuals)
      buf.insert(buf.end(), r.expr.data(), r.expr.data() + Ne);
    f.add_f64("resid.expr", {T, Ne}, buf.data());
    buf.clear();
    for (const auto& r : params_.residuals)
      buf.insert(buf.end(), r.joint_rot.data(), r.joint_rot.data() + 3 * J);
    f.add_f64("resid.joint", {T, J, 3}, buf.data());
    buf.clear();
    for (const auto& r : params_.residuals) {
      buf.insert(buf.end(), r.global_rot.data(), r.global_rot.data() + 3);
      buf.insert(buf.end(), r.global_trans.data(), r.global_trans.data() + 3);
    }
    f.add_f64("resid.global", {T, 6}, buf.data());
  }
  {
    std::vector<double> buf(deform_.num_params());
    deform_.to_flat(buf.data());
    f.add_f64("deform.flat", {buf.size()}, buf.data());
    buf.assign(dynamics_.num_mlp_params(), 0.0);
    dynamics_.mlp.to_flat(buf.data());
    f.add_f64("dyn.mlp.flat", {buf.size()}, buf.data());
  }
  f.add_f64("dyn.codes", {n, static_cast<uint64_t>(dynamics_.code_dim)},
            dynamics_.codes.data());
  for (const auto& [name, st] : adam_) {
    f.add_f64("adam." + name + ".m", {static_cast<uint64_t>(st.size())}, st.m.data());
    f.add_f64("adam." + name + ".v", {static_cast<uint64_t>(st.size())}, st.v.data());
    f.add_i64("adam." + name + ".t", {1}, &st.t);
  }
  f.write(path);
}

void Trainer::load_checkpoint(const std::string& path) {
  const GdhmFile f = GdhmFile::read(path);
  iter_ = f.require("iteration").as_longs()[0];
  const uint64_t ch = static_cast<uint64_t>(f.require("config_hash").as_longs()[0]);
  if (ch != config_hash_)
    std::cerr << "trainer: checkpoint config hash differs from the active config\n";
  {
    const Chunk& c = f.require("rng_state");
    rng_.deserialize(std::string(c.payload.begin(), c.payload.end()));
  }
  const auto pf = f.require("cloud.parent_face").as_ints();
  const int n = static_cast<int>(pf.size());
  cloud_.resize(n);
  cloud_.parent_face.assign(pf.begin(), pf.end());
  auto fill = [&](const char* name, double* dst, int count) {
    const auto v = f.require(name).as_doubles();
    if (static_cast<int>(v.size()) != count)
      throw data_error(std::string("checkpoint: bad size for ") + name);
    std::copy(v.begin(), v.end(), dst);
  };
  fill("cloud.mu", cloud_.mu.data(), 3 * n);
  fill("cloud.quat", cloud_.quat.data(), 4 * n);
  fill("cloud.log_scale", cloud_.log_scale.data(), 3 * n);
  fill("cloud.opacity_logit", cloud_.opacity_logit.data(), n);
  fill("cloud.color_raw", cloud_.color_raw.data(), 3 * n);

  const int T = bundle_.meta.frames;
  const int J = bundle_.model.num_joints();
  const int Nb = bundle_.model.num_shape();
  const int Ne = bundle_.model.num_expr();
  fill("resid.shape", params_.shape_residual.data(), Nb);
  {
    const auto v = f.require("resid.expr").as_doubles();
    for (int t = 0; t < T; ++t)
      std::copy(v.begin() + t * Ne, v.begin() + (t + 1) * Ne,
                params_.residuals[t].expr.data());
    const auto jv = f.require("resid.joint").as_doubles();
    for (int t = 0; t < T; ++t)
      std::copy(jv.begin() + t * 3 * J, jv.begin() + (t + 1) * 3 * J,
                params_.residuals[t].joint_rot.data());
    const auto gv = f.require("resid.global").as_doubles();
    for (int t = 0; t < T; ++t) {
      for (int k = 0; k < 3; ++k) {
        params_.residuals[t].global_rot[k] = gv[t * 6 + k];
        params_.residuals[t].global_trans[k] = gv[t * 6 + 3 + k];
      }
    }
  }
  {
    std::vector<double> buf(deform_.num_params());
    const auto v = f.require("deform.flat").as_doubles();
    if (v.size() != buf.size()) throw data_error("checkpoint: deform size mismatch");
    deform_.from_flat(v.data());
    const auto mv = f.require("dyn.mlp.flat").as_doubles();
    if (static_cast<int>(mv.size()) != dynamics_.num_mlp_params())
      throw data_error("checkpoint: dynamics mlp size mismatch");
    dynamics_.mlp.from_flat(mv.data());
  }
  {
    const Chunk& c = f.require("dyn.codes");
    dynamics_.codes.resize(n, dynamics_.code_dim);
    const auto v = c.as_doubles();
    if (static_cast<int>(v.size()) != n * dynamics_.code_dim)
      throw data_error("checkpoint: codes size mismatch");
    std::copy(v.begin(), v.end(), dynamics_.codes.data());
  }
  for (auto& [name, st] : adam_) {
    const auto m = f.require("adam." + name + ".m").as_doubles();
    const auto v = f.require("adam." + name + ".v").as_doubles();
    st.m = Eigen::Map<const VectorXd>(m.data(), m.size());
    st.v = Eigen::Map<const VectorXd>(v.data(), v.size());
    st.t = f.require("adam." + name + ".t").as_longs()[0];
  }
}

double Trainer::mean_rotation_error(const Tracks& reference) const {
  double sum = 0;
  const int T = bundle_.meta.frames;
  for (int t = 0; t < T; ++t) {
    const PoseInput eff = params_.effective(t);
    const Matrix3d r_eff = rodrigues(eff.global_rot);
    const Matrix3d r_ref = rodrigues(reference.frames[t].rot);
    const double c = std::clamp(((r_eff.transpose() * r_ref).trace() - 1.0) / 2.0, -1.0, 1.0);
    sum += std::acos(c);
  }
  return sum / T;
}

nlohmann::json evaluate_avatar(const Trainer& trainer, const std::vector<int>& views,
                               int frame_stride) {
  const DatasetBundle& bundle = trainer.bundle();
  nlohmann::json report;
  nlohmann::json per_view = nlohmann::json::object();
  double psnr_all = 0, ssim_all = 0, nerr_all = 0;
  int count = 0, nerr_count = 0;
  for (int v : views) {
    double psnr_sum = 0, ssim_sum = 0, nerr_sum = 0;
    int n = 0, nerr_n = 0;
    for (int t = 0; t < bundle.meta.frames; t += frame_stride) {
      const RenderOutput out = trainer.render_frame(v, t);
      psnr_sum += psnr(out.rgb, bundle.rgb(v, t));
      ssim_sum += ssim(out.rgb, bundle.rgb(v, t));
      const auto ne =
          masked_normal_error_deg(out.normal, bundle.normal(v, t), bundle.mask(v, t));
      if (ne) {
        nerr_sum += *ne;
        ++nerr_n;
      }
      ++n;
    }
    nlohmann::json vj;
    vj["psnr"] = psnr_sum / n;
    vj["ssim"] = ssim_sum / n;
    if (nerr_n > 0) vj["normal_error_deg"] = nerr_sum / nerr_n;
    vj["frames"] = n;
    per_view["view_" + std::to_string(v)] = vj;
    psnr_all += psnr_sum;
    ssim_all += ssim_sum;
    nerr_all += nerr_sum;
    count += n;
    nerr_count += nerr_n;
  }
  report["per_view"] = per_view;
  report["aggregate"]["psnr"] = psnr_all / std::max(count, 1);
  report["aggregate"]["ssim"] = ssim_all / std::max(count, 1);
  if (nerr_count > 0) report["aggregate"]["normal_error_deg"] = nerr_all / nerr_count;
  if (bundle.has_ground_truth()) {
    const Tracks gt = bundle.ground_truth_tracks();
    report["aggregate"]["rotation_error_rad"] = trainer.mean_rotation_error(gt);
  }
  return report;
}

}  // namespace gdhm
