#pragma once

#include <map>

#include "gdhm/adam.hpp"
#include "gdhm/config.hpp"
#include "gdhm/dataset.hpp"
#include "gdhm/fields.hpp"
#include "gdhm/losses.hpp"
#include "gdhm/schedule.hpp"
#include "gdhm/splat_render.hpp"
#include "gdhm/uv_remesh.hpp"

namespace gdhm {

// Joint optimization of Gaussian attributes, FLAME-parameter residuals and
// the expression-conditioned fields against a DatasetBundle. One sample
// (view, frame) per iteration; adaptive-moment steps per parameter group at
// the group's scheduled rate.
class Trainer {
public:
  Trainer(const DatasetBundle& bundle, const Config& config);

  struct StepStats {
    int64_t iter = 0;
    int view = 0, frame = 0;
    double total = 0, photometric = 0, normal = 0, position = 0, scale = 0, dynamics = 0;
  };

  StepStats step();
  void run();  // full loop: logging, pruning, checkpoints

  // Renders the current avatar for a bundle frame/camera (no gradients).
  RenderOutput render_frame(int view, int frame) const;
  RenderOutput render_camera(const Camera& cam, int frame) const;

  void save_checkpoint(const std::string& path) const;
  void load_checkpoint(const std::string& path);

  int64_t iteration() const { return iter_; }
  const GaussianCloud& cloud() const { return cloud_; }
  const AvatarParams& avatar_params() const { return params_; }
  const UvRemesh& remesh() const { return remesh_; }
  const HeadModel& model() const { return bundle_.model; }
  const DatasetBundle& bundle() const { return bundle_; }
  const std::vector<int>& train_views() const { return train_views_; }
  const std::map<std::string, ScheduleSpec>& schedules() const { return schedules_; }
  int64_t total_iters() const { return total_iters_; }
  const std::string& out_dir() const { return out_dir_; }

  // mean geodesic angle (radians) between effective and reference rotations
  double mean_rotation_error(const Tracks& reference) const;

private:
  PoseInput effective_pose(int frame) const;
  void prune();
  void adam_step_group(const std::string& name, double* params, const double* grads, int n);

  const DatasetBundle& bundle_;
  Config config_;

  UvRemesh remesh_;
  GaussianCloud cloud_;
  AvatarParams params_;
  DeformationField deform_;
  DynamicsField dynamics_;

  std::map<std::string, AdamState> adam_;
  std::map<std::string, ScheduleSpec> schedules_;
  LossWeights weights_;

  Rng rng_;
  int64_t iter_ = 0;
  int64_t total_iters_ = 0;
  int64_t log_interval_ = 100;
  int64_t checkpoint_interval_ = 0;
  int64_t prune_interval_ = 0;
  double prune_opacity_ = 0.005;
  bool optimize_residuals_ = true;
  bool enable_fields_ = true;
  std::vector<int> train_views_;
  std::string out_dir_;
  uint64_t config_hash_ = 0;
};

// Held-out evaluation: PSNR/SSIM/normal error per view plus rotation error
// against gt tracks when present. Returns a JSON report.
nlohmann::json evaluate_avatar(const Trainer& trainer, const std::vector<int>& views,
                               int frame_stride = 1);

}  // namespace gdhm
