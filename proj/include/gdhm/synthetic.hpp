#pragma once

#include "gdhm/config.hpp"
#include "gdhm/dataset.hpp"
#include "gdhm/gaussian_cloud.hpp"

namespace gdhm {

// p_i = priority_i * size_i / sum_j priority_j * size_j
VectorXd sampler_probabilities(const std::vector<std::pair<double, double>>& priority_size);

// Inverse-CDF draw; deterministic under a fixed rng stream.
int draw_sample(const VectorXd& probabilities, Rng& rng);

// Cameras on a ring around the head, looking at the origin.
std::vector<Camera> camera_ring(int n_views, int resolution, double radius, double span_deg,
                                double elevation_deg, double focal_factor);

void save_cloud(const std::string& path, const GaussianCloud& cloud);
GaussianCloud load_cloud(const std::string& path);

struct OracleResult {
  std::string dir;
  BundleMeta meta;
  int n_gaussians = 0;
};

// Renders a hidden ground-truth avatar (toy head + randomized triangle-bound
// cloud + smooth expression track) into a complete DatasetBundle; the clean
// tracks and GT cloud go under gt/ for evaluation. Optional track noise
// emulates tracking error for the residual-learning experiments.
// Reads the "synth" section of the config.
OracleResult generate_oracle_scene(const Config& config);

}  // namespace gdhm
