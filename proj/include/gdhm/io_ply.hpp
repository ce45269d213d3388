#pragma once

#include <string>

#include "gdhm/gaussian_cloud.hpp"

namespace gdhm {

// Binary little-endian splat PLY: one vertex per (active) Gaussian with the
// 14 float properties x,y,z,opacity,scale_0..2,rot_0..3,f_dc_0..2. Opacity
// stays a logit, scales stay logs, colors use the SH DC convention
// (color = 0.5 + 0.28209479 * f_dc), matching common splat viewers.
void export_ply(const std::string& path, const GaussianCloud& cloud, const MatX3i& faces,
                const MatX3d& posed_vertices);

}  // namespace gdhm
