#pragma once

#include "gdhm/camera.hpp"
#include "gdhm/head_model.hpp"
#include "gdhm/image.hpp"

namespace gdhm {

// Head-pose conditioning map: the mesh is posed with expression coefficients
// forced to zero, then vertex normals are rasterized in camera space with a
// z-buffer. Background pixels hold (0,0,0). These maps are bit-identical for
// any input expression by construction.
Image render_pose_map(const HeadModel& m, const PoseInput& params, const Camera& cam);

// z-buffered rasterization of arbitrary per-vertex attributes (barycentric
// interpolation in screen space, depth ties to the lower face index).
Image rasterize_vertex_attributes(const MatX3d& vertices, const MatX3i& faces,
                                  const MatX3d& attributes, const Camera& cam,
                                  const Vector3d& background);

}  // namespace gdhm
