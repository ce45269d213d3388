#include "gdhm/io_ply.hpp"

#include <fstream>

#include "gdhm/rotation.hpp"

namespace gdhm {

void export_ply(const std::string& path, const GaussianCloud& cloud, const MatX3i& faces,
                const MatX3d& posed_vertices) {
  const WorldGaussians world = promote_to_world(cloud, faces, posed_vertices);
  int count = 0;
  for (int g = 0; g < cloud.size(); ++g) count += world.active[g];

  std::ofstream out(path, std::ios::binary);
  if (!out) throw data_error("ply: cannot open for writing: " + path);
  out << "ply\nformat binary_little_endian 1.0\n";
  out << "element vertex " << count << "\n";
  for (const char* p : {"x", "y", "z", "opacity", "scale_0", "scale_1", "scale_2", "rot_0",
                        "rot_1", "rot_2", "rot_3", "f_dc_0", "f_dc_1", "f_dc_2"})
    out << "property float " << p << "\n";
  out << "end_header\n";

  constexpr double kShC0 = 0.28209479177387814;
  for (int g = 0; g < cloud.size(); ++g) {
    if (!world.active[g]) continue;
    float rec[14];
    for (int k = 0; k < 3; ++k) rec[k] = static_cast<float>(world.position(g, k));
    rec[3] = static_cast<float>(cloud.opacity_logit[g]);
    for (int k = 0; k < 3; ++k) rec[4 + k] = static_cast<float>(std::log(world.scale(g, k)));
    const Vector4d q = mat_to_quat(world.rotation[g]);
    for (int k = 0; k < 4; ++k) rec[7 + k] = static_cast<float>(q[k]);
    const Vector3d col = cloud.activated_color(g);
    for (int k = 0; k < 3; ++k) rec[11 + k] = static_cast<float>((col[k] - 0.5) / kShC0);
    out.write(reinterpret_cast<const char*>(rec), sizeof(rec));
  }
  if (!out) throw data_error("ply: write failed: " + path);
}

}  // namespace gdhm
