#include "gdhm/uv_remesh.hpp"

#include <deque>
#include <map>
#include <mutex>
#include <sstream>
#include <unordered_map>

namespace gdhm {

FaceAdjacencyGraph build_face_adjacency(const MatX3i& faces) {
  const int F = static_cast<int>(faces.rows());
  std::map<std::pair<int, int>, std::vector<int>> edge_faces;
  for (int f = 0; f < F; ++f)
    for (int k = 0; k < 3; ++k) {
      int a = faces(f, k), b = faces(f, (k + 1) % 3);
      if (a > b) std::swap(a, b);
      auto& owners = edge_faces[{a, b}];
      owners.push_back(f);
      if (owners.size() > 2) {
        std::ostringstream msg;
        msg << "face graph: edge (" << a << "," << b << ") shared by more than two faces";
        throw data_error(msg.str());
      }
    }
  FaceAdjacencyGraph g;
  g.adjacency.resize(F);
  for (const auto& [edge, owners] : edge_faces)
    if (owners.size() == 2) {
      g.adjacency[owners[0]].push_back(owners[1]);
      g.adjacency[owners[1]].push_back(owners[0]);
    }
  for (auto& nbrs : g.adjacency) std::sort(nbrs.begin(), nbrs.end());
  return g;
}

const FaceAdjacencyGraph& face_adjacency_cached(const HeadModel& m) {
  static std::mutex mu;
  static std::unordered_map<uint64_t, FaceAdjacencyGraph> cache;
  const uint64_t key = m.topology_hash();
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(key);
  if (it == cache.end()) it = cache.emplace(key, build_face_adjacency(m.faces)).first;
  return it->second;
}

std::optional<int> hop_distance(const FaceAdjacencyGraph& g, int face_a, int face_b,
                                int max_hops) {
  if (face_a == face_b) return 0;
  if (max_hops <= 0) return std::nullopt;
  std::vector<uint8_t> visited(g.adjacency.size(), 0);
  std::deque<std::pair<int, int>> frontier;  // (face, depth)
  visited[face_a] = 1;
  frontier.emplace_back(face_a, 0);
  while (!frontier.empty()) {
    const auto [f, d] = frontier.front();
    frontier.pop_front();
    for (int n : g.adjacency[f]) {
      if (visited[n]) continue;
      if (n == face_b) return d + 1;
      visited[n] = 1;
      if (d + 1 < max_hops) frontier.emplace_back(n, d + 1);
    }
  }
  return std::nullopt;
}

bool validate_candidate(const FaceAdjacencyGraph& g, int f0, int f1, int f2, int max_hops) {
  return hop_distance(g, f0, f1, max_hops).has_value() &&
         hop_distance(g, f0, f2, max_hops).has_value() &&
         hop_distance(g, f1, f2, max_hops).has_value();
}

namespace {

inline double edge_fn(double ax, double ay, double bx, double by, double px, double py) {
  return (bx - ax) * (py - ay) - (by - ay) * (px - ax);
}

}  // namespace

UvGrid rasterize_uv_grid(const HeadModel& m, int resolution) {
  if (resolution < 1) throw data_error("rasterize_uv_grid: resolution must be >= 1");
  UvGrid grid;
  grid.resolution = resolution;
  grid.texels.assign(static_cast<size_t>(resolution) * resolution, UvSample{});
  std::vector<uint8_t> strict(grid.texels.size(), 0);
  std::vector<std::pair<int, int>> offenders;

  for (int f = 0; f < m.num_faces(); ++f) {
    const Vector2d v0 = m.uv_coords.row(m.uv_faces(f, 0)).transpose();
    const Vector2d v1 = m.uv_coords.row(m.uv_faces(f, 1)).transpose();
    const Vector2d v2 = m.uv_coords.row(m.uv_faces(f, 2)).transpose();
    const double area2 = edge_fn(v0.x(), v0.y(), v1.x(), v1.y(), v2.x(), v2.y());
    if (area2 == 0.0) continue;  // degenerate in UV: covers nothing
    const double s = area2 > 0 ? 1.0 : -1.0;

    const double lo_u = std::min({v0.x(), v1.x(), v2.x()});
    const double hi_u = std::max({v0.x(), v1.x(), v2.x()});
    const double lo_v = std::min({v0.y(), v1.y(), v2.y()});
    const double hi_v = std::max({v0.y(), v1.y(), v2.y()});
    const int ix0 = std::max(0, static_cast<int>(std::floor(lo_u * resolution - 0.5)));
    const int ix1 = std::min(resolution - 1, static_cast<int>(std::ceil(hi_u * resolution)));
    const int iy0 = std::max(0, static_cast<int>(std::floor(lo_v * resolution - 0.5)));
    const int iy1 = std::min(resolution - 1, static_cast<int>(std::ceil(hi_v * resolution)));

    for (int iy = iy0; iy <= iy1; ++iy)
      for (int ix = ix0; ix <= ix1; ++ix) {
        const double u = (ix + 0.5) / resolution;
        const double v = (iy + 0.5) / resolution;
        const double e0 = s * edge_fn(v0.x(), v0.y(), v1.x(), v1.y(), u, v);
        const double e1 = s * edge_fn(v1.x(), v1.y(), v2.x(), v2.y(), u, v);
        const double e2 = s * edge_fn(v2.x(), v2.y(), v0.x(), v0.y(), u, v);
        if (e0 < 0 || e1 < 0 || e2 < 0) continue;
        const bool is_strict = e0 > 0 && e1 > 0 && e2 > 0;
        UvSample& t = grid.texels[iy * resolution + ix];
        if (t.face >= 0) {
          // Interiors overlap iff either containment is strict; exact shared
          // boundaries resolve to the lowest face id.
          if (is_strict || strict[iy * resolution + ix]) offenders.emplace_back(t.face, f);
          continue;  // earlier (lower) face id wins
        }
        const double sum = e0 + e1 + e2;
        t.face = f;
        t.bary = Vector3d(e1 / sum, e2 / sum, e0 / sum);
        strict[iy * resolution + ix] = is_strict ? 1 : 0;
      }
  }

  if (!offenders.empty()) {
    std::sort(offenders.begin(), offenders.end());
    offenders.erase(std::unique(offenders.begin(), offenders.end()), offenders.end());
    std::ostringstream msg;
    msg << "rasterize_uv_grid: overlapping UV triangles:";
    for (const auto& [a, b] : offenders) msg << " (" << a << "," << b << ")";
    throw data_error(msg.str());
  }
  return grid;
}

UvRemesh remesh_uv(const HeadModel& m, int resolution, int max_hops) {
  if (resolution < 2) throw data_error("remesh_uv: resolution must be >= 2");
  const UvGrid grid = rasterize_uv_grid(m, resolution);
  const FaceAdjacencyGraph& graph = face_adjacency_cached(m);

  UvRemesh r;
  r.resolution = resolution;
  r.max_hops = max_hops;

  const int cells = resolution - 1;
  r.validity.reserve(2 * cells * cells);

  std::vector<int> vertex_of_texel(grid.texels.size(), -1);
  std::vector<std::array<int, 3>> kept_faces;

  auto texel_id = [&](int ix, int iy) { return iy * resolution + ix; };

  // cache pairwise verdicts: queries repeat heavily across neighboring cells
  std::unordered_map<uint64_t, bool> pair_ok;
  auto within = [&](int fa, int fb) {
    if (fa == fb) return true;
    if (fa > fb) std::swap(fa, fb);
    const uint64_t key = (static_cast<uint64_t>(fa) << 32) | static_cast<uint32_t>(fb);
    auto it = pair_ok.find(key);
    if (it != pair_ok.end()) return it->second;
    const bool ok = hop_distance(graph, fa, fb, max_hops).has_value();
    pair_ok.emplace(key, ok);
    return ok;
  };

  auto consider = [&](int t0, int t1, int t2) {
    r.candidate_texels.push_back({t0, t1, t2});
    const UvSample& s0 = grid.texels[t0];
    const UvSample& s1 = grid.texels[t1];
    const UvSample& s2 = grid.texels[t2];
    if (s0.face < 0 || s1.face < 0 || s2.face < 0) {
      r.validity.push_back(0);
      r.drop_reason.push_back(DropReason::empty_texel);
      return;
    }
    if (!(within(s0.face, s1.face) && within(s0.face, s2.face) && within(s1.face, s2.face))) {
      r.validity.push_back(0);
      r.drop_reason.push_back(DropReason::hop_violation);
      return;
    }
    r.validity.push_back(1);
    r.drop_reason.push_back(DropReason::kept);
    kept_faces.push_back({t0, t1, t2});
  };

  for (int iy = 0; iy < cells; ++iy)
    for (int ix = 0; ix < cells; ++ix) {
      const int t00 = texel_id(ix, iy), t10 = texel_id(ix + 1, iy);
      const int t01 = texel_id(ix, iy + 1), t11 = texel_id(ix + 1, iy + 1);
      consider(t00, t10, t11);
      consider(t00, t11, t01);
    }

  // compact vertices over texels actually used
  std::vector<int> used;
  for (const auto& tri : kept_faces)
    for (int t : tri)
      if (vertex_of_texel[t] < 0) {
        vertex_of_texel[t] = static_cast<int>(used.size());
        used.push_back(t);
      }

  r.vertices.resize(used.size(), 3);
  r.bary.resize(used.size(), 3);
  r.src_face.resize(used.size());
  r.src_corners.resize(used.size(), 3);
  for (size_t i = 0; i < used.size(); ++i) {
    const UvSample& s = grid.texels[used[i]];
    r.src_face[i] = s.face;
    r.bary.row(i) = s.bary.transpose();
    Vector3d p = Vector3d::Zero();
    for (int k = 0; k < 3; ++k) {
      r.src_corners(static_cast<int>(i), k) = m.faces(s.face, k);
      p += s.bary[k] * m.template_vertices.row(m.faces(s.face, k)).transpose();
    }
    r.vertices.row(i) = p.transpose();
  }
  r.faces.resize(kept_faces.size(), 3);
  for (size_t i = 0; i < kept_faces.size(); ++i)
    for (int k = 0; k < 3; ++k) r.faces(static_cast<int>(i), k) = vertex_of_texel[kept_faces[i][k]];
  return r;
}

MatX3d UvRemesh::interpolate(const MatX3d& source) const {
  MatX3d out(num_vertices(), 3);
  for (int i = 0; i < num_vertices(); ++i) {
    Vector3d p = Vector3d::Zero();
    for (int k = 0; k < 3; ++k) p += bary(i, k) * source.row(src_corners(i, k)).transpose();
    out.row(i) = p.transpose();
  }
  return out;
}

MatX3d UvRemesh::interpolate_backward(int source_vertex_count, const MatX3d& d_remeshed) const {
  MatX3d d_src = MatX3d::Zero(source_vertex_count, 3);
  for (int i = 0; i < num_vertices(); ++i)
    for (int k = 0; k < 3; ++k)
      d_src.row(src_corners(i, k)) += bary(i, k) * d_remeshed.row(i);
  return d_src;
}

Image render_position_map(const HeadModel& m, const VectorXd& shape, const VectorXd& expr,
                          int resolution) {
  const UvGrid grid = rasterize_uv_grid(m, resolution);
  const MatX3d canon = canonical_expression_mesh(m, shape, expr);
  Image img(resolution, resolution, 3, std::numeric_limits<double>::quiet_NaN());
  for (int iy = 0; iy < resolution; ++iy)
    for (int ix = 0; ix < resolution; ++ix) {
      const UvSample& s = grid.at(ix, iy);
      if (s.face < 0) continue;
      Vector3d p = Vector3d::Zero();
      for (int k = 0; k < 3; ++k) p += s.bary[k] * canon.row(m.faces(s.face, k)).transpose();
      for (int c = 0; c < 3; ++c) img.at(c, iy, ix) = p[c];
    }
  return img;
}

}  // namespace gdhm
