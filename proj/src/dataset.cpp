#include "gdhm/dataset.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>

#include "gdhm/io_gdhm.hpp"
#include "gdhm/io_png.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace gdhm {

namespace {

json camera_to_json(const Camera& c) {
  json j;
  j["name"] = c.name;
  j["width"] = c.width;
  j["height"] = c.height;
  j["fx"] = c.fx;
  j["fy"] = c.fy;
  j["cx"] = c.cx;
  j["cy"] = c.cy;
  j["near"] = c.near_plane;
  std::vector<double> rot(9);
  for (int r = 0; r < 3; ++r)
    for (int k = 0; k < 3; ++k) rot[r * 3 + k] = c.rot(r, k);
  j["rot"] = rot;  // world-to-camera, row-major
  j["trans"] = {c.trans.x(), c.trans.y(), c.trans.z()};
  return j;
}

Camera camera_from_json(const json& j) {
  Camera c;
  c.name = j.value("name", "");
  c.width = j.at("width").get<int>();
  c.height = j.at("height").get<int>();
  c.fx = j.at("fx").get<double>();
  c.fy = j.at("fy").get<double>();
  c.cx = j.at("cx").get<double>();
  c.cy = j.at("cy").get<double>();
  c.near_plane = j.value("near", 0.01);
  const auto rot = j.at("rot").get<std::vector<double>>();
  if (rot.size() != 9) throw data_error("cameras: rot must have 9 entries");
  for (int r = 0; r < 3; ++r)
    for (int k = 0; k < 3; ++k) c.rot(r, k) = rot[r * 3 + k];
  const auto t = j.at("trans").get<std::vector<double>>();
  if (t.size() != 3) throw data_error("cameras: trans must have 3 entries");
  c.trans = Vector3d(t[0], t[1], t[2]);
  c.validate();
  return c;
}

std::vector<double> to_vec(const VectorXd& v) { return {v.data(), v.data() + v.size()}; }

VectorXd from_vec(const std::vector<double>& v) {
  VectorXd out(v.size());
  std::copy(v.begin(), v.end(), out.data());
  return out;
}

}  // namespace

std::string image_rel_path(int view, int frame, const char* kind) {
  char buf[96];
  std::snprintf(buf, sizeof(buf), "images/view_%02d/frame_%04d_%s.png", view, frame, kind);
  return buf;
}

void write_cameras_json(const std::string& path, const std::vector<Camera>& cams) {
  json j = json::array();
  for (const auto& c : cams) j.push_back(camera_to_json(c));
  std::ofstream f(path);
  if (!f) throw data_error("cameras: cannot write " + path);
  f << j.dump(1) << "\n";
}

std::vector<Camera> read_cameras_json(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw data_error("cameras: cannot open " + path);
  json j;
  try {
    f >> j;
  } catch (const json::exception& e) {
    throw data_error(std::string("cameras: parse error: ") + e.what());
  }
  std::vector<Camera> cams;
  for (const auto& cj : j) cams.push_back(camera_from_json(cj));
  return cams;
}

void write_tracks_json(const std::string& path, const Tracks& tracks) {
  json j;
  j["shape"] = to_vec(tracks.shape);
  json frames = json::array();
  for (const auto& ft : tracks.frames) {
    json fj;
    fj["expr"] = to_vec(ft.expr);
    json joints = json::array();
    for (int r = 0; r < ft.joint_rot.rows(); ++r)
      joints.push_back({ft.joint_rot(r, 0), ft.joint_rot(r, 1), ft.joint_rot(r, 2)});
    fj["joints"] = joints;
    fj["rot"] = {ft.rot.x(), ft.rot.y(), ft.rot.z()};
    fj["trans"] = {ft.trans.x(), ft.trans.y(), ft.trans.z()};
    fj["latent"] = to_vec(ft.latent);
    frames.push_back(std::move(fj));
  }
  j["frames"] = std::move(frames);
  std::ofstream f(path);
  if (!f) throw data_error("tracks: cannot write " + path);
  f << j.dump(1) << "\n";
}

Tracks read_tracks_json(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw data_error("tracks: cannot open " + path);
  json j;
  try {
    f >> j;
  } catch (const json::exception& e) {
    throw data_error(std::string("tracks: parse error: ") + e.what());
  }
  Tracks t;
  t.shape = from_vec(j.at("shape").get<std::vector<double>>());
  for (const auto& fj : j.at("frames")) {
    FrameTrack ft;
    ft.expr = from_vec(fj.at("expr").get<std::vector<double>>());
    const auto joints = fj.at("joints");
    ft.joint_rot.resize(joints.size(), 3);
    for (size_t r = 0; r < joints.size(); ++r)
      for (int k = 0; k < 3; ++k) ft.joint_rot(static_cast<int>(r), k) = joints[r][k];
    const auto rot = fj.at("rot").get<std::vector<double>>();
    const auto trans = fj.at("trans").get<std::vector<double>>();
    ft.rot = Vector3d(rot[0], rot[1], rot[2]);
    ft.trans = Vector3d(trans[0], trans[1], trans[2]);
    ft.latent = from_vec(fj.at("latent").get<std::vector<double>>());
    t.frames.push_back(std::move(ft));
  }
  return t;
}

Image encode_signed(const Image& img) {
  Image out = img;
  for (auto& x : out.data) x = x * 0.5 + 0.5;
  return out;
}

Image decode_signed(const Image& img) {
  Image out = img;
  for (auto& x : out.data) x = x * 2.0 - 1.0;
  return out;
}

uint64_t hash_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw data_error("manifest: cannot hash missing file " + path);
  uint64_t h = 0xcbf29ce484222325ull;
  char buf[65536];
  while (f) {
    f.read(buf, sizeof(buf));
    h = fnv1a(buf, static_cast<size_t>(f.gcount()), h);
  }
  return h;
}

void write_manifest(const std::string& root, const BundleMeta& meta,
                    const std::vector<std::string>& rel_paths) {
  json j;
  j["views"] = meta.views;
  j["frames"] = meta.frames;
  j["resolution"] = meta.resolution;
  j["remesh_resolution"] = meta.remesh_resolution;
  j["remesh_max_hops"] = meta.remesh_max_hops;
  j["gaussians_per_triangle"] = meta.gaussians_per_triangle;
  json files = json::object();
  for (const auto& rel : rel_paths) {
    char hex[32];
    std::snprintf(hex, sizeof(hex), "%016llx",
                  static_cast<unsigned long long>(hash_file(root + "/" + rel)));
    files[rel] = hex;
  }
  j["files"] = std::move(files);
  std::ofstream f(root + "/manifest.json");
  if (!f) throw data_error("manifest: cannot write in " + root);
  f << j.dump(1) << "\n";
}

bool DatasetBundle::has_ground_truth() const {
  return fs::exists(fs::path(root) / "gt" / "tracks.json");
}

Tracks DatasetBundle::ground_truth_tracks() const {
  return read_tracks_json(root + "/gt/tracks.json");
}

DatasetBundle load_bundle(const std::string& root) {
  DatasetBundle b;
  b.root = root;
  std::ifstream mf(root + "/manifest.json");
  if (!mf) throw data_error("bundle: missing manifest.json in " + root);
  json j;
  try {
    mf >> j;
  } catch (const json::exception& e) {
    throw data_error(std::string("bundle: manifest parse error: ") + e.what());
  }
  b.meta.views = j.at("views").get<int>();
  b.meta.frames = j.at("frames").get<int>();
  b.meta.resolution = j.at("resolution").get<int>();
  b.meta.remesh_resolution = j.value("remesh_resolution", 0);
  b.meta.remesh_max_hops = j.value("remesh_max_hops", 5);
  b.meta.gaussians_per_triangle = j.value("gaussians_per_triangle", 1);

  for (const auto& [rel, hex] : j.at("files").items()) {
    const std::string full = root + "/" + rel;
    if (!fs::exists(full)) throw data_error("bundle: missing file " + rel);
    char expect[32];
    std::snprintf(expect, sizeof(expect), "%016llx",
                  static_cast<unsigned long long>(hash_file(full)));
    if (hex.get<std::string>() != expect)
      throw data_error("bundle: hash mismatch for " + rel);
  }
  // every modality must be listed for every (view, frame)
  for (int v = 0; v < b.meta.views; ++v)
    for (int fidx = 0; fidx < b.meta.frames; ++fidx)
      for (const char* kind : {"rgb", "normal", "mask", "posemap"}) {
        const std::string rel = image_rel_path(v, fidx, kind);
        if (!j.at("files").contains(rel))
          throw data_error("bundle: manifest missing modality " + rel);
      }

  b.cameras = read_cameras_json(root + "/cameras.json");
  b.tracks = read_tracks_json(root + "/tracks.json");
  b.model = load_model(root + "/model.gdhm");
  if (static_cast<int>(b.cameras.size()) != b.meta.views)
    throw data_error("bundle: camera count differs from manifest views");
  if (static_cast<int>(b.tracks.frames.size()) != b.meta.frames)
    throw data_error("bundle: track count differs from manifest frames");

  const int n = b.meta.views * b.meta.frames;
  b.rgb_cache.resize(n);
  b.normal_cache.resize(n);
  b.mask_cache.resize(n);
  parallel_for(n, worker_threads(), [&](int i) {
    const int v = i / b.meta.frames, fidx = i % b.meta.frames;
    b.rgb_cache[i] = read_png(root + "/" + image_rel_path(v, fidx, "rgb"));
    b.normal_cache[i] = decode_signed(read_png(root + "/" + image_rel_path(v, fidx, "normal")));
    b.mask_cache[i] = read_png(root + "/" + image_rel_path(v, fidx, "mask"));
  });
  return b;
}

}  // namespace gdhm
