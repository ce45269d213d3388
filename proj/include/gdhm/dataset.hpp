#pragma once

#include <string>
#include <vector>

#include "gdhm/camera.hpp"
#include "gdhm/head_model.hpp"
#include "gdhm/image.hpp"

namespace gdhm {

// Per-frame tracked parameters plus the (opaque) expression latent.
struct FrameTrack {
  VectorXd expr;
  MatX3d joint_rot;
  Vector3d rot = Vector3d::Zero();
  Vector3d trans = Vector3d::Zero();
  VectorXd latent;
};

struct Tracks {
  VectorXd shape;
  std::vector<FrameTrack> frames;
};

struct BundleMeta {
  int views = 0;
  int frames = 0;
  int resolution = 0;
  int remesh_resolution = 0;
  int remesh_max_hops = 5;
  int gaussians_per_triangle = 1;
};

// On-disk dataset: manifest.json (counts + per-file hashes, written last as
// the commit point), cameras.json, tracks.json, model.gdhm and one
// rgb/normal/mask/posemap PNG per (view, frame). Normal-type PNGs use the
// affine encoding channel = round((n*0.5+0.5)*65535).
struct DatasetBundle {
  std::string root;
  BundleMeta meta;
  std::vector<Camera> cameras;
  Tracks tracks;
  HeadModel model;

  // Decoded image cache, indexed [view * frames + frame].
  std::vector<Image> rgb_cache, normal_cache, mask_cache;

  const Image& rgb(int view, int frame) const { return rgb_cache[view * meta.frames + frame]; }
  const Image& normal(int view, int frame) const {
    return normal_cache[view * meta.frames + frame];
  }
  const Image& mask(int view, int frame) const {
    return mask_cache[view * meta.frames + frame];
  }

  bool has_ground_truth() const;
  Tracks ground_truth_tracks() const;
};

std::string image_rel_path(int view, int frame, const char* kind);

void write_cameras_json(const std::string& path, const std::vector<Camera>& cams);
std::vector<Camera> read_cameras_json(const std::string& path);
void write_tracks_json(const std::string& path, const Tracks& tracks);
Tracks read_tracks_json(const std::string& path);

// Signed-to-unit encoding used for normal and pose-map images.
Image encode_signed(const Image& img);   // [-1,1] -> [0,1]
Image decode_signed(const Image& img);   // [0,1] -> [-1,1]

// Hashes every file listed and writes manifest.json (the commit point).
void write_manifest(const std::string& root, const BundleMeta& meta,
                    const std::vector<std::string>& rel_paths);

// Verifies the manifest (all files present, hashes match) and loads
// everything including the decoded image cache. Throws data_error on any
// missing or corrupted piece.
DatasetBundle load_bundle(const std::string& root);

uint64_t hash_file(const std::string& path);

}  // namespace gdhm
