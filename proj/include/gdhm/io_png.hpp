#pragma once

#include <string>

#include "gdhm/image.hpp"

namespace gdhm {

// 8-bit PNG (gray for c=1, rgb for c=3); values clamped to [0,1] and
// quantized as round(v*255).
void write_png8(const std::string& path, const Image& img);

// 16-bit PNG, quantized as round(v*65535). Callers encode signed data (e.g.
// normals) with their own affine map first.
void write_png16(const std::string& path, const Image& img);

// Reads 8- or 16-bit gray/rgb PNGs back to doubles in [0,1].
Image read_png(const std::string& path);

}  // namespace gdhm
