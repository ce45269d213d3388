#pragma once

#include <cstdint>

namespace gdhm::kernels {

// Splats binned to one tile, SoA layout. Conic is the packed inverse 2D
// covariance [a b; b c]; feat holds six composited channels (rgb + normal).
struct TileSplats {
  int count = 0;
  const double* mx = nullptr;
  const double* my = nullptr;
  const double* ca = nullptr;
  const double* cb = nullptr;
  const double* cc = nullptr;
  const double* opacity = nullptr;
  const double* feat[6] = {nullptr, nullptr, nullptr, nullptr, nullptr, nullptr};
};

// Gradient output of the backward compositing kernel, same indexing as the
// TileSplats it was produced from. Buffers must be zero-initialized.
struct TileSplatGrads {
  double* mx = nullptr;
  double* my = nullptr;
  double* ca = nullptr;
  double* cb = nullptr;
  double* cc = nullptr;
  double* opacity = nullptr;
  double* feat[6] = {nullptr, nullptr, nullptr, nullptr, nullptr, nullptr};
};

// One dispatchable kernel set. `scalar_table()` is the reference
// implementation; wider variants must match it within tight tolerances
// (see tests/test_kernels.cpp).
struct Table {
  const char* name;

  // Valid-range separable convolution. Horizontal: dst is (w-ntaps+1) x h.
  // Vertical: dst is w x (h-ntaps+1). Row-major, single channel.
  void (*conv_h_valid)(const double* src, int w, int h, const double* taps, int ntaps,
                       double* dst);
  void (*conv_v_valid)(const double* src, int w, int h, const double* taps, int ntaps,
                       double* dst);

  double (*reduce_abs_diff)(const double* a, const double* b, int n);
  double (*reduce_sq_diff)(const double* a, const double* b, int n);
  void (*mul_ew)(const double* a, const double* b, double* out, int n);
  // ga[i] += coef * sign(a[i] - b[i])
  void (*l1_grad_acc)(const double* a, const double* b, double coef, double* ga, int n);

  // Bias-corrected adaptive-moment step: b1t/b2t are beta^t powers at the
  // current step.
  void (*adam_step)(double* p, const double* g, double* m, double* v, int n, double lr,
                    double b1, double b2, double eps, double b1t, double b2t);

  // Front-to-back alpha compositing of the tile's splat list over the pixel
  // block [x0,x0+tw) x [y0,y0+th). Pixel coordinates are sample centers
  // (x+0.5, y+0.5). T (transmittance, init 1) and accum (6 planes of tw*th,
  // init 0) are updated in place. Per pixel, a splat contributes only while
  // T >= stop_eps.
  void (*composite_tile_fwd)(const TileSplats& s, int x0, int y0, int tw, int th,
                             double stop_eps, double* T, double* accum);

  // Exact adjoint of composite_tile_fwd (including the background composite
  // out_c = accum_c + T*bg_c and alpha = 1 - T). d_out holds 7 upstream
  // planes of tw*th: channels 0..5 features, channel 6 alpha. scratch must
  // hold at least 8 * count doubles. Gradients are accumulated into g.
  void (*composite_tile_bwd)(const TileSplats& s, int x0, int y0, int tw, int th,
                             double stop_eps, const double* d_out, const double* bg,
                             double* scratch, const TileSplatGrads& g);
};

const Table& scalar_table();
bool avx2_available();      // compiled in and supported by this CPU
const Table& avx2_table();  // valid only if avx2_available()

// Table selected at first use: AVX2 when available unless the environment
// variable GDHM_KERNELS=scalar forces the reference path.
const Table& active_table();
void force_table(const Table* t);  // nullptr restores automatic selection

}  // namespace gdhm::kernels
