#pragma once

#include "gdhm/common.hpp"

namespace gdhm {

// Per-group adaptive moment estimation state. Steps run through the
// dispatched kernels.
struct AdamState {
  VectorXd m, v;
  int64_t t = 0;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-15;

  void init(int n) {
    m = VectorXd::Zero(n);
    v = VectorXd::Zero(n);
    t = 0;
  }
  int size() const { return static_cast<int>(m.size()); }

  // params/grad must alias n contiguous doubles.
  void step(double* params, const double* grad, double lr);

  // Drops per-row state when Gaussians are pruned (row_width consecutive
  // elements per row).
  void remove_rows(const std::vector<int>& sorted_row_indices, int row_width);
};

}  // namespace gdhm
