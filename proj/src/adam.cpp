#include "gdhm/adam.hpp"

#include "gdhm/kernels.hpp"

namespace gdhm {

void AdamState::step(double* params, const double* grad, double lr) {
  ++t;
  const double b1t = std::pow(beta1, static_cast<double>(t));
  const double b2t = std::pow(beta2, static_cast<double>(t));
  kernels::active_table().adam_step(params, grad, m.data(), v.data(), size(), lr, beta1,
                                    beta2, eps, b1t, b2t);
}

void AdamState::remove_rows(const std::vector<int>& sorted_rows, int row_width) {
  if (sorted_rows.empty()) return;
  const int n_rows = size() / row_width;
  std::vector<uint8_t> drop(n_rows, 0);
  for (int r : sorted_rows) drop[r] = 1;
  int out = 0;
  for (int r = 0; r < n_rows; ++r) {
    if (drop[r]) continue;
    for (int k = 0; k < row_width; ++k) {
      m[out * row_width + k] = m[r * row_width + k];
      v[out * row_width + k] = v[r * row_width + k];
    }
    ++out;
  }
  m.conservativeResize(out * row_width);
  v.conservativeResize(out * row_width);
}

}  // namespace gdhm
