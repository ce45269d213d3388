#pragma once

#include <functional>
#include <optional>

#include "gdhm/image.hpp"
#include "gdhm/losses.hpp"

namespace gdhm {

// 10*log10(1/MSE) for unit dynamic range; +inf when the images are equal.
double psnr(const Image& a, const Image& b);

// Mean angular error in degrees over pixels where mask > 0.5; absent when the
// mask is empty. Zero-length normals count as 90 degrees.
std::optional<double> masked_normal_error_deg(const Image& rendered_normal,
                                              const Image& target_normal, const Image& mask);

struct GradCheckResult {
  double max_rel_err = 0;
  int worst_index = -1;
};

// Central finite differences of a scalar function vs. a provided analytic
// gradient; relative error denominators are guarded at 1e-12. Throws
// numeric_error on non-finite values.
GradCheckResult grad_check(const std::function<double(const VectorXd&)>& f, const VectorXd& x0,
                           const VectorXd& analytic_grad, double step = 1e-4);

}  // namespace gdhm
