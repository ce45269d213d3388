#include "gdhm/metrics.hpp"

#include "gdhm/kernels.hpp"

namespace gdhm {

double psnr(const Image& a, const Image& b) {
  if (!a.same_shape(b)) throw data_error("psnr: shape mismatch");
  const double mse = kernels::active_table().reduce_sq_diff(
                         a.data.data(), b.data.data(), static_cast<int>(a.size())) /
                     static_cast<double>(a.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

std::optional<double> masked_normal_error_deg(const Image& nhat, const Image& n,
                                              const Image& mask) {
  if (!nhat.same_shape(n)) throw data_error("masked_normal_error: shape mismatch");
  if (mask.h != nhat.h || mask.w != nhat.w) throw data_error("masked_normal_error: mask shape");
  double sum = 0;
  int count = 0;
  for (int y = 0; y < nhat.h; ++y)
    for (int x = 0; x < nhat.w; ++x) {
      if (mask.at(0, y, x) <= 0.5) continue;
      Vector3d u(nhat.at(0, y, x), nhat.at(1, y, x), nhat.at(2, y, x));
      Vector3d v(n.at(0, y, x), n.at(1, y, x), n.at(2, y, x));
      double dot = 0.0;  // zero-length vectors count as orthogonal
      if (u.norm() > 1e-12 && v.norm() > 1e-12)
        dot = std::clamp(u.normalized().dot(v.normalized()), -1.0, 1.0);
      sum += std::acos(dot);
      ++count;
    }
  if (count == 0) return std::nullopt;
  return (sum / count) * 180.0 / M_PI;
}

GradCheckResult grad_check(const std::function<double(const VectorXd&)>& f, const VectorXd& x0,
                           const VectorXd& analytic_grad, double step) {
  if (analytic_grad.size() != x0.size()) throw data_error("grad_check: gradient size mismatch");
  GradCheckResult res;
  VectorXd x = x0;
  for (int i = 0; i < x0.size(); ++i) {
    x[i] = x0[i] + step;
    const double fp = f(x);
    x[i] = x0[i] - step;
    const double fm = f(x);
    x[i] = x0[i];
    if (!std::isfinite(fp) || !std::isfinite(fm))
      throw numeric_error("grad_check: non-finite function value");
    const double fd = (fp - fm) / (2.0 * step);
    const double g = analytic_grad[i];
    if (!std::isfinite(g)) throw numeric_error("grad_check: non-finite analytic gradient");
    const double denom = std::max({std::abs(fd), std::abs(g), 1e-12});
    const double rel = std::abs(fd - g) / denom;
    if (rel > res.max_rel_err) {
      res.max_rel_err = rel;
      res.worst_index = i;
    }
  }
  return res;
}

}  // namespace gdhm
